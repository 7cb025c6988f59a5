// Command-line front end: dataset generation, feature partitioning, graph
// clustering, fits in all three modes, evaluation, and trajectory export.
//
// Exit codes: 0 converged / success, 1 error, 2 stopped at max_iters.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vpem/datagen.hpp"
#include "vpem/dataset.hpp"
#include "vpem/engine_dec.hpp"
#include "vpem/engine_fl.hpp"
#include "vpem/errors.hpp"
#include "vpem/eval.hpp"
#include "vpem/params_io.hpp"
#include "vpem/trace_io.hpp"

namespace fs = std::filesystem;
using namespace vpem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

Graph parse_graph_spec(const std::string& spec, std::uint64_t seed) {
  const auto parts = split(spec, ':');
  const std::string& kind = parts[0];
  auto need = [&](std::size_t n) {
    if (parts.size() < n + 1)
      throw InvalidParameter("graph spec '" + spec + "': expected " +
                             std::to_string(n) + " arguments");
  };
  if (kind == "cycle") {
    need(1);
    return gen_cycle(std::stoi(parts[1]));
  }
  if (kind == "star") {
    need(1);
    return gen_star(std::stoi(parts[1]));
  }
  if (kind == "geometric") {
    need(2);
    const std::uint64_t s = parts.size() > 3 ? std::stoull(parts[3]) : seed;
    return gen_random_geometric(std::stoi(parts[1]), std::stod(parts[2]), s);
  }
  if (kind == "scalefree") {
    need(2);
    const std::uint64_t s = parts.size() > 3 ? std::stoull(parts[3]) : seed;
    return gen_scale_free(std::stoi(parts[1]), std::stoi(parts[2]), s);
  }
  if (kind == "file") {
    need(1);
    return load_graph(spec.substr(5));
  }
  throw InvalidParameter("graph spec '" + spec +
                         "': kind must be cycle, star, geometric, scalefree "
                         "or file");
}

FeatureAssignment load_assignment(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("assignment: cannot parse " + path + ": " + e.what());
  }
  const auto list = j.at("agent_of_feature").get<std::vector<int>>();
  return assign_features(static_cast<int>(list.size()),
                         j.at("agents").get<int>(), AssignScheme::by_list,
                         list);
}

void save_assignment(const FeatureAssignment& fa, const std::string& path) {
  ordered_json j;
  j["agents"] = fa.agents;
  j["d"] = fa.d();
  j["agent_of_feature"] = fa.agent_of_feature;
  write_file_atomic(path, j.dump(2) + "\n");
}

// Shared fit flags; mirrored in the JSON config file (same key names, flags
// win over the file).
struct FitConfig {
  std::string mode = "centralized";
  std::string data;
  std::string graph;
  std::string assignment_file;
  int agents = 0;
  int k = 2;
  int hops = 0;
  std::uint64_t seed = 0;
  int consensus_rounds = 100;
  bool consensus_exact = false;
  std::string init = "kmeanspp";
  std::string init_params_file;
  double tol_abs = 1e-6;
  double tol_rel = 1e-8;
  int max_iters = 200;
  int batch = 0;
  int restarts = 1;
  bool deterministic_ties = false;
  bool reseed_empty = false;
  bool do_standardize = false;
  bool serial = false;
  std::string out_dir = "out";
};

InitStrategy parse_init(const std::string& s) {
  if (s == "kmeanspp") return InitStrategy::kmeanspp_means;
  if (s == "random-resp") return InitStrategy::random_responsibility;
  throw InvalidParameter("init must be kmeanspp or random-resp, got '" + s +
                         "'");
}

std::uint64_t restart_seed(std::uint64_t base, int r) {
  return r == 0 ? base : mix64(base + 0x9e3779b9ull * static_cast<unsigned>(r));
}

void write_gamma_csv(const Matrix& gamma, const std::string& path) {
  Dataset wrapper;
  wrapper.m = gamma.rows;
  wrapper.d = gamma.cols;
  wrapper.x = gamma;
  save_csv(wrapper, path);
}

struct FitOutput {
  FitTrace trace;
  int exit_code = 0;
};

FitOutput run_fit(const FitConfig& cfg) {
  if (cfg.data.empty()) throw InvalidParameter("fit: --data is required");
  Dataset ds = load_csv(cfg.data);
  StandardizeTransform transform;
  if (cfg.do_standardize) {
    auto [std_ds, t] = standardize(ds);
    ds = std::move(std_ds);
    transform = std::move(t);
  }
  const Exec exec = cfg.serial ? Exec::serial : Exec::parallel;
  fs::create_directories(cfg.out_dir);
  const auto out = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };

  StopSpec stop{cfg.tol_abs, cfg.tol_rel, cfg.max_iters};
  std::optional<GmmParams> explicit_init;
  if (!cfg.init_params_file.empty()) {
    explicit_init = load_params(cfg.init_params_file);
    if (explicit_init->layout.num_blocks() != 1)
      throw InvalidParameter(
          "fit: --init-params expects a dense-layout document in original "
          "feature order");
  }

  std::vector<TraceRecord> records;
  GmmParams theta_original;
  Matrix gamma;
  FitTrace trace;
  ordered_json meta;
  meta["mode"] = cfg.mode;
  meta["seed"] = cfg.seed;
  meta["standardized"] = cfg.do_standardize;
  if (cfg.do_standardize) {
    meta["standardize_mean"] = transform.mean;
    meta["standardize_scale"] = transform.scale;
  }

  auto resolve_assignment = [&](int default_agents) -> FeatureAssignment {
    if (!cfg.assignment_file.empty())
      return load_assignment(cfg.assignment_file);
    const int n = cfg.agents > 0 ? cfg.agents : default_agents;
    if (n <= 0) throw InvalidParameter("fit: need --agents or --assignment");
    return assign_features(ds.d, n, AssignScheme::even);
  };

  if (cfg.mode == "centralized") {
    const bool constrained = cfg.agents > 0 || !cfg.assignment_file.empty();
    std::vector<int> perm(ds.d);
    for (int j = 0; j < ds.d; ++j) perm[j] = j;
    BlockLayout layout = BlockLayout::dense(ds.d);
    Dataset working = ds;
    if (constrained) {
      const auto assign = resolve_assignment(0);
      perm = grouping_permutation(assign);
      if (!is_identity_permutation(perm)) working = permute_features(ds, perm);
      layout = BlockLayout::from_dims(assign.agent_dims());
    }
    FitResult best;
    double best_ll = 0.0;
    for (int r = 0; r < cfg.restarts; ++r) {
      InitSpec init;
      init.strategy = parse_init(cfg.init);
      init.seed = restart_seed(cfg.seed, r);
      if (explicit_init)
        init.explicit_params =
            params_from_original_order(*explicit_init, perm, layout);
      FitOptions opts;
      opts.reseed_empty = cfg.reseed_empty;
      opts.exec = exec;
      auto fit = fit_centralized(working, cfg.k, layout, init, stop, opts);
      if (r == 0 || fit.trace.ll.back() > best_ll) {
        best_ll = fit.trace.ll.back();
        best = std::move(fit);
      }
    }
    trace = best.trace;
    for (int t = 0; t < trace.iterations; ++t) {
      TraceRecord rec;
      rec["mode"] = "centralized";
      rec["iteration"] = t;
      rec["ll"] = trace.ll[t];
      rec["delta_ll"] = t == 0 ? 0.0 : trace.ll[t] - trace.ll[t - 1];
      records.push_back(std::move(rec));
    }
    theta_original = constrained
                         ? params_to_original_order(best.params, perm)
                         : best.params;
    gamma = best.resp.gamma;
  } else if (cfg.mode == "fl") {
    const auto assign = resolve_assignment(0);
    Graph star = cfg.graph.empty() ? gen_star(assign.agents + 1)
                                   : parse_graph_spec(cfg.graph, cfg.seed);
    FlResult best;
    double best_ll = 0.0;
    for (int r = 0; r < cfg.restarts; ++r) {
      FlOptions opts;
      opts.init.strategy = parse_init(cfg.init);
      opts.init.seed = restart_seed(cfg.seed, r);
      opts.stop = stop;
      opts.batch = cfg.batch;
      opts.reseed_empty = cfg.reseed_empty;
      opts.exec = exec;
      opts.batch_seed = cfg.seed;
      if (explicit_init) {
        const auto perm = grouping_permutation(assign);
        opts.init.explicit_params = params_from_original_order(
            *explicit_init, perm, BlockLayout::from_dims(assign.agent_dims()));
      }
      auto fit = fit_fl(ds, star, assign, cfg.k, opts);
      if (r == 0 || fit.trace.ll.back() > best_ll) {
        best_ll = fit.trace.ll.back();
        best = std::move(fit);
      }
    }
    trace = best.trace;
    for (int t = 0; t < trace.iterations; ++t) {
      TraceRecord rec;
      rec["mode"] = "fl";
      rec["iteration"] = t;
      rec["ll"] = trace.ll[t];
      rec["delta_ll"] = t == 0 ? 0.0 : trace.ll[t] - trace.ll[t - 1];
      rec["comm_up_scalars"] = best.comm.up_per_iteration[t];
      rec["comm_down_scalars"] = best.comm.down_per_iteration[t];
      records.push_back(std::move(rec));
    }
    theta_original =
        is_identity_permutation(best.feature_perm)
            ? best.params
            : params_to_original_order(best.params, best.feature_perm);
    gamma = best.resp.gamma;
    meta["comm_up_scalars_total"] = best.comm.up_scalars;
    meta["comm_down_scalars_total"] = best.comm.down_scalars;
  } else if (cfg.mode == "decentralized") {
    if (cfg.graph.empty())
      throw InvalidParameter("fit: decentralized mode requires --graph");
    const Graph g = parse_graph_spec(cfg.graph, cfg.seed);
    const auto assign = resolve_assignment(g.n);
    DecResult best;
    double best_ll = 0.0;
    for (int r = 0; r < cfg.restarts; ++r) {
      DecOptions opts;
      opts.init.strategy = parse_init(cfg.init);
      opts.init.seed = restart_seed(cfg.seed, r);
      opts.stop = stop;
      opts.batch = cfg.batch;
      opts.consensus = {cfg.consensus_rounds,
                        cfg.consensus_exact ? ConsensusMode::exact_oracle
                                            : ConsensusMode::iterative};
      opts.reseed_empty = cfg.reseed_empty;
      opts.exec = exec;
      opts.ties = cfg.deterministic_ties ? TieBreak::lowest_id
                                         : TieBreak::seeded_random;
      opts.cluster_seed = cfg.seed;
      opts.batch_seed = cfg.seed;
      if (explicit_init) {
        const auto plan = plan_decentralized(g, cfg.hops, assign,
                                             opts.cluster_seed, opts.ties);
        const auto group = grouping_permutation(assign);
        std::vector<int> total(ds.d);
        for (int j = 0; j < ds.d; ++j) total[j] = plan.feature_perm[group[j]];
        opts.init.explicit_params =
            params_from_original_order(*explicit_init, total, plan.layout);
      }
      auto fit = fit_decentralized(ds, g, assign, cfg.hops, cfg.k, opts);
      if (r == 0 || fit.trace.ll.back() > best_ll) {
        best_ll = fit.trace.ll.back();
        best = std::move(fit);
      }
    }
    trace = best.trace;
    for (int t = 0; t < trace.iterations; ++t) {
      TraceRecord rec;
      rec["mode"] = "decentralized";
      rec["iteration"] = t;
      rec["ll_mean"] = best.iters[t].ll_mean;
      rec["ll_max_disagreement"] = best.iters[t].ll_max_disagreement;
      rec["consensus_invocations"] = best.iters[t].consensus_invocations;
      rec["rounds"] = best.iters[t].rounds;
      rec["scalars_on_wire"] = best.iters[t].scalars_on_wire;
      records.push_back(std::move(rec));
    }
    theta_original = params_to_original_order(best.params, best.feature_perm);
    gamma = best.resp_mean.gamma;
    meta["leaf_root_transfers"] = best.comm.leaf_root_transfers;
    meta["consensus_invocations_total"] = best.comm.consensus_invocations;
    write_file_atomic(out("hubs.txt"), hub_table(best.hubs.partition));
  } else {
    throw InvalidParameter(
        "fit: mode must be centralized, fl or decentralized, got '" +
        cfg.mode + "'");
  }

  save_params(theta_original, out("theta.json"));
  save_trace(records, out("trace.jsonl"));
  write_gamma_csv(gamma, out("gamma.csv"));
  Responsibilities resp;
  resp.gamma = gamma;
  save_labels(hard_assign(resp), out("assignments.txt"));
  meta["iterations"] = trace.iterations;
  meta["converged"] = trace.converged;
  meta["final_ll"] = trace.ll.back();
  write_file_atomic(out("fit_meta.json"), meta.dump(2) + "\n");

  std::printf("%s fit: %d iterations, final ll %.6f, %s\n", cfg.mode.c_str(),
              trace.iterations, trace.ll.back(),
              trace.converged ? "converged" : "max_iters");
  FitOutput result;
  result.trace = trace;
  result.exit_code = trace.converged ? 0 : 2;
  return result;
}

// Applies config-file values for options the user did not pass on the
// command line; explicit flags always win.
class ConfigBinding {
 public:
  explicit ConfigBinding(json cfg) : cfg_(std::move(cfg)) {}

  template <class T>
  void bind(CLI::Option* opt, T& var, const std::string& key) {
    appliers_.push_back([opt, &var, key, this]() {
      if (opt->count() == 0 && cfg_.contains(key)) var = cfg_[key].get<T>();
    });
  }

  void apply() {
    for (auto& f : appliers_) f();
  }

 private:
  json cfg_;
  std::vector<std::function<void()>> appliers_;
};

json preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") {
      try {
        return json::parse(read_file(argv[i + 1]));
      } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
      }
    }
  return json::object();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian mixture fitting over feature-partitioned data"};
  app.require_subcommand(1);

  json cfg_json;
  try {
    cfg_json = preload_config(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  ConfigBinding binding(cfg_json);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override it");

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "sample a synthetic mixture");
  int gen_k = 3, gen_d = 10, gen_m = 1000;
  std::uint64_t gen_seed = 0;
  double gen_sep = 4.0;
  std::string gen_out = "out";
  binding.bind(gen->add_option("--k", gen_k, "components"), gen_k, "k");
  binding.bind(gen->add_option("--d", gen_d, "features"), gen_d, "d");
  binding.bind(gen->add_option("--m", gen_m, "examples"), gen_m, "m");
  binding.bind(gen->add_option("--seed", gen_seed, "seed"), gen_seed, "seed");
  binding.bind(gen->add_option("--separation", gen_sep,
                               "mean separation in component radii"),
               gen_sep, "separation");
  binding.bind(gen->add_option("--out-dir", gen_out, "output directory"),
               gen_out, "out_dir");

  // ---- partition ----
  auto* part = app.add_subcommand("partition", "assign features to agents");
  int part_d = 0, part_agents = 0;
  std::string part_scheme = "even", part_list, part_out = "assignment.json";
  part->add_option("--d", part_d, "features")->required();
  part->add_option("--agents", part_agents, "agent count")->required();
  part->add_option("--scheme", part_scheme, "even or list");
  part->add_option("--list", part_list, "comma-separated agent per feature");
  part->add_option("--out", part_out, "output file");

  // ---- cluster-graph ----
  auto* cg = app.add_subcommand("cluster-graph", "greedy h-hop hub extraction");
  std::string cg_graph, cg_out = "hubs.txt", cg_assignment;
  int cg_hops = 1;
  std::uint64_t cg_seed = 0;
  bool cg_det = false;
  cg->add_option("--graph", cg_graph, "graph spec or file:PATH")->required();
  cg->add_option("--hops", cg_hops, "h");
  cg->add_option("--seed", cg_seed, "tie-break seed");
  cg->add_flag("--deterministic-ties", cg_det, "lowest-id tie breaking");
  cg->add_option("--assignment", cg_assignment, "assignment file for ranges");
  cg->add_option("--out", cg_out, "output file");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "run EM in one of three modes");
  FitConfig fc;
  binding.bind(
      fit->add_option("--mode", fc.mode, "centralized | fl | decentralized"),
      fc.mode, "mode");
  binding.bind(fit->add_option("--data", fc.data, "dataset CSV"), fc.data,
               "data");
  binding.bind(fit->add_option("--graph", fc.graph, "graph spec"), fc.graph,
               "graph");
  binding.bind(fit->add_option("--assignment", fc.assignment_file,
                               "feature assignment file"),
               fc.assignment_file, "assignment");
  binding.bind(fit->add_option("--agents", fc.agents, "even split over N"),
               fc.agents, "agents");
  binding.bind(fit->add_option("--k", fc.k, "components"), fc.k, "k");
  binding.bind(fit->add_option("--hops", fc.hops, "hub radius h"), fc.hops,
               "hops");
  binding.bind(fit->add_option("--seed", fc.seed, "seed"), fc.seed, "seed");
  binding.bind(fit->add_option("--consensus-rounds", fc.consensus_rounds,
                               "rounds per average"),
               fc.consensus_rounds, "consensus_rounds");
  binding.bind(fit->add_flag("--consensus-exact", fc.consensus_exact,
                             "exact-average oracle mode"),
               fc.consensus_exact, "consensus_exact");
  binding.bind(fit->add_option("--init", fc.init, "kmeanspp | random-resp"),
               fc.init, "init");
  binding.bind(fit->add_option("--init-params", fc.init_params_file,
                               "dense theta document to start from"),
               fc.init_params_file, "init_params");
  binding.bind(fit->add_option("--tol-abs", fc.tol_abs, "stop tolerance"),
               fc.tol_abs, "tol_abs");
  binding.bind(fit->add_option("--tol-rel", fc.tol_rel, "stop tolerance"),
               fc.tol_rel, "tol_rel");
  binding.bind(fit->add_option("--max-iters", fc.max_iters, "iteration cap"),
               fc.max_iters, "max_iters");
  binding.bind(fit->add_option("--batch", fc.batch, "examples per iteration"),
               fc.batch, "batch");
  binding.bind(fit->add_option("--restarts", fc.restarts, "best-of restarts"),
               fc.restarts, "restarts");
  binding.bind(fit->add_flag("--deterministic-ties", fc.deterministic_ties,
                             "lowest-id hub tie breaking"),
               fc.deterministic_ties, "deterministic_ties");
  binding.bind(fit->add_flag("--reseed-empty", fc.reseed_empty,
                             "reseed dead components instead of failing"),
               fc.reseed_empty, "reseed_empty");
  binding.bind(fit->add_flag("--standardize", fc.do_standardize,
                             "standardize features first"),
               fc.do_standardize, "standardize");
  binding.bind(fit->add_flag("--serial", fc.serial, "disable OpenMP kernels"),
               fc.serial, "serial");
  binding.bind(fit->add_option("--out-dir", fc.out_dir, "output directory"),
               fc.out_dir, "out_dir");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "clustering accuracy against labels");
  std::string ev_gamma, ev_labels, ev_data, ev_confusion;
  std::string ev_out = "out";
  int ev_k = 0, ev_restarts = 10;
  std::uint64_t ev_seed = 0;
  bool ev_kmeans = false, ev_standardize = false;
  ev->add_option("--gamma", ev_gamma, "responsibilities CSV")->required();
  ev->add_option("--labels", ev_labels, "labels file")->required();
  ev->add_option("--k", ev_k, "cluster count (default: gamma columns)");
  ev->add_option("--out-dir", ev_out, "output directory");
  ev->add_flag("--kmeans-baseline", ev_kmeans, "also run the baseline");
  ev->add_option("--data", ev_data, "dataset CSV for the baseline");
  ev->add_flag("--standardize", ev_standardize, "standardize baseline data");
  ev->add_option("--restarts", ev_restarts, "baseline restarts");
  ev->add_option("--seed", ev_seed, "baseline seed");
  ev->add_option("--confusion-csv", ev_confusion, "write confusion matrix");

  // ---- trajectories ----
  auto* traj = app.add_subcommand("trajectories", "merge traces for plotting");
  std::vector<std::string> traj_inputs;
  std::string traj_out = "trajectories.csv";
  bool traj_force = false;
  traj->add_option("traces", traj_inputs, "trace files")->required();
  traj->add_option("--out", traj_out, "output CSV");
  traj->add_flag("--force", traj_force, "allow mixing modes");

  CLI11_PARSE(app, argc, argv);
  binding.apply();

  try {
    if (*gen) {
      const GmmParams truth = random_gmm(gen_k, gen_d, gen_seed, gen_sep);
      const Dataset ds = sample_gmm(truth, gen_m, gen_seed);
      fs::create_directories(gen_out);
      save_csv(ds, (fs::path(gen_out) / "data.csv").string());
      save_labels(ds.labels, (fs::path(gen_out) / "labels.txt").string());
      save_params(truth, (fs::path(gen_out) / "theta_true.json").string());
      std::printf("generated M=%d d=%d K=%d -> %s\n", gen_m, gen_d, gen_k,
                  gen_out.c_str());
      return 0;
    }
    if (*part) {
      std::vector<int> list;
      if (!part_list.empty())
        for (const auto& tok : split(part_list, ','))
          list.push_back(std::stoi(tok));
      const auto fa = assign_features(
          part_d, part_agents,
          part_scheme == "even" ? AssignScheme::even : AssignScheme::by_list,
          list);
      save_assignment(fa, part_out);
      std::printf("assignment: d=%d over %d agents -> %s\n", part_d,
                  part_agents, part_out.c_str());
      return 0;
    }
    if (*cg) {
      const Graph g = parse_graph_spec(cg_graph, cg_seed);
      const auto partn = cluster_hubs(
          g, cg_hops, cg_seed,
          cg_det ? TieBreak::lowest_id : TieBreak::seeded_random);
      std::vector<int> dims(g.n, 1);
      if (!cg_assignment.empty())
        dims = load_assignment(cg_assignment).agent_dims();
      const auto hl = assign_feature_blocks(partn, dims);
      write_file_atomic(cg_out, hub_table(hl.partition));
      std::printf("%s", hub_table(hl.partition).c_str());
      return 0;
    }
    if (*fit) return run_fit(fc).exit_code;
    if (*ev) {
      const Dataset gamma_ds = load_csv(ev_gamma);
      const auto labels = load_labels(ev_labels);
      if (static_cast<int>(labels.size()) != gamma_ds.m)
        throw DimensionMismatch("eval: labels vs gamma row count");
      Responsibilities resp;
      resp.gamma = gamma_ds.x;
      const int k = ev_k > 0 ? ev_k : gamma_ds.d;
      const auto pred = hard_assign(resp);
      const auto rep = clustering_accuracy(pred, labels, k);
      fs::create_directories(ev_out);
      ordered_json j;
      j["accuracy"] = rep.accuracy;
      j["permutation"] = rep.permutation;
      j["confusion"] = rep.confusion;
      if (ev_kmeans) {
        if (ev_data.empty())
          throw InvalidParameter("eval: --kmeans-baseline needs --data");
        Dataset ds = load_csv(ev_data);
        if (ev_standardize) ds = standardize(ds).first;
        const auto km = kmeans_baseline(ds, k, ev_seed, ev_restarts);
        const auto kmrep = clustering_accuracy(km.assign, labels, k);
        j["kmeans_accuracy"] = kmrep.accuracy;
        j["kmeans_inertia"] = km.inertia;
      }
      const std::string path = (fs::path(ev_out) / "accuracy.json").string();
      write_file_atomic(path, j.dump(2) + "\n");
      if (!ev_confusion.empty()) {
        std::string csv;
        for (const auto& row : rep.confusion) {
          for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) csv += ',';
            csv += std::to_string(row[c]);
          }
          csv += '\n';
        }
        write_file_atomic(ev_confusion, csv);
      }
      std::printf("accuracy %.4f -> %s\n", rep.accuracy, path.c_str());
      return 0;
    }
    if (*traj) {
      std::vector<std::vector<TraceRecord>> runs;
      for (const auto& path : traj_inputs) runs.push_back(load_trace(path));
      write_file_atomic(traj_out, merge_trajectories(runs, traj_force));
      std::printf("merged %zu traces -> %s\n", runs.size(), traj_out.c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
