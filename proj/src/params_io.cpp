#include "vpem/params_io.hpp"

#include "vpem/dataset.hpp"
#include "vpem/errors.hpp"

namespace vpem {

nlohmann::ordered_json params_to_json(const GmmParams& theta) {
  nlohmann::ordered_json j;
  j["k"] = theta.k;
  j["d"] = theta.layout.d;
  auto layout = nlohmann::ordered_json::array();
  for (auto [lo, hi] : theta.layout.blocks)
    layout.push_back({lo, hi});
  j["layout"] = std::move(layout);
  j["pi"] = theta.pi;
  auto mu = nlohmann::ordered_json::array();
  for (int row = 0; row < theta.k; ++row)
    mu.push_back(std::vector<double>(theta.mu.row(row),
                                     theta.mu.row(row) + theta.mu.cols));
  j["mu"] = std::move(mu);
  auto sigma = nlohmann::ordered_json::array();
  for (int row = 0; row < theta.k; ++row) {
    auto blocks = nlohmann::ordered_json::array();
    for (const auto& s : theta.sigma[row]) {
      nlohmann::ordered_json b;
      b["dim"] = s.dim;
      b["entries"] = s.e;
      blocks.push_back(std::move(b));
    }
    sigma.push_back(std::move(blocks));
  }
  j["sigma"] = std::move(sigma);
  return j;
}

GmmParams params_from_json(const nlohmann::json& j) {
  GmmParams theta;
  try {
    theta.k = j.at("k").get<int>();
    theta.layout.d = j.at("d").get<int>();
    for (const auto& range : j.at("layout"))
      theta.layout.blocks.emplace_back(range.at(0).get<int>(),
                                       range.at(1).get<int>());
    theta.pi = j.at("pi").get<std::vector<double>>();
    const auto& mu = j.at("mu");
    theta.mu = Matrix(theta.k, theta.layout.d);
    for (int row = 0; row < theta.k; ++row) {
      const auto vals = mu.at(row).get<std::vector<double>>();
      if (static_cast<int>(vals.size()) != theta.layout.d)
        throw ParseError("params: mu row length mismatch");
      for (int c = 0; c < theta.layout.d; ++c) theta.mu(row, c) = vals[c];
    }
    for (const auto& blocks : j.at("sigma")) {
      std::vector<SymMatrix> comp;
      for (const auto& b : blocks) {
        SymMatrix s(b.at("dim").get<int>());
        const auto entries = b.at("entries").get<std::vector<double>>();
        if (entries.size() != s.e.size())
          throw ParseError("params: sigma entry count mismatch");
        s.e = entries;
        comp.push_back(std::move(s));
      }
      theta.sigma.push_back(std::move(comp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("params: ") + e.what());
  }
  theta.validate();
  return theta;
}

void save_params(const GmmParams& theta, const std::string& path) {
  write_file_atomic(path, params_to_json(theta).dump(2) + "\n");
}

GmmParams load_params(const std::string& path) {
  try {
    return params_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("params: cannot parse " + path + ": " + e.what());
  }
}

}  // namespace vpem
