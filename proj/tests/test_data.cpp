#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "vpem/datagen.hpp"
#include "vpem/dataset.hpp"
#include "vpem/errors.hpp"

using namespace vpem;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("assign_features even split") {
  const auto fa = assign_features(8, 5, AssignScheme::even);
  CHECK(fa.agent_dims() == std::vector<int>{2, 2, 2, 1, 1});
  CHECK(fa.agent_of_feature ==
        std::vector<int>{0, 0, 1, 1, 2, 2, 3, 4});

  const auto one_each = assign_features(4, 4, AssignScheme::even);
  CHECK(one_each.agent_dims() == std::vector<int>{1, 1, 1, 1});

  CHECK_THROWS_AS(assign_features(3, 5, AssignScheme::even),
                  InvalidAssignment);
}

TEST_CASE("assign_features by list") {
  const auto fa =
      assign_features(4, 3, AssignScheme::by_list, {2, 0, 2, 1});
  CHECK(fa.agent_dims() == std::vector<int>{1, 1, 2});
  CHECK_FALSE(fa.is_contiguous());
  CHECK_THROWS_AS(assign_features(4, 3, AssignScheme::by_list, {0, 1}),
                  InvalidAssignment);
  CHECK_THROWS_AS(assign_features(2, 2, AssignScheme::by_list, {0, 5}),
                  InvalidAssignment);
}

TEST_CASE("standardize") {
  Dataset ds;
  ds.m = 2;
  ds.d = 1;
  ds.x = Matrix(2, 1);
  ds.x(0, 0) = 0.0;
  ds.x(1, 0) = 2.0;
  const auto [std_ds, t] = standardize(ds);
  CHECK(std_ds.x(0, 0) == doctest::Approx(-1.0));
  CHECK(std_ds.x(1, 0) == doctest::Approx(1.0));
  CHECK(t.mean[0] == 1.0);
  CHECK(t.scale[0] == 1.0);

  // already standardized input maps to itself
  const auto [again, t2] = standardize(std_ds);
  CHECK(again.x(0, 0) == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(t2.mean[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t2.scale[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("standardize rejects constant features") {
  Dataset ds;
  ds.m = 3;
  ds.d = 2;
  ds.x = Matrix(3, 2);
  for (int i = 0; i < 3; ++i) {
    ds.x(i, 0) = i;
    ds.x(i, 1) = 7.5;
  }
  CHECK_THROWS_WITH_AS(standardize(ds),
                       "standardize: feature 1 has zero variance",
                       ZeroVariance);
}

TEST_CASE("csv round trip is bitwise") {
  GmmParams truth = random_gmm(2, 3, 99, 3.0);
  Dataset ds = sample_gmm(truth, 50, 4);
  const std::string path = temp_path("vpem_roundtrip.csv");
  save_csv(ds, path);
  const Dataset back = load_csv(path);
  REQUIRE(back.m == ds.m);
  REQUIRE(back.d == ds.d);
  for (int i = 0; i < ds.m; ++i)
    for (int j = 0; j < ds.d; ++j) CHECK(back.x(i, j) == ds.x(i, j));
  std::remove(path.c_str());
}

TEST_CASE("csv with header and label column") {
  const std::string path = temp_path("vpem_labeled.csv");
  write_file_atomic(path, "a,b,label\n1.5,2.5,1\n3.0,4.0,0\n0.5,0.25,1\n");
  CsvOptions opts;
  opts.label_column = "label";
  const Dataset ds = load_csv(path, opts);
  CHECK(ds.m == 3);
  CHECK(ds.d == 2);
  CHECK(ds.labels == std::vector<int>{1, 0, 1});
  CHECK(ds.x(1, 1) == 4.0);

  // same file, label by index
  CsvOptions byidx;
  byidx.label_column = "2";
  const Dataset ds2 = load_csv(path, byidx);
  CHECK(ds2.labels == std::vector<int>{1, 0, 1});
  std::remove(path.c_str());
}

TEST_CASE("csv parse errors carry locations") {
  const std::string path = temp_path("vpem_bad.csv");
  write_file_atomic(path, "1.0,2.0\n3.0,oops\n");
  CHECK_THROWS_WITH_AS(load_csv(path), "load_csv: row 2 col 2: 'oops'",
                       ParseError);
  write_file_atomic(path, "1.0,2.0\n3.0\n");
  CHECK_THROWS_AS(load_csv(path), RaggedRows);
  std::remove(path.c_str());
}

TEST_CASE("sample_gmm: single-component moments") {
  GmmParams truth;
  truth.k = 1;
  truth.layout = BlockLayout::dense(3);
  truth.pi = {1.0};
  truth.mu = Matrix(1, 3);
  truth.sigma = {{SymMatrix::identity(3)}};
  const int m = 20000;
  const Dataset ds = sample_gmm(truth, m, 5);
  for (int j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += ds.x(i, j);
    mean /= m;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(m)));
  }
  for (int label : ds.labels) CHECK(label == 0);
}

TEST_CASE("sample_gmm: degenerate weights and determinism") {
  GmmParams truth = random_gmm(2, 2, 7, 1.0);
  truth.pi = {1.0, 0.0};
  const Dataset ds = sample_gmm(truth, 100, 3);
  for (int label : ds.labels) CHECK(label == 0);

  const Dataset a = sample_gmm(truth, 64, 11);
  const Dataset b = sample_gmm(truth, 64, 11);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 2; ++j) CHECK(a.x(i, j) == b.x(i, j));
}

TEST_CASE("sample_gmm: label proportions concentrate") {
  GmmParams truth = random_gmm(2, 2, 13, 8.0);
  truth.pi = {0.3, 0.7};
  const Dataset ds = sample_gmm(truth, 10000, 17);
  double frac = 0.0;
  for (int label : ds.labels) frac += label;
  frac /= ds.m;
  CHECK(std::abs(frac - 0.7) < 0.02);
}

TEST_CASE("random_gmm produces valid parameters") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GmmParams theta = random_gmm(3, 4, seed, 4.0);
    CHECK_NOTHROW(theta.validate());
    CHECK_NOTHROW(cholesky(theta.sigma[0][0]));
  }
  CHECK_NOTHROW(random_gmm(1, 2, 0, 0.0));
  CHECK_NOTHROW(random_gmm(4, 2, 0, 0.0));  // separation 0 never fails
}

TEST_CASE("labels file round trip") {
  const std::string path = temp_path("vpem_labels.txt");
  save_labels({0, 1, 1, 0, 2}, path);
  CHECK(load_labels(path) == std::vector<int>{0, 1, 1, 0, 2});
  std::remove(path.c_str());
}
