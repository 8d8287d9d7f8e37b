#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "recurnas/error.hpp"
#include "recurnas/forest.hpp"
#include "recurnas/rng.hpp"

using namespace recurnas;

namespace {

// y = step at x0 = 0.5 plus a second irrelevant feature
void step_data(std::vector<std::vector<double>>& X, std::vector<double>& y, int n, uint64_t seed) {
  Rng rng(seed);
  X.clear();
  y.clear();
  for (int i = 0; i < n; ++i) {
    const double x0 = rng.real01();
    const double x1 = rng.real01();
    X.push_back({x0, x1});
    y.push_back(x0 < 0.5 ? -1.0 : 1.0);
  }
}

}  // namespace

TEST_CASE("forest learns a step function", "[forest]") {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  step_data(X, y, 200, 11);

  Forest forest;
  Rng rng(5);
  forest.fit(X, y, rng);

  for (double probe : {0.1, 0.3, 0.7, 0.9}) {
    const auto [mean, std_dev] = forest.predict({probe, 0.5});
    const double want = probe < 0.5 ? -1.0 : 1.0;
    REQUIRE(mean == Catch::Approx(want).margin(0.15));
    REQUIRE(std_dev >= 0.0);
  }
}

TEST_CASE("single tree without bootstrap interpolates and has zero spread", "[forest]") {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  step_data(X, y, 64, 23);

  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.min_leaf = 1;
  params.max_depth = 30;
  Forest forest;
  Rng rng(5);
  forest.fit(X, y, rng, params);

  for (size_t i = 0; i < X.size(); ++i) {
    const auto [mean, std_dev] = forest.predict(X[i]);
    REQUIRE(mean == Catch::Approx(y[i]).margin(1e-12));
    REQUIRE(std_dev == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("forest fit is deterministic given the rng seed", "[forest]") {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  step_data(X, y, 100, 31);

  Forest a, b;
  Rng ra(77), rb(77);
  a.fit(X, y, ra);
  b.fit(X, y, rb);
  Rng probe_rng(1);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> q{probe_rng.real01(), probe_rng.real01()};
    REQUIRE(a.predict(q) == b.predict(q));
  }
}

TEST_CASE("forest contract errors", "[forest]") {
  Forest forest;
  REQUIRE_FALSE(forest.fitted());
  REQUIRE_THROWS_AS(forest.predict({1.0}), Error);  // not fitted

  Rng rng(1);
  std::vector<std::vector<double>> X{{0.0}, {1.0}};
  std::vector<double> y{0.0};
  REQUIRE_THROWS_AS(forest.fit(X, y, rng), Error);  // size mismatch

  ForestParams bad;
  bad.n_trees = 0;
  std::vector<double> y2{0.0, 1.0};
  REQUIRE_THROWS_AS(forest.fit(X, y2, rng, bad), Error);

  REQUIRE_THROWS_AS(forest.fit({}, {}, rng), Error);  // empty
}

TEST_CASE("forest spread is positive under bootstrap resampling", "[forest]") {
  // smooth ramp: bootstrap samples shift each tree's leaf boundaries, so
  // leaf means at a fixed probe disagree across trees
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  Rng rng(9);
  for (int i = 0; i < 60; ++i) {
    const double u = static_cast<double>(i) / 59.0;
    X.push_back({u, rng.real01()});
    y.push_back(4.0 * u);
  }
  Forest forest;
  Rng fit_rng(3);
  forest.fit(X, y, fit_rng);
  const auto [mean, std_dev] = forest.predict({0.37, 0.5});
  REQUIRE(mean > 0.5);
  REQUIRE(mean < 3.5);
  REQUIRE(std_dev > 0.0);
}
