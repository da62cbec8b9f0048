#include <doctest.h>

#include <set>

#include "nsgp/error.hpp"
#include "nsgp/evaluate.hpp"
#include "oracles.hpp"

using namespace nsgp;

TEST_CASE("CRPS sorted form equals the naive double sum") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.5, 2.0);
  for (std::size_t T : {1u, 2u, 7u, 100u, 500u}) {
    std::vector<double> x(T);
    for (auto& v : x) v = n(rng);
    for (double y : {-3.0, 0.0, 0.7, 5.0})
      CHECK(crps_ecdf(x, y) == doctest::Approx(oracle::crps_naive(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("CRPS approaches the Gaussian closed form") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(1.0, 0.5);
  std::vector<double> x(20000);
  for (auto& v : x) v = n(rng);
  CHECK(crps_ecdf(x, 1.3) == doctest::Approx(oracle::crps_gaussian(1.0, 0.5, 1.3)).epsilon(0.02));
  const std::vector<double> point{2.0};
  CHECK(crps_ecdf(point, 5.0) == 3.0);
}

TEST_CASE("k-fold folds partition the indices") {
  const auto s = make_kfold(103, 10, RngSeed{5});
  REQUIRE(s.folds.size() == 10);
  std::vector<int> seen(103, 0);
  for (const auto& f : s.folds) {
    CHECK(std::is_sorted(f.begin(), f.end()));
    CHECK((f.size() == 10 || f.size() == 11));
    for (auto i : f) ++seen[i];
  }
  for (int c : seen) CHECK(c == 1);
  CHECK(make_kfold(103, 10, RngSeed{5}).folds == s.folds);
  CHECK(make_kfold(103, 10, RngSeed{6}).folds != s.folds);
}

TEST_CASE("block holdouts keep cells above the minimum size") {
  std::vector<Location> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) pts.push_back({i + 0.5, j + 0.5});
  pts.push_back({0.1, 9.9});
  const auto s = make_block_holdouts(pts, 5.0, 5.0, 20);
  REQUIRE(s.folds.size() == 4);
  std::set<std::size_t> all;
  for (const auto& f : s.folds) {
    CHECK(f.size() >= 20);
    all.insert(f.begin(), f.end());
  }
  CHECK(all.size() == pts.size());
  const auto big = make_block_holdouts(pts, 5.0, 5.0, 26);
  CHECK(big.folds.size() == 1);  // only the cell holding the extra point
}

TEST_CASE("circular holdouts are a centre plus its nearest neighbours") {
  std::mt19937_64 rng(3);
  const auto pts = oracle::random_locations(200, 1.0, 1.0, rng);
  const auto s = make_circular_holdouts(pts, 29, 10, RngSeed{1});
  REQUIRE(s.folds.size() == 10);
  std::set<std::size_t> centres;
  for (const auto& f : s.folds) {
    REQUIRE(f.size() == 30);
    // The fold is a disc: every excluded point is at least as far from some
    // member-centre as the farthest member. Check with each candidate centre.
    bool found = false;
    for (auto c : f) {
      double rmax = 0.0;
      for (auto i : f) rmax = std::max(rmax, distance(pts[c], pts[i]));
      std::size_t inside = 0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (distance(pts[c], pts[i]) < rmax) ++inside;
      if (inside < 30) {
        found = true;
        centres.insert(c);
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("score_scheme averages CRPS and records failures") {
  std::vector<Location> locs;
  std::vector<double> z;
  for (int i = 0; i < 20; ++i) locs.push_back({double(i), 0.0}), z.push_back(double(i % 3));
  const SpatialDataset data(locs, z);
  const auto scheme = make_kfold(20, 4, RngSeed{1});
  // Predictive draws are the constant 1.
  const Predictor constant = [](const SpatialDataset&, std::span<const Location> test, std::size_t fold) {
    if (fold == 3) throw NumericError("boom");
    PredictiveDraws pd;
    pd.draws = Eigen::MatrixXd::Ones(10, Eigen::Index(test.size()));
    return pd;
  };
  const auto s = score_scheme(scheme, data, constant, 2);
  CHECK(s.failed == 1);
  CHECK_FALSE(s.folds[3].ok);
  double total = 0.0;
  for (std::size_t f = 0; f < 3; ++f) {
    double fold = 0.0;
    for (auto i : scheme.folds[f]) fold += std::abs(z[i] - 1.0);
    fold /= double(scheme.folds[f].size());
    CHECK(s.folds[f].crps == doctest::Approx(fold));
    total += fold;
  }
  CHECK(s.mean == doctest::Approx(total / 3.0));

  HoldoutScheme block{HoldoutKind::Block, {{0, 1, 2}}};
  const auto b = score_scheme(block, data, constant);
  CHECK(b.folds[0].crps == doctest::Approx(0.0));  // average of 0,1,2 is 1
}

TEST_CASE("weights_from_draws dispatches on the method label") {
  PosteriorDraws a, b;
  a.loglik = {-10.0, -10.5, -9.8};
  b.loglik = {-14.0, -13.5, -14.2};
  const std::vector<PosteriorDraws> d{a, b};
  for (std::string m : {"HM", "IS5", "AICM", "BICM"}) {
    const auto w = weights_from_draws(d, 30, m);
    CHECK(w.method == m);
    CHECK(w.probabilities[0] > w.probabilities[1]);
    CHECK(w.probabilities[0] + w.probabilities[1] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(weights_from_draws(d, 30, "XYZ"), InputError);
}
