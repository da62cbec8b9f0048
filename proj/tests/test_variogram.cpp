#include <doctest.h>

#include "nsgp/error.hpp"
#include "nsgp/variogram.hpp"
#include "oracles.hpp"

using namespace nsgp;

TEST_CASE("OLS detrending matches the normal equations") {
  std::mt19937_64 rng(1);
  const auto locs = oracle::random_locations(60, 3.0, 2.0, rng);
  std::normal_distribution<double> n;
  std::vector<double> z;
  for (const auto& s : locs) z.push_back(1.0 + 0.5 * s.lon - 0.3 * s.lat + 0.2 * s.lon * s.lat + 0.1 * n(rng));
  const SpatialDataset d(locs, z);
  Eigen::MatrixXd X(60, 4);
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) {
    X.row(i) << 1.0, locs[i].lon, locs[i].lat, locs[i].lon * locs[i].lat;
    y(i) = z[i];
  }
  const Eigen::VectorXd beta = (X.transpose() * X).inverse() * (X.transpose() * y);
  const Eigen::VectorXd expected = y - X * beta;
  const Eigen::VectorXd r = detrend_ols(d);
  CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((X.transpose() * r).cwiseAbs().maxCoeff() < 1e-9);

  const SpatialDataset collinear({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}, {1, 2, 3, 4, 5});
  CHECK_THROWS_AS(detrend_ols(collinear), InputError);
}

TEST_CASE("empirical semivariogram equals the O(n^2) pair loop") {
  std::mt19937_64 rng(2);
  const auto locs = oracle::random_locations(80, 1.0, 1.0, rng);
  std::normal_distribution<double> n;
  std::vector<double> r;
  for (std::size_t i = 0; i < locs.size(); ++i) r.push_back(n(rng));
  const std::size_t bins = 10;
  const double hmax = 0.6;
  const auto emp = empirical_semivariogram(r, locs, bins, hmax);
  std::vector<double> sum(bins, 0.0), dsum(bins, 0.0);
  std::vector<std::size_t> cnt(bins, 0);
  for (std::size_t i = 0; i < locs.size(); ++i)
    for (std::size_t j = i + 1; j < locs.size(); ++j) {
      const double h = distance(locs[i], locs[j]);
      if (h > hmax) continue;
      const auto b = std::min(bins - 1, static_cast<std::size_t>(h / (hmax / double(bins))));
      sum[b] += 0.5 * (r[i] - r[j]) * (r[i] - r[j]);
      dsum[b] += h;
      ++cnt[b];
    }
  std::size_t reported = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (cnt[b] == 0) continue;
    REQUIRE(reported < emp.gamma.size());
    CHECK(emp.bin_index[reported] == b);
    CHECK(emp.counts[reported] == cnt[b]);
    CHECK(emp.gamma[reported] == doctest::Approx(sum[b] / double(cnt[b])).epsilon(1e-12));
    CHECK(emp.bin_centers[reported] == doctest::Approx(dsum[b] / double(cnt[b])).epsilon(1e-12));
    ++reported;
  }
  CHECK(reported == emp.gamma.size());
}

TEST_CASE("exponential fit recovers an exact curve") {
  EmpiricalSemivariogram emp;
  emp.n_bins = 12;
  for (int b = 0; b < 12; ++b) {
    const double h = 0.05 + 0.1 * b;
    emp.bin_centers.push_back(h);
    emp.gamma.push_back(0.2 + 1.3 * (1.0 - std::exp(-h / 0.35)));
    emp.counts.push_back(10 + std::size_t(b));
    emp.bin_index.push_back(std::size_t(b));
  }
  const auto fit = fit_exponential(emp);
  CHECK(fit.nugget == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(fit.partial_sill == doctest::Approx(1.3).epsilon(1e-4));
  CHECK(fit.range == doctest::Approx(0.35).epsilon(1e-4));
  CHECK(fit.range_identified);
  CHECK(fit(0.0) == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(fit.weighted_sse < 1e-8);
}

TEST_CASE("flat variogram gives nonnegative sills") {
  EmpiricalSemivariogram emp;
  for (int b = 0; b < 8; ++b) {
    emp.bin_centers.push_back(0.1 * (b + 1));
    emp.gamma.push_back(b % 2 ? 0.5 : 0.52);
    emp.counts.push_back(20);
    emp.bin_index.push_back(std::size_t(b));
  }
  const auto fit = fit_exponential(emp);
  CHECK(fit.nugget >= 0.0);
  CHECK(fit.partial_sill >= 0.0);
  CHECK(fit(10.0) == doctest::Approx(0.51).epsilon(0.05));
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(quantile_type7(v, 0.0) == 1.0);
  CHECK(quantile_type7(v, 1.0) == 9.0);
  CHECK(quantile_type7(v, 0.5) == doctest::Approx(3.5));
  CHECK(quantile_type7(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("bootstrap bands bracket the fitted curve and are reproducible") {
  std::mt19937_64 rng(3);
  const auto locs = oracle::random_locations(120, 1.0, 1.0, rng);
  std::normal_distribution<double> n;
  std::vector<double> r;
  for (std::size_t i = 0; i < locs.size(); ++i) r.push_back(n(rng));
  const auto emp = empirical_semivariogram(r, locs, 8);
  const auto fit = fit_exponential(emp);
  const auto bands = bootstrap_bands(fit, locs, emp, 100, RngSeed{5});
  const auto again = bootstrap_bands(fit, locs, emp, 100, RngSeed{5}, 3);
  REQUIRE(bands.lower.size() == emp.gamma.size());
  CHECK(bands.lower == again.lower);
  CHECK(bands.upper == again.upper);
  for (std::size_t b = 0; b < bands.lower.size(); ++b) {
    CHECK(bands.lower[b] <= bands.upper[b]);
    CHECK(bands.lower[b] <= fit(emp.bin_centers[b]) * 1.5);
  }
}

TEST_CASE("subregion grid covers every point exactly once") {
  std::mt19937_64 rng(4);
  const auto locs = oracle::random_locations(200, 2.0, 2.0, rng);
  std::normal_distribution<double> n;
  std::vector<double> z;
  for (std::size_t i = 0; i < locs.size(); ++i) z.push_back(n(rng));
  const SpatialDataset d(locs, z);
  const auto cells = subregion_variograms(d, 2, 2, 6, 20, RngSeed{1});
  REQUIRE(cells.size() == 4);
  std::size_t total = 0;
  for (const auto& c : cells) total += c.n;
  CHECK(total == 200);
}
