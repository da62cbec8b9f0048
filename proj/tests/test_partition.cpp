#include <doctest.h>

#include "nsgp/error.hpp"
#include "nsgp/partition.hpp"
#include "oracles.hpp"

using namespace nsgp;

namespace {

std::vector<Location> three_clusters(std::size_t per, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.15);
  const double cx[] = {0.0, 3.0, 1.5}, cy[] = {0.0, 0.0, 2.5};
  std::vector<Location> pts;
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < per; ++i) {
      const double dx = n(rng);
      const double dy = n(rng);
      pts.push_back({cx[k] + dx, cy[k] + dy});
    }
  return pts;
}

CovariateTable as_covariates(const std::vector<Location>& pts) {
  CovariateTable t;
  t.locations = pts;
  t.category_names = {"lu"};
  for (std::size_t i = 0; i < pts.size(); ++i) t.categories.push_back({std::string(i % 2 ? "A" : "B")});
  return t;
}

}  // namespace

TEST_CASE("bivariate normal log-density matches the explicit formula") {
  Eigen::Matrix2d cov;
  cov << 2.0, 0.6, 0.6, 0.5;
  const Eigen::Vector2d mean(0.3, -1.0), x(1.1, 0.4);
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  Eigen::Matrix2d inv;
  inv << cov(1, 1), -cov(0, 1), -cov(1, 0), cov(0, 0);
  inv /= det;
  const Eigen::Vector2d r = x - mean;
  const double expected = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * r.dot(inv * r);
  CHECK(log_normal2(x, mean, cov) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("EM recovers well-separated cluster centres (k-means oracle)") {
  std::mt19937_64 rng(11);
  const auto pts = three_clusters(150, rng);
  const MixtureModel m = fit_mixture(pts, 3, RngSeed{3});
  REQUIRE(m.K() == 3);
  CHECK(m.converged);
  const auto centres = oracle::kmeans(pts, {{0.2, 0.1}, {2.8, -0.1}, {1.4, 2.2}});
  for (const auto& c : centres) {
    double best = 1e300;
    for (const auto& comp : m.components) best = std::min(best, (comp.mean - c).norm());
    CHECK(best < 1e-2);
  }
  double wsum = 0.0;
  for (const auto& comp : m.components) {
    wsum += comp.weight;
    CHECK(comp.weight == doctest::Approx(1.0 / 3.0).epsilon(0.02));
    CHECK(comp.cov(0, 0) == doctest::Approx(0.0225).epsilon(0.25));
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("EM log-likelihood trace is nondecreasing and ends at the reported value") {
  std::mt19937_64 rng(12);
  const auto pts = three_clusters(60, rng);
  Rng r = make_rng(RngSeed{9}, {1});
  const MixtureModel m = run_em(pts, 4, r, EmOptions{});
  REQUIRE(m.loglik_trace.size() >= 2);
  for (std::size_t i = 1; i < m.loglik_trace.size(); ++i)
    CHECK(m.loglik_trace[i] >= m.loglik_trace[i - 1] - 1e-8 * std::abs(m.loglik_trace[i - 1]));
  CHECK(m.loglik_trace.back() == doctest::Approx(m.log_likelihood).epsilon(1e-10));

  // Observed-data log-likelihood recomputed directly.
  double ll = 0.0;
  for (const auto& p : pts) {
    double s = 0.0;
    for (const auto& c : m.components)
      s += c.weight * std::exp(log_normal2(Eigen::Vector2d(p.lon, p.lat), c.mean, c.cov));
    ll += std::log(s);
  }
  CHECK(ll == doctest::Approx(m.log_likelihood).epsilon(1e-6));
}

TEST_CASE("assignment is the arg-max of component densities") {
  std::mt19937_64 rng(13);
  const auto pts = three_clusters(50, rng);
  Partition p;
  p.mixture = fit_mixture(pts, 3, RngSeed{1});
  const auto grid = oracle::random_locations(500, 3.5, 3.0, rng);
  for (bool weighted : {false, true}) {
    p.weighted_assignment = weighted;
    const auto seg = assign_segments(p, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::size_t best = 0;
      double bv = -1e300;
      for (std::size_t k = 0; k < p.K(); ++k) {
        const auto& c = p.mixture.components[k];
        double v = log_normal2(Eigen::Vector2d(grid[i].lon, grid[i].lat), c.mean, c.cov);
        if (weighted) v += std::log(c.weight);
        if (v > bv) bv = v, best = k;
      }
      CHECK(seg[i] == best);
    }
  }
}

TEST_CASE("assignment ties go to the lowest index") {
  const Partition p = oracle::vertical_split(1.0);
  CHECK(assign_segment(p, {1.0, 0.3}) == 0);
  CHECK(assign_segment(p, {0.99, 0.3}) == 0);
  CHECK(assign_segment(p, {1.01, 0.3}) == 1);
}

TEST_CASE("fit_mixture is reproducible for a fixed seed") {
  std::mt19937_64 rng(14);
  const auto pts = three_clusters(40, rng);
  const auto a = fit_mixture(pts, 3, RngSeed{77});
  const auto b = fit_mixture(pts, 3, RngSeed{77});
  CHECK(a.log_likelihood == b.log_likelihood);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.components[k].mean == b.components[k].mean);
}

TEST_CASE("covariance floor keeps components nondegenerate") {
  std::vector<Location> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({double(i % 10), i < 15 ? 0.0 : 5.0});  // two collinear strips
  const auto m = fit_mixture(pts, 2, RngSeed{2});
  for (const auto& c : m.components) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c.cov);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("candidate generation: best per K first, distinct modes, sequential ids") {
  std::mt19937_64 rng(15);
  const auto pts = three_clusters(80, rng);
  CandidateOptions opt;
  opt.K_values = {2, 3, 4};
  opt.em.restarts = 6;
  opt.max_keep = 5;
  const auto set = generate_candidates(as_covariates(pts), RngSeed{8}, opt);
  REQUIRE(set.partitions.size() >= 3);
  REQUIRE(set.partitions.size() <= 5);
  for (std::size_t i = 0; i < set.partitions.size(); ++i) CHECK(set.partitions[i].id == i + 1);
  std::vector<std::size_t> firstK;
  for (std::size_t i = 0; i < 3; ++i) firstK.push_back(set.partitions[i].K());
  std::sort(firstK.begin(), firstK.end());
  CHECK(firstK == std::vector<std::size_t>{2, 3, 4});
  const double diam = bounding_box(pts).diameter();
  for (std::size_t i = 0; i < set.partitions.size(); ++i)
    for (std::size_t j = i + 1; j < set.partitions.size(); ++j)
      CHECK_FALSE(same_mode(set.partitions[i].mixture, set.partitions[j].mixture, diam));
  const auto again = generate_candidates(as_covariates(pts), RngSeed{8}, opt);
  REQUIRE(again.partitions.size() == set.partitions.size());
  for (std::size_t i = 0; i < set.partitions.size(); ++i)
    CHECK(again.partitions[i].mixture.log_likelihood == set.partitions[i].mixture.log_likelihood);
}

TEST_CASE("incomplete covariate records are excluded from the fit") {
  std::mt19937_64 rng(16);
  auto pts = three_clusters(40, rng);
  auto cov = as_covariates(pts);
  cov.locations.push_back({100.0, 100.0});
  cov.categories.push_back({std::nullopt});
  CandidateOptions opt;
  opt.K_values = {3};
  opt.em.restarts = 4;
  const auto set = generate_candidates(cov, RngSeed{1}, opt);
  for (const auto& c : set.partitions[0].mixture.components) CHECK(c.mean.norm() < 10.0);
}

TEST_CASE("concomitant weights follow category levels") {
  std::mt19937_64 rng(17);
  auto pts = three_clusters(80, rng);
  CovariateTable t;
  t.locations = pts;
  t.category_names = {"lu"};
  for (std::size_t i = 0; i < pts.size(); ++i) t.categories.push_back({std::string(i < 80 ? "west" : "other")});
  CandidateOptions opt;
  opt.K_values = {3};
  opt.em.restarts = 4;
  opt.concomitant = true;
  const auto set = generate_candidates(t, RngSeed{4}, opt);
  const auto& m = set.partitions[0].mixture;
  REQUIRE(m.concomitant.has_value());
  // The western cluster should dominate the mixing weights of "west" records.
  std::size_t west = 0;
  for (std::size_t k = 0; k < m.K(); ++k)
    if (m.components[k].mean.norm() < 0.5) west = k;
  const auto x = m.concomitant->design({std::string("west")});
  const Eigen::VectorXd lw = m.concomitant->log_weights(x);
  CHECK(std::exp(lw(static_cast<Eigen::Index>(west))) > 0.9);
  CHECK(lw.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-10));
}
