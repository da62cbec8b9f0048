#pragma once

// Independent reference computations used by the tests. These deliberately
// avoid the library's own code paths (no Cholesky where the library uses one,
// explicit loops where it vectorizes).

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "nsgp/data.hpp"
#include "nsgp/partition.hpp"

namespace oracle {

// Multivariate normal log-density via LU determinant and an explicit solve.
inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const Eigen::VectorXd r = x - mean;
  const double quad = r.dot(lu.solve(r));
  const double logdet = std::log(std::abs(lu.determinant()));
  return -0.5 * (double(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

inline Eigen::Matrix2d rotation(double eta) {
  Eigen::Matrix2d r;
  r << std::cos(eta), -std::sin(eta), std::sin(eta), std::cos(eta);
  return r;
}

// Lloyd's k-means from the given starting centres.
inline std::vector<Eigen::Vector2d> kmeans(const std::vector<nsgp::Location>& pts,
                                           std::vector<Eigen::Vector2d> centres, int iters = 100) {
  for (int it = 0; it < iters; ++it) {
    std::vector<Eigen::Vector2d> sum(centres.size(), Eigen::Vector2d::Zero());
    std::vector<int> cnt(centres.size(), 0);
    for (const auto& p : pts) {
      std::size_t best = 0;
      double bd = 1e300;
      for (std::size_t k = 0; k < centres.size(); ++k) {
        const double d = (Eigen::Vector2d(p.lon, p.lat) - centres[k]).squaredNorm();
        if (d < bd) bd = d, best = k;
      }
      sum[best] += Eigen::Vector2d(p.lon, p.lat);
      ++cnt[best];
    }
    for (std::size_t k = 0; k < centres.size(); ++k)
      if (cnt[k] > 0) centres[k] = sum[k] / cnt[k];
  }
  return centres;
}

// Two-component partition with a vertical boundary at lon = split (equal
// isotropic covariances, equal weights).
inline nsgp::Partition vertical_split(double split = 1.0, std::size_t id = 1) {
  nsgp::Partition p;
  p.id = id;
  nsgp::MixtureComponent a, b;
  a.mean = Eigen::Vector2d(split - 0.5, 0.5);
  b.mean = Eigen::Vector2d(split + 0.5, 0.5);
  a.cov = b.cov = Eigen::Matrix2d::Identity() * 0.1;
  a.weight = b.weight = 0.5;
  p.mixture.components = {a, b};
  return p;
}

// K components with means on a horizontal line at lon = 0.5, 1.5, 2.5, ...
inline nsgp::Partition strip_partition(std::size_t K, std::size_t id = 1) {
  nsgp::Partition p;
  p.id = id;
  for (std::size_t k = 0; k < K; ++k) {
    nsgp::MixtureComponent c;
    c.mean = Eigen::Vector2d(0.5 + double(k), 0.5);
    c.cov = Eigen::Matrix2d::Identity() * 0.1;
    c.weight = 1.0 / double(K);
    p.mixture.components.push_back(c);
  }
  return p;
}

inline std::vector<nsgp::Location> random_locations(std::size_t n, double lon_max, double lat_max, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.0, lon_max), uy(0.0, lat_max);
  std::vector<nsgp::Location> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    out.push_back({x, y});
  }
  return out;
}

// Naive O(T^2) sample CRPS.
inline double crps_naive(const std::vector<double>& x, double y) {
  const double T = double(x.size());
  double a = 0.0, b = 0.0;
  for (double xi : x) a += std::abs(xi - y);
  for (double xi : x)
    for (double xj : x) b += std::abs(xi - xj);
  return a / T - b / (2.0 * T * T);
}

// Closed-form CRPS of N(m, s^2) at y.
inline double crps_gaussian(double m, double s, double y) {
  const double z = (y - m) / s;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return s * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

}  // namespace oracle
