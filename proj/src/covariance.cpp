#include "nsgp/covariance.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>

#include "nsgp/error.hpp"

namespace nsgp {

AnisotropyMatrix anisotropy_matrix(double phi1, double phi2, double eta) {
  if (!(phi1 > 0.0) || !(phi2 > 0.0))
    throw InputError("anisotropy_matrix: eigenvalues must be positive");
  const double c = std::cos(eta), s = std::sin(eta);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  AnisotropyMatrix out;
  out.matrix = R * Eigen::Vector2d(phi1, phi2).asDiagonal() * R.transpose();
  out.matrix(1, 0) = out.matrix(0, 1);
  out.inverse = R * Eigen::Vector2d(1.0 / phi1, 1.0 / phi2).asDiagonal() * R.transpose();
  out.inverse(1, 0) = out.inverse(0, 1);
  return out;
}

double mahalanobis_sq(const AnisotropyMatrix& sigma, const Eigen::Vector2d& h) {
  const auto& P = sigma.inverse;
  return std::max(0.0, P(0, 0) * h(0) * h(0) + 2.0 * P(0, 1) * h(0) * h(1) + P(1, 1) * h(1) * h(1));
}

double matern_correlation_bessel(double nu, double x) {
  if (x <= 0.0) return 1.0;
  const double log_val = nu * std::log(x) + std::log(boost::math::cyl_bessel_k(nu, x)) -
                         std::lgamma(nu) - (nu - 1.0) * std::log(2.0);
  return std::exp(log_val);
}

double matern_correlation(double nu, double x) {
  if (x <= 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-x);
  if (nu == 1.5) return (1.0 + x) * std::exp(-x);
  if (nu == 2.5) return (1.0 + x + x * x / 3.0) * std::exp(-x);
  return matern_correlation_bessel(nu, x);
}

double matern(const SegmentParams& params, const Eigen::Vector2d& h) {
  const auto sigma = anisotropy_matrix(params.phi1, params.phi2, params.eta);
  return params.sigma2 * matern_correlation(params.nu, std::sqrt(mahalanobis_sq(sigma, h)));
}

Eigen::Vector2d SegmentFrame::apply(const Location& s) const {
  return ((Eigen::Vector2d(s.lon, s.lat) - shift).array() * scale.array()).matrix();
}

Eigen::Matrix2Xd to_matrix(std::span<const Location> locations) {
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(locations.size()));
  for (std::size_t i = 0; i < locations.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) << locations[i].lon, locations[i].lat;
  return out;
}

Eigen::MatrixXd segment_cross_cov(const SegmentParams& params, const Eigen::Matrix2Xd& a,
                                  const Eigen::Matrix2Xd& b) {
  const auto sigma = anisotropy_matrix(params.phi1, params.phi2, params.eta);
  const double p00 = sigma.inverse(0, 0), p01 = sigma.inverse(0, 1), p11 = sigma.inverse(1, 1);
  Eigen::MatrixXd out(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      const double dx = a(0, i) - b(0, j), dy = a(1, i) - b(1, j);
      const double q = std::max(0.0, p00 * dx * dx + 2.0 * p01 * dx * dy + p11 * dy * dy);
      out(i, j) = params.sigma2 * matern_correlation(params.nu, std::sqrt(q));
    }
  }
  return out;
}

Eigen::MatrixXd segment_cov_matrix(const SegmentParams& params, const Eigen::Matrix2Xd& coords,
                                   bool include_nugget) {
  const auto sigma = anisotropy_matrix(params.phi1, params.phi2, params.eta);
  const double p00 = sigma.inverse(0, 0), p01 = sigma.inverse(0, 1), p11 = sigma.inverse(1, 1);
  const Eigen::Index n = coords.cols();
  Eigen::MatrixXd C(n, n);
  const bool exponential = params.nu == 0.5;
  for (Eigen::Index j = 0; j < n; ++j) {
    C(j, j) = params.sigma2 + (include_nugget ? params.tau2 : 0.0);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double dx = coords(0, i) - coords(0, j), dy = coords(1, i) - coords(1, j);
      const double q = std::max(0.0, p00 * dx * dx + 2.0 * p01 * dx * dy + p11 * dy * dy);
      const double r = std::sqrt(q);
      const double v = params.sigma2 * (exponential ? std::exp(-r) : matern_correlation(params.nu, r));
      C(i, j) = v;
      C(j, i) = v;
    }
  }
  return C;
}

double JitteredCholesky::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

std::optional<JitteredCholesky> jittered_cholesky(const Eigen::MatrixXd& a, double scale) {
  JitteredCholesky out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success && (out.llt.matrixLLT().diagonal().array() > 0.0).all())
    return out;
  for (double f = 1e-10; f <= 1e-6 * 1.0000001; f *= 10.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += f * scale;
    out.llt.compute(b);
    if (out.llt.info() == Eigen::Success && (out.llt.matrixLLT().diagonal().array() > 0.0).all()) {
      out.jitter = f * scale;
      return out;
    }
  }
  return std::nullopt;
}

double nonstationary_cov(const Partition& partition, std::span<const SegmentParams> params,
                         const Location& s, const Location& t, std::span<const SegmentFrame> frames) {
  if (params.size() != partition.K())
    throw InputError("nonstationary_cov: expected one parameter block per segment");
  const std::size_t ks = assign_segment(partition, s);
  const std::size_t kt = assign_segment(partition, t);
  double total = 0.0;
  // Indicator weights: w_k(s) w_k(t) is 1 only when both lie in segment k.
  for (std::size_t k = 0; k < partition.K(); ++k) {
    const double w = (ks == k ? 1.0 : 0.0) * (kt == k ? 1.0 : 0.0);
    if (w == 0.0) continue;
    Eigen::Vector2d h = frames.empty() ? Eigen::Vector2d(s.lon - t.lon, s.lat - t.lat)
                                       : Eigen::Vector2d(frames[k].apply(s) - frames[k].apply(t));
    total += w * matern(params[k], h);
  }
  return total;
}

Eigen::MatrixXd nonstationary_cov_matrix(const Partition& partition,
                                         std::span<const SegmentParams> params,
                                         std::span<const Location> locations,
                                         std::span<const SegmentFrame> frames, bool include_nugget) {
  const auto n = static_cast<Eigen::Index>(locations.size());
  const auto labels = assign_segments(partition, locations);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      if (labels[ui] != labels[uj]) continue;
      const std::size_t k = labels[ui];
      Eigen::Vector2d h = frames.empty()
                              ? Eigen::Vector2d(locations[ui].lon - locations[uj].lon,
                                                locations[ui].lat - locations[uj].lat)
                              : Eigen::Vector2d(frames[k].apply(locations[ui]) - frames[k].apply(locations[uj]));
      C(i, j) = C(j, i) = matern(params[k], h);
    }
    if (include_nugget) C(i, i) += params[labels[static_cast<std::size_t>(i)]].tau2;
  }
  return C;
}

}  // namespace nsgp
