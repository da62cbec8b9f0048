#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "nsgp/data.hpp"
#include "nsgp/partition.hpp"

namespace nsgp {

/// Covariance block of one segment: nugget tau2, marginal variance sigma2,
/// anisotropy eigenvalues phi1/phi2 (squared ranges), rotation eta and
/// Matérn smoothness nu.
struct SegmentParams {
  double tau2 = 0.0;
  double sigma2 = 1.0;
  double phi1 = 0.25;
  double phi2 = 0.25;
  double eta = 0.0;
  double nu = 0.5;
};

struct AnisotropyMatrix {
  Eigen::Matrix2d matrix;
  Eigen::Matrix2d inverse;
};

AnisotropyMatrix anisotropy_matrix(double phi1, double phi2, double eta);
double mahalanobis_sq(const AnisotropyMatrix& sigma, const Eigen::Vector2d& h);

// x^nu K_nu(x) / (Gamma(nu) 2^(nu-1)), always via the Bessel function; equals 1 at x = 0.
double matern_correlation_bessel(double nu, double x);
// Same quantity with closed forms for nu = 0.5, 1.5, 2.5.
double matern_correlation(double nu, double x);
double matern(const SegmentParams& params, const Eigen::Vector2d& h);

/// Affine map of one segment's coordinates onto the unit square (computed from
/// training data; applied unchanged to prediction points).
struct SegmentFrame {
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
  Eigen::Vector2d scale = Eigen::Vector2d::Ones();
  bool prior_only = false;  // no training data in the segment
  bool degenerate = false;  // at least one axis had zero extent

  Eigen::Vector2d apply(const Location& s) const;
};

Eigen::Matrix2Xd to_matrix(std::span<const Location> locations);

/// Dense covariance of the segment process at `coords` (already in the
/// segment frame); the nugget adds tau2 on the diagonal.
Eigen::MatrixXd segment_cov_matrix(const SegmentParams& params, const Eigen::Matrix2Xd& coords,
                                   bool include_nugget);
Eigen::MatrixXd segment_cross_cov(const SegmentParams& params, const Eigen::Matrix2Xd& a,
                                  const Eigen::Matrix2Xd& b);

/// Cholesky with the diagonal jitter ladder 1e-10*scale, 1e-9*scale, ...,
/// 1e-6*scale. Returns nullopt once the ladder is exhausted.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  double log_det() const;
};
std::optional<JitteredCholesky> jittered_cholesky(const Eigen::MatrixXd& a, double scale);

/// Partition-induced covariance between two locations with indicator weights:
/// the segment Matérn when both fall in the same segment, zero otherwise. When
/// frames are supplied, lags are measured in the shared segment's frame.
double nonstationary_cov(const Partition& partition, std::span<const SegmentParams> params,
                         const Location& s, const Location& t,
                         std::span<const SegmentFrame> frames = {});

Eigen::MatrixXd nonstationary_cov_matrix(const Partition& partition,
                                         std::span<const SegmentParams> params,
                                         std::span<const Location> locations,
                                         std::span<const SegmentFrame> frames, bool include_nugget);

}  // namespace nsgp
