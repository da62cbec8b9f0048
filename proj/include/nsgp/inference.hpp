#pragma once

#include <Eigen/Dense>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nsgp/covariance.hpp"
#include "nsgp/data.hpp"
#include "nsgp/partition.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

/// Global mean plus one covariance block per segment of the conditioning
/// partition.
struct ModelState {
  double mu = 0.0;
  std::vector<SegmentParams> segments;
};

struct PriorBounds {
  double tau2_max = 100.0;
  double sigma2_max = 100.0;
  double phi_max = std::numbers::sqrt2;
  double eta_max = std::numbers::pi / 2.0;
  double mu_sd = 100.0;
};

struct ChainConfig {
  std::size_t n_iter = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  std::size_t adapt_window = 50;
  double target_accept_block = 0.234;
  double target_accept_scalar = 0.44;
  double nu = 0.5;
  PriorBounds prior;
  RngSeed seed{};
  std::size_t max_init_attempts = 50;

  void validate() const;
};

struct ChainDiagnostics {
  std::vector<double> acceptance;  // post-burn-in: [mu, segment 1, ..., segment K]
  std::vector<std::size_t> segment_sizes;
  std::size_t zero_acceptance_windows = 0;
  std::vector<std::string> flags;
  double seconds = 0.0;
};

struct PosteriorDraws {
  std::size_t partition_id = 0;
  std::vector<ModelState> states;
  std::vector<double> loglik;
  std::vector<SegmentFrame> frames;
  // Proposal scale of each block at every retained draw: column 0 is mu,
  // column k the block of segment k.
  Eigen::MatrixXd scale_trace;
  ChainDiagnostics diagnostics;

  std::size_t size() const { return states.size(); }
};

/// Per-segment affine maps onto the unit square computed from the bounding
/// box of the segment's training points (plus any `extra` locations falling in
/// the segment).
std::vector<SegmentFrame> segment_frames(const Partition& partition, const SpatialDataset& train,
                                         std::span<const Location> extra = {});

struct SegmentData {
  std::vector<std::size_t> indices;  // rows of the dataset in this segment
  Eigen::Matrix2Xd coords;           // in the segment frame
  Eigen::VectorXd z;
};

std::vector<SegmentData> split_by_segment(const SpatialDataset& data, const Partition& partition,
                                          std::span<const SegmentFrame> frames);

/// Cholesky factor of tau2*I + Omega for one segment, or nullopt when the
/// jitter ladder is exhausted.
std::optional<JitteredCholesky> factor_segment(const SegmentParams& params, const SegmentData& seg);

/// Gaussian log-density of seg.z with constant mean mu given a factor.
double segment_log_likelihood(const JitteredCholesky& factor, const SegmentData& seg, double mu);

/// Product-of-segments Gaussian log-likelihood; -inf when a factorization fails.
double log_likelihood(const SpatialDataset& data, const Partition& partition, const ModelState& state,
                      std::span<const SegmentFrame> frames);
double log_likelihood(std::span<const SegmentData> segments, const ModelState& state);

double log_prior(const ModelState& state, const PriorBounds& bounds = {});
bool in_support(const SegmentParams& params, const PriorBounds& bounds = {});

ModelState initial_state(const SpatialDataset& data, std::size_t K, double nu);

/// Adaptive random-walk Metropolis: scalar random walk on mu, and one
/// 5-dimensional block random walk per segment on the logit-transformed
/// (tau2, sigma2, phi1, phi2, eta). Proposal scales and block covariances adapt
/// every adapt_window iterations during burn-in and are frozen afterwards.
PosteriorDraws run_chain(const SpatialDataset& data, const Partition& partition,
                         const ChainConfig& config, std::span<const SegmentFrame> frames = {});

}  // namespace nsgp
