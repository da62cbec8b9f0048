#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "nsgp/evidence.hpp"
#include "nsgp/inference.hpp"

namespace nsgp {

struct PredictionRequest {
  std::vector<Location> locations;
  std::size_t n_draws = 1000;
  bool include_nugget = true;  // predict observable Z* (true) or the latent mu + Y*
  bool joint = true;           // false: independent draws from each marginal (large grids)
  RngSeed seed{};
  std::size_t jobs = 1;
};

/// Conditional Gaussian of the prediction vector given the training data for a
/// single posterior state. Cross-segment blocks of `cov` are exactly zero.
struct ConditionalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<std::size_t> segment;  // segment of each prediction location
};

ConditionalMoments conditional_moments(const ModelState& state, const Partition& partition,
                                       std::span<const SegmentFrame> frames, const SpatialDataset& train,
                                       std::span<const Location> pred, bool include_nugget = true);

struct PredictiveDraws {
  Eigen::MatrixXd draws;  // n_draws x m
  std::vector<std::size_t> partition_trace;  // partition id of each draw
  std::vector<std::size_t> state_trace;      // posterior state index of each draw
};

/// Model-averaged sampling: for every output draw pick a partition by its
/// posterior weight, a stored posterior state uniformly with replacement, and
/// a value from the conditional Gaussian. Partitions, weights and draws are
/// aligned by position.
PredictiveDraws sample_predictive(const PartitionWeights& weights, std::span<const Partition> partitions,
                                  std::span<const PosteriorDraws> draws, const SpatialDataset& train,
                                  const PredictionRequest& request);

struct PredictionSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<double> probs;
  Eigen::MatrixXd quantiles;  // m x probs.size()
};

PredictionSummary summarize(const PredictiveDraws& draws,
                            std::span<const double> probs = std::vector<double>{0.05, 0.5, 0.95});

Eigen::VectorXd spatial_average_draws(const PredictiveDraws& draws);

}  // namespace nsgp
