#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nsgp/evidence.hpp"
#include "nsgp/inference.hpp"
#include "nsgp/partition.hpp"
#include "nsgp/predict.hpp"

namespace nsgp {

enum class HoldoutKind { KFold, Block, Circular };
std::string holdout_name(HoldoutKind kind);

struct HoldoutScheme {
  HoldoutKind kind = HoldoutKind::KFold;
  std::vector<std::vector<std::size_t>> folds;  // sorted test indices per fold
};

HoldoutScheme make_kfold(std::size_t n, std::size_t k, RngSeed seed);

/// Tiles the bounding box from its lower-left corner with dlon x dlat cells and
/// keeps the cells holding at least min_size points (row-major from the south).
HoldoutScheme make_block_holdouts(std::span<const Location> locations, double dlon, double dlat,
                                  std::size_t min_size);

/// n_sets folds, each a distinct random center plus its m_neighbors nearest
/// points (Euclidean; ties broken by index). Folds may overlap.
HoldoutScheme make_circular_holdouts(std::span<const Location> locations, std::size_t m_neighbors,
                                     std::size_t n_sets, RngSeed seed);

/// Sample-based CRPS, (1/T) sum |x - y| - (1/(2T^2)) sum sum |x_t - x_s|, via the sorted form.
double crps_ecdf(std::span<const double> samples, double obs);

struct FoldScore {
  std::size_t fold = 0;
  double crps = 0.0;
  bool ok = true;
  std::string error;
};

struct SchemeScore {
  HoldoutKind kind = HoldoutKind::KFold;
  std::vector<FoldScore> folds;
  double mean = 0.0;  // over successful folds
  std::size_t failed = 0;
};

struct ScoreRow {
  std::string model;
  std::vector<SchemeScore> schemes;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;
};

/// Produces predictive draws at the test locations from a training set.
using Predictor = std::function<PredictiveDraws(const SpatialDataset& train,
                                                std::span<const Location> test, std::size_t fold)>;

/// k-fold folds score the mean pointwise CRPS over held-out points; block and
/// circular folds score the CRPS of the predicted spatial average against the
/// observed average. Failed folds are recorded and excluded from the mean.
SchemeScore score_scheme(const HoldoutScheme& scheme, const SpatialDataset& data,
                         const Predictor& predictor, std::size_t jobs = 1);

// Partition weighting menu: "HM", "IS1".."IS9", "AICM", "BICM".
PartitionWeights weights_from_draws(std::span<const PosteriorDraws> draws, std::size_t n_obs,
                                    const std::string& method, const EvidenceOptions& options = {});

std::vector<PosteriorDraws> fit_partitions(const SpatialDataset& train, const PartitionSet& partitions,
                                           const ChainConfig& chain, std::size_t jobs = 1);

struct ModelSpec {
  std::string name = "NSGP";
  PartitionSet partitions;
  ChainConfig chain;
  std::string weight_method = "HM";
  std::size_t n_draws = 1000;
  bool include_nugget = true;
  // Strict mode refits candidate partitions on each fold's training covariates.
  bool strict = false;
  const CovariateTable* covariates = nullptr;
  CandidateOptions candidates;
};

/// The full model-averaged predictor: chains for every candidate partition on
/// the training data, evidence weights, then model-averaged draws.
Predictor bma_predictor(const ModelSpec& spec, RngSeed seed, HoldoutKind kind);

SchemeScore evaluate_model(const HoldoutScheme& scheme, const SpatialDataset& data, const ModelSpec& spec,
                           RngSeed seed, std::size_t jobs = 1);

}  // namespace nsgp
