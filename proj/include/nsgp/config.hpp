#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nsgp/evaluate.hpp"
#include "nsgp/inference.hpp"
#include "nsgp/partition.hpp"

namespace nsgp {

/// Every pipeline setting. Defaults follow the published workflow where it
/// fixes a value (20000 iterations, 10000 burn-in, no thinning, nu = 0.5,
/// delta grid 0.1..0.9, K from 2 to 6, eight candidates).
struct PipelineConfig {
  // input
  std::string observations;
  std::string value_column = "value";
  bool log_transform = false;
  std::string covariates;
  std::vector<std::string> category_columns;
  std::string locations;  // extra locations for the assignment CSV / prediction

  // partition
  std::vector<std::size_t> K_values{2, 3, 4, 5, 6};
  std::size_t restarts = 20;
  double em_tol = 1e-6;
  std::size_t em_max_iter = 500;
  std::size_t max_keep = 8;
  bool concomitant = false;
  bool weighted_assignment = false;

  // chain
  std::size_t n_iter = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  std::size_t adapt_window = 50;
  double nu = 0.5;

  // evidence
  std::string evidence_method = "HM";
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  bool population_variance = false;

  // predict
  std::size_t grid_nx = 40;
  std::size_t grid_ny = 40;
  std::size_t n_draws = 1000;
  bool include_nugget = true;
  bool joint = true;
  std::vector<double> quantiles{0.05, 0.5, 0.95};
  bool write_predictive_draws = false;

  // variogram
  std::size_t variogram_bins = 15;
  std::size_t bootstrap = 500;
  std::size_t subregion_rows = 1;
  std::size_t subregion_cols = 1;

  // evaluate
  bool evaluate = false;
  std::vector<std::string> schemes{"kfold", "block", "circular"};
  std::size_t folds = 10;
  double block_dlon = 3.3;
  double block_dlat = 1.7;
  std::size_t block_min_size = 29;
  std::size_t circular_neighbors = 29;
  std::size_t circular_sets = 10;
  bool strict = false;
  bool baseline = true;

  // run
  std::uint64_t seed = 1;
  std::string output = "out";
  std::size_t jobs = 1;

  /// Applies one "section.key" = value setting; throws InputError on unknown keys.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  /// Canonical "key=value" lines, sorted by key; the basis of config_hash.
  std::map<std::string, std::string> canonical() const;

  ChainConfig chain() const;
  CandidateOptions candidates() const;
  EvidenceOptions evidence() const;
};

/// INI-style file: [section] headers, key = value lines, '#' or ';' comments.
PipelineConfig load_config(const std::string& path);

std::string config_hash(const std::map<std::string, std::string>& canonical);

}  // namespace nsgp
