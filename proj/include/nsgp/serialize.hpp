#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "nsgp/evaluate.hpp"
#include "nsgp/evidence.hpp"
#include "nsgp/inference.hpp"
#include "nsgp/partition.hpp"
#include "nsgp/predict.hpp"
#include "nsgp/variogram.hpp"

namespace nsgp {

nlohmann::json to_json(const MixtureModel& model);
MixtureModel mixture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PartitionSet& set);
PartitionSet partitions_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SegmentParams& p);
SegmentParams segment_params_from_json(const nlohmann::json& j, double default_nu = 0.5);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// Columns: iteration, mu, then tau2_k, sigma2_k, phi1_k, phi2_k, eta_k per
/// segment (1-based k), then loglik. nu is not stored.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws, std::size_t burn_in,
                     std::size_t thin);
PosteriorDraws read_draws_csv(const std::string& path, std::size_t K, double nu = 0.5);

nlohmann::json diagnostics_json(const PosteriorDraws& draws);

void write_assignments_csv(const std::string& path, const PartitionSet& set,
                           std::span<const Location> locations);

struct EvidenceTable {
  std::vector<std::size_t> partition_ids;
  std::vector<std::string> methods;               // column order
  std::vector<std::vector<double>> log_ml;        // [method][partition]
  std::vector<std::vector<double>> scaled;        // [method][partition]
  std::vector<std::vector<double>> probabilities; // [method][partition]
};

EvidenceTable build_evidence_table(std::span<const PosteriorDraws> draws, std::size_t n_obs,
                                   const EvidenceOptions& options);
void write_evidence_csv(const std::string& path, const EvidenceTable& table);
nlohmann::json to_json(const EvidenceTable& table);
EvidenceTable evidence_from_json(const nlohmann::json& j);

void write_prediction_csv(const std::string& path, std::span<const Location> locations,
                          const PredictionSummary& summary);
void write_predictive_draws_csv(const std::string& path, const PredictiveDraws& draws);

void write_variogram_csv(const std::string& path, const std::vector<SubregionVariogram>& cells);

void write_score_table_csv(const std::string& path, const ScoreTable& table);

}  // namespace nsgp
