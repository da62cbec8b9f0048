#pragma once

#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "nsgp/config.hpp"
#include "nsgp/synth.hpp"

namespace nsgp {

inline constexpr const char* kVersion = "0.1.0";

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
  bool skipped = false;
};

/// Output file names inside the configured output directory.
namespace artifact {
inline constexpr const char* kPartitions = "partitions.json";
inline constexpr const char* kAssignments = "assignments.csv";
inline constexpr const char* kVariogramCsv = "variogram.csv";
inline constexpr const char* kFitDiagnostics = "fit_diagnostics.json";
inline constexpr const char* kFitStamp = "fit_stamp.json";
inline constexpr const char* kEvidenceCsv = "evidence.csv";
inline constexpr const char* kEvidenceJson = "evidence.json";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kPredictiveDraws = "predictive_draws.csv";
inline constexpr const char* kEvaluation = "evaluation.csv";
inline constexpr const char* kEvaluationFolds = "evaluation_folds.csv";
inline constexpr const char* kManifest = "manifest.json";
std::string draws_file(std::size_t partition_id);
}  // namespace artifact

// Each stage reads its inputs from the config and from earlier stages' files in
// the output directory. Errors are rethrown with the stage name prepended.
StageTiming stage_partition(const PipelineConfig& cfg);
StageTiming stage_variogram(const PipelineConfig& cfg);
StageTiming stage_fit(const PipelineConfig& cfg, bool resume = false);
StageTiming stage_evidence(const PipelineConfig& cfg);
StageTiming stage_predict(const PipelineConfig& cfg);
StageTiming stage_evaluate(const PipelineConfig& cfg);

/// partition -> fit -> evidence -> predict (-> evaluate when enabled), then the manifest.
std::vector<StageTiming> run_pipeline(const PipelineConfig& cfg, bool resume = false);

/// Writes manifest.json: resolved config, its hash, seed, library versions and timings.
void write_manifest(const PipelineConfig& cfg, const std::vector<StageTiming>& timings);
/// The config recorded in a manifest.
PipelineConfig config_from_manifest(const std::string& path);

/// Hash over the settings that determine the posterior draws.
std::string fit_hash(const PipelineConfig& cfg);

/// Axis-aligned nx x ny lattice spanning the bounding box, edges included.
std::vector<Location> grid_locations(const BoundingBox& box, std::size_t nx, std::size_t ny);

/// Two vertical regimes on [0,2]x[0,1] split at lon = 1: a rough, high-variance
/// left half and a smooth, low-variance anisotropic right half.
SynthSpec two_regime_spec();
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

/// Writes observations.csv, covariates.csv and truth.json into `dir`.
void write_synth(const SynthSpec& spec, RngSeed seed, const std::string& dir);

}  // namespace nsgp
