#include "nsgp/pipeline.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "nsgp/error.hpp"
#include "nsgp/evaluate.hpp"
#include "nsgp/serialize.hpp"
#include "nsgp/variogram.hpp"

namespace nsgp {
namespace fs = std::filesystem;
using nlohmann::json;

std::string artifact::draws_file(std::size_t partition_id) {
  return "draws_partition_" + std::to_string(partition_id) + ".csv";
}

namespace {

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output) / name).string();
}

void ensure_output(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw InputError("cannot create output directory '" + cfg.output + "': " + ec.message());
}

template <class F>
StageTiming timed(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool skipped = false;
  try {
    skipped = body();
  } catch (const InputError& e) {
    throw InputError("stage '" + name + "': " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage '" + name + "': " + e.what());
  }
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return {name, dt.count(), skipped};
}

SpatialDataset load_training(const PipelineConfig& cfg) {
  if (cfg.observations.empty()) throw InputError("no observations file configured (input.observations)");
  return load_observations(cfg.observations, cfg.value_column, cfg.log_transform);
}

PartitionSet load_partitions(const PipelineConfig& cfg) {
  return partitions_from_json(read_json(out_path(cfg, artifact::kPartitions)));
}

std::vector<PosteriorDraws> load_draws(const PipelineConfig& cfg, const PartitionSet& set) {
  std::vector<PosteriorDraws> draws;
  for (const auto& p : set.partitions) {
    auto d = read_draws_csv(out_path(cfg, artifact::draws_file(p.id)), p.K(), cfg.nu);
    d.partition_id = p.id;
    draws.push_back(std::move(d));
  }
  return draws;
}

// Frames as the sampler built them; segments without training data take a
// frame from the prediction points that fall in them.
std::vector<SegmentFrame> prediction_frames(const Partition& p, const SpatialDataset& train,
                                            std::span<const Location> pred) {
  auto frames = segment_frames(p, train);
  const auto with_pred = segment_frames(p, train, pred);
  for (std::size_t k = 0; k < frames.size(); ++k)
    if (frames[k].prior_only) frames[k] = with_pred[k];
  return frames;
}

Partition stationary_partition(const SpatialDataset& data) {
  const BoundingBox box = bounding_box(data.locations());
  Partition p;
  p.id = 1;
  MixtureComponent c;
  c.mean = Eigen::Vector2d(0.5 * (box.min_lon + box.max_lon), 0.5 * (box.min_lat + box.max_lat));
  c.cov = Eigen::Matrix2d::Identity() * std::max(1.0, box.diameter() * box.diameter());
  c.weight = 1.0;
  p.mixture.components = {c};
  p.mixture.converged = true;
  return p;
}

HoldoutScheme build_scheme(const PipelineConfig& cfg, const std::string& name, const SpatialDataset& data) {
  const RngSeed seed{cfg.seed};
  if (name == "kfold") return make_kfold(data.size(), cfg.folds, seed);
  if (name == "block")
    return make_block_holdouts(data.locations(), cfg.block_dlon, cfg.block_dlat, cfg.block_min_size);
  return make_circular_holdouts(data.locations(), cfg.circular_neighbors, cfg.circular_sets, seed);
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

std::string fit_hash(const PipelineConfig& cfg) {
  auto all = cfg.canonical();
  std::map<std::string, std::string> keep;
  for (const auto& [k, v] : all)
    if (k.rfind("input.", 0) == 0 || k.rfind("partition.", 0) == 0 || k.rfind("chain.", 0) == 0 ||
        k == "run.seed")
      keep.emplace(k, v);
  keep.erase("input.locations");
  return config_hash(keep);
}

std::vector<Location> grid_locations(const BoundingBox& box, std::size_t nx, std::size_t ny) {
  auto axis = [](double lo, double hi, std::size_t n, std::size_t i) {
    return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * double(i) / double(n - 1);
  };
  std::vector<Location> out;
  out.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      out.push_back({axis(box.min_lon, box.max_lon, nx, i), axis(box.min_lat, box.max_lat, ny, j)});
  return out;
}

StageTiming stage_partition(const PipelineConfig& cfg) {
  return timed("partition", [&] {
    if (cfg.covariates.empty()) throw InputError("no covariate file configured (input.covariates)");
    ensure_output(cfg);
    const CovariateTable cov = load_covariates(cfg.covariates, cfg.category_columns);
    const PartitionSet set = generate_candidates(cov, RngSeed{cfg.seed}, cfg.candidates());
    write_json(out_path(cfg, artifact::kPartitions), to_json(set));
    std::vector<Location> locs;
    if (!cfg.observations.empty()) locs = load_training(cfg).locations();
    if (!cfg.locations.empty()) {
      const auto extra = load_locations(cfg.locations);
      locs.insert(locs.end(), extra.begin(), extra.end());
    }
    if (!locs.empty()) write_assignments_csv(out_path(cfg, artifact::kAssignments), set, locs);
    return false;
  });
}

StageTiming stage_variogram(const PipelineConfig& cfg) {
  return timed("variogram", [&] {
    ensure_output(cfg);
    const SpatialDataset data = load_training(cfg);
    const auto cells = subregion_variograms(data, cfg.subregion_rows, cfg.subregion_cols, cfg.variogram_bins,
                                            cfg.bootstrap, RngSeed{cfg.seed}, cfg.jobs);
    write_variogram_csv(out_path(cfg, artifact::kVariogramCsv), cells);
    return false;
  });
}

StageTiming stage_fit(const PipelineConfig& cfg, bool resume) {
  return timed("fit", [&] {
    ensure_output(cfg);
    const PartitionSet set = load_partitions(cfg);
    const std::string hash = fit_hash(cfg);
    const std::string stamp_path = out_path(cfg, artifact::kFitStamp);
    if (resume && fs::exists(stamp_path)) {
      const json stamp = read_json(stamp_path);
      bool fresh = stamp.value("fit_hash", "") == hash;
      for (const auto& p : set.partitions) fresh = fresh && fs::exists(out_path(cfg, artifact::draws_file(p.id)));
      if (fresh) return true;
    }
    const SpatialDataset data = load_training(cfg);
    const auto draws = fit_partitions(data, set, cfg.chain(), cfg.jobs);
    json diag = json::array();
    json files = json::array();
    for (std::size_t j = 0; j < draws.size(); ++j) {
      const std::string name = artifact::draws_file(set.partitions[j].id);
      write_draws_csv(out_path(cfg, name), draws[j], cfg.burn_in, cfg.thin);
      diag.push_back(diagnostics_json(draws[j]));
      files.push_back(name);
    }
    write_json(out_path(cfg, artifact::kFitDiagnostics), diag);
    write_json(stamp_path, {{"fit_hash", hash}, {"draws", files}});
    return false;
  });
}

StageTiming stage_evidence(const PipelineConfig& cfg) {
  return timed("evidence", [&] {
    const PartitionSet set = load_partitions(cfg);
    const auto draws = load_draws(cfg, set);
    const SpatialDataset data = load_training(cfg);
    const EvidenceTable table = build_evidence_table(draws, data.size(), cfg.evidence());
    write_evidence_csv(out_path(cfg, artifact::kEvidenceCsv), table);
    write_json(out_path(cfg, artifact::kEvidenceJson), to_json(table));
    return false;
  });
}

StageTiming stage_predict(const PipelineConfig& cfg) {
  return timed("predict", [&] {
    const PartitionSet set = load_partitions(cfg);
    auto draws = load_draws(cfg, set);
    const SpatialDataset data = load_training(cfg);
    const EvidenceTable table = evidence_from_json(read_json(out_path(cfg, artifact::kEvidenceJson)));
    const auto m = std::find(table.methods.begin(), table.methods.end(), cfg.evidence_method);
    if (m == table.methods.end())
      throw InputError("evidence table has no method '" + cfg.evidence_method + "'");
    PartitionWeights weights;
    weights.method = cfg.evidence_method;
    const auto& probs = table.probabilities[static_cast<std::size_t>(m - table.methods.begin())];
    for (const auto& p : set.partitions) {
      const auto at = std::find(table.partition_ids.begin(), table.partition_ids.end(), p.id);
      if (at == table.partition_ids.end())
        throw InputError("evidence table lacks partition " + std::to_string(p.id));
      weights.probabilities.push_back(probs[static_cast<std::size_t>(at - table.partition_ids.begin())]);
    }

    PredictionRequest req;
    req.locations = cfg.locations.empty()
                        ? grid_locations(bounding_box(data.locations()), cfg.grid_nx, cfg.grid_ny)
                        : load_locations(cfg.locations);
    req.n_draws = cfg.n_draws;
    req.include_nugget = cfg.include_nugget;
    req.joint = cfg.joint;
    req.seed = RngSeed{cfg.seed};
    req.jobs = cfg.jobs;
    for (std::size_t j = 0; j < draws.size(); ++j)
      draws[j].frames = prediction_frames(set.partitions[j], data, req.locations);

    const PredictiveDraws pd = sample_predictive(weights, set.partitions, draws, data, req);
    write_prediction_csv(out_path(cfg, artifact::kPredictions), req.locations, summarize(pd, cfg.quantiles));
    if (cfg.write_predictive_draws) write_predictive_draws_csv(out_path(cfg, artifact::kPredictiveDraws), pd);
    return false;
  });
}

StageTiming stage_evaluate(const PipelineConfig& cfg) {
  return timed("evaluate", [&] {
    ensure_output(cfg);
    const SpatialDataset data = load_training(cfg);
    std::optional<CovariateTable> cov;
    if (cfg.strict) {
      if (cfg.covariates.empty()) throw InputError("strict evaluation needs input.covariates");
      cov = load_covariates(cfg.covariates, cfg.category_columns);
    }

    std::vector<ModelSpec> models;
    ModelSpec nsgp;
    nsgp.name = "NSGP";
    nsgp.partitions = load_partitions(cfg);
    nsgp.chain = cfg.chain();
    nsgp.weight_method = cfg.evidence_method;
    nsgp.n_draws = cfg.n_draws;
    nsgp.include_nugget = cfg.include_nugget;
    nsgp.strict = cfg.strict;
    nsgp.covariates = cov ? &*cov : nullptr;
    nsgp.candidates = cfg.candidates();
    models.push_back(nsgp);
    if (cfg.baseline) {
      ModelSpec base = nsgp;
      base.name = "stationary";
      base.strict = false;
      base.partitions.partitions = {stationary_partition(data)};
      models.push_back(base);
    }

    ScoreTable table;
    std::ofstream folds(out_path(cfg, artifact::kEvaluationFolds));
    if (!folds) throw InputError("cannot write '" + out_path(cfg, artifact::kEvaluationFolds) + "'");
    folds << "model,scheme,fold,crps,status\n";
    for (const auto& model : models) {
      ScoreRow row;
      row.model = model.name;
      for (const auto& name : cfg.schemes) {
        const HoldoutScheme scheme = build_scheme(cfg, name, data);
        SchemeScore s = evaluate_model(scheme, data, model, RngSeed{cfg.seed}, cfg.jobs);
        for (const auto& f : s.folds)
          folds << model.name << ',' << name << ',' << f.fold + 1 << ',' << (f.ok ? format_double(f.crps) : "")
                << ',' << (f.ok ? "ok" : "failed") << '\n';
        row.schemes.push_back(std::move(s));
      }
      table.rows.push_back(std::move(row));
    }
    write_score_table_csv(out_path(cfg, artifact::kEvaluation), table);
    return false;
  });
}

std::vector<StageTiming> run_pipeline(const PipelineConfig& cfg, bool resume) {
  cfg.validate();
  std::vector<StageTiming> t;
  t.push_back(stage_partition(cfg));
  t.push_back(stage_fit(cfg, resume));
  t.push_back(stage_evidence(cfg));
  t.push_back(stage_predict(cfg));
  if (cfg.evaluate) t.push_back(stage_evaluate(cfg));
  write_manifest(cfg, t);
  return t;
}

void write_manifest(const PipelineConfig& cfg, const std::vector<StageTiming>& timings) {
  ensure_output(cfg);
  const auto canon = cfg.canonical();
  json stages = json::array();
  for (const auto& s : timings) stages.push_back({{"stage", s.stage}, {"seconds", s.seconds}, {"skipped", s.skipped}});
  json versions = {
      {"nsgp", kVersion},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                    std::to_string(BOOST_VERSION % 100)},
      {"compiler", __VERSION__},
  };
  json j = {{"config", canon},
            {"config_hash", config_hash(canon)},
            {"fit_hash", fit_hash(cfg)},
            {"seed", cfg.seed},
            {"versions", versions},
            {"timings", stages},
            {"created", iso_timestamp()}};
  write_json(out_path(cfg, artifact::kManifest), j);
}

PipelineConfig config_from_manifest(const std::string& path) {
  const json j = read_json(path);
  if (!j.contains("config") || !j["config"].is_object()) throw InputError(path + ": no 'config' object");
  PipelineConfig cfg;
  for (const auto& [k, v] : j["config"].items()) cfg.set(k, v.get<std::string>());
  return cfg;
}

SynthSpec two_regime_spec() {
  SynthSpec s;
  s.truth.id = 1;
  MixtureComponent left, right;
  left.mean = Eigen::Vector2d(0.5, 0.5);
  right.mean = Eigen::Vector2d(1.5, 0.5);
  left.cov = right.cov = Eigen::Matrix2d::Identity() * 0.08;
  left.weight = right.weight = 0.5;
  s.truth.mixture.components = {left, right};
  s.truth.mixture.converged = true;
  SegmentParams rough;
  rough.tau2 = 0.05;
  rough.sigma2 = 1.0;
  rough.phi1 = 0.08;
  rough.phi2 = 0.03;
  rough.eta = 0.5;
  SegmentParams smooth;
  smooth.tau2 = 0.05;
  smooth.sigma2 = 0.25;
  smooth.phi1 = 0.6;
  smooth.phi2 = 0.2;
  smooth.eta = 1.0;
  s.params = {rough, smooth};
  s.mu = 1.0;
  return s;
}

json to_json(const SynthSpec& spec) {
  json params = json::array();
  for (const auto& p : spec.params) params.push_back(to_json(p));
  return {{"partition", to_json(spec.truth.mixture)},
          {"segments", params},
          {"mu", spec.mu},
          {"domain", {spec.domain.min_lon, spec.domain.max_lon, spec.domain.min_lat, spec.domain.max_lat}},
          {"n_obs", spec.n_obs},
          {"n_covariates", spec.n_covariates},
          {"missing_rate", spec.missing_rate},
          {"lattice_cols", spec.lattice_cols},
          {"lattice_jitter", spec.lattice_jitter}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  try {
    s.truth.id = 1;
    s.truth.mixture = mixture_from_json(j.at("partition"));
    for (const auto& p : j.at("segments")) s.params.push_back(segment_params_from_json(p));
    s.mu = j.value("mu", 0.0);
    if (j.contains("domain")) {
      const auto& d = j["domain"];
      if (!d.is_array() || d.size() != 4) throw InputError("synth spec: domain must be [min_lon,max_lon,min_lat,max_lat]");
      s.domain = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()};
    }
    s.n_obs = j.value("n_obs", s.n_obs);
    s.n_covariates = j.value("n_covariates", s.n_covariates);
    s.missing_rate = j.value("missing_rate", s.missing_rate);
    s.lattice_cols = j.value("lattice_cols", s.lattice_cols);
    s.lattice_jitter = j.value("lattice_jitter", s.lattice_jitter);
  } catch (const json::exception& e) {
    throw InputError(std::string("synth spec: ") + e.what());
  }
  return s;
}

void write_synth(const SynthSpec& spec, RngSeed seed, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  const SynthResult r = synthesize(spec, seed);
  write_observations((fs::path(dir) / "observations.csv").string(), r.data);
  write_covariates((fs::path(dir) / "covariates.csv").string(), r.covariates);
  json truth = to_json(spec);
  truth["seed"] = seed.value;
  write_json((fs::path(dir) / "truth.json").string(), truth);
}

}  // namespace nsgp
