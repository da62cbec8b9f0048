#include <CLI11.hpp>
#include <iostream>

#include "nsgp/config.hpp"
#include "nsgp/error.hpp"
#include "nsgp/pipeline.hpp"
#include "nsgp/serialize.hpp"

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct Overrides {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;  // applied after --set

  nsgp::PipelineConfig resolve() const {
    nsgp::PipelineConfig cfg;
    if (!config.empty())
      cfg = ends_with(config, ".json") ? nsgp::config_from_manifest(config) : nsgp::load_config(config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw nsgp::InputError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) cfg.set(k, v);
    cfg.validate();
    return cfg;
  }
};

// Registers a flag that overrides config key `key` when given.
void bind(CLI::App* app, Overrides& ov, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      name, [&ov, key](const std::string& v) { ov.flags.emplace_back(key, v); }, help);
}

void bind_flag(CLI::App* app, Overrides& ov, const std::string& name, const std::string& key,
               const std::string& help) {
  app->add_flag_function(
      name, [&ov, key](std::int64_t) { ov.flags.emplace_back(key, "true"); }, help);
}

void add_common(CLI::App* app, Overrides& ov) {
  app->add_option("-c,--config", ov.config, "Config file (INI) or a previous run's manifest.json");
  app->add_option("--set", ov.sets, "Override a config key: section.key=value (repeatable)");
  bind(app, ov, "-o,--output", "run.output", "Output directory");
  bind(app, ov, "--seed", "run.seed", "Root random seed");
  bind(app, ov, "-j,--jobs", "run.jobs", "Worker threads");
  bind(app, ov, "--observations", "input.observations", "Observation CSV (lon,lat,value)");
  bind(app, ov, "--value-column", "input.value_column", "Response column name");
  bind_flag(app, ov, "--log-transform", "input.log_transform", "Take logs of the response");
  bind(app, ov, "--covariates", "input.covariates", "Covariate CSV (lon,lat,categories...)");
  bind(app, ov, "--locations", "input.locations", "Location CSV (lon,lat)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-partitioned nonstationary Gaussian-process prediction"};
  app.require_subcommand(1);
  Overrides ov;
  bool resume = false;
  std::string synth_spec, synth_dir = "synth";
  std::uint64_t synth_seed = 1;
  std::size_t synth_n = 0, synth_cols = 0;

  auto* partition = app.add_subcommand("partition", "Fit covariate mixtures and write candidate partitions");
  auto* variogram = app.add_subcommand("variogram", "Empirical semivariograms with exponential fits and bands");
  auto* fit = app.add_subcommand("fit", "Run one MCMC chain per candidate partition");
  auto* evidence = app.add_subcommand("evidence", "Marginal-likelihood estimates and partition probabilities");
  auto* predict = app.add_subcommand("predict", "Model-averaged predictive surface");
  auto* evaluate = app.add_subcommand("evaluate", "Holdout CRPS for the model-averaged and stationary models");
  auto* run = app.add_subcommand("run", "partition, fit, evidence, predict (and evaluate) in one go");
  auto* synth = app.add_subcommand("synth", "Simulate observations and covariates from a known partition");

  for (auto* sc : {partition, variogram, fit, evidence, predict, evaluate, run}) add_common(sc, ov);
  bind(partition, ov, "--K", "partition.K_values", "Comma-separated component counts");
  bind(partition, ov, "--restarts", "partition.restarts", "EM restarts per K");
  bind(variogram, ov, "--subregions", "variogram.subregions", "RxC grid of subregions");
  bind(variogram, ov, "--bootstrap", "variogram.bootstrap", "Bootstrap replicates for the bands");
  for (auto* sc : {fit, run}) {
    sc->add_flag("--resume", resume, "Skip fitting when draws match the config hash");
    bind(sc, ov, "--n-iter", "chain.n_iter", "MCMC iterations");
    bind(sc, ov, "--burn-in", "chain.burn_in", "Burn-in iterations");
    bind(sc, ov, "--thin", "chain.thin", "Thinning interval");
  }
  bind(evidence, ov, "--method", "evidence.method", "Weighting method (HM, IS1..IS9, AICM, BICM)");
  for (auto* sc : {predict, run}) {
    bind(sc, ov, "--method", "evidence.method", "Weighting method (HM, IS1..IS9, AICM, BICM)");
    bind(sc, ov, "--n-draws", "predict.n_draws", "Predictive draws");
    bind(sc, ov, "--grid-nx", "predict.grid_nx", "Grid columns");
    bind(sc, ov, "--grid-ny", "predict.grid_ny", "Grid rows");
  }
  bind_flag(run, ov, "--evaluate", "evaluate.enabled", "Also run the holdout evaluation");
  bind(evaluate, ov, "--schemes", "evaluate.schemes", "Comma-separated: kfold,block,circular");
  bind_flag(evaluate, ov, "--strict", "evaluate.strict", "Refit partitions inside each fold");

  synth->add_option("--spec", synth_spec, "JSON spec of the true partition and parameters");
  synth->add_option("-o,--output", synth_dir, "Output directory");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--n-obs", synth_n, "Number of observations");
  synth->add_option("--lattice-cols", synth_cols, "Place observations on a jittered lattice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      nsgp::SynthSpec spec =
          synth_spec.empty() ? nsgp::two_regime_spec() : nsgp::synth_spec_from_json(nsgp::read_json(synth_spec));
      if (synth_n > 0) spec.n_obs = synth_n;
      if (synth_cols > 0) spec.lattice_cols = synth_cols;
      nsgp::write_synth(spec, nsgp::RngSeed{synth_seed}, synth_dir);
      return 0;
    }
    const nsgp::PipelineConfig cfg = ov.resolve();
    std::vector<nsgp::StageTiming> timings;
    if (run->parsed()) {
      timings = nsgp::run_pipeline(cfg, resume);
    } else {
      if (partition->parsed()) timings.push_back(nsgp::stage_partition(cfg));
      if (variogram->parsed()) timings.push_back(nsgp::stage_variogram(cfg));
      if (fit->parsed()) timings.push_back(nsgp::stage_fit(cfg, resume));
      if (evidence->parsed()) timings.push_back(nsgp::stage_evidence(cfg));
      if (predict->parsed()) timings.push_back(nsgp::stage_predict(cfg));
      if (evaluate->parsed()) timings.push_back(nsgp::stage_evaluate(cfg));
    }
    for (const auto& t : timings)
      std::cerr << t.stage << ": " << (t.skipped ? "skipped (up to date)" : std::to_string(t.seconds) + " s") << '\n';
    return 0;
  } catch (const nsgp::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nsgp::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
