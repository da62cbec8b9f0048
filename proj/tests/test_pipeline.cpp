#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsgp/error.hpp"
#include "nsgp/pipeline.hpp"
#include "nsgp/serialize.hpp"

using namespace nsgp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig small_config(const fs::path& data, const fs::path& out) {
  PipelineConfig c;
  c.observations = (data / "observations.csv").string();
  c.covariates = (data / "covariates.csv").string();
  c.output = out.string();
  c.K_values = {2, 3};
  c.restarts = 4;
  c.max_keep = 3;
  c.n_iter = 600;
  c.burn_in = 300;
  c.n_draws = 200;
  c.grid_nx = 6;
  c.grid_ny = 4;
  c.seed = 5;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NSGP_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("synth spec JSON round trip") {
  const SynthSpec s = two_regime_spec();
  const SynthSpec back = synth_spec_from_json(to_json(s));
  CHECK(back.params.size() == 2);
  CHECK(back.params[1].eta == s.params[1].eta);
  CHECK(back.truth.mixture.components[1].mean == s.truth.mixture.components[1].mean);
  CHECK(back.mu == s.mu);
}

TEST_CASE("grid spans the bounding box") {
  const auto g = grid_locations({0, 2, 0, 1}, 3, 2);
  REQUIRE(g.size() == 6);
  CHECK(g.front() == Location{0, 0});
  CHECK(g.back() == Location{2, 1});
  CHECK(g[1] == Location{1, 0});
}

TEST_CASE("end-to-end pipeline: artifacts, determinism and resume") {
  const auto root = fresh_dir("nsgp_pipeline_test");
  SynthSpec spec = two_regime_spec();
  spec.n_obs = 60;
  spec.n_covariates = 150;
  write_synth(spec, RngSeed{3}, (root / "data").string());

  const auto a = small_config(root / "data", root / "a");
  const auto ta = run_pipeline(a);
  for (const char* f : {artifact::kPartitions, artifact::kAssignments, artifact::kEvidenceCsv,
                        artifact::kEvidenceJson, artifact::kPredictions, artifact::kFitDiagnostics,
                        artifact::kManifest})
    CHECK(fs::exists(root / "a" / f));
  const auto set = partitions_from_json(read_json((root / "a" / artifact::kPartitions).string()));
  for (const auto& p : set.partitions) CHECK(fs::exists(root / "a" / artifact::draws_file(p.id)));
  const auto pred = read_csv((root / "a" / artifact::kPredictions).string());
  CHECK(pred.header == std::vector<std::string>{"lon", "lat", "mean", "sd", "q05", "q50", "q95"});
  CHECK(pred.rows.size() == 24);

  auto b = a;
  b.output = (root / "b").string();
  run_pipeline(b);
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (e.path().filename() == artifact::kManifest) continue;
    CHECK_MESSAGE(slurp(e.path()) == slurp(root / "b" / e.path().filename()), e.path().filename().string());
  }

  const auto resumed = run_pipeline(a, true);
  CHECK(resumed[1].stage == "fit");
  CHECK(resumed[1].skipped);
  auto changed = a;
  changed.n_iter = 700;
  const auto refit = run_pipeline(changed, true);
  CHECK_FALSE(refit[1].skipped);

  const auto manifest = read_json((root / "a" / artifact::kManifest).string());
  CHECK(manifest.at("config_hash").get<std::string>() == config_hash(changed.canonical()));
  const auto from_manifest = config_from_manifest((root / "a" / artifact::kManifest).string());
  CHECK(from_manifest.canonical() == changed.canonical());
}

TEST_CASE("stage errors carry the stage name") {
  PipelineConfig c;
  c.observations = "/nonexistent/obs.csv";
  c.covariates = "/nonexistent/cov.csv";
  c.output = fresh_dir("nsgp_stage_err").string();
  try {
    stage_partition(c);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("partition") != std::string::npos);
    CHECK(msg.find("/nonexistent/cov.csv") != std::string::npos);
  }
}

TEST_CASE("CLI exit codes") {
  const auto root = fresh_dir("nsgp_cli_test");
  CHECK(run_cli("synth --n-obs 40 -o " + (root / "data").string()) == 0);
  CHECK(fs::exists(root / "data" / "observations.csv"));
  CHECK(run_cli("fit --observations /nonexistent.csv -o " + (root / "out").string()) == 2);
  CHECK(run_cli("partition --covariates /nonexistent.csv -o " + (root / "out").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("run --set chain.nope=1") == 2);
  const std::string common = "--observations " + (root / "data" / "observations.csv").string() + " --covariates " +
                             (root / "data" / "covariates.csv").string() + " -o " + (root / "out").string() +
                             " --set partition.K_values=2 --set partition.restarts=3";
  CHECK(run_cli("partition " + common) == 0);
  CHECK(run_cli("variogram --subregions 1x2 --bootstrap 20 " + common) == 0);
  CHECK(fs::exists(root / "out" / "variogram.csv"));
  CHECK(run_cli("fit --n-iter 400 --burn-in 200 " + common) == 0);
  CHECK(run_cli("evidence " + common) == 0);
  CHECK(run_cli("predict --n-draws 50 --grid-nx 3 --grid-ny 3 " + common) == 0);
  CHECK(read_csv((root / "out" / "predictions.csv").string()).rows.size() == 9);
  CHECK(run_cli("evaluate --schemes kfold --set evaluate.folds=2 --set chain.n_iter=300 --set chain.burn_in=100 "
                "--set predict.n_draws=50 " + common) == 0);
  const auto eval = read_csv((root / "out" / "evaluation.csv").string());
  CHECK(eval.rows.size() == 2);
}
