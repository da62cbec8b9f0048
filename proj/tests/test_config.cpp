#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nsgp/config.hpp"
#include "nsgp/error.hpp"

using namespace nsgp;
namespace fs = std::filesystem;

TEST_CASE("defaults follow the published workflow") {
  const PipelineConfig c;
  CHECK(c.n_iter == 20000);
  CHECK(c.burn_in == 10000);
  CHECK(c.thin == 1);
  CHECK(c.nu == 0.5);
  CHECK(c.deltas.size() == 9);
  CHECK(c.K_values == std::vector<std::size_t>{2, 3, 4, 5, 6});
  CHECK(c.max_keep == 8);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("set parses typed values and rejects bad input") {
  PipelineConfig c;
  c.set("partition.K_values", "2, 4");
  CHECK(c.K_values == std::vector<std::size_t>{2, 4});
  c.set("variogram.subregions", "2x3");
  CHECK(c.subregion_rows == 2);
  CHECK(c.subregion_cols == 3);
  c.set("predict.joint", "false");
  CHECK_FALSE(c.joint);
  CHECK_THROWS_AS(c.set("chain.n_iter", "-5"), InputError);
  CHECK_THROWS_AS(c.set("chain.n_iter", "abc"), InputError);
  CHECK_THROWS_AS(c.set("predict.joint", "maybe"), InputError);
  CHECK_THROWS_AS(c.set("chain.bogus", "1"), InputError);
  c.set("evidence.deltas", "0.5,1.5");
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("INI file loading") {
  const auto path = (fs::temp_directory_path() / "nsgp_cfg.ini").string();
  std::ofstream(path) << "# comment\n[chain]\nn_iter = 500\nburn_in = 100\n[run]\nseed = 9\n";
  const auto c = load_config(path);
  CHECK(c.n_iter == 500);
  CHECK(c.burn_in == 100);
  CHECK(c.seed == 9);
  std::ofstream(path) << "[chain]\nwhat = 1\n";
  CHECK_THROWS_AS(load_config(path), InputError);
  CHECK_THROWS_AS(load_config("/nonexistent.ini"), InputError);
}

TEST_CASE("config hash is stable and sensitive") {
  PipelineConfig a, b;
  CHECK(config_hash(a.canonical()) == config_hash(b.canonical()));
  CHECK(config_hash(a.canonical()).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a.canonical()) != config_hash(b.canonical()));
}

TEST_CASE("every canonical key can be set back") {
  PipelineConfig a;
  a.observations = "x.csv";
  a.deltas = {0.25, 0.75};
  PipelineConfig b;
  for (const auto& [k, v] : a.canonical()) b.set(k, v);
  CHECK(b.canonical() == a.canonical());
}
