#include <doctest.h>

#include <filesystem>

#include "nsgp/error.hpp"
#include "nsgp/serialize.hpp"
#include "oracles.hpp"

using namespace nsgp;
namespace fs = std::filesystem;

namespace {
std::string tmp(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nsgp_test_serialize";
  fs::create_directories(dir);
  return (dir / name).string();
}
}  // namespace

TEST_CASE("partition JSON round trip is exact") {
  PartitionSet set;
  set.partitions.push_back(oracle::vertical_split(1.0, 1));
  set.partitions.push_back(oracle::strip_partition(3, 2));
  set.partitions[1].mixture.components[2].cov(0, 1) = set.partitions[1].mixture.components[2].cov(1, 0) = 0.0123456789;
  set.partitions[1].mixture.log_likelihood = -123.456789012345;
  write_json(tmp("p.json"), to_json(set));
  const auto back = partitions_from_json(read_json(tmp("p.json")));
  REQUIRE(back.partitions.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(back.partitions[j].id == set.partitions[j].id);
    CHECK(back.partitions[j].mixture.log_likelihood == set.partitions[j].mixture.log_likelihood);
    for (std::size_t k = 0; k < set.partitions[j].K(); ++k) {
      CHECK(back.partitions[j].mixture.components[k].mean == set.partitions[j].mixture.components[k].mean);
      CHECK(back.partitions[j].mixture.components[k].cov == set.partitions[j].mixture.components[k].cov);
    }
  }
}

TEST_CASE("draws CSV round trip is exact") {
  PosteriorDraws d;
  d.partition_id = 4;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    ModelState s;
    s.mu = u(rng);
    for (int k = 0; k < 2; ++k) s.segments.push_back(SegmentParams{u(rng), u(rng), u(rng), u(rng), u(rng), 0.5});
    d.states.push_back(s);
    d.loglik.push_back(-100.0 * u(rng));
  }
  write_draws_csv(tmp("d.csv"), d, 100, 1);
  const auto back = read_draws_csv(tmp("d.csv"), 2);
  REQUIRE(back.size() == 20);
  CHECK(back.loglik == d.loglik);
  for (std::size_t t = 0; t < 20; ++t) {
    CHECK(back.states[t].mu == d.states[t].mu);
    CHECK(back.states[t].segments[1].eta == d.states[t].segments[1].eta);
  }
  CHECK_THROWS_AS(read_draws_csv(tmp("d.csv"), 3), InputError);
}

TEST_CASE("evidence table JSON round trip") {
  PosteriorDraws a, b;
  a.partition_id = 1;
  b.partition_id = 2;
  a.loglik = {-10.0, -11.0, -10.5};
  b.loglik = {-12.0, -12.5, -12.2};
  const std::vector<PosteriorDraws> d{a, b};
  const auto t = build_evidence_table(d, 20, EvidenceOptions{});
  CHECK(t.methods.size() == 12);
  const auto back = evidence_from_json(to_json(t));
  CHECK(back.methods == t.methods);
  CHECK(back.partition_ids == t.partition_ids);
  CHECK(back.probabilities == t.probabilities);
  write_evidence_csv(tmp("e.csv"), t);
  const auto csv = read_csv(tmp("e.csv"));
  CHECK(csv.rows.size() == 24);
}
