#pragma once

#include <span>
#include <vector>

#include "nsgp/covariance.hpp"
#include "nsgp/data.hpp"
#include "nsgp/partition.hpp"

namespace nsgp {

std::vector<Location> uniform_locations(const BoundingBox& domain, std::size_t n, Rng& rng);

/// nx x ny lattice over the domain, cell-centred, each point displaced
/// uniformly by up to `jitter` of a cell in each direction.
std::vector<Location> jittered_lattice(const BoundingBox& domain, std::size_t nx, std::size_t ny,
                                       double jitter, Rng& rng);

/// One draw of mu + Y + eps at `locations` under the partition-induced
/// covariance, with lags measured in `frames` (one per segment).
std::vector<double> simulate_field(const Partition& truth, std::span<const SegmentParams> params, double mu,
                                   std::span<const Location> locations, std::span<const SegmentFrame> frames,
                                   Rng& rng);

struct SynthSpec {
  Partition truth;
  std::vector<SegmentParams> params;
  double mu = 0.0;
  BoundingBox domain{0.0, 2.0, 0.0, 1.0};
  std::size_t n_obs = 200;
  std::size_t n_covariates = 400;
  double missing_rate = 0.1;
  // > 0 places observations on a jittered lattice with this many columns
  std::size_t lattice_cols = 0;
  double lattice_jitter = 0.3;
};

struct SynthResult {
  SpatialDataset data;
  CovariateTable covariates;
  std::vector<SegmentFrame> frames;
  std::vector<std::size_t> labels;
};

/// Observation locations, the field from the true model (frames computed from
/// the observation locations, as the sampler does), and covariate records drawn
/// from the true mixture with a segment-linked land-use class.
SynthResult synthesize(const SynthSpec& spec, RngSeed seed);

}  // namespace nsgp
