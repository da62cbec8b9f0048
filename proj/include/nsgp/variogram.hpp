#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "nsgp/data.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

struct EmpiricalSemivariogram {
  std::vector<double> bin_centers;  // mean pair distance within each reported bin
  std::vector<double> gamma;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> bin_index;  // which of the n_bins equal-width bins each entry is
  std::size_t n_bins = 0;
  double max_dist = 0.0;
};

struct VariogramBands {
  std::vector<double> lower;  // 2.5th percentile per reported bin
  std::vector<double> upper;  // 97.5th percentile per reported bin
};

struct ExponentialVariogramFit {
  double nugget = 0.0;
  double partial_sill = 0.0;
  double range = 1.0;
  bool range_identified = true;
  double weighted_sse = 0.0;
  std::optional<VariogramBands> bands;

  double operator()(double h) const;
};

/// Residuals of an OLS fit on (1, lon, lat, lon*lat).
Eigen::VectorXd detrend_ols(const SpatialDataset& data);

/// Equal-width bins on [0, max_dist]; max_dist <= 0 selects half the largest
/// pairwise distance. Only nonempty bins are reported.
EmpiricalSemivariogram empirical_semivariogram(std::span<const double> residuals,
                                               std::span<const Location> locations,
                                               std::size_t n_bins = 15, double max_dist = 0.0);

/// Pair-count weighted least squares for nugget + partial_sill * (1 - exp(-h/range))
/// with nonnegative sills. The range is profiled over a fixed log grid and then
/// refined by golden-section search, so the result is deterministic.
ExponentialVariogramFit fit_exponential(const EmpiricalSemivariogram& emp);

VariogramBands bootstrap_bands(const ExponentialVariogramFit& fit, std::span<const Location> locations,
                               const EmpiricalSemivariogram& binning, std::size_t n_boot, RngSeed seed,
                               std::size_t jobs = 1);

struct SubregionVariogram {
  std::size_t row = 0, col = 0;  // grid cell (row along latitude)
  BoundingBox box;
  std::size_t n = 0;
  EmpiricalSemivariogram empirical;
  std::optional<ExponentialVariogramFit> fit;
};

/// Splits the bounding box into a rows x cols grid and runs the variogram
/// analysis on the OLS residuals falling in each cell.
std::vector<SubregionVariogram> subregion_variograms(const SpatialDataset& data, std::size_t rows,
                                                     std::size_t cols, std::size_t n_bins,
                                                     std::size_t n_boot, RngSeed seed,
                                                     std::size_t jobs = 1);

double quantile_type7(std::vector<double> values, double p);

}  // namespace nsgp
