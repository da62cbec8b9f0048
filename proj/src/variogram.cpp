#include "nsgp/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsgp/covariance.hpp"
#include "nsgp/error.hpp"
#include "nsgp/parallel.hpp"

namespace nsgp {

double ExponentialVariogramFit::operator()(double h) const {
  return nugget + partial_sill * (1.0 - std::exp(-h / range));
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw InputError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Eigen::VectorXd detrend_ols(const SpatialDataset& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  if (n < 5) throw InputError("detrend_ols: need at least 5 observations");
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data.locations()[static_cast<std::size_t>(i)];
    X.row(i) << 1.0, s.lon, s.lat, s.lon * s.lat;
    y(i) = data.values()[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < 4) throw InputError("detrend_ols: rank-deficient trend design (collinear coordinates)");
  const Eigen::VectorXd beta = qr.solve(y);
  return y - X * beta;
}

EmpiricalSemivariogram empirical_semivariogram(std::span<const double> residuals,
                                               std::span<const Location> locations,
                                               std::size_t n_bins, double max_dist) {
  const std::size_t n = locations.size();
  if (n < 2 || residuals.size() != n)
    throw InputError("empirical_semivariogram: need at least 2 aligned residuals");
  if (n_bins == 0) throw InputError("empirical_semivariogram: n_bins must be positive");
  if (!(max_dist > 0.0)) {
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) dmax = std::max(dmax, distance(locations[i], locations[j]));
    max_dist = 0.5 * dmax;
  }
  const double width = max_dist / double(n_bins);
  std::vector<double> sum_sq(n_bins, 0.0), sum_d(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(locations[i], locations[j]);
      if (d > max_dist) continue;
      const auto b = std::min(static_cast<std::size_t>(d / width), n_bins - 1);
      const double diff = residuals[i] - residuals[j];
      sum_sq[b] += diff * diff;
      sum_d[b] += d;
      ++count[b];
    }
  }
  EmpiricalSemivariogram out;
  out.n_bins = n_bins;
  out.max_dist = max_dist;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    out.bin_index.push_back(b);
    out.counts.push_back(count[b]);
    out.bin_centers.push_back(sum_d[b] / double(count[b]));
    out.gamma.push_back(sum_sq[b] / (2.0 * double(count[b])));
  }
  if (out.counts.empty()) throw InputError("empirical_semivariogram: all pairs beyond max_dist");
  return out;
}

namespace {

struct LinearFit {
  double nugget, sill, sse;
};

// Weighted NNLS in (nugget, sill) for a fixed range, by active-set enumeration.
LinearFit fit_sills(const EmpiricalSemivariogram& emp, double range) {
  const std::size_t m = emp.gamma.size();
  double s_w = 0, s_g = 0, s_gg = 0, s_f = 0, s_ff = 0, s_fg = 0;
  for (std::size_t b = 0; b < m; ++b) {
    const double w = double(emp.counts[b]);
    const double f = 1.0 - std::exp(-emp.bin_centers[b] / range);
    const double g = emp.gamma[b];
    s_w += w;
    s_g += w * g;
    s_gg += w * g * g;
    s_f += w * f;
    s_ff += w * f * f;
    s_fg += w * f * g;
  }
  auto sse = [&](double c0, double c1) {
    return s_gg - 2 * c0 * s_g - 2 * c1 * s_fg + c0 * c0 * s_w + 2 * c0 * c1 * s_f + c1 * c1 * s_ff;
  };
  LinearFit best{0.0, 0.0, sse(0.0, 0.0)};
  auto consider = [&](double c0, double c1) {
    if (c0 < 0.0 || c1 < 0.0) return;
    const double v = sse(c0, c1);
    if (v < best.sse) best = {c0, c1, v};
  };
  const double det = s_w * s_ff - s_f * s_f;
  if (std::abs(det) > 1e-14 * s_w * s_ff)
    consider((s_ff * s_g - s_f * s_fg) / det, (s_w * s_fg - s_f * s_g) / det);
  consider(s_g / s_w, 0.0);
  if (s_ff > 0.0) consider(0.0, s_fg / s_ff);
  best.sse = std::max(best.sse, 0.0);
  return best;
}

}  // namespace

ExponentialVariogramFit fit_exponential(const EmpiricalSemivariogram& emp) {
  if (emp.gamma.size() < 3) throw InputError("fit_exponential: need at least 3 nonempty bins");
  const double h_min = *std::min_element(emp.bin_centers.begin(), emp.bin_centers.end());
  const double h_max = *std::max_element(emp.bin_centers.begin(), emp.bin_centers.end());
  const double lo = std::log(std::max(h_min, 1e-12) / 20.0), hi = std::log(h_max * 20.0);
  constexpr int kGrid = 200;
  int best_i = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double lr = lo + (hi - lo) * i / kGrid;
    const double v = fit_sills(emp, std::exp(lr)).sse;
    if (v < best_sse) {
      best_sse = v;
      best_i = i;
    }
  }
  double a = lo + (hi - lo) * std::max(best_i - 1, 0) / kGrid;
  double b = lo + (hi - lo) * std::min(best_i + 1, kGrid) / kGrid;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = fit_sills(emp, std::exp(c)).sse, fd = fit_sills(emp, std::exp(d)).sse;
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = fit_sills(emp, std::exp(c)).sse;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = fit_sills(emp, std::exp(d)).sse;
    }
  }
  double lr = 0.5 * (a + b);
  LinearFit lf = fit_sills(emp, std::exp(lr));
  if (best_sse < lf.sse) {
    lr = lo + (hi - lo) * best_i / kGrid;
    lf = fit_sills(emp, std::exp(lr));
  }
  if (!std::isfinite(lf.sse)) throw NumericError("fit_exponential: optimizer failed on all starts");
  ExponentialVariogramFit fit;
  fit.nugget = lf.nugget;
  fit.partial_sill = lf.sill;
  fit.range = std::exp(lr);
  fit.weighted_sse = lf.sse;
  const double scale = std::max(lf.nugget + lf.sill, 1e-300);
  fit.range_identified = lf.sill > 1e-8 * scale && best_i > 0 && best_i < kGrid;
  return fit;
}

VariogramBands bootstrap_bands(const ExponentialVariogramFit& fit, std::span<const Location> locations,
                               const EmpiricalSemivariogram& binning, std::size_t n_boot, RngSeed seed,
                               std::size_t jobs) {
  if (n_boot == 0) throw InputError("bootstrap_bands: n_boot must be positive");
  const auto n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = distance(locations[static_cast<std::size_t>(i)], locations[static_cast<std::size_t>(j)]);
      C(i, j) = fit.partial_sill * std::exp(-h / fit.range) + (i == j ? fit.nugget : 0.0);
    }
  const double scale = std::max(fit.nugget + fit.partial_sill, 1e-12);
  auto chol = jittered_cholesky(C, scale);
  if (!chol) throw NumericError("bootstrap_bands: simulation covariance is not positive definite");
  const Eigen::MatrixXd L = chol->llt.matrixL();

  const std::size_t nb = binning.gamma.size();
  std::vector<std::vector<double>> reps(n_boot);
  parallel_for(n_boot, jobs, [&](std::size_t r) {
    Rng rng = make_rng(seed, {stream::kBootstrap, r});
    std::normal_distribution<double> normal;
    Eigen::VectorXd eps(n);
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = normal(rng);
    const Eigen::VectorXd z = L * eps;
    auto emp = empirical_semivariogram(std::span<const double>(z.data(), static_cast<std::size_t>(n)),
                                       locations, binning.n_bins, binning.max_dist);
    std::vector<double> g(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      auto it = std::find(emp.bin_index.begin(), emp.bin_index.end(), binning.bin_index[b]);
      if (it != emp.bin_index.end()) g[b] = emp.gamma[static_cast<std::size_t>(it - emp.bin_index.begin())];
    }
    reps[r] = std::move(g);
  });

  VariogramBands bands;
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> col(n_boot);
    for (std::size_t r = 0; r < n_boot; ++r) col[r] = reps[r][b];
    bands.lower.push_back(quantile_type7(col, 0.025));
    bands.upper.push_back(quantile_type7(col, 0.975));
  }
  return bands;
}

std::vector<SubregionVariogram> subregion_variograms(const SpatialDataset& data, std::size_t rows,
                                                     std::size_t cols, std::size_t n_bins,
                                                     std::size_t n_boot, RngSeed seed, std::size_t jobs) {
  if (rows == 0 || cols == 0) throw InputError("subregion grid must be at least 1x1");
  const Eigen::VectorXd resid = detrend_ols(data);
  const BoundingBox box = bounding_box(data.locations());
  const double dlon = (box.max_lon - box.min_lon) / double(cols);
  const double dlat = (box.max_lat - box.min_lat) / double(rows);
  std::vector<SubregionVariogram> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      SubregionVariogram cell;
      cell.row = r;
      cell.col = c;
      cell.box = {box.min_lon + dlon * double(c), box.min_lon + dlon * double(c + 1),
                  box.min_lat + dlat * double(r), box.min_lat + dlat * double(r + 1)};
      std::vector<Location> locs;
      std::vector<double> res;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data.locations()[i];
        auto ci = std::min(static_cast<std::size_t>((s.lon - box.min_lon) / (dlon > 0 ? dlon : 1.0)), cols - 1);
        auto ri = std::min(static_cast<std::size_t>((s.lat - box.min_lat) / (dlat > 0 ? dlat : 1.0)), rows - 1);
        if (ci == c && ri == r) {
          locs.push_back(s);
          res.push_back(resid(static_cast<Eigen::Index>(i)));
        }
      }
      cell.n = locs.size();
      if (locs.size() >= 2) {
        try {
          cell.empirical = empirical_semivariogram(res, locs, n_bins);
          if (cell.empirical.gamma.size() >= 3) {
            auto fit = fit_exponential(cell.empirical);
            if (n_boot > 0)
              fit.bands = bootstrap_bands(fit, locs, cell.empirical, n_boot,
                                          derive_seed(seed, {r, c}), jobs);
            cell.fit = fit;
          }
        } catch (const InputError&) {
        }
      }
      out.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace nsgp
