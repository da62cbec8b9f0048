#include "nsgp/synth.hpp"

#include <cmath>

#include "nsgp/error.hpp"
#include "nsgp/inference.hpp"

namespace nsgp {

std::vector<Location> uniform_locations(const BoundingBox& domain, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> ux(domain.min_lon, domain.max_lon), uy(domain.min_lat, domain.max_lat);
  std::vector<Location> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    out.push_back({x, uy(rng)});
  }
  return out;
}

std::vector<Location> jittered_lattice(const BoundingBox& domain, std::size_t nx, std::size_t ny,
                                       double jitter, Rng& rng) {
  const double dx = (domain.max_lon - domain.min_lon) / double(nx);
  const double dy = (domain.max_lat - domain.min_lat) / double(ny);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<Location> out;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double ox = u(rng);
      const double oy = u(rng);
      out.push_back({domain.min_lon + (double(i) + 0.5 + ox) * dx, domain.min_lat + (double(j) + 0.5 + oy) * dy});
    }
  return out;
}

std::vector<double> simulate_field(const Partition& truth, std::span<const SegmentParams> params, double mu,
                                   std::span<const Location> locations, std::span<const SegmentFrame> frames,
                                   Rng& rng) {
  const Eigen::MatrixXd C = nonstationary_cov_matrix(truth, params, locations, frames, true);
  double scale = 0.0;
  for (const auto& p : params) scale = std::max(scale, p.sigma2 + p.tau2);
  auto chol = jittered_cholesky(C, scale);
  if (!chol) throw NumericError("simulate_field: covariance is not positive definite");
  std::normal_distribution<double> normal;
  Eigen::VectorXd eps(static_cast<Eigen::Index>(locations.size()));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
  const Eigen::VectorXd z = (chol->llt.matrixL() * eps).array() + mu;
  return std::vector<double>(z.data(), z.data() + z.size());
}

SynthResult synthesize(const SynthSpec& spec, RngSeed seed) {
  if (spec.params.size() != spec.truth.K())
    throw InputError("synth: need one parameter block per segment of the true partition");
  Rng loc_rng = make_rng(seed, {stream::kSynth, 0});
  std::vector<Location> locs;
  if (spec.lattice_cols > 0) {
    const std::size_t ny = std::max<std::size_t>(1, spec.n_obs / spec.lattice_cols);
    locs = jittered_lattice(spec.domain, spec.lattice_cols, ny, spec.lattice_jitter, loc_rng);
  } else {
    locs = uniform_locations(spec.domain, spec.n_obs, loc_rng);
  }
  // Frames from the observation locations, matching what the sampler computes.
  std::vector<double> placeholder(locs.size(), 0.0);
  const SpatialDataset layout(locs, placeholder);
  auto frames = segment_frames(spec.truth, layout);

  Rng field_rng = make_rng(seed, {stream::kSynth, 1});
  auto values = simulate_field(spec.truth, spec.params, spec.mu, locs, frames, field_rng);

  CovariateTable cov;
  cov.category_names = {"land_use", "drainage"};
  Rng cov_rng = make_rng(seed, {stream::kSynth, 2});
  std::vector<double> w;
  for (const auto& c : spec.truth.mixture.components) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  static const char* drainage[] = {"WD", "MWD", "PD", "SPD"};
  for (std::size_t i = 0; i < spec.n_covariates; ++i) {
    const std::size_t k = pick(cov_rng);
    const auto& comp = spec.truth.mixture.components[k];
    Eigen::LLT<Eigen::Matrix2d> llt(comp.cov);
    const double e0 = normal(cov_rng);
    const double e1 = normal(cov_rng);
    const Eigen::Vector2d x = comp.mean + llt.matrixL() * Eigen::Vector2d(e0, e1);
    cov.locations.push_back({x(0), x(1)});
    std::vector<std::optional<std::string>> cats;
    const double m0 = unif(cov_rng);
    const double m1 = unif(cov_rng);
    const auto d = static_cast<std::size_t>(unif(cov_rng) * 4.0) % 4;
    if (m0 < spec.missing_rate) cats.emplace_back(std::nullopt);
    else cats.emplace_back("LU" + std::to_string(k + 1));
    if (m1 < spec.missing_rate) cats.emplace_back(std::nullopt);
    else cats.emplace_back(drainage[(k + d / 3) % 4]);
    cov.categories.push_back(std::move(cats));
  }

  SynthResult out{SpatialDataset(locs, values), std::move(cov), std::move(frames), {}};
  out.labels = assign_segments(spec.truth, locs);
  return out;
}

}  // namespace nsgp
