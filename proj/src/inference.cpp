#include "nsgp/inference.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "nsgp/error.hpp"

namespace nsgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kBlockDim = 5;

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

std::array<double, kBlockDim> upper_bounds(const PriorBounds& b) {
  return {b.tau2_max, b.sigma2_max, b.phi_max, b.phi_max, b.eta_max};
}

// Block coordinates live on the logit scale of each uniform prior's support.
Eigen::Matrix<double, kBlockDim, 1> to_unconstrained(const SegmentParams& p, const PriorBounds& b) {
  const auto ub = upper_bounds(b);
  const std::array<double, kBlockDim> v{p.tau2, p.sigma2, p.phi1, p.phi2, p.eta};
  Eigen::Matrix<double, kBlockDim, 1> u;
  for (int i = 0; i < kBlockDim; ++i) {
    const double frac = std::clamp(v[static_cast<std::size_t>(i)] / ub[static_cast<std::size_t>(i)], 1e-12, 1.0 - 1e-12);
    u(i) = logit(frac);
  }
  return u;
}

SegmentParams from_unconstrained(const Eigen::Matrix<double, kBlockDim, 1>& u, const PriorBounds& b,
                                 double nu) {
  const auto ub = upper_bounds(b);
  SegmentParams p;
  p.tau2 = ub[0] * sigmoid(u(0));
  p.sigma2 = ub[1] * sigmoid(u(1));
  p.phi1 = ub[2] * sigmoid(u(2));
  p.phi2 = ub[3] * sigmoid(u(3));
  p.eta = ub[4] * sigmoid(u(4));
  p.nu = nu;
  return p;
}

// log |d theta / d u| up to the constant sum of log upper bounds.
double log_jacobian(const Eigen::Matrix<double, kBlockDim, 1>& u) {
  double s = 0.0;
  for (int i = 0; i < kBlockDim; ++i) s -= softplus(u(i)) + softplus(-u(i));
  return s;
}

double log_normal_mu(double mu, double sd) {
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * (mu / sd) * (mu / sd);
}

}  // namespace

void ChainConfig::validate() const {
  if (n_iter == 0) throw InputError("chain: n_iter must be positive");
  if (burn_in >= n_iter) throw InputError("chain: burn_in must be smaller than n_iter");
  if (thin == 0) throw InputError("chain: thin must be at least 1");
  if (adapt_window == 0) throw InputError("chain: adapt_window must be positive");
  if (!(nu > 0.0)) throw InputError("chain: nu must be positive");
}

std::vector<SegmentFrame> segment_frames(const Partition& partition, const SpatialDataset& train,
                                         std::span<const Location> extra) {
  const std::size_t K = partition.K();
  std::vector<std::vector<Location>> members(K);
  for (const auto& s : train.locations()) members[assign_segment(partition, s)].push_back(s);
  std::vector<bool> has_train(K);
  for (std::size_t k = 0; k < K; ++k) has_train[k] = !members[k].empty();
  for (const auto& s : extra) members[assign_segment(partition, s)].push_back(s);

  std::vector<SegmentFrame> frames(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto& f = frames[k];
    f.prior_only = !has_train[k];
    if (members[k].empty()) continue;
    const BoundingBox box = bounding_box(members[k]);
    f.shift = Eigen::Vector2d(box.min_lon, box.min_lat);
    const double ex = box.max_lon - box.min_lon, ey = box.max_lat - box.min_lat;
    f.scale = Eigen::Vector2d(ex > 0 ? 1.0 / ex : 1.0, ey > 0 ? 1.0 / ey : 1.0);
    f.degenerate = !(ex > 0) || !(ey > 0);
  }
  return frames;
}

std::vector<SegmentData> split_by_segment(const SpatialDataset& data, const Partition& partition,
                                          std::span<const SegmentFrame> frames) {
  const std::size_t K = partition.K();
  if (frames.size() != K) throw InputError("split_by_segment: need one frame per segment");
  std::vector<SegmentData> segs(K);
  for (std::size_t i = 0; i < data.size(); ++i)
    segs[assign_segment(partition, data.locations()[i])].indices.push_back(i);
  for (std::size_t k = 0; k < K; ++k) {
    auto& seg = segs[k];
    const auto m = static_cast<Eigen::Index>(seg.indices.size());
    seg.coords.resize(2, m);
    seg.z.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const std::size_t i = seg.indices[static_cast<std::size_t>(r)];
      seg.coords.col(r) = frames[k].apply(data.locations()[i]);
      seg.z(r) = data.values()[i];
    }
  }
  return segs;
}

std::optional<JitteredCholesky> factor_segment(const SegmentParams& params, const SegmentData& seg) {
  const Eigen::MatrixXd C = segment_cov_matrix(params, seg.coords, true);
  return jittered_cholesky(C, params.sigma2 + params.tau2);
}

double segment_log_likelihood(const JitteredCholesky& factor, const SegmentData& seg, double mu) {
  if (seg.z.size() == 0) return 0.0;
  Eigen::VectorXd r = seg.z.array() - mu;
  factor.llt.matrixL().solveInPlace(r);
  return -0.5 * factor.log_det() - 0.5 * r.squaredNorm() - 0.5 * double(seg.z.size()) * kLog2Pi;
}

double log_likelihood(std::span<const SegmentData> segments, const ModelState& state) {
  if (state.segments.size() != segments.size())
    throw InputError("log_likelihood: state has wrong number of segment blocks");
  double total = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (segments[k].z.size() == 0) continue;
    auto f = factor_segment(state.segments[k], segments[k]);
    if (!f) return kNegInf;
    total += segment_log_likelihood(*f, segments[k], state.mu);
  }
  return total;
}

double log_likelihood(const SpatialDataset& data, const Partition& partition, const ModelState& state,
                      std::span<const SegmentFrame> frames) {
  const auto segs = split_by_segment(data, partition, frames);
  return log_likelihood(segs, state);
}

bool in_support(const SegmentParams& p, const PriorBounds& b) {
  return p.tau2 >= 0.0 && p.tau2 < b.tau2_max && p.sigma2 > 0.0 && p.sigma2 < b.sigma2_max &&
         p.phi1 > 0.0 && p.phi1 < b.phi_max && p.phi2 > 0.0 && p.phi2 < b.phi_max && p.eta >= 0.0 &&
         p.eta <= b.eta_max;
}

double log_prior(const ModelState& state, const PriorBounds& b) {
  if (!std::isfinite(state.mu)) return kNegInf;
  double lp = log_normal_mu(state.mu, b.mu_sd);
  const double per_segment = -std::log(b.tau2_max) - std::log(b.sigma2_max) - 2.0 * std::log(b.phi_max) -
                             std::log(b.eta_max);
  for (const auto& p : state.segments) {
    if (!in_support(p, b)) return kNegInf;
    lp += per_segment;
  }
  return lp;
}

ModelState initial_state(const SpatialDataset& data, std::size_t K, double nu) {
  const auto& z = data.values();
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= double(z.size());
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var = z.size() > 1 ? var / double(z.size() - 1) : 1.0;
  if (!(var > 0.0)) var = 1.0;
  const double half = std::clamp(0.5 * var, 1e-3, 99.0);
  ModelState s;
  s.mu = mean;
  s.segments.assign(K, SegmentParams{half, half, 0.25, 0.25, std::numbers::pi / 4.0, nu});
  return s;
}

PosteriorDraws run_chain(const SpatialDataset& data, const Partition& partition,
                         const ChainConfig& config, std::span<const SegmentFrame> frames_in) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t K = partition.K();
  const PriorBounds& bounds = config.prior;

  PosteriorDraws out;
  out.partition_id = partition.id;
  out.frames = frames_in.empty() ? segment_frames(partition, data)
                                 : std::vector<SegmentFrame>(frames_in.begin(), frames_in.end());
  const auto segs = split_by_segment(data, partition, out.frames);
  for (std::size_t k = 0; k < K; ++k) {
    out.diagnostics.segment_sizes.push_back(segs[k].indices.size());
    if (segs[k].indices.empty())
      out.diagnostics.flags.push_back("segment " + std::to_string(k + 1) + " has no training data (prior only)");
    else if (segs[k].indices.size() < 5)
      out.diagnostics.flags.push_back("segment " + std::to_string(k + 1) + " has fewer than 5 observations");
  }

  Rng rng = make_rng(config.seed, {stream::kChain, partition.id});
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ModelState state = initial_state(data, K, config.nu);
  std::vector<std::optional<JitteredCholesky>> factors(K);
  std::vector<double> terms(K, 0.0);
  auto refresh = [&](std::size_t k) {
    factors[k].reset();
    terms[k] = 0.0;
    if (segs[k].z.size() == 0) return true;
    factors[k] = factor_segment(state.segments[k], segs[k]);
    if (!factors[k]) return false;
    terms[k] = segment_log_likelihood(*factors[k], segs[k], state.mu);
    return std::isfinite(terms[k]);
  };
  auto total = [&] {
    double t = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      if (segs[k].z.size() != 0) t += terms[k];
    return t;
  };

  bool ok = false;
  for (std::size_t attempt = 0; attempt < config.max_init_attempts && !ok; ++attempt) {
    ok = true;
    for (std::size_t k = 0; k < K && ok; ++k) ok = refresh(k);
    if (!ok) {
      for (auto& p : state.segments) {
        p.tau2 = std::min(p.tau2 * 2.0 + 1e-3, 0.9 * bounds.tau2_max);
        p.phi1 = 0.05 + 0.2 * unif(rng);
        p.phi2 = 0.05 + 0.2 * unif(rng);
      }
    }
  }
  if (!ok) throw NumericError("run_chain: non-finite initial likelihood after re-initialization");
  double loglik = total();

  // mu sampler state
  double mu_log_scale = std::log(0.1 * std::sqrt(std::max(state.segments[0].sigma2 + state.segments[0].tau2, 1e-6)));
  std::size_t mu_accept_window = 0, mu_accept_post = 0;

  // block sampler state
  using Vec5 = Eigen::Matrix<double, kBlockDim, 1>;
  using Mat5 = Eigen::Matrix<double, kBlockDim, kBlockDim>;
  std::vector<Vec5> u(K);
  std::vector<Mat5> prop_cov(K, Mat5::Identity());
  std::vector<Mat5> prop_chol(K, Mat5::Identity());
  std::vector<double> log_scale(K, std::log(0.3));
  std::vector<std::size_t> accept_window(K, 0), accept_post(K, 0);
  std::vector<std::vector<Vec5>> window_history(K);
  for (std::size_t k = 0; k < K; ++k) {
    u[k] = to_unconstrained(state.segments[k], bounds);
    state.segments[k] = from_unconstrained(u[k], bounds, config.nu);
    if (!refresh(k)) throw NumericError("run_chain: initial state outside the valid region");
  }
  loglik = total();
  std::size_t times_adapted = 0;

  const std::size_t n_keep = (config.n_iter - config.burn_in + config.thin - 1) / config.thin;
  out.states.reserve(n_keep);
  out.loglik.reserve(n_keep);
  out.scale_trace.resize(static_cast<Eigen::Index>(n_keep), static_cast<Eigen::Index>(K + 1));

  for (std::size_t it = 0; it < config.n_iter; ++it) {
    // mu: univariate random-walk Metropolis
    {
      const double proposal = state.mu + std::exp(mu_log_scale) * normal(rng);
      double cand = 0.0;
      std::vector<double> cand_terms(K, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        if (segs[k].z.size() == 0) continue;
        cand_terms[k] = segment_log_likelihood(*factors[k], segs[k], proposal);
        cand += cand_terms[k];
      }
      const double log_ratio = cand + log_normal_mu(proposal, bounds.mu_sd) - loglik -
                               log_normal_mu(state.mu, bounds.mu_sd);
      if (std::isfinite(cand) && std::log(unif(rng)) < log_ratio) {
        state.mu = proposal;
        terms = cand_terms;
        loglik = total();
        ++mu_accept_window;
        if (it >= config.burn_in) ++mu_accept_post;
      }
    }
    // segment blocks
    for (std::size_t k = 0; k < K; ++k) {
      Vec5 eps;
      for (int i = 0; i < kBlockDim; ++i) eps(i) = normal(rng);
      const Vec5 cand_u = u[k] + std::exp(log_scale[k]) * (prop_chol[k] * eps);
      const SegmentParams cand_p = from_unconstrained(cand_u, bounds, config.nu);
      double cand_term = 0.0;
      std::optional<JitteredCholesky> cand_factor;
      bool valid = in_support(cand_p, bounds);
      if (valid && segs[k].z.size() != 0) {
        cand_factor = factor_segment(cand_p, segs[k]);
        valid = cand_factor.has_value();
        if (valid) cand_term = segment_log_likelihood(*cand_factor, segs[k], state.mu);
        valid = valid && std::isfinite(cand_term);
      }
      if (valid) {
        const double log_ratio = (cand_term - terms[k]) + log_jacobian(cand_u) - log_jacobian(u[k]);
        if (std::log(unif(rng)) < log_ratio) {
          u[k] = cand_u;
          state.segments[k] = cand_p;
          factors[k] = std::move(cand_factor);
          terms[k] = cand_term;
          loglik = total();
          ++accept_window[k];
          if (it >= config.burn_in) ++accept_post[k];
        }
      }
      if (it < config.burn_in) window_history[k].push_back(u[k]);
    }

    // Adaptation during burn-in only.
    if (it < config.burn_in && (it + 1) % config.adapt_window == 0) {
      ++times_adapted;
      const double gamma1 = 1.0 / std::pow(double(times_adapted) + 3.0, 0.8);
      const double w = double(config.adapt_window);
      const double mu_rate = double(mu_accept_window) / w;
      mu_log_scale += 10.0 * gamma1 * (mu_rate - config.target_accept_scalar);
      if (mu_accept_window == 0) ++out.diagnostics.zero_acceptance_windows;
      mu_accept_window = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const double rate = double(accept_window[k]) / w;
        if (accept_window[k] == 0) ++out.diagnostics.zero_acceptance_windows;
        log_scale[k] += 10.0 * gamma1 * (rate - config.target_accept_block);
        const auto& hist = window_history[k];
        if (accept_window[k] > 0 && hist.size() > 1) {
          Vec5 mean = Vec5::Zero();
          for (const auto& h : hist) mean += h;
          mean /= double(hist.size());
          Mat5 emp = Mat5::Zero();
          for (const auto& h : hist) emp += (h - mean) * (h - mean).transpose();
          emp /= double(hist.size() - 1);
          prop_cov[k] += gamma1 * (emp - prop_cov[k]);
          Eigen::LLT<Mat5> llt(prop_cov[k] + 1e-10 * Mat5::Identity());
          if (llt.info() == Eigen::Success) prop_chol[k] = llt.matrixL();
        }
        window_history[k].clear();
        accept_window[k] = 0;
      }
    }
    if (it + 1 == config.burn_in) {
      for (auto& h : window_history) h.clear();
    }

    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
      const auto row = static_cast<Eigen::Index>(out.states.size());
      out.states.push_back(state);
      out.loglik.push_back(loglik);
      out.scale_trace(row, 0) = std::exp(mu_log_scale);
      for (std::size_t k = 0; k < K; ++k)
        out.scale_trace(row, static_cast<Eigen::Index>(k + 1)) = std::exp(log_scale[k]);
    }
  }

  const double post = double(config.n_iter - config.burn_in);
  out.diagnostics.acceptance.push_back(double(mu_accept_post) / post);
  for (std::size_t k = 0; k < K; ++k) out.diagnostics.acceptance.push_back(double(accept_post[k]) / post);
  if (out.diagnostics.zero_acceptance_windows > 0)
    out.diagnostics.flags.push_back(std::to_string(out.diagnostics.zero_acceptance_windows) +
                                    " adaptation window(s) with no accepted proposal");
  out.diagnostics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace nsgp
