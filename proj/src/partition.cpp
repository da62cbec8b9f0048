#include "nsgp/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "nsgp/error.hpp"
#include "nsgp/parallel.hpp"

namespace nsgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::Matrix2d clamp_eigenvalues(const Eigen::Matrix2d& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
  Eigen::Matrix2d out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

std::vector<Eigen::Vector2d> kmeanspp_seeds(const Eigen::Matrix2Xd& X, std::size_t K, Rng& rng) {
  const auto n = static_cast<std::size_t>(X.cols());
  std::vector<Eigen::Vector2d> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(X.col(static_cast<Eigen::Index>(pick(rng))));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (centers.size() < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (X.col(static_cast<Eigen::Index>(i)) - centers.back()).squaredNorm());
      total += d2[i];
    }
    std::size_t chosen = pick(rng);
    if (total > 0.0) {
      double u = unif(rng) * total, acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= u && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers.push_back(X.col(static_cast<Eigen::Index>(chosen)));
  }
  return centers;
}

ConcomitantWeights make_concomitant(const std::vector<std::vector<std::optional<std::string>>>& cats,
                                    const std::vector<std::string>& names, std::size_t K) {
  ConcomitantWeights cw;
  cw.category_names = names;
  const std::size_t ncol = cats.empty() ? 0 : cats.front().size();
  cw.levels.resize(ncol);
  for (std::size_t c = 0; c < ncol; ++c) {
    std::set<std::string> lv;
    for (const auto& row : cats)
      if (row[c]) lv.insert(*row[c]);
    cw.levels[c].assign(lv.begin(), lv.end());
  }
  Eigen::Index p = 1;
  for (const auto& lv : cw.levels) p += static_cast<Eigen::Index>(lv.size()) - 1;
  cw.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), std::max<Eigen::Index>(p, 1));
  return cw;
}

double concomitant_objective(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& design,
                             const Eigen::MatrixXd& resp) {
  const Eigen::MatrixXd eta = design * beta.transpose();  // n x K
  double q = 0.0;
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double lse = log_sum_exp(eta.row(i).transpose());
    q += (resp.row(i).array() * (eta.row(i).array() - lse)).sum();
  }
  return q;
}

// Generalized M-step for logit weights: gradient ascent with backtracking, so
// the expected complete-data log-likelihood never decreases.
void update_concomitant(Eigen::MatrixXd& beta, const Eigen::MatrixXd& design,
                        const Eigen::MatrixXd& resp) {
  const Eigen::Index K = beta.rows();
  if (K < 2) return;
  const double n = static_cast<double>(design.rows());
  double current = concomitant_objective(beta, design, resp);
  double step = 1.0;
  for (int it = 0; it < 25; ++it) {
    const Eigen::MatrixXd eta = design * beta.transpose();
    Eigen::MatrixXd pi(eta.rows(), K);
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
      const double lse = log_sum_exp(eta.row(i).transpose());
      pi.row(i) = (eta.row(i).array() - lse).exp();
    }
    Eigen::MatrixXd grad = (resp - pi).transpose() * design / n;  // K x p
    grad.row(K - 1).setZero();
    if (grad.norm() < 1e-10) return;
    bool improved = false;
    for (int bt = 0; bt < 30; ++bt) {
      Eigen::MatrixXd trial = beta + step * grad;
      const double q = concomitant_objective(trial, design, resp);
      if (q >= current) {
        improved = q > current;
        beta = trial;
        current = q;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!improved) return;
  }
}

}  // namespace

Eigen::VectorXd ConcomitantWeights::design(const std::vector<std::optional<std::string>>& cats) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(coefficients.cols());
  x(0) = 1.0;
  Eigen::Index offset = 1;
  for (std::size_t c = 0; c < levels.size(); ++c) {
    if (c < cats.size() && cats[c]) {
      auto it = std::find(levels[c].begin(), levels[c].end(), *cats[c]);
      auto idx = it - levels[c].begin();
      if (it != levels[c].end() && idx > 0) x(offset + idx - 1) = 1.0;
    }
    offset += static_cast<Eigen::Index>(levels[c].size()) - 1;
  }
  return x;
}

Eigen::VectorXd ConcomitantWeights::log_weights(const Eigen::VectorXd& x) const {
  Eigen::VectorXd eta = coefficients * x;
  return eta.array() - log_sum_exp(eta);
}

double log_normal2(const Eigen::Vector2d& x, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
  const double a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
  const double det = a * c - b * b;
  const double dx = x(0) - mean(0), dy = x(1) - mean(1);
  const double quad = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

MixtureModel run_em(std::span<const Location> points, std::size_t K, Rng& rng,
                    const EmOptions& options,
                    const std::vector<std::vector<std::optional<std::string>>>* categories,
                    const std::vector<std::string>* category_names) {
  const std::size_t n = points.size();
  if (K < 1) throw InputError("fit_mixture: K must be at least 1");
  if (n < 5 * K)
    throw InputError("fit_mixture: need at least " + std::to_string(5 * K) + " points for K=" +
                     std::to_string(K) + ", have " + std::to_string(n));
  Eigen::Matrix2Xd X(2, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) X.col(static_cast<Eigen::Index>(i)) << points[i].lon, points[i].lat;
  const double diam = std::max(bounding_box(points).diameter(), 1e-12);
  const double floor = options.floor_fraction * diam * diam;
  const auto Kx = static_cast<Eigen::Index>(K);
  const auto nx = static_cast<Eigen::Index>(n);

  MixtureModel model;
  const bool use_concomitant = categories != nullptr && K > 1;
  Eigen::MatrixXd design;
  if (use_concomitant) {
    model.concomitant = make_concomitant(*categories, category_names ? *category_names
                                                                     : std::vector<std::string>{},
                                         K);
    design.resize(nx, model.concomitant->coefficients.cols());
    for (std::size_t i = 0; i < n; ++i)
      design.row(static_cast<Eigen::Index>(i)) = model.concomitant->design((*categories)[i]).transpose();
  }

  const Eigen::Vector2d overall_mean = X.rowwise().mean();
  const Eigen::Matrix2Xd centered = X.colwise() - overall_mean;
  const Eigen::Matrix2d overall_cov = clamp_eigenvalues(centered * centered.transpose() / double(n), floor);
  for (const auto& c : kmeanspp_seeds(X, K, rng))
    model.components.push_back({c, overall_cov, 1.0 / double(K)});

  Eigen::MatrixXd logp(nx, Kx), resp(nx, Kx);
  auto e_step = [&]() {
    Eigen::MatrixXd logw;
    if (use_concomitant) {
      const Eigen::MatrixXd eta = design * model.concomitant->coefficients.transpose();
      logw.resize(nx, Kx);
      for (Eigen::Index i = 0; i < nx; ++i)
        logw.row(i) = eta.row(i).array() - log_sum_exp(eta.row(i).transpose());
    }
    double ll = 0.0;
    for (Eigen::Index i = 0; i < nx; ++i) {
      for (Eigen::Index k = 0; k < Kx; ++k) {
        const auto& comp = model.components[static_cast<std::size_t>(k)];
        const double lw = use_concomitant ? logw(i, k) : std::log(comp.weight);
        logp(i, k) = lw + log_normal2(X.col(i), comp.mean, comp.cov);
      }
      const double lse = log_sum_exp(logp.row(i).transpose());
      resp.row(i) = (logp.row(i).array() - lse).exp();
      ll += lse;
    }
    return ll;
  };

  double ll = e_step();
  model.loglik_trace.push_back(ll);
  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    const Eigen::VectorXd Nk = resp.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < Kx; ++k) {
      if (!(Nk(k) >= 1.0)) throw NumericError("EM: component collapsed (effective size < 1)");
      auto& comp = model.components[static_cast<std::size_t>(k)];
      comp.mean = X * resp.col(k) / Nk(k);
      const Eigen::Matrix2Xd d = X.colwise() - comp.mean;
      comp.cov = clamp_eigenvalues(d * resp.col(k).asDiagonal() * d.transpose() / Nk(k), floor);
      comp.weight = Nk(k) / double(n);
    }
    if (use_concomitant) {
      update_concomitant(model.concomitant->coefficients, design, resp);
      const Eigen::MatrixXd eta = design * model.concomitant->coefficients.transpose();
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(Kx);
      for (Eigen::Index i = 0; i < nx; ++i)
        avg += (eta.row(i).array() - log_sum_exp(eta.row(i).transpose())).exp().matrix().transpose();
      avg /= double(n);
      for (Eigen::Index k = 0; k < Kx; ++k) model.components[static_cast<std::size_t>(k)].weight = avg(k);
    }
    const double next = e_step();
    if (!std::isfinite(next)) throw NumericError("EM: non-finite log-likelihood");
    model.loglik_trace.push_back(next);
    model.em_iterations = iter;
    const double change = std::abs(next - ll);
    ll = next;
    if (change < options.tol * std::max(std::abs(ll), 1e-300)) {
      model.converged = true;
      break;
    }
  }
  model.log_likelihood = ll;
  double wsum = 0.0;
  for (const auto& c : model.components) wsum += c.weight;
  for (auto& c : model.components) c.weight /= wsum;
  return model;
}

MixtureModel fit_mixture(std::span<const Location> points, std::size_t K, RngSeed seed,
                         const EmOptions& options) {
  if (points.size() < 5 * K)
    throw InputError("fit_mixture: too few points (" + std::to_string(points.size()) + ") for K=" +
                     std::to_string(K));
  std::optional<MixtureModel> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    Rng rng = make_rng(seed, {stream::kMixture, K, r});
    try {
      MixtureModel m = run_em(points, K, rng, options);
      const bool better = !best || (m.converged && !best->converged) ||
                          (m.converged == best->converged && m.log_likelihood > best->log_likelihood);
      if (better) best = std::move(m);
    } catch (const NumericError&) {
    }
  }
  if (!best) throw NumericError("fit_mixture: all restarts degenerate for K=" + std::to_string(K));
  return *best;
}

Eigen::VectorXd component_log_densities(const MixtureModel& model, const Location& s) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(model.K()));
  const Eigen::Vector2d x(s.lon, s.lat);
  for (std::size_t k = 0; k < model.K(); ++k)
    out(static_cast<Eigen::Index>(k)) = log_normal2(x, model.components[k].mean, model.components[k].cov);
  return out;
}

std::size_t assign_segment(const Partition& partition, const Location& s) {
  Eigen::VectorXd score = component_log_densities(partition.mixture, s);
  if (partition.weighted_assignment)
    for (std::size_t k = 0; k < partition.K(); ++k)
      score(static_cast<Eigen::Index>(k)) += std::log(partition.mixture.components[k].weight);
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < score.size(); ++k)
    if (score(k) > score(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(k);
  return best;
}

std::vector<std::size_t> assign_segments(const Partition& partition,
                                         std::span<const Location> locations) {
  std::vector<std::size_t> out;
  out.reserve(locations.size());
  for (const auto& s : locations) out.push_back(assign_segment(partition, s));
  return out;
}

bool same_mode(const MixtureModel& a, const MixtureModel& b, double diameter) {
  if (a.K() != b.K()) return false;
  if (std::abs(a.log_likelihood - b.log_likelihood) > 1e-8 * std::max(1.0, std::abs(a.log_likelihood)))
    return false;
  std::vector<bool> used(b.K(), false);
  for (const auto& ca : a.components) {
    std::size_t best = b.K();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < b.K(); ++k) {
      if (used[k]) continue;
      const double d = (ca.mean - b.components[k].mean).norm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best == b.K() || best_d > 1e-3 * diameter ||
        std::abs(ca.weight - b.components[best].weight) > 1e-3)
      return false;
    used[best] = true;
  }
  return true;
}

PartitionSet generate_candidates(const CovariateTable& covariates, RngSeed seed,
                                 const CandidateOptions& options) {
  const auto complete = covariates.complete_cases();
  if (complete.empty()) throw InputError("generate_candidates: no complete-case covariate locations");
  std::vector<Location> points;
  std::vector<std::vector<std::optional<std::string>>> cats;
  for (std::size_t i : complete) {
    points.push_back(covariates.locations[i]);
    cats.push_back(covariates.categories[i]);
  }
  const double diam = bounding_box(points).diameter();
  const std::size_t restarts = std::max<std::size_t>(options.em.restarts, 1);

  struct Task {
    std::size_t K, restart;
  };
  std::vector<Task> tasks;
  for (std::size_t K : options.K_values)
    for (std::size_t r = 0; r < restarts; ++r) tasks.push_back({K, r});
  std::vector<std::optional<MixtureModel>> fits(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t t) {
    Rng rng = make_rng(seed, {stream::kMixture, tasks[t].K, tasks[t].restart});
    try {
      MixtureModel m = options.concomitant
                           ? run_em(points, tasks[t].K, rng, options.em, &cats, &covariates.category_names)
                           : run_em(points, tasks[t].K, rng, options.em);
      if (m.converged) fits[t] = std::move(m);
    } catch (const NumericError&) {
    }
  });

  // Distinct converged modes per K, best first.
  std::vector<std::vector<MixtureModel>> by_K;
  for (std::size_t K : options.K_values) {
    std::vector<MixtureModel> modes;
    for (std::size_t t = 0; t < tasks.size(); ++t)
      if (tasks[t].K == K && fits[t]) modes.push_back(*fits[t]);
    std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) {
      return a.log_likelihood > b.log_likelihood;
    });
    std::vector<MixtureModel> distinct;
    for (auto& m : modes) {
      bool dup = std::any_of(distinct.begin(), distinct.end(),
                             [&](const auto& d) { return same_mode(d, m, diam); });
      if (!dup) distinct.push_back(std::move(m));
    }
    by_K.push_back(std::move(distinct));
  }

  std::vector<MixtureModel> selected;
  std::vector<const MixtureModel*> extras;
  for (auto& modes : by_K) {
    if (modes.empty()) continue;
    if (selected.size() < options.max_keep) selected.push_back(modes.front());
    for (std::size_t i = 1; i < modes.size(); ++i) extras.push_back(&modes[i]);
  }
  std::stable_sort(extras.begin(), extras.end(),
                   [](const auto* a, const auto* b) { return a->log_likelihood > b->log_likelihood; });
  for (const auto* m : extras) {
    if (selected.size() >= options.max_keep) break;
    selected.push_back(*m);
  }
  if (selected.empty()) throw NumericError("generate_candidates: no converged mixture for any K");

  PartitionSet set;
  for (std::size_t j = 0; j < selected.size(); ++j)
    set.partitions.push_back({j + 1, std::move(selected[j]), options.weighted_assignment});
  return set;
}

}  // namespace nsgp
