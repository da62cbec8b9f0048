#include "nsgp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "nsgp/error.hpp"
#include "nsgp/parallel.hpp"

namespace nsgp {

std::string holdout_name(HoldoutKind kind) {
  switch (kind) {
    case HoldoutKind::KFold: return "kfold";
    case HoldoutKind::Block: return "block";
    case HoldoutKind::Circular: return "circular";
  }
  return "?";
}

HoldoutScheme make_kfold(std::size_t n, std::size_t k, RngSeed seed) {
  if (k == 0 || k > n) throw InputError("make_kfold: need 1 <= k <= n");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, {stream::kHoldout, 0});
  std::shuffle(perm.begin(), perm.end(), rng);
  HoldoutScheme s;
  s.kind = HoldoutKind::KFold;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t begin = f * n / k, end = (f + 1) * n / k;
    std::vector<std::size_t> fold(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                  perm.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(fold.begin(), fold.end());
    s.folds.push_back(std::move(fold));
  }
  return s;
}

HoldoutScheme make_block_holdouts(std::span<const Location> locations, double dlon, double dlat,
                                  std::size_t min_size) {
  if (!(dlon > 0.0) || !(dlat > 0.0)) throw InputError("make_block_holdouts: cell sizes must be positive");
  const BoundingBox box = bounding_box(locations);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> cells;  // (row, col)
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto col = static_cast<std::size_t>(std::floor((locations[i].lon - box.min_lon) / dlon));
    const auto row = static_cast<std::size_t>(std::floor((locations[i].lat - box.min_lat) / dlat));
    cells[{row, col}].push_back(i);
  }
  HoldoutScheme s;
  s.kind = HoldoutKind::Block;
  for (auto& [key, idx] : cells)
    if (idx.size() >= min_size) s.folds.push_back(idx);
  if (s.folds.empty()) throw InputError("make_block_holdouts: no cell has at least min_size points");
  return s;
}

HoldoutScheme make_circular_holdouts(std::span<const Location> locations, std::size_t m_neighbors,
                                     std::size_t n_sets, RngSeed seed) {
  const std::size_t n = locations.size();
  if (m_neighbors + 1 > n) throw InputError("make_circular_holdouts: m_neighbors + 1 exceeds n");
  if (n_sets > n) throw InputError("make_circular_holdouts: more sets than distinct centers");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, {stream::kHoldout, 1});
  std::shuffle(perm.begin(), perm.end(), rng);
  HoldoutScheme s;
  s.kind = HoldoutKind::Circular;
  for (std::size_t f = 0; f < n_sets; ++f) {
    const std::size_t c = perm[f];
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < n; ++i)
      if (i != c) others.push_back(i);
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      return distance(locations[a], locations[c]) < distance(locations[b], locations[c]);
    });
    std::vector<std::size_t> fold{c};
    fold.insert(fold.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(m_neighbors));
    std::sort(fold.begin(), fold.end());
    s.folds.push_back(std::move(fold));
  }
  return s;
}

double crps_ecdf(std::span<const double> samples, double obs) {
  if (samples.empty()) throw InputError("crps_ecdf: no samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double T = double(x.size());
  double abs_err = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    abs_err += std::abs(x[i] - obs);
    // sum_{t,s} |x_t - x_s| = 2 sum_i (2i - T - 1) x_(i), 1-based i
    spread += (2.0 * double(i + 1) - T - 1.0) * x[i];
  }
  return std::max(0.0, abs_err / T - spread / (T * T));
}

SchemeScore score_scheme(const HoldoutScheme& scheme, const SpatialDataset& data,
                         const Predictor& predictor, std::size_t jobs) {
  SchemeScore out;
  out.kind = scheme.kind;
  out.folds.resize(scheme.folds.size());
  parallel_for(scheme.folds.size(), jobs, [&](std::size_t f) {
    FoldScore& fs = out.folds[f];
    fs.fold = f;
    try {
      const auto& test = scheme.folds[f];
      std::vector<bool> held(data.size(), false);
      for (std::size_t i : test) held[i] = true;
      std::vector<std::size_t> train_idx;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (!held[i]) train_idx.push_back(i);
      if (train_idx.empty()) throw InputError("fold leaves no training data");
      const SpatialDataset train = data.subset(train_idx);
      std::vector<Location> test_locs;
      for (std::size_t i : test) test_locs.push_back(data.locations()[i]);
      const PredictiveDraws pd = predictor(train, test_locs, f);
      if (scheme.kind == HoldoutKind::KFold) {
        double total = 0.0;
        for (std::size_t c = 0; c < test.size(); ++c) {
          const Eigen::VectorXd col = pd.draws.col(static_cast<Eigen::Index>(c));
          total += crps_ecdf(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                             data.values()[test[c]]);
        }
        fs.crps = total / double(test.size());
      } else {
        const Eigen::VectorXd avg = spatial_average_draws(pd);
        double observed = 0.0;
        for (std::size_t i : test) observed += data.values()[i];
        observed /= double(test.size());
        fs.crps = crps_ecdf(std::span<const double>(avg.data(), static_cast<std::size_t>(avg.size())), observed);
      }
    } catch (const std::exception& e) {
      fs.ok = false;
      fs.error = e.what();
    }
  });
  double total = 0.0;
  std::size_t ok = 0;
  for (const auto& fs : out.folds) {
    if (fs.ok) {
      total += fs.crps;
      ++ok;
    } else {
      ++out.failed;
    }
  }
  out.mean = ok > 0 ? total / double(ok) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

PartitionWeights weights_from_draws(std::span<const PosteriorDraws> draws, std::size_t n_obs,
                                    const std::string& method, const EvidenceOptions& options) {
  std::vector<double> log_ml;
  for (const auto& d : draws) {
    if (method == "HM") {
      log_ml.push_back(harmonic_mean_logml(d.loglik));
    } else if (method == "AICM") {
      log_ml.push_back(aicm_logml(d.loglik, options.divisor));
    } else if (method == "BICM") {
      log_ml.push_back(bicm_logml(d.loglik, double(n_obs), options.divisor));
    } else if (method.size() == 3 && method.rfind("IS", 0) == 0 && method[2] >= '1' && method[2] <= '9') {
      const double delta = double(method[2] - '0') / 10.0;
      log_ml.push_back(newton_raftery_logml(d.loglik, delta, options.newton_raftery).value);
    } else {
      throw InputError("unknown evidence method '" + method + "'");
    }
  }
  return partition_posterior(log_ml, method);
}

std::vector<PosteriorDraws> fit_partitions(const SpatialDataset& train, const PartitionSet& partitions,
                                           const ChainConfig& chain, std::size_t jobs) {
  std::vector<PosteriorDraws> out(partitions.partitions.size());
  parallel_for(out.size(), jobs, [&](std::size_t j) {
    out[j] = run_chain(train, partitions.partitions[j], chain);
  });
  return out;
}

Predictor bma_predictor(const ModelSpec& spec, RngSeed seed, HoldoutKind kind) {
  return [&spec, seed, kind](const SpatialDataset& train, std::span<const Location> test,
                             std::size_t fold) -> PredictiveDraws {
    const RngSeed fold_seed = derive_seed(seed, {stream::kEvaluate, static_cast<std::uint64_t>(kind), fold});
    PartitionSet parts = spec.partitions;
    if (spec.strict) {
      if (spec.covariates == nullptr) throw InputError("strict evaluation needs covariates");
      // Drop covariate records coinciding with held-out observation locations.
      CovariateTable cov = *spec.covariates;
      CovariateTable kept;
      kept.category_names = cov.category_names;
      for (std::size_t i = 0; i < cov.locations.size(); ++i) {
        const bool is_test = std::any_of(test.begin(), test.end(),
                                         [&](const Location& s) { return s == cov.locations[i]; });
        if (is_test) continue;
        kept.locations.push_back(cov.locations[i]);
        kept.categories.push_back(cov.categories[i]);
      }
      auto opts = spec.candidates;
      opts.jobs = 1;
      parts = generate_candidates(kept, fold_seed, opts);
    }
    ChainConfig chain = spec.chain;
    chain.seed = fold_seed;
    const auto draws = fit_partitions(train, parts, chain, 1);
    const auto weights = weights_from_draws(draws, train.size(), spec.weight_method);
    PredictionRequest req;
    req.locations.assign(test.begin(), test.end());
    req.n_draws = spec.n_draws;
    req.include_nugget = spec.include_nugget;
    req.seed = fold_seed;
    return sample_predictive(weights, parts.partitions, draws, train, req);
  };
}

SchemeScore evaluate_model(const HoldoutScheme& scheme, const SpatialDataset& data, const ModelSpec& spec,
                           RngSeed seed, std::size_t jobs) {
  return score_scheme(scheme, data, bma_predictor(spec, seed, scheme.kind), jobs);
}

}  // namespace nsgp
