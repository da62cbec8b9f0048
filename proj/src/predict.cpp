#include "nsgp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nsgp/error.hpp"
#include "nsgp/parallel.hpp"

namespace nsgp {
namespace {

struct SegmentBlock {
  std::vector<std::size_t> rows;  // prediction indices in this segment
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // full block, or a single column of variances when diag_only
};

std::vector<SegmentBlock> segment_blocks(const ModelState& state, std::span<const SegmentFrame> frames,
                                         std::span<const SegmentData> train_segs,
                                         const std::vector<std::size_t>& pred_segment,
                                         std::span<const Location> pred, bool include_nugget,
                                         bool diag_only) {
  const std::size_t K = state.segments.size();
  std::vector<SegmentBlock> blocks(K);
  for (std::size_t i = 0; i < pred.size(); ++i) blocks[pred_segment[i]].rows.push_back(i);
  for (std::size_t k = 0; k < K; ++k) {
    auto& b = blocks[k];
    if (b.rows.empty()) continue;
    const auto& p = state.segments[k];
    const auto m = static_cast<Eigen::Index>(b.rows.size());
    Eigen::Matrix2Xd pc(2, m);
    for (Eigen::Index r = 0; r < m; ++r) pc.col(r) = frames[k].apply(pred[b.rows[static_cast<std::size_t>(r)]]);
    const double nugget = include_nugget ? p.tau2 : 0.0;

    b.mean = Eigen::VectorXd::Constant(m, state.mu);
    if (diag_only)
      b.cov = Eigen::VectorXd::Constant(m, p.sigma2 + nugget);
    else {
      b.cov = segment_cov_matrix(p, pc, false);
      b.cov.diagonal().array() += nugget;
    }
    const auto& seg = train_segs[k];
    if (seg.z.size() == 0) continue;  // prior-only segment: unconditional moments

    auto factor = factor_segment(p, seg);
    if (!factor) throw NumericError("conditional_moments: training covariance factorization failed");
    const Eigen::MatrixXd cross = segment_cross_cov(p, seg.coords, pc);  // n_k x m
    Eigen::VectorXd resid = seg.z.array() - state.mu;
    Eigen::VectorXd alpha = factor->llt.solve(resid);
    b.mean += cross.transpose() * alpha;
    Eigen::MatrixXd W = cross;
    factor->llt.matrixL().solveInPlace(W);  // L^{-1} cross
    if (diag_only)
      b.cov -= W.colwise().squaredNorm().transpose();
    else
      b.cov.noalias() -= W.transpose() * W;
  }
  return blocks;
}

// Square root of a positive semidefinite matrix: plain Cholesky, else pivoted
// LDL^T with negative pivots (rounding noise) clamped to zero.
Eigen::MatrixXd psd_root(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("sample_predictive: conditional covariance is not positive semidefinite");
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd root = ldlt.matrixL();
  root = root * d.asDiagonal();
  return ldlt.transpositionsP().transpose() * root;
}

}  // namespace

ConditionalMoments conditional_moments(const ModelState& state, const Partition& partition,
                                       std::span<const SegmentFrame> frames, const SpatialDataset& train,
                                       std::span<const Location> pred, bool include_nugget) {
  const auto segs = split_by_segment(train, partition, frames);
  ConditionalMoments out;
  out.segment = assign_segments(partition, pred);
  const auto blocks = segment_blocks(state, frames, segs, out.segment, pred, include_nugget, false);
  const auto m = static_cast<Eigen::Index>(pred.size());
  out.mean = Eigen::VectorXd::Zero(m);
  out.cov = Eigen::MatrixXd::Zero(m, m);
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(b.rows[r]);
      out.mean(i) = b.mean(static_cast<Eigen::Index>(r));
      for (std::size_t c = 0; c < b.rows.size(); ++c)
        out.cov(i, static_cast<Eigen::Index>(b.rows[c])) =
            b.cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

PredictiveDraws sample_predictive(const PartitionWeights& weights, std::span<const Partition> partitions,
                                  std::span<const PosteriorDraws> draws, const SpatialDataset& train,
                                  const PredictionRequest& request) {
  const std::size_t P = partitions.size();
  if (weights.probabilities.size() != P || draws.size() != P)
    throw InputError("sample_predictive: weights, partitions and draws must align");
  if (request.locations.empty()) throw InputError("sample_predictive: no prediction locations");
  if (request.n_draws == 0) throw InputError("sample_predictive: n_draws must be positive");
  for (std::size_t j = 0; j < P; ++j)
    if (weights.probabilities[j] > 0.0 && draws[j].size() == 0)
      throw InputError("sample_predictive: partition " + std::to_string(partitions[j].id) +
                       " has positive weight but no posterior draws");

  std::vector<double> cumulative(P);
  double acc = 0.0;
  for (std::size_t j = 0; j < P; ++j) cumulative[j] = (acc += weights.probabilities[j]);

  // Steps 1-2 and step 3 use separate per-draw streams, so values do not
  // depend on how draws are grouped or scheduled.
  const std::size_t D = request.n_draws;
  std::vector<std::size_t> pick_partition(D), pick_state(D);
  for (std::size_t d = 0; d < D; ++d) {
    Rng rng = make_rng(request.seed, {stream::kPredict, 0, d});
    std::uniform_real_distribution<double> unif(0.0, acc);
    const double u = unif(rng);
    std::size_t j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                             cumulative.begin());
    j = std::min(j, P - 1);
    while (weights.probabilities[j] <= 0.0 && j > 0) --j;
    pick_partition[d] = j;
    std::uniform_int_distribution<std::size_t> pick(0, draws[j].size() - 1);
    pick_state[d] = pick(rng);
  }

  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t d = 0; d < D; ++d) groups[{pick_partition[d], pick_state[d]}].push_back(d);
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>> group_list(
      groups.begin(), groups.end());

  std::vector<std::vector<SegmentData>> train_segs(P);
  std::vector<std::vector<std::size_t>> pred_segment(P);
  for (std::size_t j = 0; j < P; ++j) {
    if (draws[j].size() == 0) continue;
    train_segs[j] = split_by_segment(train, partitions[j], draws[j].frames);
    pred_segment[j] = assign_segments(partitions[j], request.locations);
  }

  const auto m = static_cast<Eigen::Index>(request.locations.size());
  PredictiveDraws out;
  out.draws.resize(static_cast<Eigen::Index>(D), m);
  out.partition_trace.resize(D);
  out.state_trace = pick_state;
  for (std::size_t d = 0; d < D; ++d) out.partition_trace[d] = partitions[pick_partition[d]].id;

  parallel_for(group_list.size(), request.jobs, [&](std::size_t g) {
    const auto [j, t] = group_list[g].first;
    const auto& state = draws[j].states[t];
    const auto blocks = segment_blocks(state, draws[j].frames, train_segs[j], pred_segment[j],
                                       request.locations, request.include_nugget, !request.joint);
    std::vector<Eigen::MatrixXd> roots(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& b = blocks[k];
      if (b.rows.empty()) continue;
      if (!request.joint) {
        roots[k] = b.cov.cwiseMax(0.0).cwiseSqrt();
        continue;
      }
      roots[k] = psd_root(b.cov);
    }
    std::normal_distribution<double> normal;
    for (std::size_t d : group_list[g].second) {
      Rng rng = make_rng(request.seed, {stream::kPredict, 1, d});
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        if (b.rows.empty()) continue;
        const auto mk = static_cast<Eigen::Index>(b.rows.size());
        Eigen::VectorXd eps(mk);
        for (Eigen::Index i = 0; i < mk; ++i) eps(i) = normal(rng);
        const Eigen::VectorXd val =
            request.joint ? Eigen::VectorXd(b.mean + roots[k] * eps)
                          : Eigen::VectorXd(b.mean + roots[k].cwiseProduct(eps));
        for (Eigen::Index i = 0; i < mk; ++i)
          out.draws(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(b.rows[static_cast<std::size_t>(i)])) = val(i);
      }
    }
  });
  return out;
}

PredictionSummary summarize(const PredictiveDraws& draws, std::span<const double> probs) {
  const Eigen::Index T = draws.draws.rows(), m = draws.draws.cols();
  if (T < 2) throw InputError("summarize: need at least 2 draws");
  PredictionSummary s;
  s.probs.assign(probs.begin(), probs.end());
  s.mean = draws.draws.colwise().mean().transpose();
  s.sd.resize(m);
  s.quantiles.resize(m, static_cast<Eigen::Index>(probs.size()));
  for (Eigen::Index j = 0; j < m; ++j) {
    const double var = (draws.draws.col(j).array() - s.mean(j)).square().sum() / double(T - 1);
    s.sd(j) = std::sqrt(var);
    std::vector<double> col(draws.draws.col(j).data(), draws.draws.col(j).data() + T);
    std::sort(col.begin(), col.end());
    for (std::size_t q = 0; q < probs.size(); ++q) {
      const double pos = probs[q] * double(T - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, col.size() - 1);
      s.quantiles(j, static_cast<Eigen::Index>(q)) = col[lo] + (pos - double(lo)) * (col[hi] - col[lo]);
    }
  }
  return s;
}

Eigen::VectorXd spatial_average_draws(const PredictiveDraws& draws) {
  if (draws.draws.cols() < 1) throw InputError("spatial_average_draws: no locations");
  return draws.draws.rowwise().mean();
}

}  // namespace nsgp
