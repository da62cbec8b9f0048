#include <doctest.h>

#include "nsgp/error.hpp"
#include "nsgp/predict.hpp"
#include "oracles.hpp"

using namespace nsgp;

namespace {

struct Fixture {
  Partition part = oracle::vertical_split(1.0);
  SpatialDataset train;
  std::vector<SegmentFrame> frames;
  ModelState state;

  explicit Fixture(double tau2 = 0.2, std::uint64_t seed = 1)
      : train([&] {
          std::mt19937_64 rng(seed);
          const auto locs = oracle::random_locations(24, 2.0, 1.0, rng);
          std::normal_distribution<double> n;
          std::vector<double> z;
          for (std::size_t i = 0; i < locs.size(); ++i) z.push_back(1.0 + n(rng));
          return SpatialDataset(locs, z);
        }()) {
    frames = segment_frames(part, train);
    state.mu = 0.8;
    state.segments = {SegmentParams{tau2, 1.5, 0.3, 0.1, 0.4, 0.5}, SegmentParams{tau2, 0.4, 0.2, 0.2, 0.0, 1.5}};
  }
};

// Dense kriging from the full nonstationary covariance (frames applied per segment).
void dense_kriging(const Fixture& f, const std::vector<Location>& pred, bool nugget, Eigen::VectorXd& mean,
                   Eigen::MatrixXd& cov) {
  std::vector<Location> all = f.train.locations();
  all.insert(all.end(), pred.begin(), pred.end());
  const auto N = static_cast<Eigen::Index>(all.size());
  const auto n = static_cast<Eigen::Index>(f.train.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) {
      const auto ki = assign_segment(f.part, all[std::size_t(i)]);
      if (ki != assign_segment(f.part, all[std::size_t(j)])) continue;
      const Eigen::Vector2d h = f.frames[ki].apply(all[std::size_t(i)]) - f.frames[ki].apply(all[std::size_t(j)]);
      C(i, j) = matern(f.state.segments[ki], h);
      if (i == j && (i < n || nugget)) C(i, j) += f.state.segments[ki].tau2;
    }
  const Eigen::MatrixXd Saa = C.topLeftCorner(n, n), Sab = C.topRightCorner(n, N - n),
                        Sbb = C.bottomRightCorner(N - n, N - n);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = f.train.values()[std::size_t(i)] - f.state.mu;
  const Eigen::MatrixXd inv = Saa.inverse();
  mean = Eigen::VectorXd::Constant(N - n, f.state.mu) + Sab.transpose() * inv * r;
  cov = Sbb - Sab.transpose() * inv * Sab;
}

}  // namespace

TEST_CASE("conditional moments equal dense kriging with zero cross-segment blocks") {
  const Fixture f;
  std::mt19937_64 rng(2);
  const auto pred = oracle::random_locations(15, 2.0, 1.0, rng);
  for (bool nugget : {true, false}) {
    const auto cm = conditional_moments(f.state, f.part, f.frames, f.train, pred, nugget);
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    dense_kriging(f, pred, nugget, mean, cov);
    CHECK((cm.mean - mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((cm.cov - cov).cwiseAbs().maxCoeff() < 1e-9);
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (std::size_t j = 0; j < pred.size(); ++j)
        if (cm.segment[i] != cm.segment[j]) CHECK(cm.cov(Eigen::Index(i), Eigen::Index(j)) == 0.0);
  }
}

TEST_CASE("without a nugget the predictor interpolates the training data") {
  const Fixture f(0.0);
  const auto& locs = f.train.locations();
  const auto cm = conditional_moments(f.state, f.part, f.frames, f.train, locs, true);
  for (std::size_t i = 0; i < locs.size(); ++i) {
    CHECK(cm.mean(Eigen::Index(i)) == doctest::Approx(f.train.values()[i]).epsilon(1e-8));
    const double sd = std::sqrt(std::max(0.0, cm.cov(Eigen::Index(i), Eigen::Index(i))));
    CHECK(sd <= 1e-4 * std::sqrt(f.state.segments[cm.segment[i]].sigma2));
  }
}

TEST_CASE("prior-only segments get unconditional moments") {
  const Partition part = oracle::vertical_split(1.0);
  const SpatialDataset train({{0.2, 0.2}, {0.5, 0.7}, {0.8, 0.4}}, {1.0, 2.0, 1.5});
  const std::vector<Location> pred{{1.5, 0.5}, {1.7, 0.6}};
  auto frames = segment_frames(part, train, pred);
  ModelState st;
  st.mu = 0.3;
  st.segments = {SegmentParams{0.1, 1.0, 0.3, 0.3, 0.0, 0.5}, SegmentParams{0.1, 2.0, 0.3, 0.3, 0.0, 0.5}};
  const auto cm = conditional_moments(st, part, frames, train, pred, true);
  CHECK(cm.mean(0) == 0.3);
  CHECK(cm.cov(0, 0) == doctest::Approx(2.1));
}

TEST_CASE("model-averaged sampling: partition frequencies follow the weights") {
  const Fixture f;
  PosteriorDraws d1, d2;
  for (int t = 0; t < 5; ++t) d1.states.push_back(f.state), d2.states.push_back(f.state);
  d1.loglik.assign(5, 0.0);
  d2.loglik.assign(5, 0.0);
  Partition p2 = oracle::strip_partition(1, 2);
  ModelState s2;
  s2.mu = 0.0;
  s2.segments = {SegmentParams{0.1, 1.0, 0.3, 0.3, 0.0, 0.5}};
  d2.states.assign(5, s2);
  d1.frames = f.frames;
  d2.frames = segment_frames(p2, f.train);
  const std::vector<Partition> parts{f.part, p2};
  const std::vector<PosteriorDraws> draws{d1, d2};
  PartitionWeights w{{0.3, 0.7}, "test"};
  PredictionRequest req;
  req.locations = {{0.5, 0.5}, {1.5, 0.5}};
  req.n_draws = 4000;
  req.seed = RngSeed{9};
  const auto pd = sample_predictive(w, parts, draws, f.train, req);
  const double share = double(std::count(pd.partition_trace.begin(), pd.partition_trace.end(), 1)) / 4000.0;
  // binomial SD is about 0.0072
  CHECK(share == doctest::Approx(0.3).epsilon(0.1));

  req.jobs = 3;
  const auto again = sample_predictive(w, parts, draws, f.train, req);
  CHECK(again.draws == pd.draws);

  const PartitionWeights zero{{1.0, 0.0}, "test"};
  const auto only1 = sample_predictive(zero, parts, draws, f.train, req);
  for (auto id : only1.partition_trace) CHECK(id == 1);
  CHECK_THROWS_AS(sample_predictive(PartitionWeights{{1.0}, ""}, parts, draws, f.train, req), InputError);
}

TEST_CASE("joint draws reproduce the conditional covariance") {
  const Fixture f;
  PosteriorDraws d;
  d.states = {f.state};
  d.loglik = {0.0};
  d.frames = f.frames;
  const std::vector<Partition> parts{f.part};
  const std::vector<PosteriorDraws> draws{d};
  PredictionRequest req;
  req.locations = {{0.3, 0.3}, {0.35, 0.32}, {1.6, 0.5}};
  req.n_draws = 20000;
  req.seed = RngSeed{4};
  const auto pd = sample_predictive(PartitionWeights{{1.0}, ""}, parts, draws, f.train, req);
  const auto cm = conditional_moments(f.state, f.part, f.frames, f.train, req.locations, true);
  const Eigen::RowVectorXd m = pd.draws.colwise().mean();
  const Eigen::MatrixXd c = pd.draws.rowwise() - m;
  const Eigen::MatrixXd emp = c.transpose() * c / double(req.n_draws - 1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(m(i) == doctest::Approx(cm.mean(i)).epsilon(0.05));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(emp(i, j) - cm.cov(i, j)) < 0.05 * cm.cov(i, i) + 0.01);
  }
  // cross-segment correlation should vanish
  CHECK(std::abs(emp(0, 2)) < 0.03);

  req.joint = false;
  const auto marg = sample_predictive(PartitionWeights{{1.0}, ""}, parts, draws, f.train, req);
  const Eigen::RowVectorXd mm = marg.draws.colwise().mean();
  const Eigen::MatrixXd mc = marg.draws.rowwise() - mm;
  const Eigen::MatrixXd memp = mc.transpose() * mc / double(req.n_draws - 1);
  CHECK(memp(0, 0) == doctest::Approx(cm.cov(0, 0)).epsilon(0.05));
  CHECK(std::abs(memp(0, 1)) < 0.03 * cm.cov(0, 0) + 0.01);
}

TEST_CASE("summaries: mean, sample SD and type-7 quantiles") {
  PredictiveDraws pd;
  pd.draws.resize(5, 2);
  pd.draws.col(0) << 1, 2, 3, 4, 10;
  pd.draws.col(1) << -1, -1, -1, -1, -1;
  const auto s = summarize(pd);
  CHECK(s.mean(0) == doctest::Approx(4.0));
  CHECK(s.sd(0) == doctest::Approx(std::sqrt((9 + 4 + 1 + 0 + 36) / 4.0)));
  CHECK(s.sd(1) == 0.0);
  CHECK(s.quantiles(0, 1) == doctest::Approx(3.0));
  CHECK(s.quantiles(0, 0) == doctest::Approx(1.2));
  CHECK(s.quantiles(0, 2) == doctest::Approx(8.8));
}

TEST_CASE("spatial average draws have the variance of the averaged field") {
  PredictiveDraws pd;
  pd.draws.resize(3, 2);
  pd.draws << 1, 3, 2, 2, 0, 6;
  const auto avg = spatial_average_draws(pd);
  CHECK(avg(0) == 2.0);
  CHECK(avg(1) == 2.0);
  CHECK(avg(2) == 3.0);
}
