#include "nsgp/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsgp/error.hpp"

namespace nsgp {
namespace {

void require_draws(std::span<const double> loglik, const char* who) {
  if (loglik.size() < 2) throw InputError(std::string(who) + ": need at least 2 draws");
  for (double v : loglik)
    if (!std::isfinite(v)) throw InputError(std::string(who) + ": non-finite log-likelihood draw");
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

void mean_var(std::span<const double> v, VarianceDivisor divisor, double& mean, double& var) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  var = ss / double(divisor == VarianceDivisor::Unbiased ? v.size() - 1 : v.size());
}

}  // namespace

std::string method_label(EvidenceMethod method, double delta) {
  switch (method) {
    case EvidenceMethod::HarmonicMean: return "HM";
    case EvidenceMethod::NewtonRaftery: return "IS" + std::to_string(static_cast<int>(std::lround(delta * 10)));
    case EvidenceMethod::AICM: return "AICM";
    case EvidenceMethod::BICM: return "BICM";
  }
  return "?";
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double harmonic_mean_logml(std::span<const double> loglik) {
  require_draws(loglik, "harmonic_mean_logml");
  std::vector<double> neg(loglik.size());
  std::transform(loglik.begin(), loglik.end(), neg.begin(), [](double v) { return -v; });
  return std::log(double(loglik.size())) - log_sum_exp(neg);
}

LogMLEstimate newton_raftery_logml(std::span<const double> loglik, double delta,
                                   const NewtonRafteryOptions& options) {
  require_draws(loglik, "newton_raftery_logml");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("newton_raftery_logml: delta must be in (0,1)");
  const double T = double(loglik.size());
  const double log_pseudo = std::log(delta * T / (1.0 - delta));
  const double log_delta = std::log(delta), log_1m = std::log1p(-delta);

  LogMLEstimate est;
  est.method = EvidenceMethod::NewtonRaftery;
  est.delta = delta;
  est.converged = false;
  double lx = harmonic_mean_logml(loglik);
  std::vector<double> num(loglik.size() + 1), den(loglik.size() + 1);
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    // x = [dT/(1-d) + sum L/(d x + (1-d) L)] / [dT/((1-d) x) + sum 1/(d x + (1-d) L)]
    num[0] = log_pseudo;
    den[0] = log_pseudo - lx;
    for (std::size_t t = 0; t < loglik.size(); ++t) {
      const double a = log_add_exp(log_delta + lx, log_1m + loglik[t]);
      num[t + 1] = loglik[t] - a;
      den[t + 1] = -a;
    }
    const double target = log_sum_exp(num) - log_sum_exp(den);
    const double next = (1.0 - options.damping) * target + options.damping * lx;
    const double change = std::abs(next - lx);
    lx = next;
    est.iterations = it;
    if (change < options.tol * std::max(1.0, std::abs(lx))) {
      est.converged = true;
      break;
    }
  }
  est.value = lx;
  return est;
}

double aicm_logml(std::span<const double> loglik, VarianceDivisor divisor) {
  require_draws(loglik, "aicm_logml");
  double mean = 0.0, var = 0.0;
  mean_var(loglik, divisor, mean, var);
  return 2.0 * (mean - var);
}

double bicm_logml(std::span<const double> loglik, double n, VarianceDivisor divisor) {
  require_draws(loglik, "bicm_logml");
  if (!(n >= 1.0)) throw InputError("bicm_logml: sample size must be at least 1");
  double mean = 0.0, var = 0.0;
  mean_var(loglik, divisor, mean, var);
  return mean - var * (std::log(n) - 1.0);
}

PartitionWeights partition_posterior(std::span<const double> log_ml, const std::string& method) {
  if (log_ml.empty()) throw InputError("partition_posterior: no estimates");
  for (double v : log_ml)
    if (!std::isfinite(v)) throw NumericError("partition_posterior: non-finite log marginal likelihood");
  const double lse = log_sum_exp(log_ml);
  PartitionWeights w;
  w.method = method;
  for (double v : log_ml) w.probabilities.push_back(std::exp(v - lse));
  return w;
}

std::vector<double> scale_log_ml(std::span<const double> log_ml) {
  std::vector<double> out(log_ml.size(), 0.0);
  if (log_ml.size() < 2) return out;
  double mean = 0.0, var = 0.0;
  mean_var(log_ml, VarianceDivisor::Unbiased, mean, var);
  const double sd = std::sqrt(var);
  if (!(sd > 0.0)) return out;
  for (std::size_t i = 0; i < log_ml.size(); ++i) out[i] = (log_ml[i] - mean) / sd;
  return out;
}

std::vector<LogMLEstimate> estimate_all(std::size_t partition_id, std::span<const double> loglik,
                                        std::size_t n_obs, const EvidenceOptions& options) {
  std::vector<LogMLEstimate> out;
  LogMLEstimate hm;
  hm.partition_id = partition_id;
  hm.method = EvidenceMethod::HarmonicMean;
  hm.value = harmonic_mean_logml(loglik);
  out.push_back(hm);
  for (double d : options.deltas) {
    auto e = newton_raftery_logml(loglik, d, options.newton_raftery);
    e.partition_id = partition_id;
    out.push_back(e);
  }
  LogMLEstimate a;
  a.partition_id = partition_id;
  a.method = EvidenceMethod::AICM;
  a.value = aicm_logml(loglik, options.divisor);
  out.push_back(a);
  LogMLEstimate b;
  b.partition_id = partition_id;
  b.method = EvidenceMethod::BICM;
  b.value = bicm_logml(loglik, double(n_obs), options.divisor);
  out.push_back(b);
  return out;
}

}  // namespace nsgp
