#pragma once

#include <span>
#include <string>
#include <vector>

namespace nsgp {

enum class EvidenceMethod { HarmonicMean, NewtonRaftery, AICM, BICM };

std::string method_label(EvidenceMethod method, double delta = 0.0);  // "HM", "IS5", "AICM", "BICM"

struct LogMLEstimate {
  std::size_t partition_id = 0;
  EvidenceMethod method = EvidenceMethod::HarmonicMean;
  double delta = 0.0;  // only for NewtonRaftery
  double value = 0.0;
  bool converged = true;
  std::size_t iterations = 0;
  std::string label() const { return method_label(method, delta); }
};

struct PartitionWeights {
  std::vector<double> probabilities;
  std::string method;
};

double log_sum_exp(std::span<const double> values);

/// log T - logsumexp(-loglik).
double harmonic_mean_logml(std::span<const double> loglik);

struct NewtonRafteryOptions {
  double damping = 0.5;
  double tol = 1e-8;
  std::size_t max_iter = 1000;
};

/// Prior/posterior delta-mixture importance-sampling estimate: solves the
/// fixed-point equation with delta*T/(1-delta) pseudo prior draws, in log space,
/// by damped fixed-point iteration started from the harmonic mean.
LogMLEstimate newton_raftery_logml(std::span<const double> loglik, double delta,
                                   const NewtonRafteryOptions& options = {});

enum class VarianceDivisor { Unbiased, Population };  // T-1 or T

double aicm_logml(std::span<const double> loglik, VarianceDivisor divisor = VarianceDivisor::Unbiased);
double bicm_logml(std::span<const double> loglik, double n,
                  VarianceDivisor divisor = VarianceDivisor::Unbiased);

/// Posterior partition probabilities under a uniform partition prior.
PartitionWeights partition_posterior(std::span<const double> log_ml, const std::string& method = "");

/// Zero-mean, unit-variance rescaling across partitions (sample SD); a
/// constant vector maps to zeros.
std::vector<double> scale_log_ml(std::span<const double> log_ml);

struct EvidenceOptions {
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  NewtonRafteryOptions newton_raftery;
  VarianceDivisor divisor = VarianceDivisor::Unbiased;
};

/// All estimators for one partition's draws: HM, IS(delta) for each delta,
/// AICM and BICM.
std::vector<LogMLEstimate> estimate_all(std::size_t partition_id, std::span<const double> loglik,
                                        std::size_t n_obs, const EvidenceOptions& options = {});

}  // namespace nsgp
