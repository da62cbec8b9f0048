#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <vector>

#include "nsgp/data.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

struct MixtureComponent {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  double weight = 1.0;
};

// Multinomial-logit mixing weights driven by one-hot category indicators.
// coefficients is K x p with the last row pinned to zero (reference class).
struct ConcomitantWeights {
  std::vector<std::string> category_names;
  std::vector<std::vector<std::string>> levels;  // per category column, sorted
  Eigen::MatrixXd coefficients;

  Eigen::VectorXd design(const std::vector<std::optional<std::string>>& cats) const;
  Eigen::VectorXd log_weights(const Eigen::VectorXd& x) const;
};

struct MixtureModel {
  std::vector<MixtureComponent> components;
  double log_likelihood = 0.0;
  std::size_t em_iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // observed-data log-likelihood per EM iteration
  std::optional<ConcomitantWeights> concomitant;

  std::size_t K() const { return components.size(); }
};

struct EmOptions {
  std::size_t restarts = 20;
  double tol = 1e-6;
  std::size_t max_iter = 500;
  double floor_fraction = 1e-6;  // eigenvalue floor = floor_fraction * diameter^2
};

/// A hard partition of the plane induced by a fitted mixture: every location is
/// assigned to the component with the largest (unweighted by default) density.
struct Partition {
  std::size_t id = 0;
  MixtureModel mixture;
  bool weighted_assignment = false;

  std::size_t K() const { return mixture.K(); }
};

struct PartitionSet {
  std::vector<Partition> partitions;
};

// Single EM run from one k-means++ seeding. Throws NumericError on component
// collapse. `categories` enables concomitant weights when non-null.
MixtureModel run_em(std::span<const Location> points, std::size_t K, Rng& rng,
                    const EmOptions& options,
                    const std::vector<std::vector<std::optional<std::string>>>* categories = nullptr,
                    const std::vector<std::string>* category_names = nullptr);

/// Best-of-restarts EM fit of a K-component bivariate Gaussian mixture.
MixtureModel fit_mixture(std::span<const Location> points, std::size_t K, RngSeed seed,
                         const EmOptions& options = {});

Eigen::VectorXd component_log_densities(const MixtureModel& model, const Location& s);

/// Zero-based segment index (CSV outputs add 1). Ties go to the lowest index.
std::size_t assign_segment(const Partition& partition, const Location& s);
std::vector<std::size_t> assign_segments(const Partition& partition,
                                         std::span<const Location> locations);

double log_normal2(const Eigen::Vector2d& x, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov);

struct CandidateOptions {
  std::vector<std::size_t> K_values{2, 3, 4, 5, 6};
  EmOptions em;
  std::size_t max_keep = 8;
  bool concomitant = false;
  bool weighted_assignment = false;
  std::size_t jobs = 1;
};

/// Fits mixtures for every K on the complete-case covariate locations and keeps
/// up to max_keep distinct converged local modes. Selection takes the best fit
/// of each K first (in order of log-likelihood), then fills the remaining slots
/// with the next-best distinct modes.
PartitionSet generate_candidates(const CovariateTable& covariates, RngSeed seed,
                                 const CandidateOptions& options = {});

bool same_mode(const MixtureModel& a, const MixtureModel& b, double diameter);

}  // namespace nsgp
