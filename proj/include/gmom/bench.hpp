#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gmom/model.hpp"
#include "gmom/recovery.hpp"

namespace gmom {

// Synthetic ground truth: weights |z|/sum|z| with z standard normal, means
// standard normal, covariances M M^T with M standard normal (diagonal kept
// when requested). Deterministic per seed.
MixtureParams generate_params(int d, int k, bool diagonal, std::uint64_t seed);

// n samples, one per row: component by weight, then mu + L z with L the
// Cholesky factor. Deterministic per seed and independent of thread count.
Eigen::MatrixXd sample_mixture(const MixtureParams& params, Eigen::Index n, std::uint64_t seed);

struct ParamErrors {
  double weight_error = 0.0;
  double mean_error = 0.0;
  double covariance_error = 0.0;
};

// Label-matching error: choose the component permutation minimizing the
// weight 2-norm difference (ties broken by the mean difference, which is
// what makes uniform-weight mixtures comparable), then report block norms
// divided by entry counts k, k*d, k*d^2.
ParamErrors compute_error(const MixtureParams& truth, const MixtureParams& estimate);

struct ExperimentConfig {
  std::vector<int> d_values;
  int k = 2;
  std::vector<long long> sample_sizes;  // ignored when exact_moments
  bool exact_moments = false;
  int trials = 1;
  bool known_weights = false;
  bool shared_known_covariance = false;
  bool diagonal_only = false;
  V3Method method = V3Method::low;
  std::uint64_t seed = 0;
  double time_budget_s = 60.0;
};

struct TrialRecord {
  int d = 0;
  int k = 0;
  long long n_samples = -1;  // -1 = exact moments
  std::uint64_t seed = 0;
  bool passed = false;
  bool timeout = false;
  std::string stage_failed = "none";
  double weight_error = 0.0;
  double mean_error = 0.0;
  double covariance_error = 0.0;
  double elapsed_s = 0.0;
};

struct CellSummary {
  int d = 0;
  long long n_samples = -1;
  int trials = 0;
  int passes = 0;
  int dim1_failures = 0;
  int timeouts = 0;
  double median_weight_error = 0.0;
  double median_mean_error = 0.0;
  double median_covariance_error = 0.0;
  double median_elapsed_s = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  std::vector<CellSummary> summary;
};

// Grid runner: trials run concurrently with hierarchical per-trial seeds and
// are re-sorted by (cell, trial) before summarization. Medians are over
// passed trials; timeouts are recorded and excluded.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace gmom
