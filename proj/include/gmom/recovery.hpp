#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gmom/homotopy.hpp"
#include "gmom/model.hpp"
#include "gmom/rng.hpp"

namespace gmom {

struct NoMeaningfulSolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solutions with any imaginary part larger than this are discarded by the
// statistical filter; an order above the tracker's refine tolerance so true
// solutions perturbed by tracking noise survive.
inline constexpr double kImagTol = 1e-6;

// One real candidate from a univariate stage: weights are present for the
// weight-determining stage (reconstructed last entry included), variances
// are absent for the known-covariance pipeline.
struct CandidateSolution {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
};

// Coordinate layout of a univariate stage's solution vectors:
// [lambda_1..lambda_{k-1}] (if has_weights) ++ [mu_1..mu_k]
// ++ [sigma_1..sigma_k] (if has_variances).
struct SolutionLayout {
  int k = 0;
  bool has_weights = false;
  bool has_variances = true;
};

// Keep points that are real (|Im| <= 1e-6 per coordinate), have positive
// variances, and positive weights including the reconstructed last weight.
// Candidates are returned in canonical (lexicographic) order.
std::vector<CandidateSolution> filter_statistical(const ComplexSolutionSet& solutions,
                                                  const SolutionLayout& layout,
                                                  const std::vector<double>& fixed_weights = {});

// Candidate minimizing |extra_poly(candidate) - extra_value|; ties break to
// the smaller index. Throws NoMeaningfulSolutionError on empty input.
std::size_t select_by_extra_moment(const std::vector<CandidateSolution>& candidates,
                                   const SolutionLayout& layout, const Poly& extra_poly,
                                   double extra_value);

// Eigendecompose, replace eigenvalues <= 0 by |N(0, 1e-3)| draws (redrawn at
// exact zero), recompose. SPD inputs pass through unchanged up to the
// decomposition round trip.
Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& S, Rng& rng);

enum class FailedStage { none, dim1_system, dim_i_system, offdiagonal_system };

struct StageFailed {
  FailedStage stage = FailedStage::none;
  int dim = 0;  // 1-based dimension for dim_i_system

  bool ok() const { return stage == FailedStage::none; }
};

std::string to_string(const StageFailed& s);
StageFailed stage_failed_from_string(const std::string& s);

struct SolveReport {
  std::optional<MixtureParams> params;
  StageFailed stage_failed;
  int candidates_found = 0;
  std::vector<double> residuals;  // per-equation |f_v(theta) - m_v|
  double elapsed_s = 0.0;
};

struct EstimateOptions {
  TrackerOptions tracker;
  std::uint64_t repair_seed = 0x70736472ULL;
  // Reuse the cached solution fiber of a reference system for the k >= 3
  // unknown-weights stage (total degree 362880 at k = 3, far past the
  // tracker guard and the per-trial time budget when tracked directly).
  bool seeded_weight_stage = true;
};

// Algorithm 1. mV1 may have 3k+1 entries (orders 0..3k, last is the
// selection moment) or 3k entries (no selection moment, d = 1 inputs).
// Empty mV3 with d >= 2 yields diagonal covariance estimates.
SolveReport estimate_parameters(int d, int k, const MomentSets& moments,
                                const std::optional<std::vector<double>>& known_weights = {},
                                const EstimateOptions& opts = {});

// Moment access with any chosen dimension playing the V1 role, as the
// cycling algorithm requires.
class MomentProvider {
 public:
  virtual ~MomentProvider() = default;
  virtual int d() const = 0;
  virtual int k() const = 0;
  virtual V3Method method() const = 0;
  // Orders 0..3k of dimension n (0-based); entry 0 must be 1.
  virtual std::vector<double> leading_moments(int n) const = 0;
  // Orders 1..2k+1 of dimension i.
  virtual std::vector<double> secondary_moments(int i) const = 0;
  // Empty result requests diagonal covariances.
  virtual std::map<std::vector<int>, double> cross_moments() const = 0;
};

class SampleMomentProvider : public MomentProvider {
 public:
  SampleMomentProvider(Eigen::MatrixXd samples, int k, V3Method method, bool with_mV3 = true);
  int d() const override;
  int k() const override { return k_; }
  V3Method method() const override { return method_; }
  std::vector<double> leading_moments(int n) const override;
  std::vector<double> secondary_moments(int i) const override;
  std::map<std::vector<int>, double> cross_moments() const override;

 private:
  Eigen::MatrixXd samples_;
  int k_;
  V3Method method_;
  bool with_mV3_;
};

class ExactMomentProvider : public MomentProvider {
 public:
  ExactMomentProvider(MixtureParams params, V3Method method, bool with_mV3 = true);
  int d() const override { return params_.d; }
  int k() const override { return params_.k; }
  V3Method method() const override { return method_; }
  std::vector<double> leading_moments(int n) const override;
  std::vector<double> secondary_moments(int i) const override;
  std::map<std::vector<int>, double> cross_moments() const override;

 private:
  MixtureParams params_;
  V3Method method_;
  bool with_mV3_;
};

// Algorithm 2: run with dimension n leading, cycling n upward on a failed
// weight stage or per-dimension stage, giving up after n = d.
SolveReport estimate_with_cycling(const MomentProvider& provider,
                                  const std::optional<std::vector<double>>& known_weights = {},
                                  const EstimateOptions& opts = {});

// Algorithm 3: uniform mixture with shared known covariance. mV1 holds
// orders 1..k of dimension 1; cross(i-2, t) = m_{t e_1 + e_i} for t=0..k-1.
SolveReport estimate_shared_known_covariance(int d, int k, const Eigen::MatrixXd& sigma,
                                             const std::vector<double>& mV1,
                                             const std::vector<std::vector<double>>& cross,
                                             const EstimateOptions& opts = {});

// Precompute (or load from the on-disk cache) the reference fiber used by
// the seeded weight stage; exposed so long experiment runs can pay the
// bootstrap cost once upfront.
void prewarm_weight_stage(int k);

}  // namespace gmom
