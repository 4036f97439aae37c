#pragma once

#include <Eigen/Core>
#include <vector>

#include "gmom/model.hpp"
#include "gmom/poly.hpp"

namespace gmom {

// Moments of N(mean, variance) up to max_order via the two-term recursion
//   m_0 = 1,  m_1 = mean,  m_i = mean*m_{i-1} + (i-1)*variance*m_{i-2}.
// sigma denotes VARIANCE throughout, not standard deviation.
std::vector<double> gaussian_moments_1d(double mean, double variance, int max_order);

// Symbolic univariate mixture moment polynomials in the unknown ordering
// (lambda_1..lambda_k, mu_1..mu_k, sigma_1..sigma_k): the order-i polynomial
// is sum_l lambda_l * g_i(mu_l, sigma_l) with g built by the same recursion.
struct UnivariateMomentPolys {
  int k = 0;
  int max_order = 0;
  std::vector<Poly> polynomials;  // max_order + 1 entries, index = order

  int lambda_var(int l) const { return l; }
  int mu_var(int l) const { return k + l; }
  int sigma_var(int l) const { return 2 * k + l; }
  int nvars() const { return 3 * k; }
};

// Cached per (k, max_order); safe to call concurrently.
const UnivariateMomentPolys& mixture_moment_polys(int k, int max_order);

// Exact mixed moment E[X_i^t X_j] of the mixture, i != j (0-based dims),
// via the reduction to univariate moments:
//   m_{t e_i + e_j} = sum_l lambda_l (mu_lj m_t(mu_li, s_lii)
//                                     + t s_lij m_{t-1}(mu_li, s_lii)).
double mixed_moment(const MixtureParams& params, int t, int i, int j);

// Exact diagonal moment E[X_i^order] of the mixture (0-based dim).
double exact_univariate_moment(const MixtureParams& params, int dim, int order);

struct V3PairIndices {
  int i = 0, j = 0;  // 0-based pair, i < j
  std::vector<MomentIndex> indices;
};

// The off-diagonal moment index selection of the two methods. Each pair
// (i, j), i < j, gets exactly k indices after the t=1 duplicate collapse.
std::vector<V3PairIndices> select_V3_indices(int k, int d, V3Method method);

// Conversion from multi-index to symmetric-tensor entry: order t plus the
// non-decreasing tuple of 1-based dimension labels, label j repeated v_j
// times (e.g. v=(1,0,2) -> (3, (1,3,3))).
std::pair<int, std::vector<int>> tensor_index(const MomentIndex& v);

// Empirical moments of an n x d sample matrix (rows are samples). Uses a
// blocked pairwise summation whose result is independent of the thread
// count; sample_moments_serial is the single-threaded reference kernel.
MomentSets sample_moments(const Eigen::MatrixXd& samples, int k, V3Method method);
MomentSets sample_moments_serial(const Eigen::MatrixXd& samples, int k, V3Method method);

// Forward-evaluated exact moments of a known mixture, same shapes as
// sample_moments produces.
MomentSets exact_moment_sets(const MixtureParams& params, V3Method method,
                             bool with_mV3 = true);

// Moment inputs of the shared-known-covariance pipeline: mV1 = orders 1..k
// of dimension 1, cross(i-2, t) = m_{t e_1 + e_i} for i = 2..d, t = 0..k-1.
struct SharedCovarianceMoments {
  std::vector<double> mV1;
  std::vector<std::vector<double>> cross;
};

SharedCovarianceMoments shared_covariance_sample_moments(const Eigen::MatrixXd& samples, int k);
SharedCovarianceMoments shared_covariance_exact_moments(const MixtureParams& params);

}  // namespace gmom
