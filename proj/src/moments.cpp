#include "gmom/moments.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>

namespace gmom {

std::vector<double> gaussian_moments_1d(double mean, double variance, int max_order) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_moments_1d: variance must be > 0");
  if (max_order < 0) throw std::invalid_argument("gaussian_moments_1d: max_order must be >= 0");
  std::vector<double> m(max_order + 1);
  m[0] = 1.0;
  if (max_order >= 1) m[1] = mean;
  for (int i = 2; i <= max_order; ++i) m[i] = mean * m[i - 1] + (i - 1) * variance * m[i - 2];
  return m;
}

namespace {

// Moment recursion without the positivity precondition, for internal use on
// already-validated covariance entries.
std::vector<double> gaussian_moments_unchecked(double mean, double variance, int max_order) {
  std::vector<double> m(max_order + 1);
  m[0] = 1.0;
  if (max_order >= 1) m[1] = mean;
  for (int i = 2; i <= max_order; ++i) m[i] = mean * m[i - 1] + (i - 1) * variance * m[i - 2];
  return m;
}

std::mutex g_poly_cache_mutex;
std::map<std::pair<int, int>, std::unique_ptr<UnivariateMomentPolys>> g_poly_cache;

}  // namespace

const UnivariateMomentPolys& mixture_moment_polys(int k, int max_order) {
  if (k < 1) throw std::invalid_argument("mixture_moment_polys: k must be >= 1");
  if (max_order < 1) throw std::invalid_argument("mixture_moment_polys: max_order must be >= 1");

  std::lock_guard<std::mutex> lock(g_poly_cache_mutex);
  auto key = std::make_pair(k, max_order);
  auto it = g_poly_cache.find(key);
  if (it != g_poly_cache.end()) return *it->second;

  auto polys = std::make_unique<UnivariateMomentPolys>();
  polys->k = k;
  polys->max_order = max_order;
  const int nv = 3 * k;

  // Per-component Gaussian moment polynomials by the recursion, then the
  // lambda-weighted sum.
  std::vector<std::vector<Poly>> g(k);
  for (int l = 0; l < k; ++l) {
    Poly mu = Poly::variable(nv, polys->mu_var(l));
    Poly sigma = Poly::variable(nv, polys->sigma_var(l));
    g[l].resize(max_order + 1);
    g[l][0] = Poly::constant(nv, 1.0);
    g[l][1] = mu;
    for (int i = 2; i <= max_order; ++i)
      g[l][i] = mu * g[l][i - 1] + sigma * g[l][i - 2] * static_cast<double>(i - 1);
  }
  polys->polynomials.resize(max_order + 1);
  for (int i = 0; i <= max_order; ++i) {
    Poly f(nv);
    for (int l = 0; l < k; ++l) f += Poly::variable(nv, polys->lambda_var(l)) * g[l][i];
    polys->polynomials[i] = f;
  }

  auto [pos, inserted] = g_poly_cache.emplace(key, std::move(polys));
  (void)inserted;
  return *pos->second;
}

double mixed_moment(const MixtureParams& params, int t, int i, int j) {
  if (i == j) throw std::invalid_argument("mixed_moment: i must differ from j (diagonal moments go through the univariate polynomials)");
  if (i < 0 || j < 0 || i >= params.d || j >= params.d)
    throw std::invalid_argument("mixed_moment: dimension out of range");
  if (t < 1) throw std::invalid_argument("mixed_moment: t must be >= 1");

  double total = 0.0;
  for (int l = 0; l < params.k; ++l) {
    double mu_i = params.means[l](i);
    double mu_j = params.means[l](j);
    double s_ii = params.covariances[l](i, i);
    double s_ij = params.covariances[l](i, j);
    std::vector<double> m = gaussian_moments_unchecked(mu_i, s_ii, t);
    total += params.weights[l] * (mu_j * m[t] + t * s_ij * m[t - 1]);
  }
  return total;
}

double exact_univariate_moment(const MixtureParams& params, int dim, int order) {
  double total = 0.0;
  for (int l = 0; l < params.k; ++l) {
    std::vector<double> m =
        gaussian_moments_unchecked(params.means[l](dim), params.covariances[l](dim, dim), order);
    total += params.weights[l] * m[order];
  }
  return total;
}

std::vector<V3PairIndices> select_V3_indices(int k, int d, V3Method method) {
  if (k < 1) throw std::invalid_argument("select_V3_indices: k must be >= 1");
  if (d < 2) throw std::invalid_argument("select_V3_indices: d must be >= 2");

  std::vector<V3PairIndices> out;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      V3PairIndices pair;
      pair.i = i;
      pair.j = j;
      auto add = [&](int ti, int tj) {
        std::vector<int> v(d, 0);
        v[i] = ti;
        v[j] = tj;
        MomentIndex idx(std::move(v));
        if (std::find(pair.indices.begin(), pair.indices.end(), idx) == pair.indices.end())
          pair.indices.push_back(std::move(idx));
      };
      if (method == V3Method::k) {
        for (int t = 1; t <= k; ++t) add(t, 1);
      } else if (k % 2 == 1) {
        for (int t = 1; t <= (k + 1) / 2; ++t) {
          add(t, 1);
          add(1, t);
        }
      } else {
        for (int t = 1; t <= k / 2; ++t) {
          add(t, 1);
          add(1, t);
        }
        add(k / 2 + 1, 1);
      }
      std::sort(pair.indices.begin(), pair.indices.end());
      out.push_back(std::move(pair));
    }
  }
  return out;
}

std::pair<int, std::vector<int>> tensor_index(const MomentIndex& v) {
  int t = v.order();
  if (t <= 0) throw std::invalid_argument("tensor_index: index must have a positive entry");
  std::vector<int> labels;
  labels.reserve(t);
  for (size_t j = 0; j < v.v.size(); ++j) {
    if (v.v[j] < 0) throw std::invalid_argument("tensor_index: negative entry");
    for (int r = 0; r < v.v[j]; ++r) labels.push_back(static_cast<int>(j) + 1);
  }
  return {t, labels};
}

// ---------------------------------------------------------------------------
// Sample moments

namespace {

// Sparse monomial over dimensions: product of dim^power factors.
struct Monomial {
  std::vector<std::pair<int, int>> factors;  // (dim, power)
};

struct MomentPlan {
  std::vector<Monomial> monomials;
  std::vector<int> max_power;  // per dimension
};

MomentPlan build_plan(int d, int k, V3Method method,
                      std::vector<V3PairIndices>* v3_out) {
  MomentPlan plan;
  plan.max_power.assign(d, 0);
  auto push = [&plan](Monomial m) {
    for (auto& [dim, p] : m.factors) plan.max_power[dim] = std::max(plan.max_power[dim], p);
    plan.monomials.push_back(std::move(m));
  };

  for (int o = 1; o <= 3 * k; ++o) push({{{0, o}}});
  for (int i = 1; i < d; ++i)
    for (int o = 1; o <= 2 * k + 1; ++o) push({{{i, o}}});
  if (d >= 2) {
    *v3_out = select_V3_indices(k, d, method);
    for (const V3PairIndices& pair : *v3_out)
      for (const MomentIndex& idx : pair.indices)
        push({{{pair.i, idx.v[pair.i]}, {pair.j, idx.v[pair.j]}}});
  }
  return plan;
}

constexpr Eigen::Index kBlockRows = 2048;

void accumulate_block(const Eigen::MatrixXd& samples, Eigen::Index row_begin,
                      Eigen::Index row_end, const MomentPlan& plan,
                      std::vector<double>& block_sums) {
  const int d = static_cast<int>(samples.cols());
  int max_pow = 0;
  for (int p : plan.max_power) max_pow = std::max(max_pow, p);
  std::vector<double> powers(static_cast<size_t>(d) * (max_pow + 1), 1.0);

  for (Eigen::Index r = row_begin; r < row_end; ++r) {
    for (int j = 0; j < d; ++j) {
      double* row = powers.data() + static_cast<size_t>(j) * (max_pow + 1);
      double x = samples(r, j);
      for (int p = 1; p <= plan.max_power[j]; ++p) row[p] = row[p - 1] * x;
    }
    for (size_t m = 0; m < plan.monomials.size(); ++m) {
      double v = 1.0;
      for (auto& [dim, p] : plan.monomials[m].factors)
        v *= powers[static_cast<size_t>(dim) * (max_pow + 1) + p];
      block_sums[m] += v;
    }
  }
}

// Blocked pairwise reduction: block partials are independent of threading
// and the combine tree is fixed, so results are identical for any thread
// count (the single-threaded kernel is the reference).
std::vector<double> reduce_moments(const Eigen::MatrixXd& samples, const MomentPlan& plan,
                                   bool parallel) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index nblocks = (n + kBlockRows - 1) / kBlockRows;
  const size_t nm = plan.monomials.size();

  std::vector<std::vector<double>> partials(nblocks, std::vector<double>(nm, 0.0));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel && nblocks > 1)
#endif
  for (Eigen::Index b = 0; b < nblocks; ++b) {
    accumulate_block(samples, b * kBlockRows, std::min(n, (b + 1) * kBlockRows), plan,
                     partials[b]);
  }
  (void)parallel;

  // Pairwise tree combine.
  for (Eigen::Index width = nblocks; width > 1;) {
    Eigen::Index half = (width + 1) / 2;
    for (Eigen::Index b = 0; b + half < width; ++b)
      for (size_t m = 0; m < nm; ++m) partials[b][m] += partials[b + half][m];
    width = half;
  }

  std::vector<double> means(nm);
  for (size_t m = 0; m < nm; ++m) means[m] = partials[0][m] / static_cast<double>(n);
  return means;
}

MomentSets assemble_moment_sets(const Eigen::MatrixXd& samples, int k, V3Method method,
                                bool parallel) {
  if (samples.rows() < 1) throw std::invalid_argument("sample_moments: sample is empty");
  if (samples.cols() < 1) throw std::invalid_argument("sample_moments: d must be >= 1");
  if (k < 1) throw std::invalid_argument("sample_moments: k must be >= 1");

  const int d = static_cast<int>(samples.cols());
  std::vector<V3PairIndices> v3;
  MomentPlan plan = build_plan(d, k, method, &v3);
  std::vector<double> vals = reduce_moments(samples, plan, parallel);

  MomentSets out;
  out.method = method;
  size_t pos = 0;
  out.mV1.resize(3 * k + 1);
  out.mV1[0] = 1.0;
  for (int o = 1; o <= 3 * k; ++o) out.mV1[o] = vals[pos++];
  out.mV2.assign(d - 1, std::vector<double>(2 * k + 1));
  for (int i = 1; i < d; ++i)
    for (int o = 1; o <= 2 * k + 1; ++o) out.mV2[i - 1][o - 1] = vals[pos++];
  for (const V3PairIndices& pair : v3)
    for (const MomentIndex& idx : pair.indices) out.mV3[idx.v] = vals[pos++];
  return out;
}

}  // namespace

MomentSets sample_moments(const Eigen::MatrixXd& samples, int k, V3Method method) {
  return assemble_moment_sets(samples, k, method, true);
}

MomentSets sample_moments_serial(const Eigen::MatrixXd& samples, int k, V3Method method) {
  return assemble_moment_sets(samples, k, method, false);
}

MomentSets exact_moment_sets(const MixtureParams& params, V3Method method, bool with_mV3) {
  const int d = params.d;
  const int k = params.k;
  MomentSets out;
  out.method = method;
  out.mV1.resize(3 * k + 1);
  for (int o = 0; o <= 3 * k; ++o) out.mV1[o] = exact_univariate_moment(params, 0, o);
  out.mV2.assign(std::max(0, d - 1), std::vector<double>(2 * k + 1));
  for (int i = 1; i < d; ++i)
    for (int o = 1; o <= 2 * k + 1; ++o) out.mV2[i - 1][o - 1] = exact_univariate_moment(params, i, o);
  if (with_mV3 && d >= 2) {
    for (const V3PairIndices& pair : select_V3_indices(k, d, method)) {
      for (const MomentIndex& idx : pair.indices) {
        int ti = idx.v[pair.i], tj = idx.v[pair.j];
        double value = (tj == 1) ? mixed_moment(params, ti, pair.i, pair.j)
                                 : mixed_moment(params, tj, pair.j, pair.i);
        out.mV3[idx.v] = value;
      }
    }
  }
  return out;
}

SharedCovarianceMoments shared_covariance_sample_moments(const Eigen::MatrixXd& samples, int k) {
  if (samples.rows() < 1) throw std::invalid_argument("shared_covariance_sample_moments: sample is empty");
  const int d = static_cast<int>(samples.cols());

  MomentPlan plan;
  plan.max_power.assign(d, 0);
  auto push = [&plan](Monomial m) {
    for (auto& [dim, p] : m.factors) plan.max_power[dim] = std::max(plan.max_power[dim], p);
    plan.monomials.push_back(std::move(m));
  };
  for (int o = 1; o <= k; ++o) push({{{0, o}}});
  for (int i = 1; i < d; ++i) {
    push({{{i, 1}}});  // t = 0
    for (int t = 1; t <= k - 1; ++t) push({{{0, t}, {i, 1}}});
  }

  std::vector<double> vals = reduce_moments(samples, plan, true);
  SharedCovarianceMoments out;
  size_t pos = 0;
  out.mV1.resize(k);
  for (int o = 1; o <= k; ++o) out.mV1[o - 1] = vals[pos++];
  out.cross.assign(std::max(0, d - 1), std::vector<double>(k));
  for (int i = 1; i < d; ++i)
    for (int t = 0; t <= k - 1; ++t) out.cross[i - 1][t] = vals[pos++];
  return out;
}

SharedCovarianceMoments shared_covariance_exact_moments(const MixtureParams& params) {
  const int k = params.k;
  SharedCovarianceMoments out;
  out.mV1.resize(k);
  for (int o = 1; o <= k; ++o) out.mV1[o - 1] = exact_univariate_moment(params, 0, o);
  out.cross.assign(std::max(0, params.d - 1), std::vector<double>(k));
  for (int i = 1; i < params.d; ++i) {
    out.cross[i - 1][0] = exact_univariate_moment(params, i, 1);
    for (int t = 1; t <= k - 1; ++t) out.cross[i - 1][t] = mixed_moment(params, t, 0, i);
  }
  return out;
}

}  // namespace gmom
