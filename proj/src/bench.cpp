#include "gmom/bench.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "gmom/moments.hpp"
#include "gmom/rng.hpp"

namespace gmom {

MixtureParams generate_params(int d, int k, bool diagonal, std::uint64_t seed) {
  if (d < 1 || k < 1) throw std::invalid_argument("generate_params: d and k must be positive");
  Rng rng(seed);
  MixtureParams p;
  p.k = k;
  p.d = d;

  p.weights.resize(k);
  double sum = 0.0;
  for (int l = 0; l < k; ++l) {
    p.weights[l] = std::abs(rng.normal());
    sum += p.weights[l];
  }
  for (int l = 0; l < k; ++l) p.weights[l] /= sum;

  p.means.resize(k);
  for (int l = 0; l < k; ++l) {
    p.means[l] = Eigen::VectorXd(d);
    for (int j = 0; j < d; ++j) p.means[l](j) = rng.normal();
  }

  p.covariances.resize(k);
  for (int l = 0; l < k; ++l) {
    Eigen::MatrixXd m(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) m(r, c) = rng.normal();
    Eigen::MatrixXd cov = m * m.transpose();
    if (diagonal) cov = cov.diagonal().asDiagonal();
    p.covariances[l] = cov;
  }
  return p;
}

Eigen::MatrixXd sample_mixture(const MixtureParams& params, Eigen::Index n, std::uint64_t seed) {
  const int d = params.d;
  const int k = params.k;
  std::vector<Eigen::MatrixXd> chol(k);
  for (int l = 0; l < k; ++l) {
    Eigen::LLT<Eigen::MatrixXd> llt(params.covariances[l]);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("sample_mixture: covariance is not positive definite");
    chol[l] = llt.matrixL();
  }
  std::vector<double> cumw(k);
  std::partial_sum(params.weights.begin(), params.weights.end(), cumw.begin());

  Eigen::MatrixXd out(n, d);
  // Each row draws from its own seeded stream, so the result is identical
  // for any thread count.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 4096)
#endif
  for (Eigen::Index r = 0; r < n; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    double u = rng.uniform01();
    int comp = 0;
    while (comp + 1 < k && u > cumw[comp]) ++comp;
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    out.row(r) = (params.means[comp] + chol[comp] * z).transpose();
  }
  return out;
}

namespace {

double block_norm_weights(const MixtureParams& a, const MixtureParams& b,
                          const std::vector<int>& perm) {
  double s = 0.0;
  for (int l = 0; l < a.k; ++l) {
    double dlt = b.weights[perm[l]] - a.weights[l];
    s += dlt * dlt;
  }
  return std::sqrt(s);
}

double block_norm_means(const MixtureParams& a, const MixtureParams& b,
                        const std::vector<int>& perm) {
  double s = 0.0;
  for (int l = 0; l < a.k; ++l) s += (b.means[perm[l]] - a.means[l]).squaredNorm();
  return std::sqrt(s);
}

double block_norm_covs(const MixtureParams& a, const MixtureParams& b,
                       const std::vector<int>& perm) {
  double s = 0.0;
  for (int l = 0; l < a.k; ++l) s += (b.covariances[perm[l]] - a.covariances[l]).squaredNorm();
  return std::sqrt(s);
}

}  // namespace

ParamErrors compute_error(const MixtureParams& truth, const MixtureParams& estimate) {
  if (truth.k != estimate.k || truth.d != estimate.d)
    throw std::invalid_argument("compute_error: shape mismatch");
  const int k = truth.k;
  const int d = truth.d;

  std::vector<int> perm(k), best_perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  best_perm = perm;
  double best_w = std::numeric_limits<double>::infinity();
  double best_m = std::numeric_limits<double>::infinity();
  do {
    double w = block_norm_weights(truth, estimate, perm);
    if (w < best_w - 1e-15) {
      best_w = w;
      best_m = block_norm_means(truth, estimate, perm);
      best_perm = perm;
    } else if (w < best_w + 1e-15) {
      // Weight ties (uniform mixtures) break on the mean block.
      double m = block_norm_means(truth, estimate, perm);
      if (m < best_m) {
        best_m = m;
        best_perm = perm;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ParamErrors e;
  e.weight_error = block_norm_weights(truth, estimate, best_perm) / k;
  e.mean_error = block_norm_means(truth, estimate, best_perm) / (k * d);
  e.covariance_error = block_norm_covs(truth, estimate, best_perm) / (static_cast<double>(k) * d * d);
  return e;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TrialRecord run_trial(const ExperimentConfig& cfg, int d, long long n_samples,
                      std::uint64_t trial_seed) {
  TrialRecord rec;
  rec.d = d;
  rec.k = cfg.k;
  rec.n_samples = cfg.exact_moments ? -1 : n_samples;
  rec.seed = trial_seed;

  MixtureParams truth;
  EstimateOptions eopts;
  eopts.tracker.seed = mix_seed(trial_seed, 0x747261636bULL);
  eopts.tracker.parallel = false;  // trials themselves run concurrently
  eopts.repair_seed = mix_seed(trial_seed, 0x726570ULL);

  SolveReport report;
  if (cfg.shared_known_covariance) {
    // Uniform mixture, shared identity covariance: only the means vary.
    truth = generate_params(d, cfg.k, false, mix_seed(trial_seed, 1));
    truth.weights.assign(cfg.k, 1.0 / cfg.k);
    for (int l = 0; l < cfg.k; ++l) truth.covariances[l] = Eigen::MatrixXd::Identity(d, d);
    SharedCovarianceMoments m;
    if (cfg.exact_moments) {
      m = shared_covariance_exact_moments(truth);
    } else {
      Eigen::MatrixXd samples = sample_mixture(truth, n_samples, mix_seed(trial_seed, 2));
      m = shared_covariance_sample_moments(samples, cfg.k);
    }
    report = estimate_shared_known_covariance(d, cfg.k, Eigen::MatrixXd::Identity(d, d), m.mV1,
                                              m.cross, eopts);
  } else {
    truth = generate_params(d, cfg.k, cfg.diagonal_only, mix_seed(trial_seed, 1));
    std::optional<std::vector<double>> known;
    if (cfg.known_weights) known = truth.weights;
    MomentSets moments;
    if (cfg.exact_moments) {
      moments = exact_moment_sets(truth, cfg.method, !cfg.diagonal_only);
    } else {
      Eigen::MatrixXd samples = sample_mixture(truth, n_samples, mix_seed(trial_seed, 2));
      moments = sample_moments(samples, cfg.k, cfg.method);
      if (cfg.diagonal_only) moments.mV3.clear();
    }
    report = estimate_parameters(d, cfg.k, moments, known, eopts);
  }

  rec.elapsed_s = report.elapsed_s;
  rec.stage_failed = to_string(report.stage_failed);
  rec.timeout = report.elapsed_s > cfg.time_budget_s;
  rec.passed = report.params.has_value() && !rec.timeout;
  if (rec.passed) {
    ParamErrors e = compute_error(truth, *report.params);
    rec.weight_error = e.weight_error;
    rec.mean_error = e.mean_error;
    rec.covariance_error = e.covariance_error;
  }
  return rec;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  if (cfg.d_values.empty()) throw std::invalid_argument("run_experiment: no d values");
  if (!cfg.exact_moments && cfg.sample_sizes.empty())
    throw std::invalid_argument("run_experiment: no sample sizes");
  for (long long n : cfg.sample_sizes)
    if (n < 1) throw std::invalid_argument("run_experiment: sample sizes must be positive");

  // Pay the one-time weight-stage bootstrap before the trial loop so it is
  // not charged to (and serialized inside) the first trial.
  if (!cfg.known_weights && !cfg.shared_known_covariance && cfg.k >= 3)
    prewarm_weight_stage(cfg.k);

  std::vector<long long> sizes = cfg.exact_moments ? std::vector<long long>{-1} : cfg.sample_sizes;
  struct Cell {
    int d;
    long long n;
  };
  std::vector<Cell> cells;
  for (int d : cfg.d_values)
    for (long long n : sizes) cells.push_back({d, n});

  ExperimentResult result;
  result.trials.resize(cells.size() * cfg.trials);

  const long long total = static_cast<long long>(cells.size()) * cfg.trials;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (long long i = 0; i < total; ++i) {
    const size_t c = static_cast<size_t>(i) / cfg.trials;
    const int t = static_cast<int>(i % cfg.trials);
    std::uint64_t trial_seed =
        mix_seed(cfg.seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(t));
    result.trials[i] = run_trial(cfg, cells[c].d, cells[c].n, trial_seed);
  }

  for (size_t c = 0; c < cells.size(); ++c) {
    CellSummary s;
    s.d = cells[c].d;
    s.n_samples = cells[c].n;
    std::vector<double> we, me, ce, el;
    for (int t = 0; t < cfg.trials; ++t) {
      const TrialRecord& r = result.trials[c * cfg.trials + t];
      ++s.trials;
      if (r.timeout) ++s.timeouts;
      if (r.stage_failed == "dim1_system") ++s.dim1_failures;
      if (r.passed) {
        ++s.passes;
        we.push_back(r.weight_error);
        me.push_back(r.mean_error);
        ce.push_back(r.covariance_error);
        el.push_back(r.elapsed_s);
      }
    }
    s.median_weight_error = median_of(we);
    s.median_mean_error = median_of(me);
    s.median_covariance_error = median_of(ce);
    s.median_elapsed_s = median_of(el);
    result.summary.push_back(s);
  }
  return result;
}

}  // namespace gmom
