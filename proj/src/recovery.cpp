#include "gmom/recovery.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "gmom/linalg.hpp"
#include "gmom/moments.hpp"

namespace gmom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Univariate stage systems

struct StageSystem {
  PolySystem system;            // scaled equations
  SolutionLayout layout;
  std::vector<double> fixed_weights;  // attached to candidates when known
  bool has_selection = false;
  Poly selection_poly;          // unscaled, over the same unknowns
  double selection_value = 0.0;
};

std::vector<std::string> stage_unknown_names(const SolutionLayout& layout) {
  std::vector<std::string> names;
  if (layout.has_weights)
    for (int l = 0; l + 1 < layout.k; ++l) names.push_back("lambda" + std::to_string(l + 1));
  for (int l = 0; l < layout.k; ++l) names.push_back("mu" + std::to_string(l + 1));
  if (layout.has_variances)
    for (int l = 0; l < layout.k; ++l) names.push_back("sigma" + std::to_string(l + 1));
  return names;
}

double row_scale(double moment) { return 1.0 / std::max(1.0, std::abs(moment)); }

// Unknown-weights system: unknowns (lambda_1..lambda_{k-1}, mu, sigma) after
// eliminating lambda_k = 1 - sum via the simplex constraint; equations are
// the moment polynomials of orders 1..3k-1, each scaled by 1/max(1,|m|).
// moments holds orders 0..3k (selection present) or 0..3k-1.
StageSystem build_unknown_weights_stage(int k, const std::vector<double>& moments) {
  const size_t n_edge = static_cast<size_t>(3 * k);
  if (moments.size() != n_edge && moments.size() != n_edge + 1)
    throw std::invalid_argument("unknown-weights stage: mV1 must have 3k or 3k+1 entries");
  if (std::abs(moments[0] - 1.0) > 1e-6)
    throw std::invalid_argument("unknown-weights stage: m_0 must equal 1");

  const UnivariateMomentPolys& mpolys = mixture_moment_polys(k, 3 * k);
  const int nv_full = mpolys.nvars();
  Poly last_weight = Poly::constant(nv_full, 1.0);
  for (int l = 0; l + 1 < k; ++l)
    last_weight = last_weight - Poly::variable(nv_full, mpolys.lambda_var(l));

  const int nv = 3 * k - 1;
  std::vector<int> keep(nv_full, -1);
  for (int l = 0; l + 1 < k; ++l) keep[mpolys.lambda_var(l)] = l;
  for (int l = 0; l < k; ++l) keep[mpolys.mu_var(l)] = (k - 1) + l;
  for (int l = 0; l < k; ++l) keep[mpolys.sigma_var(l)] = (k - 1) + k + l;
  std::vector<double> unused(nv_full, 0.0);

  auto reduced = [&](int order) {
    return mpolys.polynomials[order]
        .substitute(mpolys.lambda_var(k - 1), last_weight)
        .partial_evaluate(keep, nv, unused);
  };

  StageSystem st;
  st.layout = {k, true, true};
  st.system.unknowns = stage_unknown_names(st.layout);
  for (int i = 1; i <= 3 * k - 1; ++i)
    st.system.polys.push_back((reduced(i) - moments[i]) * row_scale(moments[i]));
  if (moments.size() == n_edge + 1) {
    st.has_selection = true;
    st.selection_poly = reduced(3 * k);
    st.selection_value = moments[n_edge];
  }
  return st;
}

// Known-weights system in (mu, sigma): equations of orders 1..2k, selection
// via order 2k+1 when available. moments holds orders 1..(2k or 2k+1).
StageSystem build_known_weights_stage(int k, const std::vector<double>& weights,
                                      const std::vector<double>& moments) {
  if (moments.size() < static_cast<size_t>(2 * k))
    throw std::invalid_argument("known-weights stage: needs moments of orders 1..2k");

  const UnivariateMomentPolys& mpolys = mixture_moment_polys(k, 2 * k + 1);
  const int nv_full = mpolys.nvars();
  const int nv = 2 * k;
  std::vector<int> keep(nv_full, -1);
  std::vector<double> fixed(nv_full, 0.0);
  for (int l = 0; l < k; ++l) {
    fixed[mpolys.lambda_var(l)] = weights[l];
    keep[mpolys.mu_var(l)] = l;
    keep[mpolys.sigma_var(l)] = k + l;
  }
  auto reduced = [&](int order) {
    return mpolys.polynomials[order].partial_evaluate(keep, nv, fixed);
  };

  StageSystem st;
  st.layout = {k, false, true};
  st.fixed_weights = weights;
  st.system.unknowns = stage_unknown_names(st.layout);
  for (int i = 1; i <= 2 * k; ++i)
    st.system.polys.push_back((reduced(i) - moments[i - 1]) * row_scale(moments[i - 1]));
  if (moments.size() >= static_cast<size_t>(2 * k + 1)) {
    st.has_selection = true;
    st.selection_poly = reduced(2 * k + 1);
    st.selection_value = moments[2 * k];
  }
  return st;
}

// Uniform-weights, known-variance system in mu alone (first step of the
// shared-covariance pipeline): equations of orders 1..k.
StageSystem build_known_variance_stage(int k, double variance,
                                       const std::vector<double>& moments) {
  if (moments.size() < static_cast<size_t>(k))
    throw std::invalid_argument("known-variance stage: needs moments of orders 1..k");

  const UnivariateMomentPolys& mpolys = mixture_moment_polys(k, std::max(1, k));
  const int nv_full = mpolys.nvars();
  std::vector<int> keep(nv_full, -1);
  std::vector<double> fixed(nv_full, 0.0);
  for (int l = 0; l < k; ++l) {
    fixed[mpolys.lambda_var(l)] = 1.0 / k;
    fixed[mpolys.sigma_var(l)] = variance;
    keep[mpolys.mu_var(l)] = l;
  }

  StageSystem st;
  st.layout = {k, false, false};
  st.fixed_weights.assign(k, 1.0 / k);
  st.system.unknowns = stage_unknown_names(st.layout);
  for (int i = 1; i <= k; ++i) {
    Poly p = mpolys.polynomials[i].partial_evaluate(keep, k, fixed);
    st.system.polys.push_back((p - moments[i - 1]) * row_scale(moments[i - 1]));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Seeded weight stage: the k >= 3 unknown-weights system has total degree
// (3k)! / 1 (362880 at k = 3), far past the tracker guard. We solve one
// generic reference system of the same shape by total degree once, cache its
// solution fiber, and track every later instance from that fiber.

struct WeightFiber {
  PolySystem reference;
  std::vector<std::vector<Complex>> starts;
};

constexpr int kFiberCacheVersion = 1;
constexpr std::uint64_t kFiberParamSeed = 0xf1be0000u;
constexpr std::uint64_t kFiberGammaSeed = 0xf1be1111u;

std::filesystem::path fiber_cache_path(int k) {
  const char* env = std::getenv("GMOM_CACHE_DIR");
  std::filesystem::path dir = env ? std::filesystem::path(env)
                                  : std::filesystem::path(".gmom_cache");
  return dir / ("weight_fiber_k" + std::to_string(k) + "_v" +
                std::to_string(kFiberCacheVersion) + ".json");
}

std::vector<double> reference_moments(int k) {
  Rng rng(mix_seed(kFiberParamSeed, static_cast<std::uint64_t>(k)));
  std::vector<double> w(k), mu(k), var(k);
  double wsum = 0.0;
  for (int l = 0; l < k; ++l) {
    w[l] = std::abs(rng.normal());
    wsum += w[l];
  }
  for (int l = 0; l < k; ++l) w[l] /= wsum;
  for (int l = 0; l < k; ++l) mu[l] = rng.normal();
  for (int l = 0; l < k; ++l) var[l] = 0.5 + std::abs(rng.normal());

  std::vector<double> m(3 * k + 1, 0.0);
  m[0] = 1.0;
  for (int l = 0; l < k; ++l) {
    std::vector<double> g = gaussian_moments_1d(mu[l], var[l], 3 * k);
    for (int i = 1; i <= 3 * k; ++i) m[i] += w[l] * g[i];
  }
  m.resize(3 * k);  // orders 0..3k-1: the square system only
  return m;
}

bool load_fiber(const std::filesystem::path& path, int k, WeightFiber& out) {
  std::ifstream in(path);
  if (!in) return false;
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("version").get<int>() != kFiberCacheVersion) return false;
    if (j.at("k").get<int>() != k) return false;
    std::vector<double> m = j.at("moments").get<std::vector<double>>();
    StageSystem st = build_unknown_weights_stage(k, m);
    out.reference = std::move(st.system);
    out.starts.clear();
    for (const auto& pt : j.at("fiber")) {
      std::vector<Complex> z;
      for (const auto& c : pt) z.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
      if (static_cast<int>(z.size()) != out.reference.num_unknowns()) return false;
      out.starts.push_back(std::move(z));
    }
    return !out.starts.empty();
  } catch (...) {
    return false;
  }
}

void save_fiber(const std::filesystem::path& path, int k, const std::vector<double>& moments,
                const WeightFiber& fiber) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  nlohmann::json j;
  j["version"] = kFiberCacheVersion;
  j["k"] = k;
  j["moments"] = moments;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& z : fiber.starts) {
    nlohmann::json pt = nlohmann::json::array();
    for (const Complex& c : z) pt.push_back({c.real(), c.imag()});
    pts.push_back(std::move(pt));
  }
  j["fiber"] = std::move(pts);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream outf(tmp);
    outf << j;
  }
  std::filesystem::rename(tmp, path, ec);
}

WeightFiber build_fiber(int k) {
  std::vector<double> m = reference_moments(k);
  StageSystem st = build_unknown_weights_stage(k, m);

  TrackerOptions topts;
  topts.total_degree_guard = 1e7;  // one-time bootstrap of the reference system
  topts.seed = kFiberGammaSeed;
  topts.parallel = true;

  ComplexSolutionSet sols = solve_square_system(st.system, topts);
  WeightFiber fiber;
  fiber.reference = st.system;
  fiber.starts = sols.points;
  save_fiber(fiber_cache_path(k), k, m, fiber);
  return fiber;
}

const WeightFiber& weight_fiber(int k) {
  if (k > 3)
    throw std::invalid_argument(
        "unknown-weights recovery supports k <= 3 (the k = " + std::to_string(k) +
        " univariate system is past desk scale)");
  static std::mutex mu;
  static std::map<int, WeightFiber> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;

  WeightFiber fiber;
  if (!load_fiber(fiber_cache_path(k), k, fiber)) fiber = build_fiber(k);
  return cache.emplace(k, std::move(fiber)).first->second;
}

// ---------------------------------------------------------------------------
// Stage solving

std::vector<CandidateSolution> solve_stage(const StageSystem& st, const EstimateOptions& opts) {
  ComplexSolutionSet sols;
  try {
    if (st.layout.has_weights && st.layout.k >= 3 && opts.seeded_weight_stage) {
      const WeightFiber& fiber = weight_fiber(st.layout.k);
      sols = track_from_starts(st.system, fiber.reference, fiber.starts, opts.tracker);
    } else {
      sols = solve_square_system(st.system, opts.tracker);
    }
  } catch (const AllPathsDivergedError&) {
    return {};
  }
  return filter_statistical(sols, st.layout, st.fixed_weights);
}

std::vector<double> candidate_vector(const CandidateSolution& c, const SolutionLayout& layout) {
  std::vector<double> x;
  if (layout.has_weights)
    for (int l = 0; l + 1 < layout.k; ++l) x.push_back(c.weights[l]);
  x.insert(x.end(), c.means.begin(), c.means.end());
  if (layout.has_variances) x.insert(x.end(), c.variances.begin(), c.variances.end());
  return x;
}

// Moment equations consumed by a pipeline run, for the residual report.
struct UsedMoment {
  int dim = 0;                 // univariate equations
  int order = 0;
  std::vector<int> cross_idx;  // non-empty for off-diagonal equations
  double value = 0.0;
};

std::vector<double> pipeline_residuals(const MixtureParams& params,
                                       const std::vector<UsedMoment>& used) {
  std::vector<double> res;
  res.reserve(used.size());
  for (const UsedMoment& u : used) {
    double f;
    if (u.cross_idx.empty()) {
      f = exact_univariate_moment(params, u.dim, u.order);
    } else {
      int i = -1, j = -1;
      for (size_t p = 0; p < u.cross_idx.size(); ++p) {
        if (u.cross_idx[p] == 0) continue;
        if (i < 0) i = static_cast<int>(p);
        else j = static_cast<int>(p);
      }
      int ti = u.cross_idx[i], tj = u.cross_idx[j];
      f = (tj == 1) ? mixed_moment(params, ti, i, j) : mixed_moment(params, tj, j, i);
    }
    res.push_back(std::abs(f - u.value));
  }
  return res;
}

SolveReport run_pipeline(const MomentProvider& mp, int leading,
                         const std::optional<std::vector<double>>& known_weights,
                         const EstimateOptions& opts) {
  const auto t0 = Clock::now();
  SolveReport rep;
  const int d = mp.d();
  const int k = mp.k();
  if (d < 1 || k < 1) throw std::invalid_argument("estimate: d and k must be positive");
  if (known_weights && static_cast<int>(known_weights->size()) != k)
    throw std::invalid_argument("estimate: known_weights must have k entries");

  std::vector<UsedMoment> used;

  // Weight-determining stage on the leading dimension. With known weights
  // this dimension is handled like the others with the 2k-equation system.
  std::vector<double> mlead = mp.leading_moments(leading);
  StageSystem lead_stage;
  if (known_weights) {
    size_t avail = std::min(mlead.size() - 1, static_cast<size_t>(2 * k + 1));
    std::vector<double> m2(mlead.begin() + 1, mlead.begin() + 1 + avail);
    lead_stage = build_known_weights_stage(k, *known_weights, m2);
    for (size_t o = 1; o <= avail; ++o)
      used.push_back({leading, static_cast<int>(o), {}, mlead[o]});
  } else {
    lead_stage = build_unknown_weights_stage(k, mlead);
    for (size_t o = 1; o < mlead.size(); ++o)
      used.push_back({leading, static_cast<int>(o), {}, mlead[o]});
  }

  std::vector<CandidateSolution> candidates = solve_stage(lead_stage, opts);
  rep.candidates_found = static_cast<int>(candidates.size());
  if (candidates.empty()) {
    rep.stage_failed = {FailedStage::dim1_system, leading + 1};
    rep.elapsed_s = seconds_since(t0);
    return rep;
  }
  std::size_t chosen = 0;
  if (lead_stage.has_selection && candidates.size() > 1)
    chosen = select_by_extra_moment(candidates, lead_stage.layout, lead_stage.selection_poly,
                                    lead_stage.selection_value);
  const CandidateSolution lead_sol = candidates[chosen];
  const std::vector<double> weights = known_weights ? *known_weights : lead_sol.weights;

  std::vector<Eigen::VectorXd> means(k, Eigen::VectorXd::Zero(d));
  std::vector<Eigen::MatrixXd> sigmas(k, Eigen::MatrixXd::Zero(d, d));
  for (int l = 0; l < k; ++l) {
    means[l](leading) = lead_sol.means[l];
    sigmas[l](leading, leading) = lead_sol.variances[l];
  }

  // Remaining diagonal parameters, dimension by dimension.
  for (int i = 0; i < d; ++i) {
    if (i == leading) continue;
    std::vector<double> m2 = mp.secondary_moments(i);
    StageSystem stage = build_known_weights_stage(k, weights, m2);
    for (size_t o = 1; o <= m2.size(); ++o)
      used.push_back({i, static_cast<int>(o), {}, m2[o - 1]});
    std::vector<CandidateSolution> c = solve_stage(stage, opts);
    if (c.empty()) {
      rep.stage_failed = {FailedStage::dim_i_system, i + 1};
      rep.elapsed_s = seconds_since(t0);
      return rep;
    }
    std::size_t pick = 0;
    if (stage.has_selection && c.size() > 1)
      pick = select_by_extra_moment(c, stage.layout, stage.selection_poly, stage.selection_value);
    for (int l = 0; l < k; ++l) {
      means[l](i) = c[pick].means[l];
      sigmas[l](i, i) = c[pick].variances[l];
    }
  }

  // Off-diagonal covariance entries from the linear systems.
  std::map<std::vector<int>, double> cross = mp.cross_moments();
  if (!cross.empty() && d >= 2) {
    for (const V3PairIndices& pair : select_V3_indices(k, d, mp.method())) {
      Eigen::MatrixXd A(k, k);
      Eigen::VectorXd b(k);
      int row = 0;
      for (const MomentIndex& idx : pair.indices) {
        int ti = idx.v[pair.i], tj = idx.v[pair.j];
        int lead_dim = (tj == 1) ? pair.i : pair.j;
        int other_dim = (tj == 1) ? pair.j : pair.i;
        int t = (tj == 1) ? ti : tj;
        auto it = cross.find(idx.v);
        if (it == cross.end()) {
          std::ostringstream os;
          os << "estimate: mV3 is missing the index required by the " << to_string(mp.method())
             << " method for pair (" << pair.i + 1 << ", " << pair.j + 1 << ")";
          throw std::invalid_argument(os.str());
        }
        used.push_back({0, 0, idx.v, it->second});
        double rhs = it->second;
        for (int l = 0; l < k; ++l) {
          std::vector<double> g =
              gaussian_moments_1d(means[l](lead_dim), sigmas[l](lead_dim, lead_dim), t);
          A(row, l) = t * weights[l] * g[t - 1];
          rhs -= weights[l] * means[l](other_dim) * g[t];
        }
        b(row) = rhs;
        ++row;
      }
      try {
        LinearSolveResult sol = solve_linear(A, b);
        for (int l = 0; l < k; ++l) {
          sigmas[l](pair.i, pair.j) = sol.x(l);
          sigmas[l](pair.j, pair.i) = sol.x(l);
        }
      } catch (const SingularMatrixError&) {
        rep.stage_failed = {FailedStage::offdiagonal_system, 0};
        rep.elapsed_s = seconds_since(t0);
        return rep;
      }
    }
  }

  MixtureParams params;
  params.k = k;
  params.d = d;
  params.weights = weights;
  params.means = std::move(means);
  Rng repair_rng(mix_seed(opts.repair_seed, static_cast<std::uint64_t>(leading)));
  params.covariances.reserve(k);
  for (int l = 0; l < k; ++l) params.covariances.push_back(repair_psd(sigmas[l], repair_rng));

  rep.residuals = pipeline_residuals(params, used);
  rep.params = std::move(params);
  rep.elapsed_s = seconds_since(t0);
  return rep;
}

// Provider over a fixed MomentSets; only dimension 0 can lead.
class MomentSetsProvider : public MomentProvider {
 public:
  MomentSetsProvider(int d, int k, const MomentSets& m) : d_(d), k_(k), m_(m) {}
  int d() const override { return d_; }
  int k() const override { return k_; }
  V3Method method() const override { return m_.method; }
  std::vector<double> leading_moments(int n) const override {
    if (n != 0)
      throw std::invalid_argument(
          "cycling past dimension 1 needs sample access; a stored MomentSets only carries "
          "dimension-1 moments to order 3k");
    return m_.mV1;
  }
  std::vector<double> secondary_moments(int i) const override {
    if (i == 0) {
      size_t avail = std::min(m_.mV1.size() - 1, static_cast<size_t>(2 * k_ + 1));
      return std::vector<double>(m_.mV1.begin() + 1, m_.mV1.begin() + 1 + avail);
    }
    return m_.mV2.at(i - 1);
  }
  std::map<std::vector<int>, double> cross_moments() const override { return m_.mV3; }

 private:
  int d_, k_;
  const MomentSets& m_;
};

}  // namespace

// ---------------------------------------------------------------------------

std::vector<CandidateSolution> filter_statistical(const ComplexSolutionSet& solutions,
                                                  const SolutionLayout& layout,
                                                  const std::vector<double>& fixed_weights) {
  const int k = layout.k;
  std::vector<CandidateSolution> out;
  for (const std::vector<Complex>& z : solutions.points) {
    bool real = true;
    for (const Complex& c : z) {
      if (std::abs(c.imag()) > kImagTol) {
        real = false;
        break;
      }
    }
    if (!real) continue;

    CandidateSolution cand;
    size_t pos = 0;
    if (layout.has_weights) {
      cand.weights.resize(k);
      double sum = 0.0;
      for (int l = 0; l + 1 < k; ++l) {
        cand.weights[l] = z[pos++].real();
        sum += cand.weights[l];
      }
      cand.weights[k - 1] = 1.0 - sum;
      bool positive = true;
      for (double w : cand.weights)
        if (!(w > 0.0)) positive = false;
      if (!positive) continue;
    } else if (!fixed_weights.empty()) {
      cand.weights = fixed_weights;
    }
    cand.means.resize(k);
    for (int l = 0; l < k; ++l) cand.means[l] = z[pos++].real();
    if (layout.has_variances) {
      cand.variances.resize(k);
      bool positive = true;
      for (int l = 0; l < k; ++l) {
        cand.variances[l] = z[pos++].real();
        if (!(cand.variances[l] > 0.0)) positive = false;
      }
      if (!positive) continue;
    }
    out.push_back(std::move(cand));
  }

  std::sort(out.begin(), out.end(), [](const CandidateSolution& a, const CandidateSolution& b) {
    if (a.weights != b.weights) return a.weights < b.weights;
    if (a.means != b.means) return a.means < b.means;
    return a.variances < b.variances;
  });
  return out;
}

std::size_t select_by_extra_moment(const std::vector<CandidateSolution>& candidates,
                                   const SolutionLayout& layout, const Poly& extra_poly,
                                   double extra_value) {
  if (candidates.empty())
    throw NoMeaningfulSolutionError("no statistically meaningful solution");
  std::size_t best = 0;
  double best_res = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::vector<double> x = candidate_vector(candidates[c], layout);
    double r = std::abs(extra_poly.eval(std::span<const double>(x)) - extra_value);
    if (r < best_res) {
      best_res = r;
      best = c;
    }
  }
  return best;
}

Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& S, Rng& rng) {
  SymEigResult eig = sym_eig(S);
  bool repaired = false;
  Eigen::VectorXd w = eig.eigenvalues;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) <= 0.0) {
      double z = 0.0;
      while (z == 0.0) z = rng.normal(0.0, 1e-3);
      w(i) = std::abs(z);
      repaired = true;
    }
  }
  if (!repaired) return S;
  return eig.eigenvectors * w.asDiagonal() * eig.eigenvectors.transpose();
}

std::string to_string(const StageFailed& s) {
  switch (s.stage) {
    case FailedStage::none:
      return "none";
    case FailedStage::dim1_system:
      return "dim1_system";
    case FailedStage::dim_i_system:
      return "dim_i_system(" + std::to_string(s.dim) + ")";
    case FailedStage::offdiagonal_system:
      return "offdiagonal_system";
  }
  return "none";
}

StageFailed stage_failed_from_string(const std::string& s) {
  if (s == "none") return {FailedStage::none, 0};
  if (s == "dim1_system") return {FailedStage::dim1_system, 1};
  if (s == "offdiagonal_system") return {FailedStage::offdiagonal_system, 0};
  if (s.rfind("dim_i_system(", 0) == 0) {
    int dim = std::atoi(s.c_str() + std::string("dim_i_system(").size());
    return {FailedStage::dim_i_system, dim};
  }
  throw std::invalid_argument("unknown stage tag '" + s + "'");
}

SolveReport estimate_parameters(int d, int k, const MomentSets& moments,
                                const std::optional<std::vector<double>>& known_weights,
                                const EstimateOptions& opts) {
  if (d >= 2 && static_cast<int>(moments.mV2.size()) != d - 1)
    throw std::invalid_argument("estimate_parameters: mV2 must have d-1 rows");
  MomentSetsProvider provider(d, k, moments);
  return run_pipeline(provider, 0, known_weights, opts);
}

SolveReport estimate_with_cycling(const MomentProvider& provider,
                                  const std::optional<std::vector<double>>& known_weights,
                                  const EstimateOptions& opts) {
  const int d = provider.d();
  if (d < 2)
    throw std::invalid_argument("estimate_with_cycling: needs d >= 2 for an alternative dimension");
  SolveReport last;
  for (int n = 0; n < d; ++n) {
    last = run_pipeline(provider, n, known_weights, opts);
    if (last.stage_failed.ok()) return last;
    if (last.stage_failed.stage == FailedStage::offdiagonal_system) return last;
  }
  return last;
}

SolveReport estimate_shared_known_covariance(int d, int k, const Eigen::MatrixXd& sigma,
                                             const std::vector<double>& mV1,
                                             const std::vector<std::vector<double>>& cross,
                                             const EstimateOptions& opts) {
  const auto t0 = Clock::now();
  if (sigma.rows() != d || sigma.cols() != d)
    throw std::invalid_argument("estimate_shared_known_covariance: sigma must be d x d");
  if (static_cast<int>(mV1.size()) < k)
    throw std::invalid_argument("estimate_shared_known_covariance: mV1 must hold orders 1..k");
  if (static_cast<int>(cross.size()) != std::max(0, d - 1))
    throw std::invalid_argument("estimate_shared_known_covariance: cross needs d-1 rows");

  SolveReport rep;
  std::vector<UsedMoment> used;
  StageSystem stage = build_known_variance_stage(k, sigma(0, 0), mV1);
  for (int o = 1; o <= k; ++o) used.push_back({0, o, {}, mV1[o - 1]});

  std::vector<CandidateSolution> candidates = solve_stage(stage, opts);
  rep.candidates_found = static_cast<int>(candidates.size());
  if (candidates.empty()) {
    rep.stage_failed = {FailedStage::dim1_system, 1};
    rep.elapsed_s = seconds_since(t0);
    return rep;
  }
  const CandidateSolution& sol = candidates.front();

  std::vector<Eigen::VectorXd> means(k, Eigen::VectorXd::Zero(d));
  for (int l = 0; l < k; ++l) means[l](0) = sol.means[l];

  // Remaining mean coordinates from the k x k linear systems; rows are the
  // moments m_{t e_1 + e_i}, t = 0..k-1, with the covariance terms known.
  for (int i = 1; i < d; ++i) {
    Eigen::MatrixXd A(k, k);
    Eigen::VectorXd b(k);
    for (int t = 0; t < k; ++t) {
      std::vector<int> idx(d, 0);
      idx[0] = t;
      idx[i] = 1;
      used.push_back({0, 0, idx, cross[i - 1][t]});
      double rhs = cross[i - 1][t];
      for (int l = 0; l < k; ++l) {
        std::vector<double> g = gaussian_moments_1d(means[l](0), sigma(0, 0), std::max(1, t));
        A(t, l) = g[t] / k;
        if (t >= 1) rhs -= (1.0 / k) * t * sigma(0, i) * g[t - 1];
      }
      b(t) = rhs;
    }
    try {
      LinearSolveResult lin = solve_linear(A, b);
      for (int l = 0; l < k; ++l) means[l](i) = lin.x(l);
    } catch (const SingularMatrixError&) {
      rep.stage_failed = {FailedStage::dim_i_system, i + 1};
      rep.elapsed_s = seconds_since(t0);
      return rep;
    }
  }

  MixtureParams params;
  params.k = k;
  params.d = d;
  params.weights.assign(k, 1.0 / k);
  params.means = std::move(means);
  params.covariances.assign(k, sigma);

  // Residuals: cross entries with t = 0 are plain first moments of dim i.
  for (UsedMoment& u : used) {
    if (!u.cross_idx.empty()) {
      int nonzero = 0;
      for (int e : u.cross_idx) nonzero += (e != 0) ? 1 : 0;
      if (nonzero == 1) {
        for (size_t p = 0; p < u.cross_idx.size(); ++p)
          if (u.cross_idx[p] != 0) u.dim = static_cast<int>(p);
        u.order = 1;
        u.cross_idx.clear();
      }
    }
  }
  rep.residuals = pipeline_residuals(params, used);
  rep.params = std::move(params);
  rep.elapsed_s = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Providers

namespace {

// Plain univariate power sums of one column, blocked pairwise like the main
// kernel (serial: one column at a time is cheap).
std::vector<double> column_moments(const Eigen::MatrixXd& samples, int dim, int max_order) {
  const Eigen::Index n = samples.rows();
  constexpr Eigen::Index kBlock = 4096;
  const Eigen::Index nblocks = (n + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> partial(nblocks, std::vector<double>(max_order + 1, 0.0));
  for (Eigen::Index bidx = 0; bidx < nblocks; ++bidx) {
    auto& acc = partial[bidx];
    Eigen::Index hi = std::min(n, (bidx + 1) * kBlock);
    for (Eigen::Index r = bidx * kBlock; r < hi; ++r) {
      double x = samples(r, dim);
      double p = 1.0;
      acc[0] += 1.0;
      for (int o = 1; o <= max_order; ++o) {
        p *= x;
        acc[o] += p;
      }
    }
  }
  for (Eigen::Index width = nblocks; width > 1;) {
    Eigen::Index half = (width + 1) / 2;
    for (Eigen::Index b = 0; b + half < width; ++b)
      for (int o = 0; o <= max_order; ++o) partial[b][o] += partial[b + half][o];
    width = half;
  }
  std::vector<double> m(max_order + 1);
  for (int o = 0; o <= max_order; ++o) m[o] = partial[0][o] / static_cast<double>(n);
  m[0] = 1.0;
  return m;
}

}  // namespace

SampleMomentProvider::SampleMomentProvider(Eigen::MatrixXd samples, int k, V3Method method,
                                           bool with_mV3)
    : samples_(std::move(samples)), k_(k), method_(method), with_mV3_(with_mV3) {
  if (samples_.rows() < 1) throw std::invalid_argument("SampleMomentProvider: sample is empty");
}

int SampleMomentProvider::d() const { return static_cast<int>(samples_.cols()); }

std::vector<double> SampleMomentProvider::leading_moments(int n) const {
  return column_moments(samples_, n, 3 * k_);
}

std::vector<double> SampleMomentProvider::secondary_moments(int i) const {
  std::vector<double> m = column_moments(samples_, i, 2 * k_ + 1);
  return std::vector<double>(m.begin() + 1, m.end());
}

std::map<std::vector<int>, double> SampleMomentProvider::cross_moments() const {
  if (!with_mV3_ || d() < 2) return {};
  return sample_moments(samples_, k_, method_).mV3;
}

ExactMomentProvider::ExactMomentProvider(MixtureParams params, V3Method method, bool with_mV3)
    : params_(std::move(params)), method_(method), with_mV3_(with_mV3) {}

std::vector<double> ExactMomentProvider::leading_moments(int n) const {
  std::vector<double> m(3 * params_.k + 1);
  for (int o = 0; o <= 3 * params_.k; ++o) m[o] = exact_univariate_moment(params_, n, o);
  return m;
}

std::vector<double> ExactMomentProvider::secondary_moments(int i) const {
  std::vector<double> m(2 * params_.k + 1);
  for (int o = 1; o <= 2 * params_.k + 1; ++o) m[o - 1] = exact_univariate_moment(params_, i, o);
  return m;
}

std::map<std::vector<int>, double> ExactMomentProvider::cross_moments() const {
  if (!with_mV3_ || params_.d < 2) return {};
  return exact_moment_sets(params_, method_, true).mV3;
}

void prewarm_weight_stage(int k) {
  if (k >= 3) weight_fiber(k);
}

}  // namespace gmom
