#include "gmom/homotopy.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "gmom/rng.hpp"

namespace gmom {

namespace {

// ---------------------------------------------------------------------------
// Dense complex LU with partial pivoting on flat row-major storage.

bool lu_factor(Complex* a, int n, int* piv, double* cond_proxy = nullptr) {
  double max_pivot = 0.0, min_pivot = 0.0;
  for (int c = 0; c < n; ++c) {
    int best = c;
    double best_mag = std::norm(a[c * n + c]);
    for (int r = c + 1; r < n; ++r) {
      double mag = std::norm(a[r * n + c]);
      if (mag > best_mag) {
        best_mag = mag;
        best = r;
      }
    }
    piv[c] = best;
    if (best != c)
      for (int j = 0; j < n; ++j) std::swap(a[c * n + j], a[best * n + j]);
    double mag = std::sqrt(best_mag);
    if (c == 0) {
      max_pivot = min_pivot = mag;
    } else {
      max_pivot = std::max(max_pivot, mag);
      min_pivot = std::min(min_pivot, mag);
    }
    if (!(mag > 0.0) || !std::isfinite(mag)) return false;
    Complex inv_p = 1.0 / a[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      Complex f = a[r * n + c] * inv_p;
      a[r * n + c] = f;
      for (int j = c + 1; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
    }
  }
  if (cond_proxy) *cond_proxy = (min_pivot > 0.0) ? max_pivot / min_pivot : 1e300;
  return min_pivot > 1e-150 * std::max(1.0, max_pivot);
}

void lu_solve(const Complex* lu, const int* piv, int n, Complex* b) {
  // All interchanges first: the stored L columns already reflect the later
  // row swaps, so they cannot be interleaved with the substitution.
  for (int c = 0; c < n; ++c)
    if (piv[c] != c) std::swap(b[c], b[piv[c]]);
  for (int c = 0; c < n; ++c)
    for (int r = c + 1; r < n; ++r) b[r] -= lu[r * n + c] * b[c];
  for (int r = n - 1; r >= 0; --r) {
    for (int j = r + 1; j < n; ++j) b[r] -= lu[r * n + j] * b[j];
    b[r] /= lu[r * n + r];
  }
}

double max_abs(const Complex* z, int n) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, std::abs(z[i]));
  return m;
}

// A step-size collapse out at this magnitude is a path heading to infinity
// (the crawl toward the hard divergence bound would waste thousands of
// steps), so it is classified as divergence, not a stall worth retrying.
constexpr double kStallDivergesAbove = 1e4;

// Scratch buffers reused across the steps of one path.
struct Workspace {
  Workspace(int n, int scratch_len)
      : n(n), z(n), zc(n), h(n), fval(n), gval(n), jf(n * n), jg(n * n), hj(n * n), rhs(n),
        k1(n), k2(n), k3(n), k4(n), ztmp(n), piv(n), scratch(scratch_len),
        lu(n * n), lu_piv(n) {}
  int n;
  std::vector<Complex> z, zc, h, fval, gval, jf, jg, hj, rhs;
  std::vector<Complex> k1, k2, k3, k4, ztmp;
  std::vector<int> piv;
  std::vector<Complex> scratch;
  // Factored Jacobian left by the last successful corrector iteration,
  // reusable by the next Euler prediction from the same point.
  std::vector<Complex> lu;
  std::vector<int> lu_piv;
  bool lu_valid = false;
};

class Homotopy {
 public:
  Homotopy(const CompiledSystem& target, const CompiledSystem& start_sys, Complex gamma)
      : f_(target), g_(start_sys), gamma_(gamma),
        scratch_len_(std::max(target.scratch_size(), start_sys.scratch_size())) {}

  int scratch_len() const { return scratch_len_; }

  // H(z, s) and dH/dz at fixed s.
  void eval_h(Workspace& w, const Complex* z, double s, bool with_jac) const {
    const int n = w.n;
    Complex cg = (1.0 - s) * gamma_;
    if (with_jac) {
      f_.eval_with_jacobian(z, w.fval.data(), w.jf.data(), w.scratch.data());
      g_.eval_with_jacobian(z, w.gval.data(), w.jg.data(), w.scratch.data());
      for (int i = 0; i < n * n; ++i) w.hj[i] = cg * w.jg[i] + s * w.jf[i];
    } else {
      f_.eval(z, w.fval.data(), w.scratch.data());
      g_.eval(z, w.gval.data(), w.scratch.data());
    }
    for (int i = 0; i < n; ++i) w.h[i] = cg * w.gval[i] + s * w.fval[i];
  }

  // Davidenko right-hand side dz/ds = -Hz^{-1} (F - gamma G); false on a
  // singular Jacobian.
  bool tangent(Workspace& w, const Complex* z, double s, Complex* out) const {
    eval_h(w, z, s, true);
    if (!lu_factor(w.hj.data(), w.n, w.piv.data())) return false;
    for (int i = 0; i < w.n; ++i) out[i] = -(w.fval[i] - gamma_ * w.gval[i]);
    lu_solve(w.hj.data(), w.piv.data(), w.n, out);
    return true;
  }

  // Same tangent but through an already-factored Jacobian at (z, s).
  void tangent_with_lu(Workspace& w, const Complex* z, Complex* out) const {
    f_.eval(z, w.fval.data(), w.scratch.data());
    g_.eval(z, w.gval.data(), w.scratch.data());
    for (int i = 0; i < w.n; ++i) out[i] = -(w.fval[i] - gamma_ * w.gval[i]);
    lu_solve(w.lu.data(), w.lu_piv.data(), w.n, out);
  }

  const CompiledSystem& target() const { return f_; }
  Complex gamma() const { return gamma_; }

 private:
  const CompiledSystem& f_;
  const CompiledSystem& g_;
  Complex gamma_;
  int scratch_len_;
};

// Newton refinement against the target system at s = 1; returns the best
// residual reached and sets the singular flag from the Jacobian condition
// proxy at the endpoint.
void refine_endpoint(const CompiledSystem& f, Workspace& w, PathResult& res,
                     const TrackerOptions& opts) {
  const int n = w.n;
  std::vector<Complex> best = w.z;
  f.eval(w.z.data(), w.fval.data(), w.scratch.data());
  double best_res = max_abs(w.fval.data(), n);
  double cond = 0.0;
  int worse_streak = 0;

  for (int it = 0; it < 30 && best_res > opts.final_refine_tol; ++it) {
    f.eval_with_jacobian(w.z.data(), w.fval.data(), w.jf.data(), w.scratch.data());
    if (!lu_factor(w.jf.data(), n, w.piv.data(), &cond)) break;
    for (int i = 0; i < n; ++i) w.rhs[i] = w.fval[i];
    lu_solve(w.jf.data(), w.piv.data(), n, w.rhs.data());
    for (int i = 0; i < n; ++i) w.z[i] -= w.rhs[i];
    f.eval(w.z.data(), w.fval.data(), w.scratch.data());
    double r = max_abs(w.fval.data(), n);
    if (!std::isfinite(r)) break;
    if (r < best_res) {
      best_res = r;
      best = w.z;
      worse_streak = 0;
    } else if (++worse_streak >= 2) {
      break;
    }
  }
  res.point = best;
  res.residual = best_res;
  res.singular_endpoint = cond > kSingularCondition;
}

PathResult track_path_impl(const Homotopy& hom, Workspace& w, const TrackerOptions& opts) {
  const int n = w.n;
  PathResult res;
  double s = 0.0;
  double ds = opts.initial_step;
  int successes = 0;
  w.lu_valid = false;

  while (s < 1.0) {
    double remaining = 1.0 - s;
    double ds_use = std::min(ds, remaining);
    double s_next = (ds >= remaining) ? 1.0 : s + ds;

    bool step_ok = false;
    bool singular = false;

    // Predictor.
    if (!opts.rk4_predictor) {
      // Euler reuses the Jacobian factorization the corrector left behind
      // at (z, s) when one is available.
      bool have_tangent = false;
      if (w.lu_valid) {
        hom.tangent_with_lu(w, w.z.data(), w.k1.data());
        have_tangent = true;
      } else {
        have_tangent = hom.tangent(w, w.z.data(), s, w.k1.data());
      }
      if (have_tangent) {
        for (int i = 0; i < n; ++i) w.zc[i] = w.z[i] + ds_use * w.k1[i];
      } else {
        singular = true;
      }
    } else {
      auto stage = [&](const Complex* base, const Complex* dir, double frac, double at_s,
                       Complex* out) {
        for (int i = 0; i < n; ++i) w.ztmp[i] = base[i] + frac * ds_use * dir[i];
        return hom.tangent(w, w.ztmp.data(), at_s, out);
      };
      double sm = s + 0.5 * ds_use;
      if (hom.tangent(w, w.z.data(), s, w.k1.data()) &&
          stage(w.z.data(), w.k1.data(), 0.5, sm, w.k2.data()) &&
          stage(w.z.data(), w.k2.data(), 0.5, sm, w.k3.data()) &&
          stage(w.z.data(), w.k3.data(), 1.0, s_next, w.k4.data())) {
        for (int i = 0; i < n; ++i)
          w.zc[i] = w.z[i] + ds_use / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
      } else {
        singular = true;
      }
    }

    // Corrector: full Newton on H(., s_next) with a fresh Jacobian each
    // iteration. Acceptance is on the residual of the corrected point.
    if (!singular) {
      for (int it = 0; it < opts.max_corrector_iters; ++it) {
        hom.eval_h(w, w.zc.data(), s_next, true);
        if (!lu_factor(w.hj.data(), n, w.piv.data())) {
          singular = true;
          break;
        }
        for (int i = 0; i < n; ++i) w.rhs[i] = w.h[i];
        lu_solve(w.hj.data(), w.piv.data(), n, w.rhs.data());
        for (int i = 0; i < n; ++i) w.zc[i] -= w.rhs[i];
        double znorm = max_abs(w.zc.data(), n);
        if (znorm > opts.divergence_bound || !std::isfinite(znorm)) {
          res.status = PathStatus::diverged;
          return res;
        }
        double zscale = std::max(1.0, znorm);
        double delta = max_abs(w.rhs.data(), n);
        if (delta <= opts.corrector_tol * zscale) {
          step_ok = true;
        } else {
          hom.eval_h(w, w.zc.data(), s_next, false);
          if (max_abs(w.h.data(), n) <= opts.corrector_tol * zscale) step_ok = true;
        }
        if (step_ok) {
          // w.hj holds the factored Jacobian from this iteration's
          // pre-update point; when the final update was small it doubles
          // as the next Euler prediction matrix.
          if (delta <= 1e-3 * zscale) {
            w.lu = w.hj;
            w.lu_piv = w.piv;
            w.lu_valid = true;
          } else {
            w.lu_valid = false;
          }
          break;
        }
      }
    }

    if (step_ok) {
      w.z = w.zc;
      s = s_next;
      ++res.steps;
      if (++successes >= 4) {
        ds = std::min(ds * 1.5, opts.initial_step);
        successes = 0;
      }
      if (max_abs(w.z.data(), n) > opts.divergence_bound) {
        res.status = PathStatus::diverged;
        return res;
      }
    } else {
      // Retry with a fresh tangent: a reused factorization that just led to
      // a failed step must not steer the retry as well.
      w.lu_valid = false;
      successes = 0;
      ds *= 0.5;
      if (ds < opts.min_step) {
        res.status = (max_abs(w.z.data(), n) > kStallDivergesAbove) ? PathStatus::diverged
                                                                    : PathStatus::stalled;
        return res;
      }
    }
  }

  refine_endpoint(hom.target(), w, res, opts);
  // Large endpoints cannot be certified to an absolute 1e-8: the evaluated
  // residual bottoms out at roundoff of the term sum. Accept down to that
  // noise floor.
  const double eps = std::numeric_limits<double>::epsilon();
  double floor_accept =
      std::max(kResidualAccept, 32.0 * eps * hom.target().magnitude_bound(res.point.data()));
  res.status = (res.residual <= floor_accept && std::isfinite(res.residual))
                   ? PathStatus::converged
                   : PathStatus::stalled;
  return res;
}

Complex gamma_from_seed(std::uint64_t seed) {
  Rng rng(seed);
  double angle = 2.0 * std::numbers::pi * rng.uniform01();
  return std::polar(1.0, angle);
}

bool lex_less(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
    if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
  }
  return false;
}

double point_dist_inf(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Endpoint {
  std::vector<Complex> point;
  double residual;
  bool singular;
};

// Canonical sort + max-norm dedup keeping the smaller residual. Sorting
// first makes the result independent of path scheduling.
void dedup_endpoints(std::vector<Endpoint>& eps, double tol) {
  std::sort(eps.begin(), eps.end(),
            [](const Endpoint& a, const Endpoint& b) { return lex_less(a.point, b.point); });
  std::vector<bool> dead(eps.size(), false);
  for (size_t i = 0; i < eps.size(); ++i) {
    if (dead[i]) continue;
    for (size_t j = i + 1; j < eps.size(); ++j) {
      if (dead[j]) continue;
      if (eps[j].point[0].real() - eps[i].point[0].real() > tol) break;
      if (point_dist_inf(eps[i].point, eps[j].point) <= tol) {
        if (eps[j].residual < eps[i].residual) std::swap(eps[i], eps[j]);
        dead[j] = true;
      }
    }
  }
  std::vector<Endpoint> kept;
  for (size_t i = 0; i < eps.size(); ++i)
    if (!dead[i]) kept.push_back(std::move(eps[i]));
  eps = std::move(kept);
}

struct RawTrackResult {
  std::vector<Endpoint> endpoints;
  long long conv = 0, div = 0, stall = 0;
};

RawTrackResult track_all_once(const CompiledSystem& target, const CompiledSystem& start_sys,
                              std::size_t num_paths,
                              const std::function<void(std::size_t, Complex*)>& start_at,
                              Complex gamma, const TrackerOptions& opts) {
  const int n = target.size();
  Homotopy hom(target, start_sys, gamma);

  // A stalled path gets one patient retry: a lower step floor and more
  // corrector iterations get through near-discriminant tight spots.
  TrackerOptions patient = opts;
  patient.min_step = opts.min_step * 1e-3;
  patient.max_corrector_iters = opts.max_corrector_iters + 3;

  long long conv = 0, div = 0, stall = 0;
  std::vector<std::vector<Endpoint>> buckets;

#ifdef _OPENMP
  const int max_threads = opts.parallel ? omp_get_max_threads() : 1;
#else
  const int max_threads = 1;
#endif
  buckets.resize(max_threads);

#ifdef _OPENMP
#pragma omp parallel num_threads(max_threads) if (opts.parallel && num_paths > 1) \
    reduction(+ : conv, div, stall)
#endif
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    Workspace w(n, hom.scratch_len());
#ifdef _OPENMP
#pragma omp for schedule(dynamic, 16)
#endif
    for (long long p = 0; p < static_cast<long long>(num_paths); ++p) {
      start_at(static_cast<std::size_t>(p), w.z.data());
      PathResult r = track_path_impl(hom, w, opts);
      if (r.status == PathStatus::stalled) {
        start_at(static_cast<std::size_t>(p), w.z.data());
        r = track_path_impl(hom, w, patient);
      }
      switch (r.status) {
        case PathStatus::converged:
          ++conv;
          buckets[tid].push_back({std::move(r.point), r.residual, r.singular_endpoint});
          break;
        case PathStatus::diverged:
          ++div;
          break;
        case PathStatus::stalled:
          ++stall;
          break;
      }
    }
  }

  RawTrackResult out;
  out.conv = conv;
  out.div = div;
  out.stall = stall;
  for (auto& b : buckets)
    out.endpoints.insert(out.endpoints.end(), std::make_move_iterator(b.begin()),
                         std::make_move_iterator(b.end()));
  return out;
}

ComplexSolutionSet track_all(const CompiledSystem& target, const CompiledSystem& start_sys,
                             std::size_t num_paths,
                             const std::function<void(std::size_t, Complex*)>& start_at,
                             const TrackerOptions& opts) {
  RawTrackResult raw =
      track_all_once(target, start_sys, num_paths, start_at, gamma_from_seed(opts.seed), opts);

  if (raw.stall > 0) {
    // Endpoints are gamma-independent, so a second deformation recovers
    // whatever the stalled paths were heading to; the union is deduped.
    Complex gamma2 = gamma_from_seed(mix_seed(opts.seed, 0x67616d6d61ULL));
    RawTrackResult again =
        track_all_once(target, start_sys, num_paths, start_at, gamma2, opts);
    raw.endpoints.insert(raw.endpoints.end(),
                         std::make_move_iterator(again.endpoints.begin()),
                         std::make_move_iterator(again.endpoints.end()));
    raw.conv += again.conv;
    raw.div += again.div;
    raw.stall += again.stall;
  }

  dedup_endpoints(raw.endpoints, opts.dedup_tol);

  ComplexSolutionSet out;
  out.paths_converged = raw.conv;
  out.paths_diverged = raw.div;
  out.paths_stalled = raw.stall;
  for (Endpoint& e : raw.endpoints) {
    out.points.push_back(std::move(e.point));
    out.residual_norms.push_back(e.residual);
    out.singular.push_back(e.singular);
  }
  return out;
}

PolySystem total_degree_start(const PolySystem& sys, std::vector<int>& degrees) {
  const int n = sys.num_unknowns();
  degrees.resize(n);
  PolySystem g;
  g.unknowns = sys.unknowns;
  for (int i = 0; i < n; ++i) {
    int d = sys.polys[i].total_degree();
    if (d < 1) {
      std::ostringstream os;
      os << "solve_square_system: polynomial " << i << " is constant";
      throw std::invalid_argument(os.str());
    }
    degrees[i] = d;
    std::vector<int> e(n, 0);
    e[i] = d;
    g.polys.push_back(Poly::monomial(n, 1.0, e) - 1.0);
  }
  return g;
}

ComplexSolutionSet solve_total_degree(const PolySystem& system, const TrackerOptions& opts) {
  if (!system.square()) {
    std::ostringstream os;
    os << "solve_square_system: square violation (" << system.polys.size() << " polynomials, "
       << system.unknowns.size() << " unknowns)";
    throw std::invalid_argument(os.str());
  }
  const int n = system.num_unknowns();

  std::vector<int> degrees;
  PolySystem start = total_degree_start(system, degrees);

  double bezout = 1.0;
  for (int d : degrees) bezout *= d;
  if (bezout > opts.total_degree_guard) {
    std::ostringstream os;
    os << "solve_square_system: total degree " << bezout << " exceeds guard "
       << opts.total_degree_guard;
    throw std::invalid_argument(os.str());
  }
  const std::size_t num_paths = static_cast<std::size_t>(bezout);

  // Start point for path p: mixed-radix digits pick one d_i-th root of unity
  // per coordinate.
  std::vector<std::vector<Complex>> roots(n);
  for (int i = 0; i < n; ++i) {
    roots[i].resize(degrees[i]);
    for (int m = 0; m < degrees[i]; ++m)
      roots[i][m] = std::polar(1.0, 2.0 * std::numbers::pi * m / degrees[i]);
  }
  auto start_at = [&](std::size_t p, Complex* z) {
    for (int i = 0; i < n; ++i) {
      z[i] = roots[i][p % degrees[i]];
      p /= degrees[i];
    }
  };

  CompiledSystem ftgt(system);
  CompiledSystem fstart(start);
  ComplexSolutionSet out = track_all(ftgt, fstart, num_paths, start_at, opts);
  if (out.points.empty()) {
    throw AllPathsDivergedError("solve_square_system: all paths diverged");
  }
  return out;
}

}  // namespace

PathResult track_path(const std::vector<Complex>& start, const CompiledSystem& target,
                      const CompiledSystem& start_sys, Complex gamma,
                      const TrackerOptions& opts) {
  Homotopy hom(target, start_sys, gamma);
  Workspace w(target.size(), hom.scratch_len());
  w.z = start;
  return track_path_impl(hom, w, opts);
}

PathResult track_path(const std::vector<Complex>& start, const PolySystem& target,
                      const PolySystem& start_sys, Complex gamma, const TrackerOptions& opts) {
  CompiledSystem f_target(target);
  CompiledSystem f_start(start_sys);
  return track_path(start, f_target, f_start, gamma, opts);
}

ComplexSolutionSet solve_square_system(const PolySystem& system, const TrackerOptions& opts) {
  return solve_total_degree(system, opts);
}

ComplexSolutionSet solve_square_system_serial(const PolySystem& system,
                                              const TrackerOptions& opts) {
  TrackerOptions o = opts;
  o.parallel = false;
  return solve_total_degree(system, o);
}

ComplexSolutionSet track_from_starts(const PolySystem& target, const PolySystem& start_sys,
                                     const std::vector<std::vector<Complex>>& starts,
                                     const TrackerOptions& opts) {
  if (!target.square() || !start_sys.square() ||
      target.num_unknowns() != start_sys.num_unknowns()) {
    throw std::invalid_argument("track_from_starts: square violation");
  }
  CompiledSystem ftgt(target);
  CompiledSystem fstart(start_sys);
  auto start_at = [&](std::size_t p, Complex* z) {
    const std::vector<Complex>& s = starts[p];
    std::copy(s.begin(), s.end(), z);
  };
  return track_all(ftgt, fstart, starts.size(), start_at, opts);
}

}  // namespace gmom
