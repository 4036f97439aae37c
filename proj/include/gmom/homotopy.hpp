#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gmom/poly.hpp"

namespace gmom {

// Thrown when a solve produces no convergent endpoint at all; downstream
// this signals inconsistent moment data.
struct AllPathsDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrackerOptions {
  double initial_step = 0.1;
  double min_step = 1e-7;
  double corrector_tol = 1e-10;
  int max_corrector_iters = 3;
  double divergence_bound = 1e10;
  double final_refine_tol = 1e-13;
  double dedup_tol = 1e-8;
  std::uint64_t seed = 0x676d6f6dULL;  // gamma constant seed
  bool rk4_predictor = false;          // explicit Euler when false
  bool parallel = true;                // track disjoint paths concurrently
  // Guard on the product of polynomial degrees; callers that knowingly
  // exceed desk scale must raise it explicitly.
  double total_degree_guard = 1e5;
};

// Accepted endpoints must satisfy the target system to this max-norm bound
// after final refinement.
inline constexpr double kResidualAccept = 1e-8;
// Endpoints whose Jacobian condition proxy exceeds this are flagged singular.
inline constexpr double kSingularCondition = 1e10;

enum class PathStatus { converged, diverged, stalled };

struct PathResult {
  PathStatus status = PathStatus::stalled;
  std::vector<Complex> point;  // endpoint (valid when converged)
  double residual = 0.0;       // max-norm residual of the target system
  int steps = 0;               // accepted predictor-corrector steps
  bool singular_endpoint = false;
};

struct ComplexSolutionSet {
  std::vector<std::vector<Complex>> points;
  std::vector<double> residual_norms;
  std::vector<bool> singular;  // Jacobian condition proxy > 1e10 at the point
  long long paths_converged = 0;
  long long paths_diverged = 0;
  long long paths_stalled = 0;
};

// Follow one homotopy path of H(z, s) = (1-s)*gamma*G(z) + s*F(z) from a
// start point solving G, s: 0 -> 1, with adaptive predictor-corrector
// stepping and Newton refinement against F at the end.
PathResult track_path(const std::vector<Complex>& start, const PolySystem& target,
                      const PolySystem& start_sys, Complex gamma, const TrackerOptions& opts);
PathResult track_path(const std::vector<Complex>& start, const CompiledSystem& target,
                      const CompiledSystem& start_sys, Complex gamma, const TrackerOptions& opts);

// All isolated solutions of a square system via a total-degree start system
// g_i = z_i^{deg f_i} - 1 and the gamma trick. Throws std::invalid_argument
// on a non-square system ("square violation") and AllPathsDivergedError when
// nothing converges.
ComplexSolutionSet solve_square_system(const PolySystem& system, const TrackerOptions& opts = {});
// Single-threaded reference with identical output (kept for testing).
ComplexSolutionSet solve_square_system_serial(const PolySystem& system,
                                              const TrackerOptions& opts = {});

// Track the same homotopy from caller-supplied start data (start system plus
// its known solutions). Used to reuse the solution fiber of a previously
// solved system of the same shape.
ComplexSolutionSet track_from_starts(const PolySystem& target, const PolySystem& start_sys,
                                     const std::vector<std::vector<Complex>>& starts,
                                     const TrackerOptions& opts);

}  // namespace gmom
