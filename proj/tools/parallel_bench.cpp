// Compares the OpenMP kernels against their serial reference
// implementations: sample-moment accumulation and homotopy path tracking.

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>

#include "gmom/bench.hpp"
#include "gmom/homotopy.hpp"
#include "gmom/moments.hpp"
#include "gmom/recovery.hpp"

using namespace gmom;

namespace {

double time_s(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; both columns run the serial kernel\n");
#endif
  std::printf("%-34s %12s %12s %8s\n", "kernel", "serial (s)", "parallel (s)", "speedup");

  {
    MixtureParams p = generate_params(10, 3, false, 42);
    Eigen::MatrixXd samples = sample_mixture(p, 1000000, 7);
    MomentSets a, b;
    double ts = time_s([&] { a = sample_moments_serial(samples, 3, V3Method::low); });
    double tp = time_s([&] { b = sample_moments(samples, 3, V3Method::low); });
    bool same = a.mV1 == b.mV1 && a.mV2 == b.mV2 && a.mV3 == b.mV3;
    std::printf("%-34s %12.3f %12.3f %7.2fx %s\n", "sample_moments n=1e6 d=10 k=3", ts, tp,
                ts / tp, same ? "" : "MISMATCH");
  }

  {
    // k = 2 unknown-weights univariate moment system: 720 paths.
    MixtureParams p = generate_params(1, 2, false, 9);
    MomentSets m = exact_moment_sets(p, V3Method::k, false);
    EstimateOptions serial, par;
    serial.tracker.parallel = false;
    par.tracker.parallel = true;
    SolveReport ra, rb;
    double ts = time_s([&] { ra = estimate_parameters(1, 2, m, {}, serial); });
    double tp = time_s([&] { rb = estimate_parameters(1, 2, m, {}, par); });
    bool same = ra.params.has_value() == rb.params.has_value();
    std::printf("%-34s %12.3f %12.3f %7.2fx %s\n", "estimate d=1 k=2 (720 paths)", ts, tp,
                ts / tp, same ? "" : "MISMATCH");
  }

  {
    MixtureParams p = generate_params(5, 3, false, 11);
    MomentSets m = exact_moment_sets(p, V3Method::k, true);
    EstimateOptions serial, par;
    serial.tracker.parallel = false;
    par.tracker.parallel = true;
    SolveReport ra, rb;
    double ts = time_s([&] { ra = estimate_parameters(5, 3, m, {}, serial); });
    double tp = time_s([&] { rb = estimate_parameters(5, 3, m, {}, par); });
    bool same = ra.params.has_value() == rb.params.has_value();
    std::printf("%-34s %12.3f %12.3f %7.2fx %s\n", "estimate d=5 k=3 (seeded stage)", ts, tp,
                ts / tp, same ? "" : "MISMATCH");
  }

  return 0;
}
