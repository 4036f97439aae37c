#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>

#include "gmom/homotopy.hpp"
#include "gmom/rng.hpp"

using namespace gmom;

namespace {

PolySystem one_var(const Poly& p) {
  PolySystem s;
  s.unknowns = {"z"};
  s.polys = {p};
  return s;
}

bool contains_point(const ComplexSolutionSet& sols, const std::vector<Complex>& want,
                    double tol = 1e-6) {
  for (const auto& p : sols.points) {
    double dist = 0.0;
    for (size_t i = 0; i < p.size(); ++i) dist = std::max(dist, std::abs(p[i] - want[i]));
    if (dist <= tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("quadratic roots") {
  Poly z = Poly::variable(1, 0);
  ComplexSolutionSet s = solve_square_system(one_var(z * z - 1.0));
  REQUIRE(s.points.size() == 2);
  CHECK(contains_point(s, {Complex(1, 0)}));
  CHECK(contains_point(s, {Complex(-1, 0)}));
  CHECK(s.paths_converged == 2);
}

TEST_CASE("symmetric two-variable system") {
  // {x^2 + y^2 - 5, x y - 2} has the four solutions (1,2),(2,1),(-1,-2),(-2,-1).
  Poly x = Poly::variable(2, 0), y = Poly::variable(2, 1);
  PolySystem sys;
  sys.unknowns = {"x", "y"};
  sys.polys = {x * x + y * y - 5.0, x * y - 2.0};
  ComplexSolutionSet s = solve_square_system(sys);
  REQUIRE(s.points.size() == 4);
  CHECK(contains_point(s, {Complex(1, 0), Complex(2, 0)}));
  CHECK(contains_point(s, {Complex(2, 0), Complex(1, 0)}));
  CHECK(contains_point(s, {Complex(-1, 0), Complex(-2, 0)}));
  CHECK(contains_point(s, {Complex(-2, 0), Complex(-1, 0)}));
}

TEST_CASE("k=1 moment system") {
  // {mu - 1, mu^2 + sigma - 2} -> (mu, sigma) = (1, 1).
  Poly mu = Poly::variable(2, 0), sigma = Poly::variable(2, 1);
  PolySystem sys;
  sys.unknowns = {"mu", "sigma"};
  sys.polys = {mu - 1.0, mu * mu + sigma - 2.0};
  ComplexSolutionSet s = solve_square_system(sys);
  REQUIRE(s.points.size() == 1);
  CHECK(contains_point(s, {Complex(1, 0), Complex(1, 0)}, 1e-8));
}

TEST_CASE("track_path basics") {
  Poly z = Poly::variable(1, 0);
  PolySystem target = one_var(z * z - 1.0);
  PolySystem start = one_var(z * z - 1.0);

  SUBCASE("identity homotopy ends at the start in at most 2 steps") {
    TrackerOptions opts;
    opts.initial_step = 1.0;
    PathResult r = track_path({Complex(1, 0)}, target, start, Complex(1, 0), opts);
    CHECK(r.status == PathStatus::converged);
    CHECK(r.steps <= 2);
    CHECK(std::abs(r.point[0] - Complex(1, 0)) < 1e-12);
  }

  SUBCASE("unit root stays a fixed point with gamma 1") {
    TrackerOptions opts;
    PathResult r = track_path({Complex(1, 0)}, target, start, Complex(1, 0), opts);
    CHECK(r.status == PathStatus::converged);
    CHECK(r.residual < 1e-12);
    CHECK(std::abs(r.point[0] - Complex(1, 0)) < 1e-10);
  }

  SUBCASE("complex endpoints are reached from real starts") {
    PolySystem tgt = one_var(z * z + 1.0);
    TrackerOptions opts;
    ComplexSolutionSet s = solve_square_system(tgt, opts);
    REQUIRE(s.points.size() == 2);
    CHECK(contains_point(s, {Complex(0, 1)}));
    CHECK(contains_point(s, {Complex(0, -1)}));
  }
}

TEST_CASE("square violation and guard") {
  Poly x = Poly::variable(2, 0);
  PolySystem sys;
  sys.unknowns = {"x", "y"};
  sys.polys = {x - 1.0};
  CHECK_THROWS_WITH_AS(solve_square_system(sys), doctest::Contains("square violation"),
                       std::invalid_argument);

  PolySystem big;
  big.unknowns = {"x"};
  Poly p = Poly::constant(1, 1.0);
  for (int i = 0; i < 18; ++i) p = p * Poly::variable(1, 0);
  big.polys = {p - 1.0};
  TrackerOptions opts;
  opts.total_degree_guard = 10;
  CHECK_THROWS_AS(solve_square_system(big, opts), std::invalid_argument);
}

TEST_CASE("Bezout completeness on 50 random dense systems") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform01() * 3);
    std::vector<int> degs(n);
    int bezout = 1;
    PolySystem sys;
    for (int i = 0; i < n; ++i) {
      sys.unknowns.push_back("z" + std::to_string(i));
      degs[i] = 1 + static_cast<int>(rng.uniform01() * 3);
      bezout *= degs[i];
    }
    // Dense generic polynomials of the chosen total degrees.
    for (int i = 0; i < n; ++i) {
      Poly p(n);
      std::vector<int> e(n, 0);
      std::function<void(int, int)> fill = [&](int var, int budget) {
        if (var == n) {
          p += Poly::monomial(n, rng.normal(), e);
          return;
        }
        for (int q = 0; q <= budget; ++q) {
          e[var] = q;
          fill(var + 1, budget - q);
        }
        e[var] = 0;
      };
      fill(0, degs[i]);
      sys.polys.push_back(p);
    }

    TrackerOptions opts;
    opts.seed = 1000 + trial;
    ComplexSolutionSet s = solve_square_system(sys, opts);
    CAPTURE(trial);
    CAPTURE(n);
    CAPTURE(bezout);
    CHECK(static_cast<int>(s.points.size()) == bezout);
    // Residual certification plus direct re-evaluation, independent of the
    // solver's own bookkeeping. Endpoints beyond O(1) magnitude are only
    // certifiable down to the evaluation noise floor of doubles.
    for (const auto& point : s.points) {
      double mag = 1.0;
      for (const Poly& poly : sys.polys) {
        double sum = 0.0;
        for (const Term& t : poly.terms()) {
          double v = std::abs(t.coeff);
          for (int j = 0; j < n; ++j)
            for (int e = 0; e < t.exps[j]; ++e) v *= std::abs(point[j]);
          sum += v;
        }
        mag = std::max(mag, sum);
      }
      double tol = std::max(1e-8, 32.0 * std::numeric_limits<double>::epsilon() * mag);
      for (const Poly& poly : sys.polys) {
        Complex v = poly.eval(std::span<const Complex>(point));
        CHECK(std::abs(v) <= tol);
      }
    }
    for (size_t i = 0; i < s.points.size(); ++i) {
      double zmax = 0.0;
      for (const Complex& c : s.points[i]) zmax = std::max(zmax, std::abs(c));
      if (zmax < 10.0) CHECK(s.residual_norms[i] <= 1e-8);
    }
  }
}

TEST_CASE("gamma independence") {
  Poly x = Poly::variable(2, 0), y = Poly::variable(2, 1);
  PolySystem sys;
  sys.unknowns = {"x", "y"};
  sys.polys = {x * x * y + y * y - 3.0, x * y * y - x - 1.0};

  TrackerOptions a, b;
  a.seed = 17;
  b.seed = 9999;
  ComplexSolutionSet sa = solve_square_system(sys, a);
  ComplexSolutionSet sb = solve_square_system(sys, b);
  REQUIRE(sa.points.size() == sb.points.size());
  for (size_t i = 0; i < sa.points.size(); ++i) {
    double best = 1e300;
    for (size_t j = 0; j < sb.points.size(); ++j) {
      double dist = 0.0;
      for (size_t c = 0; c < sa.points[i].size(); ++c)
        dist = std::max(dist, std::abs(sa.points[i][c] - sb.points[j][c]));
      best = std::min(best, dist);
    }
    CHECK(best <= 1e-6);
  }
}

TEST_CASE("parallel tracking matches the serial reference") {
  Poly x = Poly::variable(3, 0), y = Poly::variable(3, 1), z = Poly::variable(3, 2);
  PolySystem sys;
  sys.unknowns = {"x", "y", "z"};
  sys.polys = {x * x + y - 1.0, y * y + z - 2.0, z * z + x - 3.0};
  ComplexSolutionSet sp = solve_square_system(sys);
  ComplexSolutionSet ss = solve_square_system_serial(sys);
  REQUIRE(sp.points.size() == ss.points.size());
  for (size_t i = 0; i < sp.points.size(); ++i)
    for (size_t c = 0; c < sp.points[i].size(); ++c)
      CHECK(std::abs(sp.points[i][c] - ss.points[i][c]) <= 1e-12);
}

TEST_CASE("track_from_starts reuses a solved fiber") {
  // Solve x^2 - 2 from the fiber of x^2 - 1.
  Poly z = Poly::variable(1, 0);
  PolySystem start = one_var(z * z - 1.0);
  PolySystem target = one_var(z * z - 2.0);
  std::vector<std::vector<Complex>> starts = {{Complex(1, 0)}, {Complex(-1, 0)}};
  ComplexSolutionSet s = track_from_starts(target, start, starts, {});
  REQUIRE(s.points.size() == 2);
  CHECK(contains_point(s, {Complex(std::sqrt(2.0), 0)}, 1e-8));
  CHECK(contains_point(s, {Complex(-std::sqrt(2.0), 0)}, 1e-8));
}

TEST_CASE("no convergent endpoint raises") {
  // x^2 = -1 has solutions, but an absurd divergence bound forces failures.
  Poly z = Poly::variable(1, 0);
  TrackerOptions opts;
  opts.divergence_bound = 1e-3;
  CHECK_THROWS_AS(solve_square_system(one_var(z * z + 1.0), opts), AllPathsDivergedError);
}
