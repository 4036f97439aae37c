#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmom/bench.hpp"
#include "gmom/moments.hpp"
#include "gmom/rng.hpp"

using namespace gmom;

namespace {

// The d=2, k=2 worked-example mixture:
// 0.2 N([-0.6, 0.5], [[1.7, 1.3],[1.3, 3.2]]) + 0.8 N([0.3, 0.7], [[6.1, -2.8],[-2.8, 1.9]]).
MixtureParams example_2d_mixture() {
  MixtureParams p;
  p.k = 2;
  p.d = 2;
  p.weights = {0.2, 0.8};
  Eigen::VectorXd m1(2), m2(2);
  m1 << -0.6, 0.5;
  m2 << 0.3, 0.7;
  p.means = {m1, m2};
  Eigen::MatrixXd c1(2, 2), c2(2, 2);
  c1 << 1.7, 1.3, 1.3, 3.2;
  c2 << 6.1, -2.8, -2.8, 1.9;
  p.covariances = {c1, c2};
  return p;
}

// Variant whose first mean coordinate of component 2 is 0.5: the printed
// sample-moment vector of the worked example (all 13 values, odd orders
// included) tracks this mixture to within its n = 10^4 sampling noise,
// while the displayed 0.3 variant is several standard errors away on every
// odd moment.
MixtureParams example_2d_sampling_mixture() {
  MixtureParams p = example_2d_mixture();
  p.means[1](0) = 0.5;
  return p;
}

}  // namespace

TEST_CASE("standard normal moments") {
  std::vector<double> m = gaussian_moments_1d(0.0, 1.0, 6);
  std::vector<double> expect{1, 0, 1, 0, 3, 0, 15};
  REQUIRE(m.size() == expect.size());
  for (size_t i = 0; i < m.size(); ++i) CHECK(m[i] == doctest::Approx(expect[i]));
}

TEST_CASE("unit mean and variance recursion") {
  std::vector<double> m = gaussian_moments_1d(1.0, 1.0, 4);
  CHECK(m[3] == doctest::Approx(4.0));   // mu^3 + 3 mu sigma
  CHECK(m[4] == doctest::Approx(10.0));  // mu^4 + 6 mu^2 sigma + 3 sigma^2
}

TEST_CASE("noncentral second moment") {
  std::vector<double> m = gaussian_moments_1d(2.0, 0.5, 2);
  CHECK(m[2] == doctest::Approx(4.5));
}

TEST_CASE("rejects nonpositive variance") {
  CHECK_THROWS_AS(gaussian_moments_1d(0.0, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_moments_1d(0.0, -1.0, 3), std::invalid_argument);
}

TEST_CASE("recursion matches closed forms on 1000 random draws") {
  Rng rng(314);
  for (int t = 0; t < 1000; ++t) {
    double mu = rng.normal() * 3.0;
    double s = 0.05 + 2.0 * rng.uniform01();
    std::vector<double> m = gaussian_moments_1d(mu, s, 5);
    double m3 = mu * mu * mu + 3 * mu * s;
    double m4 = std::pow(mu, 4) + 6 * mu * mu * s + 3 * s * s;
    double m5 = std::pow(mu, 5) + 10 * std::pow(mu, 3) * s + 15 * mu * s * s;
    CHECK(std::abs(m[3] - m3) <= 1e-10 * std::max(1.0, std::abs(m3)));
    CHECK(std::abs(m[4] - m4) <= 1e-10 * std::max(1.0, std::abs(m4)));
    CHECK(std::abs(m[5] - m5) <= 1e-10 * std::max(1.0, std::abs(m5)));
  }
}

TEST_CASE("mixture moment polynomials") {
  const UnivariateMomentPolys& p = mixture_moment_polys(2, 5);

  SUBCASE("order zero and one") {
    // f_0 = sum lambda, f_1 = sum lambda mu.
    std::vector<double> x{0.3, 0.7, 1.0, -2.0, 0.5, 0.25};
    CHECK(p.polynomials[0].eval(std::span<const double>(x)) == doctest::Approx(1.0));
    CHECK(p.polynomials[1].eval(std::span<const double>(x)) ==
          doctest::Approx(0.3 * 1.0 + 0.7 * -2.0));
  }

  SUBCASE("symmetric mixture second moment") {
    std::vector<double> x{0.5, 0.5, 1.0, -1.0, 1.0, 1.0};
    CHECK(p.polynomials[2].eval(std::span<const double>(x)) == doctest::Approx(2.0));
  }

  SUBCASE("grading: order-i polynomial has weighted degree i") {
    for (int i = 1; i <= 5; ++i) {
      for (const Term& t : p.polynomials[i].terms()) {
        int grade = 0;
        for (int l = 0; l < p.k; ++l) {
          grade += t.exps[p.mu_var(l)];
          grade += 2 * t.exps[p.sigma_var(l)];
        }
        CHECK(grade == i);
      }
    }
  }

  SUBCASE("crab solution reproduces the crab moments within 1%") {
    std::vector<double> x{0.58, 0.42, 19.30, 13.40, 9.67, 20.35};
    std::vector<double> expect{16.8, 304.9, 5832, 116061, 2385610};
    for (int i = 1; i <= 5; ++i) {
      double v = p.polynomials[i].eval(std::span<const double>(x));
      CHECK(std::abs(v - expect[i - 1]) <= 0.01 * std::abs(expect[i - 1]));
    }
  }
}

TEST_CASE("k=1 mixture polynomials with lambda fixed to 1 equal the Gaussian recursion") {
  const UnivariateMomentPolys& p = mixture_moment_polys(1, 5);
  // Rebuild the plain recursion over (mu, sigma) and compare termwise.
  Poly mu = Poly::variable(2, 0), sigma = Poly::variable(2, 1);
  std::vector<Poly> g(6);
  g[0] = Poly::constant(2, 1.0);
  g[1] = mu;
  for (int i = 2; i <= 5; ++i) g[i] = mu * g[i - 1] + sigma * g[i - 2] * double(i - 1);

  std::vector<int> keep{-1, 0, 1};
  std::vector<double> fixed{1.0, 0.0, 0.0};
  for (int i = 0; i <= 5; ++i) {
    Poly diff = p.polynomials[i].partial_evaluate(keep, 2, fixed) - g[i];
    CHECK(diff.is_zero());
  }
}

TEST_CASE("mixed moments") {
  SUBCASE("zero-mean covariance identity") {
    MixtureParams p;
    p.k = 1;
    p.d = 2;
    p.weights = {1.0};
    p.means = {Eigen::VectorXd::Zero(2)};
    Eigen::MatrixXd c(2, 2);
    c << 1.0, 0.3, 0.3, 1.0;
    p.covariances = {c};
    CHECK(mixed_moment(p, 1, 0, 1) == doctest::Approx(0.3));
  }

  SUBCASE("Stein expansion for E[X1^2 X2]") {
    MixtureParams p;
    p.k = 1;
    p.d = 2;
    p.weights = {1.0};
    Eigen::VectorXd m(2);
    m << 1.0, 2.0;
    p.means = {m};
    Eigen::MatrixXd c(2, 2);
    c << 1.0, 0.5, 0.5, 1.0;
    p.covariances = {c};
    // mu2 (mu1^2 + s11) + 2 s12 mu1 = 2*2 + 2*0.5 = 5.
    CHECK(mixed_moment(p, 2, 0, 1) == doctest::Approx(5.0));
  }

  SUBCASE("worked example cross moments") {
    MixtureParams p = example_2d_mixture();
    // E[X1 X2] = sum_l w_l (mu1 mu2 + s12) = -1.872; the sampled value the
    // example prints is -1.790, within its sampling noise.
    double m11 = mixed_moment(p, 1, 0, 1);
    CHECK(m11 == doctest::Approx(-1.872).epsilon(1e-9));
    CHECK(std::abs(m11 - (-1.790)) < 0.1);
    // E[X1^2 X2] by the Isserlis expansion done by hand:
    // 0.2*(0.5*(0.36+1.7) + 2*1.3*(-0.6)) + 0.8*(0.7*(0.09+6.1) + 2*(-2.8)*0.3).
    CHECK(mixed_moment(p, 2, 0, 1) == doctest::Approx(2.0164).epsilon(1e-9));
    // Under the sampling variant both printed cross moments are consistent.
    MixtureParams q = example_2d_sampling_mixture();
    CHECK(std::abs(mixed_moment(q, 1, 0, 1) - (-1.790)) < 0.1);
    CHECK(std::abs(mixed_moment(q, 2, 0, 1) - 1.130) < 0.1);
  }

  SUBCASE("rejects diagonal request") {
    MixtureParams p = example_2d_mixture();
    CHECK_THROWS_AS(mixed_moment(p, 2, 1, 1), std::invalid_argument);
  }
}

TEST_CASE("V3 index selection") {
  auto flat = [](const std::vector<V3PairIndices>& sel, int i, int j) {
    for (const auto& p : sel)
      if (p.i == i && p.j == j) return p.indices;
    return std::vector<MomentIndex>{};
  };

  SUBCASE("k=2 d=2 method k") {
    auto sel = select_V3_indices(2, 2, V3Method::k);
    auto idx = flat(sel, 0, 1);
    REQUIRE(idx.size() == 2);
    CHECK(idx[0].v == std::vector<int>{1, 1});
    CHECK(idx[1].v == std::vector<int>{2, 1});
  }

  SUBCASE("k=3 d=2 method low") {
    auto sel = select_V3_indices(3, 2, V3Method::low);
    auto idx = flat(sel, 0, 1);
    REQUIRE(idx.size() == 3);
    CHECK(idx[0].v == std::vector<int>{1, 1});
    CHECK(idx[1].v == std::vector<int>{1, 2});
    CHECK(idx[2].v == std::vector<int>{2, 1});
  }

  SUBCASE("k=2 d=2 method low collapses the t=1 duplicate") {
    auto sel = select_V3_indices(2, 2, V3Method::low);
    auto idx = flat(sel, 0, 1);
    REQUIRE(idx.size() == 2);
    CHECK(idx[0].v == std::vector<int>{1, 1});
    CHECK(idx[1].v == std::vector<int>{2, 1});
  }

  SUBCASE("cardinality and order bounds for k <= 6") {
    for (int k = 1; k <= 6; ++k) {
      for (int d : {2, 3, 5}) {
        for (V3Method method : {V3Method::k, V3Method::low}) {
          auto sel = select_V3_indices(k, d, method);
          CHECK(sel.size() == static_cast<size_t>(d * (d - 1) / 2));
          for (const auto& pair : sel) {
            CHECK(pair.i < pair.j);
            CHECK(pair.indices.size() == static_cast<size_t>(k));
            for (const auto& idx : pair.indices) {
              int nonzero = 0;
              for (int e : idx.v) nonzero += (e != 0);
              CHECK(nonzero == 2);
              if (method == V3Method::k) {
                CHECK(idx.order() <= k + 1);
              } else {
                // (k+1)/2 + 1 for odd k, k/2 + 2 for even k.
                int bound = (k % 2 == 1) ? (k + 1) / 2 + 1 : k / 2 + 2;
                CHECK(idx.order() <= bound);
              }
            }
          }
          if (method == V3Method::low && k >= 3) {
            int max_order = 0;
            for (const auto& idx : sel.front().indices) max_order = std::max(max_order, idx.order());
            CHECK(max_order < k + 1);
          }
        }
      }
    }
  }
}

TEST_CASE("tensor index conversion") {
  CHECK(tensor_index(MomentIndex({1, 0, 2})) ==
        std::make_pair(3, std::vector<int>{1, 3, 3}));
  CHECK(tensor_index(MomentIndex({2, 0})) == std::make_pair(2, std::vector<int>{1, 1}));
  CHECK(tensor_index(MomentIndex({0, 1, 1, 0})) == std::make_pair(2, std::vector<int>{2, 3}));
  CHECK_THROWS_AS(tensor_index(MomentIndex({0, 0})), std::invalid_argument);

  SUBCASE("permutation equivariance") {
    Rng rng(55);
    for (int t = 0; t < 200; ++t) {
      std::vector<int> v(4);
      for (int& e : v) e = static_cast<int>(rng.uniform01() * 3);
      if (MomentIndex(v).order() == 0) v[0] = 1;
      auto [order, labels] = tensor_index(MomentIndex(v));
      // Reverse the dimensions: labels map through j -> d+1-j, re-sorted.
      std::vector<int> rev(v.rbegin(), v.rend());
      auto [order2, labels2] = tensor_index(MomentIndex(rev));
      CHECK(order == order2);
      std::vector<int> mapped;
      for (int l : labels) mapped.push_back(static_cast<int>(v.size()) + 1 - l);
      std::sort(mapped.begin(), mapped.end());
      CHECK(mapped == labels2);
    }
  }
}

TEST_CASE("sample moments") {
  SUBCASE("point mass") {
    Eigen::MatrixXd s(3, 2);
    s << 2, 3, 2, 3, 2, 3;
    MomentSets m = sample_moments(s, 1, V3Method::k);
    CHECK(m.mV1[0] == 1.0);
    CHECK(m.mV1[1] == doctest::Approx(2.0));
    CHECK(m.mV1[2] == doctest::Approx(4.0));
    CHECK(m.mV3.at(std::vector<int>{1, 1}) == doctest::Approx(6.0));
  }

  SUBCASE("single row gives exact powers") {
    Eigen::MatrixXd s(1, 3);
    s << 1.5, -2.0, 0.5;
    MomentSets m = sample_moments(s, 2, V3Method::low);
    for (int o = 1; o <= 6; ++o) CHECK(m.mV1[o] == doctest::Approx(std::pow(1.5, o)));
    for (int o = 1; o <= 5; ++o) CHECK(m.mV2[0][o - 1] == doctest::Approx(std::pow(-2.0, o)));
    for (const auto& [idx, val] : m.mV3) {
      double expect = std::pow(1.5, idx[0]) * std::pow(-2.0, idx[1]) * std::pow(0.5, idx[2]);
      CHECK(val == doctest::Approx(expect));
    }
  }

  SUBCASE("rejects empty input") {
    Eigen::MatrixXd s(0, 2);
    CHECK_THROWS_AS(sample_moments(s, 1, V3Method::k), std::invalid_argument);
  }

  SUBCASE("d=1 has empty mV2 and mV3") {
    Eigen::MatrixXd s(4, 1);
    s << 1, 2, 3, 4;
    MomentSets m = sample_moments(s, 2, V3Method::low);
    CHECK(m.mV2.empty());
    CHECK(m.mV3.empty());
  }

  SUBCASE("worked example sample lands near the printed first moments") {
    MixtureParams p = example_2d_sampling_mixture();
    Eigen::MatrixXd s = sample_mixture(p, 10000, 2024);
    MomentSets m = sample_moments(s, 2, V3Method::k);
    std::vector<double> printed{1, 0.266, 5.444, 6.473, 99.398, 214.853, 3126.467};
    for (size_t o = 1; o < printed.size(); ++o)
      CHECK(std::abs(m.mV1[o] - printed[o]) <= 0.15 * std::abs(printed[o]));
  }

  SUBCASE("parallel kernel is bitwise identical to the serial reference") {
    MixtureParams p = generate_params(4, 2, false, 77);
    Eigen::MatrixXd s = sample_mixture(p, 20000, 78);
    MomentSets a = sample_moments_serial(s, 2, V3Method::low);
    MomentSets b = sample_moments(s, 2, V3Method::low);
    CHECK(a.mV1 == b.mV1);
    CHECK(a.mV2 == b.mV2);
    CHECK(a.mV3 == b.mV3);
  }
}

TEST_CASE("Monte Carlo consistency of sample moments at 5 standard errors") {
  // For random small mixtures, every emitted sample moment must sit within
  // five (sample-estimated) standard errors of the exact moment.
  for (std::uint64_t seed : {101ULL, 102ULL, 103ULL}) {
    int d = 2 + static_cast<int>(seed % 2);
    int k = 1 + static_cast<int>(seed % 2);
    MixtureParams p = generate_params(d, k, false, seed);
    const Eigen::Index n = 1000000;
    Eigen::MatrixXd s = sample_mixture(p, n, seed + 7);
    MomentSets sm = sample_moments(s, k, V3Method::k);
    MomentSets ex = exact_moment_sets(p, V3Method::k);

    // Standard error estimated from the sample itself: sqrt((m2v - mv^2)/n).
    auto check_val = [&](const std::vector<std::pair<int, int>>& factors, double sampled,
                         double exact) {
      Eigen::ArrayXd mono = Eigen::ArrayXd::Ones(n);
      for (auto [dim, pow] : factors)
        for (int q = 0; q < pow; ++q) mono *= s.col(dim).array();
      double m2 = (mono * mono).mean();
      double se = std::sqrt(std::max(0.0, m2 - sampled * sampled) / static_cast<double>(n));
      CHECK(std::abs(sampled - exact) <= 5.0 * se + 1e-12);
    };

    for (int o = 1; o <= 3 * k; ++o) check_val({{0, o}}, sm.mV1[o], ex.mV1[o]);
    for (int i = 1; i < d; ++i)
      for (int o = 1; o <= 2 * k + 1; ++o)
        check_val({{i, o}}, sm.mV2[i - 1][o - 1], ex.mV2[i - 1][o - 1]);
    for (const auto& [idx, val] : sm.mV3) {
      std::vector<std::pair<int, int>> factors;
      for (size_t j = 0; j < idx.size(); ++j)
        if (idx[j] > 0) factors.push_back({static_cast<int>(j), idx[j]});
      check_val(factors, val, ex.mV3.at(idx));
    }
  }
}
