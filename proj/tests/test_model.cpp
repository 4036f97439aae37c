#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gmom/bench.hpp"
#include "gmom/model.hpp"
#include "gmom/rng.hpp"

using namespace gmom;

namespace {

MixtureParams single_component_1d() {
  MixtureParams p;
  p.k = 1;
  p.d = 1;
  p.weights = {1.0};
  p.means = {Eigen::VectorXd::Zero(1)};
  p.covariances = {Eigen::MatrixXd::Identity(1, 1)};
  return p;
}

}  // namespace

TEST_CASE("identity case validates") {
  CHECK(validate_params(single_component_1d()).ok);
}

TEST_CASE("weight sum violation is reported") {
  MixtureParams p;
  p.k = 2;
  p.d = 1;
  p.weights = {0.5, 0.6};
  p.means = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  p.covariances = {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
  ValidationResult r = validate_params(p);
  CHECK_FALSE(r.ok);
  bool found = false;
  for (const auto& v : r.violations)
    if (v.find("sum") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("indefinite covariance is reported with its eigenvalue") {
  // [[1, 2], [2, 1]] has eigenvalues 3 and -1.
  MixtureParams p;
  p.k = 1;
  p.d = 2;
  p.weights = {1.0};
  p.means = {Eigen::VectorXd::Zero(2)};
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  p.covariances = {c};
  ValidationResult r = validate_params(p);
  CHECK_FALSE(r.ok);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].find("positive definite") != std::string::npos);
  CHECK(r.violations[0].find("-1") != std::string::npos);
}

TEST_CASE("random M*M^T covariances validate over 1000 seeded draws") {
  Rng dims(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    int d = 1 + static_cast<int>(dims.uniform01() * 50);
    MixtureParams p = generate_params(d, 1 + (trial % 3), false, 1000 + trial);
    ValidationResult r = validate_params(p);
    if (!r.ok) {
      CAPTURE(trial);
      CAPTURE(r.violations.front());
    }
    REQUIRE(r.ok);
  }
}

TEST_CASE("validate_params is deterministic") {
  MixtureParams p = generate_params(4, 2, false, 99);
  ValidationResult a = validate_params(p);
  ValidationResult b = validate_params(p);
  CHECK(a.ok == b.ok);
  CHECK(a.violations == b.violations);
}

TEST_CASE("moment index order") {
  MomentIndex v({1, 0, 2});
  CHECK(v.order() == 3);
}
