#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

namespace gmom {

// Parameters of a k-component d-dimensional Gaussian mixture.
// weights lie on the open simplex, each covariance is symmetric positive
// definite. Validation is reported, not thrown: invalid data is a result,
// not a programming error.
struct MixtureParams {
  int k = 0;
  int d = 0;
  std::vector<double> weights;           // size k
  std::vector<Eigen::VectorXd> means;    // k vectors of size d
  std::vector<Eigen::MatrixXd> covariances;  // k matrices d x d
};

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> violations;
};

// Tolerances used by validate_params. The weight-sum check is looser than
// the symmetry check because weights accumulate rounding from normalization.
inline constexpr double kWeightSumTol = 1e-9;
inline constexpr double kSymmetryTol = 1e-12;

ValidationResult validate_params(const MixtureParams& p);

// Multi-index v identifying the moment m_v = E[X_1^{v_1} ... X_d^{v_d}].
struct MomentIndex {
  std::vector<int> v;

  MomentIndex() = default;
  explicit MomentIndex(std::vector<int> entries) : v(std::move(entries)) {}

  int order() const {
    int t = 0;
    for (int e : v) t += e;
    return t;
  }
  bool operator==(const MomentIndex& o) const { return v == o.v; }
  bool operator<(const MomentIndex& o) const { return v < o.v; }
};

enum class V3Method { k, low };

std::string to_string(V3Method m);
V3Method v3_method_from_string(const std::string& s);

// The three empirical-moment collections consumed by the recovery pipeline.
//   mV1: [m_0=1, m_{e_1}, ..., m_{3k e_1}]          (3k+1 entries; 3k entries
//        are accepted for d=1 inputs that lack the selection moment)
//   mV2: row i-2 holds [m_{e_i}, ..., m_{(2k+1) e_i}] for i = 2..d
//   mV3: off-diagonal moments keyed by multi-index, exactly two nonzero
//        entries at positions i < j
struct MomentSets {
  std::vector<double> mV1;
  std::vector<std::vector<double>> mV2;
  std::map<std::vector<int>, double> mV3;
  V3Method method = V3Method::k;

  int dimension() const { return static_cast<int>(mV2.size()) + 1; }
};

}  // namespace gmom
