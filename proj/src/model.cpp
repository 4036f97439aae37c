#include "gmom/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gmom {

std::string to_string(V3Method m) { return m == V3Method::k ? "k" : "low"; }

V3Method v3_method_from_string(const std::string& s) {
  if (s == "k") return V3Method::k;
  if (s == "low") return V3Method::low;
  throw std::invalid_argument("unknown V3 method '" + s + "' (expected \"k\" or \"low\")");
}

ValidationResult validate_params(const MixtureParams& p) {
  ValidationResult r;
  auto fail = [&r](const std::string& msg) {
    r.ok = false;
    r.violations.push_back(msg);
  };

  if (p.k < 1) fail("k must be a positive integer");
  if (p.d < 1) fail("d must be a positive integer");
  if (static_cast<int>(p.weights.size()) != p.k) fail("weights must have k entries");
  if (static_cast<int>(p.means.size()) != p.k) fail("means must have k entries");
  if (static_cast<int>(p.covariances.size()) != p.k) fail("covariances must have k entries");
  if (!r.ok) return r;

  double wsum = 0.0;
  for (int l = 0; l < p.k; ++l) {
    if (!(p.weights[l] > 0.0)) {
      std::ostringstream os;
      os << "weight " << l << " not strictly positive (" << p.weights[l] << ")";
      fail(os.str());
    }
    wsum += p.weights[l];
  }
  if (std::abs(wsum - 1.0) > kWeightSumTol) {
    std::ostringstream os;
    os << "weights sum != 1 (sum = " << wsum << ")";
    fail(os.str());
  }

  for (int l = 0; l < p.k; ++l) {
    if (p.means[l].size() != p.d) {
      std::ostringstream os;
      os << "mean " << l << " has wrong dimension";
      fail(os.str());
      continue;
    }
  }

  for (int l = 0; l < p.k; ++l) {
    const Eigen::MatrixXd& s = p.covariances[l];
    if (s.rows() != p.d || s.cols() != p.d) {
      std::ostringstream os;
      os << "covariance " << l << " is not d x d";
      fail(os.str());
      continue;
    }
    double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol) {
      std::ostringstream os;
      os << "covariance " << l << " not symmetric (max asymmetry " << asym << ")";
      fail(os.str());
      continue;
    }
    // Smallest eigenvalue of the symmetrized matrix, so the report can name
    // the offending eigenvalue instead of a factorization failure.
    Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > 0.0)) {
      std::ostringstream os;
      os << "covariance " << l << " not positive definite (smallest eigenvalue " << lmin << ")";
      fail(os.str());
    }
  }

  return r;
}

}  // namespace gmom
