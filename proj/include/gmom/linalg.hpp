#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace gmom {

// Raised when a pivot of the LU factorization falls below tolerance; in the
// recovery pipeline this signals a degenerate moment configuration.
struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LinearSolveResult {
  Eigen::VectorXd x;
  double condition = 0.0;  // infinity-norm condition estimate
};

// Pivoted LU solve of a square system. Throws SingularMatrixError when a
// pivot falls below 1e-12 * ||A||_inf.
LinearSolveResult solve_linear(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

struct SymEigResult {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns
};

// Eigendecomposition of a symmetric matrix; rejects input whose asymmetry
// exceeds 1e-10.
SymEigResult sym_eig(const Eigen::MatrixXd& S);

}  // namespace gmom
