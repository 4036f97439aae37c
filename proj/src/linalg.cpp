#include "gmom/linalg.hpp"

#include <Eigen/Dense>
#include <sstream>

namespace gmom {

LinearSolveResult solve_linear(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != A.cols()) throw std::invalid_argument("solve_linear: matrix must be square");
  if (A.rows() != b.size()) throw std::invalid_argument("solve_linear: size mismatch");

  const double norm_a = A.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (min_pivot < 1e-12 * norm_a || norm_a == 0.0) {
    std::ostringstream os;
    os << "solve_linear: singular to tolerance (pivot " << min_pivot << ", ||A||_inf " << norm_a
       << ")";
    throw SingularMatrixError(os.str());
  }

  LinearSolveResult r;
  r.x = lu.solve(b);
  Eigen::MatrixXd inv = lu.inverse();
  r.condition = norm_a * inv.cwiseAbs().rowwise().sum().maxCoeff();
  return r;
}

SymEigResult sym_eig(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("sym_eig: matrix must be square");
  double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    std::ostringstream os;
    os << "sym_eig: input not symmetric (max asymmetry " << asym << ")";
    throw std::invalid_argument(os.str());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace gmom
