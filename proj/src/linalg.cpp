#include "subdiff/linalg.hpp"

#include <cmath>

namespace subdiff {

SpdSolver::SpdSolver(SparseMatrix matrix, SolverOptions options)
    : matrix_(std::move(matrix)), options_(options), state_(std::make_shared<State>()) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("SPD solver needs a square matrix");
  matrix_.makeCompressed();
  if (options_.method == SolverMethod::direct) {
    state_->llt.compute(matrix_);
    if (state_->llt.info() != Eigen::Success) throw NotSpdError("Cholesky factorization hit a nonpositive pivot");
    return;
  }
  Vector diagonal = matrix_.diagonal();
  for (Eigen::Index i = 0; i < diagonal.size(); ++i)
    if (!(diagonal[i] > 0.0)) throw NotSpdError("nonpositive diagonal entry at row " + std::to_string(i));
  state_->inv_diagonal = diagonal.cwiseInverse();
}

Vector SpdSolver::solve(const Vector& rhs) const {
  if (rhs.size() != matrix_.rows()) throw std::invalid_argument("right-hand side has wrong dimension");
  ++state_->solves;
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Vector::Zero(rhs.size());
  if (options_.method == SolverMethod::pcg) return solve_pcg(rhs);

  Vector x = state_->llt.solve(rhs);
  for (int sweep = 0; sweep < 2; ++sweep) {
    const Vector r = rhs - matrix_ * x;
    if (r.norm() <= options_.tolerance * bnorm) break;
    x += state_->llt.solve(r);
  }
  return x;
}

Vector SpdSolver::solve_pcg(const Vector& rhs) const {
  const double bnorm = rhs.norm();
  const Vector& inv_diag = state_->inv_diagonal;
  Vector x = Vector::Zero(rhs.size());
  Vector r = rhs;
  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 0; it < options_.max_iterations; ++it) {
    const Vector ap = matrix_ * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) throw NotSpdError("conjugate gradients met a direction of nonpositive curvature");
    const double step = rz / pap;
    x += step * p;
    r -= step * ap;
    if (r.norm() <= options_.tolerance * bnorm) return x;
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  const double achieved = (rhs - matrix_ * x).norm() / bnorm;
  throw ConvergenceError("conjugate gradients did not converge; relative residual " + std::to_string(achieved),
                         achieved, options_.max_iterations);
}

double relative_asymmetry(const SparseMatrix& matrix) {
  const SparseMatrix transposed = matrix.transpose();
  const SparseMatrix diff = matrix - transposed;
  double max_entry = 0.0, max_diff = 0.0;
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it) max_entry = std::max(max_entry, std::abs(it.value()));
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) max_diff = std::max(max_diff, std::abs(it.value()));
  return max_entry == 0.0 ? 0.0 : max_diff / max_entry;
}

}  // namespace subdiff
