#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>

namespace subdiff {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Factorization or CG breakdown: the matrix is not symmetric positive definite.
class NotSpdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solve hit its iteration cap; carries the relative residual reached.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

enum class SolverMethod { direct, pcg };

struct SolverOptions {
  SolverMethod method = SolverMethod::direct;
  /// Relative residual target ||Ax - b|| <= tolerance * ||b||.
  double tolerance = 1e-12;
  int max_iterations = 20000;
};

/// Reusable SPD solver. The direct method holds a sparse Cholesky factor and
/// polishes each solution with up to two steps of iterative refinement; the
/// iterative method is Jacobi-preconditioned conjugate gradients.
///
/// Immutable after construction; concurrent solve() calls are safe.
class SpdSolver {
 public:
  explicit SpdSolver(SparseMatrix matrix, SolverOptions options = {});

  Vector solve(const Vector& rhs) const;

  std::size_t size() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const SparseMatrix& matrix() const noexcept { return matrix_; }
  const SolverOptions& options() const noexcept { return options_; }
  /// Number of solve() calls served so far.
  std::size_t solve_count() const noexcept { return state_->solves.load(); }

 private:
  Vector solve_pcg(const Vector& rhs) const;

  struct State {
    Eigen::SimplicialLLT<SparseMatrix> llt;
    Vector inv_diagonal;
    std::atomic<std::size_t> solves{0};
  };

  SparseMatrix matrix_;
  SolverOptions options_;
  std::shared_ptr<State> state_;
};

inline SpdSolver factorize(const SparseMatrix& matrix, SolverOptions options = {}) {
  return SpdSolver(matrix, options);
}

/// max |A - A^T| entry divided by the max |A| entry.
double relative_asymmetry(const SparseMatrix& matrix);

}  // namespace subdiff
