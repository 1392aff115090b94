#pragma once

#include "subdiff/fem.hpp"

#include <vector>

namespace subdiff {

/// Backward-Euler convolution quadrature weights: coefficients of (1 - z)^alpha.
struct CqWeights {
  double alpha = 1.0;
  std::vector<double> b;             ///< b_0 .. b_N
  std::vector<double> partial_sums;  ///< s_n = b_0 + ... + b_n
};

/// Weights b_0..b_N via b_j = b_{j-1} (j - 1 - alpha) / j.
CqWeights cq_weights(double alpha, std::size_t steps);

/// Uniform grid t_n = n tau on [0, T].
class TimeGrid {
 public:
  TimeGrid(double final_time, std::size_t steps);
  double final_time() const noexcept { return final_time_; }
  std::size_t steps() const noexcept { return steps_; }
  double tau() const noexcept { return tau_; }
  double t(std::size_t n) const noexcept { return n == steps_ ? final_time_ : static_cast<double>(n) * tau_; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double final_time_;
  std::size_t steps_;
  double tau_;
};

/// States U^0..U^N of one time-discrete solve, all X_h fields on one mesh.
struct Trajectory {
  TimeGrid grid;
  std::vector<Field> states;

  const Field& initial() const { return states.front(); }
  const Field& terminal() const { return states.back(); }
};

/// Output of the discrete adjoint solve.
struct AdjointSolution {
  /// lambda^1..lambda^N; states[n-1] pairs with forward state U^n.
  std::vector<Field> states;
  /// Per cell: sum over n of grad U^n . grad lambda^n.
  Vector cell_pairing;
  /// Dual V_h vector of the misfit derivative: entry v is d(misfit)/d(q_v).
  Vector misfit_gradient;
};

/// Fully discrete fractional diffusion operator for one coefficient.
///
/// Caches the X_h mass and stiffness matrices and one factorization of
/// tau^{-alpha} M + K(q), which every forward, linearized and adjoint step
/// reuses.
class FractionalStepper {
 public:
  FractionalStepper(const Field& q, double alpha, TimeGrid grid, SolverOptions options = {});

  /// U^0 = u0 (an X_h field); load is the X_h vector (f, phi_i).
  Trajectory forward(const Field& u0, const Vector& load) const;

  /// Derivative of the discrete forward map along the V_h direction d.
  Trajectory sensitivity(const Trajectory& forward, const Field& direction) const;

  /// Transpose of d -> W^N(d) applied to the X_h terminal residual, plus the
  /// misfit gradient (residual, W^N(d))_{L2} as a dual V_h vector.
  AdjointSolution adjoint(const Trajectory& forward, const Field& terminal_residual) const;

  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  double alpha() const noexcept { return weights_.alpha; }
  const TimeGrid& grid() const noexcept { return grid_; }
  const CqWeights& weights() const noexcept { return weights_; }
  const SparseMatrix& mass() const noexcept { return mass_; }
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }
  /// Linear solves performed against the cached factorization.
  std::size_t solve_count() const noexcept { return solver_.solve_count(); }

 private:
  void check_trajectory(const Trajectory& traj) const;

  MeshPtr mesh_;
  TimeGrid grid_;
  CqWeights weights_;
  double scale_;  // tau^{-alpha}
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  SpdSolver solver_;
};

Trajectory solve_forward(const MeshPtr& mesh, const Field& q, const ScalarFunction& u0, const ScalarFunction& f,
                         double alpha, const TimeGrid& grid, SolverOptions options = {});

Trajectory solve_sensitivity(const Trajectory& forward, const Field& q, const Field& direction, double alpha,
                             const TimeGrid& grid, SolverOptions options = {});

AdjointSolution solve_adjoint(const Trajectory& forward, const Field& q, double alpha, const TimeGrid& grid,
                              const Field& terminal_residual, SolverOptions options = {});

/// tau^{-alpha} sum_{j=0}^n b_j (U^{n-j} - U^0) for n = 1..N.
std::vector<Field> discrete_frac_derivative(const Trajectory& traj, double alpha);

}  // namespace subdiff
