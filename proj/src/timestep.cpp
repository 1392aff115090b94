#include "subdiff/timestep.hpp"

#include <cmath>

namespace subdiff {

CqWeights cq_weights(double alpha, std::size_t steps) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("fractional order must lie in (0, 1]");
  CqWeights w;
  w.alpha = alpha;
  w.b.resize(steps + 1);
  w.partial_sums.resize(steps + 1);
  w.b[0] = 1.0;
  w.partial_sums[0] = 1.0;
  for (std::size_t j = 1; j <= steps; ++j) {
    const double jd = static_cast<double>(j);
    w.b[j] = w.b[j - 1] * (jd - 1.0 - alpha) / jd;
    w.partial_sums[j] = w.partial_sums[j - 1] + w.b[j];
  }
  return w;
}

TimeGrid::TimeGrid(double final_time, std::size_t steps)
    : final_time_(final_time), steps_(steps), tau_(final_time / static_cast<double>(steps)) {
  if (steps == 0) throw std::invalid_argument("time grid needs at least one step");
  if (!(final_time > 0.0)) throw std::invalid_argument("final time must be positive");
}

FractionalStepper::FractionalStepper(const Field& q, double alpha, TimeGrid grid, SolverOptions options)
    : mesh_(q.mesh_ptr()),
      grid_(grid),
      weights_(cq_weights(alpha, grid.steps())),
      scale_(std::pow(grid.tau(), -alpha)),
      mass_(assemble_mass(*mesh_, Space::interior)),
      stiffness_(assemble_stiffness(*mesh_, Space::interior, q)),
      solver_(SparseMatrix(scale_ * weights_.b[0] * mass_ + stiffness_), options) {}

void FractionalStepper::check_trajectory(const Trajectory& traj) const {
  if (!(traj.grid == grid_) || traj.states.size() != grid_.steps() + 1)
    throw std::invalid_argument("trajectory does not match the stepper's time grid");
  if (traj.states.front().mesh_ptr() != mesh_ || traj.states.front().space() != Space::interior)
    throw std::invalid_argument("trajectory does not live on the stepper's X_h space");
}

Trajectory FractionalStepper::forward(const Field& u0, const Vector& load) const {
  if (u0.mesh_ptr() != mesh_ || u0.space() != Space::interior)
    throw std::invalid_argument("initial state must be an X_h field on the stepper's mesh");
  if (load.size() != u0.values().size()) throw std::invalid_argument("load vector has wrong dimension");
  const std::size_t steps = grid_.steps();
  const auto& b = weights_.b;
  std::vector<Vector> u;
  u.reserve(steps + 1);
  u.push_back(u0.values());
  Vector history(u0.values().size());
  for (std::size_t n = 1; n <= steps; ++n) {
    // s_n U^0 - sum_{j=1}^{n} b_j U^{n-j}
    history = weights_.partial_sums[n] * u[0];
    for (std::size_t j = 1; j <= n; ++j) history -= b[j] * u[n - j];
    u.push_back(solver_.solve(load + scale_ * (mass_ * history)));
  }
  Trajectory traj{grid_, {}};
  traj.states.reserve(steps + 1);
  for (auto& v : u) traj.states.emplace_back(mesh_, Space::interior, std::move(v));
  return traj;
}

Trajectory FractionalStepper::sensitivity(const Trajectory& forward, const Field& direction) const {
  check_trajectory(forward);
  if (direction.mesh_ptr() != mesh_ || direction.space() != Space::full)
    throw std::invalid_argument("direction must be a V_h field on the stepper's mesh");
  const std::size_t steps = grid_.steps();
  const auto& b = weights_.b;
  const SparseMatrix k_dir = assemble_weighted_stiffness(*mesh_, Space::interior, direction.values());
  const auto n_dof = static_cast<Eigen::Index>(mesh_->num_interior());
  std::vector<Vector> w;
  w.reserve(steps + 1);
  w.push_back(Vector::Zero(n_dof));
  Vector history(n_dof);
  for (std::size_t n = 1; n <= steps; ++n) {
    history.setZero();
    for (std::size_t j = 1; j < n; ++j) history -= b[j] * w[n - j];
    w.push_back(solver_.solve(scale_ * (mass_ * history) - k_dir * forward.states[n].values()));
  }
  Trajectory traj{grid_, {}};
  traj.states.reserve(steps + 1);
  for (auto& v : w) traj.states.emplace_back(mesh_, Space::interior, std::move(v));
  return traj;
}

AdjointSolution FractionalStepper::adjoint(const Trajectory& forward, const Field& terminal_residual) const {
  check_trajectory(forward);
  if (terminal_residual.mesh_ptr() != mesh_ || terminal_residual.space() != Space::interior)
    throw std::invalid_argument("terminal residual must be an X_h field on the stepper's mesh");
  const std::size_t steps = grid_.steps();
  const auto& b = weights_.b;
  const auto n_dof = static_cast<Eigen::Index>(mesh_->num_interior());

  // Backward sweep of the transposed block-triangular system:
  //   A lambda^m = [m == N] M r - tau^{-alpha} sum_{n>m} b_{n-m} M lambda^n.
  std::vector<Vector> lambda(steps + 1);
  std::vector<Vector> mass_lambda(steps + 1);
  Vector rhs(n_dof);
  for (std::size_t m = steps; m >= 1; --m) {
    rhs.setZero();
    for (std::size_t n = m + 1; n <= steps; ++n) rhs -= b[n - m] * mass_lambda[n];
    rhs *= scale_;
    if (m == steps) rhs += mass_ * terminal_residual.values();
    lambda[m] = solver_.solve(rhs);
    mass_lambda[m] = mass_ * lambda[m];
  }

  AdjointSolution out;
  out.cell_pairing = Vector::Zero(static_cast<Eigen::Index>(mesh_->num_cells()));
  out.states.reserve(steps);
  for (std::size_t n = 1; n <= steps; ++n) {
    Field state(mesh_, Space::interior, std::move(lambda[n]));
    out.cell_pairing += cell_gradient_products(*mesh_, forward.states[n].nodal(), state.nodal());
    out.states.push_back(std::move(state));
  }
  out.misfit_gradient = -cellwise_load(*mesh_, out.cell_pairing);
  return out;
}

Trajectory solve_forward(const MeshPtr& mesh, const Field& q, const ScalarFunction& u0, const ScalarFunction& f,
                         double alpha, const TimeGrid& grid, SolverOptions options) {
  if (q.mesh_ptr() != mesh) throw std::invalid_argument("coefficient lives on a different mesh");
  const FractionalStepper stepper(q, alpha, grid, options);
  return stepper.forward(l2_project(mesh, u0), load_vector(*mesh, Space::interior, f));
}

Trajectory solve_sensitivity(const Trajectory& forward, const Field& q, const Field& direction, double alpha,
                             const TimeGrid& grid, SolverOptions options) {
  const FractionalStepper stepper(q, alpha, grid, options);
  return stepper.sensitivity(forward, direction);
}

AdjointSolution solve_adjoint(const Trajectory& forward, const Field& q, double alpha, const TimeGrid& grid,
                              const Field& terminal_residual, SolverOptions options) {
  const FractionalStepper stepper(q, alpha, grid, options);
  return stepper.adjoint(forward, terminal_residual);
}

std::vector<Field> discrete_frac_derivative(const Trajectory& traj, double alpha) {
  const std::size_t steps = traj.states.size() - 1;
  const auto w = cq_weights(alpha, steps);
  const double scale = std::pow(traj.grid.tau(), -alpha);
  const Vector& u0 = traj.states[0].values();
  std::vector<Field> out;
  out.reserve(steps);
  for (std::size_t n = 1; n <= steps; ++n) {
    Vector acc = Vector::Zero(u0.size());
    for (std::size_t j = 0; j <= n; ++j) acc += w.b[j] * (traj.states[n - j].values() - u0);
    out.emplace_back(traj.states[0].mesh_ptr(), traj.states[0].space(), scale * acc);
  }
  return out;
}

}  // namespace subdiff
