#pragma once

#include "subdiff/timestep.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace subdiff {

/// Box constraints c0 <= q <= c1 of the admissible set.
struct Bounds {
  double lower = 0.5;
  double upper = 5.0;
};

/// Stopping parameters. With a known noise level the discrepancy principle
/// ||U^N - z|| <= factor * noise_level ends the iteration; otherwise only the
/// gradient tolerance and the iteration cap apply.
struct StopRule {
  std::optional<double> noise_level;
  double discrepancy_factor = 1.1;
  double gradient_tolerance = 1e-8;
  std::size_t max_iterations = 200;
};

/// Conjugation rule for the search direction.
enum class BetaRule {
  fletcher_reeves,     ///< ||g_k||^2 / ||g_{k-1}||^2
  polak_ribiere_plus,  ///< max(0, (g_k, g_k - g_{k-1})) / ||g_{k-1}||^2
};

/// Everything one reconstruction needs.
struct InverseSpec {
  MeshPtr mesh;
  double alpha = 0.5;
  TimeGrid grid{1.0, 1};
  Field u0;      ///< X_h initial state (already L2-projected)
  Vector load;   ///< X_h load vector (f, phi_i)
  Field z_delta; ///< X_h observation of u(T)
  double gamma = 0.0;
  Bounds bounds;
  Field q_init;  ///< V_h initial guess
  StopRule stop;
  /// Halve a step that increases J (up to max_backtracks times), then restart with d = g.
  bool backtracking = true;
  BetaRule beta_rule = BetaRule::polak_ribiere_plus;
  int max_backtracks = 20;
  SolverOptions solver;

  /// Throws std::invalid_argument on inconsistent data.
  void validate() const;
};

/// Builds a spec from pointwise data; q_init defaults to the constant 1.
InverseSpec make_inverse_spec(const MeshPtr& mesh, double alpha, const TimeGrid& grid, const ScalarFunction& u0,
                              const ScalarFunction& f, Field z_delta, double gamma);

/// Raised when the linearized model has no curvature along a search direction.
class DegenerateDirectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Forward solve at one coefficient together with the objective split.
struct Evaluation {
  Field q;
  std::shared_ptr<const FractionalStepper> stepper;
  Trajectory forward;
  Field residual;  ///< U^N - z_delta on X_h
  double misfit = 0.0;
  double penalty = 0.0;
  double objective = 0.0;
};

Evaluation evaluate(const InverseSpec& spec, const Field& q);

struct ObjectiveValue {
  double objective;
  double misfit;
  double penalty;
};

/// J = 1/2 ||U^N(q) - z||^2 + gamma/2 |q|_{H1}^2.
ObjectiveValue objective(const InverseSpec& spec, const Field& q);

/// Derivative of J as a dual V_h vector: entry v is dJ/dq_v.
Field gradient(const InverseSpec& spec, const Field& q);
Field gradient(const InverseSpec& spec, const Evaluation& eval);

/// H1 Riesz map: solves (M + K(1)) g = -raw_gradient on V_h.
Field smooth_direction(const Field& raw_gradient);

struct CgDirection {
  Field direction;
  double beta;
};

/// d_k = beta_k d_{k-1} + g_k with L2 inner products in beta_k and beta_0 = 0.
/// A vanishing g_{k-1} restarts with beta = 0.
CgDirection cg_direction(const Field& g, const Field& g_prev, const Field& d_prev, std::size_t k,
                         BetaRule rule = BetaRule::fletcher_reeves);

/// Minimizer of J(q + s d) with the forward map linearized along d.
double step_size(const InverseSpec& spec, const Evaluation& eval, const Field& direction);

/// Nodal clamp onto [lower, upper].
Field project_admissible(const Field& q, double lower, double upper);

struct IterateState {
  std::size_t k = 0;
  Field q;
  double objective = 0.0;
  double misfit = 0.0;
  double penalty = 0.0;
  double grad_norm = 0.0;  ///< L2 norm of the smoothed gradient
  double step = 0.0;       ///< step taken from this iterate (0 for the last)
  int backtracks = 0;
  bool restarted = false;
};

struct InversionResult {
  Field q_star;
  std::vector<IterateState> history;
  Trajectory forward;  ///< forward trajectory at q_star
  bool converged = false;
  std::string stop_reason;
  std::size_t iterations = 0;  ///< accepted updates
};

/// Projected nonlinear conjugate gradient reconstruction.
InversionResult run_inversion(const InverseSpec& spec);

/// Nodal values uniform in [-1, 1], reproducible from `seed`.
std::vector<Field> random_directions(const MeshPtr& mesh, std::size_t count, std::uint64_t seed);

/// Relative mismatch |FD - <grad, d>| / max(|FD|, |<grad, d>|) per direction,
/// with FD the central difference of J using the given step.
std::vector<double> gradient_check(const InverseSpec& spec, const Field& q, const std::vector<Field>& directions,
                                   double step = 1e-4);

/// History as CSV: k,J,misfit,penalty,grad_norm,step.
std::string history_csv(const std::vector<IterateState>& history);

}  // namespace subdiff
