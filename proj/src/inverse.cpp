#include "subdiff/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace subdiff {

namespace {

double mass_inner(const SparseMatrix& mass, const Vector& a, const Vector& b) { return a.dot(mass * b); }

}  // namespace

void InverseSpec::validate() const {
  if (!mesh) throw std::invalid_argument("inverse problem needs a mesh");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  if (!(bounds.lower > 0.0 && bounds.lower < bounds.upper))
    throw std::invalid_argument("bounds must satisfy 0 < c0 < c1");
  if (u0.mesh_ptr() != mesh || u0.space() != Space::interior)
    throw std::invalid_argument("initial state must be an X_h field on the inversion mesh");
  if (z_delta.mesh_ptr() != mesh || z_delta.space() != Space::interior)
    throw std::invalid_argument("observation must be an X_h field on the inversion mesh");
  if (q_init.mesh_ptr() != mesh || q_init.space() != Space::full)
    throw std::invalid_argument("initial coefficient must be a V_h field on the inversion mesh");
  if (static_cast<std::size_t>(load.size()) != mesh->num_interior())
    throw std::invalid_argument("load vector has wrong dimension");
  if (q_init.values().minCoeff() < bounds.lower || q_init.values().maxCoeff() > bounds.upper)
    throw std::invalid_argument("initial coefficient violates the bounds");
  if (stop.noise_level && !(*stop.noise_level >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");
}

InverseSpec make_inverse_spec(const MeshPtr& mesh, double alpha, const TimeGrid& grid, const ScalarFunction& u0,
                              const ScalarFunction& f, Field z_delta, double gamma) {
  return InverseSpec{.mesh = mesh,
                     .alpha = alpha,
                     .grid = grid,
                     .u0 = l2_project(mesh, u0),
                     .load = load_vector(*mesh, Space::interior, f),
                     .z_delta = std::move(z_delta),
                     .gamma = gamma,
                     .bounds = {},
                     .q_init = Field::constant(mesh, Space::full, 1.0),
                     .stop = {},
                     .solver = {}};
}

Evaluation evaluate(const InverseSpec& spec, const Field& q) {
  auto stepper = std::make_shared<const FractionalStepper>(q, spec.alpha, spec.grid, spec.solver);
  Trajectory forward = stepper->forward(spec.u0, spec.load);
  Field residual = forward.terminal() - spec.z_delta;
  const double misfit = 0.5 * mass_inner(stepper->mass(), residual.values(), residual.values());
  const SparseMatrix laplacian = assemble_laplacian(*spec.mesh, Space::full);
  const double penalty = 0.5 * spec.gamma * mass_inner(laplacian, q.values(), q.values());
  return Evaluation{.q = q,
                    .stepper = std::move(stepper),
                    .forward = std::move(forward),
                    .residual = std::move(residual),
                    .misfit = misfit,
                    .penalty = penalty,
                    .objective = misfit + penalty};
}

ObjectiveValue objective(const InverseSpec& spec, const Field& q) {
  const auto eval = evaluate(spec, q);
  return {eval.objective, eval.misfit, eval.penalty};
}

Field gradient(const InverseSpec& spec, const Evaluation& eval) {
  const auto adjoint = eval.stepper->adjoint(eval.forward, eval.residual);
  Vector dual = adjoint.misfit_gradient;
  if (spec.gamma != 0.0) dual += spec.gamma * (assemble_laplacian(*spec.mesh, Space::full) * eval.q.values());
  return Field(spec.mesh, Space::full, std::move(dual));
}

Field gradient(const InverseSpec& spec, const Field& q) { return gradient(spec, evaluate(spec, q)); }

Field smooth_direction(const Field& raw_gradient) {
  if (raw_gradient.space() != Space::full) throw std::invalid_argument("raw gradient must be a V_h vector");
  const Mesh& mesh = raw_gradient.mesh();
  const SpdSolver riesz(SparseMatrix(assemble_mass(mesh, Space::full) + assemble_laplacian(mesh, Space::full)));
  return Field(raw_gradient.mesh_ptr(), Space::full, riesz.solve(-raw_gradient.values()));
}

CgDirection cg_direction(const Field& g, const Field& g_prev, const Field& d_prev, std::size_t k, BetaRule rule) {
  if (k == 0) return {g, 0.0};
  const double prev = inner_l2(g_prev, g_prev);
  if (!(prev > 0.0)) return {g, 0.0};
  const double beta = rule == BetaRule::fletcher_reeves ? inner_l2(g, g) / prev
                                                        : std::max(0.0, inner_l2(g, g - g_prev) / prev);
  return {d_prev * beta + g, beta};
}

double step_size(const InverseSpec& spec, const Evaluation& eval, const Field& direction) {
  const Trajectory linearized = eval.stepper->sensitivity(eval.forward, direction);
  const Vector& w = linearized.terminal().values();
  const SparseMatrix& mass = eval.stepper->mass();
  double numerator = mass_inner(mass, eval.residual.values(), w);
  double denominator = mass_inner(mass, w, w);
  if (spec.gamma != 0.0) {
    const SparseMatrix laplacian = assemble_laplacian(*spec.mesh, Space::full);
    numerator += spec.gamma * mass_inner(laplacian, eval.q.values(), direction.values());
    denominator += spec.gamma * mass_inner(laplacian, direction.values(), direction.values());
  }
  if (!(denominator > 0.0) || !std::isfinite(denominator))
    throw DegenerateDirectionError("linearized model has no curvature along the search direction");
  return -numerator / denominator;
}

Field project_admissible(const Field& q, double lower, double upper) {
  return Field(q.mesh_ptr(), q.space(), q.values().cwiseMax(lower).cwiseMin(upper));
}

InversionResult run_inversion(const InverseSpec& spec) {
  spec.validate();
  const auto& bounds = spec.bounds;
  Evaluation current = evaluate(spec, project_admissible(spec.q_init, bounds.lower, bounds.upper));

  InversionResult result{
      .q_star = current.q, .history = {}, .forward = current.forward, .converged = false, .stop_reason = {}};
  std::optional<Field> g_prev, d_prev;
  std::size_t best = 0;

  for (std::size_t k = 0;; ++k) {
    const Field g = smooth_direction(gradient(spec, current));
    const double grad_norm = norm_l2(g);
    result.history.push_back(IterateState{.k = k,
                                          .q = current.q,
                                          .objective = current.objective,
                                          .misfit = current.misfit,
                                          .penalty = current.penalty,
                                          .grad_norm = grad_norm});
    if (current.objective < result.history[best].objective) best = k;

    if (spec.stop.noise_level &&
        std::sqrt(2.0 * current.misfit) <= spec.stop.discrepancy_factor * *spec.stop.noise_level) {
      result.converged = true;
      result.stop_reason = "discrepancy principle";
      break;
    }
    if (grad_norm <= spec.stop.gradient_tolerance) {
      result.converged = true;
      result.stop_reason = "gradient tolerance";
      break;
    }
    if (k >= spec.stop.max_iterations) {
      result.stop_reason = "iteration limit";
      break;
    }

    auto [direction, beta] = g_prev ? cg_direction(g, *g_prev, *d_prev, k, spec.beta_rule) : CgDirection{g, 0.0};
    bool restarted = false;
    std::optional<Evaluation> accepted;
    int backtracks = 0;
    double step = 0.0;
    // Try the conjugate direction first; fall back to steepest descent once.
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (beta == 0.0) break;
        direction = g;
        beta = 0.0;
        restarted = true;
      }
      try {
        step = step_size(spec, current, direction);
      } catch (const DegenerateDirectionError&) {
        continue;
      }
      backtracks = 0;
      for (;;) {
        Evaluation trial = evaluate(spec, project_admissible(current.q + direction * step, bounds.lower, bounds.upper));
        if (!spec.backtracking || trial.objective <= current.objective) {
          accepted = std::move(trial);
          break;
        }
        if (backtracks == spec.max_backtracks) break;
        step *= 0.5;
        ++backtracks;
      }
    }
    if (!accepted) {
      result.stop_reason = "no descent step found";
      break;
    }
    auto& record = result.history.back();
    record.step = step;
    record.backtracks = backtracks;
    record.restarted = restarted;
    g_prev = g;
    d_prev = direction;
    current = std::move(*accepted);
    ++result.iterations;
  }

  if (result.converged || best == result.history.size() - 1) {
    result.q_star = current.q;
    result.forward = current.forward;
  } else {
    result.q_star = result.history[best].q;
    result.forward = evaluate(spec, result.q_star).forward;
  }
  return result;
}

std::vector<Field> random_directions(const MeshPtr& mesh, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<Field> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector v(static_cast<Eigen::Index>(mesh->num_vertices()));
    for (auto& x : v) x = uniform(rng);
    out.emplace_back(mesh, Space::full, std::move(v));
  }
  return out;
}

std::vector<double> gradient_check(const InverseSpec& spec, const Field& q, const std::vector<Field>& directions,
                                   double step) {
  const Field grad = gradient(spec, q);
  std::vector<double> mismatch;
  mismatch.reserve(directions.size());
  for (const auto& d : directions) {
    const double analytic = grad.values().dot(d.values());
    const double plus = objective(spec, q + d * step).objective;
    const double minus = objective(spec, q - d * step).objective;
    const double fd = (plus - minus) / (2.0 * step);
    const double scale = std::max(std::abs(fd), std::abs(analytic));
    mismatch.push_back(scale == 0.0 ? 0.0 : std::abs(fd - analytic) / scale);
  }
  return mismatch;
}

std::string history_csv(const std::vector<IterateState>& history) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "k,J,misfit,penalty,grad_norm,step\n";
  for (const auto& s : history)
    out << s.k << ',' << s.objective << ',' << s.misfit << ',' << s.penalty << ',' << s.grad_norm << ',' << s.step
        << '\n';
  return out.str();
}

}  // namespace subdiff
