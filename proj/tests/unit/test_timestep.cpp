#include "subdiff/timestep.hpp"

#include <Eigen/SparseCholesky>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace subdiff;

namespace {

MeshPtr interval(std::size_t n) { return std::make_shared<const Mesh>(generate_interval_mesh(n)); }

// (-1)^j alpha (alpha-1) ... (alpha-j+1) / j! evaluated term by term.
double closed_form_weight(double alpha, int j) {
  double b = 1.0;
  for (int i = 0; i < j; ++i) b *= (alpha - i) / (i + 1);
  return (j % 2 == 0) ? b : -b;
}

Field random_field(const MeshPtr& m, Space s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dof_count(*m, s)));
  for (auto& x : v) x = u(rng);
  return Field(m, s, v);
}

const auto q_fun = [](const Point& p) { return 1.0 + 0.3 * std::sin(3.0 * p[0]); };
const auto u0_fun = [](const Point& p) { return p[0] * (1.0 - p[0]); };
const auto one = [](const Point&) { return 1.0; };

}  // namespace

TEST_CASE("CQ weights for alpha = 1") {
  const CqWeights w = cq_weights(1.0, 3);
  REQUIRE(w.b.size() == 4);
  CHECK(w.b[0] == 1.0);
  CHECK(w.b[1] == -1.0);
  CHECK(w.b[2] == 0.0);
  CHECK(w.b[3] == 0.0);
}

TEST_CASE("CQ weights for alpha = 1/2") {
  const CqWeights w = cq_weights(0.5, 3);
  CHECK(w.b[0] == 1.0);
  CHECK(w.b[1] == doctest::Approx(-0.5));
  CHECK(w.b[2] == doctest::Approx(-0.125));
  CHECK(w.b[3] == doctest::Approx(-0.0625));
}

TEST_CASE("CQ weights agree with the closed form and have the expected signs") {
  for (double alpha : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    CAPTURE(alpha);
    const CqWeights w = cq_weights(alpha, 200);
    for (int j = 0; j <= 200; ++j) {
      CHECK(std::abs(w.b[j] - closed_form_weight(alpha, j)) <= 1e-14);
      if (j > 0) CHECK(w.b[j] < 0.0);
    }
    double s = 0.0;
    for (int j = 0; j <= 200; ++j) {
      s += w.b[j];
      CHECK(w.partial_sums[j] == doctest::Approx(s).epsilon(1e-14));
      CHECK(w.partial_sums[j] > 0.0);
      if (j > 0) CHECK(w.partial_sums[j] < w.partial_sums[j - 1]);
    }
    CHECK(w.partial_sums[200] < w.partial_sums[20]);
    CHECK(w.partial_sums[20] < w.partial_sums[2]);
  }
}

TEST_CASE("CQ weights reject alpha outside (0, 1]") {
  CHECK_THROWS_AS(cq_weights(0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(cq_weights(1.5, 5), std::invalid_argument);
  CHECK(cq_weights(0.5, 0).b.size() == 1);
}

TEST_CASE("time grid") {
  const TimeGrid g(1.0, 30);
  CHECK(g.tau() == 1.0 / 30);
  CHECK(g.t(30) == 1.0);
  CHECK(g.t(0) == 0.0);
  CHECK(g.t(15) == doctest::Approx(0.5));
  CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(0.0, 4), std::invalid_argument);
}

TEST_CASE("zero data gives the zero trajectory") {
  const auto m = interval(16);
  const auto traj = solve_forward(m, interpolate(m, Space::full, q_fun), [](const Point&) { return 0.0; },
                                  [](const Point&) { return 0.0; }, 0.5, TimeGrid(1.0, 10));
  REQUIRE(traj.states.size() == 11);
  for (const auto& u : traj.states) CHECK(u.values().norm() == 0.0);
}

TEST_CASE("classical heat equation has first order in time") {
  const auto m = interval(200);
  const double T = 0.1;
  const Field exact = interpolate(m, Space::interior, [T](const Point& p) {
    return std::exp(-std::numbers::pi * std::numbers::pi * T) * std::sin(std::numbers::pi * p[0]);
  });
  std::vector<double> errors;
  for (std::size_t n : {10u, 20u, 40u}) {
    const auto traj = solve_forward(m, Field::constant(m, Space::full, 1.0),
                                    [](const Point& p) { return std::sin(std::numbers::pi * p[0]); },
                                    [](const Point&) { return 0.0; }, 1.0, TimeGrid(T, n));
    errors.push_back(norm_l2(traj.terminal() - exact));
  }
  CHECK(std::log2(errors[0] / errors[1]) == doctest::Approx(1.0).epsilon(0.15));
  CHECK(std::log2(errors[1] / errors[2]) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("alpha = 1 forward matches an independent backward-Euler stepper") {
  const auto m = std::make_shared<const Mesh>(generate_disk_mesh_rings(4));
  const Field q = interpolate(m, Space::full, [](const Point& p) { return 1.0 + 0.2 * p[0] * p[1]; });
  const TimeGrid grid(0.7, 25);
  const auto u0 = [](const Point& p) { return 1.0 - p[0] * p[0] - p[1] * p[1]; };
  const auto f = [](const Point& p) { return 1.0 + p[0]; };
  const Trajectory traj = solve_forward(m, q, u0, f, 1.0, grid);

  const SparseMatrix mass = assemble_mass(*m, Space::interior);
  const SparseMatrix a = SparseMatrix(mass / grid.tau() + assemble_stiffness(*m, Space::interior, q));
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
  const Vector load = load_vector(*m, Space::interior, f);
  Vector u = l2_project(m, u0).values();
  CHECK((traj.states[0].values() - u).norm() <= 1e-14 * u.norm());
  for (std::size_t n = 1; n <= grid.steps(); ++n) {
    u = ldlt.solve(Vector(mass * u / grid.tau() + load));
    CHECK((traj.states[n].values() - u).norm() <= 1e-13 * u.norm());
  }
}

TEST_CASE("one forward solve costs exactly N linear solves") {
  const auto m = interval(32);
  const FractionalStepper stepper(interpolate(m, Space::full, q_fun), 0.4, TimeGrid(1.0, 17));
  stepper.forward(l2_project(m, u0_fun), load_vector(*m, Space::interior, one));
  CHECK(stepper.solve_count() == 17);
}

TEST_CASE("homogeneous problems do not grow") {
  const auto m = interval(40);
  const Field q = interpolate(m, Space::full, q_fun);
  for (double alpha : {0.25, 0.5, 0.75, 1.0}) {
    const auto traj = solve_forward(m, q, [](const Point& p) { return std::sin(7 * p[0]) + p[0] * (1 - p[0]); },
                                    [](const Point&) { return 0.0; }, alpha, TimeGrid(2.0, 40));
    const double start = norm_l2(traj.initial());
    for (const auto& u : traj.states) CHECK(norm_l2(u) <= start * (1 + 1e-10));
  }
}

TEST_CASE("discrete fractional derivative") {
  const auto m = interval(24);
  const TimeGrid grid(1.0, 12);
  SUBCASE("constant trajectory") {
    const Field c = interpolate(m, Space::interior, u0_fun);
    const Trajectory traj{grid, std::vector<Field>(13, c)};
    for (const auto& d : discrete_frac_derivative(traj, 0.6)) CHECK(d.values().norm() == 0.0);
  }
  SUBCASE("alpha = 1 is the backward difference") {
    const auto traj = solve_forward(m, interpolate(m, Space::full, q_fun), u0_fun, one, 1.0, grid);
    const auto d = discrete_frac_derivative(traj, 1.0);
    for (std::size_t n = 1; n <= 12; ++n) {
      const Vector bd = (traj.states[n].values() - traj.states[n - 1].values()) / grid.tau();
      CHECK((d[n - 1].values() - bd).norm() <= 1e-12 * bd.norm());
    }
  }
  SUBCASE("scheme residual vanishes on a solved trajectory") {
    const Field q = interpolate(m, Space::full, q_fun);
    const auto traj = solve_forward(m, q, u0_fun, one, 0.35, grid);
    const auto d = discrete_frac_derivative(traj, 0.35);
    const SparseMatrix mass = assemble_mass(*m, Space::interior);
    const SparseMatrix k = assemble_stiffness(*m, Space::interior, q);
    const Vector load = load_vector(*m, Space::interior, one);
    for (std::size_t n = 1; n <= 12; ++n) {
      const Vector r = mass * d[n - 1].values() + k * traj.states[n].values() - load;
      CHECK(r.norm() <= 1e-11 * load.norm());
    }
  }
}

TEST_CASE("sensitivity is the derivative of the discrete forward map") {
  const auto m = interval(30);
  const Field q = interpolate(m, Space::full, q_fun);
  const Field d = random_field(m, Space::full, 3) * 0.3;
  const TimeGrid grid(1.0, 15);
  const double alpha = 0.6;
  const auto fwd = solve_forward(m, q, u0_fun, one, alpha, grid);
  const auto sens = solve_sensitivity(fwd, q, d, alpha, grid);
  CHECK(sens.states[0].values().norm() == 0.0);

  std::vector<double> errs;
  for (double eps : {0.2, 0.1}) {
    const auto plus = solve_forward(m, q + d * eps, u0_fun, one, alpha, grid).terminal();
    const auto minus = solve_forward(m, q - d * eps, u0_fun, one, alpha, grid).terminal();
    errs.push_back(norm_l2((plus - minus) * (0.5 / eps) - sens.terminal()));
  }
  // Central differences: halving the step divides the error by 4.
  CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.2));
  CHECK(errs[1] <= 1e-2 * norm_l2(sens.terminal()));

  SUBCASE("linear in the direction") {
    const auto twice = solve_sensitivity(fwd, q, d * 2.0, alpha, grid);
    for (std::size_t n = 0; n < twice.states.size(); ++n)
      CHECK((twice.states[n].values() - 2.0 * sens.states[n].values()).norm() <=
            1e-12 * (1 + sens.states[n].values().norm()));
  }
  SUBCASE("zero direction") {
    const auto zero = solve_sensitivity(fwd, q, Field::zeros(m, Space::full), alpha, grid);
    for (const auto& w : zero.states) CHECK(w.values().norm() == 0.0);
  }
}

TEST_CASE("adjoint is the transpose of the sensitivity map") {
  for (int dim : {1, 2}) {
    CAPTURE(dim);
    const MeshPtr m = dim == 1 ? interval(25) : std::make_shared<const Mesh>(generate_disk_mesh_rings(3));
    const Field q = interpolate(m, Space::full, [](const Point& p) { return 1.2 + 0.3 * p[0] - 0.1 * p[1]; });
    const TimeGrid grid(0.8, 12);
    const double alpha = 0.45;
    const auto fwd = solve_forward(m, q, [](const Point& p) { return 1 - p[0] * p[0] - p[1] * p[1]; }, one, alpha, grid);
    const Field residual = random_field(m, Space::interior, 11);
    const auto adj = solve_adjoint(fwd, q, alpha, grid, residual);
    const SparseMatrix mass = assemble_mass(*m, Space::interior);
    for (std::uint64_t k = 0; k < 5; ++k) {
      const Field d = random_field(m, Space::full, 20 + k);
      const double primal = residual.values().dot(mass * solve_sensitivity(fwd, q, d, alpha, grid).terminal().values());
      const double dual = adj.misfit_gradient.dot(d.values());
      CHECK(std::abs(primal - dual) <= 1e-10 * std::max(std::abs(primal), std::abs(dual)));
    }
  }
}

TEST_CASE("zero residual gives a zero adjoint") {
  const auto m = interval(10);
  const Field q = Field::constant(m, Space::full, 1.0);
  const TimeGrid grid(1.0, 5);
  const auto fwd = solve_forward(m, q, u0_fun, one, 0.5, grid);
  const auto adj = solve_adjoint(fwd, q, 0.5, grid, Field::zeros(m, Space::interior));
  CHECK(adj.misfit_gradient.norm() == 0.0);
  for (const auto& l : adj.states) CHECK(l.values().norm() == 0.0);
}

TEST_CASE("alpha = 1 adjoint matches the classical backward recursion") {
  const auto m = interval(20);
  const Field q = interpolate(m, Space::full, q_fun);
  const TimeGrid grid(0.5, 10);
  const auto fwd = solve_forward(m, q, u0_fun, one, 1.0, grid);
  const Field residual = random_field(m, Space::interior, 5);
  const auto adj = solve_adjoint(fwd, q, 1.0, grid, residual);

  // (M/tau + K) lambda^N = M r, (M/tau + K) lambda^n = M lambda^{n+1} / tau.
  const SparseMatrix mass = assemble_mass(*m, Space::interior);
  const SparseMatrix a = SparseMatrix(mass / grid.tau() + assemble_stiffness(*m, Space::interior, q));
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
  Vector lambda = ldlt.solve(Vector(mass * residual.values()));
  REQUIRE(adj.states.size() == 10);
  for (std::size_t n = 10; n >= 1; --n) {
    if (n < 10) lambda = ldlt.solve(Vector(mass * lambda / grid.tau()));
    CHECK((adj.states[n - 1].values() - lambda).norm() <= 1e-12 * lambda.norm());
  }
}

TEST_CASE("mismatched inputs are rejected") {
  const auto m = interval(10);
  const auto other = interval(10);
  const Field q = Field::constant(m, Space::full, 1.0);
  const auto fwd = solve_forward(m, q, u0_fun, one, 0.5, TimeGrid(1.0, 5));
  CHECK_THROWS_AS(solve_sensitivity(fwd, q, Field::zeros(m, Space::full), 0.5, TimeGrid(1.0, 6)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_adjoint(fwd, Field::constant(other, Space::full, 1.0), 0.5, TimeGrid(1.0, 5),
                                Field::zeros(other, Space::interior)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_forward(m, Field::constant(m, Space::full, -1.0), u0_fun, one, 0.5, TimeGrid(1.0, 5)),
                  InvalidCoefficientError);
}
