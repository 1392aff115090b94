#include "subdiff/fem.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace subdiff;

namespace {

MeshPtr interval(std::size_t n) { return std::make_shared<const Mesh>(generate_interval_mesh(n)); }
MeshPtr disk(int rings) { return std::make_shared<const Mesh>(generate_disk_mesh_rings(rings)); }

double entry(const SparseMatrix& a, int i, int j) { return a.coeff(i, j); }

double max_abs(const SparseMatrix& a) {
  double m = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double fitted_order(const std::vector<double>& h, const std::vector<double>& e) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(e[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

const auto sine = [](const Point& p) { return std::sin(std::numbers::pi * p[0]); };

}  // namespace

TEST_CASE("1D mass matrix rows") {
  const auto m = interval(8);
  const double h = 1.0 / 8;
  const SparseMatrix mass = assemble_mass(*m, Space::full);
  CHECK(entry(mass, 3, 2) == doctest::Approx(h / 6));
  CHECK(entry(mass, 3, 3) == doctest::Approx(2 * h / 3));
  CHECK(entry(mass, 3, 4) == doctest::Approx(h / 6));
  CHECK(entry(mass, 0, 0) == doctest::Approx(h / 3));
  CHECK(Vector::Ones(9).dot(mass * Vector::Ones(9)) == doctest::Approx(1.0));
}

TEST_CASE("mass matrix of a single unit-area triangle") {
  // Right triangle with legs sqrt(2) has unit area.
  const double l = std::sqrt(2.0);
  const Mesh tri(2, {{0, 0}, {l, 0}, {0, l}}, {{0, 1, 2}}, {1, 1, 1}, Domain::polygon);
  const SparseMatrix mass = assemble_mass(tri, Space::full);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(entry(mass, i, j) == doctest::Approx(i == j ? 1.0 / 6 : 1.0 / 12));
}

TEST_CASE("mass entries sum to the domain measure") {
  const auto m = disk(4);
  const SparseMatrix mass = assemble_mass(*m, Space::full);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(m->num_vertices()));
  CHECK(ones.dot(mass * ones) == doctest::Approx(m->measure()).epsilon(1e-13));
}

TEST_CASE("1D stiffness with unit coefficient") {
  const auto m = interval(8);
  const double h = 1.0 / 8;
  const SparseMatrix k = assemble_stiffness(*m, Space::interior, Field::constant(m, Space::full, 1.0));
  REQUIRE(k.rows() == 7);
  CHECK(entry(k, 2, 1) == doctest::Approx(-1 / h));
  CHECK(entry(k, 2, 2) == doctest::Approx(2 / h));
  CHECK(entry(k, 2, 3) == doctest::Approx(-1 / h));
  CHECK(entry(k, 2, 5) == 0.0);
}

TEST_CASE("stiffness is linear in the coefficient and annihilates constants") {
  const auto m = disk(3);
  const Field q = interpolate(m, Space::full, [](const Point& p) { return 1.0 + p[0] * p[0] + 0.5 * p[1]; });
  const SparseMatrix k = assemble_stiffness(*m, Space::full, q);
  const SparseMatrix k3 = assemble_stiffness(*m, Space::full, q * 3.0);
  CHECK(max_abs(SparseMatrix(k3 - 3.0 * k)) <= 1e-13 * max_abs(k3));
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(m->num_vertices()));
  CHECK((k * ones).cwiseAbs().maxCoeff() <= 1e-13 * max_abs(k));
}

TEST_CASE("stiffness rejects nonpositive coefficients") {
  const auto m = interval(4);
  Vector q = Vector::Ones(5);
  q[2] = 0.0;
  CHECK_THROWS_AS(assemble_stiffness(*m, Space::interior, Field(m, Space::full, q)), InvalidCoefficientError);
}

TEST_CASE("assembled matrices are symmetric") {
  const auto m = disk(5);
  const Field q = interpolate(m, Space::full, [](const Point& p) { return 2.0 + std::sin(p[0] + 2 * p[1]); });
  for (Space s : {Space::full, Space::interior}) {
    CHECK(relative_asymmetry(assemble_mass(*m, s)) <= 1e-14);
    CHECK(relative_asymmetry(assemble_stiffness(*m, s, q)) <= 1e-14);
  }
}

TEST_CASE("threaded assembly matches serial assembly") {
  const auto m = disk(8);
  const Field q = interpolate(m, Space::full, [](const Point& p) { return 1.5 + p[0] * p[1]; });
  const SparseMatrix serial = assemble_stiffness(*m, Space::interior, q, 1);
  const SparseMatrix threaded = assemble_stiffness(*m, Space::interior, q, 4);
  CHECK(max_abs(SparseMatrix(serial - threaded)) <= 1e-14 * max_abs(serial));
  const SparseMatrix ms = assemble_mass(*m, Space::full, 1);
  const SparseMatrix mt = assemble_mass(*m, Space::full, 3);
  CHECK(max_abs(SparseMatrix(ms - mt)) <= 1e-14 * max_abs(ms));
}

TEST_CASE("X_h stiffness is positive definite") {
  const auto m = disk(4);
  const SparseMatrix k = assemble_stiffness(*m, Space::interior, Field::constant(m, Space::full, 1.0));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Vector b(k.rows());
  for (auto& x : b) x = normal(rng);
  const SpdSolver cg(k, {.method = SolverMethod::pcg, .tolerance = 1e-12, .max_iterations = 5000});
  const Vector x = cg.solve(b);
  CHECK((k * x - b).norm() <= 1e-12 * b.norm() * 10);
  CHECK(x.dot(k * x) > 0.0);
}

TEST_CASE("interpolation") {
  const auto m = interval(10);
  const Field one = interpolate(m, Space::full, [](const Point&) { return 1.0; });
  CHECK(one.values() == Vector::Ones(11));
  const Field interior = interpolate(m, Space::interior, sine);
  CHECK(interior.size() == 9);
  CHECK(interior.nodal()[0] == 0.0);
  CHECK(interior.nodal()[10] == 0.0);

  const auto mid = interval(2);
  const auto q_true = [](const Point& p) {
    return std::max(std::min(1.0 + 0.25 * std::sin(std::numbers::pi * p[0]), 319.0 / 256.0), 67.0 / 64.0);
  };
  CHECK(interpolate(mid, Space::full, q_true).values()[1] == 319.0 / 256.0);
}

TEST_CASE("interpolation and projection converge at the optimal orders") {
  std::vector<double> hs, e_interp, e_proj, e_interp_h1;
  for (std::size_t n : {8u, 16u, 32u, 64u}) {
    // Errors measured on a much finer mesh against the exact function.
    const auto coarse = interval(n);
    const auto fine = interval(n * 32);
    const Field exact = interpolate(fine, Space::full, sine);
    const Field pi_h = transfer(interpolate(coarse, Space::full, sine), fine, Space::full);
    const auto u0 = [](const Point& p) { return p[0] * (1 - p[0]); };
    const Field p_h = transfer(l2_project(coarse, u0).to_full(), fine, Space::full);
    hs.push_back(1.0 / static_cast<double>(n));
    e_interp.push_back(norm_l2(exact - pi_h));
    e_interp_h1.push_back(seminorm_h1(exact - pi_h));
    e_proj.push_back(norm_l2(interpolate(fine, Space::full, u0) - p_h));
  }
  CHECK(fitted_order(hs, e_interp) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(fitted_order(hs, e_interp_h1) == doctest::Approx(1.0).epsilon(0.2));
  CHECK(fitted_order(hs, e_proj) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("L2 projection") {
  SUBCASE("identity on X_h") {
    const auto m = disk(3);
    const Field v = interpolate(m, Space::interior, [](const Point& p) { return std::cos(p[0]) * (1 - p[1]); });
    const Field pv = l2_project(v);
    CHECK((pv.values() - v.values()).norm() <= 1e-11 * v.values().norm());
  }
  SUBCASE("constant data away from the boundary") {
    const auto m = interval(64);
    const Field p = l2_project(m, [](const Point&) { return 1.0; });
    const Vector nodal = p.nodal();
    CHECK(nodal[32] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(nodal[1] - 1.0) > 1e-3);
  }
}

TEST_CASE("norms") {
  const auto m = interval(40);
  const Field zero = Field::zeros(m, Space::full);
  CHECK(norm_l2(zero) == 0.0);
  CHECK(seminorm_h1(zero) == 0.0);
  CHECK(norm_linf(zero) == 0.0);
  CHECK(seminorm_w1inf(zero) == 0.0);

  const Field x = interpolate(m, Space::full, [](const Point& p) { return p[0]; });
  CHECK(seminorm_h1(x) == doctest::Approx(1.0));
  CHECK(seminorm_w1inf(x) == doctest::Approx(1.0));
  CHECK(norm_l2(x) == doctest::Approx(std::sqrt(1.0 / 3)));

  double previous = 1.0;
  for (std::size_t n : {10u, 40u, 160u, 640u}) {
    const double err = std::abs(norm_l2(interpolate(interval(n), Space::full, sine)) - std::sqrt(0.5));
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 1e-5);
  CHECK(norm_linf(interpolate(interval(4), Space::full, sine)) == doctest::Approx(1.0));
}

TEST_CASE("grad_dot") {
  const auto m = interval(20);
  const Field x = interpolate(m, Space::full, [](const Point& p) { return p[0]; });
  const Field s = interpolate(m, Space::full, sine);
  const Field zero = Field::zeros(m, Space::full);
  CHECK(grad_dot(x, zero).values().norm() == 0.0);
  const Field one = grad_dot(x, x);
  for (int i = 1; i < 20; ++i) CHECK(one.values()[i] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(grad_dot(x, s).values() == grad_dot(s, x).values());
}

TEST_CASE("Galerkin orthogonality of a discrete Poisson solve") {
  const auto m = disk(5);
  const Field q = interpolate(m, Space::full, [](const Point& p) { return 1.0 + 0.3 * p[0] * p[0]; });
  const SparseMatrix k = assemble_stiffness(*m, Space::interior, q);
  const auto f = [](const Point& p) { return 1.0 + p[1]; };
  const Vector b = load_vector(*m, Space::interior, f);
  const Vector u = SpdSolver(k).solve(b);
  CHECK((k * u - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
}

TEST_CASE("load vector quadrature is exact for quadratics") {
  const auto m = interval(5);
  // integral of x^2 over (0,1) is 1/3; hat functions sum to one.
  const Vector b = load_vector(*m, Space::full, [](const Point& p) { return p[0] * p[0]; });
  CHECK(b.sum() == doctest::Approx(1.0 / 3).epsilon(1e-14));
  const auto d = disk(2);
  const Vector bd = load_vector(*d, Space::full, [](const Point& p) { return p[0] * p[0]; });
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(d->num_vertices()));
  double exact = 0.0;
  for (std::size_t c = 0; c < d->num_cells(); ++c) {
    // integral of x^2 over a triangle: |K|/6 (x1^2+x2^2+x3^2+x1x2+x1x3+x2x3)
    const auto v = d->cell(c);
    const double a = d->vertex(v[0])[0], bb = d->vertex(v[1])[0], cc = d->vertex(v[2])[0];
    exact += d->cell_measure(c) / 6 * (a * a + bb * bb + cc * cc + a * bb + a * cc + bb * cc);
  }
  CHECK(bd.dot(ones) == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("field arithmetic and space conversions") {
  const auto m = interval(6);
  const Field a = interpolate(m, Space::full, [](const Point& p) { return 1 + p[0]; });
  const Field b = a.to_interior();
  CHECK(b.size() == 5);
  const Field c = b.to_full();
  CHECK(c.values()[0] == 0.0);
  CHECK(c.values()[3] == a.values()[3]);
  CHECK((a + a).values() == (2.0 * a).values());
  CHECK_THROWS_AS(a + b, std::invalid_argument);
  CHECK_THROWS_AS(a + interpolate(interval(6), Space::full, [](const Point&) { return 0.0; }), std::invalid_argument);
  CHECK_THROWS_AS(Field(m, Space::full, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("transfer between nested meshes is exact at shared vertices") {
  const auto coarse = disk(3);
  const auto fine = std::make_shared<const Mesh>(refine_uniform(*coarse));
  const auto f = [](const Point& p) { return 1 + p[0] - 2 * p[1]; };
  const Field on_fine = interpolate(fine, Space::full, f);
  const Field back = transfer(on_fine, coarse, Space::full);
  CHECK((back.values() - interpolate(coarse, Space::full, f).values()).cwiseAbs().maxCoeff() <= 1e-13);
}
