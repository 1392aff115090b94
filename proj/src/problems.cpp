#include "subdiff/problems.hpp"

#include "subdiff/expression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace subdiff {

ProblemData example_1d() {
  ProblemData p;
  p.name = "example-4.1";
  p.dim = 1;
  p.q_true = [](const Point& x) {
    return std::max(std::min(1.0 + 0.25 * std::sin(std::numbers::pi * x[0]), 319.0 / 256.0), 67.0 / 64.0);
  };
  p.u0 = [](const Point& x) { return x[0] * (1.0 - x[0]); };
  p.f = [](const Point&) { return 1.0; };
  p.q_source = "max(min(1 + sin(pi*x)/4, 319/256), 67/64)";
  p.u0_source = "x*(1-x)";
  p.f_source = "1";
  return p;
}

ProblemData example_2d() {
  ProblemData p;
  p.name = "example-4.2";
  p.dim = 2;
  p.q_true = [](const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return std::max(std::min(1.0 + 0.25 * std::cos(0.5 * std::numbers::pi * r2), 319.0 / 256.0), 71.0 / 64.0);
  };
  p.u0 = [](const Point& x) { return 1.0 - x[0] * x[0] - x[1] * x[1]; };
  p.f = [](const Point&) { return 1.0; };
  p.q_source = "max(min(1 + cos(pi/2*(x^2+y^2))/4, 319/256), 71/64)";
  p.u0_source = "1 - x^2 - y^2";
  p.f_source = "1";
  return p;
}

ProblemData custom_problem(int dim, const std::string& q, const std::string& u0, const std::string& f) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("problem dimension must be 1 or 2");
  ProblemData p;
  p.name = "custom";
  p.dim = dim;
  p.q_true = Expression(q);
  p.u0 = Expression(u0);
  p.f = Expression(f);
  p.q_source = q;
  p.u0_source = u0;
  p.f_source = f;
  return p;
}

ProblemData problem_by_name(const std::string& name) {
  if (name == "example-4.1" || name == "1d-sine") return example_1d();
  if (name == "example-4.2" || name == "2d-disk") return example_2d();
  throw std::invalid_argument("unknown problem '" + name + "'");
}

MeshPtr make_problem_mesh(int dim, std::size_t size) {
  if (dim == 1) return std::make_shared<const Mesh>(generate_interval_mesh(size));
  return std::make_shared<const Mesh>(generate_disk_mesh_rings(static_cast<int>(size)));
}

}  // namespace subdiff
