#pragma once

#include "subdiff/fem.hpp"

#include <string>

namespace subdiff {

/// Problem data for the forward model and synthetic experiments: the true
/// coefficient, the initial state and the (time-independent) source.
struct ProblemData {
  std::string name;
  int dim = 1;
  ScalarFunction q_true;
  ScalarFunction u0;
  ScalarFunction f;
  std::string q_source, u0_source, f_source;  ///< textual form, echoed in reports
};

/// Omega = (0,1), q = max(min(1 + sin(pi x)/4, 319/256), 67/64), u0 = x(1-x), f = 1.
ProblemData example_1d();

/// Unit disk, q = max(min(1 + cos(pi/2 (x^2+y^2))/4, 319/256), 71/64), u0 = 1 - x^2 - y^2, f = 1.
ProblemData example_2d();

/// Problem from expression strings (see Expression for the grammar).
ProblemData custom_problem(int dim, const std::string& q, const std::string& u0, const std::string& f);

/// Looks up `example-4.1` / `1d-sine` or `example-4.2` / `2d-disk`.
ProblemData problem_by_name(const std::string& name);

/// Coarse mesh for a problem: `size` is the cell count in 1D and the ring
/// count of the disk mesher in 2D.
MeshPtr make_problem_mesh(int dim, std::size_t size);

}  // namespace subdiff
