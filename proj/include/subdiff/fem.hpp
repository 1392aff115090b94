#pragma once

#include "subdiff/linalg.hpp"
#include "subdiff/mesh.hpp"

#include <functional>
#include <memory>
#include <stdexcept>

namespace subdiff {

using MeshPtr = std::shared_ptr<const Mesh>;
using ScalarFunction = std::function<double(const Point&)>;

/// P1 spaces on a mesh: V_h carries a dof at every vertex, X_h only at
/// interior vertices (its functions vanish on the boundary of Omega_h).
enum class Space { full, interior };

const char* space_name(Space space);

/// Raised when a diffusion coefficient is not strictly positive.
class InvalidCoefficientError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t dof_count(const Mesh& mesh, Space space);

/// Nodal P1 function. Values are indexed by dof: all vertices for
/// Space::full, interior vertices in Mesh::interior_vertices() order for
/// Space::interior.
class Field {
 public:
  Field(MeshPtr mesh, Space space, Vector values);
  static Field zeros(MeshPtr mesh, Space space);
  static Field constant(MeshPtr mesh, Space space, double value);

  const Mesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  Space space() const noexcept { return space_; }
  const Vector& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  /// Per-vertex values, zero on boundary vertices for X_h fields.
  Vector nodal() const;
  /// The X_h field with this field's interior values (boundary values dropped).
  Field to_interior() const;
  /// The same function as a V_h field.
  Field to_full() const;

  Field operator+(const Field& other) const;
  Field operator-(const Field& other) const;
  Field operator*(double scale) const;
  friend Field operator*(double scale, const Field& f) { return f * scale; }

 private:
  void check_compatible(const Field& other) const;

  MeshPtr mesh_;
  Space space_;
  Vector values_;
};

/// Cellwise measure and barycentric gradients of one simplex.
struct ElementGeometry {
  double measure;
  std::array<Point, 3> grad;
};
ElementGeometry element_geometry(const Mesh& mesh, std::size_t cell);

/// M_ij = integral of phi_i phi_j over Omega_h. `threads` > 1 computes the
/// element matrices concurrently; the result is identical to serial assembly.
SparseMatrix assemble_mass(const Mesh& mesh, Space space, int threads = 1);

/// K(q)_ij = integral of q_h grad phi_i . grad phi_j with q_h the P1
/// interpolant of the nodal coefficient. Throws InvalidCoefficientError when
/// a nodal value of q is not positive.
SparseMatrix assemble_stiffness(const Mesh& mesh, Space space, const Field& q, int threads = 1);

/// Same bilinear form for an arbitrary-sign nodal weight (used for
/// linearizations, where the weight is a perturbation direction).
SparseMatrix assemble_weighted_stiffness(const Mesh& mesh, Space space, const Vector& nodal_weight,
                                         int threads = 1);

/// K(1): the unweighted Laplacian stiffness.
SparseMatrix assemble_laplacian(const Mesh& mesh, Space space);

/// b_i = integral of f phi_i, 2-point Gauss per interval or 3-point rule per triangle.
Vector load_vector(const Mesh& mesh, Space space, const ScalarFunction& f);

/// Lagrange interpolant Pi_h f.
Field interpolate(const MeshPtr& mesh, Space space, const ScalarFunction& f);

/// L2 projection P_h onto X_h.
Field l2_project(const MeshPtr& mesh, const ScalarFunction& f);
Field l2_project(const Field& f);

double norm_l2(const Field& v);
double seminorm_h1(const Field& v);
double norm_linf(const Field& v);
double seminorm_w1inf(const Field& v);

/// L2 inner product of two fields on the same mesh.
double inner_l2(const Field& a, const Field& b);

/// Cellwise constant gradient of a nodal vector (indexed by vertex).
std::vector<Point> cell_gradients(const Mesh& mesh, const Vector& nodal);

/// Per-cell value of grad a . grad b for two nodal vectors.
Vector cell_gradient_products(const Mesh& mesh, const Vector& a_nodal, const Vector& b_nodal);

/// Dual V_h vector of a cellwise constant function: sum over cells of c_K * integral of phi_i.
Vector cellwise_load(const Mesh& mesh, const Vector& cell_values);

/// The cellwise constant function grad a . grad b, L2-projected onto V_h.
Field grad_dot(const Field& a, const Field& b);

/// Evaluates the P1 function of `source` at the vertices of `target`.
Field transfer(const Field& source, const MeshPtr& target, Space space);

}  // namespace subdiff
