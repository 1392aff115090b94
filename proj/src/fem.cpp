#include "subdiff/fem.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace subdiff {

const char* space_name(Space space) { return space == Space::full ? "V_h" : "X_h"; }

std::size_t dof_count(const Mesh& mesh, Space space) {
  return space == Space::full ? mesh.num_vertices() : mesh.num_interior();
}

Field::Field(MeshPtr mesh, Space space, Vector values)
    : mesh_(std::move(mesh)), space_(space), values_(std::move(values)) {
  if (!mesh_) throw std::invalid_argument("field needs a mesh");
  if (static_cast<std::size_t>(values_.size()) != dof_count(*mesh_, space_))
    throw std::invalid_argument("field value count does not match the dof count of its space");
}

Field Field::zeros(MeshPtr mesh, Space space) {
  const auto n = static_cast<Eigen::Index>(dof_count(*mesh, space));
  return Field(std::move(mesh), space, Vector::Zero(n));
}

Field Field::constant(MeshPtr mesh, Space space, double value) {
  const auto n = static_cast<Eigen::Index>(dof_count(*mesh, space));
  return Field(std::move(mesh), space, Vector::Constant(n, value));
}

Vector Field::nodal() const {
  if (space_ == Space::full) return values_;
  Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh_->num_vertices()));
  const auto& interior = mesh_->interior_vertices();
  for (std::size_t k = 0; k < interior.size(); ++k) out[interior[k]] = values_[static_cast<Eigen::Index>(k)];
  return out;
}

Field Field::to_interior() const {
  if (space_ == Space::interior) return *this;
  const auto& interior = mesh_->interior_vertices();
  Vector out(static_cast<Eigen::Index>(interior.size()));
  for (std::size_t k = 0; k < interior.size(); ++k) out[static_cast<Eigen::Index>(k)] = values_[interior[k]];
  return Field(mesh_, Space::interior, std::move(out));
}

Field Field::to_full() const { return Field(mesh_, Space::full, nodal()); }

void Field::check_compatible(const Field& other) const {
  if (mesh_ != other.mesh_ || space_ != other.space_)
    throw std::invalid_argument("fields live on different meshes or spaces");
}

Field Field::operator+(const Field& other) const {
  check_compatible(other);
  return Field(mesh_, space_, values_ + other.values_);
}

Field Field::operator-(const Field& other) const {
  check_compatible(other);
  return Field(mesh_, space_, values_ - other.values_);
}

Field Field::operator*(double scale) const { return Field(mesh_, space_, values_ * scale); }

ElementGeometry element_geometry(const Mesh& mesh, std::size_t cell) {
  const auto v = mesh.cell(cell);
  ElementGeometry geo{mesh.cell_measure(cell), {}};
  if (mesh.dim() == 1) {
    const double len = mesh.vertex(v[1])[0] - mesh.vertex(v[0])[0];
    geo.grad[0] = {-1.0 / len, 0.0};
    geo.grad[1] = {1.0 / len, 0.0};
    geo.grad[2] = {0.0, 0.0};
    return geo;
  }
  const Point& a = mesh.vertex(v[0]);
  const Point& b = mesh.vertex(v[1]);
  const Point& c = mesh.vertex(v[2]);
  const double two_area = 2.0 * geo.measure;
  geo.grad[0] = {(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area};
  geo.grad[1] = {(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area};
  geo.grad[2] = {(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area};
  return geo;
}

namespace {

using Triplet = Eigen::Triplet<double>;
using LocalMatrix = std::array<std::array<double, 3>, 3>;

// Element matrices are written to per-cell slots so that the triplet order,
// and therefore the summation order, does not depend on the thread count.
template <typename LocalKernel>
SparseMatrix assemble(const Mesh& mesh, Space space, int threads, LocalKernel kernel) {
  const int nloc = mesh.dim() + 1;
  const std::size_t ncell = mesh.num_cells();
  std::vector<LocalMatrix> local(ncell);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) local[c] = kernel(c, element_geometry(mesh, c));
  };
  const auto nthreads = static_cast<std::size_t>(std::max(1, threads));
  if (nthreads == 1) {
    work(0, ncell);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (ncell + nthreads - 1) / nthreads;
    for (std::size_t t = 0; t < nthreads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(ncell, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<Triplet> triplets;
  triplets.reserve(ncell * static_cast<std::size_t>(nloc * nloc));
  for (std::size_t c = 0; c < ncell; ++c) {
    const auto v = mesh.cell(c);
    for (int i = 0; i < nloc; ++i) {
      const int row = space == Space::full ? v[i] : mesh.interior_index(v[i]);
      if (row < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        const int col = space == Space::full ? v[j] : mesh.interior_index(v[j]);
        if (col < 0) continue;
        triplets.emplace_back(row, col, local[c][i][j]);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(dof_count(mesh, space));
  SparseMatrix out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }

}  // namespace

SparseMatrix assemble_mass(const Mesh& mesh, Space space, int threads) {
  const int nloc = mesh.dim() + 1;
  // Exact P1 mass: |K| (1 + delta_ij) / ((d+1)(d+2)).
  const double denom = nloc * (nloc + 1);
  return assemble(mesh, space, threads, [&](std::size_t, const ElementGeometry& geo) {
    LocalMatrix m{};
    for (int i = 0; i < nloc; ++i)
      for (int j = 0; j < nloc; ++j) m[i][j] = geo.measure * (i == j ? 2.0 : 1.0) / denom;
    return m;
  });
}

SparseMatrix assemble_weighted_stiffness(const Mesh& mesh, Space space, const Vector& nodal_weight, int threads) {
  if (static_cast<std::size_t>(nodal_weight.size()) != mesh.num_vertices())
    throw std::invalid_argument("stiffness weight must be a nodal vector over all vertices");
  const int nloc = mesh.dim() + 1;
  return assemble(mesh, space, threads, [&](std::size_t c, const ElementGeometry& geo) {
    const auto v = mesh.cell(c);
    double mean = 0.0;
    for (int i = 0; i < nloc; ++i) mean += nodal_weight[v[i]];
    mean /= nloc;
    LocalMatrix k{};
    for (int i = 0; i < nloc; ++i)
      for (int j = 0; j < nloc; ++j) k[i][j] = mean * geo.measure * dot(geo.grad[i], geo.grad[j]);
    return k;
  });
}

SparseMatrix assemble_stiffness(const Mesh& mesh, Space space, const Field& q, int threads) {
  if (&q.mesh() != &mesh) throw std::invalid_argument("coefficient lives on a different mesh");
  if (q.space() != Space::full) throw std::invalid_argument("coefficient must be a V_h field");
  for (Eigen::Index i = 0; i < q.values().size(); ++i)
    if (!(q.values()[i] > 0.0))
      throw InvalidCoefficientError("diffusion coefficient is not positive at vertex " + std::to_string(i));
  return assemble_weighted_stiffness(mesh, space, q.values(), threads);
}

SparseMatrix assemble_laplacian(const Mesh& mesh, Space space) {
  return assemble_weighted_stiffness(mesh, space, Vector::Ones(static_cast<Eigen::Index>(mesh.num_vertices())));
}

Vector load_vector(const Mesh& mesh, Space space, const ScalarFunction& f) {
  Vector b = Vector::Zero(static_cast<Eigen::Index>(dof_count(mesh, space)));
  auto add = [&](int vertex, double value) {
    const int row = space == Space::full ? vertex : mesh.interior_index(static_cast<std::size_t>(vertex));
    if (row >= 0) b[row] += value;
  };
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto v = mesh.cell(c);
    const double measure = mesh.cell_measure(c);
    if (mesh.dim() == 1) {
      const double a = mesh.vertex(v[0])[0];
      const double len = mesh.vertex(v[1])[0] - a;
      const double offset = 0.5 / std::sqrt(3.0);
      for (double t : {0.5 - offset, 0.5 + offset}) {
        const double w = 0.5 * measure * f({a + t * len, 0.0});
        add(v[0], w * (1.0 - t));
        add(v[1], w * t);
      }
    } else {
      static constexpr std::array<std::array<double, 3>, 3> points{
          {{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}}};
      for (const auto& lambda : points) {
        Point x{0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
          x[0] += lambda[k] * mesh.vertex(v[k])[0];
          x[1] += lambda[k] * mesh.vertex(v[k])[1];
        }
        const double w = measure / 3.0 * f(x);
        for (int k = 0; k < 3; ++k) add(v[k], w * lambda[k]);
      }
    }
  }
  return b;
}

Field interpolate(const MeshPtr& mesh, Space space, const ScalarFunction& f) {
  Vector nodal(static_cast<Eigen::Index>(mesh->num_vertices()));
  for (std::size_t v = 0; v < mesh->num_vertices(); ++v) nodal[static_cast<Eigen::Index>(v)] = f(mesh->vertex(v));
  Field full(mesh, Space::full, std::move(nodal));
  return space == Space::full ? full : full.to_interior();
}

Field l2_project(const MeshPtr& mesh, const ScalarFunction& f) {
  const SpdSolver solver(assemble_mass(*mesh, Space::interior));
  return Field(mesh, Space::interior, solver.solve(load_vector(*mesh, Space::interior, f)));
}

Field l2_project(const Field& f) {
  const Mesh& mesh = f.mesh();
  const SparseMatrix full_mass = assemble_mass(mesh, Space::full);
  const Vector full_load = full_mass * f.nodal();
  const auto& interior = mesh.interior_vertices();
  Vector rhs(static_cast<Eigen::Index>(interior.size()));
  for (std::size_t k = 0; k < interior.size(); ++k) rhs[static_cast<Eigen::Index>(k)] = full_load[interior[k]];
  const SpdSolver solver(assemble_mass(mesh, Space::interior));
  return Field(f.mesh_ptr(), Space::interior, solver.solve(rhs));
}

double inner_l2(const Field& a, const Field& b) {
  if (&a.mesh() != &b.mesh()) throw std::invalid_argument("fields live on different meshes");
  const SparseMatrix mass = assemble_mass(a.mesh(), Space::full);
  return a.nodal().dot(mass * b.nodal());
}

double norm_l2(const Field& v) { return std::sqrt(std::max(0.0, inner_l2(v, v))); }

double seminorm_h1(const Field& v) {
  const Vector x = v.nodal();
  return std::sqrt(std::max(0.0, x.dot(assemble_laplacian(v.mesh(), Space::full) * x)));
}

double norm_linf(const Field& v) { return v.size() == 0 ? 0.0 : v.values().cwiseAbs().maxCoeff(); }

double seminorm_w1inf(const Field& v) {
  double out = 0.0;
  for (const auto& g : cell_gradients(v.mesh(), v.nodal())) out = std::max(out, std::hypot(g[0], g[1]));
  return out;
}

std::vector<Point> cell_gradients(const Mesh& mesh, const Vector& nodal) {
  std::vector<Point> out(mesh.num_cells());
  const int nloc = mesh.dim() + 1;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto geo = element_geometry(mesh, c);
    const auto v = mesh.cell(c);
    Point g{0.0, 0.0};
    for (int i = 0; i < nloc; ++i) {
      g[0] += nodal[v[i]] * geo.grad[i][0];
      g[1] += nodal[v[i]] * geo.grad[i][1];
    }
    out[c] = g;
  }
  return out;
}

Vector cell_gradient_products(const Mesh& mesh, const Vector& a_nodal, const Vector& b_nodal) {
  const auto ga = cell_gradients(mesh, a_nodal);
  const auto gb = cell_gradients(mesh, b_nodal);
  Vector out(static_cast<Eigen::Index>(mesh.num_cells()));
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) out[static_cast<Eigen::Index>(c)] = dot(ga[c], gb[c]);
  return out;
}

Vector cellwise_load(const Mesh& mesh, const Vector& cell_values) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  const int nloc = mesh.dim() + 1;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const double share = cell_values[static_cast<Eigen::Index>(c)] * mesh.cell_measure(c) / nloc;
    for (int v : mesh.cell(c)) out[v] += share;
  }
  return out;
}

Field grad_dot(const Field& a, const Field& b) {
  if (&a.mesh() != &b.mesh()) throw std::invalid_argument("grad_dot needs fields on one mesh");
  const Mesh& mesh = a.mesh();
  const Vector rhs = cellwise_load(mesh, cell_gradient_products(mesh, a.nodal(), b.nodal()));
  const SpdSolver solver(assemble_mass(mesh, Space::full));
  return Field(a.mesh_ptr(), Space::full, solver.solve(rhs));
}

Field transfer(const Field& source, const MeshPtr& target, Space space) {
  const Mesh& src = source.mesh();
  const Vector nodal = source.nodal();
  const PointLocator locator(src);
  return interpolate(target, space, [&](const Point& p) {
    const auto loc = locator.locate(p);
    const auto cell = src.cell(loc.cell);
    double value = 0.0;
    for (std::size_t k = 0; k < cell.size(); ++k) value += loc.barycentric[k] * nodal[cell[k]];
    return value;
  });
}

}  // namespace subdiff
