#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace subdiff {

using Point = std::array<double, 2>;

/// Geometric domain a mesh discretizes; decides how refinement treats boundary midpoints.
enum class Domain { interval, disk, polygon };

/// Raised when mesh data violates a structural invariant.
class MeshValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed mesh files; carries the offending line number.
class MeshParseError : public std::runtime_error {
 public:
  MeshParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Simplicial mesh of an interval (dim 1) or a planar polygon (dim 2).
///
/// Immutable after construction. Cells store dim+1 vertex indices; in 1D the
/// unused third slot is -1. Triangles are reoriented counterclockwise by the
/// constructor. Interior vertices are numbered consecutively to form the
/// degrees of freedom of the zero-trace space.
class Mesh {
 public:
  using Cell = std::array<int, 3>;

  /// Validates indices, positive cell measures, face-to-face conformity and
  /// boundary flags. Throws MeshValidationError on failure.
  Mesh(int dim, std::vector<Point> vertices, std::vector<Cell> cells,
       std::vector<std::uint8_t> boundary_flags, Domain domain);

  int dim() const noexcept { return dim_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_cells() const noexcept { return cells_.size(); }
  std::size_t num_interior() const noexcept { return interior_.size(); }

  const Point& vertex(std::size_t v) const { return vertices_[v]; }
  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  std::span<const int> cell(std::size_t c) const {
    return {cells_[c].data(), static_cast<std::size_t>(dim_ + 1)};
  }
  const std::vector<Cell>& cells() const noexcept { return cells_; }

  bool is_boundary(std::size_t v) const { return boundary_[v] != 0; }
  const std::vector<std::uint8_t>& boundary_flags() const noexcept { return boundary_; }

  /// Interior vertex indices in dof order.
  const std::vector<int>& interior_vertices() const noexcept { return interior_; }
  /// Dof index of vertex v in the zero-trace space, or -1 on the boundary.
  int interior_index(std::size_t v) const { return dof_of_vertex_[v]; }

  double cell_measure(std::size_t c) const { return measure_[c]; }
  double cell_diameter(std::size_t c) const { return diameter_[c]; }

  /// Mesh size: the largest cell diameter.
  double h() const noexcept { return h_; }
  double min_diameter() const noexcept { return min_diameter_; }
  double quasi_uniformity() const noexcept { return h_ / min_diameter_; }
  bool is_quasi_uniform(double rho_max = 4.0) const noexcept { return quasi_uniformity() <= rho_max; }

  /// |Omega_h|, the sum of cell measures.
  double measure() const noexcept { return total_measure_; }

  friend bool operator==(const Mesh& a, const Mesh& b) {
    return a.dim_ == b.dim_ && a.vertices_ == b.vertices_ && a.cells_ == b.cells_ &&
           a.boundary_ == b.boundary_;
  }

 private:
  int dim_;
  Domain domain_;
  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<std::uint8_t> boundary_;
  std::vector<int> interior_;
  std::vector<int> dof_of_vertex_;
  std::vector<double> measure_;
  std::vector<double> diameter_;
  double h_ = 0.0;
  double min_diameter_ = 0.0;
  double total_measure_ = 0.0;
};

/// Signed area of a triangle; positive for counterclockwise vertex order.
double signed_area(const Point& a, const Point& b, const Point& c);

/// Vertices lying on boundary facets (facets owned by a single cell).
/// Throws MeshValidationError if a facet is shared by more than two cells.
std::vector<std::uint8_t> boundary_vertices_from_facets(int dim, std::size_t n_vertices,
                                                        const std::vector<Mesh::Cell>& cells);

/// Uniform partition of (0,1) into n_cells cells.
Mesh generate_interval_mesh(std::size_t n_cells);

/// Smallest ring count generate_disk_mesh tries for a requested mesh size.
int disk_ring_count(double target_h);

/// Concentric-ring triangulation of a polygon inscribed in the unit disk.
/// Ring k sits at radius k/m with 6k vertices, giving 6m^2 triangles. The
/// ring count grows until h <= 1.5 target_h.
Mesh generate_disk_mesh(double target_h);

/// Same mesher driven directly by the ring count m.
Mesh generate_disk_mesh_rings(int rings);

/// Bisects every interval or red-refines every triangle. Parent vertices keep
/// their indices; new boundary midpoints on a disk mesh are moved radially
/// onto the unit circle.
Mesh refine_uniform(const Mesh& mesh);

/// Text format: `dim n_vertices n_cells`, vertex lines, cell lines, one line of
/// boundary flags. `#` starts a comment.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_mesh(const std::string& text);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
std::string format_mesh(const Mesh& mesh);

/// Index of a cell containing p and its barycentric coordinates. Points
/// outside Omega_h are attributed to the nearest cell with clamped weights.
struct CellLocation {
  std::size_t cell;
  std::array<double, 3> barycentric;
};

/// Bucket-grid point locator; holds a reference to the mesh.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  CellLocation locate(const Point& p) const;

 private:
  const Mesh& mesh_;
  double x0_ = 0.0, y0_ = 0.0, dx_ = 1.0, dy_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace subdiff
