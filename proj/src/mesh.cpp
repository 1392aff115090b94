#include "subdiff/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace subdiff {

namespace {

double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

// A vertex strictly inside a facet that only one cell owns is a hanging node.
void check_no_hanging_nodes(const std::vector<Point>& vertices, const std::vector<Mesh::Cell>& cells) {
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(cells.size() * 3);
  for (const auto& c : cells)
    for (int e = 0; e < 3; ++e) ++count[edge_key(c[e], c[(e + 1) % 3])];
  for (const auto& [key, n] : count) {
    if (n != 1) continue;
    const auto a = static_cast<std::size_t>(key >> 32);
    const auto b = static_cast<std::size_t>(key & 0xffffffffu);
    const Point& pa = vertices[a];
    const double ex = vertices[b][0] - pa[0], ey = vertices[b][1] - pa[1];
    const double len2 = ex * ex + ey * ey;
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      if (v == a || v == b) continue;
      const double px = vertices[v][0] - pa[0], py = vertices[v][1] - pa[1];
      const double along = px * ex + py * ey;
      if (along <= 1e-12 * len2 || along >= (1.0 - 1e-12) * len2) continue;
      if (std::abs(ex * py - ey * px) <= 1e-12 * len2)
        throw MeshValidationError("vertex " + std::to_string(v) + " lies on edge (" + std::to_string(a) + "," +
                                  std::to_string(b) + "); cells are not face-to-face");
    }
  }
}

}  // namespace

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

std::vector<std::uint8_t> boundary_vertices_from_facets(int dim, std::size_t n_vertices,
                                                        const std::vector<Mesh::Cell>& cells) {
  std::vector<std::uint8_t> flags(n_vertices, 0);
  if (dim == 1) {
    std::vector<int> count(n_vertices, 0);
    for (const auto& c : cells) {
      ++count[c[0]];
      ++count[c[1]];
    }
    for (std::size_t v = 0; v < n_vertices; ++v) {
      if (count[v] > 2) throw MeshValidationError("vertex " + std::to_string(v) + " shared by more than two cells");
      flags[v] = count[v] == 1 ? 1 : 0;
    }
    return flags;
  }
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(cells.size() * 3);
  for (const auto& c : cells)
    for (int e = 0; e < 3; ++e) ++count[edge_key(c[e], c[(e + 1) % 3])];
  for (const auto& [key, n] : count) {
    const auto a = static_cast<std::size_t>(key >> 32);
    const auto b = static_cast<std::size_t>(key & 0xffffffffu);
    if (n > 2)
      throw MeshValidationError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") shared by more than two cells");
    if (n == 1) flags[a] = flags[b] = 1;
  }
  return flags;
}

Mesh::Mesh(int dim, std::vector<Point> vertices, std::vector<Cell> cells,
           std::vector<std::uint8_t> boundary_flags, Domain domain)
    : dim_(dim), domain_(domain), vertices_(std::move(vertices)), cells_(std::move(cells)),
      boundary_(std::move(boundary_flags)) {
  if (dim_ != 1 && dim_ != 2) throw MeshValidationError("mesh dimension must be 1 or 2");
  if (cells_.empty()) throw MeshValidationError("mesh has no cells");
  const int nv = static_cast<int>(vertices_.size());
  const int per_cell = dim_ + 1;

  measure_.resize(cells_.size());
  diameter_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    auto& cell = cells_[c];
    for (int k = 0; k < per_cell; ++k)
      if (cell[k] < 0 || cell[k] >= nv)
        throw MeshValidationError("cell " + std::to_string(c) + " references vertex " +
                                  std::to_string(cell[k]) + " out of range");
    if (dim_ == 1) {
      cell[2] = -1;
      if (vertices_[cell[0]][0] > vertices_[cell[1]][0]) std::swap(cell[0], cell[1]);
      measure_[c] = vertices_[cell[1]][0] - vertices_[cell[0]][0];
      diameter_[c] = measure_[c];
    } else {
      double area = signed_area(vertices_[cell[0]], vertices_[cell[1]], vertices_[cell[2]]);
      if (area < 0) {
        std::swap(cell[1], cell[2]);
        area = -area;
      }
      measure_[c] = area;
      diameter_[c] = std::max({distance(vertices_[cell[0]], vertices_[cell[1]]),
                               distance(vertices_[cell[1]], vertices_[cell[2]]),
                               distance(vertices_[cell[2]], vertices_[cell[0]])});
    }
    if (!(measure_[c] > 0.0))
      throw MeshValidationError("cell " + std::to_string(c) + " has nonpositive measure");
  }

  const auto facet_flags = boundary_vertices_from_facets(dim_, vertices_.size(), cells_);
  if (dim_ == 2) check_no_hanging_nodes(vertices_, cells_);
  if (boundary_.empty()) boundary_ = facet_flags;
  if (boundary_.size() != vertices_.size())
    throw MeshValidationError("boundary flag count does not match vertex count");
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    if ((boundary_[v] != 0) != (facet_flags[v] != 0))
      throw MeshValidationError("boundary flag of vertex " + std::to_string(v) +
                                " disagrees with the boundary facets");

  dof_of_vertex_.assign(vertices_.size(), -1);
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (boundary_[v] == 0) {
      dof_of_vertex_[v] = static_cast<int>(interior_.size());
      interior_.push_back(static_cast<int>(v));
    }
  }

  h_ = *std::max_element(diameter_.begin(), diameter_.end());
  min_diameter_ = *std::min_element(diameter_.begin(), diameter_.end());
  total_measure_ = 0.0;
  for (double m : measure_) total_measure_ += m;
}

Mesh generate_interval_mesh(std::size_t n_cells) {
  if (n_cells == 0) throw std::invalid_argument("interval mesh needs at least one cell");
  std::vector<Point> vertices(n_cells + 1);
  for (std::size_t i = 0; i <= n_cells; ++i)
    vertices[i] = {static_cast<double>(i) / static_cast<double>(n_cells), 0.0};
  std::vector<Mesh::Cell> cells(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i)
    cells[i] = {static_cast<int>(i), static_cast<int>(i + 1), -1};
  std::vector<std::uint8_t> flags(n_cells + 1, 0);
  flags.front() = flags.back() = 1;
  return Mesh(1, std::move(vertices), std::move(cells), std::move(flags), Domain::interval);
}

int disk_ring_count(double target_h) {
  if (!(target_h > 0.0 && target_h < 1.0))
    throw std::invalid_argument("disk mesh size must lie in (0, 1)");
  return std::max(1, static_cast<int>(std::ceil(1.0 / target_h - 1e-9)));
}

Mesh generate_disk_mesh(double target_h) {
  for (int rings = disk_ring_count(target_h);; ++rings) {
    Mesh m = generate_disk_mesh_rings(rings);
    if (m.h() <= 1.5 * target_h) return m;
  }
}

Mesh generate_disk_mesh_rings(int rings) {
  if (rings < 1) throw std::invalid_argument("disk mesh needs at least one ring");
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<Point> vertices{{0.0, 0.0}};
  std::vector<int> ring_start{0};
  std::vector<int> ring_size{1};
  for (int k = 1; k <= rings; ++k) {
    const int n = 6 * k;
    ring_start.push_back(static_cast<int>(vertices.size()));
    ring_size.push_back(n);
    for (int i = 0; i < n; ++i) {
      const double theta = two_pi * i / n;
      if (k == rings)
        vertices.push_back({std::cos(theta), std::sin(theta)});
      else {
        const double r = static_cast<double>(k) / rings;
        vertices.push_back({r * std::cos(theta), r * std::sin(theta)});
      }
    }
  }

  std::vector<Mesh::Cell> cells;
  cells.reserve(static_cast<std::size_t>(6 * rings * rings));
  for (int i = 0; i < 6; ++i) cells.push_back({0, 1 + i, 1 + (i + 1) % 6});
  for (int k = 2; k <= rings; ++k) {
    const int n_in = ring_size[k - 1], n_out = ring_size[k];
    const int s_in = ring_start[k - 1], s_out = ring_start[k];
    int i = 0, j = 0;
    // Sweep both rings by angle; advance whichever ring has the nearer next vertex.
    while (i < n_in || j < n_out) {
      const bool advance_outer =
          i == n_in || (j < n_out && static_cast<long>(j + 1) * n_in <= static_cast<long>(i + 1) * n_out);
      const int a = s_in + i % n_in;
      const int b = s_out + j % n_out;
      if (advance_outer) {
        cells.push_back({a, b, s_out + (j + 1) % n_out});
        ++j;
      } else {
        cells.push_back({a, b, s_in + (i + 1) % n_in});
        ++i;
      }
    }
  }
  std::vector<std::uint8_t> flags(vertices.size(), 0);
  for (int i = 0; i < ring_size[rings]; ++i) flags[ring_start[rings] + i] = 1;
  return Mesh(2, std::move(vertices), std::move(cells), std::move(flags), Domain::disk);
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Point> vertices = mesh.vertices();
  std::vector<std::uint8_t> flags = mesh.boundary_flags();
  std::vector<Mesh::Cell> cells;

  if (mesh.dim() == 1) {
    cells.reserve(2 * mesh.num_cells());
    for (const auto& c : mesh.cells()) {
      const Point& a = vertices[c[0]];
      const Point& b = vertices[c[1]];
      const int mid = static_cast<int>(vertices.size());
      vertices.push_back({0.5 * (a[0] + b[0]), 0.0});
      flags.push_back(0);
      cells.push_back({c[0], mid, -1});
      cells.push_back({mid, c[1], -1});
    }
    return Mesh(1, std::move(vertices), std::move(cells), std::move(flags), mesh.domain());
  }

  std::unordered_map<std::uint64_t, int> edge_count;
  for (const auto& c : mesh.cells())
    for (int e = 0; e < 3; ++e) ++edge_count[edge_key(c[e], c[(e + 1) % 3])];

  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    Point p{0.5 * (vertices[a][0] + vertices[b][0]), 0.5 * (vertices[a][1] + vertices[b][1])};
    const bool on_boundary = edge_count[key] == 1;
    if (on_boundary && mesh.domain() == Domain::disk) {
      const double r = std::hypot(p[0], p[1]);
      p = {p[0] / r, p[1] / r};
    }
    const int idx = static_cast<int>(vertices.size());
    vertices.push_back(p);
    flags.push_back(on_boundary ? 1 : 0);
    midpoint.emplace(key, idx);
    return idx;
  };

  cells.reserve(4 * mesh.num_cells());
  for (const auto& c : mesh.cells()) {
    const int m01 = mid(c[0], c[1]);
    const int m12 = mid(c[1], c[2]);
    const int m20 = mid(c[2], c[0]);
    cells.push_back({c[0], m01, m20});
    cells.push_back({m01, c[1], m12});
    cells.push_back({m20, m12, c[2]});
    cells.push_back({m01, m12, m20});
  }
  return Mesh(2, std::move(vertices), std::move(cells), std::move(flags), mesh.domain());
}

std::string format_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# simplicial mesh: dim n_vertices n_cells\n";
  out << mesh.dim() << ' ' << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  for (const auto& p : mesh.vertices()) {
    out << p[0];
    if (mesh.dim() == 2) out << ' ' << p[1];
    out << '\n';
  }
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto cell = mesh.cell(c);
    for (std::size_t k = 0; k < cell.size(); ++k) out << (k ? " " : "") << cell[k];
    out << '\n';
  }
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) out << (v ? " " : "") << int(mesh.is_boundary(v));
  out << '\n';
  return out.str();
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_mesh(mesh);
}

Mesh parse_mesh(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;

  // Yields the next non-empty, comment-stripped line as a token list.
  auto next_line = [&](std::vector<std::string>& tokens) {
    while (std::getline(in, raw)) {
      ++line_no;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::istringstream ls(raw);
      tokens.clear();
      for (std::string t; ls >> t;) tokens.push_back(t);
      if (!tokens.empty()) return true;
    }
    return false;
  };
  auto to_long = [&](const std::string& s) {
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(s, &pos);
    } catch (const std::exception&) {
      throw MeshParseError("expected an integer, got '" + s + "'", line_no);
    }
    if (pos != s.size()) throw MeshParseError("expected an integer, got '" + s + "'", line_no);
    return v;
  };
  auto to_double = [&](const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw MeshParseError("expected a number, got '" + s + "'", line_no);
    }
    if (pos != s.size()) throw MeshParseError("expected a number, got '" + s + "'", line_no);
    return v;
  };

  std::vector<std::string> tok;
  if (!next_line(tok)) throw MeshParseError("missing header", line_no);
  if (tok.size() != 3) throw MeshParseError("header must be 'dim n_vertices n_cells'", line_no);
  const long dim = to_long(tok[0]);
  const long nv = to_long(tok[1]);
  const long nc = to_long(tok[2]);
  if (dim != 1 && dim != 2) throw MeshParseError("dim must be 1 or 2", line_no);
  if (nv < 2 || nc < 1) throw MeshParseError("vertex/cell counts too small", line_no);

  std::vector<Point> vertices(static_cast<std::size_t>(nv));
  for (long v = 0; v < nv; ++v) {
    if (!next_line(tok)) throw MeshParseError("unexpected end of file in vertex block", line_no);
    if (static_cast<long>(tok.size()) != dim) throw MeshParseError("wrong coordinate count", line_no);
    vertices[v] = {to_double(tok[0]), dim == 2 ? to_double(tok[1]) : 0.0};
  }
  std::vector<Mesh::Cell> cells(static_cast<std::size_t>(nc));
  for (long c = 0; c < nc; ++c) {
    if (!next_line(tok)) throw MeshParseError("unexpected end of file in cell block", line_no);
    if (static_cast<long>(tok.size()) != dim + 1) throw MeshParseError("wrong vertex count per cell", line_no);
    Mesh::Cell cell{-1, -1, -1};
    for (long k = 0; k <= dim; ++k) {
      const long idx = to_long(tok[k]);
      if (idx < 0 || idx >= nv)
        throw MeshValidationError("cell " + std::to_string(c) + " references vertex " + std::to_string(idx) +
                                  " out of range (line " + std::to_string(line_no) + ")");
      cell[k] = static_cast<int>(idx);
    }
    if (dim == 2 && !(signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]) > 0.0))
      throw MeshValidationError("cell " + std::to_string(c) + " has nonpositive signed area (line " +
                                std::to_string(line_no) + ")");
    cells[c] = cell;
  }
  if (!next_line(tok)) throw MeshParseError("missing boundary flag line", line_no);
  if (static_cast<long>(tok.size()) != nv) throw MeshParseError("boundary flag count mismatch", line_no);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(nv));
  for (long v = 0; v < nv; ++v) {
    const long f = to_long(tok[v]);
    if (f != 0 && f != 1) throw MeshParseError("boundary flags must be 0 or 1", line_no);
    flags[v] = static_cast<std::uint8_t>(f);
  }
  if (next_line(tok)) throw MeshParseError("trailing content after boundary flags", line_no);

  Domain domain = Domain::interval;
  if (dim == 2) {
    domain = Domain::disk;
    for (long v = 0; v < nv; ++v)
      if (flags[v] && std::abs(std::hypot(vertices[v][0], vertices[v][1]) - 1.0) > 1e-12) {
        domain = Domain::polygon;
        break;
      }
  }
  return Mesh(static_cast<int>(dim), std::move(vertices), std::move(cells), std::move(flags), domain);
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_mesh(buffer.str());
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(mesh) {
  double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& p : mesh.vertices()) {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const auto side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(mesh.num_cells()))));
  nx_ = mesh.dim() == 1 ? static_cast<int>(mesh.num_cells()) : std::max(1, side);
  ny_ = mesh.dim() == 1 ? 1 : std::max(1, side);
  x0_ = xmin;
  y0_ = ymin;
  dx_ = std::max(xmax - xmin, 1e-300) / nx_;
  dy_ = std::max(ymax - ymin, 1e-300) / ny_;
  buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
  auto bucket_x = [&](double x) { return std::clamp(static_cast<int>((x - x0_) / dx_), 0, nx_ - 1); };
  auto bucket_y = [&](double y) { return std::clamp(static_cast<int>((y - y0_) / dy_), 0, ny_ - 1); };
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    double cx0 = std::numeric_limits<double>::max(), cx1 = -cx0, cy0 = cx0, cy1 = -cx0;
    for (int v : mesh.cell(c)) {
      cx0 = std::min(cx0, mesh.vertex(v)[0]);
      cx1 = std::max(cx1, mesh.vertex(v)[0]);
      cy0 = std::min(cy0, mesh.vertex(v)[1]);
      cy1 = std::max(cy1, mesh.vertex(v)[1]);
    }
    for (int i = bucket_x(cx0); i <= bucket_x(cx1); ++i)
      for (int j = bucket_y(cy0); j <= bucket_y(cy1); ++j)
        buckets_[static_cast<std::size_t>(j * nx_ + i)].push_back(static_cast<int>(c));
  }
}

namespace {

std::array<double, 3> barycentric(const Mesh& mesh, std::size_t c, const Point& p) {
  const auto cell = mesh.cell(c);
  if (mesh.dim() == 1) {
    const double a = mesh.vertex(cell[0])[0], b = mesh.vertex(cell[1])[0];
    const double t = (p[0] - a) / (b - a);
    return {1.0 - t, t, 0.0};
  }
  const Point& a = mesh.vertex(cell[0]);
  const Point& b = mesh.vertex(cell[1]);
  const Point& d = mesh.vertex(cell[2]);
  const double area = signed_area(a, b, d);
  const double l0 = signed_area(p, b, d) / area;
  const double l1 = signed_area(a, p, d) / area;
  return {l0, l1, 1.0 - l0 - l1};
}

double min_weight(const std::array<double, 3>& w, int dim) {
  return dim == 1 ? std::min(w[0], w[1]) : std::min({w[0], w[1], w[2]});
}

}  // namespace

CellLocation PointLocator::locate(const Point& p) const {
  const int dim = mesh_.dim();
  const int i = std::clamp(static_cast<int>((p[0] - x0_) / dx_), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>((p[1] - y0_) / dy_), 0, ny_ - 1);
  constexpr double tol = 1e-12;
  for (int c : buckets_[static_cast<std::size_t>(j * nx_ + i)]) {
    const auto w = barycentric(mesh_, static_cast<std::size_t>(c), p);
    if (min_weight(w, dim) >= -tol) return {static_cast<std::size_t>(c), w};
  }
  // Outside Omega_h: take the cell whose barycentric violation is smallest.
  std::size_t best = 0;
  double best_violation = -std::numeric_limits<double>::max();
  for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
    const double m = min_weight(barycentric(mesh_, c, p), dim);
    if (m > best_violation) {
      best_violation = m;
      best = c;
    }
  }
  auto w = barycentric(mesh_, best, p);
  double sum = 0.0;
  for (int k = 0; k <= dim; ++k) sum += (w[k] = std::max(0.0, w[k]));
  for (int k = 0; k <= dim; ++k) w[k] /= sum;
  return {best, w};
}

}  // namespace subdiff
