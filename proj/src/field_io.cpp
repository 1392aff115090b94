#include "subdiff/field_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace subdiff {

std::string format_field(const Field& field, const std::string& mesh_file, const std::string& name) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# mesh " << mesh_file << '\n';
  out << "# space " << space_name(field.space()) << '\n';
  out << "# field " << name << '\n';
  const Mesh& mesh = field.mesh();
  for (std::size_t k = 0; k < field.size(); ++k) {
    const std::size_t vertex = field.space() == Space::full ? k : static_cast<std::size_t>(mesh.interior_vertices()[k]);
    out << vertex << ' ' << field.values()[static_cast<Eigen::Index>(k)] << '\n';
  }
  return out.str();
}

void write_field(const Field& field, const std::filesystem::path& path, const std::string& mesh_file,
                 const std::string& name) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_field(field, mesh_file, name);
}

Field parse_field(const std::string& text, const MeshPtr& mesh) {
  std::istringstream in(text);
  Space space = Space::full;
  Vector nodal = Vector::Zero(static_cast<Eigen::Index>(mesh->num_vertices()));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# space X_h", 0) == 0) space = Space::interior;
      continue;
    }
    std::istringstream ls(line);
    std::size_t vertex = 0;
    double value = 0.0;
    if (!(ls >> vertex >> value) || vertex >= mesh->num_vertices())
      throw std::runtime_error("malformed field dump line: " + line);
    nodal[static_cast<Eigen::Index>(vertex)] = value;
  }
  Field full(mesh, Space::full, std::move(nodal));
  return space == Space::full ? full : full.to_interior();
}

}  // namespace subdiff
