#pragma once

#include "subdiff/fem.hpp"

#include <filesystem>
#include <string>

namespace subdiff {

/// Field dump: three header lines `# mesh <file>`, `# space V_h|X_h`,
/// `# field <name>`, then one `vertex_index value` pair per dof.
std::string format_field(const Field& field, const std::string& mesh_file, const std::string& name);
void write_field(const Field& field, const std::filesystem::path& path, const std::string& mesh_file,
                 const std::string& name);

/// Reads a dump back onto `mesh`; the space comes from the header.
Field parse_field(const std::string& text, const MeshPtr& mesh);

}  // namespace subdiff
