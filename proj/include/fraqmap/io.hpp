#pragma once

// Text formats: mesh files, nodal-field CSV, and shared number formatting.
//
// Mesh file:
//   dim N_vertices N_cells
//   x [y] class          (one line per vertex; class 0 interior, 1 exterior, 2 outer boundary)
//   i0 i1 [i2]           (one line per cell, zero-based vertex indices)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fraqmap/geometry.hpp"

namespace fraqmap::io {

/// Shortest round-trip representation; identical on every platform with IEEE doubles.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline SimplicialMesh read_mesh(std::istream& in) {
  int dim = 0, nv = 0, nc = 0;
  require(static_cast<bool>(in >> dim >> nv >> nc), "mesh header must read 'dim N_vertices N_cells'");
  require(dim == 1 || dim == 2, "mesh dimension must be 1 or 2, got ", dim);
  require(nv > 0 && nc > 0, "mesh needs vertices and cells");
  std::vector<Point> vertices(nv);
  std::vector<NodeClass> classes(nv);
  for (int i = 0; i < nv; ++i) {
    double x = 0.0, y = 0.0;
    int cls = 0;
    bool ok = static_cast<bool>(in >> x);
    if (dim == 2) ok = ok && static_cast<bool>(in >> y);
    ok = ok && static_cast<bool>(in >> cls);
    require(ok, "truncated or malformed vertex line ", i);
    require(cls >= 0 && cls <= 2, "vertex ", i, " has invalid class ", cls);
    vertices[i] = Point(x, y);
    classes[i] = static_cast<NodeClass>(cls);
  }
  std::vector<SimplicialMesh::Cell> cells(nc, {-1, -1, -1});
  for (int c = 0; c < nc; ++c)
    for (int k = 0; k <= dim; ++k)
      require(static_cast<bool>(in >> cells[c][k]), "truncated or malformed cell line ", c);
  return SimplicialMesh(dim, std::move(vertices), std::move(classes), std::move(cells));
}

inline SimplicialMesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open mesh file ", path.string());
  return read_mesh(in);
}

inline void write_mesh(std::ostream& out, const SimplicialMesh& mesh) {
  out << mesh.dim() << ' ' << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << fmt(mesh.vertex(i).x());
    if (mesh.dim() == 2) out << ' ' << fmt(mesh.vertex(i).y());
    out << ' ' << static_cast<int>(mesh.node_class(i)) << '\n';
  }
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto cell = mesh.cell(c);
    for (std::size_t k = 0; k < cell.size(); ++k) out << (k ? " " : "") << cell[k];
    out << '\n';
  }
}

/// One row per node with columns u1..uN. A header line `u1,...,uN` is written and accepted.
inline void write_field_csv(std::ostream& out, const NodalField& f) {
  for (int c = 0; c < f.components(); ++c) out << (c ? "," : "") << 'u' << c + 1;
  out << '\n';
  for (int z = 0; z < f.size(); ++z) {
    for (int c = 0; c < f.components(); ++c) out << (c ? "," : "") << fmt(f(z, c));
    out << '\n';
  }
}

inline NodalField read_field_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == 'u' || line[0] == 'x') continue; // header
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        raise("malformed field CSV entry '", cell, "'");
      }
    }
    require(rows.empty() || row.size() == rows.front().size(), "ragged field CSV row ", rows.size());
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "empty field CSV");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return NodalField(std::move(m));
}

} // namespace fraqmap::io
