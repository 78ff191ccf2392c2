#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "neto/mesh.hpp"

namespace neto {

void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(),
                  v.z());
    os << buf;
  }
  for (const auto& t : mesh.triangles)
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!os) throw FormatError("write failed for " + path.string());
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  long line_no = 0;
  auto fail = [&](const std::string& why) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " +
                      why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) fail("malformed vertex");
      mesh.vertices.push_back(v);
    } else if (kind == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // Face tokens may carry /vt/vn suffixes; the vertex index leads.
        std::size_t slash = tok.find('/');
        if (slash != std::string::npos) tok = tok.substr(0, slash);
        long v = 0;
        try {
          v = std::stol(tok);
        } catch (const std::exception&) {
          fail("malformed face index '" + tok + "'");
        }
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + v + 1;
        if (v < 1 || v > static_cast<long>(mesh.vertices.size()))
          fail("face index out of range");
        idx.push_back(static_cast<int>(v - 1));
      }
      if (idx.size() < 3) fail("face with fewer than 3 vertices");
      for (std::size_t i = 1; i + 1 < idx.size(); ++i)
        mesh.triangles.push_back({idx[0], idx[i], idx[i + 1]});
    }
    // Other record kinds (vn, vt, o, g, s, mtllib, usemtl) carry no geometry.
  }
  return mesh;
}

}  // namespace neto
