#include "neto/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "neto/mc_tables.hpp"
#include "neto/rng.hpp"

namespace neto {
namespace {

// Key identifying a lattice edge: the smaller node id and the axis it runs
// along. Node ids enumerate the (res+1)^3 grid points.
struct EdgeKey {
  std::int64_t node;
  int axis;
  bool operator==(const EdgeKey& o) const {
    return node == o.node && axis == o.axis;
  }
};
struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const {
    return std::hash<std::int64_t>()(k.node * 4 + k.axis);
  }
};

}  // namespace

TriangleMesh marching_cubes(const ScalarField& field, const Vec3& lo,
                            const Vec3& hi, int resolution) {
  if (resolution < 8)
    throw DomainError("marching_cubes: resolution must be at least 8");
  const int n = resolution;
  const std::int64_t nodes_per_axis = n + 1;
  const Vec3 cell = (hi - lo) / double(n);

  // Field values on the full lattice, evaluated one z-slice at a time to
  // bound peak memory at resolution 256.
  std::vector<double> values(
      static_cast<std::size_t>(nodes_per_axis * nodes_per_axis * nodes_per_axis));
  {
    MatX pts(3, nodes_per_axis * nodes_per_axis);
    VecX out;
    for (std::int64_t k = 0; k < nodes_per_axis; ++k) {
      std::int64_t col = 0;
      for (std::int64_t j = 0; j < nodes_per_axis; ++j)
        for (std::int64_t i = 0; i < nodes_per_axis; ++i, ++col)
          pts.col(col) = Vec3(lo.x() + cell.x() * double(i),
                              lo.y() + cell.y() * double(j),
                              lo.z() + cell.z() * double(k));
      field.values(pts, out);
      std::copy(out.data(), out.data() + out.size(),
                values.begin() +
                    static_cast<std::size_t>(k * nodes_per_axis * nodes_per_axis));
    }
  }
  auto node_id = [nodes_per_axis](std::int64_t i, std::int64_t j,
                                  std::int64_t k) {
    return (k * nodes_per_axis + j) * nodes_per_axis + i;
  };
  auto node_pos = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    return Vec3(lo.x() + cell.x() * double(i), lo.y() + cell.y() * double(j),
                lo.z() + cell.z() * double(k));
  };

  TriangleMesh mesh;
  std::unordered_map<EdgeKey, int, EdgeKeyHash> edge_vertex;
  // Interpolation parameter kept strictly inside (0, 1) so corner-grazing
  // isovalues cannot collapse the vertices of adjacent edges.
  auto vertex_on_edge = [&](std::int64_t ia, std::int64_t ja, std::int64_t ka,
                            std::int64_t ib, std::int64_t jb, std::int64_t kb) {
    std::int64_t a = node_id(ia, ja, ka);
    std::int64_t b = node_id(ib, jb, kb);
    int axis = ib != ia ? 0 : (jb != ja ? 1 : 2);
    if (b < a) std::swap(a, b);
    const EdgeKey key{a, axis};
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double va = values[static_cast<std::size_t>(a)];
    const double vb = values[static_cast<std::size_t>(b)];
    double t = (vb - va) != 0.0 ? (0.0 - va) / (vb - va) : 0.5;
    t = std::min(std::max(t, 1e-6), 1.0 - 1e-6);
    Vec3 pa = node_pos(a % nodes_per_axis, (a / nodes_per_axis) % nodes_per_axis,
                       a / (nodes_per_axis * nodes_per_axis));
    Vec3 pb = pa;
    pb[axis] += cell[axis];
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    edge_vertex.emplace(key, id);
    return id;
  };

  bool any_crossing = false;
  std::array<double, 8> v;
  std::array<std::int64_t, 8> ci, cj, ck;
  for (std::int64_t k = 0; k < n; ++k) {
    for (std::int64_t j = 0; j < n; ++j) {
      for (std::int64_t i = 0; i < n; ++i) {
        unsigned index = 0;
        for (int c = 0; c < 8; ++c) {
          ci[c] = i + kCornerOffsets[c][0];
          cj[c] = j + kCornerOffsets[c][1];
          ck[c] = k + kCornerOffsets[c][2];
          v[c] = values[static_cast<std::size_t>(node_id(ci[c], cj[c], ck[c]))];
          if (v[c] <= 0.0) index |= 1u << c;
        }
        if (index == 0 || index == 255) continue;
        any_crossing = true;
        const auto& row = kTriTable[index];
        for (int t = 0; row[t] != -1; t += 3) {
          int ids[3];
          for (int e = 0; e < 3; ++e) {
            const int edge = row[t + e];
            const int a = kEdgeCorners[edge][0];
            const int b = kEdgeCorners[edge][1];
            ids[e] = vertex_on_edge(ci[a], cj[a], ck[a], ci[b], cj[b], ck[b]);
          }
          const Vec3& p0 = mesh.vertices[ids[0]];
          const Vec3 e1 = mesh.vertices[ids[1]] - p0;
          const Vec3 e2 = mesh.vertices[ids[2]] - p0;
          if (0.5 * e1.cross(e2).norm() < 1e-12) continue;
          // The table winds faces toward the negative side; emit reversed so
          // normals follow the field gradient.
          mesh.triangles.push_back({ids[0], ids[2], ids[1]});
        }
      }
    }
  }
  if (!any_crossing)
    throw EmptyFieldError("marching_cubes: no zero crossing inside the bound");
  return mesh;
}

double mesh_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& tri : mesh.triangles) {
    const Vec3 e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const Vec3 e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    area += 0.5 * e1.cross(e2).norm();
  }
  return area;
}

MatX sample_surface(const TriangleMesh& mesh, int n_points,
                    std::uint64_t seed) {
  if (mesh.empty()) throw DomainError("sample_surface: empty mesh");
  std::vector<double> cdf(mesh.triangles.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const Vec3 e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    acc += 0.5 * e1.cross(e2).norm();
    cdf[t] = acc;
  }
  if (!(acc > 0.0)) throw DomainError("sample_surface: zero total area");

  Rng rng(seed);
  MatX out(3, n_points);
  for (int p = 0; p < n_points; ++p) {
    const double u = rng.uniform() * acc;
    const std::size_t t = std::min<std::size_t>(
        static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin()),
        cdf.size() - 1);
    const auto& tri = mesh.triangles[t];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - r1;
    const double wb = r1 * (1.0 - r2);
    const double wc = r1 * r2;
    out.col(p) = wa * mesh.vertices[tri[0]] + wb * mesh.vertices[tri[1]] +
                 wc * mesh.vertices[tri[2]];
  }
  return out;
}

}  // namespace neto
