#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "neto/field.hpp"
#include "neto/types.hpp"

namespace neto {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

/// Extracts the zero isosurface of `field` over the box [lo, hi]^3 sampled
/// on a (resolution+1)^3 lattice. Vertices on shared cell edges are reused,
/// so closed surfaces come out watertight. Triangles are wound so their
/// normals point along the field gradient (outward for an SDF).
/// Throws EmptyFieldError when no lattice edge crosses zero and DomainError
/// for resolution < 8.
TriangleMesh marching_cubes(const ScalarField& field, const Vec3& lo,
                            const Vec3& hi, int resolution);

double mesh_area(const TriangleMesh& mesh);

/// Area-weighted uniform surface samples, one per column. Deterministic for
/// a fixed seed.
MatX sample_surface(const TriangleMesh& mesh, int n_points,
                    std::uint64_t seed);

/// ASCII OBJ with `v`/`f` records, 1-based indices.
void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Reads `v`/`f` records; faces with more than three vertices are fan
/// triangulated, `vn`/`vt`/comments are skipped. Throws FormatError with the
/// offending line number on malformed content.
TriangleMesh load_obj(const std::filesystem::path& path);

}  // namespace neto
