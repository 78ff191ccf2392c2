#pragma once

#include <vector>

#include "neto/geometry.hpp"
#include "neto/shapes.hpp"
#include "neto/types.hpp"

namespace neto {

/// Outcome of the exact multi-refraction trace on an analytic shape.
/// `count` is the number of refractions along the full escaped path; `tir`
/// marks a total internal reflection at any interior crossing (the count is
/// then the refractions before that event). `last_point`/`last_dir` describe
/// the escaping segment, so for count == 2 they extend to the monitor hit.
/// `bailed` flags a march-budget exhaustion and never appears in practice on
/// the shipped shapes; tests assert it stays false.
struct BounceResult {
  int count = 0;
  bool tir = false;
  bool bailed = false;
  Vec3 last_point = Vec3::Zero();
  Vec3 last_dir = Vec3::Zero();
  std::vector<Vec3> crossings;
};

/// Exact refraction count by sphere tracing the analytic SDF (surface
/// tolerance 1e-7) and applying Snell's law at every crossing. The march is
/// confined to the box [-2, 2]^3; leaving it ends the path.
BounceResult brute_force_bounce_count(const ShapeSpec& shape, const Ray& ray,
                                      const OpticalConstants& constants,
                                      int max_bounces = 8);

}  // namespace neto
