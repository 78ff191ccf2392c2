#pragma once

#include <cstdint>
#include <string>

#include "neto/mesh.hpp"
#include "neto/types.hpp"

namespace neto {

/// Point-sampled mesh comparison. Accuracy and completeness are mean
/// nearest-neighbor distances (not medians); precision/recall count samples
/// within tau inclusively.
struct MetricsReport {
  double accuracy = 0;      ///< mean over recon samples, distance to gt
  double completeness = 0;  ///< mean over gt samples, distance to recon
  double precision = 0;
  double recall = 0;
  double f_score = 0;
  double tau = 0.01;
  int n_samples = 0;
  std::uint64_t seed = 0;
};

/// Exact nearest-neighbor distances from each query column to the target
/// cloud, via a kd-tree. `brute_force` switches to the quadratic scan; both
/// paths compute identical values.
VecX nearest_distances(const MatX& queries, const MatX& targets,
                       bool brute_force = false);

/// Samples both meshes with the same seed (so evaluate(A, A) is exactly
/// degenerate and the accuracy/completeness swap identity holds) and
/// assembles the report.
MetricsReport evaluate(const TriangleMesh& recon, const TriangleMesh& gt,
                       double tau = 0.01, int n_samples = 100000,
                       std::uint64_t seed = 0);

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json_file(const std::string& path);

}  // namespace neto
