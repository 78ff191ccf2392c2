#include "neto/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "neto/parallel.hpp"

namespace neto {
namespace {

/// Static kd-tree over point columns. Nodes are index ranges split at the
/// median along the widest axis; queries are exact.
class KdTree {
 public:
  explicit KdTree(const MatX& pts) : pts_(pts), idx_(pts.cols()) {
    std::iota(idx_.begin(), idx_.end(), 0);
    nodes_.reserve(2 * idx_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(idx_.size()));
  }

  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
  }

 private:
  static constexpr int kLeafSize = 16;
  struct Node {
    double split = 0;
    int axis = -1;  // -1 marks a leaf
    int lo = 0, hi = 0;
    int left = -1, right = -1;
  };

  int build(int lo, int hi) {
    Node node;
    node.lo = lo;
    node.hi = hi;
    if (hi - lo <= kLeafSize) {
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    Vec3 mn = pts_.col(idx_[lo]), mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
      mn = mn.cwiseMin(pts_.col(idx_[i]));
      mx = mx.cwiseMax(pts_.col(idx_[i]));
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);
    const int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) {
                       return pts_(axis, a) < pts_(axis, b);
                     });
    node.axis = axis;
    node.split = pts_(axis, idx_[mid]);
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(lo, mid);
    const int right = build(mid, hi);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(int ni, const Vec3& q, double& best) const {
    const Node& node = nodes_[ni];
    if (node.axis < 0) {
      for (int i = node.lo; i < node.hi; ++i) {
        const double d = (q - Vec3(pts_.col(idx_[i]))).squaredNorm();
        if (d < best) best = d;
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int first = delta < 0 ? node.left : node.right;
    const int second = delta < 0 ? node.right : node.left;
    search(first, q, best);
    if (delta * delta < best) search(second, q, best);
  }

  const MatX& pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace

VecX nearest_distances(const MatX& queries, const MatX& targets,
                       bool brute_force) {
  const Eigen::Index n = queries.cols();
  VecX out(n);
  if (brute_force) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      const Vec3 q = queries.col(i);
      for (Eigen::Index j = 0; j < targets.cols(); ++j) {
        const double d = (q - Vec3(targets.col(j))).squaredNorm();
        if (d < best) best = d;
      }
      out[i] = std::sqrt(best);
    }
    return out;
  }
  KdTree tree(targets);
  parallel_chunks(static_cast<std::size_t>(n),
                  [&](int, std::size_t lo, std::size_t hi) {
                    for (std::size_t i = lo; i < hi; ++i)
                      out[static_cast<Eigen::Index>(i)] = std::sqrt(
                          tree.nearest_sq(queries.col(static_cast<Eigen::Index>(i))));
                  });
  return out;
}

MetricsReport evaluate(const TriangleMesh& recon, const TriangleMesh& gt,
                       double tau, int n_samples, std::uint64_t seed) {
  if (recon.empty() || gt.empty())
    throw DomainError("evaluate: meshes must be non-empty");
  const MatX samples_r = sample_surface(recon, n_samples, seed);
  const MatX samples_g = sample_surface(gt, n_samples, seed);
  const VecX d_rg = nearest_distances(samples_r, samples_g);
  const VecX d_gr = nearest_distances(samples_g, samples_r);

  MetricsReport rep;
  rep.tau = tau;
  rep.n_samples = n_samples;
  rep.seed = seed;
  rep.accuracy = d_rg.mean();
  rep.completeness = d_gr.mean();
  rep.precision =
      double((d_rg.array() <= tau).count()) / double(d_rg.size());
  rep.recall = double((d_gr.array() <= tau).count()) / double(d_gr.size());
  const double denom = rep.precision + rep.recall;
  rep.f_score = denom > 0 ? 2.0 * rep.precision * rep.recall / denom : 0.0;
  return rep;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["completeness"] = r.completeness;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f_score"] = r.f_score;
  j["tau"] = r.tau;
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  j["distance_statistic"] = "mean";
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad metrics JSON in " + path + ": " + e.what());
  }
  MetricsReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.completeness = j.at("completeness").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f_score = j.at("f_score").get<double>();
  r.tau = j.at("tau").get<double>();
  r.n_samples = j.at("n_samples").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace neto
