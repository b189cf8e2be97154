#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpf/mesh.hpp"

namespace vpf::metrics {

/// Exact nearest neighbour over a fixed point set (k-d tree, median splits).
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points);
  /// Index of the nearest point; ties go to the lower index.
  int nearest(Vec3 q, double* dist2 = nullptr) const;
  size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1, right = -1;
  };
  int build(std::vector<int>& idx, size_t lo, size_t hi, int depth);
  void search(int node, Vec3 q, int& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // of the source face
};

/// Area-uniform samples. Empty mesh gives no samples.
SurfaceSamples sample_surface(const TriMesh& m, int n, uint64_t seed);

/// Monte-Carlo IoU over the union bounding box scaled by 1.05. Throws
/// std::domain_error if no sample falls inside either mesh.
double volumetric_iou(const TriMesh& pred, const TriMesh& gt, int n = 100000, uint64_t seed = 0, int workers = 1);

struct ChamferResult {
  double value = 0;  // in units of (max GT bbox edge / 10); +inf when empty_prediction
  double accuracy = 0, completeness = 0;
  bool empty_prediction = false;
};
ChamferResult chamfer_l1(const TriMesh& pred, const TriMesh& gt, int n = 100000, uint64_t seed = 0, int workers = 1);

/// Symmetric mean |n_a . n_b| over nearest-neighbour pairs; 0 for an empty
/// prediction.
double normal_consistency(const TriMesh& pred, const TriMesh& gt, int n = 100000, uint64_t seed = 0,
                          int workers = 1);

struct MetricReport {
  std::string object_id;
  int n_views = 0;
  double iou = 0;
  double chamfer_l1 = 0;
  double normal_consistency = 0;
  bool empty_prediction = false;
  int sample_count = 0;
  uint64_t seed = 0;
};

MetricReport evaluate(const TriMesh& pred, const TriMesh& gt, int n = 100000, uint64_t seed = 0, int workers = 1);

std::string report_json(const MetricReport& r);
/// Fixed-width columns, one header line then one line per report.
std::string report_table(const std::vector<MetricReport>& rows);

}  // namespace vpf::metrics
