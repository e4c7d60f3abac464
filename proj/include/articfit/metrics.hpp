#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "articfit/kinematics.hpp"
#include "articfit/mesh.hpp"
#include "articfit/refine.hpp"
#include "articfit/synth.hpp"

namespace articfit {

/// Exact nearest-neighbour queries over a fixed point set using a uniform
/// bucket grid searched in growing shells.
class PointIndex {
 public:
  explicit PointIndex(std::span<const Vec3> points);

  /// Euclidean distance from q to the closest indexed point.
  double nearest_distance(const Vec3& q) const;

 private:
  std::size_t cell_index(int x, int y, int z) const;

  std::vector<Vec3> points_;  // sorted by cell
  std::vector<std::size_t> cell_start_;
  Vec3 origin_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
};

/// Nearest-neighbour distance from each point of `queries` to `targets`.
std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> targets);

/// 0.5 * (mean_a d(a, B) + mean_b d(b, A)). Throws EmptyInput.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Harmonic mean of precision (A within tau of B) and recall; 0 when both are 0.
double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double tau = 0.05);

/// Angle between two axes up to sign, in [0, pi/2]. Throws ZeroVector.
double axis_error(const Vec3& a_p, const Vec3& a_g);

/// Shortest distance between the predicted and true axis lines; parallel axes
/// fall back to the distance of x_p from the true line. Throws ZeroVector.
double pivot_error(const Vec3& a_p, const Vec3& x_p, const Vec3& a_g, const Vec3& x_g);

/// Labeled geometry in a reference pose plus its joints: what evaluation poses.
struct ArticulatedShape {
  PartLabelGrid labels;
  VoxelGrid occupancy;               // surface source for marching cubes
  std::vector<JointParams> joints;
  std::vector<double> theta_ref;     // per part: pose the labels were captured in
  std::vector<double> theta_max;     // per part: end of the evaluated range
};

/// Ground truth as an ArticulatedShape: rest-frame labels, true joints, and
/// theta_max taken from the scene's largest state.
ArticulatedShape shape_from_scene(const GroundTruthScene& scene);

/// Refined prediction: labels and cleaned occupancy in the k_max pose.
ArticulatedShape shape_from_refined(const ArticulatedModel& model, const RefineResult& refined);

/// Occupancy of `shape` with every part j moved to theta[j] (nearest-neighbour
/// lookup into the reference labels).
VoxelGrid pose_shape(const ArticulatedShape& shape, std::span<const double> theta);

/// Union mesh of `shape` with part j moved to theta[j]; empty parts are skipped.
TriangleMesh pose_shape_mesh(const ArticulatedShape& shape, std::span<const double> theta);

struct EvalOptions {
  int n_states = 6;
  std::size_t n_points = 100000;
  double tau = 0.05;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  /// Skip mesh sampling (CD and F-score are reported as NaN).
  bool surface_metrics = true;
};

struct StateMetrics {
  double fraction = 0.0;  // theta = fraction * theta_max
  double chamfer = 0.0;
  double fscore = 0.0;
  double iou = 0.0;
};

struct JointMetrics {
  JointType type = JointType::revolute;
  double axis_error = 0.0;
  std::optional<double> pivot_error;  // revolute only
};

struct EvalReport {
  std::vector<StateMetrics> states;
  std::vector<JointMetrics> joints;
  double mean_chamfer = 0.0;
  double mean_fscore = 0.0;
  double mean_iou = 0.0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Poses prediction and ground truth at n_states evenly spaced fractions of
/// their own theta_max (0 .. 1) and compares them; axis/pivot errors per joint.
EvalReport evaluate(const ArticulatedShape& predicted, const ArticulatedShape& truth,
                    const EvalOptions& options = {});

}  // namespace articfit
