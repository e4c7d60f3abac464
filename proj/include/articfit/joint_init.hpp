#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "articfit/kinematics.hpp"

namespace articfit {

/// A 3D point observed in state `state_src` and its match in state `state_dst`.
struct PointPair {
  Vec3 p_src = Vec3::Zero();
  Vec3 p_dst = Vec3::Zero();
  int state_src = 0;
  int state_dst = 1;
};

struct InitEstimate {
  JointParams joint;
  /// Pairwise fits: {0, theta}. Multi-state fits: one value per state, thetas[0] = 0.
  std::vector<double> thetas;
  double residual = 0.0;  // RMS 3D distance after the fitted motion
  std::size_t inlier_count = 0;
};

struct RansacOptions {
  bool enabled = false;
  double inlier_threshold = 0.02;
  int iterations = 200;
  std::uint64_t seed = 0;
};

/// Throws ErrorKind::config if a point lies outside [-0.5, 1.5]^3 or is non-finite.
void validate_pairs(std::span<const PointPair> pairs);

/// Keeps pairs that move by more than `threshold`. Throws AllStatic if none do.
std::vector<PointPair> filter_static_pairs(std::span<const PointPair> pairs, double threshold = 0.02);

/// Least-squares rigid motion between the two point sets, read as a rotation
/// about an axis line. Throws Collinear or DegenerateRotation.
InitEstimate estimate_revolute(std::span<const PointPair> pairs, const RansacOptions& ransac = {});

/// Pure translation: axis = normalized mean displacement. Throws AllStatic.
InitEstimate estimate_prismatic(std::span<const PointPair> pairs, const RansacOptions& ransac = {});

/// Fits every state against the rest state (index 0) and fuses the axes and
/// pivots with inverse-residual weights. `num_states` includes the rest state.
InitEstimate estimate_multi_state(std::span<const PointPair> pairs, JointType type, int num_states,
                                  const RansacOptions& ransac = {});

/// Relative rotation of two rigid point sets (Kabsch), and the translation
/// with dst ~= R src + t.
struct RigidFit {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};
RigidFit fit_rigid(std::span<const PointPair> pairs);

}  // namespace articfit
