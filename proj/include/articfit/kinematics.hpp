#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>

namespace articfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class JointType { revolute, prismatic };

std::string_view to_string(JointType type);
JointType joint_type_from_string(std::string_view name);

// Object space is the unit cube; pivots may sit slightly outside it.
inline constexpr double kPivotBound = 1.5;

struct JointParams {
  JointType type = JointType::revolute;
  Vec3 axis = Vec3::UnitX();
  Vec3 pivot = Vec3::Zero();  // ignored for prismatic joints

  bool has_pivot() const { return type == JointType::revolute; }
};

/// Articulation magnitude: radians for revolute, normalized length for prismatic.
struct JointState {
  double theta = 0.0;
};

/// Maps a point from the posed frame back to the canonical (rest) frame.
Vec3 inverse_transform(const Vec3& c, const JointParams& joint, JointState state);

/// Maps a canonical point into the posed frame; exact inverse of inverse_transform.
Vec3 forward_transform(const Vec3& c, const JointParams& joint, JointState state);

/// Partial derivatives of inverse_transform. The axis is treated as a free
/// 3-vector inside the Rodrigues expression; callers project the accumulated
/// axis gradient onto the tangent space of the unit sphere.
struct TransformJacobians {
  Mat3 d_axis;
  std::optional<Mat3> d_pivot;
  Vec3 d_theta;
  Mat3 d_c;
};

TransformJacobians inverse_transform_jacobians(const Vec3& c, const JointParams& joint,
                                               JointState state);

/// Removes the component of `grad` along the unit vector `axis`.
Vec3 project_to_tangent(const Vec3& grad, const Vec3& axis);

double theta_lower_bound(JointType type);
double theta_upper_bound(JointType type);
double clamp_theta(JointType type, double theta);

/// Re-normalizes the axis and clamps the pivot to its box.
void normalize_joint(JointParams& joint);

/// Flips the axis so its largest-magnitude component is non-negative.
/// Returns true when a flip happened (callers negate their thetas).
bool canonicalize_axis(Vec3& axis);

Mat3 rotation_matrix(const Vec3& unit_axis, double angle);

}  // namespace articfit
