#include "articfit/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "articfit/error.hpp"

namespace articfit {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

// Rodrigues rotation of q about a by angle; `a` need not be unit length here.
Vec3 rodrigues(const Vec3& q, const Vec3& a, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return q * c + a.cross(q) * s + a * (a.dot(q) * (1.0 - c));
}

}  // namespace

std::string_view to_string(JointType type) {
  return type == JointType::revolute ? "revolute" : "prismatic";
}

JointType joint_type_from_string(std::string_view name) {
  if (name == "revolute") return JointType::revolute;
  if (name == "prismatic") return JointType::prismatic;
  throw Error(ErrorKind::config, "joint_type must be 'revolute' or 'prismatic', got '" +
                                     std::string(name) + "'");
}

Vec3 inverse_transform(const Vec3& c, const JointParams& joint, JointState state) {
  if (joint.type == JointType::prismatic) return c - state.theta * joint.axis;
  return rodrigues(c - joint.pivot, joint.axis, -state.theta) + joint.pivot;
}

Vec3 forward_transform(const Vec3& c, const JointParams& joint, JointState state) {
  if (joint.type == JointType::prismatic) return c + state.theta * joint.axis;
  return rodrigues(c - joint.pivot, joint.axis, state.theta) + joint.pivot;
}

TransformJacobians inverse_transform_jacobians(const Vec3& c, const JointParams& joint,
                                               JointState state) {
  TransformJacobians j;
  const Vec3& a = joint.axis;
  const double theta = state.theta;
  if (joint.type == JointType::prismatic) {
    j.d_axis = -theta * Mat3::Identity();
    j.d_theta = -a;
    j.d_c = Mat3::Identity();
    return j;
  }

  // out = q cos(th) - (a x q) sin(th) + a (a.q)(1 - cos(th)) + p,  q = c - p.
  // Every term is polynomial in (sin, cos), so th = 0 needs no special casing.
  const Vec3 q = c - joint.pivot;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double aq = a.dot(q);

  j.d_theta = -q * sn - a.cross(q) * cs + a * (aq * sn);
  j.d_c = cs * Mat3::Identity() - sn * skew(a) + (1.0 - cs) * (a * a.transpose());
  j.d_pivot = Mat3::Identity() - j.d_c;
  // d(a x q)/da = -[q]x ;  d(a (a.q))/da = (a.q) I + a q^T
  j.d_axis = sn * skew(q) + (1.0 - cs) * (aq * Mat3::Identity() + a * q.transpose());
  return j;
}

Vec3 project_to_tangent(const Vec3& grad, const Vec3& axis) {
  return grad - axis * axis.dot(grad);
}

double theta_lower_bound(JointType type) {
  return type == JointType::revolute ? -std::numbers::pi : -1.0;
}

double theta_upper_bound(JointType type) {
  return type == JointType::revolute ? std::numbers::pi : 1.0;
}

double clamp_theta(JointType type, double theta) {
  return std::clamp(theta, theta_lower_bound(type), theta_upper_bound(type));
}

void normalize_joint(JointParams& joint) {
  const double n = joint.axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorKind::numerical_divergence, "joint axis collapsed to zero or non-finite");
  }
  joint.axis /= n;
  for (int i = 0; i < 3; ++i) joint.pivot[i] = std::clamp(joint.pivot[i], -kPivotBound, kPivotBound);
}

bool canonicalize_axis(Vec3& axis) {
  Eigen::Index idx = 0;
  axis.cwiseAbs().maxCoeff(&idx);
  if (axis[idx] < 0.0) {
    axis = -axis;
    return true;
  }
  return false;
}

Mat3 rotation_matrix(const Vec3& unit_axis, double angle) {
  return Eigen::AngleAxisd(angle, unit_axis).toRotationMatrix();
}

}  // namespace articfit
