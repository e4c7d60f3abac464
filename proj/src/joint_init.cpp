#include "articfit/joint_init.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "articfit/error.hpp"

namespace articfit {

namespace {

constexpr double kMinRotation = 1e-3;
constexpr double kMinTranslation = 1e-6;

Vec3 centroid_src(std::span<const PointPair> pairs) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pairs) c += p.p_src;
  return c / static_cast<double>(pairs.size());
}

Vec3 centroid_dst(std::span<const PointPair> pairs) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pairs) c += p.p_dst;
  return c / static_cast<double>(pairs.size());
}

void require_spread(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) throw Error(ErrorKind::collinear, "revolute fit needs at least 3 pairs");
  const Vec3 c = centroid_src(pairs);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pairs) cov += (p.p_src - c) * (p.p_src - c).transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
  const Vec3 s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) <= 1e-12 * s(0)) {
    throw Error(ErrorKind::collinear, "pairs span fewer than two dimensions");
  }
}

double revolute_error(const PointPair& p, const Mat3& r, const Vec3& pivot) {
  return (r * (p.p_src - pivot) + pivot - p.p_dst).norm();
}

// Rotation + pivot from a rigid fit; along-axis pivot component is the
// minimum-norm solution relative to the moving points' centroid.
InitEstimate revolute_from_pairs(std::span<const PointPair> pairs) {
  require_spread(pairs);
  const RigidFit fit = fit_rigid(pairs);
  const Eigen::AngleAxisd aa(fit.rotation);
  double theta = aa.angle();
  Vec3 axis = aa.axis();
  if (std::abs(theta) < kMinRotation) {
    throw Error(ErrorKind::degenerate_rotation, "rotation angle below 1e-3 rad; axis undefined");
  }
  if (canonicalize_axis(axis)) theta = -theta;

  const Vec3 m = centroid_src(pairs);
  const Mat3 a = Mat3::Identity() - fit.rotation;
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  const Vec3 q = svd.solve(fit.translation - a * m);
  const Vec3 pivot = m + q;

  InitEstimate est;
  est.joint.type = JointType::revolute;
  est.joint.axis = axis;
  est.joint.pivot = pivot;
  est.thetas = {0.0, theta};
  const Mat3 r = rotation_matrix(axis, theta);
  double sq = 0.0;
  for (const auto& p : pairs) sq += std::pow(revolute_error(p, r, pivot), 2);
  est.residual = std::sqrt(sq / static_cast<double>(pairs.size()));
  est.inlier_count = pairs.size();
  return est;
}

InitEstimate prismatic_from_pairs(std::span<const PointPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::all_static, "no pairs to fit a translation");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pairs) mean += p.p_dst - p.p_src;
  mean /= static_cast<double>(pairs.size());
  if (mean.norm() < kMinTranslation) throw Error(ErrorKind::all_static, "mean displacement below 1e-6");
  Vec3 axis = mean.normalized();
  canonicalize_axis(axis);  // theta below is measured along the canonical axis
  double theta = 0.0;
  double sq = 0.0;
  for (const auto& p : pairs) {
    const Vec3 d = p.p_dst - p.p_src;
    const double along = d.dot(axis);
    theta += along;
    sq += (d - along * axis).squaredNorm();
  }
  theta /= static_cast<double>(pairs.size());

  InitEstimate est;
  est.joint.type = JointType::prismatic;
  est.joint.axis = axis;
  est.thetas = {0.0, theta};
  est.residual = std::sqrt(sq / static_cast<double>(pairs.size()));
  est.inlier_count = pairs.size();
  return est;
}

double pair_error(const PointPair& p, const InitEstimate& est) {
  const double theta = est.thetas.back();
  if (est.joint.type == JointType::revolute) {
    return revolute_error(p, rotation_matrix(est.joint.axis, theta), est.joint.pivot);
  }
  return (p.p_src + theta * est.joint.axis - p.p_dst).norm();
}

template <typename Fit>
InitEstimate with_ransac(std::span<const PointPair> pairs, const RansacOptions& opt, std::size_t sample_size,
                         Fit fit) {
  if (!opt.enabled || pairs.size() <= sample_size) return fit(pairs);
  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<PointPair> best_inliers;
  for (int it = 0; it < opt.iterations; ++it) {
    // Partial Fisher-Yates draw of the minimal sample.
    std::vector<PointPair> sample;
    for (std::size_t s = 0; s < sample_size; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, idx.size() - 1);
      std::swap(idx[s], idx[pick(rng)]);
      sample.push_back(pairs[idx[s]]);
    }
    InitEstimate candidate;
    try {
      candidate = fit(std::span<const PointPair>(sample));
    } catch (const Error&) {
      continue;
    }
    std::vector<PointPair> inliers;
    for (const auto& p : pairs) {
      if (pair_error(p, candidate) < opt.inlier_threshold) inliers.push_back(p);
    }
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
  }
  if (best_inliers.size() <= sample_size) return fit(pairs);
  return fit(std::span<const PointPair>(best_inliers));
}

}  // namespace

void validate_pairs(std::span<const PointPair> pairs) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const Vec3* v : {&pairs[i].p_src, &pairs[i].p_dst}) {
      if (!v->allFinite() || v->minCoeff() < -0.5 || v->maxCoeff() > 1.5) {
        throw Error(ErrorKind::config, "pair " + std::to_string(i) + " has a point outside [-0.5, 1.5]^3");
      }
    }
  }
}

std::vector<PointPair> filter_static_pairs(std::span<const PointPair> pairs, double threshold) {
  if (pairs.empty()) throw Error(ErrorKind::empty_input, "no point pairs given");
  std::vector<PointPair> out;
  for (const auto& p : pairs) {
    if ((p.p_dst - p.p_src).norm() > threshold) out.push_back(p);
  }
  if (out.empty()) throw Error(ErrorKind::all_static, "every pair moves by at most the static threshold");
  return out;
}

RigidFit fit_rigid(std::span<const PointPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::empty_input, "no point pairs given");
  const Vec3 cs = centroid_src(pairs);
  const Vec3 cd = centroid_dst(pairs);
  Mat3 h = Mat3::Zero();
  for (const auto& p : pairs) h += (p.p_src - cs) * (p.p_dst - cd).transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidFit fit;
  fit.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  fit.translation = cd - fit.rotation * cs;
  return fit;
}

InitEstimate estimate_revolute(std::span<const PointPair> pairs, const RansacOptions& ransac) {
  return with_ransac(pairs, ransac, 3, [](std::span<const PointPair> p) { return revolute_from_pairs(p); });
}

InitEstimate estimate_prismatic(std::span<const PointPair> pairs, const RansacOptions& ransac) {
  return with_ransac(pairs, ransac, 1, [](std::span<const PointPair> p) { return prismatic_from_pairs(p); });
}

InitEstimate estimate_multi_state(std::span<const PointPair> pairs, JointType type, int num_states,
                                  const RansacOptions& ransac) {
  if (num_states < 2) throw Error(ErrorKind::config, "multi-state fit needs at least two states");
  // Group by (src, dst), orienting rest-involving pairs as 0 -> k.
  std::map<std::pair<int, int>, std::vector<PointPair>> groups;
  for (const auto& p : pairs) {
    if (p.state_src == p.state_dst) continue;
    if (p.state_src < 0 || p.state_dst < 0 || p.state_src >= num_states || p.state_dst >= num_states) {
      throw Error(ErrorKind::config, "pair references a state outside [0, num_states)");
    }
    if (p.state_dst == 0) {
      groups[{0, p.state_src}].push_back({p.p_dst, p.p_src, 0, p.state_src});
    } else {
      groups[{p.state_src, p.state_dst}].push_back(p);
    }
  }

  std::vector<std::optional<InitEstimate>> direct(static_cast<std::size_t>(num_states));
  std::optional<Error> last_error;
  auto fit = [&](const std::vector<PointPair>& g) {
    return type == JointType::revolute ? estimate_revolute(g, ransac) : estimate_prismatic(g, ransac);
  };
  for (const auto& [key, g] : groups) {
    if (key.first != 0) continue;
    try {
      direct[static_cast<std::size_t>(key.second)] = fit(g);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_rotation && e.kind() != ErrorKind::all_static &&
          e.kind() != ErrorKind::collinear) {
        throw;
      }
      last_error = e;
    }
  }

  // Reference axis: the best-fitting direct estimate.
  const InitEstimate* ref = nullptr;
  for (const auto& d : direct) {
    if (d && (!ref || d->residual < ref->residual)) ref = &*d;
  }
  if (!ref) {
    if (last_error) throw *last_error;
    throw Error(ErrorKind::empty_input, "no pairs relate the rest state to another state");
  }

  InitEstimate out;
  out.joint.type = type;
  out.thetas.assign(static_cast<std::size_t>(num_states), 0.0);
  std::vector<bool> known(static_cast<std::size_t>(num_states), false);
  known[0] = true;
  Vec3 axis_sum = Vec3::Zero();
  Vec3 pivot_sum = Vec3::Zero();
  double weight_sum = 0.0;
  double sq_residual = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k < direct.size(); ++k) {
    if (!direct[k]) continue;
    const InitEstimate& e = *direct[k];
    const double sign = e.joint.axis.dot(ref->joint.axis) < 0.0 ? -1.0 : 1.0;
    const double w = 1.0 / (e.residual + 1e-12);
    axis_sum += w * sign * e.joint.axis;
    pivot_sum += w * e.joint.pivot;
    weight_sum += w;
    out.thetas[k] = sign * e.thetas.back();
    known[k] = true;
    sq_residual += e.residual * e.residual * static_cast<double>(e.inlier_count);
    count += e.inlier_count;
  }
  out.joint.axis = axis_sum.normalized();
  out.joint.pivot = type == JointType::revolute ? Vec3(pivot_sum / weight_sum) : Vec3::Zero();
  if (canonicalize_axis(out.joint.axis)) {
    for (double& t : out.thetas) t = -t;
  }

  // States without a rest-relative fit: compose through a known state.
  for (const auto& [key, g] : groups) {
    const auto [src, dst] = key;
    if (src == 0 || known[static_cast<std::size_t>(dst)] || !known[static_cast<std::size_t>(src)]) continue;
    try {
      const InitEstimate e = fit(g);
      const double sign = e.joint.axis.dot(out.joint.axis) < 0.0 ? -1.0 : 1.0;
      out.thetas[static_cast<std::size_t>(dst)] = out.thetas[static_cast<std::size_t>(src)] + sign * e.thetas.back();
      known[static_cast<std::size_t>(dst)] = true;
    } catch (const Error&) {
    }
  }

  out.residual = count > 0 ? std::sqrt(sq_residual / static_cast<double>(count)) : 0.0;
  out.inlier_count = count;
  return out;
}

}  // namespace articfit
