#include "articfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "articfit/error.hpp"

namespace articfit {

PointIndex::PointIndex(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorKind::empty_input, "cannot index an empty point set");
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  const Vec3 extent = (hi - lo).cwiseMax(Vec3::Constant(1e-12));
  // Aim for a couple of points per occupied cell whether the set fills a
  // volume or lies on a surface, capped at a few cells per point.
  const double n = static_cast<double>(points.size());
  const double surface = 2.0 * (extent.x() * extent.y() + extent.y() * extent.z() + extent.z() * extent.x());
  cell_ = std::max(std::min(std::cbrt(2.0 * extent.prod() / n), std::sqrt(2.0 * surface / n)), 1e-9);
  auto total_cells = [&] {
    double c = 1.0;
    for (int a = 0; a < 3; ++a) c *= std::floor(extent[a] / cell_) + 2.0;
    return c;
  };
  while (total_cells() > 4.0 * n + 8.0) cell_ *= 1.25;
  for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(extent[a] / cell_)) + 1;

  const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  std::vector<std::size_t> owner(points.size());
  cell_start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    int c[3];
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>((points[i][a] - origin_[a]) / cell_), 0, dims_[a] - 1);
    }
    owner[i] = cell_index(c[0], c[1], c[2]);
    ++cell_start_[owner[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  points_.resize(points.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) points_[fill[owner[i]]++] = points[i];
}

std::size_t PointIndex::cell_index(int x, int y, int z) const {
  return static_cast<std::size_t>(x) + static_cast<std::size_t>(dims_[0]) *
         (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(z));
}

double PointIndex::nearest_distance(const Vec3& q) const {
  int c[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>(std::floor((q[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
  }
  double best = std::numeric_limits<double>::infinity();
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  for (int ring = 0; ring <= max_ring; ++ring) {
    const int lo[3] = {c[0] - ring, c[1] - ring, c[2] - ring};
    const int hi[3] = {c[0] + ring, c[1] + ring, c[2] + ring};
    for (int z = std::max(lo[2], 0); z <= std::min(hi[2], dims_[2] - 1); ++z) {
      for (int y = std::max(lo[1], 0); y <= std::min(hi[1], dims_[1] - 1); ++y) {
        const bool shell_yz = z == lo[2] || z == hi[2] || y == lo[1] || y == hi[1];
        for (int x = std::max(lo[0], 0); x <= std::min(hi[0], dims_[0] - 1); ++x) {
          if (!shell_yz && x != lo[0] && x != hi[0]) continue;
          const std::size_t cell = cell_index(x, y, z);
          for (std::size_t i = cell_start_[cell]; i < cell_start_[cell + 1]; ++i) {
            best = std::min(best, (points_[i] - q).norm());
          }
        }
      }
    }
    // Points outside the searched box lie at least this far away; sides
    // clipped by the grid border have nothing beyond them.
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (lo[a] > 0) bound = std::min(bound, q[a] - (origin_[a] + lo[a] * cell_));
      if (hi[a] < dims_[a] - 1) bound = std::min(bound, origin_[a] + (hi[a] + 1) * cell_ - q[a]);
    }
    if (best <= bound) break;
  }
  return best;
}

std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> targets) {
  const PointIndex index(targets);
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = index.nearest_distance(queries[i]);
  return out;
}

namespace {

void require_points(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::empty_input, "point sets must be non-empty");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double fraction_within(const std::vector<double>& d, double tau) {
  std::size_t n = 0;
  for (double x : d) n += x <= tau;
  return static_cast<double>(n) / static_cast<double>(d.size());
}

double f_from(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_points(a, b);
  return 0.5 * (mean(nearest_distances(a, b)) + mean(nearest_distances(b, a)));
}

double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double tau) {
  require_points(a, b);
  return f_from(fraction_within(nearest_distances(a, b), tau), fraction_within(nearest_distances(b, a), tau));
}

double axis_error(const Vec3& a_p, const Vec3& a_g) {
  const double np = a_p.norm(), ng = a_g.norm();
  if (np == 0.0 || ng == 0.0) throw Error(ErrorKind::zero_vector, "axis_error needs non-zero axes");
  // min(acos(d), acos(-d)) written as atan2(|a x g|, |a . g|): same value, but
  // accurate near 0 where acos loses half the digits.
  const Vec3 a = a_p / np, g = a_g / ng;
  return std::atan2(a.cross(g).norm(), std::abs(a.dot(g)));
}

double pivot_error(const Vec3& a_p, const Vec3& x_p, const Vec3& a_g, const Vec3& x_g) {
  if (a_p.norm() == 0.0 || a_g.norm() == 0.0) throw Error(ErrorKind::zero_vector, "pivot_error needs non-zero axes");
  const Vec3 p = x_p - x_g;
  const Vec3 n = a_p.cross(a_g);
  const double nn = n.norm();
  if (nn < 1e-9) {
    const Vec3 g = a_g.normalized();
    return (p - p.dot(g) * g).norm();
  }
  return std::abs(p.dot(n)) / nn;
}

ArticulatedShape shape_from_scene(const GroundTruthScene& scene) {
  ArticulatedShape shape;
  const int res = scene.body_rest.resolution();
  shape.labels.resolution = res;
  shape.labels.num_parts = scene.parts_rest.size();
  shape.labels.labels.assign(scene.body_rest.size(), kLabelEmpty);
  shape.occupancy = VoxelGrid(res);
  for (std::size_t i = 0; i < scene.body_rest.size(); ++i) {
    if (scene.body_rest[i] >= 0.5) shape.labels.labels[i] = kLabelBody;
    for (std::size_t j = 0; j < scene.parts_rest.size(); ++j) {
      if (scene.parts_rest[j][i] >= 0.5) shape.labels.labels[i] = part_label(j);
    }
    if (shape.labels.labels[i] != kLabelEmpty) shape.occupancy[i] = 1.0;
  }
  shape.joints = scene.joints;
  shape.theta_ref.assign(scene.joints.size(), 0.0);
  std::size_t k_max = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < scene.thetas.size(); ++k) {
    double sum = 0.0;
    for (double t : scene.thetas[k]) sum += std::abs(t);
    if (sum > best) {
      best = sum;
      k_max = k;
    }
  }
  shape.theta_max = scene.thetas[k_max];
  return shape;
}

ArticulatedShape shape_from_refined(const ArticulatedModel& model, const RefineResult& refined) {
  ArticulatedShape shape;
  shape.labels = refined.labels;
  shape.occupancy = refined.cleaned;
  for (const auto& part : model.parts) shape.joints.push_back(part.joint);
  shape.theta_ref = model.states[refined.k_max];
  shape.theta_max = model.states[refined.k_max];
  return shape;
}

namespace {

void check_theta(const ArticulatedShape& shape, std::span<const double> theta) {
  if (theta.size() != shape.joints.size() || shape.theta_ref.size() != shape.joints.size()) {
    throw Error(ErrorKind::config, "theta count does not match the number of joints");
  }
}

struct ShapeMeshes {
  std::optional<TriangleMesh> body;
  std::vector<std::optional<TriangleMesh>> parts;
};

ShapeMeshes reference_meshes(const ArticulatedShape& shape) {
  ShapeMeshes meshes;
  auto try_extract = [&](std::uint8_t label) -> std::optional<TriangleMesh> {
    if (shape.labels.count(label) == 0) return std::nullopt;
    return extract_mesh(shape.labels, shape.occupancy, label);
  };
  meshes.body = try_extract(kLabelBody);
  for (std::size_t j = 0; j < shape.joints.size(); ++j) meshes.parts.push_back(try_extract(part_label(j)));
  return meshes;
}

TriangleMesh pose_meshes(const ArticulatedShape& shape, const ShapeMeshes& meshes, std::span<const double> theta) {
  TriangleMesh out;
  if (meshes.body) out.append(*meshes.body);
  for (std::size_t j = 0; j < meshes.parts.size(); ++j) {
    if (!meshes.parts[j]) continue;
    TriangleMesh part = *meshes.parts[j];
    for (auto& v : part.vertices) {
      v = forward_transform(inverse_transform(v, shape.joints[j], {shape.theta_ref[j]}), shape.joints[j], {theta[j]});
    }
    out.append(part);
  }
  return out;
}

}  // namespace

VoxelGrid pose_shape(const ArticulatedShape& shape, std::span<const double> theta) {
  check_theta(shape, theta);
  const int res = shape.labels.resolution;
  VoxelGrid out(res);
  for (int z = 0; z < res; ++z) {
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        const std::size_t i = out.index(x, y, z);
        if (shape.labels.labels[i] == kLabelBody) {
          out[i] = 1.0;
          continue;
        }
        const Vec3 c = out.center(x, y, z);
        for (std::size_t j = 0; j < shape.joints.size(); ++j) {
          const Vec3 r = forward_transform(inverse_transform(c, shape.joints[j], {theta[j]}), shape.joints[j],
                                           {shape.theta_ref[j]});
          const Vec3 g = r * res;
          const int rx = static_cast<int>(std::floor(g.x()));
          const int ry = static_cast<int>(std::floor(g.y()));
          const int rz = static_cast<int>(std::floor(g.z()));
          if (rx < 0 || ry < 0 || rz < 0 || rx >= res || ry >= res || rz >= res) continue;
          if (shape.labels.labels[out.index(rx, ry, rz)] == part_label(j)) {
            out[i] = 1.0;
            break;
          }
        }
      }
    }
  }
  return out;
}

TriangleMesh pose_shape_mesh(const ArticulatedShape& shape, std::span<const double> theta) {
  check_theta(shape, theta);
  return pose_meshes(shape, reference_meshes(shape), theta);
}

EvalReport evaluate(const ArticulatedShape& predicted, const ArticulatedShape& truth, const EvalOptions& options) {
  if (options.n_states < 2) throw Error(ErrorKind::config, "n_states must be at least 2");
  if (predicted.joints.size() != truth.joints.size()) {
    throw Error(ErrorKind::config, "predicted and true shapes have different joint counts");
  }
  EvalReport report;
  for (std::size_t j = 0; j < truth.joints.size(); ++j) {
    const auto& p = predicted.joints[j];
    const auto& g = truth.joints[j];
    JointMetrics m;
    m.type = g.type;
    m.axis_error = axis_error(p.axis, g.axis);
    if (g.has_pivot()) m.pivot_error = pivot_error(p.axis, p.pivot, g.axis, g.pivot);
    report.joints.push_back(m);
  }

  ShapeMeshes pred_meshes, true_meshes;
  if (options.surface_metrics) {
    pred_meshes = reference_meshes(predicted);
    true_meshes = reference_meshes(truth);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int s = 0; s < options.n_states; ++s) {
    const double f = static_cast<double>(s) / (options.n_states - 1);
    std::vector<double> pred_theta, true_theta;
    for (std::size_t j = 0; j < truth.joints.size(); ++j) {
      pred_theta.push_back(f * predicted.theta_max[j]);
      true_theta.push_back(f * truth.theta_max[j]);
    }
    StateMetrics m;
    m.fraction = f;
    m.iou = iou(pose_shape(predicted, pred_theta), pose_shape(truth, true_theta), options.threshold);
    if (options.surface_metrics) {
      const auto seed = options.seed + static_cast<std::uint64_t>(s);
      const auto pred_points = sample_surface(pose_meshes(predicted, pred_meshes, pred_theta), options.n_points, seed);
      const auto true_points = sample_surface(pose_meshes(truth, true_meshes, true_theta), options.n_points, seed);
      m.chamfer = chamfer(pred_points, true_points);
      m.fscore = fscore(pred_points, true_points, options.tau);
    } else {
      m.chamfer = m.fscore = nan;
    }
    report.states.push_back(m);
  }
  for (const auto& m : report.states) {
    report.mean_chamfer += m.chamfer;
    report.mean_fscore += m.fscore;
    report.mean_iou += m.iou;
  }
  report.mean_chamfer /= options.n_states;
  report.mean_fscore /= options.n_states;
  report.mean_iou /= options.n_states;
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["states"] = nlohmann::json::array();
  for (const auto& s : states) {
    j["states"].push_back({{"fraction", s.fraction}, {"chamfer", s.chamfer}, {"fscore", s.fscore}, {"iou", s.iou}});
  }
  j["joints"] = nlohmann::json::array();
  for (const auto& m : joints) {
    nlohmann::json entry = {{"type", std::string(to_string(m.type))}, {"axis_error", m.axis_error}};
    entry["pivot_error"] = m.pivot_error ? nlohmann::json(*m.pivot_error) : nlohmann::json(nullptr);
    j["joints"].push_back(entry);
  }
  j["mean"] = {{"chamfer", mean_chamfer}, {"fscore", mean_fscore}, {"iou", mean_iou}};
  return j;
}

std::string EvalReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %10s\n", "state", "fraction", "chamfer", "fscore", "iou");
  out += line;
  for (std::size_t s = 0; s < states.size(); ++s) {
    std::snprintf(line, sizeof(line), "%-8zu %10.4f %10.6f %10.6f %10.6f\n", s, states[s].fraction,
                  states[s].chamfer, states[s].fscore, states[s].iou);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-8s %10s %10.6f %10.6f %10.6f\n", "mean", "", mean_chamfer, mean_fscore,
                mean_iou);
  out += line;
  std::snprintf(line, sizeof(line), "\n%-8s %-10s %12s %12s\n", "joint", "type", "axis_error", "pivot_error");
  out += line;
  for (std::size_t j = 0; j < joints.size(); ++j) {
    char pivot[32];
    if (joints[j].pivot_error) {
      std::snprintf(pivot, sizeof(pivot), "%12.6f", *joints[j].pivot_error);
    } else {
      std::snprintf(pivot, sizeof(pivot), "%12s", "-");
    }
    std::snprintf(line, sizeof(line), "%-8zu %-10s %12.6f %s\n", j, std::string(to_string(joints[j].type)).c_str(),
                  joints[j].axis_error, pivot);
    out += line;
  }
  return out;
}

}  // namespace articfit
