#include "articfit/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "articfit/error.hpp"

namespace articfit {

namespace {

constexpr double kTieTolerance = 1e-12;

// inverse_transform with the trigonometry hoisted out of the voxel loop. The
// linear map M = cos I - sin [a]x + (1 - cos) a a^T is the same expression
// inverse_transform evaluates, so `a` may be any 3-vector.
struct InverseMap {
  JointType type;
  Vec3 axis;
  Vec3 pivot;
  double theta;
  double cs = 1.0;
  double sn = 0.0;
  Mat3 m = Mat3::Identity();

  InverseMap(const JointParams& joint, double th)
      : type(joint.type), axis(joint.axis), pivot(joint.pivot), theta(th) {
    if (type == JointType::revolute) {
      cs = std::cos(theta);
      sn = std::sin(theta);
      Mat3 k;
      k << 0.0, -axis.z(), axis.y(), axis.z(), 0.0, -axis.x(), -axis.y(), axis.x(), 0.0;
      m = cs * Mat3::Identity() - sn * k + (1.0 - cs) * (axis * axis.transpose());
    }
  }

  Vec3 apply(const Vec3& c) const {
    if (type == JointType::prismatic) return c - theta * axis;
    return m * (c - pivot) + pivot;
  }

  // Chain d_canon (gradient wrt the canonical point) into joint parameters.
  void backward(const Vec3& c, const Vec3& d_canon, Vec3& g_axis, Vec3& g_pivot, double* g_theta) const {
    if (type == JointType::prismatic) {
      g_axis -= theta * d_canon;
      if (g_theta) *g_theta -= axis.dot(d_canon);
      return;
    }
    const Vec3 q = c - pivot;
    const double aq = axis.dot(q);
    // d_axis^T g with d_axis = sin [q]x + (1 - cos)((a.q) I + a q^T)
    g_axis += sn * (-q.cross(d_canon)) + (1.0 - cs) * (aq * d_canon + q * axis.dot(d_canon));
    g_pivot += d_canon - m.transpose() * d_canon;
    if (g_theta) {
      const Vec3 d_theta = -q * sn - axis.cross(q) * cs + axis * (aq * sn);
      *g_theta += d_theta.dot(d_canon);
    }
  }
};

std::vector<InverseMap> inverse_maps(const ArticulatedModel& model, std::size_t k) {
  std::vector<InverseMap> maps;
  for (std::size_t j = 0; j < model.parts.size(); ++j) maps.emplace_back(model.parts[j].joint, model.states[k][j]);
  return maps;
}

}  // namespace

void ArticulatedModel::validate() const {
  if (parts.empty()) throw Error(ErrorKind::config, "articulated model needs at least one part");
  if (states.empty()) throw Error(ErrorKind::config, "articulated model needs at least one observation state");
  for (const auto& s : states) {
    if (s.size() != parts.size()) {
      throw Error(ErrorKind::config, "every observation needs one state per part (" +
                                         std::to_string(parts.size()) + ")");
    }
  }
}

PosedGrid build_posed_grid(const ArticulatedModel& model, std::size_t k) {
  PosedGrid out{VoxelGrid(), std::vector<std::int8_t>(kGridVoxels, kBodyBranch)};
  const std::size_t np = model.parts.size();
  const std::vector<InverseMap> maps = inverse_maps(model, k);
  for (std::size_t i = 0; i < kGridVoxels; ++i) {
    const Vec3 c = out.grid.center(i);
    double best = model.body.query(c);
    std::int8_t branch = kBodyBranch;
    for (std::size_t j = 0; j < np; ++j) {
      const double v = model.parts[j].field.query(maps[j].apply(c));
      if (v > best + kTieTolerance) {
        best = v;
        branch = static_cast<std::int8_t>(j);
      }
    }
    out.grid[i] = best;
    out.branch[i] = branch;
  }
  return out;
}

ModelGradient make_gradient(const ArticulatedModel& model) {
  ModelGradient g;
  g.body = model.body.make_gradient();
  for (const Part& p : model.parts) g.parts.push_back(p.field.make_gradient());
  g.axis.assign(model.parts.size(), Vec3::Zero());
  g.pivot.assign(model.parts.size(), Vec3::Zero());
  g.states.assign(model.states.size(), std::vector<double>(model.parts.size(), 0.0));
  return g;
}

void ModelGradient::zero() {
  body.zero();
  for (auto& p : parts) p.zero();
  for (auto& a : axis) a.setZero();
  for (auto& p : pivot) p.setZero();
  for (auto& s : states) std::fill(s.begin(), s.end(), 0.0);
}

bool ModelGradient::all_zero() const {
  if (!body.all_zero()) return false;
  for (const auto& p : parts) {
    if (!p.all_zero()) return false;
  }
  for (std::size_t j = 0; j < axis.size(); ++j) {
    if (!axis[j].isZero(0.0) || !pivot[j].isZero(0.0)) return false;
  }
  for (const auto& s : states) {
    for (double v : s) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

namespace {

void add_into(FieldGradient& a, const FieldGradient& b, double scale = 1.0) {
  for (std::size_t i = 0; i < a.tables.size(); ++i) a.tables[i] += scale * b.tables[i];
  for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += scale * b.weights[i];
  a.bias += scale * b.bias;
}

void scale_field(FieldGradient& a, double s) {
  for (double& v : a.tables) v *= s;
  for (double& v : a.weights) v *= s;
  a.bias *= s;
}

}  // namespace

ModelGradient& ModelGradient::operator+=(const ModelGradient& other) {
  add_into(body, other.body);
  for (std::size_t j = 0; j < parts.size(); ++j) {
    add_into(parts[j], other.parts[j]);
    axis[j] += other.axis[j];
    pivot[j] += other.pivot[j];
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (std::size_t j = 0; j < states[k].size(); ++j) states[k][j] += other.states[k][j];
  }
  return *this;
}

ModelGradient& ModelGradient::operator*=(double s) {
  scale_field(body, s);
  for (std::size_t j = 0; j < parts.size(); ++j) {
    scale_field(parts[j], s);
    axis[j] *= s;
    pivot[j] *= s;
  }
  for (auto& row : states) {
    for (double& v : row) v *= s;
  }
  return *this;
}

void build_posed_grid_backward(const ArticulatedModel& model, std::size_t k, const PosedGrid& posed,
                               std::span<const double> upstream, ModelGradient& grad) {
  const std::vector<InverseMap> maps = inverse_maps(model, k);
  for (std::size_t i = 0; i < kGridVoxels; ++i) {
    const double up = upstream[i];
    if (up == 0.0) continue;
    const Vec3 c = posed.grid.center(i);
    const std::int8_t branch = posed.branch[i];
    if (branch == kBodyBranch) {
      model.body.accumulate_backward(c, up, grad.body, posed.grid[i]);
      continue;
    }
    const auto j = static_cast<std::size_t>(branch);
    const Vec3 canon = maps[j].apply(c);
    const Vec3 d_canon = model.parts[j].field.accumulate_backward(canon, up, grad.parts[j], posed.grid[i]);
    if (d_canon.isZero(0.0)) continue;
    maps[j].backward(c, d_canon, grad.axis[j], grad.pivot[j], model.states_known ? nullptr : &grad.states[k][j]);
  }
}

std::vector<std::uint8_t> disk_mask(const DiskSpec& spec, int resolution) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(resolution) * resolution * resolution, 0);
  if (spec.radius <= 0.0 || spec.thickness_voxels <= 0) return mask;
  const double h = 1.0 / resolution;
  const int z_end = std::min(resolution, spec.z_base + spec.thickness_voxels);
  for (int z = std::max(0, spec.z_base); z < z_end; ++z) {
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        const double dx = (x + 0.5) * h - spec.center_xy.x();
        const double dy = (y + 0.5) * h - spec.center_xy.y();
        if (dx * dx + dy * dy <= spec.radius * spec.radius) {
          mask[static_cast<std::size_t>(x) + static_cast<std::size_t>(resolution) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(resolution) * static_cast<std::size_t>(z))] = 1;
        }
      }
    }
  }
  return mask;
}

VoxelGrid add_reference_disk(const VoxelGrid& grid, const DiskSpec& spec) {
  VoxelGrid out = grid;
  const auto mask = disk_mask(spec, grid.resolution());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) out[i] = 1.0;
  }
  return out;
}

}  // namespace articfit
