#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "articfit/hash_field.hpp"
#include "articfit/kinematics.hpp"
#include "articfit/voxel_grid.hpp"

namespace articfit {

/// Reference slab ("carpet") placed under the object in voxel space.
struct DiskSpec {
  Eigen::Vector2d center_xy{0.5, 0.5};
  double radius = 0.48;
  int thickness_voxels = 3;
  int z_base = 0;
};

struct Part {
  OccupancyField field;
  JointParams joint;
};

/// Static body plus one single-DOF part per joint, with per-observation states.
struct ArticulatedModel {
  OccupancyField body;
  std::vector<Part> parts;
  std::vector<std::vector<double>> states;  // states[k][j] = theta of part j in observation k
  bool states_known = true;

  std::size_t num_states() const { return states.size(); }
  JointState state(std::size_t k, std::size_t j) const { return {states[k][j]}; }
  void validate() const;
};

/// Branch value stored per voxel of a posed grid.
inline constexpr std::int8_t kBodyBranch = -1;

struct PosedGrid {
  VoxelGrid grid;
  std::vector<std::int8_t> branch;  // kBodyBranch or part index
};

/// x(c) = max(body(c), max_j part_j(T_j^-1(c))) at every voxel center. Ties
/// within 1e-12 go to the body (and to the lower part index among parts).
PosedGrid build_posed_grid(const ArticulatedModel& model, std::size_t k);

struct ModelGradient {
  FieldGradient body;
  std::vector<FieldGradient> parts;
  std::vector<Vec3> axis;   // raw (unprojected) d/d axis
  std::vector<Vec3> pivot;  // zero for prismatic parts
  std::vector<std::vector<double>> states;

  void zero();
  bool all_zero() const;
  ModelGradient& operator+=(const ModelGradient& other);
  ModelGradient& operator*=(double s);
};

ModelGradient make_gradient(const ArticulatedModel& model);

/// Accumulates subgradients of sum_v upstream[v] * x[v] into `grad`. Each voxel
/// routes only to its recorded argmax branch. State gradients are produced
/// only when model.states_known is false.
void build_posed_grid_backward(const ArticulatedModel& model, std::size_t k, const PosedGrid& posed,
                               std::span<const double> upstream, ModelGradient& grad);

/// 1 for voxels covered by the disk cylinder, else 0.
std::vector<std::uint8_t> disk_mask(const DiskSpec& spec, int resolution = kGridRes);

/// Sets the disk's voxels to 1.0; everything else is unchanged.
VoxelGrid add_reference_disk(const VoxelGrid& grid, const DiskSpec& spec);

}  // namespace articfit
