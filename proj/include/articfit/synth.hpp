#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "articfit/assembly.hpp"
#include "articfit/joint_init.hpp"
#include "articfit/kinematics.hpp"
#include "articfit/voxel_grid.hpp"

namespace articfit {

enum class ObjectKind { box_lid, cabinet_drawer, laptop, multi_joint };

std::string_view to_string(ObjectKind kind);
ObjectKind object_kind_from_string(std::string_view name);

struct Box {
  Vec3 lo;
  Vec3 hi;
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() < hi.array()).all();
  }
};

/// Union of `add` boxes minus the union of `subtract` boxes (half-open).
struct Solid {
  std::vector<Box> add;
  std::vector<Box> subtract;

  bool contains(const Vec3& p) const;
  /// Center-in-solid voxelization.
  VoxelGrid voxelize(int resolution = kGridRes) const;
  /// Uniform samples on the boundary (area-weighted over box faces, rejecting
  /// face points that are not on the solid's boundary).
  std::vector<Vec3> sample_surface(std::size_t n, std::mt19937_64& rng) const;
  std::vector<Vec3> corners() const;
};

struct SceneSpec {
  ObjectKind kind = ObjectKind::box_lid;
  /// Overrides the kind's default joints (one per part) when set.
  std::optional<std::vector<JointParams>> joints;
  int num_states = 6;
  /// Overrides the kind's default maximum articulation per part when set.
  std::optional<std::vector<double>> theta_max;
  DiskSpec disk;
  std::uint64_t seed = 0;
};

struct GroundTruthScene {
  SceneSpec spec;
  Solid body_solid;
  std::vector<Solid> part_solids;
  VoxelGrid body_rest;
  std::vector<VoxelGrid> parts_rest;
  std::vector<JointParams> joints;
  std::vector<std::vector<double>> thetas;  // thetas[k][j]
  std::vector<VoxelGrid> posed;             // without disk
  std::vector<VoxelGrid> posed_with_disk;
  std::vector<Vec3> body_samples;               // rest frame
  std::vector<std::vector<Vec3>> part_samples;  // rest frame, per part
};

/// Default joints and per-part maximum articulation for a kind.
std::vector<JointParams> default_joints(ObjectKind kind);
std::vector<double> default_theta_max(ObjectKind kind);

/// Builds analytic solids, voxelizes them at rest, poses each part per state and
/// max-merges with the body. Throws OutOfBounds when a posed part leaves the cube.
GroundTruthScene generate(const SceneSpec& spec);

/// Poses a rest-frame indicator grid: each voxel center is mapped back through
/// the inverse transform and reads the rest voxel containing it (0 outside).
VoxelGrid pose_grid(const VoxelGrid& rest, const JointParams& joint, JointState state);

/// Posed merge for state k recomputed from the rest grids.
VoxelGrid compose_posed(const GroundTruthScene& scene, std::size_t k);

/// Surface points of `part` seen in state i, mapped to state j by the true
/// motion, with Gaussian noise on the destination. Each pair is replaced by a
/// static body pair with probability `static_fraction`.
std::vector<PointPair> sample_correspondences(const GroundTruthScene& scene, int state_i, int state_j,
                                              std::size_t n, double noise_std, double static_fraction,
                                              std::uint64_t seed, std::size_t part = 0);

}  // namespace articfit
