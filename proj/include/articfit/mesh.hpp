#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "articfit/kinematics.hpp"
#include "articfit/voxel_grid.hpp"

namespace articfit {

/// Indexed triangle mesh; faces are counter-clockwise seen from outside.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
  double area() const;
  /// Signed enclosed volume (positive for outward-facing closed meshes).
  double signed_volume() const;
  /// Appends `other`, re-indexing its faces.
  void append(const TriangleMesh& other);
};

/// Marching cubes over voxel-center samples of `grid`, padded with a ring of
/// zeros so surfaces touching the boundary close. Ambiguous faces separate the
/// inside corners, which keeps neighbouring cells consistent; the result is
/// watertight with vertices shared across cells.
TriangleMesh marching_cubes(const VoxelGrid& grid, double iso = 0.5);

/// Area-weighted uniform surface samples.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

std::string to_obj(const TriangleMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace articfit
