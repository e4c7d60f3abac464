#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "articfit/kinematics.hpp"

namespace articfit {

inline constexpr int kGridRes = 64;
inline constexpr std::size_t kGridVoxels = std::size_t{kGridRes} * kGridRes * kGridRes;

/// Dense occupancy grid over the unit cube, x-fastest layout.
class VoxelGrid {
 public:
  explicit VoxelGrid(int resolution = kGridRes, double fill = 0.0);

  int resolution() const { return res_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(res_) *
           (static_cast<std::size_t>(y) + static_cast<std::size_t>(res_) * static_cast<std::size_t>(z));
  }
  double& at(int x, int y, int z) { return values_[index(x, y, z)]; }
  double at(int x, int y, int z) const { return values_[index(x, y, z)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  Vec3 center(int x, int y, int z) const {
    const double h = 1.0 / res_;
    return {(x + 0.5) * h, (y + 0.5) * h, (z + 0.5) * h};
  }
  Vec3 center(std::size_t i) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t count_at_least(double threshold) const;
  bool operator==(const VoxelGrid&) const = default;

 private:
  int res_;
  std::vector<double> values_;
};

/// Voxelwise max.
VoxelGrid max_merge(const VoxelGrid& a, const VoxelGrid& b);

/// Intersection-over-union of the sets {v >= threshold}; 1 when both are empty.
double iou(const VoxelGrid& a, const VoxelGrid& b, double threshold = 0.5);

/// Provenance written next to every grid file.
struct GridProvenance {
  std::string kind;                 // e.g. "posed", "body_rest", "labels"
  std::optional<int> state_index;
  std::optional<int> part_id;
};

// "AVOX" magic, u32 resolution, two reserved u32 words, then res^3 little-endian
// float32 values in x-fastest order.
void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid,
                      const GridProvenance& provenance);
VoxelGrid read_voxel_grid(const std::filesystem::path& path);
GridProvenance read_grid_provenance(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& grid_path);

}  // namespace articfit
