#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "articfit/assembly.hpp"
#include "articfit/mesh.hpp"
#include "articfit/prior.hpp"
#include "articfit/voxel_grid.hpp"

namespace articfit {

struct CleanConfig {
  /// Noise level of the single denoising pass, used directly as the flow time
  /// t_clean of z_t = (1 - t) z + t eps. Must lie in (0, 1).
  double inject_noise_std = 0.5;
  int carpet_slab_voxels = 4;
  int min_component_size = 20;
  int connectivity = 26;
  double occupancy_threshold = 0.5;
  /// A bottom-slab component counts as the carpet only if its xy footprint
  /// covers at least this fraction of the grid's cross-section.
  double carpet_min_footprint = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
  double t_clean() const { return inject_noise_std; }
};

inline constexpr std::uint8_t kLabelEmpty = 0;
inline constexpr std::uint8_t kLabelBody = 1;
/// Label of part j.
inline constexpr std::uint8_t part_label(std::size_t j) { return static_cast<std::uint8_t>(2 + j); }

struct PartLabelGrid {
  int resolution = kGridRes;
  std::size_t num_parts = 0;
  std::vector<std::uint8_t> labels = std::vector<std::uint8_t>(kGridVoxels, kLabelEmpty);

  std::size_t count(std::uint8_t label) const;
  /// Labels stored as voxel values (for the grid file format).
  VoxelGrid to_grid() const;
  static PartLabelGrid from_grid(const VoxelGrid& grid, std::size_t num_parts);
  bool operator==(const PartLabelGrid&) const = default;
};

/// One noisy forward pass of the prior at t_clean: x~ = clamp(decode(z0_hat)).
VoxelGrid denoise_grid(const VoxelGrid& x_max, const ShapePrior& prior, std::size_t k_max,
                       const CleanConfig& config);

/// Zeroes the carpet: the component of the bottom slab (z below the lowest
/// occupied layer + carpet_slab_voxels) that touches the lowest layer and
/// spans a carpet-sized footprint. Voxels above the slab are never touched.
VoxelGrid remove_carpet(const VoxelGrid& grid, const CleanConfig& config);

/// Drops occupied components smaller than min_component_size; surviving voxels
/// keep their original values.
VoxelGrid filter_outliers(const VoxelGrid& grid, const CleanConfig& config);

/// Labels every cell with occupancy >= threshold by the larger of the body
/// and each posed part field at state k_max; ties within 1e-12 go to the body.
PartLabelGrid assign_parts(const ArticulatedModel& model, const VoxelGrid& clean, std::size_t k_max,
                           double threshold = 0.5);

/// Marching cubes of `clean` masked to `label`. Throws EmptyPart.
TriangleMesh extract_mesh(const PartLabelGrid& labels, const VoxelGrid& clean, std::uint8_t label);

/// Observation whose states are furthest from rest (sum of |theta| over parts).
std::size_t largest_state(const ArticulatedModel& model);

struct RefineResult {
  std::size_t k_max = 0;
  VoxelGrid x_max;
  VoxelGrid denoised;
  VoxelGrid carpet_removed;
  VoxelGrid cleaned;
  PartLabelGrid labels;
  TriangleMesh body_mesh;
  std::vector<TriangleMesh> part_meshes;
};

/// denoise -> remove_carpet -> filter_outliers -> assign_parts -> extract_mesh.
/// When `disk` is set it is added to x_max, matching what the prior was shown.
RefineResult refine(const ArticulatedModel& model, const ShapePrior& prior, const CleanConfig& config,
                    const std::optional<DiskSpec>& disk);

}  // namespace articfit
