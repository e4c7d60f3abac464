#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "articfit/voxel_grid.hpp"

namespace articfit {

struct ComponentLabels {
  /// 0 = background, otherwise 1-based component id in scan order.
  std::vector<std::uint32_t> label;
  /// sizes[id - 1] = voxel count of component id.
  std::vector<std::size_t> sizes;
};

/// Connected components of `mask` (non-zero = foreground) on a res^3 lattice,
/// 6- or 26-connectivity. Ids follow the x-fastest scan order of each
/// component's first voxel, so the labeling is deterministic.
ComponentLabels label_components(const std::vector<std::uint8_t>& mask, int resolution, int connectivity);

/// Foreground mask {v >= threshold}.
std::vector<std::uint8_t> binarize(const VoxelGrid& grid, double threshold);

}  // namespace articfit
