#include "articfit/components.hpp"

#include <array>
#include <string>

#include "articfit/error.hpp"

namespace articfit {

std::vector<std::uint8_t> binarize(const VoxelGrid& grid, double threshold) {
  std::vector<std::uint8_t> mask(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = grid[i] >= threshold ? 1 : 0;
  return mask;
}

ComponentLabels label_components(const std::vector<std::uint8_t>& mask, int resolution, int connectivity) {
  if (connectivity != 6 && connectivity != 26) {
    throw Error(ErrorKind::config, "connectivity must be 6 or 26, got " + std::to_string(connectivity));
  }
  const std::size_t r = static_cast<std::size_t>(resolution);
  if (mask.size() != r * r * r) throw Error(ErrorKind::config, "mask size does not match resolution");

  std::vector<std::array<int, 3>> offsets;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0 || (connectivity == 6 && manhattan != 1)) continue;
        offsets.push_back({dx, dy, dz});
      }
    }
  }

  ComponentLabels out;
  out.label.assign(mask.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || out.label[seed]) continue;
    const auto id = static_cast<std::uint32_t>(out.sizes.size() + 1);
    std::size_t count = 0;
    out.label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++count;
      const int x = static_cast<int>(i % r);
      const int y = static_cast<int>((i / r) % r);
      const int z = static_cast<int>(i / (r * r));
      for (const auto& o : offsets) {
        const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
        if (nx < 0 || ny < 0 || nz < 0 || nx >= resolution || ny >= resolution || nz >= resolution) continue;
        const std::size_t n = static_cast<std::size_t>(nx) + r * (static_cast<std::size_t>(ny) + r * static_cast<std::size_t>(nz));
        if (mask[n] && !out.label[n]) {
          out.label[n] = id;
          stack.push_back(n);
        }
      }
    }
    out.sizes.push_back(count);
  }
  return out;
}

}  // namespace articfit
