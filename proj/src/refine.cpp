#include "articfit/refine.hpp"

#include <cmath>
#include <random>
#include <string>

#include "articfit/components.hpp"
#include "articfit/error.hpp"
#include "articfit/hash_field.hpp"

namespace articfit {

void CleanConfig::validate() const {
  if (!(inject_noise_std > 0.0 && inject_noise_std < 1.0)) {
    throw Error(ErrorKind::config, "inject_noise_std must lie in (0, 1), got " + std::to_string(inject_noise_std));
  }
  if (carpet_slab_voxels <= 0) throw Error(ErrorKind::config, "carpet_slab_voxels must be positive");
  if (min_component_size <= 0) throw Error(ErrorKind::config, "min_component_size must be positive");
  if (connectivity != 6 && connectivity != 26) throw Error(ErrorKind::config, "connectivity must be 6 or 26");
  if (!(occupancy_threshold > 0.0 && occupancy_threshold < 1.0)) {
    throw Error(ErrorKind::config, "occupancy_threshold must lie in (0, 1)");
  }
  if (!(carpet_min_footprint > 0.0 && carpet_min_footprint <= 1.0)) {
    throw Error(ErrorKind::config, "carpet_min_footprint must lie in (0, 1]");
  }
}

std::size_t PartLabelGrid::count(std::uint8_t label) const {
  std::size_t n = 0;
  for (auto l : labels) n += l == label;
  return n;
}

VoxelGrid PartLabelGrid::to_grid() const {
  VoxelGrid grid(resolution);
  for (std::size_t i = 0; i < labels.size(); ++i) grid[i] = labels[i];
  return grid;
}

PartLabelGrid PartLabelGrid::from_grid(const VoxelGrid& grid, std::size_t num_parts) {
  PartLabelGrid out;
  out.resolution = grid.resolution();
  out.num_parts = num_parts;
  out.labels.assign(grid.size(), kLabelEmpty);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = grid[i];
    if (v < 0.0 || v > static_cast<double>(part_label(num_parts - 1)) || v != std::floor(v)) {
      throw Error(ErrorKind::config, "label grid holds a value outside the label range");
    }
    out.labels[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

VoxelGrid denoise_grid(const VoxelGrid& x_max, const ShapePrior& prior, std::size_t k_max,
                       const CleanConfig& config) {
  config.validate();
  const double t = config.t_clean();
  std::mt19937_64 rng(config.seed);
  const LatentGrid eps = sample_noise(rng());
  const std::uint64_t noise_seed = rng();

  const LatentGrid z = prior.encode(x_max);
  LatentGrid z_t = z;
  for (std::size_t i = 0; i < z.size(); ++i) z_t[i] = (1.0 - t) * z[i] + t * eps[i];
  const LatentGrid eps_hat = prior.predict_noise(z_t, k_max, t, noise_seed);
  LatentGrid z0 = z_t;
  for (std::size_t i = 0; i < z.size(); ++i) z0[i] = (z_t[i] - t * eps_hat[i]) / (1.0 - t);
  return prior.decode(z0);
}

VoxelGrid remove_carpet(const VoxelGrid& grid, const CleanConfig& config) {
  config.validate();
  const int res = grid.resolution();
  const auto mask = binarize(grid, config.occupancy_threshold);
  const std::size_t layer = static_cast<std::size_t>(res) * res;

  int lowest = -1;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      lowest = static_cast<int>(i / layer);
      break;
    }
  }
  if (lowest < 0) return grid;

  const int slab_top = lowest + config.carpet_slab_voxels;
  std::vector<std::uint8_t> slab(mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) slab[i] = mask[i] && static_cast<int>(i / layer) < slab_top;
  const ComponentLabels components = label_components(slab, res, config.connectivity);

  // Footprint of every component that reaches the lowest layer.
  std::vector<std::vector<std::uint8_t>> footprint(components.sizes.size());
  std::vector<std::size_t> footprint_size(components.sizes.size(), 0);
  std::vector<bool> grounded(components.sizes.size(), false);
  for (std::size_t i = 0; i < slab.size(); ++i) {
    const auto id = components.label[i];
    if (!id) continue;
    if (static_cast<int>(i / layer) == lowest) grounded[id - 1] = true;
  }
  for (std::size_t i = 0; i < slab.size(); ++i) {
    const auto id = components.label[i];
    if (!id || !grounded[id - 1]) continue;
    auto& seen = footprint[id - 1];
    if (seen.empty()) seen.assign(layer, 0);
    if (!seen[i % layer]) {
      seen[i % layer] = 1;
      ++footprint_size[id - 1];
    }
  }

  const double min_footprint = config.carpet_min_footprint * static_cast<double>(layer);
  VoxelGrid out = grid;
  for (std::size_t i = 0; i < slab.size(); ++i) {
    const auto id = components.label[i];
    if (id && grounded[id - 1] && static_cast<double>(footprint_size[id - 1]) >= min_footprint) out[i] = 0.0;
  }
  return out;
}

VoxelGrid filter_outliers(const VoxelGrid& grid, const CleanConfig& config) {
  config.validate();
  const auto mask = binarize(grid, config.occupancy_threshold);
  const ComponentLabels components = label_components(mask, grid.resolution(), config.connectivity);
  VoxelGrid out = grid;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto id = components.label[i];
    if (id && components.sizes[id - 1] < static_cast<std::size_t>(config.min_component_size)) out[i] = 0.0;
  }
  return out;
}

PartLabelGrid assign_parts(const ArticulatedModel& model, const VoxelGrid& clean, std::size_t k_max,
                           double threshold) {
  if (k_max >= model.num_states()) throw Error(ErrorKind::config, "k_max out of range");
  const VoxelGrid body = rasterize(model.body);
  std::vector<VoxelGrid> parts;
  for (std::size_t j = 0; j < model.parts.size(); ++j) {
    parts.push_back(rasterize(model.parts[j].field, model.parts[j].joint, model.state(k_max, j)));
  }
  PartLabelGrid out;
  out.resolution = clean.resolution();
  out.num_parts = model.parts.size();
  out.labels.assign(clean.size(), kLabelEmpty);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] < threshold) continue;
    double best = body[i];
    std::uint8_t label = kLabelBody;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      if (parts[j][i] > best + 1e-12) {
        best = parts[j][i];
        label = part_label(j);
      }
    }
    out.labels[i] = label;
  }
  return out;
}

TriangleMesh extract_mesh(const PartLabelGrid& labels, const VoxelGrid& clean, std::uint8_t label) {
  VoxelGrid masked(clean.resolution());
  bool any = false;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (labels.labels[i] == label) {
      masked[i] = clean[i];
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::empty_part, "no voxels carry label " + std::to_string(label));
  return marching_cubes(masked, 0.5);
}

std::size_t largest_state(const ArticulatedModel& model) {
  std::size_t best = 0;
  double best_sum = -1.0;
  for (std::size_t k = 0; k < model.num_states(); ++k) {
    double sum = 0.0;
    for (double theta : model.states[k]) sum += std::abs(theta);
    if (sum > best_sum) {
      best_sum = sum;
      best = k;
    }
  }
  return best;
}

RefineResult refine(const ArticulatedModel& model, const ShapePrior& prior, const CleanConfig& config,
                    const std::optional<DiskSpec>& disk) {
  config.validate();
  RefineResult out;
  out.k_max = largest_state(model);
  out.x_max = build_posed_grid(model, out.k_max).grid;
  if (disk) out.x_max = add_reference_disk(out.x_max, *disk);
  out.denoised = denoise_grid(out.x_max, prior, out.k_max, config);
  out.carpet_removed = remove_carpet(out.denoised, config);
  out.cleaned = filter_outliers(out.carpet_removed, config);
  out.labels = assign_parts(model, out.cleaned, out.k_max, config.occupancy_threshold);
  out.body_mesh = extract_mesh(out.labels, out.cleaned, kLabelBody);
  for (std::size_t j = 0; j < model.parts.size(); ++j) {
    out.part_meshes.push_back(extract_mesh(out.labels, out.cleaned, part_label(j)));
  }
  return out;
}

}  // namespace articfit
