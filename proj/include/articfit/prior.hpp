#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "articfit/assembly.hpp"
#include "articfit/voxel_grid.hpp"

namespace articfit {

inline constexpr int kLatentRes = 16;
inline constexpr int kLatentBlock = kGridRes / kLatentRes;  // 4 voxels per latent cell along each axis
inline constexpr std::size_t kLatentCells = std::size_t{kLatentRes} * kLatentRes * kLatentRes;

/// 16^3 x channels latent, channel-fastest then x, y, z.
struct LatentGrid {
  int channels = 1;
  std::vector<double> values = std::vector<double>(kLatentCells, 0.0);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const LatentGrid&) const = default;
};

/// Latent cell owning voxel i of a 64^3 grid.
std::size_t latent_cell_of_voxel(std::size_t voxel);

/// Surrogate codec: 4^3 average pooling.
LatentGrid encode(const VoxelGrid& x);
/// Surrogate codec: nearest-neighbour 4x upsampling clamped to [0,1].
VoxelGrid decode(const LatentGrid& z);

/// Adjoint of encode: every voxel receives its cell's gradient / 64.
VoxelGrid encode_backward(const LatentGrid& upstream);
/// Adjoint of decode at z: block sums of the upstream, zeroed where the clamp
/// is active (z outside [0,1]).
LatentGrid decode_backward(const LatentGrid& z, const VoxelGrid& upstream);

/// Draws a standard-normal latent from `rng_seed`.
LatentGrid sample_noise(std::uint64_t rng_seed);

/// Shape-prior contract: a latent codec and a conditional noise predictor.
class ShapePrior {
 public:
  virtual ~ShapePrior() = default;
  virtual LatentGrid encode(const VoxelGrid& x) const { return articfit::encode(x); }
  virtual VoxelGrid decode(const LatentGrid& z) const { return articfit::decode(z); }
  /// Predicted noise for z_t = (1 - t) z0 + t eps under condition k.
  virtual LatentGrid predict_noise(const LatentGrid& z_t, std::size_t k, double t,
                                   std::uint64_t seed) const = 0;
  virtual std::size_t num_conditions() const = 0;
};

struct OracleOptions {
  /// Add the reference disk to the conditioning targets.
  bool use_disk = true;
  DiskSpec disk;
  /// Emulate a prior that rescales whatever it sees to a canonical frame: the
  /// occupied bounding box (disk included) is mapped so its largest extent,
  /// xy center and floor match those of the reference disk. With the disk
  /// present and the object inside the disk's footprint this is the identity.
  bool unit_cube_normalization = true;
  double noise_std = 0.0;
};

/// Resamples `grid` so its occupied bounding box is mapped onto the frame of
/// the reference disk (nearest-neighbour). Returns the grid unchanged when it
/// is empty.
VoxelGrid normalize_to_reference(const VoxelGrid& grid, const DiskSpec& reference);

/// Same mapping, computed from `frame_source` and applied to `grid`.
VoxelGrid normalize_to_reference(const VoxelGrid& grid, const VoxelGrid& frame_source,
                                 const DiskSpec& reference);

/// Exact denoiser that knows the clean latent for each condition:
/// eps_hat = (z_t - (1 - t) z*_k) / t, optionally plus Gaussian noise.
class OracleDenoiser : public ShapePrior {
 public:
  OracleDenoiser(std::vector<VoxelGrid> targets, OracleOptions options = {});

  LatentGrid predict_noise(const LatentGrid& z_t, std::size_t k, double t,
                           std::uint64_t seed) const override;
  std::size_t num_conditions() const override { return clean_latents_.size(); }

  const OracleOptions& options() const { return options_; }
  /// Conditioning grid for state k as seen by the prior (normalized, disk included).
  const VoxelGrid& conditioning(std::size_t k) const { return conditioning_[k]; }
  /// Conditioning grid with the disk voxels removed (the object alone, in the
  /// prior's frame). Used to initialise geometry.
  VoxelGrid object_target(std::size_t k) const;
  const LatentGrid& clean_latent(std::size_t k) const { return clean_latents_[k]; }

 private:
  OracleOptions options_;
  std::vector<VoxelGrid> targets_;
  std::vector<VoxelGrid> conditioning_;
  std::vector<LatentGrid> clean_latents_;
};

}  // namespace articfit
