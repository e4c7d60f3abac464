#include "articfit/prior.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <random>

#include "articfit/error.hpp"

namespace articfit {

namespace {

constexpr double kClampSlack = 1e-9;

struct BoundingBox {
  std::array<int, 3> lo{kGridRes, kGridRes, kGridRes};
  std::array<int, 3> hi{-1, -1, -1};
  bool empty() const { return hi[0] < lo[0]; }
};

BoundingBox occupied_box(const VoxelGrid& g) {
  BoundingBox b;
  const int r = g.resolution();
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        if (g.at(x, y, z) < 0.5) continue;
        const std::array<int, 3> p{x, y, z};
        for (int a = 0; a < 3; ++a) {
          b.lo[a] = std::min(b.lo[a], p[a]);
          b.hi[a] = std::max(b.hi[a], p[a]);
        }
      }
    }
  }
  return b;
}

}  // namespace

std::size_t latent_cell_of_voxel(std::size_t voxel) {
  const std::size_t r = kGridRes;
  const std::size_t x = voxel % r;
  const std::size_t y = (voxel / r) % r;
  const std::size_t z = voxel / (r * r);
  const std::size_t b = kLatentBlock;
  return x / b + kLatentRes * (y / b + kLatentRes * (z / b));
}

LatentGrid encode(const VoxelGrid& x) {
  LatentGrid z;
  for (std::size_t i = 0; i < kGridVoxels; ++i) z[latent_cell_of_voxel(i)] += x[i];
  constexpr double inv = 1.0 / (kLatentBlock * kLatentBlock * kLatentBlock);
  for (double& v : z.values) v *= inv;
  return z;
}

VoxelGrid decode(const LatentGrid& z) {
  VoxelGrid x;
  for (std::size_t i = 0; i < kGridVoxels; ++i) x[i] = std::clamp(z[latent_cell_of_voxel(i)], 0.0, 1.0);
  return x;
}

VoxelGrid encode_backward(const LatentGrid& upstream) {
  constexpr double inv = 1.0 / (kLatentBlock * kLatentBlock * kLatentBlock);
  VoxelGrid g;
  for (std::size_t i = 0; i < kGridVoxels; ++i) g[i] = upstream[latent_cell_of_voxel(i)] * inv;
  return g;
}

LatentGrid decode_backward(const LatentGrid& z, const VoxelGrid& upstream) {
  LatentGrid g;
  for (std::size_t i = 0; i < kGridVoxels; ++i) g[latent_cell_of_voxel(i)] += upstream[i];
  // The clamp passes gradient on the closed interval; the slack keeps cells
  // that sit on 0 or 1 up to rounding (e.g. empty blocks) on the linear side.
  for (std::size_t c = 0; c < kLatentCells; ++c) {
    if (z[c] < -kClampSlack || z[c] > 1.0 + kClampSlack) g[c] = 0.0;
  }
  return g;
}

LatentGrid sample_noise(std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentGrid eps;
  for (double& v : eps.values) v = normal(rng);
  return eps;
}

VoxelGrid normalize_to_reference(const VoxelGrid& grid, const DiskSpec& reference) {
  return normalize_to_reference(grid, grid, reference);
}

VoxelGrid normalize_to_reference(const VoxelGrid& grid, const VoxelGrid& frame_source,
                                 const DiskSpec& reference) {
  const BoundingBox src = occupied_box(frame_source);
  VoxelGrid ref_disk(grid.resolution());
  ref_disk = add_reference_disk(ref_disk, reference);
  const BoundingBox ref = occupied_box(ref_disk);
  if (src.empty() || ref.empty()) return grid;

  int src_extent = 0;
  for (int a = 0; a < 3; ++a) src_extent = std::max(src_extent, src.hi[a] - src.lo[a] + 1);
  const int ref_extent = std::max(ref.hi[0] - ref.lo[0] + 1, ref.hi[1] - ref.lo[1] + 1);
  const double s = static_cast<double>(ref_extent) / src_extent;
  const double src_cx = 0.5 * (src.lo[0] + src.hi[0] + 1);
  const double src_cy = 0.5 * (src.lo[1] + src.hi[1] + 1);
  const double ref_cx = 0.5 * (ref.lo[0] + ref.hi[0] + 1);
  const double ref_cy = 0.5 * (ref.lo[1] + ref.hi[1] + 1);

  const int r = grid.resolution();
  VoxelGrid out(r);
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        const double px = (x + 0.5 - ref_cx) / s + src_cx;
        const double py = (y + 0.5 - ref_cy) / s + src_cy;
        const double pz = (z + 0.5 - ref.lo[2]) / s + src.lo[2];
        const int ix = static_cast<int>(std::floor(px));
        const int iy = static_cast<int>(std::floor(py));
        const int iz = static_cast<int>(std::floor(pz));
        if (ix < 0 || iy < 0 || iz < 0 || ix >= r || iy >= r || iz >= r) continue;
        out.at(x, y, z) = grid.at(ix, iy, iz);
      }
    }
  }
  return out;
}

OracleDenoiser::OracleDenoiser(std::vector<VoxelGrid> targets, OracleOptions options)
    : options_(options), targets_(std::move(targets)) {
  if (targets_.empty()) throw Error(ErrorKind::config, "oracle prior needs at least one conditioning grid");
  if (!(options_.noise_std >= 0.0) || !std::isfinite(options_.noise_std)) {
    throw Error(ErrorKind::config, "noise_std must be a finite non-negative number");
  }
  for (const VoxelGrid& t : targets_) {
    if (t.resolution() != kGridRes) throw Error(ErrorKind::config, "conditioning grids must be 64^3");
    VoxelGrid c = options_.use_disk ? add_reference_disk(t, options_.disk) : t;
    if (options_.unit_cube_normalization) c = normalize_to_reference(c, options_.disk);
    clean_latents_.push_back(articfit::encode(c));
    conditioning_.push_back(std::move(c));
  }
}

VoxelGrid OracleDenoiser::object_target(std::size_t k) const {
  const VoxelGrid& t = targets_.at(k);
  if (!options_.unit_cube_normalization) return t;
  const VoxelGrid frame = options_.use_disk ? add_reference_disk(t, options_.disk) : t;
  return normalize_to_reference(t, frame, options_.disk);
}

LatentGrid OracleDenoiser::predict_noise(const LatentGrid& z_t, std::size_t k, double t,
                                         std::uint64_t seed) const {
  if (!(t >= 1e-6)) throw Error(ErrorKind::degenerate_time, "t must be at least 1e-6");
  if (!(t < 1.0)) throw Error(ErrorKind::degenerate_time, "t must be below 1");
  const LatentGrid& z0 = clean_latents_.at(k);
  LatentGrid eps_hat;
  eps_hat.channels = z_t.channels;
  eps_hat.values.resize(z_t.size());
  for (std::size_t c = 0; c < z_t.size(); ++c) eps_hat[c] = (z_t[c] - (1.0 - t) * z0[c]) / t;
  if (options_.noise_std > 0.0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(std::bit_cast<std::uint64_t>(t)),
                      static_cast<std::uint32_t>(std::bit_cast<std::uint64_t>(t) >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, options_.noise_std);
    for (double& v : eps_hat.values) v += normal(rng);
  }
  return eps_hat;
}

}  // namespace articfit
