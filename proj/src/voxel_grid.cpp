#include "articfit/voxel_grid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "articfit/error.hpp"

namespace articfit {

namespace {

constexpr std::array<char, 4> kMagic{'A', 'V', 'O', 'X'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace

VoxelGrid::VoxelGrid(int resolution, double fill)
    : res_(resolution),
      values_(static_cast<std::size_t>(resolution) * resolution * resolution, fill) {
  if (resolution <= 0) throw Error(ErrorKind::config, "voxel grid resolution must be positive");
}

Vec3 VoxelGrid::center(std::size_t i) const {
  const auto r = static_cast<std::size_t>(res_);
  return center(static_cast<int>(i % r), static_cast<int>((i / r) % r), static_cast<int>(i / (r * r)));
}

std::size_t VoxelGrid::count_at_least(double threshold) const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [&](double v) { return v >= threshold; }));
}

VoxelGrid max_merge(const VoxelGrid& a, const VoxelGrid& b) {
  VoxelGrid out(a.resolution());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::max(a[i], b[i]);
  return out;
}

double iou(const VoxelGrid& a, const VoxelGrid& b, double threshold) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ia = a[i] >= threshold;
    const bool ib = b[i] >= threshold;
    inter += (ia && ib) ? 1 : 0;
    uni += (ia || ib) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::filesystem::path sidecar_path(const std::filesystem::path& grid_path) {
  auto p = grid_path;
  p += ".json";
  return p;
}

void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid,
                      const GridProvenance& provenance) {
  std::vector<unsigned char> bytes;
  bytes.reserve(kHeaderBytes + grid.size() * 4);
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  put_u32(bytes, static_cast<std::uint32_t>(grid.resolution()));
  put_u32(bytes, 0);
  put_u32(bytes, 0);
  for (double v : grid.values()) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to '" + path.string() + "'");

  nlohmann::ordered_json meta;
  meta["format"] = "AVOX";
  meta["resolution"] = grid.resolution();
  meta["kind"] = provenance.kind;
  meta["state_index"] = provenance.state_index ? nlohmann::ordered_json(*provenance.state_index)
                                               : nlohmann::ordered_json(nullptr);
  meta["part_id"] = provenance.part_id ? nlohmann::ordered_json(*provenance.part_id)
                                       : nlohmann::ordered_json(nullptr);
  std::ofstream side(sidecar_path(path));
  if (!side) throw Error(ErrorKind::io, "cannot write sidecar for '" + path.string() + "'");
  side << meta.dump(2) << "\n";
}

VoxelGrid read_voxel_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::io, "'" + path.string() + "' is not an AVOX grid");
  }
  const auto res = static_cast<int>(get_u32(bytes.data() + 4));
  VoxelGrid grid(res);
  if (bytes.size() != kHeaderBytes + grid.size() * 4) {
    throw Error(ErrorKind::io, "'" + path.string() + "' has a truncated payload");
  }
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < grid.size(); ++i, p += 4) {
    grid[i] = static_cast<double>(std::bit_cast<float>(get_u32(p)));
  }
  return grid;
}

GridProvenance read_grid_provenance(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw Error(ErrorKind::io, "missing sidecar for '" + path.string() + "'");
  const auto meta = nlohmann::json::parse(in, nullptr, false);
  if (meta.is_discarded()) throw Error(ErrorKind::io, "malformed sidecar for '" + path.string() + "'");
  GridProvenance prov;
  prov.kind = meta.value("kind", "");
  if (meta.contains("state_index") && !meta["state_index"].is_null()) prov.state_index = meta["state_index"].get<int>();
  if (meta.contains("part_id") && !meta["part_id"].is_null()) prov.part_id = meta["part_id"].get<int>();
  return prov;
}

}  // namespace articfit
