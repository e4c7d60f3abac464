#include "articfit/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>

#include <Eigen/Geometry>

#include "articfit/error.hpp"

namespace articfit {

namespace {

// Corner i of a cell sits at offset (i & 1, (i >> 1) & 1, (i >> 2) & 1).
struct CellEdge {
  int a;     // lower corner
  int b;     // upper corner
  int axis;
};

struct CaseTable {
  std::array<CellEdge, 12> edges{};
  std::array<std::array<int, 8>, 8> edge_of{};  // corner pair -> edge id, -1 if none
  // loops[config] = polygons as edge-id sequences, wound outward.
  std::array<std::vector<std::vector<int>>, 256> loops;

  CaseTable() {
    for (auto& row : edge_of) row.fill(-1);
    int id = 0;
    for (int axis = 0; axis < 3; ++axis) {
      for (int c = 0; c < 8; ++c) {
        if (c & (1 << axis)) continue;
        const int d = c | (1 << axis);
        edges[id] = {c, d, axis};
        edge_of[c][d] = edge_of[d][c] = id;
        ++id;
      }
    }
    for (int config = 0; config < 256; ++config) build(config);
  }

  void build(int config) {
    auto inside = [config](int corner) { return (config >> corner) & 1; };
    // Boundary of the inside region on each face, counter-clockwise about the
    // outward face normal: one segment from each inside run's exit edge back
    // to its entry edge. Runs are maximal, so diagonal corners stay separate.
    std::array<int, 12> next;
    next.fill(-1);
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3;
      const int v = (axis + 2) % 3;
      for (int side = 0; side < 2; ++side) {
        std::array<int, 4> ring{};
        const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        for (int q = 0; q < 4; ++q) {
          ring[q] = (side << axis) | (uv[q][0] << u) | (uv[q][1] << v);
        }
        if (side == 0) std::reverse(ring.begin(), ring.end());
        for (int q = 0; q < 4; ++q) {
          const int prev = ring[(q + 3) % 4];
          if (!inside(ring[q]) || inside(prev)) continue;
          const int entry = edge_of[prev][ring[q]];
          int m = q;
          while (inside(ring[(m + 1) % 4])) m = (m + 1) % 4;
          const int exit = edge_of[ring[m]][ring[(m + 1) % 4]];
          next[exit] = entry;
        }
      }
    }
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      for (int e = start; !used[e]; e = next[e]) {
        used[e] = true;
        loop.push_back(e);
      }
      // The face boundaries circle the inside region; the isosurface closing
      // that region is wound the opposite way to face outward.
      std::reverse(loop.begin(), loop.end());
      loops[config].push_back(std::move(loop));
    }
  }
};

const CaseTable& case_table() {
  static const CaseTable table;
  return table;
}

}  // namespace

double TriangleMesh::area() const {
  double total = 0.0;
  for (const auto& f : faces) {
    total += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }
  return total;
}

double TriangleMesh::signed_volume() const {
  double total = 0.0;
  for (const auto& f : faces) {
    total += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]])) / 6.0;
  }
  return total;
}

void TriangleMesh::append(const TriangleMesh& other) {
  const int offset = static_cast<int>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.faces) faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
}

TriangleMesh marching_cubes(const VoxelGrid& grid, double iso) {
  const CaseTable& table = case_table();
  const int res = grid.resolution();
  // Sample s along an axis is voxel s - 1; samples 0 and res + 1 are padding.
  const int n = res + 2;
  const double h = 1.0 / res;
  auto sample = [&](int sx, int sy, int sz) {
    const int x = sx - 1, y = sy - 1, z = sz - 1;
    if (x < 0 || y < 0 || z < 0 || x >= res || y >= res || z >= res) return 0.0;
    return grid.at(x, y, z);
  };

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of_edge;
  std::array<double, 8> value{};
  std::array<int, 12> vertex_id{};
  for (int z = 0; z + 1 < n; ++z) {
    for (int y = 0; y + 1 < n; ++y) {
      for (int x = 0; x + 1 < n; ++x) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          value[c] = sample(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1));
          if (value[c] >= iso) config |= 1 << c;
        }
        if (config == 0 || config == 255) continue;
        vertex_id.fill(-1);
        for (const auto& loop : table.loops[config]) {
          for (int e : loop) {
            if (vertex_id[e] >= 0) continue;
            const CellEdge& edge = table.edges[e];
            const int ax = x + (edge.a & 1), ay = y + ((edge.a >> 1) & 1), az = z + ((edge.a >> 2) & 1);
            const std::uint64_t key =
                (static_cast<std::uint64_t>(ax) + static_cast<std::uint64_t>(n) *
                 (static_cast<std::uint64_t>(ay) + static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(az))) * 3 +
                static_cast<std::uint64_t>(edge.axis);
            auto [it, inserted] = vertex_of_edge.try_emplace(key, static_cast<int>(mesh.vertices.size()));
            if (inserted) {
              const double v0 = value[edge.a];
              const double v1 = value[edge.b];
              const double s = (iso - v0) / (v1 - v0);
              Vec3 p{(ax - 0.5) * h, (ay - 0.5) * h, (az - 0.5) * h};
              p[edge.axis] += s * h;
              mesh.vertices.push_back(p);
            }
            vertex_id[e] = it->second;
          }
          for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
            mesh.faces.push_back({vertex_id[loop[0]], vertex_id[loop[i]], vertex_id[loop[i + 1]]});
          }
        }
      }
    }
  }
  return mesh;
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.faces.empty()) throw Error(ErrorKind::empty_input, "cannot sample an empty mesh");
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    total += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw Error(ErrorKind::empty_input, "mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    double r1 = unit(rng);
    double r2 = unit(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const Vec3& a = mesh.vertices[f[0]];
    points.push_back(a + r1 * (mesh.vertices[f[1]] - a) + r2 * (mesh.vertices[f[2]] - a));
  }
  return points;
}

std::string to_obj(const TriangleMesh& mesh) {
  std::string out;
  char line[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out += line;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(line, sizeof(line), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += line;
  }
  return out;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  file << to_obj(mesh);
  if (!file) throw Error(ErrorKind::io, "failed writing " + path.string());
}

}  // namespace articfit
