#include "articfit/synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "articfit/error.hpp"

namespace articfit {

namespace {

// Shapes are laid out on the 64^3 lattice, with edges on 4-voxel boundaries
// wherever possible so the 16^3 latent blocks see crisp occupancy.
Box vbox(double x0, double y0, double z0, double x1, double y1, double z1) {
  constexpr double h = 1.0 / kGridRes;
  return {Vec3(x0 * h, y0 * h, z0 * h), Vec3(x1 * h, y1 * h, z1 * h)};
}

constexpr double kVoxel = 1.0 / kGridRes;

struct KindGeometry {
  Solid body;
  std::vector<Solid> parts;
};

KindGeometry geometry_for(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::box_lid:
      return {Solid{{vbox(20, 20, 4, 44, 44, 32)}, {}}, {Solid{{vbox(20, 20, 32, 44, 44, 36)}, {}}}};
    case ObjectKind::cabinet_drawer:
      // The drawer's front panel overlaps the frame. A bare block would leave the
      // slide offsets ambiguous: shifted back into the cabinet's back wall, with
      // the body filling the always-covered opening, it explains every state.
      return {Solid{{vbox(16, 8, 4, 48, 40, 28)}, {vbox(20, 12, 8, 44, 40, 24)}},
              {Solid{{vbox(20, 12, 8, 44, 40, 24), vbox(16, 40, 4, 48, 44, 28)}, {}}}};
    case ObjectKind::laptop:
      return {Solid{{vbox(16, 4, 4, 48, 32, 8)}, {}}, {Solid{{vbox(16, 28, 8, 48, 32, 36)}, {}}}};
    case ObjectKind::multi_joint:
      // Same panelled drawer as cabinet_drawer, under a lid hinged at the back.
      return {Solid{{vbox(16, 8, 4, 48, 40, 28)}, {vbox(20, 12, 8, 44, 40, 20)}},
              {Solid{{vbox(16, 8, 28, 48, 40, 32)}, {}},
               Solid{{vbox(20, 12, 8, 44, 40, 20), vbox(16, 40, 4, 48, 44, 24)}, {}}}};
  }
  throw Error(ErrorKind::config, "unknown object kind");
}

// Per-part schedule position in [0, 1] for state k of K.
double schedule(ObjectKind kind, std::size_t part, int k, int num_states) {
  if (num_states <= 1) return 0.0;
  const double lin = static_cast<double>(k) / (num_states - 1);
  if (kind == ObjectKind::multi_joint && part == 1) {
    // Drawer visits the same evenly spaced levels in an interleaved order:
    // even states take the lower half, odd states the upper half.
    const int level = k % 2 == 0 ? k / 2 : (num_states + 1) / 2 + (k - 1) / 2;
    return static_cast<double>(level) / (num_states - 1);
  }
  return lin;
}

}  // namespace

std::string_view to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::box_lid: return "box_lid";
    case ObjectKind::cabinet_drawer: return "cabinet_drawer";
    case ObjectKind::laptop: return "laptop";
    case ObjectKind::multi_joint: return "multi_joint";
  }
  return "unknown";
}

ObjectKind object_kind_from_string(std::string_view name) {
  for (ObjectKind k : {ObjectKind::box_lid, ObjectKind::cabinet_drawer, ObjectKind::laptop, ObjectKind::multi_joint}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::config, "unknown object kind '" + std::string(name) + "'");
}

bool Solid::contains(const Vec3& p) const {
  bool in = false;
  for (const Box& b : add) {
    if (b.contains(p)) {
      in = true;
      break;
    }
  }
  if (!in) return false;
  for (const Box& b : subtract) {
    if (b.contains(p)) return false;
  }
  return true;
}

VoxelGrid Solid::voxelize(int resolution) const {
  VoxelGrid g(resolution);
  for (int z = 0; z < resolution; ++z) {
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        if (contains(g.center(x, y, z))) g.at(x, y, z) = 1.0;
      }
    }
  }
  return g;
}

std::vector<Vec3> Solid::sample_surface(std::size_t n, std::mt19937_64& rng) const {
  struct Face {
    Vec3 origin, u, v, normal;
    double area;
  };
  std::vector<Face> faces;
  auto add_faces = [&](const Box& b) {
    const Vec3 d = b.hi - b.lo;
    for (int a = 0; a < 3; ++a) {
      const int i = (a + 1) % 3;
      const int j = (a + 2) % 3;
      Vec3 u = Vec3::Zero();
      Vec3 v = Vec3::Zero();
      u[i] = d[i];
      v[j] = d[j];
      for (int side = 0; side < 2; ++side) {
        Vec3 o = b.lo;
        o[a] = side ? b.hi[a] : b.lo[a];
        Vec3 nrm = Vec3::Zero();
        nrm[a] = side ? 1.0 : -1.0;
        faces.push_back({o, u, v, nrm, d[i] * d[j]});
      }
    }
  };
  for (const Box& b : add) add_faces(b);
  for (const Box& b : subtract) add_faces(b);
  std::vector<double> areas;
  for (const Face& f : faces) areas.push_back(f.area);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Probe distance well below any feature size (features are >= 1 voxel).
  const double delta = 1e-3 * kVoxel;
  std::vector<Vec3> out;
  out.reserve(n);
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 1000 * (n + 10)) throw Error(ErrorKind::empty_part, "solid has no sampleable surface");
    const Face& f = faces[pick(rng)];
    const Vec3 p = f.origin + unit(rng) * f.u + unit(rng) * f.v;
    if (contains(p + delta * f.normal) != contains(p - delta * f.normal)) out.push_back(p);
  }
  return out;
}

std::vector<Vec3> Solid::corners() const {
  std::vector<Vec3> out;
  for (const Box& b : add) {
    for (int m = 0; m < 8; ++m) {
      out.emplace_back(m & 1 ? b.hi.x() : b.lo.x(), m & 2 ? b.hi.y() : b.lo.y(), m & 4 ? b.hi.z() : b.lo.z());
    }
  }
  return out;
}

std::vector<JointParams> default_joints(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::box_lid:
      return {{JointType::revolute, Vec3::UnitX(), Vec3(0.5, 20 * kVoxel, 32 * kVoxel)}};
    case ObjectKind::cabinet_drawer:
      return {{JointType::prismatic, Vec3::UnitY(), Vec3::Zero()}};
    case ObjectKind::laptop:
      return {{JointType::revolute, Vec3::UnitX(), Vec3(0.5, 32 * kVoxel, 8 * kVoxel)}};
    case ObjectKind::multi_joint:
      return {{JointType::revolute, Vec3::UnitX(), Vec3(0.5, 8 * kVoxel, 28 * kVoxel)},
              {JointType::prismatic, Vec3::UnitY(), Vec3::Zero()}};
  }
  throw Error(ErrorKind::config, "unknown object kind");
}

std::vector<double> default_theta_max(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::box_lid: return {std::numbers::pi / 2};
    case ObjectKind::cabinet_drawer: return {0.25};
    case ObjectKind::laptop: return {-1.2};
    case ObjectKind::multi_joint: return {std::numbers::pi / 2, 0.25};
  }
  throw Error(ErrorKind::config, "unknown object kind");
}

VoxelGrid pose_grid(const VoxelGrid& rest, const JointParams& joint, JointState state) {
  const int r = rest.resolution();
  VoxelGrid out(r);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec3 p = inverse_transform(out.center(i), joint, state) * r;
    const int x = static_cast<int>(std::floor(p.x()));
    const int y = static_cast<int>(std::floor(p.y()));
    const int z = static_cast<int>(std::floor(p.z()));
    if (x < 0 || y < 0 || z < 0 || x >= r || y >= r || z >= r) continue;
    out[i] = rest.at(x, y, z);
  }
  return out;
}

VoxelGrid compose_posed(const GroundTruthScene& scene, std::size_t k) {
  VoxelGrid g = scene.body_rest;
  for (std::size_t j = 0; j < scene.parts_rest.size(); ++j) {
    g = max_merge(g, pose_grid(scene.parts_rest[j], scene.joints[j], {scene.thetas[k][j]}));
  }
  return g;
}

GroundTruthScene generate(const SceneSpec& spec) {
  if (spec.num_states < 1) throw Error(ErrorKind::config, "num_states must be at least 1");
  KindGeometry geo = geometry_for(spec.kind);
  GroundTruthScene scene;
  scene.spec = spec;
  scene.joints = spec.joints ? *spec.joints : default_joints(spec.kind);
  const std::vector<double> tmax = spec.theta_max ? *spec.theta_max : default_theta_max(spec.kind);
  const std::size_t np = geo.parts.size();
  if (scene.joints.size() != np || tmax.size() != np) {
    throw Error(ErrorKind::config, std::string(to_string(spec.kind)) + " needs " + std::to_string(np) +
                                       " joint(s) and theta_max value(s)");
  }
  for (JointParams& j : scene.joints) normalize_joint(j);

  scene.body_solid = geo.body;
  scene.part_solids = geo.parts;
  scene.body_rest = geo.body.voxelize();
  for (const Solid& s : geo.parts) scene.parts_rest.push_back(s.voxelize());

  for (int k = 0; k < spec.num_states; ++k) {
    std::vector<double> row;
    for (std::size_t j = 0; j < np; ++j) row.push_back(tmax[j] * schedule(spec.kind, j, k, spec.num_states));
    scene.thetas.push_back(std::move(row));
  }

  constexpr double kTol = 1e-12;
  for (int k = 0; k < spec.num_states; ++k) {
    for (std::size_t j = 0; j < np; ++j) {
      for (const Vec3& c : geo.parts[j].corners()) {
        const Vec3 p = forward_transform(c, scene.joints[j], {scene.thetas[k][j]});
        if (p.minCoeff() < -kTol || p.maxCoeff() > 1.0 + kTol) {
          throw Error(ErrorKind::out_of_bounds, "part " + std::to_string(j) + " leaves the unit cube in state " +
                                                    std::to_string(k));
        }
      }
    }
  }

  for (std::size_t k = 0; k < static_cast<std::size_t>(spec.num_states); ++k) {
    scene.posed.push_back(compose_posed(scene, k));
    scene.posed_with_disk.push_back(add_reference_disk(scene.posed.back(), spec.disk));
  }

  std::mt19937_64 rng(spec.seed);
  scene.body_samples = geo.body.sample_surface(4096, rng);
  for (const Solid& s : geo.parts) scene.part_samples.push_back(s.sample_surface(4096, rng));
  return scene;
}

std::vector<PointPair> sample_correspondences(const GroundTruthScene& scene, int state_i, int state_j,
                                              std::size_t n, double noise_std, double static_fraction,
                                              std::uint64_t seed, std::size_t part) {
  const int k = static_cast<int>(scene.thetas.size());
  if (state_i < 0 || state_j < 0 || state_i >= k || state_j >= k) {
    throw Error(ErrorKind::config, "correspondence states out of range");
  }
  if (part >= scene.part_solids.size()) throw Error(ErrorKind::config, "part index out of range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<PointPair> pairs;
  pairs.reserve(n);
  const JointParams& joint = scene.joints[part];
  const JointState si{scene.thetas[static_cast<std::size_t>(state_i)][part]};
  const JointState sj{scene.thetas[static_cast<std::size_t>(state_j)][part]};
  for (std::size_t m = 0; m < n; ++m) {
    const bool is_static = unit(rng) < static_fraction;
    PointPair p;
    p.state_src = state_i;
    p.state_dst = state_j;
    if (is_static) {
      const auto pts = scene.body_solid.sample_surface(1, rng);
      p.p_src = pts[0];
      p.p_dst = pts[0];
    } else {
      const auto pts = scene.part_solids[part].sample_surface(1, rng);
      p.p_src = forward_transform(pts[0], joint, si);
      p.p_dst = forward_transform(pts[0], joint, sj);
    }
    if (noise_std > 0.0) {
      for (int a = 0; a < 3; ++a) p.p_dst[a] += noise_std * noise(rng);
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace articfit
