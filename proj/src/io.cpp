#include "articfit/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "articfit/error.hpp"

namespace articfit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace fs = std::filesystem;

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::config, "'" + path.string() + "' is not valid JSON");
  return doc;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::io, "short write to '" + path.string() + "'");
}

void write_json_file(const fs::path& path, const Json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

void reject_unknown_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                         std::string_view context) {
  if (!object.is_object()) throw Error(ErrorKind::config, std::string(context) + " must be a JSON object");
  for (const auto& item : object.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw Error(ErrorKind::config, "unknown key '" + item.key() + "' in " + std::string(context));
  }
}

namespace {

template <class T>
void read_field(const Json& j, const char* key, T& out, std::string_view context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::config, "invalid value for '" + std::string(key) + "' in " + std::string(context));
  }
}

template <class T>
T required_field(const Json& j, const char* key, std::string_view context) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::config, "missing '" + std::string(key) + "' in " + std::string(context));
  }
  T out{};
  read_field(j, key, out, context);
  return out;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json& j, std::string_view context) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::config, std::string(context) + " must be a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::config, std::string(context) + " must hold numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

template <class E, class F>
E enum_field(const Json& j, const char* key, E fallback, F parse, std::string_view context) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw Error(ErrorKind::config, "invalid value for '" + std::string(key) + "' in " + std::string(context));
  try {
    return parse(j[key].get<std::string>());
  } catch (const Error&) {
    throw Error(ErrorKind::config, "invalid value '" + j[key].get<std::string>() + "' for '" + std::string(key) +
                                       "' in " + std::string(context));
  }
}

}  // namespace

Json to_json(const JointParams& joint) {
  Json j;
  j["type"] = std::string(to_string(joint.type));
  j["axis"] = vec_json(joint.axis);
  j["pivot"] = joint.has_pivot() ? vec_json(joint.pivot) : Json(nullptr);
  return j;
}

JointParams joint_from_json(const Json& j) {
  reject_unknown_keys(j, {"type", "axis", "pivot"}, "joint");
  JointParams joint;
  joint.type = enum_field(j, "type", JointType::revolute, joint_type_from_string, "joint");
  if (!j.contains("axis")) throw Error(ErrorKind::config, "missing 'axis' in joint");
  joint.axis = vec_from(j["axis"], "joint axis");
  if (joint.axis.norm() < 1e-12) throw Error(ErrorKind::config, "joint axis must be non-zero");
  joint.axis.normalize();
  if (joint.has_pivot()) {
    if (!j.contains("pivot") || j["pivot"].is_null()) throw Error(ErrorKind::config, "revolute joint needs a 'pivot'");
    joint.pivot = vec_from(j["pivot"], "joint pivot");
  }
  return joint;
}

Json to_json(const DiskSpec& disk) {
  Json j;
  j["center_xy"] = Json::array({disk.center_xy.x(), disk.center_xy.y()});
  j["radius"] = disk.radius;
  j["thickness_voxels"] = disk.thickness_voxels;
  j["z_base"] = disk.z_base;
  return j;
}

DiskSpec disk_from_json(const Json& j) {
  reject_unknown_keys(j, {"center_xy", "radius", "thickness_voxels", "z_base"}, "disk");
  DiskSpec disk;
  if (j.contains("center_xy")) {
    const auto& c = j["center_xy"];
    if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
      throw Error(ErrorKind::config, "invalid value for 'center_xy' in disk");
    }
    disk.center_xy = {c[0].get<double>(), c[1].get<double>()};
  }
  read_field(j, "radius", disk.radius, "disk");
  read_field(j, "thickness_voxels", disk.thickness_voxels, "disk");
  read_field(j, "z_base", disk.z_base, "disk");
  if (!(disk.radius > 0.0) || disk.thickness_voxels <= 0 || disk.z_base < 0) {
    throw Error(ErrorKind::config, "disk needs a positive radius and thickness and a non-negative z_base");
  }
  return disk;
}

Json to_json(const OptimConfig& c) {
  Json j;
  j["iterations"] = c.iterations;
  j["lr"] = c.lr;
  j["lambda_sds"] = c.lambda_sds;
  j["lambda_vox"] = c.lambda_vox;
  j["t_min"] = c.t_min;
  j["t_max"] = c.t_max;
  j["w_of_t"] = "constant";
  j["seed"] = c.seed;
  j["optimize_states"] = c.optimize_states;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["use_disk"] = c.use_disk;
  j["disk"] = to_json(c.disk);
  j["voxel_gradient"] = std::string(to_string(c.voxel_gradient));
  return j;
}

OptimConfig optim_config_from_json(const Json& j, OptimConfig c) {
  constexpr std::string_view ctx = "optim config";
  reject_unknown_keys(j, {"iterations", "lr", "lambda_sds", "lambda_vox", "t_min", "t_max", "w_of_t", "seed",
                          "optimize_states", "adam_beta1", "adam_beta2", "adam_eps", "use_disk", "disk",
                          "voxel_gradient"},
                      ctx);
  read_field(j, "iterations", c.iterations, ctx);
  read_field(j, "lr", c.lr, ctx);
  read_field(j, "lambda_sds", c.lambda_sds, ctx);
  read_field(j, "lambda_vox", c.lambda_vox, ctx);
  read_field(j, "t_min", c.t_min, ctx);
  read_field(j, "t_max", c.t_max, ctx);
  c.w_of_t = enum_field(
      j, "w_of_t", c.w_of_t,
      [](const std::string& s) {
        if (s != "constant") throw Error(ErrorKind::config, "unknown weighting");
        return TimeWeighting::constant;
      },
      ctx);
  read_field(j, "seed", c.seed, ctx);
  read_field(j, "optimize_states", c.optimize_states, ctx);
  read_field(j, "adam_beta1", c.adam_beta1, ctx);
  read_field(j, "adam_beta2", c.adam_beta2, ctx);
  read_field(j, "adam_eps", c.adam_eps, ctx);
  read_field(j, "use_disk", c.use_disk, ctx);
  if (j.contains("disk")) c.disk = disk_from_json(j["disk"]);
  c.voxel_gradient = enum_field(j, "voxel_gradient", c.voxel_gradient, voxel_gradient_from_string, ctx);
  c.validate();
  return c;
}

Json to_json(const CleanConfig& c) {
  Json j;
  j["inject_noise_std"] = c.inject_noise_std;
  j["carpet_slab_voxels"] = c.carpet_slab_voxels;
  j["min_component_size"] = c.min_component_size;
  j["connectivity"] = c.connectivity;
  j["occupancy_threshold"] = c.occupancy_threshold;
  j["carpet_min_footprint"] = c.carpet_min_footprint;
  j["seed"] = c.seed;
  return j;
}

CleanConfig clean_config_from_json(const Json& j, CleanConfig c) {
  constexpr std::string_view ctx = "clean config";
  reject_unknown_keys(j, {"inject_noise_std", "carpet_slab_voxels", "min_component_size", "connectivity",
                          "occupancy_threshold", "carpet_min_footprint", "seed"},
                      ctx);
  read_field(j, "inject_noise_std", c.inject_noise_std, ctx);
  read_field(j, "carpet_slab_voxels", c.carpet_slab_voxels, ctx);
  read_field(j, "min_component_size", c.min_component_size, ctx);
  read_field(j, "connectivity", c.connectivity, ctx);
  read_field(j, "occupancy_threshold", c.occupancy_threshold, ctx);
  read_field(j, "carpet_min_footprint", c.carpet_min_footprint, ctx);
  read_field(j, "seed", c.seed, ctx);
  c.validate();
  return c;
}

Json to_json(const SynthRequest& r) {
  Json j;
  j["kind"] = std::string(to_string(r.spec.kind));
  j["num_states"] = r.spec.num_states;
  j["seed"] = r.spec.seed;
  if (r.spec.joints) {
    j["joints"] = Json::array();
    for (const auto& joint : *r.spec.joints) j["joints"].push_back(to_json(joint));
  }
  if (r.spec.theta_max) j["theta_max"] = *r.spec.theta_max;
  j["disk"] = to_json(r.spec.disk);
  j["pairs_per_state"] = r.pairs_per_state;
  j["pair_noise_std"] = r.pair_noise_std;
  j["static_fraction"] = r.static_fraction;
  return j;
}

SynthRequest synth_request_from_json(const Json& j) {
  constexpr std::string_view ctx = "scene spec";
  reject_unknown_keys(j, {"kind", "num_states", "seed", "joints", "theta_max", "disk", "pairs_per_state",
                          "pair_noise_std", "static_fraction"},
                      ctx);
  SynthRequest r;
  r.spec.kind = enum_field(j, "kind", r.spec.kind, object_kind_from_string, ctx);
  read_field(j, "num_states", r.spec.num_states, ctx);
  read_field(j, "seed", r.spec.seed, ctx);
  if (j.contains("joints")) {
    if (!j["joints"].is_array()) throw Error(ErrorKind::config, "invalid value for 'joints' in scene spec");
    std::vector<JointParams> joints;
    for (const auto& item : j["joints"]) joints.push_back(joint_from_json(item));
    r.spec.joints = joints;
  }
  if (j.contains("theta_max")) {
    std::vector<double> theta;
    read_field(j, "theta_max", theta, ctx);
    r.spec.theta_max = theta;
  }
  if (j.contains("disk")) r.spec.disk = disk_from_json(j["disk"]);
  read_field(j, "pairs_per_state", r.pairs_per_state, ctx);
  read_field(j, "pair_noise_std", r.pair_noise_std, ctx);
  read_field(j, "static_fraction", r.static_fraction, ctx);
  if (r.spec.num_states < 2) throw Error(ErrorKind::config, "'num_states' must be at least 2");
  if (r.pair_noise_std < 0.0) throw Error(ErrorKind::config, "'pair_noise_std' must be non-negative");
  if (r.static_fraction < 0.0 || r.static_fraction > 1.0) {
    throw Error(ErrorKind::config, "'static_fraction' must lie in [0, 1]");
  }
  return r;
}

Json to_json(const Kinematics& k) {
  Json j;
  j["joints"] = Json::array();
  for (const auto& joint : k.joints) j["joints"].push_back(to_json(joint));
  j["thetas"] = k.thetas;
  return j;
}

Kinematics kinematics_from_json(const Json& j) {
  reject_unknown_keys(j, {"joints", "thetas"}, "kinematics");
  Kinematics k;
  if (!j.contains("joints") || !j["joints"].is_array()) throw Error(ErrorKind::config, "missing 'joints' in kinematics");
  for (const auto& item : j["joints"]) k.joints.push_back(joint_from_json(item));
  read_field(j, "thetas", k.thetas, "kinematics");
  for (const auto& row : k.thetas) {
    if (row.size() != k.joints.size()) throw Error(ErrorKind::config, "each 'thetas' row needs one value per joint");
  }
  return k;
}

Json pairs_to_json(const PartPairs& pairs) {
  Json j = Json::array();
  for (std::size_t part = 0; part < pairs.size(); ++part) {
    Json entry;
    entry["part"] = part;
    entry["pairs"] = Json::array();
    for (const auto& p : pairs[part]) {
      entry["pairs"].push_back({{"src", vec_json(p.p_src)},
                                {"dst", vec_json(p.p_dst)},
                                {"state_src", p.state_src},
                                {"state_dst", p.state_dst}});
    }
    j.push_back(entry);
  }
  return j;
}

PartPairs pairs_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::config, "pairs document must be an array of parts");
  PartPairs out(j.size());
  for (const auto& entry : j) {
    reject_unknown_keys(entry, {"part", "pairs"}, "pairs entry");
    const auto part = required_field<std::size_t>(entry, "part", "pairs entry");
    if (part >= out.size()) throw Error(ErrorKind::config, "pairs entry has an out-of-range 'part'");
    if (!entry.contains("pairs") || !entry["pairs"].is_array()) {
      throw Error(ErrorKind::config, "missing 'pairs' in pairs entry");
    }
    for (const auto& p : entry["pairs"]) {
      reject_unknown_keys(p, {"src", "dst", "state_src", "state_dst"}, "pair");
      PointPair pair;
      pair.p_src = vec_from(p.value("src", Json()), "pair src");
      pair.p_dst = vec_from(p.value("dst", Json()), "pair dst");
      read_field(p, "state_src", pair.state_src, "pair");
      read_field(p, "state_dst", pair.state_dst, "pair");
      out[part].push_back(pair);
    }
  }
  return out;
}

Json to_json(const InitEstimate& e) {
  Json j;
  j["joint"] = to_json(e.joint);
  j["thetas"] = e.thetas;
  j["residual"] = e.residual;
  j["inlier_count"] = e.inlier_count;
  return j;
}

InitEstimate init_estimate_from_json(const Json& j) {
  reject_unknown_keys(j, {"joint", "thetas", "residual", "inlier_count"}, "init estimate");
  InitEstimate e;
  if (!j.contains("joint")) throw Error(ErrorKind::config, "missing 'joint' in init estimate");
  e.joint = joint_from_json(j["joint"]);
  read_field(j, "thetas", e.thetas, "init estimate");
  read_field(j, "residual", e.residual, "init estimate");
  read_field(j, "inlier_count", e.inlier_count, "init estimate");
  return e;
}

namespace {

constexpr char kCheckpointMagic[4] = {'A', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_doubles(std::span<const double> values) {
    put<std::uint64_t>(values.size());
    for (double v : values) put(v);
  }
  std::string bytes;
};

class Reader {
 public:
  Reader(std::string data, std::string name) : bytes_(std::move(data)), name_(std::move(name)) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(ErrorKind::io, "'" + name_ + "' is truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(std::span<double> out) {
    if (get<std::uint64_t>() != out.size()) throw Error(ErrorKind::io, "'" + name_ + "' has mismatched array sizes");
    for (double& v : out) v = get<double>();
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void put_field(Writer& w, const OccupancyField& f) {
  w.put_doubles(f.tables());
  w.put_doubles(f.weights());
  w.put(f.bias());
}

OccupancyField get_field(Reader& r, const HashGridConfig& config) {
  OccupancyField f(config);
  r.get_doubles(f.tables());
  r.get_doubles(f.weights());
  f.bias() = r.get<double>();
  return f;
}

}  // namespace

void write_checkpoint(const fs::path& path, const ArticulatedModel& model) {
  model.validate();
  Writer w;
  w.bytes.append(kCheckpointMagic, 4);
  w.put(kCheckpointVersion);
  const HashGridConfig& c = model.body.config();
  w.put<std::int32_t>(c.levels);
  w.put<std::int32_t>(c.base_resolution);
  w.put(c.per_level_scale);
  w.put<std::uint32_t>(c.table_size);
  w.put<std::int32_t>(c.features_per_entry);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.parts.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.num_states()));
  w.put<std::uint8_t>(model.states_known ? 1 : 0);
  put_field(w, model.body);
  for (const auto& part : model.parts) {
    w.put<std::uint8_t>(part.joint.type == JointType::revolute ? 0 : 1);
    for (int i = 0; i < 3; ++i) w.put(part.joint.axis[i]);
    for (int i = 0; i < 3; ++i) w.put(part.joint.pivot[i]);
    put_field(w, part.field);
  }
  for (const auto& row : model.states) {
    for (double theta : row) w.put(theta);
  }
  write_text_file(path, w.bytes);
}

ArticulatedModel read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 8 || data.compare(0, 4, kCheckpointMagic, 4) != 0) {
    throw Error(ErrorKind::io, "'" + path.string() + "' is not a checkpoint");
  }
  Reader r(data.substr(4), path.string());
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw Error(ErrorKind::io, "unsupported checkpoint version");
  HashGridConfig c;
  c.levels = r.get<std::int32_t>();
  c.base_resolution = r.get<std::int32_t>();
  c.per_level_scale = r.get<double>();
  c.table_size = r.get<std::uint32_t>();
  c.features_per_entry = r.get<std::int32_t>();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::io, "'" + path.string() + "' holds an invalid field config");
  }
  const auto parts = r.get<std::uint32_t>();
  const auto states = r.get<std::uint32_t>();
  if (parts > 64 || states > 4096) throw Error(ErrorKind::io, "'" + path.string() + "' has implausible sizes");
  ArticulatedModel model;
  model.states_known = r.get<std::uint8_t>() != 0;
  model.body = get_field(r, c);
  for (std::uint32_t j = 0; j < parts; ++j) {
    Part part{OccupancyField(c), JointParams{}};
    part.joint.type = r.get<std::uint8_t>() == 0 ? JointType::revolute : JointType::prismatic;
    for (int i = 0; i < 3; ++i) part.joint.axis[i] = r.get<double>();
    for (int i = 0; i < 3; ++i) part.joint.pivot[i] = r.get<double>();
    part.field = get_field(r, c);
    model.parts.push_back(std::move(part));
  }
  model.states.assign(states, std::vector<double>(parts, 0.0));
  for (auto& row : model.states) {
    for (double& theta : row) theta = r.get<double>();
  }
  if (!r.done()) throw Error(ErrorKind::io, "'" + path.string() + "' has trailing bytes");
  model.validate();
  return model;
}

namespace {

std::string numbered(const char* stem, std::size_t i) { return std::string(stem) + "_" + std::to_string(i) + ".avox"; }

}  // namespace

void write_bundle(const fs::path& dir, const GroundTruthScene& scene, const PartPairs& pairs) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
  SynthRequest request;
  request.spec = scene.spec;
  Json scene_doc;
  scene_doc["spec"] = to_json(request);
  scene_doc["num_parts"] = scene.parts_rest.size();
  scene_doc["num_states"] = scene.thetas.size();
  write_json_file(dir / "scene.json", scene_doc);
  write_json_file(dir / "joints.json", to_json(Kinematics{scene.joints, scene.thetas}));
  write_json_file(dir / "pairs.json", pairs_to_json(pairs));
  write_voxel_grid(dir / "body_rest.avox", scene.body_rest, {"body_rest", std::nullopt, std::nullopt});
  for (std::size_t j = 0; j < scene.parts_rest.size(); ++j) {
    write_voxel_grid(dir / ("part_" + std::to_string(j) + "_rest.avox"), scene.parts_rest[j],
                     {"part_rest", std::nullopt, static_cast<int>(j)});
  }
  for (std::size_t k = 0; k < scene.posed.size(); ++k) {
    write_voxel_grid(dir / numbered("posed", k), scene.posed[k], {"posed", static_cast<int>(k), std::nullopt});
    write_voxel_grid(dir / numbered("posed_disk", k), scene.posed_with_disk[k],
                     {"posed_with_disk", static_cast<int>(k), std::nullopt});
  }
}

SceneBundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "bundle directory '" + dir.string() + "' does not exist");
  const Json scene_doc = read_json_file(dir / "scene.json");
  reject_unknown_keys(scene_doc, {"spec", "num_parts", "num_states"}, "scene.json");
  SceneBundle bundle;
  GroundTruthScene& scene = bundle.scene;
  scene.spec = synth_request_from_json(scene_doc.at("spec")).spec;
  const Kinematics kin = kinematics_from_json(read_json_file(dir / "joints.json"));
  scene.joints = kin.joints;
  scene.thetas = kin.thetas;
  const auto parts = required_field<std::size_t>(scene_doc, "num_parts", "scene.json");
  const auto states = required_field<std::size_t>(scene_doc, "num_states", "scene.json");
  if (parts != scene.joints.size() || states != scene.thetas.size()) {
    throw Error(ErrorKind::io, "scene.json disagrees with joints.json in '" + dir.string() + "'");
  }
  scene.body_rest = read_voxel_grid(dir / "body_rest.avox");
  for (std::size_t j = 0; j < parts; ++j) {
    scene.parts_rest.push_back(read_voxel_grid(dir / ("part_" + std::to_string(j) + "_rest.avox")));
  }
  for (std::size_t k = 0; k < states; ++k) {
    scene.posed.push_back(read_voxel_grid(dir / numbered("posed", k)));
    scene.posed_with_disk.push_back(read_voxel_grid(dir / numbered("posed_disk", k)));
  }
  bundle.pairs = pairs_from_json(read_json_file(dir / "pairs.json"));
  return bundle;
}

std::string to_urdf(const std::string& robot_name, const std::vector<JointParams>& joints,
                    const std::vector<double>& theta_max, const std::string& body_mesh,
                    const std::vector<std::string>& part_meshes) {
  if (theta_max.size() != joints.size() || part_meshes.size() != joints.size()) {
    throw Error(ErrorKind::config, "URDF export needs one theta_max and one mesh per joint");
  }
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  auto xyz = [&](const Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); };
  auto link = [&](const std::string& name, const std::string& mesh, const Vec3& offset) {
    std::string s = "  <link name=\"" + name + "\">\n";
    for (const char* tag : {"visual", "collision"}) {
      s += std::string("    <") + tag + ">\n";
      s += "      <origin xyz=\"" + xyz(offset) + "\" rpy=\"0 0 0\"/>\n";
      s += "      <geometry><mesh filename=\"" + mesh + "\"/></geometry>\n";
      s += std::string("    </") + tag + ">\n";
    }
    return s + "  </link>\n";
  };

  std::string out = "<?xml version=\"1.0\"?>\n<robot name=\"" + robot_name + "\">\n";
  out += link("base", body_mesh, Vec3::Zero());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const auto& joint = joints[j];
    // Meshes are in object coordinates; the joint frame sits at the pivot.
    const Vec3 origin = joint.has_pivot() ? joint.pivot : Vec3::Zero();
    const std::string name = "part_" + std::to_string(j);
    out += link(name, part_meshes[j], -origin);
    out += "  <joint name=\"joint_" + std::to_string(j) + "\" type=\"" + std::string(to_string(joint.type)) + "\">\n";
    out += "    <parent link=\"base\"/>\n";
    out += "    <child link=\"" + name + "\"/>\n";
    out += "    <origin xyz=\"" + xyz(origin) + "\" rpy=\"0 0 0\"/>\n";
    out += "    <axis xyz=\"" + xyz(joint.axis) + "\"/>\n";
    out += "    <limit lower=\"" + num(std::min(0.0, theta_max[j])) + "\" upper=\"" + num(std::max(0.0, theta_max[j])) +
           "\" effort=\"0\" velocity=\"0\"/>\n";
    out += "  </joint>\n";
  }
  return out + "</robot>\n";
}

}  // namespace articfit
