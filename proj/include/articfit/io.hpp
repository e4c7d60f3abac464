#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "articfit/assembly.hpp"
#include "articfit/joint_init.hpp"
#include "articfit/optimizer.hpp"
#include "articfit/refine.hpp"
#include "articfit/synth.hpp"

namespace articfit {

using Json = nlohmann::ordered_json;

/// Reads a JSON document; IOError when missing, ConfigError when malformed.
Json read_json_file(const std::filesystem::path& path);
/// Two-space indented, newline-terminated.
void write_json_file(const std::filesystem::path& path, const Json& doc);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Throws ConfigError naming the first key of `object` not in `allowed`.
void reject_unknown_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

// Strict (unknown keys rejected) readers overlay the given values onto
// defaults; writers emit every field.
Json to_json(const JointParams& joint);
JointParams joint_from_json(const Json& j);
Json to_json(const DiskSpec& disk);
DiskSpec disk_from_json(const Json& j);
Json to_json(const OptimConfig& config);
OptimConfig optim_config_from_json(const Json& j, OptimConfig base = {});
Json to_json(const CleanConfig& config);
CleanConfig clean_config_from_json(const Json& j, CleanConfig base = {});

/// What `synth` needs: the scene plus how to sample correspondences.
struct SynthRequest {
  SceneSpec spec;
  std::size_t pairs_per_state = 32;
  double pair_noise_std = 0.0;
  double static_fraction = 0.0;
};

Json to_json(const SynthRequest& request);
SynthRequest synth_request_from_json(const Json& j);

/// Joint types, axes, pivots and per-state thetas.
struct Kinematics {
  std::vector<JointParams> joints;
  std::vector<std::vector<double>> thetas;  // [k][j]
};

Json to_json(const Kinematics& kinematics);
Kinematics kinematics_from_json(const Json& j);

/// Correspondences per part.
using PartPairs = std::vector<std::vector<PointPair>>;
Json pairs_to_json(const PartPairs& pairs);
PartPairs pairs_from_json(const Json& j);

Json to_json(const InitEstimate& estimate);
InitEstimate init_estimate_from_json(const Json& j);

/// Binary model checkpoint: hash-grid config, every field's parameters,
/// joints and states as little-endian float64.
void write_checkpoint(const std::filesystem::path& path, const ArticulatedModel& model);
ArticulatedModel read_checkpoint(const std::filesystem::path& path);

/// Scene bundle directory: scene.json, joints.json, pairs.json and AVOX grids
/// (body_rest, part_<j>_rest, posed_<k>, posed_disk_<k>).
void write_bundle(const std::filesystem::path& dir, const GroundTruthScene& scene, const PartPairs& pairs);

struct SceneBundle {
  GroundTruthScene scene;  // surface samples are not stored
  PartPairs pairs;
};

SceneBundle read_bundle(const std::filesystem::path& dir);

/// URDF with a fixed base link, one child link per part and a joint carrying
/// type, axis, origin (the pivot for revolute joints) and limits [0, theta_max]
/// (ordered when theta_max is negative).
std::string to_urdf(const std::string& robot_name, const std::vector<JointParams>& joints,
                    const std::vector<double>& theta_max, const std::string& body_mesh,
                    const std::vector<std::string>& part_meshes);

}  // namespace articfit
