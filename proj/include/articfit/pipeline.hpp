#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "articfit/io.hpp"
#include "articfit/metrics.hpp"
#include "articfit/optimizer.hpp"
#include "articfit/prior.hpp"
#include "articfit/refine.hpp"

namespace articfit {

/// Noise used by "oracle-noisy" when the config leaves noise_std at 0.
inline constexpr double kDefaultPriorNoise = 0.1;

struct PriorConfig {
  /// "oracle" (exact) or "oracle-noisy" (Gaussian noise on the predictions).
  std::string kind = "oracle";
  double noise_std = 0.0;
  bool unit_cube_normalization = true;
};

/// How part and body fields are initialised before optimization.
struct InitConfig {
  int fit_steps = 200;
  double fit_lr = 0.01;
  std::uint64_t seed = 0;
  double static_threshold = 0.02;
  RansacOptions ransac;
};

/// Everything a run needs besides its inputs; unknown keys are rejected.
struct RunConfig {
  OptimConfig optim;
  CleanConfig clean;
  PriorConfig prior;
  InitConfig init;
  EvalOptions eval;
};

Json to_json(const RunConfig& config);
RunConfig run_config_from_json(const Json& j);

/// Oracle prior conditioned on the scene's posed grids, with the disk and
/// normalization settings taken from the run config.
OracleDenoiser make_prior(const GroundTruthScene& scene, const RunConfig& config);

/// Static-pair filtering and a multi-state fit for every part; the joint type
/// of each part is taken from `types`.
std::vector<InitEstimate> estimate_joints(const PartPairs& pairs, const std::vector<JointType>& types,
                                          int num_states, const InitConfig& config);

/// Correspondences between the rest state and every other state, per part.
PartPairs sample_bundle_pairs(const GroundTruthScene& scene, const SynthRequest& request);

/// Body and every part field are regressed onto the prior's rest-state
/// object; joints and states are supplied by the caller.
ArticulatedModel initial_model(const OracleDenoiser& prior, const std::vector<JointParams>& joints,
                               std::vector<std::vector<double>> states, bool states_known,
                               const InitConfig& config);

/// Uniformly random unit axis and a pivot uniform in the unit cube.
JointParams random_joint(JointType type, std::uint64_t seed);

/// Tilts the axis by exactly `angle` radians about a random perpendicular
/// direction and shifts a revolute pivot by `pivot_offset` perpendicular to the
/// true axis, so the axis-line distance grows by exactly that amount.
JointParams perturb_joint(const JointParams& joint, double angle, double pivot_offset, std::uint64_t seed);

struct PipelineResult {
  ArticulatedModel model;
  TrainTrace trace;
  RefineResult refined;
  EvalReport report;
};

/// optimize -> refine -> evaluate against the scene.
PipelineResult run_pipeline(const GroundTruthScene& scene, const ArticulatedModel& init, const RunConfig& config);

}  // namespace articfit
