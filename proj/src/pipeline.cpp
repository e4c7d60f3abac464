#include "articfit/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "articfit/error.hpp"

namespace articfit {

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

Json prior_json(const PriorConfig& c) {
  return {{"kind", c.kind}, {"noise_std", c.noise_std}, {"unit_cube_normalization", c.unit_cube_normalization}};
}

PriorConfig prior_from_json(const Json& j) {
  constexpr std::string_view ctx = "prior config";
  reject_unknown_keys(j, {"kind", "noise_std", "unit_cube_normalization"}, ctx);
  PriorConfig c;
  read_field(j, "kind", c.kind, ctx);
  read_field(j, "noise_std", c.noise_std, ctx);
  read_field(j, "unit_cube_normalization", c.unit_cube_normalization, ctx);
  if (c.kind != "oracle" && c.kind != "oracle-noisy") {
    throw Error(ErrorKind::config, "invalid value '" + c.kind + "' for 'kind' in prior config (oracle, oracle-noisy)");
  }
  if (!(c.noise_std >= 0.0)) throw Error(ErrorKind::config, "'noise_std' must be non-negative");
  if (c.kind == "oracle-noisy" && c.noise_std == 0.0) c.noise_std = kDefaultPriorNoise;
  return c;
}

Json init_json(const InitConfig& c) {
  return {{"fit_steps", c.fit_steps},
          {"fit_lr", c.fit_lr},
          {"seed", c.seed},
          {"static_threshold", c.static_threshold},
          {"ransac",
           {{"enabled", c.ransac.enabled},
            {"inlier_threshold", c.ransac.inlier_threshold},
            {"iterations", c.ransac.iterations},
            {"seed", c.ransac.seed}}}};
}

InitConfig init_from_json(const Json& j) {
  constexpr std::string_view ctx = "init config";
  reject_unknown_keys(j, {"fit_steps", "fit_lr", "seed", "static_threshold", "ransac"}, ctx);
  InitConfig c;
  read_field(j, "fit_steps", c.fit_steps, ctx);
  read_field(j, "fit_lr", c.fit_lr, ctx);
  read_field(j, "seed", c.seed, ctx);
  read_field(j, "static_threshold", c.static_threshold, ctx);
  if (j.contains("ransac")) {
    const auto& r = j["ransac"];
    reject_unknown_keys(r, {"enabled", "inlier_threshold", "iterations", "seed"}, "ransac config");
    read_field(r, "enabled", c.ransac.enabled, "ransac config");
    read_field(r, "inlier_threshold", c.ransac.inlier_threshold, "ransac config");
    read_field(r, "iterations", c.ransac.iterations, "ransac config");
    read_field(r, "seed", c.ransac.seed, "ransac config");
  }
  if (c.fit_steps < 0 || !(c.fit_lr > 0.0) || !(c.static_threshold >= 0.0)) {
    throw Error(ErrorKind::config, "init config needs fit_steps >= 0, fit_lr > 0 and static_threshold >= 0");
  }
  return c;
}

Json eval_json(const EvalOptions& c) {
  return {{"n_states", c.n_states}, {"n_points", c.n_points}, {"tau", c.tau},
          {"threshold", c.threshold}, {"seed", c.seed},       {"surface_metrics", c.surface_metrics}};
}

EvalOptions eval_from_json(const Json& j) {
  constexpr std::string_view ctx = "eval config";
  reject_unknown_keys(j, {"n_states", "n_points", "tau", "threshold", "seed", "surface_metrics"}, ctx);
  EvalOptions c;
  read_field(j, "n_states", c.n_states, ctx);
  read_field(j, "n_points", c.n_points, ctx);
  read_field(j, "tau", c.tau, ctx);
  read_field(j, "threshold", c.threshold, ctx);
  read_field(j, "seed", c.seed, ctx);
  read_field(j, "surface_metrics", c.surface_metrics, ctx);
  if (c.n_states < 2 || c.n_points == 0 || !(c.tau > 0.0)) {
    throw Error(ErrorKind::config, "eval config needs n_states >= 2, n_points > 0 and tau > 0");
  }
  return c;
}

}  // namespace

Json to_json(const RunConfig& c) {
  Json j;
  j["optim"] = to_json(c.optim);
  j["clean"] = to_json(c.clean);
  j["prior"] = prior_json(c.prior);
  j["init"] = init_json(c.init);
  j["eval"] = eval_json(c.eval);
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  reject_unknown_keys(j, {"optim", "clean", "prior", "init", "eval"}, "run config");
  RunConfig c;
  if (j.contains("optim")) c.optim = optim_config_from_json(j["optim"]);
  if (j.contains("clean")) c.clean = clean_config_from_json(j["clean"]);
  if (j.contains("prior")) c.prior = prior_from_json(j["prior"]);
  if (j.contains("init")) c.init = init_from_json(j["init"]);
  if (j.contains("eval")) c.eval = eval_from_json(j["eval"]);
  return c;
}

OracleDenoiser make_prior(const GroundTruthScene& scene, const RunConfig& config) {
  OracleOptions options;
  options.use_disk = config.optim.use_disk;
  options.disk = config.optim.disk;
  options.unit_cube_normalization = config.prior.unit_cube_normalization;
  options.noise_std = config.prior.noise_std;
  return OracleDenoiser(scene.posed, options);
}

std::vector<InitEstimate> estimate_joints(const PartPairs& pairs, const std::vector<JointType>& types,
                                          int num_states, const InitConfig& config) {
  if (pairs.size() != types.size()) throw Error(ErrorKind::config, "need one joint type per part's pairs");
  std::vector<InitEstimate> out;
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    validate_pairs(pairs[j]);
    const auto moving = filter_static_pairs(pairs[j], config.static_threshold);
    out.push_back(estimate_multi_state(moving, types[j], num_states, config.ransac));
  }
  return out;
}

PartPairs sample_bundle_pairs(const GroundTruthScene& scene, const SynthRequest& request) {
  PartPairs out(scene.parts_rest.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (int k = 1; k < static_cast<int>(scene.thetas.size()); ++k) {
      const std::uint64_t seed = request.spec.seed * 1000003ULL + j * 1009ULL + static_cast<std::uint64_t>(k);
      const auto pairs = sample_correspondences(scene, 0, k, request.pairs_per_state, request.pair_noise_std,
                                                request.static_fraction, seed, j);
      out[j].insert(out[j].end(), pairs.begin(), pairs.end());
    }
  }
  return out;
}

ArticulatedModel initial_model(const OracleDenoiser& prior, const std::vector<JointParams>& joints,
                               std::vector<std::vector<double>> states, bool states_known,
                               const InitConfig& config) {
  FitOptions fit;
  fit.steps = config.fit_steps;
  fit.lr = config.fit_lr;
  fit.max_final_mse = 1.0;
  const OccupancyField field = init_from_grid(prior.object_target(0), HashGridConfig{}, config.seed, fit);
  ArticulatedModel model;
  model.body = field;
  for (const auto& joint : joints) model.parts.push_back({field, joint});
  model.states = std::move(states);
  model.states_known = states_known;
  model.validate();
  return model;
}

JointParams random_joint(JointType type, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  JointParams joint;
  joint.type = type;
  do {
    joint.axis = Vec3(normal(rng), normal(rng), normal(rng));
  } while (joint.axis.norm() < 1e-6);
  joint.axis.normalize();
  joint.pivot = Vec3(unit(rng), unit(rng), unit(rng));
  return joint;
}

JointParams perturb_joint(const JointParams& joint, double angle, double pivot_offset, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> turn(0.0, 2.0 * std::numbers::pi);
  const Vec3 a = joint.axis.normalized();
  const Vec3 u = a.unitOrthogonal();
  const Vec3 v = a.cross(u);
  const double phi = turn(rng);
  const Vec3 perp = std::cos(phi) * u + std::sin(phi) * v;
  JointParams out = joint;
  out.axis = Eigen::AngleAxisd(angle, perp) * a;
  // The tilted axis spans a and a x perp, so an offset along perp is exactly
  // the distance between the two axis lines.
  if (out.has_pivot()) out.pivot = joint.pivot + pivot_offset * perp;
  return out;
}

PipelineResult run_pipeline(const GroundTruthScene& scene, const ArticulatedModel& init, const RunConfig& config) {
  const OracleDenoiser prior = make_prior(scene, config);
  PipelineResult out;
  out.model = run(init, prior, config.optim, out.trace);
  out.refined = refine(out.model, prior, config.clean,
                       config.optim.use_disk ? std::optional<DiskSpec>(config.optim.disk) : std::nullopt);
  out.report = evaluate(shape_from_refined(out.model, out.refined), shape_from_scene(scene), config.eval);
  return out;
}

}  // namespace articfit
