// articfit: synthetic scene generation, joint initialisation, optimization,
// refinement, evaluation and export from the command line.
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "articfit/error.hpp"
#include "articfit/io.hpp"
#include "articfit/metrics.hpp"
#include "articfit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace articfit;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4, kDegenerate = 5 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::out_of_bounds:
      return kConfig;
    case ErrorKind::io:
      return kIo;
    case ErrorKind::non_convergence:
    case ErrorKind::degenerate_time:
    case ErrorKind::numerical_divergence:
      return kNumeric;
    case ErrorKind::all_static:
    case ErrorKind::degenerate_rotation:
    case ErrorKind::collinear:
    case ErrorKind::empty_part:
    case ErrorKind::empty_input:
    case ErrorKind::zero_vector:
      return kDegenerate;
  }
  return kConfig;
}

// Flags shared by every verb; unset optionals leave the config untouched.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> lr;
  std::optional<double> lambda_sds;
  std::optional<double> lambda_vox;
  std::optional<std::string> prior;
  std::optional<double> noise_std;
  int jobs = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON run config (unknown keys are rejected)");
  cmd->add_option("--seed", o.seed, "Seed override");
  cmd->add_option("--iterations", o.iterations, "Optimization iterations");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--lambda-sds", o.lambda_sds, "Weight of the score-distillation term");
  cmd->add_option("--lambda-vox", o.lambda_vox, "Weight of the voxel reconstruction term");
  cmd->add_option("--prior", o.prior, "Shape prior: oracle or oracle-noisy");
  cmd->add_option("--noise-std", o.noise_std, "Noise added to the prior's predictions");
  cmd->add_option("--jobs", o.jobs, "Parallel workers over multiple bundles")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output path")->required();
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : run_config_from_json(read_json_file(o.config_path));
  if (o.seed) {
    config.optim.seed = *o.seed;
    config.clean.seed = *o.seed;
    config.init.seed = *o.seed;
    config.init.ransac.seed = *o.seed;
  }
  if (o.iterations) config.optim.iterations = *o.iterations;
  if (o.lr) config.optim.lr = *o.lr;
  if (o.lambda_sds) config.optim.lambda_sds = *o.lambda_sds;
  if (o.lambda_vox) config.optim.lambda_vox = *o.lambda_vox;
  if (o.prior) config.prior.kind = *o.prior;
  if (o.noise_std) config.prior.noise_std = *o.noise_std;
  // Round-trip through the strict reader so flag values are validated too.
  return run_config_from_json(to_json(config));
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
}

std::vector<JointType> joint_types(const GroundTruthScene& scene) {
  std::vector<JointType> types;
  for (const auto& joint : scene.joints) types.push_back(joint.type);
  return types;
}

int cmd_synth(const Overrides& o) {
  SynthRequest request;
  if (!o.config_path.empty()) request = synth_request_from_json(read_json_file(o.config_path));
  if (o.seed) request.spec.seed = *o.seed;
  const GroundTruthScene scene = generate(request.spec);
  write_bundle(o.out, scene, sample_bundle_pairs(scene, request));
  std::printf("wrote %s bundle with %zu states to %s\n", std::string(to_string(request.spec.kind)).c_str(),
              scene.thetas.size(), o.out.c_str());
  return kOk;
}

int cmd_init(const Overrides& o, const std::string& bundle_dir, const std::string& pairs_path) {
  const RunConfig config = resolve_config(o);
  const SceneBundle bundle = read_bundle(bundle_dir);
  const PartPairs pairs = pairs_path.empty() ? bundle.pairs : pairs_from_json(read_json_file(pairs_path));
  const auto estimates = estimate_joints(pairs, joint_types(bundle.scene),
                                         static_cast<int>(bundle.scene.thetas.size()), config.init);
  Json doc;
  doc["estimates"] = Json::array();
  for (const auto& e : estimates) doc["estimates"].push_back(to_json(e));
  const fs::path out(o.out);
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_json_file(out, doc);
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    std::printf("part %zu: %s residual %.3g\n", j, std::string(to_string(estimates[j].joint.type)).c_str(),
                estimates[j].residual);
  }
  return kOk;
}

std::vector<InitEstimate> read_estimates(const fs::path& path) {
  const Json doc = read_json_file(path);
  reject_unknown_keys(doc, {"estimates"}, "init file");
  if (!doc.contains("estimates") || !doc["estimates"].is_array()) {
    throw Error(ErrorKind::config, "missing 'estimates' in init file");
  }
  std::vector<InitEstimate> out;
  for (const auto& e : doc["estimates"]) out.push_back(init_estimate_from_json(e));
  return out;
}

void optimize_one(const fs::path& bundle_dir, const fs::path& out_dir, const std::string& init_path,
                  const RunConfig& config) {
  const SceneBundle bundle = read_bundle(bundle_dir);
  const GroundTruthScene& scene = bundle.scene;
  const auto estimates = init_path.empty()
                             ? estimate_joints(bundle.pairs, joint_types(scene), static_cast<int>(scene.thetas.size()),
                                               config.init)
                             : read_estimates(init_path);
  if (estimates.size() != scene.joints.size()) throw Error(ErrorKind::config, "init file has the wrong number of parts");

  std::vector<JointParams> joints;
  for (const auto& e : estimates) joints.push_back(e.joint);
  std::vector<std::vector<double>> states = scene.thetas;
  if (config.optim.optimize_states) {
    for (std::size_t k = 0; k < states.size(); ++k) {
      for (std::size_t j = 0; j < estimates.size(); ++j) {
        if (estimates[j].thetas.size() != states.size()) {
          throw Error(ErrorKind::config, "init estimate lacks per-state thetas");
        }
        states[k][j] = estimates[j].thetas[k];
      }
    }
  }
  const OracleDenoiser prior = make_prior(scene, config);
  const ArticulatedModel init = initial_model(prior, joints, states, !config.optim.optimize_states, config.init);

  make_dir(out_dir);
  write_json_file(out_dir / "config.json", to_json(config));
  TrainTrace trace;
  try {
    const ArticulatedModel model = run(init, prior, config.optim, trace);
    write_checkpoint(out_dir / "checkpoint.ackp", model);
  } catch (const Error& e) {
    trace.write_csv(out_dir / "trace.csv");
    throw;
  }
  trace.write_csv(out_dir / "trace.csv");
}

int cmd_optimize(const Overrides& o, const std::vector<std::string>& bundles, const std::string& init_path) {
  const RunConfig config = resolve_config(o);
  if (bundles.size() == 1) {
    optimize_one(bundles[0], o.out, init_path, config);
    std::printf("wrote checkpoint and trace to %s\n", o.out.c_str());
    return kOk;
  }
  if (!init_path.empty()) throw Error(ErrorKind::config, "--init applies to a single bundle");
  // One pipeline per worker; each bundle writes to its own directory.
  std::atomic<std::size_t> next{0};
  std::vector<int> codes(bundles.size(), kOk);
  std::vector<std::string> messages(bundles.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < bundles.size(); i = next++) {
      try {
        optimize_one(bundles[i], fs::path(o.out) / fs::path(bundles[i]).filename(), "", config);
      } catch (const Error& e) {
        codes[i] = exit_code_for(e.kind());
        messages[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(o.jobs, static_cast<int>(bundles.size()));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int code = kOk;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    if (codes[i] != kOk) {
      std::fprintf(stderr, "%s: %s\n", bundles[i].c_str(), messages[i].c_str());
      if (code == kOk) code = codes[i];
    } else {
      std::printf("%s: done\n", bundles[i].c_str());
    }
  }
  return code;
}

int cmd_refine(const Overrides& o, const std::string& run_dir, const std::string& bundle_dir) {
  const fs::path run_path(run_dir);
  const fs::path checkpoint = fs::is_directory(run_path) ? run_path / "checkpoint.ackp" : run_path;
  RunConfig config = resolve_config(o);
  if (o.config_path.empty() && fs::is_directory(run_path) && fs::exists(run_path / "config.json")) {
    Overrides with_run_config = o;
    with_run_config.config_path = (run_path / "config.json").string();
    config = resolve_config(with_run_config);
  }
  const ArticulatedModel model = read_checkpoint(checkpoint);
  const SceneBundle bundle = read_bundle(bundle_dir);
  const OracleDenoiser prior = make_prior(bundle.scene, config);
  const RefineResult r = refine(model, prior, config.clean,
                                config.optim.use_disk ? std::optional<DiskSpec>(config.optim.disk) : std::nullopt);

  const fs::path out(o.out);
  make_dir(out);
  write_json_file(out / "config.json", to_json(config));
  write_voxel_grid(out / "cleaned.avox", r.cleaned, {"cleaned", static_cast<int>(r.k_max), std::nullopt});
  write_voxel_grid(out / "labels.avox", r.labels.to_grid(), {"labels", static_cast<int>(r.k_max), std::nullopt});
  write_obj(out / "body.obj", r.body_mesh);
  for (std::size_t j = 0; j < r.part_meshes.size(); ++j) {
    write_obj(out / ("part_" + std::to_string(j) + ".obj"), r.part_meshes[j]);
  }
  Json doc;
  doc["k_max"] = r.k_max;
  doc["kinematics"] = to_json(Kinematics{[&] {
                                           std::vector<JointParams> joints;
                                           for (const auto& part : model.parts) joints.push_back(part.joint);
                                           return joints;
                                         }(),
                                         model.states});
  write_json_file(out / "refined.json", doc);
  std::printf("refined state %zu: %zu occupied voxels, %zu parts\n", r.k_max,
              r.cleaned.count_at_least(config.clean.occupancy_threshold), r.part_meshes.size());
  return kOk;
}

ArticulatedShape read_refined(const fs::path& dir) {
  const Json doc = read_json_file(dir / "refined.json");
  reject_unknown_keys(doc, {"k_max", "kinematics"}, "refined.json");
  const Kinematics kin = kinematics_from_json(doc.at("kinematics"));
  const auto k_max = doc.at("k_max").get<std::size_t>();
  if (k_max >= kin.thetas.size()) throw Error(ErrorKind::io, "refined.json has an out-of-range k_max");
  ArticulatedShape shape;
  shape.labels = PartLabelGrid::from_grid(read_voxel_grid(dir / "labels.avox"), kin.joints.size());
  shape.occupancy = read_voxel_grid(dir / "cleaned.avox");
  shape.joints = kin.joints;
  shape.theta_ref = kin.thetas[k_max];
  shape.theta_max = kin.thetas[k_max];
  return shape;
}

int cmd_eval(const Overrides& o, const std::string& refined_dir, const std::string& bundle_dir, bool self) {
  const RunConfig config = resolve_config(o);
  const SceneBundle bundle = read_bundle(bundle_dir);
  const ArticulatedShape truth = shape_from_scene(bundle.scene);
  if (!self && refined_dir.empty()) throw Error(ErrorKind::config, "eval needs a refined directory or --self");
  const ArticulatedShape predicted = self ? truth : read_refined(refined_dir);
  const EvalReport report = evaluate(predicted, truth, config.eval);
  std::printf("%s\n", report.to_table().c_str());
  const Json doc = Json::parse(report.to_json().dump());
  std::printf("%s\n", doc.dump(2).c_str());
  const fs::path out(o.out);
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_json_file(out, doc);
  return kOk;
}

int cmd_export(const Overrides& o, const std::string& refined_dir, const std::string& format) {
  const ArticulatedShape shape = read_refined(refined_dir);
  const fs::path out(o.out);
  make_dir(out);
  // Meshes are exported at rest (theta = 0) in object coordinates.
  std::vector<double> rest(shape.joints.size(), 0.0);
  const TriangleMesh body = extract_mesh(shape.labels, shape.occupancy, kLabelBody);
  write_obj(out / "body.obj", body);
  std::vector<std::string> part_files;
  for (std::size_t j = 0; j < shape.joints.size(); ++j) {
    TriangleMesh part = extract_mesh(shape.labels, shape.occupancy, part_label(j));
    for (auto& v : part.vertices) v = inverse_transform(v, shape.joints[j], {shape.theta_ref[j]});
    part_files.push_back("part_" + std::to_string(j) + ".obj");
    write_obj(out / part_files.back(), part);
  }
  if (format == "urdf") {
    write_text_file(out / "model.urdf", to_urdf("articulated_object", shape.joints, shape.theta_max, "body.obj",
                                                 part_files));
  }
  std::printf("exported %s to %s\n", format.c_str(), o.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Articulated object reconstruction from a shape prior"};
  app.require_subcommand(1);
  Overrides o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene bundle");
  add_common(synth, o);

  std::string bundle, pairs_path, init_path, run_dir, refined_dir, format = "urdf";
  std::vector<std::string> bundles;
  bool self = false;

  auto* init = app.add_subcommand("init", "Estimate joints from point correspondences");
  init->add_option("bundle", bundle, "Scene bundle directory")->required();
  init->add_option("--pairs", pairs_path, "Correspondence file (defaults to the bundle's pairs.json)");
  add_common(init, o);

  auto* optimize = app.add_subcommand("optimize", "Optimize fields, joints and states");
  optimize->add_option("bundles", bundles, "Scene bundle directories")->required();
  optimize->add_option("--init", init_path, "Joint estimates from 'init' (estimated from the bundle when omitted)");
  add_common(optimize, o);

  auto* refine_cmd = app.add_subcommand("refine", "Clean the optimized occupancy and extract part meshes");
  refine_cmd->add_option("run", run_dir, "Optimize output directory or checkpoint file")->required();
  refine_cmd->add_option("--bundle", bundle, "Scene bundle conditioning the prior")->required();
  add_common(refine_cmd, o);

  auto* eval = app.add_subcommand("eval", "Compare refined output with ground truth");
  eval->add_option("refined", refined_dir, "Refine output directory");
  eval->add_option("--bundle", bundle, "Scene bundle with the ground truth")->required();
  eval->add_flag("--self", self, "Evaluate the ground truth against itself");
  add_common(eval, o);

  auto* export_cmd = app.add_subcommand("export", "Write rest-pose meshes and a URDF");
  export_cmd->add_option("refined", refined_dir, "Refine output directory")->required();
  export_cmd->add_option("--format", format, "urdf or obj")->check(CLI::IsMember({"urdf", "obj"}));
  add_common(export_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*init) return cmd_init(o, bundle, pairs_path);
    if (*optimize) return cmd_optimize(o, bundles, init_path);
    if (*refine_cmd) return cmd_refine(o, run_dir, bundle);
    if (*eval) return cmd_eval(o, refined_dir, bundle, self);
    if (*export_cmd) return cmd_export(o, refined_dir, format);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
