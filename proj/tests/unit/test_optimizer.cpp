#include <doctest.h>

#include <cmath>
#include <random>

#include "articfit/error.hpp"
#include "articfit/optimizer.hpp"
#include "articfit/synth.hpp"

using namespace articfit;

namespace {

OccupancyField constant_field(double logit) {
  OccupancyField f;
  f.bias() = logit;
  return f;
}

OccupancyField random_field(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  OccupancyField f;
  for (double& v : f.tables()) v = 0.5 * normal(rng);
  for (double& v : f.weights()) v = normal(rng);
  f.bias() = 0.3 * normal(rng);
  return f;
}

// Predicts exactly the noise it was built with: zero SDS residual.
class EchoPrior : public ShapePrior {
 public:
  explicit EchoPrior(LatentGrid eps) : eps_(std::move(eps)) {}
  LatentGrid predict_noise(const LatentGrid&, std::size_t, double, std::uint64_t) const override { return eps_; }
  std::size_t num_conditions() const override { return 1; }

 private:
  LatentGrid eps_;
};

OracleOptions bare_oracle() {
  OracleOptions o;
  o.use_disk = false;
  o.unit_cube_normalization = false;
  return o;
}

OptimConfig bare_config() {
  OptimConfig c;
  c.use_disk = false;
  return c;
}

// Body and lid share the half-grey constant field, so x = 0.5 everywhere.
ArticulatedModel grey_model() {
  ArticulatedModel m;
  m.body = constant_field(0.0);
  m.parts.push_back({constant_field(0.0), {JointType::revolute, Vec3::UnitX(), Vec3(0.5, 0.8, 0.6)}});
  m.states = {{0.0}, {0.4}};
  return m;
}

ArticulatedModel random_model(JointType type) {
  ArticulatedModel m;
  m.body = random_field(21);
  // Offset the body so body/part near-ties (max-merge kinks) stay rare.
  m.body.bias() -= 3.0;
  const JointParams joint = type == JointType::revolute
                                ? JointParams{type, Vec3(1, 0.1, -0.2).normalized(), Vec3(0.5, 0.75, 0.6)}
                                : JointParams{type, Vec3(0.1, 1, 0.05).normalized(), Vec3::Zero()};
  m.parts.push_back({random_field(22), joint});
  m.states = {{0.0}, {type == JointType::revolute ? 0.6 : 0.15}};
  return m;
}

const GroundTruthScene& lid_scene() {
  static const GroundTruthScene scene = [] {
    SceneSpec spec;
    spec.num_states = 2;
    return generate(spec);
  }();
  return scene;
}

}  // namespace

TEST_CASE("optimizer config validation") {
  CHECK_NOTHROW(OptimConfig{}.validate());
  OptimConfig c;
  c.t_min = 0.9;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.t_max = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.lambda_sds = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(OptimConfig{}.weight(0.7) == 1.0);
  CHECK(voxel_gradient_from_string(to_string(VoxelGradient::through_latent)) == VoxelGradient::through_latent);
  CHECK_THROWS(voxel_gradient_from_string("frozen"));
}

TEST_CASE("SDS gradient vanishes at the oracle fixed point") {
  const ArticulatedModel m = grey_model();
  const OracleDenoiser prior({VoxelGrid(kGridRes, 0.5), VoxelGrid(kGridRes, 0.5)}, bare_oracle());
  const LatentGrid eps = sample_noise(5);
  for (double t : {0.5, 0.7}) {
    const ModelGradient g = sds_gradient(m, 1, t, eps, prior, bare_config());
    double most = std::abs(g.body.bias);
    for (double v : g.body.weights) most = std::max(most, std::abs(v));
    for (double v : g.parts[0].weights) most = std::max(most, std::abs(v));
    CHECK(most <= 1e-12);
    const ObjectiveEval vox = voxel_loss(m, 1, t, eps, prior, bare_config());
    CHECK(vox.vox_loss <= 1e-20);
  }
}

TEST_CASE("SDS gradient vanishes when the prior echoes the noise") {
  const LatentGrid eps = sample_noise(8);
  const EchoPrior prior(eps);
  const ModelGradient g = sds_gradient(random_model(JointType::revolute), 1, 0.6, eps, prior, bare_config());
  CHECK(g.all_zero());
}

TEST_CASE("voxel loss is a plain squared error against the decoded estimate") {
  // Empty targets decode to zero; x = 0.5 everywhere contributes 0.25 per voxel.
  const OracleDenoiser prior({VoxelGrid{}, VoxelGrid{}}, bare_oracle());
  const ObjectiveEval e = voxel_loss(grey_model(), 0, 0.6, sample_noise(1), prior, bare_config());
  CHECK(e.vox_loss == doctest::Approx(0.25 * kGridVoxels).epsilon(1e-12));
  CHECK(e.grad.body.bias > 0.0);  // lowering occupancy lowers the loss
  CHECK_THROWS_AS(voxel_loss(grey_model(), 0, 1.0 - 1e-9, sample_noise(1), prior, bare_config()), Error);
}

TEST_CASE("gradcheck on a random revolute model") {
  OptimConfig config;
  config.optimize_states = true;
  const OracleDenoiser prior(lid_scene().posed);
  GradcheckOptions options;
  options.table_entries = 2;
  const GradcheckReport report = gradcheck(random_model(JointType::revolute), 1, prior, config, options);
  CHECK(report.max_rel_error < 1e-3);
  bool has_pivot = false, has_theta = false;
  for (const auto& e : report.entries) {
    has_pivot = has_pivot || e.name.find("pivot") != std::string::npos;
    has_theta = has_theta || e.name.find("theta") != std::string::npos;
  }
  CHECK(has_pivot);
  CHECK(has_theta);
}

TEST_CASE("gradcheck through the latent voxel target") {
  OptimConfig config;
  config.voxel_gradient = VoxelGradient::through_latent;
  // The exact oracle puts every empty latent cell on the decode clamp's kink;
  // prediction noise moves the clean estimate off it.
  OracleOptions noisy;
  noisy.noise_std = 0.1;
  const OracleDenoiser prior(lid_scene().posed, noisy);
  GradcheckOptions options;
  options.table_entries = 2;
  const GradcheckReport report = gradcheck(random_model(JointType::revolute), 1, prior, config, options);
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("gradcheck of a prismatic model has no pivot entries") {
  const OracleDenoiser prior(lid_scene().posed);
  GradcheckOptions options;
  options.table_entries = 2;
  const GradcheckReport report = gradcheck(random_model(JointType::prismatic), 1, prior, OptimConfig{}, options);
  CHECK(report.max_rel_error < 1e-3);
  for (const auto& e : report.entries) CHECK(e.name.find("pivot") == std::string::npos);
}

TEST_CASE("zero lambdas: zero gradients and an unchanged model") {
  OptimConfig config;
  config.lambda_sds = 0.0;
  config.lambda_vox = 0.0;
  config.iterations = 3;
  const OracleDenoiser prior(lid_scene().posed);
  const ArticulatedModel m = random_model(JointType::revolute);
  GradcheckOptions options;
  options.table_entries = 2;
  const GradcheckReport report = gradcheck(m, 1, prior, config, options);
  for (const auto& e : report.entries) {
    CHECK(e.analytic == 0.0);
    CHECK(e.numeric == 0.0);
  }
  TrainTrace trace;
  const ArticulatedModel out = run(m, prior, config, trace);
  CHECK(out.body == m.body);
  CHECK(out.parts[0].field == m.parts[0].field);
  CHECK((out.parts[0].joint.axis - m.parts[0].joint.axis).norm() < 1e-15);
  CHECK(out.parts[0].joint.pivot == m.parts[0].joint.pivot);
  CHECK(trace.records.size() == 3);
}

TEST_CASE("identical seeds give bit-identical runs") {
  OptimConfig config;
  config.iterations = 4;
  config.seed = 13;
  config.optimize_states = true;
  const OracleDenoiser prior(lid_scene().posed);
  const ArticulatedModel m = random_model(JointType::revolute);
  TrainTrace a, b;
  const ArticulatedModel ma = run(m, prior, config, a);
  const ArticulatedModel mb = run(m, prior, config, b);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(ma.body == mb.body);
  CHECK(ma.parts[0].joint.axis == mb.parts[0].joint.axis);
  CHECK(ma.states == mb.states);
  CHECK_FALSE(ma.body == m.body);

  for (std::size_t i = 1; i < a.records.size(); ++i) CHECK(a.records[i].iteration > a.records[i - 1].iteration);
  for (const auto& r : a.records) {
    CHECK(r.t >= config.t_min);
    CHECK(r.t <= config.t_max);
    CHECK(std::abs(r.axis[0].norm() - 1.0) < 1e-12);
  }
  CHECK(a.to_csv().rfind("iteration,", 0) == 0);
}
