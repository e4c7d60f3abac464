#include "articfit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "articfit/adam.hpp"
#include "articfit/error.hpp"

namespace articfit {

namespace {

struct Forward {
  PosedGrid posed;
  VoxelGrid x;
  std::vector<std::uint8_t> constant;  // voxels pinned by the disk
  LatentGrid z;
  LatentGrid z_t;
};

Forward forward(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                const OptimConfig& config) {
  Forward f{build_posed_grid(model, k), VoxelGrid(), {}, {}, {}};
  f.x = f.posed.grid;
  if (config.use_disk) {
    f.constant = disk_mask(config.disk);
    for (std::size_t i = 0; i < kGridVoxels; ++i) {
      if (f.constant[i]) f.x[i] = 1.0;
    }
  } else {
    f.constant.assign(kGridVoxels, 0);
  }
  f.z = encode(f.x);
  f.z_t = f.z;
  for (std::size_t c = 0; c < f.z.size(); ++c) f.z_t[c] = (1.0 - t) * f.z[c] + t * eps[c];
  return f;
}

LatentGrid clean_estimate(const LatentGrid& z_t, const LatentGrid& eps_hat, double t) {
  LatentGrid z0 = z_t;
  for (std::size_t c = 0; c < z0.size(); ++c) z0[c] = (z_t[c] - t * eps_hat[c]) / (1.0 - t);
  return z0;
}

struct Upstream {
  double sds_loss = 0.0;
  double vox_loss = 0.0;
  std::vector<double> dx;  // d objective / d x, zero on pinned voxels
};

Upstream objective_upstream(const Forward& f, double t, const LatentGrid& eps, const LatentGrid& eps_hat,
                            const OptimConfig& config, double lambda_sds, double lambda_vox) {
  Upstream u;
  u.dx.assign(kGridVoxels, 0.0);
  const double w = config.weight(t);

  LatentGrid dz;  // d objective / d z
  for (std::size_t c = 0; c < dz.size(); ++c) {
    const double r = w * (eps_hat[c] - eps[c]);
    u.sds_loss += 0.5 * r * (eps_hat[c] - eps[c]);
    dz[c] = lambda_sds * (1.0 - t) * r;
  }

  if (1.0 - t < 1e-6) throw Error(ErrorKind::degenerate_time, "1 - t must be at least 1e-6");
  const LatentGrid z0_hat = clean_estimate(f.z_t, eps_hat, t);
  const VoxelGrid target = decode(z0_hat);
  VoxelGrid d_target;  // d objective / d decode(z0_hat)
  for (std::size_t i = 0; i < kGridVoxels; ++i) {
    const double r = target[i] - f.x[i];
    u.vox_loss += r * r;
    u.dx[i] -= lambda_vox * 2.0 * r;
    d_target[i] = lambda_vox * 2.0 * r;
  }
  if (config.voxel_gradient == VoxelGradient::through_latent) {
    // z0_hat = (z_t - t eps_hat) / (1 - t) and dz_t/dz = 1 - t, so dz0_hat/dz = 1.
    const LatentGrid d_z0 = decode_backward(z0_hat, d_target);
    for (std::size_t c = 0; c < dz.size(); ++c) dz[c] += d_z0[c];
  }

  const VoxelGrid d_x_from_z = encode_backward(dz);
  for (std::size_t i = 0; i < kGridVoxels; ++i) u.dx[i] += d_x_from_z[i];
  for (std::size_t i = 0; i < kGridVoxels; ++i) {
    if (f.constant[i]) u.dx[i] = 0.0;
  }
  return u;
}

ObjectiveEval evaluate_with(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                            const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed,
                            double lambda_sds, double lambda_vox) {
  if (k >= model.num_states()) throw Error(ErrorKind::config, "state index out of range");
  const Forward f = forward(model, k, t, eps, config);
  const LatentGrid eps_hat = prior.predict_noise(f.z_t, k, t, noise_seed);
  const Upstream u = objective_upstream(f, t, eps, eps_hat, config, lambda_sds, lambda_vox);
  ObjectiveEval out{u.sds_loss, u.vox_loss, make_gradient(model)};
  build_posed_grid_backward(model, k, f.posed, u.dx, out.grad);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool model_finite(const ArticulatedModel& m) {
  auto field_ok = [](const OccupancyField& f) {
    return all_finite(f.tables()) && all_finite(f.weights()) && std::isfinite(f.bias());
  };
  if (!field_ok(m.body)) return false;
  for (const Part& p : m.parts) {
    if (!field_ok(p.field) || !p.joint.axis.allFinite() || !p.joint.pivot.allFinite()) return false;
  }
  for (const auto& row : m.states) {
    if (!all_finite(row)) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(VoxelGradient mode) {
  return mode == VoxelGradient::through_latent ? "through_latent" : "detached";
}

VoxelGradient voxel_gradient_from_string(std::string_view name) {
  if (name == "through_latent") return VoxelGradient::through_latent;
  if (name == "detached") return VoxelGradient::detached;
  throw Error(ErrorKind::config, "voxel_gradient must be 'through_latent' or 'detached'");
}

void OptimConfig::validate() const {
  if (iterations < 0) throw Error(ErrorKind::config, "iterations must be non-negative");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::config, "lr must be positive");
  if (!(lambda_sds >= 0.0) || !(lambda_vox >= 0.0) || !std::isfinite(lambda_sds) || !std::isfinite(lambda_vox)) {
    throw Error(ErrorKind::config, "lambdas must be finite and non-negative");
  }
  if (!(t_min > 0.0) || !(t_max < 1.0) || !(t_min <= t_max)) {
    throw Error(ErrorKind::config, "t_range must satisfy 0 < t_min <= t_max < 1");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw Error(ErrorKind::config, "adam betas must lie in [0, 1) and eps must be positive");
  }
}

double OptimConfig::weight(double /*t*/) const {
  switch (w_of_t) {
    case TimeWeighting::constant: return 1.0;
  }
  return 1.0;
}

std::string TrainTrace::to_csv() const {
  std::ostringstream os;
  const std::size_t np = records.empty() ? 0 : records.front().axis.size();
  const std::size_t ns = records.empty() ? 0 : records.front().thetas.size();
  os << "iteration,k,t,sds_loss,vox_loss";
  for (std::size_t j = 0; j < np; ++j) {
    for (const char* c : {"x", "y", "z"}) os << ",axis" << j << "_" << c;
    for (const char* c : {"x", "y", "z"}) os << ",pivot" << j << "_" << c;
  }
  for (std::size_t k = 0; k < ns; ++k) {
    for (std::size_t j = 0; j < np; ++j) os << ",theta_s" << k << "_p" << j;
  }
  os << "\n";
  for (const TraceRecord& r : records) {
    os << r.iteration << "," << r.k << "," << fmt(r.t) << "," << fmt(r.sds_loss) << "," << fmt(r.vox_loss);
    for (std::size_t j = 0; j < np; ++j) {
      for (int a = 0; a < 3; ++a) os << "," << fmt(r.axis[j][a]);
      for (int a = 0; a < 3; ++a) os << "," << fmt(r.pivot[j][a]);
    }
    for (const auto& row : r.thetas) {
      for (double v : row) os << "," << fmt(v);
    }
    os << "\n";
  }
  return os.str();
}

void TrainTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << to_csv();
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

ModelGradient sds_gradient(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                           const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed) {
  return evaluate_with(model, k, t, eps, prior, config, noise_seed, 1.0, 0.0).grad;
}

ObjectiveEval voxel_loss(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                         const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed) {
  return evaluate_with(model, k, t, eps, prior, config, noise_seed, 0.0, 1.0);
}

ObjectiveEval evaluate_objective(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                                 const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed) {
  return evaluate_with(model, k, t, eps, prior, config, noise_seed, config.lambda_sds, config.lambda_vox);
}

ArticulatedModel run(ArticulatedModel model, const ShapePrior& prior, const OptimConfig& config,
                     TrainTrace& trace) {
  config.validate();
  model.validate();
  if (model.num_states() != prior.num_conditions()) {
    throw Error(ErrorKind::config, "model has " + std::to_string(model.num_states()) + " states but the prior has " +
                                       std::to_string(prior.num_conditions()) + " conditions");
  }
  model.states_known = !config.optimize_states;
  const std::size_t np = model.parts.size();
  const std::size_t ns = model.num_states();

  Adam adam(AdamConfig{config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps});
  struct FieldSlots {
    std::size_t tables, weights, bias;
  };
  auto add_field = [&](const OccupancyField& f) {
    return FieldSlots{adam.add_slot(f.tables().size()), adam.add_slot(f.weights().size()), adam.add_slot(1)};
  };
  const FieldSlots body_slots = add_field(model.body);
  std::vector<FieldSlots> part_slots;
  std::vector<std::size_t> axis_slots, pivot_slots, state_slots;
  for (const Part& p : model.parts) {
    part_slots.push_back(add_field(p.field));
    axis_slots.push_back(adam.add_slot(3));
    pivot_slots.push_back(adam.add_slot(3));
    state_slots.push_back(adam.add_slot(ns));
  }
  auto update_field = [&](OccupancyField& f, const FieldSlots& s, const FieldGradient& g) {
    adam.update(s.tables, f.tables(), g.tables);
    adam.update(s.weights, f.weights(), g.weights);
    adam.update(s.bias, std::span<double>(&f.bias(), 1), std::span<const double>(&g.bias, 1));
  };

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_state(0, ns - 1);
  std::uniform_real_distribution<double> pick_t(config.t_min, config.t_max);
  for (int it = 0; it < config.iterations; ++it) {
    const std::size_t k = pick_state(rng);
    const double t = pick_t(rng);
    const LatentGrid eps = sample_noise(rng());
    const std::uint64_t noise_seed = rng();
    const ObjectiveEval ev = evaluate_objective(model, k, t, eps, prior, config, noise_seed);

    adam.begin_step();
    update_field(model.body, body_slots, ev.grad.body);
    for (std::size_t j = 0; j < np; ++j) {
      Part& part = model.parts[j];
      update_field(part.field, part_slots[j], ev.grad.parts[j]);
      const Vec3 g_axis = project_to_tangent(ev.grad.axis[j], part.joint.axis);
      adam.update(axis_slots[j], std::span<double>(part.joint.axis.data(), 3), std::span<const double>(g_axis.data(), 3));
      if (part.joint.has_pivot()) {
        adam.update(pivot_slots[j], std::span<double>(part.joint.pivot.data(), 3),
                    std::span<const double>(ev.grad.pivot[j].data(), 3));
      }
      if (config.optimize_states) {
        // State 0 is the rest frame of the fields and stays fixed.
        std::vector<double> theta(ns), g(ns, 0.0);
        for (std::size_t s = 0; s < ns; ++s) {
          theta[s] = model.states[s][j];
          if (s > 0) g[s] = ev.grad.states[s][j];
        }
        adam.update(state_slots[j], theta, g);
        for (std::size_t s = 1; s < ns; ++s) model.states[s][j] = clamp_theta(part.joint.type, theta[s]);
      }
    }
    if (!model_finite(model)) {
      throw Error(ErrorKind::numerical_divergence, "non-finite parameter after iteration " + std::to_string(it));
    }
    for (Part& p : model.parts) normalize_joint(p.joint);

    TraceRecord rec;
    rec.iteration = it;
    rec.k = k;
    rec.t = t;
    rec.sds_loss = ev.sds_loss;
    rec.vox_loss = ev.vox_loss;
    for (const Part& p : model.parts) {
      rec.axis.push_back(p.joint.axis);
      rec.pivot.push_back(p.joint.has_pivot() ? p.joint.pivot : Vec3::Zero());
    }
    rec.thetas = model.states;
    trace.records.push_back(std::move(rec));
  }
  return model;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-12) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport gradcheck(const ArticulatedModel& model, std::size_t k, const ShapePrior& prior,
                          const OptimConfig& config, const GradcheckOptions& options) {
  config.validate();
  ArticulatedModel probe = model;
  probe.states_known = !config.optimize_states;
  const double t = options.t;
  const LatentGrid eps = sample_noise(options.seed);
  const std::uint64_t noise_seed = options.seed ^ 0x9e3779b97f4a7c15ULL;

  // Freeze eps_hat (and, for a detached voxel target, the decoded target) at
  // the probe point; the remaining objective is a deterministic function of psi.
  const Forward f0 = forward(probe, k, t, eps, config);
  const LatentGrid eps_hat = prior.predict_noise(f0.z_t, k, t, noise_seed);
  const VoxelGrid frozen_target = decode(clean_estimate(f0.z_t, eps_hat, t));
  const Upstream u0 = objective_upstream(f0, t, eps, eps_hat, config, config.lambda_sds, config.lambda_vox);
  ModelGradient analytic = make_gradient(probe);
  build_posed_grid_backward(probe, k, f0.posed, u0.dx, analytic);

  // Objective difference between two parameter settings, accumulated per
  // latent cell and per voxel so the large shared part cancels exactly before
  // summation; this keeps central differences accurate at small steps.
  auto objective_difference = [&](const ArticulatedModel& a, const ArticulatedModel& b) {
    const Forward fa = forward(a, k, t, eps, config);
    const Forward fb = forward(b, k, t, eps, config);
    const double w = config.weight(t);
    double sds = 0.0;
    for (std::size_t c = 0; c < fa.z_t.size(); ++c) sds += w * (eps_hat[c] - eps[c]) * (fa.z_t[c] - fb.z_t[c]);
    double vox = 0.0;
    if (config.voxel_gradient == VoxelGradient::through_latent) {
      const VoxelGrid ta = decode(clean_estimate(fa.z_t, eps_hat, t));
      const VoxelGrid tb = decode(clean_estimate(fb.z_t, eps_hat, t));
      for (std::size_t i = 0; i < kGridVoxels; ++i) {
        const double ra = ta[i] - fa.x[i], rb = tb[i] - fb.x[i];
        vox += (ra - rb) * (ra + rb);
      }
    } else {
      for (std::size_t i = 0; i < kGridVoxels; ++i) {
        vox += (fb.x[i] - fa.x[i]) * (2.0 * frozen_target[i] - fa.x[i] - fb.x[i]);
      }
    }
    return config.lambda_sds * sds + config.lambda_vox * vox;
  };

  GradcheckReport report;
  auto check = [&](const std::string& name, double& param, double grad, bool is_table) {
    const double saved = param;
    param = saved + options.step;
    const ArticulatedModel plus = probe;
    param = saved - options.step;
    const double numeric = objective_difference(plus, probe) / (2.0 * options.step);
    param = saved;
    const double rel = relative_error(grad, numeric);
    report.entries.push_back({name, grad, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (is_table) report.max_table_rel_error = std::max(report.max_table_rel_error, rel);
  };
  auto check_field = [&](const std::string& prefix, OccupancyField& field, const FieldGradient& g) {
    std::vector<std::size_t> order(g.tables.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n = std::min(options.table_entries, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double ga = std::abs(g.tables[a]);
                        const double gb = std::abs(g.tables[b]);
                        return ga != gb ? ga > gb : a < b;
                      });
    for (std::size_t i = 0; i < n; ++i) {
      check(prefix + ".table[" + std::to_string(order[i]) + "]", field.tables()[order[i]], g.tables[order[i]], true);
    }
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      check(prefix + ".weight[" + std::to_string(l) + "]", field.weights()[l], g.weights[l], false);
    }
    check(prefix + ".bias", field.bias(), g.bias, false);
  };

  check_field("body", probe.body, analytic.body);
  for (std::size_t j = 0; j < probe.parts.size(); ++j) {
    const std::string prefix = "part" + std::to_string(j);
    check_field(prefix, probe.parts[j].field, analytic.parts[j]);
    static constexpr const char* kAxes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
      check(prefix + ".axis." + kAxes[a], probe.parts[j].joint.axis[a], analytic.axis[j][a], false);
    }
    if (probe.parts[j].joint.has_pivot()) {
      for (int a = 0; a < 3; ++a) {
        check(prefix + ".pivot." + kAxes[a], probe.parts[j].joint.pivot[a], analytic.pivot[j][a], false);
      }
    }
    if (config.optimize_states) {
      check(prefix + ".theta[" + std::to_string(k) + "]", probe.states[k][j], analytic.states[k][j], false);
    }
  }
  return report;
}

}  // namespace articfit
