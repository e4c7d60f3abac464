#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "articfit/assembly.hpp"
#include "articfit/prior.hpp"

namespace articfit {

enum class TimeWeighting { constant };

/// How the voxel loss differentiates the decoded target decode(z0_hat).
enum class VoxelGradient {
  /// Gradient also flows through z_t's dependence on z (z0_hat moves with z).
  through_latent,
  /// decode(z0_hat) is treated as a constant target.
  detached,
};

std::string_view to_string(VoxelGradient mode);
VoxelGradient voxel_gradient_from_string(std::string_view name);

struct OptimConfig {
  int iterations = 3000;
  double lr = 0.01;
  double lambda_sds = 0.1;
  double lambda_vox = 1.0;
  double t_min = 0.5;
  double t_max = 0.8;
  TimeWeighting w_of_t = TimeWeighting::constant;
  std::uint64_t seed = 0;
  bool optimize_states = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Inject the reference disk into the posed grid x.
  bool use_disk = true;
  DiskSpec disk;
  VoxelGradient voxel_gradient = VoxelGradient::detached;

  /// Throws ErrorKind::config on out-of-range values.
  void validate() const;
  double weight(double t) const;
};

struct TraceRecord {
  int iteration = 0;
  std::size_t k = 0;
  double t = 0.0;
  double sds_loss = 0.0;  // 0.5 * w(t) * ||eps_hat - eps||^2
  double vox_loss = 0.0;
  std::vector<Vec3> axis;
  std::vector<Vec3> pivot;
  std::vector<std::vector<double>> thetas;  // [k][j]
};

struct TrainTrace {
  std::vector<TraceRecord> records;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// One evaluation of the training objective at fixed (k, t, eps).
struct ObjectiveEval {
  double sds_loss = 0.0;
  double vox_loss = 0.0;
  ModelGradient grad;
};

/// Gradient of the SDS term alone (no lambda): the residual w(t)(eps_hat - eps)
/// is pushed through dz_t/dpsi = (1 - t) dz/dpsi with eps_hat held constant.
ModelGradient sds_gradient(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                           const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed = 0);

/// Voxel reconstruction loss ||decode(z0_hat) - x||^2 (no lambda) and its gradient.
ObjectiveEval voxel_loss(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                         const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed = 0);

/// lambda_sds * SDS + lambda_vox * voxel loss from a single forward pass.
ObjectiveEval evaluate_objective(const ArticulatedModel& model, std::size_t k, double t, const LatentGrid& eps,
                                 const ShapePrior& prior, const OptimConfig& config, std::uint64_t noise_seed = 0);

/// Runs `config.iterations` Adam steps. Records are appended to `trace` as
/// they are produced, so the trace survives a NumericalDivergence throw.
ArticulatedModel run(ArticulatedModel model, const ShapePrior& prior, const OptimConfig& config,
                     TrainTrace& trace);

struct GradcheckEntry {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  double max_table_rel_error = 0.0;
};

struct GradcheckOptions {
  std::size_t table_entries = 6;  // per field: largest-gradient entries probed
  // Saturated body/part overlaps put many voxels close to a max-merge branch
  // switch; a small step keeps both evaluations on the same branch.
  double step = 1e-7;
  double t = 0.65;
  std::uint64_t seed = 0;
};

/// Central finite differences of the total objective (with eps_hat frozen)
/// against the analytic gradient for a sample of table entries, the readout,
/// axes, pivots (revolute only) and, when optimize_states is set, thetas.
GradcheckReport gradcheck(const ArticulatedModel& model, std::size_t k, const ShapePrior& prior,
                          const OptimConfig& config, const GradcheckOptions& options = {});

/// Relative error used by gradient checks: |a - n| / max(|a|, |n|), or 0 when
/// both are below 1e-12 in magnitude.
double relative_error(double analytic, double numeric);

}  // namespace articfit
