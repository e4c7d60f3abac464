#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "articfit/kinematics.hpp"
#include "articfit/voxel_grid.hpp"

namespace articfit {

struct HashGridConfig {
  int levels = 8;
  int base_resolution = 8;
  double per_level_scale = 1.4;
  std::uint32_t table_size = 1u << 16;
  int features_per_entry = 1;

  /// Throws ErrorKind::config when the finest level cannot resolve 64^3 or
  /// table_size is not a power of two.
  void validate() const;
  int level_resolution(int level) const;
};

/// Dense gradient buffers matching an OccupancyField's parameter layout.
struct FieldGradient {
  std::vector<double> tables;
  std::vector<double> weights;
  double bias = 0.0;

  void zero();
  bool all_zero() const;
};

/// Multi-level hash-grid occupancy field: per-level trilinear interpolation of
/// hashed corner features, affine readout, sigmoid. Points outside the unit
/// cube read as background (sigmoid of the bias).
class OccupancyField {
 public:
  static constexpr double kInitialBias = -4.0;

  explicit OccupancyField(HashGridConfig config = {});

  const HashGridConfig& config() const { return config_; }

  double query(const Vec3& c) const;
  double logit(const Vec3& c) const;

  struct SparseGradient {
    double value = 0.0;
    std::vector<std::pair<std::size_t, double>> tables;  // (flat index, gradient)
    std::vector<double> weights;
    double bias = 0.0;
    Vec3 d_c = Vec3::Zero();  // d occupancy / d c, already scaled by upstream
  };

  /// Exact gradients of upstream * query(c).
  SparseGradient query_backward(const Vec3& c, double upstream) const;

  /// Hot-path variant: adds upstream * d query/d params into `grad` and
  /// returns upstream * d query / d c.
  Vec3 accumulate_backward(const Vec3& c, double upstream, FieldGradient& grad) const;
  /// Same, reusing a known forward value query(c).
  Vec3 accumulate_backward(const Vec3& c, double upstream, FieldGradient& grad, double value) const;
  /// Same, for an upstream gradient taken with respect to the logit.
  Vec3 accumulate_logit_backward(const Vec3& c, double upstream_logit, FieldGradient& grad) const;

  FieldGradient make_gradient() const;

  std::span<double> tables() { return tables_; }
  std::span<const double> tables() const { return tables_; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  double& bias() { return bias_; }
  double bias() const { return bias_; }

  std::size_t level_offset(int level) const { return levels_[static_cast<std::size_t>(level)].offset; }
  bool level_is_dense(int level) const { return levels_[static_cast<std::size_t>(level)].dense; }

  bool operator==(const OccupancyField& other) const {
    return tables_ == other.tables_ && weights_ == other.weights_ && bias_ == other.bias_;
  }

 private:
  struct Level {
    double resolution;
    std::uint32_t vertices_per_axis;
    bool dense;          // one-to-one indexing when the level fits in the table
    std::size_t offset;  // first table entry of this level (in entries, not features)
  };
  struct Corners {
    std::size_t entry[8];
    double w[8];
    double frac[3];
  };

  void corners(const Level& level, const Vec3& c, Corners& out) const;
  static bool in_domain(const Vec3& c) {
    return c.x() >= 0.0 && c.x() <= 1.0 && c.y() >= 0.0 && c.y() <= 1.0 && c.z() >= 0.0 && c.z() <= 1.0;
  }

  HashGridConfig config_;
  std::vector<Level> levels_;
  std::vector<double> tables_;
  std::vector<double> weights_;
  double bias_ = kInitialBias;
};

/// Samples the field at every voxel center, optionally mapping centers through
/// the inverse articulation transform first.
VoxelGrid rasterize(const OccupancyField& field);
VoxelGrid rasterize(const OccupancyField& field, const JointParams& joint, JointState state);

struct FitOptions {
  int steps = 500;
  double lr = 0.01;
  double max_final_mse = 0.05;
  /// 0: MSE on occupancies. > 0: least squares on logits against
  /// +/-logit_target (target >= 0.5 maps to +), which yields saturated fields;
  /// the bias then starts at -logit_target.
  double logit_target = 0.0;
};

struct FitResult {
  OccupancyField field;
  double final_mse;
};

/// Regresses a fresh field onto `target` (MSE at voxel centers, Adam). Throws
/// ErrorKind::non_convergence when the final MSE exceeds options.max_final_mse.
FitResult fit_to_grid(const VoxelGrid& target, const HashGridConfig& config, std::uint64_t seed,
                      const FitOptions& options = {});

OccupancyField init_from_grid(const VoxelGrid& target, const HashGridConfig& config,
                              std::uint64_t seed, const FitOptions& options = {});

double sigmoid(double x);

}  // namespace articfit
