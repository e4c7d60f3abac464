#include "articfit/hash_field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "articfit/adam.hpp"
#include "articfit/error.hpp"

namespace articfit {

namespace {

constexpr std::uint32_t kPrimes[3] = {2654435761u, 805459861u, 3674653429u};

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void HashGridConfig::validate() const {
  if (levels <= 0 || base_resolution <= 0 || features_per_entry <= 0 || per_level_scale < 1.0) {
    throw Error(ErrorKind::config, "hash grid levels, base_resolution and features_per_entry must be positive");
  }
  if (!std::has_single_bit(table_size)) {
    throw Error(ErrorKind::config, "hash grid table_size must be a power of two, got " + std::to_string(table_size));
  }
  if (level_resolution(levels - 1) < kGridRes) {
    throw Error(ErrorKind::config, "finest hash grid level resolves " +
                                       std::to_string(level_resolution(levels - 1)) + " < 64 cells per axis");
  }
}

int HashGridConfig::level_resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(per_level_scale, level) + 1e-9));
}

void FieldGradient::zero() {
  std::fill(tables.begin(), tables.end(), 0.0);
  std::fill(weights.begin(), weights.end(), 0.0);
  bias = 0.0;
}

bool FieldGradient::all_zero() const {
  auto nz = [](double v) { return v != 0.0; };
  return bias == 0.0 && std::none_of(tables.begin(), tables.end(), nz) &&
         std::none_of(weights.begin(), weights.end(), nz);
}

OccupancyField::OccupancyField(HashGridConfig config) : config_(config) {
  config_.validate();
  std::size_t offset = 0;
  for (int l = 0; l < config_.levels; ++l) {
    const int res = config_.level_resolution(l);
    const auto verts = static_cast<std::uint32_t>(res + 1);
    const std::uint64_t dense_size = std::uint64_t{verts} * verts * verts;
    levels_.push_back({static_cast<double>(res), verts, dense_size <= config_.table_size, offset});
    offset += config_.table_size;
  }
  const auto f = static_cast<std::size_t>(config_.features_per_entry);
  tables_.assign(offset * f, 0.0);
  weights_.assign(static_cast<std::size_t>(config_.levels) * f, 1.0);
}

FieldGradient OccupancyField::make_gradient() const {
  FieldGradient g;
  g.tables.assign(tables_.size(), 0.0);
  g.weights.assign(weights_.size(), 0.0);
  return g;
}

void OccupancyField::corners(const Level& level, const Vec3& c, Corners& out) const {
  const double px = c.x() * level.resolution;
  const double py = c.y() * level.resolution;
  const double pz = c.z() * level.resolution;
  // c is inside the unit cube here, so truncation is floor; the upper face
  // folds into the last cell with frac = 1.
  const auto last = static_cast<std::uint32_t>(level.resolution) - 1;
  const std::uint32_t ix = std::min(static_cast<std::uint32_t>(px), last);
  const std::uint32_t iy = std::min(static_cast<std::uint32_t>(py), last);
  const std::uint32_t iz = std::min(static_cast<std::uint32_t>(pz), last);
  out.frac[0] = px - ix;
  out.frac[1] = py - iy;
  out.frac[2] = pz - iz;
  const std::size_t off = level.offset;
  // Corner k has offsets (k & 1, k >> 1 & 1, k >> 2 & 1).
  if (level.dense) {
    const std::uint32_t v = level.vertices_per_axis;
    const std::uint32_t vv = v * v;
    const std::size_t b = off + ix + v * (iy + v * iz);
    out.entry[0] = b;
    out.entry[1] = b + 1;
    out.entry[2] = b + v;
    out.entry[3] = b + v + 1;
    out.entry[4] = b + vv;
    out.entry[5] = b + vv + 1;
    out.entry[6] = b + vv + v;
    out.entry[7] = b + vv + v + 1;
  } else {
    const std::uint32_t mask = config_.table_size - 1;
    const std::uint32_t x0 = ix * kPrimes[0], x1 = x0 + kPrimes[0];
    const std::uint32_t y0 = iy * kPrimes[1], y1 = y0 + kPrimes[1];
    const std::uint32_t z0 = iz * kPrimes[2], z1 = z0 + kPrimes[2];
    out.entry[0] = off + ((x0 ^ y0 ^ z0) & mask);
    out.entry[1] = off + ((x1 ^ y0 ^ z0) & mask);
    out.entry[2] = off + ((x0 ^ y1 ^ z0) & mask);
    out.entry[3] = off + ((x1 ^ y1 ^ z0) & mask);
    out.entry[4] = off + ((x0 ^ y0 ^ z1) & mask);
    out.entry[5] = off + ((x1 ^ y0 ^ z1) & mask);
    out.entry[6] = off + ((x0 ^ y1 ^ z1) & mask);
    out.entry[7] = off + ((x1 ^ y1 ^ z1) & mask);
  }
  const double fx = out.frac[0], fy = out.frac[1], fz = out.frac[2];
  const double gx = 1.0 - fx, gy = 1.0 - fy, gz = 1.0 - fz;
  out.w[0] = gx * gy * gz;
  out.w[1] = fx * gy * gz;
  out.w[2] = gx * fy * gz;
  out.w[3] = fx * fy * gz;
  out.w[4] = gx * gy * fz;
  out.w[5] = fx * gy * fz;
  out.w[6] = gx * fy * fz;
  out.w[7] = fx * fy * fz;
}

double OccupancyField::logit(const Vec3& c) const {
  if (!in_domain(c)) return bias_;
  const auto nf = static_cast<std::size_t>(config_.features_per_entry);
  double acc = bias_;
  Corners cs;
  if (nf == 1) {
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      corners(levels_[l], c, cs);
      const double* t = tables_.data();
      double interp = 0.0;
      for (int k = 0; k < 8; ++k) interp += cs.w[k] * t[cs.entry[k]];
      acc += weights_[l] * interp;
    }
    return acc;
  }
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    corners(levels_[l], c, cs);
    for (std::size_t f = 0; f < nf; ++f) {
      const double* t = tables_.data() + f;
      double interp = 0.0;
      for (int k = 0; k < 8; ++k) interp += cs.w[k] * t[cs.entry[k] * nf];
      acc += weights_[l * nf + f] * interp;
    }
  }
  return acc;
}

double OccupancyField::query(const Vec3& c) const { return sigmoid(logit(c)); }

Vec3 OccupancyField::accumulate_backward(const Vec3& c, double upstream, FieldGradient& grad) const {
  if (upstream == 0.0) return Vec3::Zero();
  return accumulate_backward(c, upstream, grad, query(c));
}

Vec3 OccupancyField::accumulate_backward(const Vec3& c, double upstream, FieldGradient& grad,
                                         double value) const {
  if (upstream == 0.0) return Vec3::Zero();
  return accumulate_logit_backward(c, upstream * value * (1.0 - value), grad);
}

Vec3 OccupancyField::accumulate_logit_backward(const Vec3& c, double g, FieldGradient& grad) const {
  if (g == 0.0) return Vec3::Zero();
  grad.bias += g;
  if (!in_domain(c)) return Vec3::Zero();
  const auto nf = static_cast<std::size_t>(config_.features_per_entry);
  Vec3 d_c = Vec3::Zero();
  Corners cs;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const Level& level = levels_[l];
    corners(level, c, cs);
    const double fx = cs.frac[0], fy = cs.frac[1], fz = cs.frac[2];
    for (std::size_t f = 0; f < nf; ++f) {
      const double* t = tables_.data() + f;
      double* gt = grad.tables.data() + f;
      double v[8];
      for (int k = 0; k < 8; ++k) v[k] = t[cs.entry[k] * nf];
      const double wl = weights_[l * nf + f];
      const double gw = g * wl;
      for (int k = 0; k < 8; ++k) gt[cs.entry[k] * nf] += gw * cs.w[k];
      // Trilinear interpolation as nested lerps, x then y then z.
      const double c00 = v[0] + fx * (v[1] - v[0]);
      const double c10 = v[2] + fx * (v[3] - v[2]);
      const double c01 = v[4] + fx * (v[5] - v[4]);
      const double c11 = v[6] + fx * (v[7] - v[6]);
      const double c0 = c00 + fy * (c10 - c00);
      const double c1 = c01 + fy * (c11 - c01);
      grad.weights[l * nf + f] += g * (c0 + fz * (c1 - c0));
      const double dx0 = (v[1] - v[0]) + fy * ((v[3] - v[2]) - (v[1] - v[0]));
      const double dx1 = (v[5] - v[4]) + fy * ((v[7] - v[6]) - (v[5] - v[4]));
      const double ddx = dx0 + fz * (dx1 - dx0);
      const double ddy = (c10 - c00) + fz * ((c11 - c01) - (c10 - c00));
      const double ddz = c1 - c0;
      d_c += (gw * level.resolution) * Vec3(ddx, ddy, ddz);
    }
  }
  return d_c;
}

OccupancyField::SparseGradient OccupancyField::query_backward(const Vec3& c, double upstream) const {
  SparseGradient out;
  out.value = query(c);
  out.weights.assign(weights_.size(), 0.0);
  if (upstream == 0.0) return out;

  FieldGradient dense = make_gradient();
  out.d_c = accumulate_backward(c, upstream, dense);
  out.bias = dense.bias;
  out.weights = dense.weights;
  // Touched entries are the 8 corners per level; collect them in index order.
  if (in_domain(c)) {
    Corners cs;
    const auto nf = static_cast<std::size_t>(config_.features_per_entry);
    std::vector<std::size_t> touched;
    for (const Level& level : levels_) {
      corners(level, c, cs);
      for (int k = 0; k < 8; ++k) {
        for (std::size_t f = 0; f < nf; ++f) touched.push_back(cs.entry[k] * nf + f);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (std::size_t e : touched) {
      if (dense.tables[e] != 0.0) out.tables.emplace_back(e, dense.tables[e]);
    }
  }
  return out;
}

VoxelGrid rasterize(const OccupancyField& field) {
  VoxelGrid grid;
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = field.query(grid.center(i));
  return grid;
}

VoxelGrid rasterize(const OccupancyField& field, const JointParams& joint, JointState state) {
  VoxelGrid grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = field.query(inverse_transform(grid.center(i), joint, state));
  }
  return grid;
}

FitResult fit_to_grid(const VoxelGrid& target, const HashGridConfig& config, std::uint64_t /*seed*/,
                      const FitOptions& options) {
  OccupancyField field(config);
  FieldGradient grad = field.make_gradient();
  Adam adam(AdamConfig{.lr = options.lr});
  const std::size_t s_tables = adam.add_slot(grad.tables.size());
  const std::size_t s_weights = adam.add_slot(grad.weights.size());
  const std::size_t s_bias = adam.add_slot(1);

  std::vector<Vec3> centers(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) centers[i] = target.center(i);
  const double inv_n = 1.0 / static_cast<double>(target.size());

  const double sat = options.logit_target;
  // Saturated fits start from saturated background so out-of-cube queries
  // (bias only) read as empty as firmly as the fitted interior.
  if (sat > 0.0) field.bias() = -sat;
  double mse = 0.0;
  for (int step = 0; step <= options.steps; ++step) {
    grad.zero();
    mse = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (sat > 0.0) {
        const double l = field.logit(centers[i]);
        const double r = field.query(centers[i]) - target[i];
        mse += r * r;
        const double goal = target[i] >= 0.5 ? sat : -sat;
        if (step < options.steps) field.accumulate_logit_backward(centers[i], 2.0 * (l - goal) * inv_n, grad);
        continue;
      }
      const double value = field.query(centers[i]);
      const double r = value - target[i];
      mse += r * r;
      if (step < options.steps) field.accumulate_backward(centers[i], 2.0 * r * inv_n, grad, value);
    }
    mse *= inv_n;
    if (step == options.steps) break;
    adam.begin_step();
    adam.update(s_tables, field.tables(), grad.tables);
    adam.update(s_weights, field.weights(), grad.weights);
    adam.update(s_bias, std::span<double>(&field.bias(), 1), std::span<const double>(&grad.bias, 1));
  }
  if (!(mse <= options.max_final_mse)) {
    throw Error(ErrorKind::non_convergence,
                "field regression ended with MSE " + std::to_string(mse) + " > " + std::to_string(options.max_final_mse));
  }
  return {std::move(field), mse};
}

OccupancyField init_from_grid(const VoxelGrid& target, const HashGridConfig& config, std::uint64_t seed,
                              const FitOptions& options) {
  return fit_to_grid(target, config, seed, options).field;
}

}  // namespace articfit
