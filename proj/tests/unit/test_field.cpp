#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "articfit/error.hpp"
#include "articfit/hash_field.hpp"
#include "articfit/optimizer.hpp"

using namespace articfit;

namespace {

VoxelGrid box_grid(const Vec3& lo, const Vec3& hi) {
  VoxelGrid g;
  for (int z = 0; z < kGridRes; ++z)
    for (int y = 0; y < kGridRes; ++y)
      for (int x = 0; x < kGridRes; ++x) {
        const Vec3 c = g.center(x, y, z);
        if ((c.array() >= lo.array()).all() && (c.array() < hi.array()).all()) g.at(x, y, z) = 1.0;
      }
  return g;
}

double mse(const VoxelGrid& a, const VoxelGrid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
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

// One regression fit shared by the tests that need a trained field.
const OccupancyField& fitted_box() {
  static const OccupancyField field = [] {
    FitOptions options;
    options.steps = 300;
    return fit_to_grid(box_grid(Vec3::Constant(0.3), Vec3::Constant(0.7)), HashGridConfig{}, 0, options).field;
  }();
  return field;
}

}  // namespace

TEST_CASE("hash grid config validation") {
  CHECK_NOTHROW(HashGridConfig{}.validate());
  HashGridConfig c;
  c.table_size = 1000;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.levels = 2;  // finest level 8 * 1.4 cannot resolve 64^3
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(HashGridConfig{}.level_resolution(0) == 8);
}

TEST_CASE("fresh field reads as the bias everywhere") {
  const OccupancyField f;
  const double expected = 1.0 / (1.0 + std::exp(4.0));
  CHECK(f.query({0.3, 0.4, 0.5}) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(std::abs(f.query({0.3, 0.4, 0.5}) - 0.018) < 1e-3);
  const VoxelGrid g = rasterize(f);
  for (std::size_t i = 0; i < g.size(); i += 997) CHECK(g[i] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("out-of-cube queries return the bias alone") {
  OccupancyField f = random_field(3);
  CHECK(f.query({2, 2, 2}) == sigmoid(f.bias()));
  CHECK(f.query({-0.01, 0.5, 0.5}) == sigmoid(f.bias()));
  const auto g = f.query_backward({2, 2, 2}, 1.0);
  CHECK(g.tables.empty());
  CHECK(g.d_c == Vec3::Zero());
}

TEST_CASE("query gradients match central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  double table_worst = 0.0, coord_worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    OccupancyField f = random_field(100 + i);
    const Vec3 c(unit(rng), unit(rng), unit(rng));
    const auto g = f.query_backward(c, 1.0);
    std::map<std::size_t, double> tables;
    for (const auto& [index, v] : g.tables) tables[index] += v;
    for (const auto& [index, v] : tables) {
      double& p = f.tables()[index];
      const double saved = p;
      p = saved + 1e-3;
      const double plus = f.query(c);
      p = saved - 1e-3;
      const double minus = f.query(c);
      p = saved;
      table_worst = std::max(table_worst, relative_error(v, (plus - minus) / 2e-3));
    }
    for (int a = 0; a < 3; ++a) {
      Vec3 cp = c, cm = c;
      cp[a] += 1e-7;
      cm[a] -= 1e-7;
      coord_worst = std::max(coord_worst, relative_error(g.d_c[a], (f.query(cp) - f.query(cm)) / 2e-7));
    }
  }
  CHECK(table_worst < 1e-4);
  CHECK(coord_worst < 1e-3);
}

TEST_CASE("zero upstream gives zero gradients") {
  const OccupancyField f = random_field(5);
  FieldGradient grad = f.make_gradient();
  const Vec3 dc = f.accumulate_backward({0.4, 0.5, 0.6}, 0.0, grad);
  CHECK(grad.all_zero());
  CHECK(dc == Vec3::Zero());
}

TEST_CASE("coarse levels are dense, fine levels hashed") {
  const OccupancyField f;
  CHECK(f.level_is_dense(0));
  CHECK_FALSE(f.level_is_dense(f.config().levels - 1));
}

TEST_CASE("regression fit reproduces a box and follows a prismatic shift") {
  const OccupancyField& f = fitted_box();
  const VoxelGrid truth = box_grid(Vec3::Constant(0.3), Vec3::Constant(0.7));
  const VoxelGrid raster = rasterize(f);
  CHECK(mse(raster, truth) < 1e-3);
  CHECK(iou(raster, truth) > 0.95);

  const JointParams slide{JointType::prismatic, Vec3::UnitY(), Vec3::Zero()};
  const VoxelGrid shifted = rasterize(f, slide, {0.25});
  const VoxelGrid shifted_truth = box_grid(Vec3(0.3, 0.55, 0.3), Vec3(0.7, 0.95, 0.7));
  CHECK(iou(shifted, shifted_truth) > 0.9);
}

TEST_CASE("fits of trivial targets") {
  FitOptions options;
  options.steps = 100;
  const OccupancyField empty = init_from_grid(VoxelGrid{}, HashGridConfig{}, 0, options);
  const VoxelGrid r = rasterize(empty);
  double most = 0.0;
  for (double v : r.values()) most = std::max(most, v);
  CHECK(most < 0.05);

  const VoxelGrid half = box_grid(Vec3::Zero(), Vec3(1.0, 1.0, 0.5));
  options.steps = 200;
  const FitResult a = fit_to_grid(half, HashGridConfig{}, 4, options);
  CHECK(a.final_mse < 1e-3);
  const FitResult b = fit_to_grid(half, HashGridConfig{}, 4, options);
  CHECK(a.field == b.field);
}

TEST_CASE("fit reports non-convergence") {
  FitOptions options;
  options.steps = 0;
  options.max_final_mse = 1e-6;
  CHECK_THROWS_AS(fit_to_grid(box_grid(Vec3::Constant(0.3), Vec3::Constant(0.7)), HashGridConfig{}, 0, options),
                  Error);
}
