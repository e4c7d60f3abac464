#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "articfit/error.hpp"
#include "articfit/metrics.hpp"

using namespace articfit;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, scale);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

double brute_nearest(const Vec3& q, const std::vector<Vec3>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : set) best = std::min(best, (p - q).norm());
  return best;
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sa = 0.0, sb = 0.0;
  for (const auto& p : a) sa += brute_nearest(p, b);
  for (const auto& p : b) sb += brute_nearest(p, a);
  return 0.5 * (sa / a.size() + sb / b.size());
}

double brute_fscore(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau) {
  double pa = 0.0, pb = 0.0;
  for (const auto& p : a) pa += brute_nearest(p, b) <= tau;
  for (const auto& p : b) pb += brute_nearest(p, a) <= tau;
  const double precision = pa / a.size(), recall = pb / b.size();
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

TEST_CASE("point index matches brute force on volume and surface sets") {
  const auto targets = random_points(2000, 1);
  const auto queries = random_points(500, 2, 1.4);
  const auto d = nearest_distances(queries, targets);
  for (std::size_t i = 0; i < queries.size(); ++i) CHECK(d[i] == brute_nearest(queries[i], targets));

  std::vector<Vec3> plane;
  for (const auto& p : random_points(3000, 3)) plane.emplace_back(p.x(), p.y(), 0.25);
  const auto dq = nearest_distances(queries, plane);
  for (std::size_t i = 0; i < queries.size(); ++i) CHECK(dq[i] == brute_nearest(queries[i], plane));
}

TEST_CASE("chamfer and fscore agree with brute force double loops") {
  const auto a = random_points(1000, 11);
  auto b = random_points(1000, 12);
  for (auto& p : b) p.x() += 0.1;
  CHECK(std::abs(chamfer(a, b) - brute_chamfer(a, b)) <= 1e-9);
  CHECK(std::abs(fscore(a, b, 0.05) - brute_fscore(a, b, 0.05)) <= 1e-9);
}

TEST_CASE("chamfer and fscore reference values") {
  const std::vector<Vec3> origin{Vec3(0, 0, 0)}, unit_x{Vec3(1, 0, 0)};
  CHECK(chamfer(origin, unit_x) == 1.0);
  const auto a = random_points(300, 5);
  CHECK(chamfer(a, a) == 0.0);
  CHECK(fscore(a, a) == 1.0);

  std::vector<Vec3> far = a;
  for (auto& p : far) p.x() += 10.0;
  CHECK(fscore(a, far) == 0.0);

  // Half of A within tau of B, all of B within tau of A -> F = 2/3.
  const std::vector<Vec3> A{Vec3(0, 0, 0), Vec3(5, 0, 0)};
  const std::vector<Vec3> B{Vec3(0.01, 0, 0)};
  CHECK(fscore(A, B, 0.05) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(chamfer(std::vector<Vec3>{}, a), Error);
  CHECK_THROWS_AS(fscore(a, std::vector<Vec3>{}), Error);
}

TEST_CASE("chamfer and fscore are symmetric") {
  const auto a = random_points(700, 21);
  const auto b = random_points(400, 22);
  CHECK(chamfer(a, b) == chamfer(b, a));
  CHECK(fscore(a, b, 0.05) == fscore(b, a, 0.05));
}

TEST_CASE("axis error examples and negation invariance") {
  CHECK(axis_error(Vec3(0, 0, 1), Vec3(0, 0, -1)) == 0.0);
  CHECK(axis_error(Vec3(1, 0, 0), Vec3(0, 1, 0)) == std::numbers::pi / 2);
  CHECK(std::abs(axis_error(Vec3(1, 0, 0), Vec3(1, 1, 0).normalized()) - std::numbers::pi / 4) < 1e-15);
  const Vec3 a(0.3, -0.5, 0.8), b(0.1, 0.9, 0.2);
  CHECK(axis_error(a, b) == axis_error(-a, b));
  CHECK(axis_error(a, b) == axis_error(a, -b));
  CHECK(axis_error(a, b) <= std::numbers::pi / 2);
  CHECK_THROWS_AS(axis_error(Vec3::Zero(), b), Error);
}

TEST_CASE("pivot error examples and along-axis invariance") {
  CHECK(pivot_error(Vec3(0, 0, 1), Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0)) == 1.0);
  CHECK(pivot_error(Vec3(0, 0, 1), Vec3(0.2, 0.3, 0), Vec3(0, 0, 1), Vec3(0.2, 0.3, 0)) == 0.0);
  CHECK(pivot_error(Vec3(0, 0, 1), Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(1, 0, 0)) == 1.0);

  const Vec3 ap = Vec3(0.2, 0.1, 1.0).normalized(), ag = Vec3(0.0, 1.0, 0.1).normalized();
  const Vec3 xp(0.4, 0.5, 0.6), xg(0.1, 0.7, 0.3);
  const double base = pivot_error(ap, xp, ag, xg);
  CHECK(std::abs(pivot_error(ap, xp + 0.37 * ap, ag, xg) - base) < 1e-12);
  CHECK(std::abs(pivot_error(ap, xp, ag, xg - 0.81 * ag) - base) < 1e-12);
  CHECK_THROWS_AS(pivot_error(ap, xp, Vec3::Zero(), xg), Error);
}

TEST_CASE("ground truth evaluated against itself scores perfectly") {
  SceneSpec spec;
  spec.kind = ObjectKind::box_lid;
  const auto scene = generate(spec);
  const auto truth = shape_from_scene(scene);
  EvalOptions options;
  options.n_points = 5000;
  const auto report = evaluate(truth, truth, options);
  REQUIRE(report.states.size() == 6);
  for (const auto& s : report.states) {
    CHECK(s.chamfer == 0.0);
    CHECK(s.fscore == 1.0);
    CHECK(s.iou == 1.0);
  }
  CHECK(report.joints[0].axis_error == 0.0);
  CHECK(*report.joints[0].pivot_error == 0.0);
}

TEST_CASE("posing ground truth labels reproduces the scene's posed grids") {
  SceneSpec spec;
  spec.kind = ObjectKind::multi_joint;
  const auto scene = generate(spec);
  const auto truth = shape_from_scene(scene);
  for (std::size_t k = 0; k < scene.thetas.size(); ++k) {
    CHECK(pose_shape(truth, scene.thetas[k]) == scene.posed[k]);
  }
}

TEST_CASE("axis rotated by ten degrees reports ten degrees") {
  SceneSpec spec;
  const auto scene = generate(spec);
  const auto truth = shape_from_scene(scene);
  auto rotated = truth;
  rotated.joints[0].axis = Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0, Vec3::UnitZ()) * truth.joints[0].axis;
  EvalOptions options;
  options.surface_metrics = false;
  const auto report = evaluate(rotated, truth, options);
  CHECK(std::abs(report.joints[0].axis_error - 10.0 * std::numbers::pi / 180.0) <= 1e-9);
  CHECK(report.states[0].iou == 1.0);
  CHECK(std::isnan(report.mean_chamfer));
}

TEST_CASE("evaluation report renders as json and table") {
  EvalReport r;
  r.states.push_back({0.0, 0.01, 0.9, 0.8});
  r.joints.push_back({JointType::prismatic, 0.02, std::nullopt});
  r.mean_chamfer = 0.01;
  const auto j = r.to_json();
  CHECK(j["joints"][0]["pivot_error"].is_null());
  CHECK(j["states"][0]["iou"] == 0.8);
  CHECK(r.to_table().find("prismatic") != std::string::npos);
}
