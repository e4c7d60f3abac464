#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "articfit/error.hpp"
#include "articfit/io.hpp"
#include "articfit/joint_init.hpp"
#include "articfit/kinematics.hpp"
#include "articfit/metrics.hpp"
#include "articfit/pipeline.hpp"
#include "articfit/prior.hpp"
#include "articfit/synth.hpp"

namespace py = pybind11;
using namespace articfit;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Points& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("expected an (N, 3) array of points");
  const auto r = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

// Grids cross as (res, res, res) arrays indexed [z, y, x] (x fastest in memory).
py::array_t<double> grid_to_numpy(const VoxelGrid& g) {
  const py::ssize_t r = g.resolution();
  py::array_t<double> out({r, r, r});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

VoxelGrid grid_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2)) {
    throw py::value_error("expected a cubic (res, res, res) array");
  }
  VoxelGrid g(static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), g.values().begin());
  return g;
}

py::array_t<double> latent_to_numpy(const LatentGrid& z) {
  py::array_t<double> out({py::ssize_t{kLatentRes}, py::ssize_t{kLatentRes}, py::ssize_t{kLatentRes}});
  std::copy(z.values.begin(), z.values.end(), out.mutable_data());
  return out;
}

LatentGrid latent_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.size() != static_cast<py::ssize_t>(kLatentCells)) throw py::value_error("expected a 16^3 latent");
  LatentGrid z;
  std::copy(a.data(), a.data() + a.size(), z.values.begin());
  return z;
}

std::vector<PointPair> to_pairs(const Points& src, const Points& dst) {
  const auto s = to_points(src), d = to_points(dst);
  if (s.size() != d.size()) throw py::value_error("src and dst must have the same length");
  std::vector<PointPair> pairs(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) pairs[i] = {s[i], d[i], 0, 1};
  return pairs;
}

py::dict scene_to_dict(const GroundTruthScene& scene) {
  py::dict d;
  py::list posed, posed_disk, parts;
  for (const auto& g : scene.posed) posed.append(grid_to_numpy(g));
  for (const auto& g : scene.posed_with_disk) posed_disk.append(grid_to_numpy(g));
  for (const auto& g : scene.parts_rest) parts.append(grid_to_numpy(g));
  d["kind"] = std::string(to_string(scene.spec.kind));
  d["joints"] = scene.joints;
  d["thetas"] = scene.thetas;
  d["body_rest"] = grid_to_numpy(scene.body_rest);
  d["parts_rest"] = parts;
  d["posed"] = posed;
  d["posed_with_disk"] = posed_disk;
  return d;
}

SceneSpec scene_spec(const std::string& kind, int num_states, std::uint64_t seed) {
  SceneSpec spec;
  spec.kind = object_kind_from_string(kind);
  spec.num_states = num_states;
  spec.seed = seed;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Training-free articulated object reconstruction: kinematics, joint estimation, metrics and the "
            "optimize/refine/evaluate pipeline on synthetic scenes.";

  static py::exception<Error> error(m, "ArticfitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::enum_<JointType>(m, "JointType")
      .value("revolute", JointType::revolute)
      .value("prismatic", JointType::prismatic);

  py::class_<JointParams>(m, "JointParams")
      .def(py::init([](JointType type, const Vec3& axis, const Vec3& pivot) {
             JointParams j{type, axis, pivot};
             normalize_joint(j);
             return j;
           }),
           py::arg("type"), py::arg("axis"), py::arg("pivot") = Vec3::Zero())
      .def_readwrite("type", &JointParams::type)
      .def_readwrite("axis", &JointParams::axis)
      .def_readwrite("pivot", &JointParams::pivot)
      .def("__repr__", [](const JointParams& j) {
        return "JointParams(" + std::string(to_string(j.type)) + ", axis=[" + std::to_string(j.axis.x()) + ", " +
               std::to_string(j.axis.y()) + ", " + std::to_string(j.axis.z()) + "])";
      });

  m.def("inverse_transform", [](const Vec3& c, const JointParams& j, double theta) {
    return inverse_transform(c, j, {theta});
  }, py::arg("point"), py::arg("joint"), py::arg("theta"), "Maps a posed point back to the part's rest frame.");
  m.def("forward_transform", [](const Vec3& c, const JointParams& j, double theta) {
    return forward_transform(c, j, {theta});
  }, py::arg("point"), py::arg("joint"), py::arg("theta"), "Moves a rest-frame point to the posed frame.");

  m.def("axis_error", &axis_error, py::arg("a_p"), py::arg("a_g"), "Angle between axes up to sign, radians.");
  m.def("pivot_error", &pivot_error, py::arg("a_p"), py::arg("x_p"), py::arg("a_g"), py::arg("x_g"),
        "Shortest distance between the predicted and true axis lines.");
  m.def("chamfer", [](const Points& a, const Points& b) { return chamfer(to_points(a), to_points(b)); },
        py::arg("a"), py::arg("b"), "Symmetric mean nearest-neighbour distance of two (N, 3) point sets.");
  m.def("fscore", [](const Points& a, const Points& b, double tau) {
    return fscore(to_points(a), to_points(b), tau);
  }, py::arg("a"), py::arg("b"), py::arg("tau") = 0.05, "F-score at distance threshold tau.");
  m.def("iou", [](const py::array_t<double>& a, const py::array_t<double>& b, double threshold) {
    return iou(grid_from_numpy(a), grid_from_numpy(b), threshold);
  }, py::arg("a"), py::arg("b"), py::arg("threshold") = 0.5, "Voxel IoU of two occupancy grids.");

  m.def("encode", [](const py::array_t<double>& x) { return latent_to_numpy(encode(grid_from_numpy(x))); },
        py::arg("grid"), "4^3 average pooling of a 64^3 grid to a 16^3 latent.");
  m.def("decode", [](const py::array_t<double>& z) { return grid_to_numpy(decode(latent_from_numpy(z))); },
        py::arg("latent"), "Nearest-neighbour upsampling of a 16^3 latent, clamped to [0, 1].");

  py::class_<InitEstimate>(m, "InitEstimate")
      .def_readonly("joint", &InitEstimate::joint)
      .def_readonly("thetas", &InitEstimate::thetas)
      .def_readonly("residual", &InitEstimate::residual)
      .def_readonly("inlier_count", &InitEstimate::inlier_count);
  m.def("estimate_revolute", [](const Points& src, const Points& dst) {
    return estimate_revolute(to_pairs(src, dst));
  }, py::arg("src"), py::arg("dst"), "Rotation about an axis line fitted to matched (N, 3) point sets.");
  m.def("estimate_prismatic", [](const Points& src, const Points& dst) {
    return estimate_prismatic(to_pairs(src, dst));
  }, py::arg("src"), py::arg("dst"), "Translation axis and distance fitted to matched (N, 3) point sets.");

  m.def("generate_scene", [](const std::string& kind, int num_states, std::uint64_t seed) {
    return scene_to_dict(generate(scene_spec(kind, num_states, seed)));
  }, py::arg("kind") = "box_lid", py::arg("num_states") = 6, py::arg("seed") = 0,
        "Synthetic articulated scene: rest and posed grids ([z, y, x] arrays), joints and thetas.");

  m.def("reconstruct", [](const std::string& kind, int num_states, std::uint64_t seed, const std::string& config_json,
                          double init_angle, double init_offset) {
    const GroundTruthScene scene = generate(scene_spec(kind, num_states, seed));
    const RunConfig config = run_config_from_json(Json::parse(config_json.empty() ? "{}" : config_json));
    std::vector<JointParams> joints;
    for (std::size_t j = 0; j < scene.joints.size(); ++j) {
      joints.push_back(perturb_joint(scene.joints[j], init_angle, init_offset, seed * 31 + j));
    }
    PipelineResult result;
    {
      py::gil_scoped_release release;
      const OracleDenoiser prior = make_prior(scene, config);
      const ArticulatedModel init = initial_model(prior, joints, scene.thetas, !config.optim.optimize_states,
                                                  config.init);
      result = run_pipeline(scene, init, config);
    }
    py::dict out;
    out["report"] = py::module_::import("json").attr("loads")(result.report.to_json().dump());
    std::vector<JointParams> fitted;
    for (const auto& part : result.model.parts) fitted.push_back(part.joint);
    out["joints"] = fitted;
    out["states"] = result.model.states;
    out["occupancy"] = grid_to_numpy(result.refined.cleaned);
    return out;
  }, py::arg("kind") = "box_lid", py::arg("num_states") = 6, py::arg("seed") = 0, py::arg("config_json") = "",
        py::arg("init_angle") = 0.17453292519943295, py::arg("init_offset") = 0.05,
        "Synthesizes a scene, perturbs its joints, and runs optimize -> refine -> evaluate. `config_json` is a "
        "run configuration document (unknown keys are rejected).");

  m.attr("__version__") = "0.1.0";
}
