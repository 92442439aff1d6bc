#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lfcal/dataio.hpp"
#include "lfcal/errors.hpp"
#include "lfcal/image_io.hpp"
#include "lfcal/lightfield.hpp"
#include "lfcal/optimizer.hpp"
#include "lfcal/simulator.hpp"
#include "lfcal/zhang.hpp"

namespace py = pybind11;
using namespace lfcal;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as float arrays of shape (h, w) or (h, w, 3).
Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ArgumentError("image array must be 2-D or 3-D");
  const int channels = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), channels);
  std::copy(a.data(), a.data() + a.size(), img.samples().begin());
  return img;
}

Array to_array(const Image& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() > 1) shape.push_back(img.channels());
  Array out(shape);
  std::copy(img.samples().begin(), img.samples().end(), out.mutable_data());
  return out;
}

std::vector<Image> to_images(const std::vector<Array>& arrays) {
  std::vector<Image> images;
  for (const auto& a : arrays) images.push_back(to_image(a));
  return images;
}

}  // namespace

PYBIND11_MODULE(_lfcal, m) {
  m.attr("__version__") = "0.1.0";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto argument = py::register_exception<ArgumentError>(m, "ArgumentError", error.ptr());
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", validation.ptr());
  auto numeric = py::register_exception<NumericError>(m, "NumericError", error.ptr());
  py::register_exception<EstimationError>(m, "EstimationError", numeric.ptr());
  py::register_exception<BehindCameraError>(m, "BehindCameraError", numeric.ptr());
  (void)argument;

  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init<>())
      .def(py::init([](double a, double b, double g, double u0, double v0) { return Intrinsics{a, b, g, u0, v0}; }),
           py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("u0"), py::arg("v0"))
      .def_readwrite("alpha", &Intrinsics::alpha)
      .def_readwrite("beta", &Intrinsics::beta)
      .def_readwrite("gamma", &Intrinsics::gamma)
      .def_readwrite("u0", &Intrinsics::u0)
      .def_readwrite("v0", &Intrinsics::v0)
      .def("matrix", &Intrinsics::matrix)
      .def("__repr__", [](const Intrinsics& i) {
        return py::str("Intrinsics(alpha={}, beta={}, gamma={}, u0={}, v0={})")
            .format(i.alpha, i.beta, i.gamma, i.u0, i.v0);
      });

  py::class_<Distortion>(m, "Distortion")
      .def(py::init<>())
      .def(py::init([](double k1, double k2, double p1, double p2) { return Distortion{k1, k2, p1, p2}; }),
           py::arg("k1"), py::arg("k2"), py::arg("p1"), py::arg("p2"))
      .def_readwrite("k1", &Distortion::k1)
      .def_readwrite("k2", &Distortion::k2)
      .def_readwrite("p1", &Distortion::p1)
      .def_readwrite("p2", &Distortion::p2);

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def_static("from_axis_angle", &RigidTransform::from_axis_angle, py::arg("axis_angle"), py::arg("translation"))
      .def_readwrite("rotation", &RigidTransform::rotation)
      .def_readwrite("translation", &RigidTransform::translation)
      .def("axis_angle", &RigidTransform::axis_angle)
      .def("inverse", &RigidTransform::inverse)
      .def("apply", &RigidTransform::apply);

  m.def("project", [](const Intrinsics& i, const Distortion& d, const RigidTransform& pose, const Point3& x) {
        return project(i, d, pose, x);
      }, py::arg("intrinsics"), py::arg("distortion"), py::arg("pose"), py::arg("point"));
  m.def("distort", &distort);
  m.def("undistort", &undistort);

  py::class_<BoardSpec>(m, "BoardSpec")
      .def(py::init([](int rows, int cols, double s) { return BoardSpec{rows, cols, s}; }), py::arg("rows"),
           py::arg("cols"), py::arg("spacing_mm"))
      .def_readwrite("rows", &BoardSpec::rows)
      .def_readwrite("cols", &BoardSpec::cols)
      .def_readwrite("spacing_mm", &BoardSpec::spacing_mm)
      .def("point_count", &BoardSpec::point_count);

  py::class_<ObservationSet>(m, "ObservationSet")
      .def(py::init<BoardSpec, int, int>())
      .def_property_readonly("board", &ObservationSet::board)
      .def_property_readonly("n_viewpoints", &ObservationSet::n_viewpoints)
      .def_property_readonly("n_frames", &ObservationSet::n_frames)
      .def_property_readonly("n_points", &ObservationSet::n_points)
      .def("count", py::overload_cast<>(&ObservationSet::count, py::const_))
      .def("get", &ObservationSet::at, py::arg("viewpoint"), py::arg("frame"), py::arg("point"))
      .def("set", &ObservationSet::set)
      .def("erase", &ObservationSet::erase);

  py::class_<ViewpointCalibration>(m, "ViewpointCalibration")
      .def(py::init<>())
      .def_readwrite("intrinsics", &ViewpointCalibration::intrinsics)
      .def_readwrite("distortion", &ViewpointCalibration::distortion)
      .def_readwrite("relative", &ViewpointCalibration::relative);

  py::class_<Calibration>(m, "Calibration")
      .def(py::init<>())
      .def_readwrite("viewpoints", &Calibration::viewpoints)
      .def_readwrite("frame_poses", &Calibration::frame_poses)
      .def_property_readonly("n_viewpoints", &Calibration::n_viewpoints)
      .def_property_readonly("n_frames", &Calibration::n_frames);

  py::class_<OptimizeReport>(m, "OptimizeReport")
      .def_readonly("initial_rms", &OptimizeReport::initial_rms)
      .def_readonly("final_rms", &OptimizeReport::final_rms)
      .def_readonly("per_viewpoint_rms", &OptimizeReport::per_viewpoint_rms)
      .def_readonly("per_viewpoint_rms_std", &OptimizeReport::per_viewpoint_rms_std)
      .def_readonly("iterations", &OptimizeReport::iterations)
      .def_property_readonly("termination_reason",
                             [](const OptimizeReport& r) { return std::string(to_string(r.termination_reason)); });

  py::class_<OptimizeOptions>(m, "OptimizeOptions")
      .def(py::init<>())
      .def_readwrite("refine_intrinsics", &OptimizeOptions::refine_intrinsics)
      .def_readwrite("refine_distortion", &OptimizeOptions::refine_distortion)
      .def_readwrite("fix_skew", &OptimizeOptions::fix_skew)
      .def_readwrite("max_iterations", &OptimizeOptions::max_iterations)
      .def_readwrite("cost_rel_tol", &OptimizeOptions::cost_rel_tol)
      .def_readwrite("gradient_tol", &OptimizeOptions::gradient_tol);

  m.def("closed_form", [](const ObservationSet& obs, bool fix_skew) {
        return run_closed_form(obs, ClosedFormOptions{fix_skew});
      }, py::arg("observations"), py::arg("fix_skew") = false);
  m.def("optimize", [](const Calibration& init, const ObservationSet& obs, const OptimizeOptions& opts) {
        const OptimizeResult r = optimize(init, obs, opts);
        return py::make_tuple(r.calibration, r.report);
      }, py::arg("initial"), py::arg("observations"), py::arg("options") = OptimizeOptions{},
      "Returns (calibration, report).");
  m.def("refine_independently", [](const Calibration& init, const ObservationSet& obs) {
        const OptimizeResult r = refine_independently(init, obs);
        return py::make_tuple(r.calibration, r.report);
      }, py::arg("initial"), py::arg("observations"));
  m.def("evaluate", &evaluate, py::arg("calibration"), py::arg("observations"));
  m.def("residuals", &residuals, py::arg("calibration"), py::arg("observations"));

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_static("preset", &SimConfig::preset)
      .def_readwrite("grid_cols", &SimConfig::grid_cols)
      .def_readwrite("grid_rows", &SimConfig::grid_rows)
      .def_readwrite("spacing_mm", &SimConfig::spacing_mm)
      .def_readwrite("width", &SimConfig::width)
      .def_readwrite("height", &SimConfig::height)
      .def_readwrite("intrinsics", &SimConfig::intrinsics)
      .def_readwrite("distortion", &SimConfig::distortion)
      .def_readwrite("n_frames", &SimConfig::n_frames)
      .def_readwrite("board", &SimConfig::board)
      .def_readwrite("noise_sigma", &SimConfig::noise_sigma)
      .def_readwrite("n_trials", &SimConfig::n_trials)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("rig_rotation_jitter_deg", &SimConfig::rig_rotation_jitter_deg)
      .def_readwrite("rig_translation_jitter_mm", &SimConfig::rig_translation_jitter_mm)
      .def("validate", &SimConfig::validate);

  m.def("generate_scene", [](const SimConfig& cfg, std::uint64_t seed) {
        SimScene s = generate_scene(cfg, seed);
        return py::make_tuple(std::move(s.truth), std::move(s.observations));
      }, py::arg("config"), py::arg("seed"), "Returns (ground_truth, noiseless_observations).");
  m.def("add_noise", &add_noise, py::arg("observations"), py::arg("sigma"), py::arg("seed"));
  m.def("noise_sweep_csv", [](const SimConfig& cfg, const std::vector<double>& sigmas, int trials, int threads) {
        SweepReport r;
        {
          py::gil_scoped_release release;
          r = run_noise_sweep(cfg, sigmas, trials, threads);
        }
        return format_sweep_csv(r);
      }, py::arg("config"), py::arg("sigmas"), py::arg("trials"), py::arg("threads") = 1);
  m.def("render_plane_views", [](const Calibration& truth, const Array& texture, double depth, int width,
                                 int height, double pitch) {
        const auto views = render_plane_views(truth, to_image(texture), depth, {width, height, pitch});
        std::vector<Array> out;
        for (const auto& v : views) out.push_back(to_array(v));
        return out;
      }, py::arg("truth"), py::arg("texture"), py::arg("depth_mm"), py::arg("width") = 640,
      py::arg("height") = 480, py::arg("texture_pitch_mm") = 1.0);

  m.def("rectify", [](const Calibration& calib, const std::vector<Array>& images, const Intrinsics& target) {
        const LightField lf = rectify(LightField::from_calibration(calib, to_images(images)), target);
        std::vector<Array> out;
        for (const auto& v : lf.views) out.push_back(to_array(v.image));
        return out;
      }, py::arg("calibration"), py::arg("images"), py::arg("target"));
  m.def("refocus", [](const Calibration& calib, const std::vector<Array>& images, double depth) {
        return to_array(refocus(LightField::from_calibration(calib, to_images(images)), depth));
      }, py::arg("calibration"), py::arg("images"), py::arg("depth_mm"));
  m.def("sharpness", [](const Array& img) { return sharpness(to_image(img)); });

  m.def("read_observations", &read_observations);
  m.def("write_observations", &write_observations);
  m.def("read_calibration", [](const std::filesystem::path& p) {
        const CalibrationFileContents c = read_calibration(p);
        return py::make_tuple(c.result.calibration, c.result.report);
      }, "Returns (calibration, report or None).");
  m.def("write_calibration", [](const Calibration& c, const std::optional<OptimizeReport>& rep,
                                const std::filesystem::path& p) { write_calibration({c, rep}, p); },
        py::arg("calibration"), py::arg("report"), py::arg("path"));
  m.def("read_image", [](const std::filesystem::path& p) { return to_array(read_image(p)); });
  m.def("write_image", [](const Array& a, const std::filesystem::path& p) { write_image(to_image(a), p); });
}
