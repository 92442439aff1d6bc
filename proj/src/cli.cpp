#include "lfcal/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lfcal/dataio.hpp"
#include "lfcal/errors.hpp"
#include "lfcal/image_io.hpp"
#include "lfcal/lightfield.hpp"
#include "lfcal/optimizer.hpp"
#include "lfcal/simulator.hpp"
#include "lfcal/zhang.hpp"

namespace lfcal {

namespace {

namespace fs = std::filesystem;

struct CalibrateArgs {
  std::string observations;
  std::string output;
  bool no_intrinsics = false;
  bool no_distortion = false;
  bool fix_skew = false;
  int max_iters = 100;
  double tol = 1e-12;
};

struct ConfigArgs {
  std::string preset = "standard";
  std::string config;
  std::optional<std::uint64_t> seed;
};

struct SimulateArgs {
  ConfigArgs cfg;
  std::string output;
  std::string truth;
  std::optional<double> noise;
};

struct SweepArgs {
  ConfigArgs cfg;
  std::vector<double> sigmas{0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8};
  std::optional<int> trials;
  bool extended = false;
  std::string output;
  int threads = 1;
};

struct ImageArgs {
  std::string calibration;
  std::vector<std::string> images;
  std::string output;
  std::vector<double> target;
  double depth = 0.0;
};

int default_threads() {
  if (const char* env = std::getenv("LFCAL_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  auto* preset = cmd->add_option("--preset", a.preset, "Built-in configuration: standard, single or small")
                     ->check(CLI::IsMember({"standard", "single", "small"}));
  cmd->add_option("--config", a.config, "Simulation config file (JSON)")->excludes(preset);
  cmd->add_option("--seed", a.seed, "Random seed (overrides the config)");
}

SimConfig load_config(const ConfigArgs& a) {
  SimConfig cfg = a.config.empty() ? SimConfig::preset(a.preset) : read_sim_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

void print_report(std::ostream& out, const OptimizeReport& r) {
  out << std::setprecision(6);
  out << "initial RMS: " << r.initial_rms << " px\n";
  out << "final RMS:   " << r.final_rms << " px\n";
  out << "iterations:  " << r.iterations << " (" << to_string(r.termination_reason) << ")\n";
  out << "viewpoint  rms_px\n";
  for (std::size_t i = 0; i < r.per_viewpoint_rms.size(); ++i) {
    out << std::setw(9) << i << "  " << r.per_viewpoint_rms[i] << "\n";
  }
  out << "per-viewpoint RMS std: " << r.per_viewpoint_rms_std << " px\n";
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const ObservationSet obs = read_observations(a.observations);
  const InitialCalibration init = run_closed_form(obs, ClosedFormOptions{a.fix_skew});

  OptimizeOptions opts;
  opts.refine_intrinsics = !a.no_intrinsics;
  opts.refine_distortion = !a.no_distortion;
  opts.fix_skew = a.fix_skew;
  opts.max_iterations = a.max_iters;
  opts.cost_rel_tol = a.tol;
  const OptimizeResult res = optimize(init, obs, opts);

  print_report(out, res.report);
  if (res.report.termination_reason == TerminationReason::kMaxIterations) {
    err << "warning: stopped at the iteration limit before converging\n";
  }
  write_calibration(CalibrationResult{res.calibration, res.report}, a.output);
  return kExitOk;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg = load_config(a.cfg);
  if (a.noise) cfg.noise_sigma = *a.noise;
  cfg.validate();
  SimScene scene = generate_scene(cfg, cfg.seed);
  if (cfg.noise_sigma > 0.0) {
    scene.observations = add_noise(scene.observations, cfg.noise_sigma, noise_seed(cfg.seed));
  }
  // Format both outputs before writing either, so a failure leaves nothing behind.
  const std::string obs_text = format_observations(scene.observations);
  const std::string truth_text =
      a.truth.empty() ? std::string() : format_calibration(CalibrationResult{scene.truth, std::nullopt});
  write_file_atomic(a.output, obs_text);
  if (!a.truth.empty()) write_file_atomic(a.truth, truth_text);
  out << "wrote " << scene.observations.count() << " records (" << cfg.n_viewpoints()
      << " viewpoints, " << cfg.n_frames << " frames) to " << a.output << "\n";
  return kExitOk;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const SimConfig cfg = load_config(a.cfg);
  const int trials = a.trials.value_or(a.extended ? 100 : cfg.n_trials);
  if (trials < 1) throw ArgumentError("--trials must be at least 1");
  if (a.sigmas.empty()) throw ArgumentError("--sigmas must list at least one value");
  for (double s : a.sigmas) {
    if (!(s >= 0.0)) throw ArgumentError("noise levels must be non-negative");
  }
  const SweepReport report = run_noise_sweep(cfg, a.sigmas, trials, a.threads);
  const std::size_t runs = report.trials.size();
  if (report.failed > 0) {
    err << "warning: " << report.failed << " of " << runs << " calibration runs failed\n";
  }
  if (runs > 0 && static_cast<std::size_t>(report.failed) == runs) {
    throw NumericError("every trial failed");
  }
  write_sweep_csv(report, a.output);
  out << "wrote " << report.rows.size() << " rows to " << a.output << "\n";
  return kExitOk;
}

LightField load_light_field(const ImageArgs& a) {
  const CalibrationFileContents file = read_calibration(a.calibration);
  const Calibration& calib = file.result.calibration;
  if (static_cast<int>(a.images.size()) != calib.n_viewpoints()) {
    throw ValidationError("expected " + std::to_string(calib.n_viewpoints()) +
                          " images (one per viewpoint), got " + std::to_string(a.images.size()));
  }
  std::vector<Image> images;
  for (const auto& path : a.images) {
    images.push_back(read_image(path));
    const Image& first = images.front();
    const Image& last = images.back();
    if (last.width() != first.width() || last.height() != first.height() ||
        last.channels() != first.channels()) {
      throw ValidationError("image '" + path + "' does not match the size of '" + a.images.front() + "'");
    }
  }
  return LightField::from_calibration(calib, std::move(images));
}

int cmd_rectify(const ImageArgs& a, std::ostream& out) {
  const LightField lf = load_light_field(a);
  Intrinsics target = lf.views.front().intrinsics;
  if (!a.target.empty()) {
    if (a.target.size() != 5) throw ArgumentError("--target takes alpha,beta,gamma,u0,v0");
    target = {a.target[0], a.target[1], a.target[2], a.target[3], a.target[4]};
    if (!target.valid()) throw ArgumentError("--target focal lengths must be positive");
  }
  const LightField rect = rectify(lf, target);

  std::vector<std::pair<fs::path, std::string>> files;
  for (std::size_t i = 0; i < rect.views.size(); ++i) {
    const Image& img = rect.views[i].image;
    std::ostringstream name;
    name << "view_" << std::setw(3) << std::setfill('0') << i << (img.channels() == 1 ? ".pgm" : ".ppm");
    files.emplace_back(fs::path(a.output) / name.str(), encode_pnm(img));
  }
  fs::create_directories(a.output);
  for (const auto& [path, bytes] : files) write_file_atomic(path, bytes);
  out << "wrote " << files.size() << " rectified views to " << a.output << "\n";
  return kExitOk;
}

int cmd_refocus(const ImageArgs& a, std::ostream& out) {
  if (!(a.depth > 0.0)) throw ArgumentError("--depth must be positive");
  const LightField lf = load_light_field(a);
  const Image img = refocus(lf, a.depth);
  const double s = sharpness(img);
  write_image(img, a.output);
  out << std::setprecision(10) << "sharpness: " << s << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Camera-array calibration and light-field tools", "lfcal"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lfcal 0.1.0");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Closed form plus global optimization");
  calibrate->add_option("-i,--observations", cal.observations, "Observation file")->required();
  calibrate->add_option("-o,--output", cal.output, "Calibration output file")->required();
  calibrate->add_flag("--no-intrinsics", cal.no_intrinsics, "Keep closed-form intrinsics fixed");
  calibrate->add_flag("--no-distortion", cal.no_distortion, "Keep distortion at zero");
  calibrate->add_flag("--fix-skew", cal.fix_skew, "Constrain the skew to zero");
  calibrate->add_option("--max-iters", cal.max_iters, "Iteration limit")->check(CLI::PositiveNumber);
  calibrate->add_option("--tol", cal.tol, "Relative cost-change tolerance")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic observations");
  add_config_options(simulate, sim.cfg);
  simulate->add_option("-o,--output", sim.output, "Observation output file")->required();
  simulate->add_option("--truth", sim.truth, "Ground-truth calibration output file");
  simulate->add_option("--noise", sim.noise, "Pixel noise sigma")->check(CLI::NonNegativeNumber);

  SweepArgs sw;
  sw.threads = default_threads();
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo noise sweep over the three methods");
  add_config_options(sweep, sw.cfg);
  sweep->add_option("--sigmas", sw.sigmas, "Comma-separated noise levels")->delimiter(',');
  auto* trials = sweep->add_option("--trials", sw.trials, "Trials per noise level");
  sweep->add_flag("--extended", sw.extended, "Run 100 trials per noise level")->excludes(trials);
  sweep->add_option("-o,--output", sw.output, "CSV output file")->required();
  sweep->add_option("--threads", sw.threads, "Worker threads (default: $LFCAL_THREADS or 1)");

  ImageArgs rect;
  auto* rectify_cmd = app.add_subcommand("rectify", "Rectify every view onto a common camera");
  rectify_cmd->add_option("-c,--calibration", rect.calibration, "Calibration file")->required();
  rectify_cmd->add_option("--images", rect.images, "One PGM/PPM per viewpoint, in order")->required();
  rectify_cmd->add_option("--output-dir", rect.output, "Directory for the rectified views")->required();
  rectify_cmd->add_option("--target", rect.target, "Target intrinsics alpha,beta,gamma,u0,v0")->delimiter(',');

  ImageArgs ref;
  auto* refocus_cmd = app.add_subcommand("refocus", "Synthetic-aperture refocus at a depth");
  refocus_cmd->add_option("-c,--calibration", ref.calibration, "Calibration file")->required();
  refocus_cmd->add_option("--images", ref.images, "One PGM/PPM per viewpoint, in order")->required();
  refocus_cmd->add_option("--depth", ref.depth, "Focal plane depth in mm")->required();
  refocus_cmd->add_option("-o,--output", ref.output, "Refocused image output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*calibrate) return cmd_calibrate(cal, out, err);
    if (*simulate) return cmd_simulate(sim, out);
    if (*sweep) return cmd_sweep(sw, out, err);
    if (*rectify_cmd) return cmd_rectify(rect, out);
    if (*refocus_cmd) return cmd_refocus(ref, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lfcal
