#include "lfcal/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Geometry>

#include "lfcal/dataio.hpp"
#include "lfcal/errors.hpp"
#include "lfcal/optimizer.hpp"
#include "lfcal/zhang.hpp"

namespace lfcal {

namespace {

constexpr int kMaxPoseAttempts = 1000;
constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Mat3 rotation_z(double angle) {
  return axis_angle_to_matrix(Vec3{0.0, 0.0, angle});
}

bool board_visible(const SimConfig& cfg, const GroundTruth& truth,
                   const RigidTransform& frame_pose,
                   const std::vector<Point2>& model) {
  for (const auto& vp : truth.viewpoints) {
    const RigidTransform world = compose_world_pose(vp.relative, frame_pose);
    for (const auto& m : model) {
      const Vec3 pc = world.apply({m.x(), m.y(), 0.0});
      if (!(pc.z() > 0.0)) return false;
      const Point2 p = project(vp.intrinsics, vp.distortion, world, {m.x(), m.y(), 0.0});
      if (p.x() < 0.0 || p.y() < 0.0 || p.x() > cfg.width - 1 ||
          p.y() > cfg.height - 1) {
        return false;
      }
    }
  }
  return true;
}

double sample_wrapped(const Image& tex, double x, double y, int c) {
  const int w = tex.width();
  const int h = tex.height();
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double fx = x - fx0;
  const double fy = y - fy0;
  auto wrap = [](long v, int n) { return static_cast<int>(((v % n) + n) % n); };
  const int x0 = wrap(static_cast<long>(fx0), w);
  const int y0 = wrap(static_cast<long>(fy0), h);
  const int x1 = (x0 + 1) % w;
  const int y1 = (y0 + 1) % h;
  const double top = (1.0 - fx) * tex.at(x0, y0, c) + fx * tex.at(x1, y0, c);
  const double bottom = (1.0 - fx) * tex.at(x0, y1, c) + fx * tex.at(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / v.size();
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / (v.size() - 1));
}

void fill_errors(TrialRecord& rec, const Intrinsics& est, const Intrinsics& truth) {
  rec.alpha_rel_error = std::abs(est.alpha - truth.alpha) / truth.alpha;
  rec.beta_rel_error = std::abs(est.beta - truth.beta) / truth.beta;
  rec.u0_abs_error = std::abs(est.u0 - truth.u0);
  rec.v0_abs_error = std::abs(est.v0 - truth.v0);
}

std::vector<TrialRecord> run_trial(const SimConfig& cfg, double sigma, int trial) {
  std::vector<TrialRecord> out;
  for (auto m : {SweepMethod::kClosedForm, SweepMethod::kIndependent, SweepMethod::kGlobal}) {
    TrialRecord rec;
    rec.sigma = sigma;
    rec.trial = trial;
    rec.method = m;
    out.push_back(rec);
  }

  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
  SimScene scene;
  ObservationSet noisy;
  InitialCalibration init;
  try {
    scene = generate_scene(cfg, seed);
    noisy = add_noise(scene.observations, sigma, noise_seed(seed));
    init = run_closed_form(noisy);
    const OptimizeReport rep = evaluate(init, noisy);
    fill_errors(out[0], init.viewpoints[0].intrinsics, scene.truth.viewpoints[0].intrinsics);
    out[0].rms_px = rep.final_rms;
    out[0].per_viewpoint_rms_std = rep.per_viewpoint_rms_std;
    out[0].ok = true;
  } catch (const Error&) {
    return out;
  }

  const auto run = [&](TrialRecord& rec, auto&& method) {
    try {
      const OptimizeResult res = method(init, noisy, OptimizeOptions{});
      fill_errors(rec, res.calibration.viewpoints[0].intrinsics,
                  scene.truth.viewpoints[0].intrinsics);
      rec.rms_px = res.report.final_rms;
      rec.per_viewpoint_rms_std = res.report.per_viewpoint_rms_std;
      rec.ok = true;
    } catch (const Error&) {
      rec.ok = false;
    }
  };
  run(out[1], refine_independently);
  run(out[2], optimize);
  return out;
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("simulation config: " + msg); };
  if (grid_cols < 1 || grid_rows < 1) fail("grid counts must be >= 1");
  if (!(spacing_mm > 0.0)) fail("spacing must be positive");
  if (width < 2 || height < 2) fail("resolution must be at least 2 x 2");
  if (!intrinsics.valid()) fail("intrinsics need positive focal lengths");
  if (n_frames < 1) fail("n_frames must be >= 1");
  if (board.rows < 2 || board.cols < 2 || !(board.spacing_mm > 0.0)) {
    fail("board must be at least 2 x 2 with positive spacing");
  }
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (n_trials < 1) fail("n_trials must be >= 1");
  if (!(rig_rotation_jitter_deg >= 0.0) || !(rig_translation_jitter_mm >= 0.0)) {
    fail("rig jitter must be >= 0");
  }
  if (!(min_distance_mm > 0.0) || !(max_distance_mm >= min_distance_mm)) {
    fail("board distance range must be positive and ordered");
  }
  if (!(max_tilt_deg >= 0.0) || !(max_tilt_deg < 90.0)) fail("max tilt must be in [0, 90)");
}

SimConfig SimConfig::standard() { return SimConfig{}; }

SimConfig SimConfig::single_camera() {
  SimConfig cfg;
  cfg.grid_cols = 1;
  cfg.grid_rows = 1;
  return cfg;
}

SimConfig SimConfig::small() {
  SimConfig cfg;
  cfg.grid_cols = 3;
  cfg.grid_rows = 3;
  cfg.n_frames = 5;
  return cfg;
}

SimConfig SimConfig::preset(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "single") return single_camera();
  if (name == "small") return small();
  throw ArgumentError("unknown preset '" + name + "' (expected standard, single or small)");
}

std::uint64_t noise_seed(std::uint64_t scene_seed) {
  return splitmix64(scene_seed ^ 0xA5A5A5A5DEADBEEFULL);
}

SimScene generate_scene(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  GroundTruth truth;
  for (int row = 0; row < cfg.grid_rows; ++row) {
    for (int col = 0; col < cfg.grid_cols; ++col) {
      ViewpointCalibration vp{cfg.intrinsics, cfg.distortion, {}};
      vp.relative.translation = {col * cfg.spacing_mm, row * cfg.spacing_mm, 0.0};
      if (!truth.viewpoints.empty()) {
        if (cfg.rig_rotation_jitter_deg > 0.0) {
          const Vec3 r{normal(rng), normal(rng), normal(rng)};
          vp.relative.rotation = axis_angle_to_matrix(r * cfg.rig_rotation_jitter_deg * kDeg);
        }
        if (cfg.rig_translation_jitter_mm > 0.0) {
          vp.relative.translation +=
              cfg.rig_translation_jitter_mm * Vec3{normal(rng), normal(rng), normal(rng)};
        }
      }
      truth.viewpoints.push_back(vp);
    }
  }

  // Board poses are drawn around the rig's centre.
  Vec3 rig_centre = Vec3::Zero();
  for (const auto& vp : truth.viewpoints) rig_centre += vp.relative.inverse().translation;
  rig_centre /= static_cast<double>(truth.viewpoints.size());

  const auto model = cfg.board.model_points();
  const Vec3 board_centre{(cfg.board.cols - 1) * cfg.board.spacing_mm / 2.0,
                          (cfg.board.rows - 1) * cfg.board.spacing_mm / 2.0, 0.0};
  for (int j = 0; j < cfg.n_frames; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPoseAttempts && !placed; ++attempt) {
      const double distance =
          cfg.min_distance_mm + (cfg.max_distance_mm - cfg.min_distance_mm) * unit(rng);
      const double tilt_axis = 2.0 * std::numbers::pi * unit(rng);
      const double tilt = cfg.max_tilt_deg * kDeg * unit(rng);
      const double in_plane = 2.0 * std::numbers::pi * unit(rng);
      const double ox = (2.0 * unit(rng) - 1.0) * 0.1 * distance;
      const double oy = (2.0 * unit(rng) - 1.0) * 0.07 * distance;

      const Mat3 rot =
          axis_angle_to_matrix(tilt * Vec3{std::cos(tilt_axis), std::sin(tilt_axis), 0.0}) *
          rotation_z(in_plane);
      const Vec3 centre = rig_centre + Vec3{ox, oy, distance};
      const RigidTransform pose{rot, centre - rot * board_centre};
      if (board_visible(cfg, truth, pose, model)) {
        truth.frame_poses.push_back(pose);
        placed = true;
      }
    }
    if (!placed) {
      throw ValidationError(
          "simulation config: could not place the board inside every view "
          "after 1000 attempts; use a wider field of view or a nearer board");
    }
  }

  ObservationSet obs(cfg.board, cfg.n_viewpoints(), cfg.n_frames);
  for (int i = 0; i < cfg.n_viewpoints(); ++i) {
    const auto& vp = truth.viewpoints[i];
    for (int j = 0; j < cfg.n_frames; ++j) {
      const RigidTransform world = truth.world_pose(i, j);
      for (int k = 0; k < cfg.board.point_count(); ++k) {
        obs.set(i, j, k,
                project(vp.intrinsics, vp.distortion, world,
                        {model[k].x(), model[k].y(), 0.0}, {i, j, k}));
      }
    }
  }
  return {std::move(truth), std::move(obs)};
}

ObservationSet add_noise(const ObservationSet& obs, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ArgumentError("noise sigma must be >= 0");
  ObservationSet out = obs;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < obs.n_viewpoints(); ++i) {
    for (int j = 0; j < obs.n_frames(); ++j) {
      for (int k = 0; k < obs.n_points(); ++k) {
        const auto& p = obs.at(i, j, k);
        if (!p) continue;
        const double dx = normal(rng);
        const double dy = normal(rng);
        out.set(i, j, k, *p + sigma * Vec2{dx, dy});
      }
    }
  }
  return out;
}

std::string_view to_string(SweepMethod method) {
  switch (method) {
    case SweepMethod::kClosedForm:
      return "closed-form";
    case SweepMethod::kIndependent:
      return "independent";
    case SweepMethod::kGlobal:
      return "global";
  }
  return "unknown";
}

double SweepReport::mean(double sigma, SweepMethod method, const std::string& metric) const {
  for (const auto& row : rows) {
    if (row.sigma == sigma && row.method == method && row.metric == metric) return row.mean;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

SweepReport run_noise_sweep(const SimConfig& cfg, const std::vector<double>& sigmas,
                            int trials, int threads) {
  cfg.validate();
  if (sigmas.empty()) throw ArgumentError("noise sweep needs at least one sigma");
  if (trials < 1) throw ArgumentError("noise sweep needs at least one trial");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw ArgumentError("noise sigmas must be >= 0");
  }

  std::vector<double> levels = sigmas;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  const std::size_t n_tasks = levels.size() * static_cast<std::size_t>(trials);
  std::vector<std::vector<TrialRecord>> results(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      results[t] = run_trial(cfg, levels[t / trials], static_cast<int>(t % trials));
    }
  };
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(n_tasks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  SweepReport report;
  for (auto& r : results) {
    for (auto& rec : r) {
      if (!rec.ok) ++report.failed;
      report.trials.push_back(rec);
    }
  }

  for (double sigma : levels) {
    for (auto method : {SweepMethod::kClosedForm, SweepMethod::kIndependent, SweepMethod::kGlobal}) {
      std::vector<std::vector<double>> values(sweep_metrics().size());
      for (const auto& rec : report.trials) {
        if (rec.sigma != sigma || rec.method != method || !rec.ok) continue;
        values[0].push_back(rec.alpha_rel_error);
        values[1].push_back(rec.beta_rel_error);
        values[2].push_back(rec.u0_abs_error);
        values[3].push_back(rec.v0_abs_error);
        values[4].push_back(rec.rms_px);
      }
      for (std::size_t m = 0; m < sweep_metrics().size(); ++m) {
        report.rows.push_back({sigma, method, sweep_metrics()[m], mean_of(values[m]),
                               std_of(values[m]), static_cast<int>(values[m].size())});
      }
    }
  }
  return report;
}

std::string format_sweep_csv(const SweepReport& report) {
  // Shortest representation that reads back to the same double.
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::ostringstream out;
  out << "sigma,method,metric,mean,std,n_trials\n";
  for (const auto& row : report.rows) {
    out << num(row.sigma) << ',' << to_string(row.method) << ',' << row.metric << ',';
    if (row.n_trials > 0) {
      out << num(row.mean) << ',' << num(row.std);
    } else {
      out << "nan,nan";
    }
    out << ',' << row.n_trials << '\n';
  }
  return out.str();
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, format_sweep_csv(report));
}

std::vector<Image> render_plane_views(const GroundTruth& truth, const Image& texture,
                                      double depth_mm, const PlaneRenderOptions& opts) {
  if (!(depth_mm > 0.0)) throw ArgumentError("plane depth must be positive");
  if (texture.empty()) throw ArgumentError("texture must not be empty");
  if (!(opts.texture_pitch_mm > 0.0)) throw ArgumentError("texture pitch must be positive");

  std::vector<Image> views;
  for (const auto& vp : truth.viewpoints) {
    Image img(opts.width, opts.height, texture.channels());
    const Mat3 rt = vp.relative.rotation.transpose();
    const Vec3 centre = -(rt * vp.relative.translation);
    for (int y = 0; y < opts.height; ++y) {
      for (int x = 0; x < opts.width; ++x) {
        Vec2 n;
        try {
          n = undistort(vp.distortion, vp.intrinsics.to_normalized({x, y}));
        } catch (const NumericError&) {
          continue;
        }
        const Vec3 ray = rt * n.homogeneous();
        if (!(ray.z() > 0.0)) continue;
        const double s = (depth_mm - centre.z()) / ray.z();
        if (!(s > 0.0)) continue;
        const Vec3 p = centre + s * ray;
        const double tx = p.x() / opts.texture_pitch_mm + 0.5 * (texture.width() - 1);
        const double ty = p.y() / opts.texture_pitch_mm + 0.5 * (texture.height() - 1);
        for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = sample_wrapped(texture, tx, ty, c);
      }
    }
    views.push_back(std::move(img));
  }
  return views;
}

}  // namespace lfcal
