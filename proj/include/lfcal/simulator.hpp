#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lfcal/calibration.hpp"
#include "lfcal/lightfield.hpp"
#include "lfcal/observations.hpp"

namespace lfcal {

/// Synthetic camera-array experiment. Viewpoint i = row * grid_cols + col
/// has relative translation (col * spacing, row * spacing, 0) and identity
/// rotation unless the rig jitter terms are non-zero.
struct SimConfig {
  int grid_cols = 5;
  int grid_rows = 5;
  double spacing_mm = 10.0;
  int width = 640;
  int height = 480;
  Intrinsics intrinsics{700.0, 700.0, 0.0, 320.0, 240.0};
  Distortion distortion{};
  int n_frames = 11;
  BoardSpec board{7, 10, 20.0};
  double noise_sigma = 0.0;
  int n_trials = 20;
  std::uint64_t seed = 0;

  /// Standard deviation of each relative axis-angle component (degrees) and
  /// of each relative translation component (mm). Zero keeps the rig planar.
  double rig_rotation_jitter_deg = 0.0;
  double rig_translation_jitter_mm = 0.0;

  /// Board pose sampling ranges.
  double min_distance_mm = 600.0;
  double max_distance_mm = 1200.0;
  double max_tilt_deg = 35.0;

  int n_viewpoints() const { return grid_cols * grid_rows; }

  /// Throws ValidationError.
  void validate() const;

  /// 5 x 5 viewpoints, 10 mm apart, 640 x 480, alpha = beta = 700,
  /// (u0, v0) = (320, 240), 11 frames of a 7 x 10 board at 20 mm.
  static SimConfig standard();
  /// One camera, otherwise as standard().
  static SimConfig single_camera();
  /// 3 x 3 viewpoints, 5 frames; a quick configuration for tests.
  static SimConfig small();
  /// Looks up "standard", "single" or "small". Throws ArgumentError.
  static SimConfig preset(const std::string& name);
};

using GroundTruth = Calibration;

struct SimScene {
  GroundTruth truth;
  ObservationSet observations;
};

/// Samples board poses (distance, tilt axis, tilt angle, in-plane rotation,
/// lateral offset) until every corner projects inside every view, then
/// projects noiselessly. Deterministic in `seed`. Throws ValidationError
/// when no in-view pose is found within 1000 attempts.
SimScene generate_scene(const SimConfig& cfg, std::uint64_t seed);

/// Adds sigma * N(0, 1) to every coordinate, in observation order.
/// Deterministic in `seed`.
ObservationSet add_noise(const ObservationSet& obs, double sigma, std::uint64_t seed);

/// Seed for the noise of a trial, derived from its scene seed.
std::uint64_t noise_seed(std::uint64_t scene_seed);

enum class SweepMethod { kClosedForm, kIndependent, kGlobal };
std::string_view to_string(SweepMethod method);

/// Errors of one calibration method in one trial, measured on viewpoint 0.
struct TrialRecord {
  double sigma = 0.0;
  int trial = 0;
  SweepMethod method = SweepMethod::kGlobal;
  bool ok = false;
  double alpha_rel_error = 0.0;
  double beta_rel_error = 0.0;
  double u0_abs_error = 0.0;
  double v0_abs_error = 0.0;
  double rms_px = 0.0;
  double per_viewpoint_rms_std = 0.0;
};

struct SweepRow {
  double sigma = 0.0;
  SweepMethod method = SweepMethod::kGlobal;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int n_trials = 0;
};

struct SweepReport {
  std::vector<TrialRecord> trials;  // sorted by (sigma, trial, method)
  std::vector<SweepRow> rows;       // sorted by (sigma, method, metric)
  int failed = 0;                   // failed (trial, method) runs

  /// Mean of `metric` for (sigma, method); NaN when absent.
  double mean(double sigma, SweepMethod method, const std::string& metric) const;
};

inline const std::vector<std::string>& sweep_metrics() {
  static const std::vector<std::string> names{
      "alpha_rel_error", "beta_rel_error", "u0_abs_error", "v0_abs_error", "rms_px"};
  return names;
}

/// Runs every (sigma, trial) with scene seed cfg.seed + trial, so all noise
/// levels share scenes and standard-normal draws. Each trial is calibrated
/// by the closed form, independent refinement and global optimization.
/// `threads` <= 0 uses the hardware concurrency.
SweepReport run_noise_sweep(const SimConfig& cfg, const std::vector<double>& sigmas,
                            int trials, int threads = 1);

/// CSV with header "sigma,method,metric,mean,std,n_trials".
std::string format_sweep_csv(const SweepReport& report);
void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path);

struct PlaneRenderOptions {
  int width = 640;
  int height = 480;
  /// Millimetres per texture pixel. The texture is centred on viewpoint 0's
  /// optical axis and tiles the plane.
  double texture_pitch_mm = 1.0;
};

/// Renders the textured plane Z = depth (viewpoint 0 frame) through every
/// viewpoint of `truth`, distortion included, with bilinear sampling.
std::vector<Image> render_plane_views(const GroundTruth& truth, const Image& texture,
                                      double depth_mm,
                                      const PlaneRenderOptions& opts = {});

}  // namespace lfcal
