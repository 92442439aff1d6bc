#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "lfcal/geometry.hpp"

namespace lfcal {

struct ViewpointCalibration {
  Intrinsics intrinsics;
  Distortion distortion;
  /// Pose of this viewpoint relative to viewpoint 0 (identity for 0).
  RigidTransform relative;
};

/// Full camera-array model: per-viewpoint intrinsics, distortion and
/// relative pose, plus the board pose in viewpoint 0's frame for each frame.
struct Calibration {
  std::vector<ViewpointCalibration> viewpoints;
  std::vector<RigidTransform> frame_poses;

  int n_viewpoints() const { return static_cast<int>(viewpoints.size()); }
  int n_frames() const { return static_cast<int>(frame_poses.size()); }

  /// Board pose of `frame` in `viewpoint`'s camera frame.
  RigidTransform world_pose(int viewpoint, int frame) const {
    return compose_world_pose(viewpoints[viewpoint].relative,
                              frame_poses[frame]);
  }
};

/// Output of the closed form: distortion zeroed, viewpoint 0's relative
/// pose exactly identity.
using InitialCalibration = Calibration;

enum class TerminationReason { kCostConverged, kGradientConverged, kMaxIterations };

std::string_view to_string(TerminationReason reason);
/// Throws ParseError for unknown names.
TerminationReason termination_reason_from_string(std::string_view name);

struct OptimizeReport {
  double initial_rms = 0.0;
  double final_rms = 0.0;
  std::vector<double> per_viewpoint_rms;
  /// Population standard deviation of per_viewpoint_rms.
  double per_viewpoint_rms_std = 0.0;
  int iterations = 0;
  TerminationReason termination_reason = TerminationReason::kMaxIterations;
};

struct CalibrationResult {
  Calibration calibration;
  std::optional<OptimizeReport> report;
};

}  // namespace lfcal
