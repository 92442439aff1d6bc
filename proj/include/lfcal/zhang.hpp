#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lfcal/calibration.hpp"
#include "lfcal/homography.hpp"
#include "lfcal/observations.hpp"

namespace lfcal {

struct ClosedFormOptions {
  /// Constrain the skew to zero. Lowers the frame requirement from 3 to 2.
  bool fix_skew = false;
};

/// Closed-form result for a single viewpoint.
struct ViewpointInit {
  Intrinsics intrinsics;
  /// Board pose in this viewpoint's frame, per frame. Empty for frames the
  /// viewpoint did not observe or whose homography could not be estimated.
  std::vector<std::optional<RigidTransform>> world_poses;
};

/// Planar closed form for the intrinsic matrix from board-to-image
/// homographies (each contributes two linear constraints on
/// B = A^-T A^-1). Throws NumericError on rank deficiency or when the
/// extracted focal lengths are not real.
Intrinsics intrinsics_from_homographies(std::span<const Homography> homographies,
                                        bool fix_skew = false);

/// Board pose from a homography and known intrinsics. The sign is chosen so
/// the board origin lies in front of the camera and the rotation is
/// projected onto SO(3).
RigidTransform extrinsics_from_homography(const Intrinsics& intr,
                                          const Homography& h);

/// Component-wise median of the translations and of the axis-angle vectors.
/// Throws ArgumentError for an empty list.
RigidTransform aggregate_relative_poses(std::span<const RigidTransform> per_frame);

/// Homographies, intrinsics and per-frame extrinsics of one viewpoint.
ViewpointInit calibrate_viewpoint(const ObservationSet& obs, int viewpoint,
                                  const ClosedFormOptions& opts = {});

/// Relative pose of `viewpoint` against viewpoint 0 for every frame both
/// have a closed-form pose for, in frame order.
std::vector<RigidTransform> per_frame_relative_poses(const ViewpointInit& viewpoint,
                                                     const ViewpointInit& reference);

/// Closed-form calibration of the whole array: per-viewpoint closed forms,
/// relative poses by median over frames, zero distortion, frame poses from
/// viewpoint 0.
InitialCalibration run_closed_form(const ObservationSet& obs,
                                   const ClosedFormOptions& opts = {});

}  // namespace lfcal
