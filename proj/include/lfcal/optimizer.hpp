#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "lfcal/calibration.hpp"
#include "lfcal/observations.hpp"

namespace lfcal {

struct OptimizeOptions {
  bool refine_intrinsics = true;
  bool refine_distortion = true;
  /// Keep gamma at its initial value.
  bool fix_skew = false;
  int max_iterations = 100;
  double cost_rel_tol = 1e-12;
  double gradient_tol = 1e-10;
  double damping_init = 1e-3;
  /// Central differences instead of the analytic Jacobian (debugging).
  bool numeric_jacobian = false;

  /// Throws ArgumentError unless tolerances are positive and
  /// max_iterations >= 1.
  void validate() const;
};

/// Column layout of the optimization vector. Per viewpoint i, in order:
/// intrinsics (alpha, beta, [gamma,] u0, v0) if refined, distortion
/// (k1, k2, p1, p2) if refined, relative pose (axis-angle, translation) for
/// i >= 1. Then per frame: viewpoint-0 board pose (axis-angle, translation).
class ParameterLayout {
 public:
  static constexpr int kDistortionSize = 4;
  static constexpr int kPoseSize = 6;

  ParameterLayout(int n_viewpoints, int n_frames, const OptimizeOptions& opts);

  int size() const { return size_; }
  int n_viewpoints() const { return n_viewpoints_; }
  int n_frames() const { return n_frames_; }
  bool fix_skew() const { return fix_skew_; }

  /// Offsets are -1 for blocks not present in the layout.
  int intrinsics_offset(int viewpoint) const { return intrinsics_[viewpoint]; }
  int intrinsics_size() const { return fix_skew_ ? 4 : 5; }
  int distortion_offset(int viewpoint) const { return distortion_[viewpoint]; }
  int relative_offset(int viewpoint) const { return relative_[viewpoint]; }
  int frame_offset(int frame) const { return frames_[frame]; }

  Eigen::VectorXd pack(const Calibration& calib) const;
  /// Blocks absent from the layout (and gamma when skew is fixed) are taken
  /// from `fixed`.
  Calibration unpack(const Eigen::VectorXd& x, const Calibration& fixed) const;

 private:
  int n_viewpoints_;
  int n_frames_;
  bool fix_skew_;
  int size_ = 0;
  std::vector<int> intrinsics_;
  std::vector<int> distortion_;
  std::vector<int> relative_;
  std::vector<int> frames_;
};

/// Observed minus projected pixel coordinates, two rows per present
/// observation, ordered by viewpoint, frame, point, then x before y.
/// Throws BehindCameraError with the observation's indices.
Eigen::VectorXd residuals(const Calibration& calib, const ObservationSet& obs);

/// Jacobian of residuals() with one dense 2 x k block per observation.
/// A block touches only its viewpoint's intrinsics, distortion and relative
/// pose columns and its frame's pose columns, so k <= 21.
struct BlockSparseJacobian {
  static constexpr int kMaxBlockCols = 21;

  struct Block {
    int row = 0;  // first of the two rows
    int n_cols = 0;
    std::array<int, kMaxBlockCols> cols{};
    Eigen::Matrix<double, 2, kMaxBlockCols> values =
        Eigen::Matrix<double, 2, kMaxBlockCols>::Zero();
  };

  int rows = 0;
  int cols = 0;
  std::vector<Block> blocks;

  Eigen::MatrixXd to_dense() const;
};

BlockSparseJacobian jacobian(const Calibration& calib, const ObservationSet& obs,
                             const ParameterLayout& layout);

/// Central differences of residuals() over the packed vector.
Eigen::MatrixXd numeric_jacobian(const Calibration& calib,
                                 const ObservationSet& obs,
                                 const ParameterLayout& layout,
                                 double step = 1e-6);

/// RMS over residual components (not over point distances).
double rms(const Eigen::VectorXd& r);

/// RMS of each viewpoint's residuals, in viewpoint order (0 when a
/// viewpoint has no observations).
std::vector<double> per_viewpoint_errors(const Calibration& calib,
                                         const ObservationSet& obs);

struct OptimizeResult {
  Calibration calibration;
  OptimizeReport report;
};

/// Levenberg-Marquardt over the total reprojection error with damped normal
/// equations (J^T J + lambda diag(J^T J)) delta = -J^T r. Throws
/// NumericError when the damped system stays singular.
OptimizeResult optimize(const InitialCalibration& init, const ObservationSet& obs,
                        const OptimizeOptions& opts = {});

/// Baseline: each viewpoint refined on its own (intrinsics, distortion and
/// its own per-frame board poses), then relative poses by median over
/// frames against viewpoint 0.
OptimizeResult refine_independently(const InitialCalibration& init,
                                    const ObservationSet& obs,
                                    const OptimizeOptions& opts = {});

/// Residual statistics of a calibration without optimizing it.
OptimizeReport evaluate(const Calibration& calib, const ObservationSet& obs);

}  // namespace lfcal
