#pragma once

#include <Eigen/Dense>

namespace lfcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Image point (pixels) or board-plane model point (mm).
using Point2 = Vec2;
/// Scene point in millimetres.
using Point3 = Vec3;

/// Minimal rotation parameterization: direction is the axis, norm the angle
/// in radians.
using AxisAngle = Vec3;

/// Pinhole intrinsics. The matrix form is
///
///   | alpha gamma u0 |
///   |   0   beta  v0 |
///   |   0    0     1 |
struct Intrinsics {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;

  /// Reads the five scalars off an upper-triangular matrix with unit (2,2)
  /// entry. Throws ValidationError if the layout is violated or a focal
  /// length is not positive.
  static Intrinsics from_matrix(const Mat3& a);

  /// Normalized camera coordinates to pixels.
  Vec2 to_pixel(const Vec2& normalized) const;
  /// Pixels to normalized camera coordinates.
  Vec2 to_normalized(const Vec2& pixel) const;

  bool valid() const;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Brown-Conrady coefficients: two radial (k1, k2) and two tangential
/// (p1, p2), applied to normalized coordinates.
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool is_zero() const { return k1 == 0.0 && k2 == 0.0 && p1 == 0.0 && p2 == 0.0; }

  friend bool operator==(const Distortion&, const Distortion&) = default;
};

/// x_dst = rotation * x_src + translation. Used both for the pose of the
/// board in a camera frame and for the pose of a viewpoint relative to
/// viewpoint 0.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const AxisAngle& r, const Vec3& t);

  AxisAngle axis_angle() const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;

  /// (a * b).apply(p) == a.apply(b.apply(p))
  friend RigidTransform operator*(const RigidTransform& a,
                                  const RigidTransform& b);
};

// Rotations

Mat3 axis_angle_to_matrix(const AxisAngle& r);

/// Inverse Rodrigues map. Angles are returned in [0, pi]. Throws
/// ValidationError when `rotation` is not orthonormal with det +1.
AxisAngle matrix_to_axis_angle(const Mat3& rotation);

/// Right Jacobian of SO(3) at r: a I - b [r]x + c r r^T with the Rodrigues
/// coefficients a = sin/t, b = (1 - cos)/t^2, c = (t - sin)/t^3.
Mat3 so3_right_jacobian(const AxisAngle& r);

/// Derivative of axis_angle_to_matrix(r) * p with respect to r, equal to
/// -R [p]x J_r(r).
Mat3 rotate_point_jacobian(const AxisAngle& r, const Vec3& p);

/// Closest rotation in the Frobenius sense (U * V^T with det fixed to +1).
Mat3 nearest_rotation(const Mat3& m);

Mat3 skew(const Vec3& v);

// Distortion

Vec2 distort(const Distortion& dist, const Vec2& xy);

/// Inverts distort() by fixed-point iteration seeded at the distorted point.
/// Throws NumericError when the iteration does not converge.
Vec2 undistort(const Distortion& dist, const Vec2& xy_distorted);

inline constexpr int kUndistortMaxIterations = 50;
inline constexpr double kUndistortTolerance = 1e-12;

// Projection

/// Identifies an observation in error messages; -1 means "not applicable".
struct ProjectionContext {
  int viewpoint = -1;
  int frame = -1;
  int point = -1;
};

/// Pixel coordinates of `point` seen by a camera with the given intrinsics,
/// distortion and pose (pose maps the point's frame into the camera frame).
/// Throws BehindCameraError if the transformed depth is not positive.
Point2 project(const Intrinsics& intr, const Distortion& dist,
               const RigidTransform& pose, const Point3& point,
               ProjectionContext ctx = {});

// Pose composition between viewpoint 0 and viewpoint i

/// World pose of viewpoint i from its pose relative to viewpoint 0 and the
/// world pose of viewpoint 0: R_w = R_rel * R_w0, t_w = R_rel * t_w0 + t_rel.
RigidTransform compose_world_pose(const RigidTransform& relative,
                                  const RigidTransform& world0);

/// Algebraic inverse of compose_world_pose:
/// R_rel = R_wi * R_w0^-1, t_rel = t_wi - R_rel * t_w0.
RigidTransform relative_from_world(const RigidTransform& world_i,
                                   const RigidTransform& world0);

}  // namespace lfcal
