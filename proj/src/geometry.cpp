#include "lfcal/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "lfcal/errors.hpp"

namespace lfcal {

namespace {

// Coefficients of the Rodrigues series:
//   a = sin(t)/t, b = (1 - cos(t))/t^2, c = (t - sin(t))/t^3
struct RodriguesCoefficients {
  double a;
  double b;
  double c;
};

RodriguesCoefficients rodrigues_coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < 1e-4) {
    return {1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0};
  }
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  return {s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta)};
}

Vec3 vee(const Mat3& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

}  // namespace

Mat3 Intrinsics::matrix() const {
  Mat3 a;
  a << alpha, gamma, u0, 0.0, beta, v0, 0.0, 0.0, 1.0;
  return a;
}

Mat3 Intrinsics::inverse_matrix() const {
  Mat3 inv;
  inv << 1.0 / alpha, -gamma / (alpha * beta),
      (gamma * v0 - beta * u0) / (alpha * beta), 0.0, 1.0 / beta, -v0 / beta,
      0.0, 0.0, 1.0;
  return inv;
}

Intrinsics Intrinsics::from_matrix(const Mat3& a) {
  if (a(1, 0) != 0.0 || a(2, 0) != 0.0 || a(2, 1) != 0.0 || a(2, 2) != 1.0) {
    throw ValidationError("intrinsic matrix must be upper triangular with a(2,2) = 1");
  }
  Intrinsics intr{a(0, 0), a(1, 1), a(0, 1), a(0, 2), a(1, 2)};
  if (!intr.valid()) {
    throw ValidationError("intrinsic matrix has non-positive focal length");
  }
  return intr;
}

Vec2 Intrinsics::to_pixel(const Vec2& n) const {
  return {alpha * n.x() + gamma * n.y() + u0, beta * n.y() + v0};
}

Vec2 Intrinsics::to_normalized(const Vec2& p) const {
  const double y = (p.y() - v0) / beta;
  return {(p.x() - u0 - gamma * y) / alpha, y};
}

bool Intrinsics::valid() const {
  return std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) &&
         std::isfinite(u0) && std::isfinite(v0) && alpha > 0.0 && beta > 0.0;
}

RigidTransform RigidTransform::from_axis_angle(const AxisAngle& r,
                                               const Vec3& t) {
  return {axis_angle_to_matrix(r), t};
}

AxisAngle RigidTransform::axis_angle() const {
  return matrix_to_axis_angle(rotation);
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 axis_angle_to_matrix(const AxisAngle& r) {
  const double theta = r.norm();
  const auto k = rodrigues_coefficients(theta);
  const Mat3 w = skew(r);
  return Mat3::Identity() + k.a * w + k.b * w * w;
}

AxisAngle matrix_to_axis_angle(const Mat3& rotation) {
  const double orth = (rotation.transpose() * rotation - Mat3::Identity())
                          .cwiseAbs()
                          .maxCoeff();
  if (!(orth < 1e-6) || !(std::abs(rotation.determinant() - 1.0) < 1e-6)) {
    throw ValidationError("matrix is not a rotation (orthonormality error " +
                          std::to_string(orth) + ")");
  }

  const Vec3 w = vee(rotation);
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (rotation.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (c < 0.0 && s < 1e-3) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part (1 - cos) n n^T = (R + R^T)/2 - cos I.
    const Mat3 sym = 0.5 * (rotation + rotation.transpose()) -
                     c * Mat3::Identity();
    int k = 0;
    sym.diagonal().maxCoeff(&k);
    Vec3 axis = sym.col(k) / std::sqrt(sym(k, k) * (1.0 - c));
    axis.normalize();
    if (axis.dot(w) < 0.0) axis = -axis;
    return theta * axis;
  }

  // theta / (2 sin(theta)), with its series near zero.
  const double scale =
      theta < 1e-4 ? 0.5 + theta * theta / 12.0 : theta / (2.0 * s);
  return scale * w;
}

Mat3 so3_right_jacobian(const AxisAngle& r) {
  const auto k = rodrigues_coefficients(r.norm());
  return k.a * Mat3::Identity() - k.b * skew(r) + k.c * r * r.transpose();
}

Mat3 rotate_point_jacobian(const AxisAngle& r, const Vec3& p) {
  return -axis_angle_to_matrix(r) * skew(p) * so3_right_jacobian(r);
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Vec2 distort(const Distortion& dist, const Vec2& xy) {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + dist.k1 * r2 + dist.k2 * r2 * r2;
  return {x * radial + 2.0 * dist.p1 * x * y + dist.p2 * (r2 + 2.0 * x * x),
          y * radial + dist.p1 * (r2 + 2.0 * y * y) + 2.0 * dist.p2 * x * y};
}

Vec2 undistort(const Distortion& dist, const Vec2& xy_distorted) {
  if (dist.is_zero()) return xy_distorted;

  Vec2 xy = xy_distorted;
  for (int iter = 0; iter < kUndistortMaxIterations; ++iter) {
    const double x = xy.x();
    const double y = xy.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + dist.k1 * r2 + dist.k2 * r2 * r2;
    const double dx = 2.0 * dist.p1 * x * y + dist.p2 * (r2 + 2.0 * x * x);
    const double dy = dist.p1 * (r2 + 2.0 * y * y) + 2.0 * dist.p2 * x * y;
    if (!(radial > 0.0)) break;
    const Vec2 next{(xy_distorted.x() - dx) / radial,
                    (xy_distorted.y() - dy) / radial};
    const double step = (next - xy).cwiseAbs().maxCoeff();
    xy = next;
    if (step < kUndistortTolerance) return xy;
  }

  const double residual = (distort(dist, xy) - xy_distorted).norm();
  if (std::isfinite(residual) && residual < 1e-10) return xy;
  throw NumericError("undistortion did not converge (residual " +
                     std::to_string(residual) + ")");
}

Point2 project(const Intrinsics& intr, const Distortion& dist,
               const RigidTransform& pose, const Point3& point,
               ProjectionContext ctx) {
  const Vec3 pc = pose.apply(point);
  if (!(pc.z() > 0.0)) {
    throw BehindCameraError(ctx.viewpoint, ctx.frame, ctx.point);
  }
  const Vec2 normalized{pc.x() / pc.z(), pc.y() / pc.z()};
  return intr.to_pixel(distort(dist, normalized));
}

RigidTransform compose_world_pose(const RigidTransform& relative,
                                  const RigidTransform& world0) {
  return relative * world0;
}

RigidTransform relative_from_world(const RigidTransform& world_i,
                                   const RigidTransform& world0) {
  const Mat3 r = world_i.rotation * world0.rotation.transpose();
  return {r, world_i.translation - r * world0.translation};
}

}  // namespace lfcal
