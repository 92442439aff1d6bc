#include "lfcal/homography.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "lfcal/errors.hpp"

namespace lfcal {

namespace {

std::string frame_label(int frame) {
  return frame >= 0 ? " (frame " + std::to_string(frame) + ")" : "";
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Mat3 isotropic_normalizer(std::span<const Point2> pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

// Ratio of the smallest to the largest spread of a 2D point cloud.
double planar_spread_ratio(std::span<const Point2> pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Vec2 d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double hi = eig.eigenvalues()(1);
  return hi > 0.0 ? eig.eigenvalues()(0) / hi : 0.0;
}

Eigen::MatrixXd design_matrix(std::span<const Point2> model,
                              std::span<const Point2> image,
                              const Mat3& tm, const Mat3& ti) {
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec3 m = tm * model[k].homogeneous();
    const Vec3 p = ti * image[k].homogeneous();
    const double x = p.x() / p.z();
    const double y = p.y() / p.z();
    const Eigen::RowVector3d mt = m.transpose() / m.z();
    a.row(2 * k) << mt, Eigen::RowVector3d::Zero(), -x * mt;
    a.row(2 * k + 1) << Eigen::RowVector3d::Zero(), mt, -y * mt;
  }
  return a;
}

void check_inputs(std::span<const Point2> model, std::span<const Point2> image,
                  int frame) {
  if (model.size() != image.size()) {
    throw EstimationError("homography: model and image point counts differ" +
                          frame_label(frame));
  }
  if (model.size() < 4) {
    throw EstimationError("homography needs at least 4 point pairs, got " +
                          std::to_string(model.size()) + frame_label(frame));
  }
}

}  // namespace

Homography Homography::from_matrix(const Mat3& m) {
  Homography h{m};
  if (m(2, 2) != 0.0) h.h /= m(2, 2);
  return h;
}

Homography Homography::inverse() const { return from_matrix(h.inverse()); }

Point2 apply_homography(const Homography& h, const Point2& p) {
  const Vec3 q = h.h * p.homogeneous();
  if (std::abs(q.z()) < 1e-12) {
    throw NumericError("homography maps point to infinity");
  }
  return q.hnormalized();
}

Homography estimate_homography(std::span<const Point2> model_pts,
                               std::span<const Point2> image_pts, int frame) {
  check_inputs(model_pts, image_pts, frame);
  constexpr double kMinSpread = 1e-10;
  if (planar_spread_ratio(model_pts) < kMinSpread ||
      planar_spread_ratio(image_pts) < kMinSpread) {
    throw EstimationError("homography: points are collinear" +
                          frame_label(frame));
  }

  const Mat3 tm = isotropic_normalizer(model_pts);
  const Mat3 ti = isotropic_normalizer(image_pts);
  const Eigen::MatrixXd a = design_matrix(model_pts, image_pts, tm, ti);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || !(sv(7) > 1e-12 * sv(0))) {
    throw EstimationError("homography: degenerate point configuration" +
                          frame_label(frame));
  }
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Mat3 hn;
  hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

  const Mat3 h = ti.inverse() * hn * tm;
  if (!h.allFinite() || std::abs(h.determinant()) == 0.0) {
    throw EstimationError("homography: singular estimate" + frame_label(frame));
  }
  return Homography::from_matrix(h);
}

double dlt_condition_number(std::span<const Point2> model_pts,
                            std::span<const Point2> image_pts,
                            bool normalize) {
  check_inputs(model_pts, image_pts, -1);
  const Mat3 tm = normalize ? isotropic_normalizer(model_pts) : Mat3::Identity();
  const Mat3 ti = normalize ? isotropic_normalizer(image_pts) : Mat3::Identity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      design_matrix(model_pts, image_pts, tm, ti));
  const auto& sv = svd.singularValues();
  return sv(0) / sv(7);
}

}  // namespace lfcal
