#include "lfcal/zhang.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "lfcal/errors.hpp"

namespace lfcal {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

// Zhang's v_ij vector for columns i, j of h, against
// b = [B11, B12, B22, B13, B23, B33].
Vec6 constraint_row(const Mat3& h, int i, int j) {
  Vec6 v;
  v << h(0, i) * h(0, j), h(0, i) * h(1, j) + h(1, i) * h(0, j),
      h(1, i) * h(1, j), h(2, i) * h(0, j) + h(0, i) * h(2, j),
      h(2, i) * h(1, j) + h(1, i) * h(2, j), h(2, i) * h(2, j);
  return v;
}

double median(std::vector<double> values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

// Pixel-frame conditioning for the B-matrix system: an affine map that
// centres the images of the board origins and brings them to unit scale.
// The intrinsic matrix transforms covariantly (A' = T A), so the solution
// is exact either way.
Mat3 pixel_conditioner(std::span<const Homography> homographies) {
  Vec2 centre = Vec2::Zero();
  std::vector<Vec2> origins;
  for (const auto& h : homographies) {
    const Vec3 o = h.h.col(2);
    origins.push_back(o.hnormalized());
    centre += origins.back();
  }
  centre /= static_cast<double>(origins.size());
  double spread = 0.0;
  for (const auto& o : origins) spread += (o - centre).squaredNorm();
  spread = std::sqrt(spread / static_cast<double>(origins.size()));
  const double scale = 1.0 / std::max({spread, 0.1 * centre.norm(), 1.0});
  Mat3 t;
  t << scale, 0.0, -scale * centre.x(), 0.0, scale, -scale * centre.y(), 0.0,
      0.0, 1.0;
  return t;
}

}  // namespace

Intrinsics intrinsics_from_homographies(std::span<const Homography> homographies,
                                        bool fix_skew) {
  const std::size_t needed = fix_skew ? 2 : 3;
  if (homographies.size() < needed) {
    throw NumericError("closed form needs at least " + std::to_string(needed) +
                       " homographies, got " +
                       std::to_string(homographies.size()));
  }

  const Mat3 cond = pixel_conditioner(homographies);
  const auto n = static_cast<Eigen::Index>(homographies.size());
  Eigen::MatrixXd v(2 * n + (fix_skew ? 1 : 0), 6);
  for (Eigen::Index k = 0; k < n; ++k) {
    Mat3 h = cond * homographies[k].h;
    h /= h.norm();
    v.row(2 * k) = constraint_row(h, 0, 1).transpose();
    v.row(2 * k + 1) = (constraint_row(h, 0, 0) - constraint_row(h, 1, 1)).transpose();
  }
  if (fix_skew) {
    v.row(2 * n) << 0.0, 1.0, 0.0, 0.0, 0.0, 0.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 5 || !(sv(4) > 1e-9 * sv(0))) {
    throw NumericError(
        "closed form is rank deficient: board orientations are degenerate "
        "(parallel planes give dependent constraints)");
  }
  const Vec6 b = svd.matrixV().col(5);
  const double b11 = b(0), b12 = b(1), b22 = b(2), b13 = b(3), b23 = b(4),
               b33 = b(5);

  const double den = b11 * b22 - b12 * b12;
  const double v0 = (b12 * b13 - b11 * b23) / den;
  const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
  const double alpha2 = lambda / b11;
  const double beta2 = lambda * b11 / den;
  if (!(alpha2 > 0.0) || !(beta2 > 0.0)) {
    throw NumericError(
        "closed form produced a non-positive squared focal length; add more "
        "frames or vary the board orientation more");
  }
  const double alpha = std::sqrt(alpha2);
  const double beta = std::sqrt(beta2);
  const double gamma = fix_skew ? 0.0 : -b12 * alpha2 * beta / lambda;
  const double u0 = gamma * v0 / beta - b13 * alpha2 / lambda;

  // Undo the conditioning: A = T^-1 A'.
  const double s = cond(0, 0);
  const Intrinsics out{alpha / s, beta / s, gamma / s, u0 / s - cond(0, 2) / s,
                       v0 / s - cond(1, 2) / s};
  if (!out.valid()) {
    throw NumericError("closed form produced invalid intrinsics");
  }
  return out;
}

RigidTransform extrinsics_from_homography(const Intrinsics& intr,
                                          const Homography& h) {
  const Mat3 ainv = intr.inverse_matrix();
  const Vec3 a1 = ainv * h.h.col(0);
  const Vec3 a2 = ainv * h.h.col(1);
  const Vec3 a3 = ainv * h.h.col(2);
  const double norm1 = a1.norm();
  if (!(norm1 > 1e-12 * std::max(1.0, a3.norm()))) {
    throw NumericError("degenerate homography: cannot recover the board pose");
  }
  double lambda = 1.0 / norm1;
  if (lambda * a3.z() < 0.0) lambda = -lambda;

  const Vec3 r1 = lambda * a1;
  const Vec3 r2 = lambda * a2;
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);
  return {nearest_rotation(r), lambda * a3};
}

RigidTransform aggregate_relative_poses(std::span<const RigidTransform> per_frame) {
  if (per_frame.empty()) {
    throw ArgumentError("cannot aggregate an empty list of relative poses");
  }
  if (std::all_of(per_frame.begin(), per_frame.end(), [&](const auto& t) {
        return t.rotation == per_frame.front().rotation &&
               t.translation == per_frame.front().translation;
      })) {
    return per_frame.front();
  }

  std::vector<AxisAngle> rvecs;
  rvecs.reserve(per_frame.size());
  for (const auto& t : per_frame) rvecs.push_back(t.axis_angle());

  AxisAngle r;
  Vec3 t;
  std::vector<double> comp(per_frame.size());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t f = 0; f < per_frame.size(); ++f) comp[f] = rvecs[f](c);
    r(c) = median(comp);
    for (std::size_t f = 0; f < per_frame.size(); ++f) {
      comp[f] = per_frame[f].translation(c);
    }
    t(c) = median(comp);
  }
  return {nearest_rotation(axis_angle_to_matrix(r)), t};
}

ViewpointInit calibrate_viewpoint(const ObservationSet& obs, int viewpoint,
                                  const ClosedFormOptions& opts) {
  const std::string label = "viewpoint " + std::to_string(viewpoint);
  std::vector<int> frames;
  std::vector<Homography> homographies;
  for (int j = 0; j < obs.n_frames(); ++j) {
    const auto v = obs.view(viewpoint, j);
    if (v.model.size() < 4) continue;
    try {
      homographies.push_back(estimate_homography(v.model, v.image, j));
      frames.push_back(j);
    } catch (const EstimationError&) {
      // Dropped for this viewpoint only.
    }
  }

  const std::size_t needed = opts.fix_skew ? 2 : 3;
  if (frames.size() < needed) {
    throw ValidationError(label + " has " + std::to_string(frames.size()) +
                          " usable frames; at least " + std::to_string(needed) +
                          " are required");
  }

  ViewpointInit out;
  try {
    out.intrinsics = intrinsics_from_homographies(homographies, opts.fix_skew);
  } catch (const NumericError& e) {
    throw NumericError(label + ": " + e.what());
  }
  out.world_poses.resize(obs.n_frames());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    try {
      out.world_poses[frames[f]] =
          extrinsics_from_homography(out.intrinsics, homographies[f]);
    } catch (const NumericError& e) {
      throw NumericError(label + ", frame " + std::to_string(frames[f]) +
                         ": " + e.what());
    }
  }
  return out;
}

std::vector<RigidTransform> per_frame_relative_poses(const ViewpointInit& viewpoint,
                                                     const ViewpointInit& reference) {
  std::vector<RigidTransform> rel;
  const std::size_t n =
      std::min(viewpoint.world_poses.size(), reference.world_poses.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (viewpoint.world_poses[j] && reference.world_poses[j]) {
      rel.push_back(
          relative_from_world(*viewpoint.world_poses[j], *reference.world_poses[j]));
    }
  }
  return rel;
}

InitialCalibration run_closed_form(const ObservationSet& obs,
                                   const ClosedFormOptions& opts) {
  obs.validate();
  const int n = obs.n_viewpoints();
  const int t = obs.n_frames();

  std::vector<ViewpointInit> inits;
  inits.reserve(n);
  for (int i = 0; i < n; ++i) inits.push_back(calibrate_viewpoint(obs, i, opts));

  InitialCalibration calib;
  calib.viewpoints.resize(n);
  for (int i = 0; i < n; ++i) {
    calib.viewpoints[i].intrinsics = inits[i].intrinsics;
    if (i == 0) continue;
    const auto rel = per_frame_relative_poses(inits[i], inits[0]);
    if (rel.empty()) {
      throw ValidationError("viewpoint " + std::to_string(i) +
                            " shares no usable frame with viewpoint 0");
    }
    calib.viewpoints[i].relative = aggregate_relative_poses(rel);
  }

  calib.frame_poses.assign(t, RigidTransform::identity());
  for (int j = 0; j < t; ++j) {
    if (inits[0].world_poses[j]) {
      calib.frame_poses[j] = *inits[0].world_poses[j];
      continue;
    }
    // Viewpoint 0 lost this frame; recover it through another viewpoint.
    for (int i = 1; i < n; ++i) {
      if (inits[i].world_poses[j]) {
        calib.frame_poses[j] =
            calib.viewpoints[i].relative.inverse() * *inits[i].world_poses[j];
        break;
      }
    }
  }
  return calib;
}

}  // namespace lfcal
