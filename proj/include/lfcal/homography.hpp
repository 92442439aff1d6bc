#pragma once

#include <span>

#include "lfcal/geometry.hpp"

namespace lfcal {

/// Planar projective map, defined up to scale. Stored with h(2,2) == 1
/// whenever that entry is nonzero.
struct Homography {
  Mat3 h = Mat3::Identity();

  static Homography from_matrix(const Mat3& m);

  Homography inverse() const;
};

/// Projective transfer of `p`. Throws NumericError if the homogeneous
/// coordinate is within 1e-12 of zero.
Point2 apply_homography(const Homography& h, const Point2& p);

/// Normalized DLT: both point sets are translated to their centroid and
/// scaled to mean distance sqrt(2) before solving the 2n x 9 system by SVD.
/// `frame` only labels error messages. Throws EstimationError for fewer than
/// 4 pairs, mismatched lengths, or collinear/degenerate configurations.
Homography estimate_homography(std::span<const Point2> model_pts,
                               std::span<const Point2> image_pts,
                               int frame = -1);

/// Ratio of the largest to the eighth singular value of the DLT design
/// matrix, with or without isotropic normalization.
double dlt_condition_number(std::span<const Point2> model_pts,
                            std::span<const Point2> image_pts, bool normalize);

}  // namespace lfcal
