#pragma once

#include <vector>

#include "lfcal/calibration.hpp"
#include "lfcal/geometry.hpp"

namespace lfcal {

/// Row-major image with samples in [0, 1] and 1 or 3 interleaved channels.
class Image {
 public:
  Image() = default;
  /// Throws ArgumentError for non-positive sizes or channels other than 1/3.
  Image(int width, int height, int channels = 1, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return samples_.empty(); }

  double& at(int x, int y, int c = 0) {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  const std::vector<double>& samples() const { return samples_; }
  std::vector<double>& samples() { return samples_; }

  /// True when (x, y) lies within the pixel-centre grid [0, w-1] x [0, h-1]
  /// (with a 1e-6 px tolerance).
  bool contains(double x, double y) const;

  /// Bilinear interpolation at a continuous position; the caller checks
  /// contains() first.
  double sample(double x, double y, int c = 0) const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> samples_;
};

struct LightFieldView {
  Image image;
  Intrinsics intrinsics;
  Distortion distortion;
  RigidTransform relative;
};

/// Calibrated camera-array capture. st_coords holds each view's (s, t)
/// position on the camera plane in millimetres.
struct LightField {
  std::vector<LightFieldView> views;
  std::vector<Vec2> st_coords;

  /// Pairs calibrated viewpoints with their images (one per viewpoint, same
  /// order). Throws ArgumentError on count or dimension mismatch.
  static LightField from_calibration(const Calibration& calib,
                                     std::vector<Image> images);

  /// Throws ValidationError if the views do not share image dimensions,
  /// st_coords is inconsistent, or view 0 is not at (0, 0).
  void validate() const;
};

/// Slant (u, v) of pixel `p`: the undistorted ray A^-1 p rotated by R^-1 into
/// viewpoint 0's orientation, normalized to unit third component. Throws
/// NumericError when the ray is parallel to the reference plane.
Vec2 pixel_to_slant(const Intrinsics& intr, const Distortion& dist,
                    const Mat3& relative_rotation, const Point2& p);

/// (s, t) = t3 * (u, v) + (t1, t2) for the view's relative translation.
Vec2 slant_to_st(const RigidTransform& relative, const Vec2& uv);

/// Resamples every view onto the common slant grid of `target`: identity
/// rotation, zero distortion. Bilinear sampling, zero fill outside sources.
LightField rectify(const LightField& lf, const Intrinsics& target);

/// Synthetic-aperture refocus on the plane Z = depth (mm) of viewpoint 0.
/// Every view is warped onto viewpoint 0's pixel grid through the plane and
/// averaged over the views covering each pixel. Throws ArgumentError for
/// depth <= 0.
Image refocus(const LightField& lf, double depth_mm);

/// Mean squared central-difference gradient magnitude over interior pixels,
/// averaged over channels. Throws ArgumentError for images smaller than
/// 3 x 3 (which have no interior).
double sharpness(const Image& img);

}  // namespace lfcal
