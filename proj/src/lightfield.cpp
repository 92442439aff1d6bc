#include "lfcal/lightfield.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Geometry>

#include "lfcal/errors.hpp"

namespace lfcal {

namespace {

constexpr double kEdgeTolerance = 1e-6;

}  // namespace

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) throw ArgumentError("image size must be positive");
  if (channels != 1 && channels != 3) {
    throw ArgumentError("images have 1 or 3 channels");
  }
  samples_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

bool Image::contains(double x, double y) const {
  return x >= -kEdgeTolerance && y >= -kEdgeTolerance &&
         x <= width_ - 1 + kEdgeTolerance && y <= height_ - 1 + kEdgeTolerance;
}

double Image::sample(double x, double y, int c) const {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, std::max(width_ - 2, 0));
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, std::max(height_ - 2, 0));
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = std::clamp(x - x0, 0.0, 1.0);
  const double fy = std::clamp(y - y0, 0.0, 1.0);
  const double top = (1.0 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
  const double bottom = (1.0 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

LightField LightField::from_calibration(const Calibration& calib,
                                        std::vector<Image> images) {
  if (static_cast<int>(images.size()) != calib.n_viewpoints()) {
    throw ArgumentError("expected " + std::to_string(calib.n_viewpoints()) +
                        " images (one per viewpoint), got " +
                        std::to_string(images.size()));
  }
  LightField lf;
  for (int i = 0; i < calib.n_viewpoints(); ++i) {
    const auto& img = images[i];
    if (img.empty() || img.width() != images[0].width() ||
        img.height() != images[0].height() ||
        img.channels() != images[0].channels()) {
      throw ArgumentError("image " + std::to_string(i) +
                          " does not match the dimensions of image 0");
    }
    const auto& vp = calib.viewpoints[i];
    lf.st_coords.push_back(slant_to_st(vp.relative, Vec2::Zero()));
    lf.views.push_back({std::move(images[i]), vp.intrinsics, vp.distortion,
                        vp.relative});
  }
  return lf;
}

void LightField::validate() const {
  if (views.empty()) throw ValidationError("light field has no views");
  if (st_coords.size() != views.size()) {
    throw ValidationError("light field needs one (s, t) pair per view");
  }
  if (st_coords[0] != Vec2::Zero()) {
    throw ValidationError("view 0 must sit at (s, t) = (0, 0)");
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& img = views[i].image;
    if (img.empty() || img.width() != views[0].image.width() ||
        img.height() != views[0].image.height() ||
        img.channels() != views[0].image.channels()) {
      throw ValidationError("view " + std::to_string(i) +
                            " has different image dimensions");
    }
  }
}

Vec2 pixel_to_slant(const Intrinsics& intr, const Distortion& dist,
                    const Mat3& relative_rotation, const Point2& p) {
  const Vec2 n = undistort(dist, intr.to_normalized(p));
  const Vec3 ray = relative_rotation.transpose() * n.homogeneous();
  if (std::abs(ray.z()) < 1e-12) {
    throw NumericError("ray is parallel to the reference plane");
  }
  return ray.hnormalized();
}

Vec2 slant_to_st(const RigidTransform& relative, const Vec2& uv) {
  const Vec3& t = relative.translation;
  return t.z() * uv + t.head<2>();
}

LightField rectify(const LightField& lf, const Intrinsics& target) {
  lf.validate();
  LightField out;
  for (const auto& view : lf.views) {
    const Image& src = view.image;
    Image dst(src.width(), src.height(), src.channels());
    const Mat3& rot = view.relative.rotation;
    for (int y = 0; y < dst.height(); ++y) {
      for (int x = 0; x < dst.width(); ++x) {
        const Vec3 ray = rot * target.to_normalized({x, y}).homogeneous();
        if (!(ray.z() > 0.0)) continue;
        const Vec2 p =
            view.intrinsics.to_pixel(distort(view.distortion, ray.hnormalized()));
        if (!src.contains(p.x(), p.y())) continue;
        for (int c = 0; c < dst.channels(); ++c) {
          dst.at(x, y, c) = src.sample(p.x(), p.y(), c);
        }
      }
    }
    // The rectified camera keeps its centre but adopts viewpoint 0's
    // orientation.
    const RigidTransform rel{Mat3::Identity(), rot.transpose() * view.relative.translation};
    out.st_coords.push_back(slant_to_st(rel, Vec2::Zero()));
    out.views.push_back({std::move(dst), target, Distortion{}, rel});
  }
  out.st_coords[0] = Vec2::Zero();
  return out;
}

Image refocus(const LightField& lf, double depth_mm) {
  if (!(depth_mm > 0.0)) throw ArgumentError("refocus depth must be positive");
  lf.validate();

  const auto& ref = lf.views[0];
  const int w = ref.image.width();
  const int h = ref.image.height();
  const int nc = ref.image.channels();

  // Plane points seen by viewpoint 0's pixels.
  std::vector<std::optional<Vec3>> plane(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      try {
        const Vec2 n = undistort(ref.distortion, ref.intrinsics.to_normalized({x, y}));
        const Vec3 ray0 = ref.relative.rotation.transpose() * n.homogeneous();
        const Vec3 centre0 = -(ref.relative.rotation.transpose() * ref.relative.translation);
        if (!(ray0.z() > 0.0)) continue;
        const double s = (depth_mm - centre0.z()) / ray0.z();
        if (s > 0.0) plane[static_cast<std::size_t>(y) * w + x] = centre0 + s * ray0;
      } catch (const NumericError&) {
        // Outside the invertible region of the distortion model.
      }
    }
  }

  Image sum(w, h, nc);
  std::vector<int> cover(static_cast<std::size_t>(w) * h, 0);
  for (const auto& view : lf.views) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto& pt = plane[static_cast<std::size_t>(y) * w + x];
        if (!pt) continue;
        const Vec3 pc = view.relative.apply(*pt);
        if (!(pc.z() > 0.0)) continue;
        const Vec2 p =
            view.intrinsics.to_pixel(distort(view.distortion, pc.hnormalized()));
        if (!view.image.contains(p.x(), p.y())) continue;
        for (int c = 0; c < nc; ++c) sum.at(x, y, c) += view.image.sample(p.x(), p.y(), c);
        ++cover[static_cast<std::size_t>(y) * w + x];
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int n = cover[static_cast<std::size_t>(y) * w + x];
      if (n == 0) continue;
      for (int c = 0; c < nc; ++c) sum.at(x, y, c) /= n;
    }
  }
  return sum;
}

double sharpness(const Image& img) {
  if (img.width() < 3 || img.height() < 3) {
    throw ArgumentError("sharpness needs an image of at least 3 x 3 pixels");
  }
  double acc = 0.0;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 1; y < img.height() - 1; ++y) {
      for (int x = 1; x < img.width() - 1; ++x) {
        const double gx = 0.5 * (img.at(x + 1, y, c) - img.at(x - 1, y, c));
        const double gy = 0.5 * (img.at(x, y + 1, c) - img.at(x, y - 1, c));
        acc += gx * gx + gy * gy;
      }
    }
  }
  const double interior =
      static_cast<double>(img.width() - 2) * (img.height() - 2) * img.channels();
  return acc / interior;
}

}  // namespace lfcal
