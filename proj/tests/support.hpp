#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "lfcal/geometry.hpp"

namespace lfcal::test {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

/// Rotation vector with uniform direction and angle in [lo, hi].
inline AxisAngle random_axis_angle(std::mt19937_64& g, double lo, double hi) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis{n(g), n(g), n(g)};
  while (axis.norm() < 1e-6) axis = {n(g), n(g), n(g)};
  return axis.normalized() * uniform(g, lo, hi);
}

inline RigidTransform random_transform(std::mt19937_64& g) {
  return RigidTransform::from_axis_angle(
      random_axis_angle(g, 0.0, 3.1),
      {uniform(g, -500, 500), uniform(g, -500, 500), uniform(g, -500, 500)});
}

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lfcal_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lfcal::test
