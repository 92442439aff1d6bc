#pragma once

#include <optional>
#include <vector>

#include "lfcal/geometry.hpp"

namespace lfcal {

/// Checkerboard corner layout. Point k sits at row k / cols, column
/// k % cols, i.e. model coordinates (col * spacing, row * spacing) on Z = 0.
struct BoardSpec {
  int rows = 0;
  int cols = 0;
  double spacing_mm = 0.0;

  int point_count() const { return rows * cols; }
  Point2 model_point(int k) const;
  std::vector<Point2> model_points() const;

  friend bool operator==(const BoardSpec&, const BoardSpec&) = default;
};

/// Detected corners indexed by (viewpoint, frame, point). Entries are
/// optional; a missing entry means the corner was not observed.
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(BoardSpec board, int n_viewpoints, int n_frames);

  const BoardSpec& board() const { return board_; }
  const std::vector<Point2>& model_points() const { return model_points_; }
  int n_viewpoints() const { return n_viewpoints_; }
  int n_frames() const { return n_frames_; }
  int n_points() const { return board_.point_count(); }

  const std::optional<Point2>& at(int viewpoint, int frame, int point) const;
  bool has(int viewpoint, int frame, int point) const {
    return at(viewpoint, frame, point).has_value();
  }
  /// Throws ValidationError for out-of-range indices or non-finite values.
  void set(int viewpoint, int frame, int point, const Point2& pixel);
  void erase(int viewpoint, int frame, int point);
  void clear_view(int viewpoint, int frame);

  /// Total number of present observations.
  int count() const;
  int count(int viewpoint, int frame) const;

  /// Present correspondences of one (viewpoint, frame) pair, in point order.
  struct View {
    std::vector<int> indices;
    std::vector<Point2> model;
    std::vector<Point2> image;
  };
  View view(int viewpoint, int frame) const;

  /// Checks the invariants the calibration needs: every present
  /// (viewpoint, frame) has at least 4 points and viewpoint 0 observes every
  /// frame any other viewpoint observes. Throws ValidationError.
  void validate() const;

  /// A single-viewpoint set holding only `viewpoint`'s observations.
  ObservationSet single_viewpoint(int viewpoint) const;

 private:
  std::size_t index(int viewpoint, int frame, int point) const;
  void check_range(int viewpoint, int frame, int point) const;

  BoardSpec board_{};
  std::vector<Point2> model_points_;
  int n_viewpoints_ = 0;
  int n_frames_ = 0;
  std::vector<std::optional<Point2>> points_;
};

}  // namespace lfcal
