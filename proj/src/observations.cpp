#include "lfcal/observations.hpp"

#include <cmath>
#include <string>

#include "lfcal/errors.hpp"

namespace lfcal {

Point2 BoardSpec::model_point(int k) const {
  return {(k % cols) * spacing_mm, (k / cols) * spacing_mm};
}

std::vector<Point2> BoardSpec::model_points() const {
  std::vector<Point2> pts;
  pts.reserve(point_count());
  for (int k = 0; k < point_count(); ++k) pts.push_back(model_point(k));
  return pts;
}

ObservationSet::ObservationSet(BoardSpec board, int n_viewpoints, int n_frames)
    : board_(board), n_viewpoints_(n_viewpoints), n_frames_(n_frames) {
  if (board.rows < 1 || board.cols < 1 || !(board.spacing_mm > 0.0)) {
    throw ValidationError("board spec needs rows >= 1, cols >= 1, spacing > 0");
  }
  if (n_viewpoints < 1 || n_frames < 0) {
    throw ValidationError("observation set needs at least one viewpoint");
  }
  model_points_ = board_.model_points();
  points_.resize(static_cast<std::size_t>(n_viewpoints) * n_frames *
                 board_.point_count());
}

void ObservationSet::check_range(int viewpoint, int frame, int point) const {
  if (viewpoint < 0 || viewpoint >= n_viewpoints_ || frame < 0 ||
      frame >= n_frames_ || point < 0 || point >= n_points()) {
    throw ValidationError("observation index out of range: viewpoint " +
                          std::to_string(viewpoint) + ", frame " +
                          std::to_string(frame) + ", point " +
                          std::to_string(point));
  }
}

std::size_t ObservationSet::index(int viewpoint, int frame, int point) const {
  return (static_cast<std::size_t>(viewpoint) * n_frames_ + frame) *
             n_points() +
         point;
}

const std::optional<Point2>& ObservationSet::at(int viewpoint, int frame,
                                                int point) const {
  check_range(viewpoint, frame, point);
  return points_[index(viewpoint, frame, point)];
}

void ObservationSet::set(int viewpoint, int frame, int point,
                         const Point2& pixel) {
  check_range(viewpoint, frame, point);
  if (!pixel.allFinite()) {
    throw ValidationError("non-finite observation at viewpoint " +
                          std::to_string(viewpoint) + ", frame " +
                          std::to_string(frame) + ", point " +
                          std::to_string(point));
  }
  points_[index(viewpoint, frame, point)] = pixel;
}

void ObservationSet::erase(int viewpoint, int frame, int point) {
  check_range(viewpoint, frame, point);
  points_[index(viewpoint, frame, point)].reset();
}

void ObservationSet::clear_view(int viewpoint, int frame) {
  for (int k = 0; k < n_points(); ++k) erase(viewpoint, frame, k);
}

int ObservationSet::count() const {
  int n = 0;
  for (const auto& p : points_) n += p.has_value() ? 1 : 0;
  return n;
}

int ObservationSet::count(int viewpoint, int frame) const {
  int n = 0;
  for (int k = 0; k < n_points(); ++k) n += has(viewpoint, frame, k) ? 1 : 0;
  return n;
}

ObservationSet::View ObservationSet::view(int viewpoint, int frame) const {
  View v;
  for (int k = 0; k < n_points(); ++k) {
    const auto& p = at(viewpoint, frame, k);
    if (!p) continue;
    v.indices.push_back(k);
    v.model.push_back(model_points_[k]);
    v.image.push_back(*p);
  }
  return v;
}

void ObservationSet::validate() const {
  for (int i = 0; i < n_viewpoints_; ++i) {
    for (int j = 0; j < n_frames_; ++j) {
      const int n = count(i, j);
      if (n > 0 && n < 4) {
        throw ValidationError("viewpoint " + std::to_string(i) + ", frame " +
                              std::to_string(j) + " has " + std::to_string(n) +
                              " points; at least 4 are required");
      }
      if (n > 0 && i > 0 && count(0, j) == 0) {
        throw ValidationError("frame " + std::to_string(j) +
                              " is observed by viewpoint " + std::to_string(i) +
                              " but not by viewpoint 0");
      }
    }
  }
}

ObservationSet ObservationSet::single_viewpoint(int viewpoint) const {
  check_range(viewpoint, 0, 0);
  ObservationSet out(board_, 1, n_frames_);
  for (int j = 0; j < n_frames_; ++j) {
    for (int k = 0; k < n_points(); ++k) {
      if (const auto& p = at(viewpoint, j, k)) out.set(0, j, k, *p);
    }
  }
  return out;
}

}  // namespace lfcal
