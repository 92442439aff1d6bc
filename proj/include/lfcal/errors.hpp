#pragma once

#include <stdexcept>
#include <string>

namespace lfcal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument passed to an API call (empty list, non-positive depth, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a declared invariant (indices, gauge, duplicates).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. `line` is 1-based, 0 when unknown.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, int line = 0)
      : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + what
                                 : what),
        line_(line) {}

  int line() const { return line_; }

  /// Same error with the file name prepended to the message.
  ParseError in_file(const std::string& file) const {
    return ParseError(file + ": " + what(), line_, 0);
  }

 private:
  ParseError(const std::string& full, int line, int) : ValidationError(full), line_(line) {}

  int line_;
};

/// A numerical procedure failed (rank deficiency, non-convergence, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Fewer than 4 usable correspondences, or a degenerate configuration.
class EstimationError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A point projected with non-positive depth. Indices are -1 when unknown.
class BehindCameraError : public NumericError {
 public:
  BehindCameraError(int viewpoint, int frame, int point)
      : NumericError("point behind camera (viewpoint " +
                     std::to_string(viewpoint) + ", frame " +
                     std::to_string(frame) + ", point " +
                     std::to_string(point) + ")"),
        viewpoint_(viewpoint),
        frame_(frame),
        point_(point) {}

  int viewpoint() const { return viewpoint_; }
  int frame() const { return frame_; }
  int point() const { return point_; }

 private:
  int viewpoint_;
  int frame_;
  int point_;
};

}  // namespace lfcal
