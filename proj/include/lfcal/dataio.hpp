#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lfcal/calibration.hpp"
#include "lfcal/observations.hpp"

namespace lfcal {

struct SimConfig;

inline constexpr int kObservationFormatVersion = 1;
inline constexpr int kCalibrationFormatVersion = 1;

/// Observation file: JSON object with "format", "version", "board",
/// "n_viewpoints", "n_frames" and "records", each record being
/// [viewpoint, frame, point_index, x_px, y_px]. See docs/file_formats.md.
std::string format_observations(const ObservationSet& obs);
/// Throws ParseError (malformed text or fields) or ValidationError
/// (out-of-range indices, duplicate records).
ObservationSet parse_observations(const std::string& text);

ObservationSet read_observations(const std::filesystem::path& path);
void write_observations(const ObservationSet& obs, const std::filesystem::path& path);

struct CalibrationFileContents {
  CalibrationResult result;
  /// Set when at least one viewpoint had no distortion block and was
  /// defaulted to zero coefficients.
  bool distortion_defaulted = false;
  std::vector<std::string> warnings;
};

std::string format_calibration(const CalibrationResult& result);
/// Throws ParseError, or ValidationError when viewpoint 0's relative pose is
/// not exactly zero.
CalibrationFileContents parse_calibration(const std::string& text);

CalibrationFileContents read_calibration(const std::filesystem::path& path);
void write_calibration(const CalibrationResult& result, const std::filesystem::path& path);

/// Simulation config as JSON. Missing keys keep SimConfig::standard() values.
std::string format_sim_config(const SimConfig& cfg);
SimConfig parse_sim_config(const std::string& text);
SimConfig read_sim_config(const std::filesystem::path& path);

/// Whole-file read; throws ValidationError when the file cannot be read.
std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place, so a
/// failed write leaves no partial output.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace lfcal
