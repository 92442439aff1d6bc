#include "lfcal/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "lfcal/errors.hpp"
#include "lfcal/simulator.hpp"

namespace lfcal {

namespace {

using nlohmann::json;

constexpr const char* kObservationTag = "lfcal-observations";
constexpr const char* kCalibrationTag = "lfcal-calibration";

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto end = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + end, '\n'));
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing field '" + path + "." + key + "'");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError("field '" + path + "': expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError("field '" + path + "': expected an integer");
  return v.get<int>();
}

template <int N>
Eigen::Matrix<double, N, 1> vector_field(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N) {
    throw ParseError("field '" + path + "': expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int k = 0; k < N; ++k) out(k) = number(v[k], path + "[" + std::to_string(k) + "]");
  return out;
}

void check_header(const json& doc, const char* tag, int version) {
  const auto& fmt = field(doc, "format", "$");
  if (!fmt.is_string() || fmt.get<std::string>() != tag) {
    throw ParseError(std::string("field '$.format': expected \"") + tag + "\"");
  }
  const int v = integer(field(doc, "version", "$"), "$.version");
  if (v != version) {
    throw ParseError("unsupported version " + std::to_string(v) + " (expected " +
                     std::to_string(version) + ")");
  }
}

json pose_json(const RigidTransform& t) {
  const AxisAngle r = t.axis_angle();
  return {{"rotation", {r.x(), r.y(), r.z()}},
          {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform pose_from_json(const json& obj, const std::string& path) {
  const Vec3 r = vector_field<3>(field(obj, "rotation", path), path + ".rotation");
  const Vec3 t = vector_field<3>(field(obj, "translation", path), path + ".translation");
  return RigidTransform::from_axis_angle(r, t);
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw ValidationError("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ValidationError("cannot move output into place at '" + path.string() + "'");
  }
}

std::string format_observations(const ObservationSet& obs) {
  const json board = {{"rows", obs.board().rows},
                      {"cols", obs.board().cols},
                      {"spacing_mm", obs.board().spacing_mm}};
  std::ostringstream out;
  out << "{\n"
      << "  \"format\": \"" << kObservationTag << "\",\n"
      << "  \"version\": " << kObservationFormatVersion << ",\n"
      << "  \"board\": " << board.dump() << ",\n"
      << "  \"n_viewpoints\": " << obs.n_viewpoints() << ",\n"
      << "  \"n_frames\": " << obs.n_frames() << ",\n"
      << "  \"records\": [";
  bool first = true;
  for (int i = 0; i < obs.n_viewpoints(); ++i) {
    for (int j = 0; j < obs.n_frames(); ++j) {
      for (int k = 0; k < obs.n_points(); ++k) {
        const auto& p = obs.at(i, j, k);
        if (!p) continue;
        out << (first ? "\n    " : ",\n    ") << json::array({i, j, k, p->x(), p->y()}).dump();
        first = false;
      }
    }
  }
  out << (first ? "]\n" : "\n  ]\n") << "}\n";
  return out.str();
}

ObservationSet parse_observations(const std::string& text) {
  const json doc = parse_json(text);
  check_header(doc, kObservationTag, kObservationFormatVersion);
  const json& b = field(doc, "board", "$");
  BoardSpec board{integer(field(b, "rows", "$.board"), "$.board.rows"),
                  integer(field(b, "cols", "$.board"), "$.board.cols"),
                  number(field(b, "spacing_mm", "$.board"), "$.board.spacing_mm")};
  const int n = integer(field(doc, "n_viewpoints", "$"), "$.n_viewpoints");
  const int t = integer(field(doc, "n_frames", "$"), "$.n_frames");
  if (board.rows < 1 || board.cols < 1 || !(board.spacing_mm > 0.0)) {
    throw ValidationError("board needs rows >= 1, cols >= 1 and spacing_mm > 0");
  }
  if (n < 1 || t < 0) throw ValidationError("n_viewpoints must be >= 1 and n_frames >= 0");

  ObservationSet obs(board, n, t);
  const json& records = field(doc, "records", "$");
  if (!records.is_array()) throw ParseError("field '$.records': expected an array");
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::string path = "$.records[" + std::to_string(r) + "]";
    const json& rec = records[r];
    if (!rec.is_array() || rec.size() != 5) {
      throw ParseError("field '" + path + "': expected [viewpoint, frame, point, x, y]");
    }
    const int i = integer(rec[0], path + "[0]");
    const int j = integer(rec[1], path + "[1]");
    const int k = integer(rec[2], path + "[2]");
    const Point2 p{number(rec[3], path + "[3]"), number(rec[4], path + "[4]")};
    if (i < 0 || i >= n || j < 0 || j >= t || k < 0 || k >= board.point_count()) {
      throw ValidationError("record " + std::to_string(r) + " (viewpoint " + std::to_string(i) +
                            ", frame " + std::to_string(j) + ", point " + std::to_string(k) +
                            ") is outside the declared bounds");
    }
    if (obs.has(i, j, k)) {
      throw ValidationError("record " + std::to_string(r) + " duplicates (viewpoint " +
                            std::to_string(i) + ", frame " + std::to_string(j) + ", point " +
                            std::to_string(k) + ")");
    }
    obs.set(i, j, k, p);
  }
  return obs;
}

ObservationSet read_observations(const std::filesystem::path& path) {
  try {
    return parse_observations(read_file(path));
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

void write_observations(const ObservationSet& obs, const std::filesystem::path& path) {
  write_file_atomic(path, format_observations(obs));
}

std::string format_calibration(const CalibrationResult& result) {
  const Calibration& c = result.calibration;
  json doc;
  doc["format"] = kCalibrationTag;
  doc["version"] = kCalibrationFormatVersion;
  json viewpoints = json::array();
  for (int i = 0; i < c.n_viewpoints(); ++i) {
    const auto& vp = c.viewpoints[i];
    const auto& in = vp.intrinsics;
    const auto& d = vp.distortion;
    json v = pose_json(vp.relative);
    if (i == 0) {
      v["rotation"] = {0.0, 0.0, 0.0};
      v["translation"] = {0.0, 0.0, 0.0};
    }
    v["intrinsics"] = {in.alpha, in.beta, in.gamma, in.u0, in.v0};
    v["distortion"] = {d.k1, d.k2, d.p1, d.p2};
    viewpoints.push_back(v);
  }
  doc["viewpoints"] = viewpoints;
  json frames = json::array();
  for (const auto& f : c.frame_poses) frames.push_back(pose_json(f));
  doc["frames"] = frames;
  if (result.report) {
    const auto& r = *result.report;
    doc["report"] = {{"initial_rms", r.initial_rms},
                     {"final_rms", r.final_rms},
                     {"per_viewpoint_rms", r.per_viewpoint_rms},
                     {"per_viewpoint_rms_std", r.per_viewpoint_rms_std},
                     {"iterations", r.iterations},
                     {"termination_reason", std::string(to_string(r.termination_reason))}};
  }
  return doc.dump(2) + "\n";
}

CalibrationFileContents parse_calibration(const std::string& text) {
  const json doc = parse_json(text);
  check_header(doc, kCalibrationTag, kCalibrationFormatVersion);

  CalibrationFileContents out;
  Calibration& c = out.result.calibration;
  const json& viewpoints = field(doc, "viewpoints", "$");
  if (!viewpoints.is_array() || viewpoints.empty()) {
    throw ParseError("field '$.viewpoints': expected a non-empty array");
  }
  for (std::size_t i = 0; i < viewpoints.size(); ++i) {
    const std::string path = "$.viewpoints[" + std::to_string(i) + "]";
    const json& v = viewpoints[i];
    ViewpointCalibration vp;
    const Eigen::Matrix<double, 5, 1> in = vector_field<5>(field(v, "intrinsics", path), path + ".intrinsics");
    vp.intrinsics = {in(0), in(1), in(2), in(3), in(4)};
    if (!vp.intrinsics.valid()) {
      throw ValidationError(path + ".intrinsics: focal lengths must be positive");
    }
    if (v.contains("distortion")) {
      const Eigen::Vector4d d = vector_field<4>(v["distortion"], path + ".distortion");
      vp.distortion = {d(0), d(1), d(2), d(3)};
    } else {
      out.distortion_defaulted = true;
      out.warnings.push_back(path + ": no distortion block, using zero coefficients");
    }
    const Vec3 r = vector_field<3>(field(v, "rotation", path), path + ".rotation");
    const Vec3 t = vector_field<3>(field(v, "translation", path), path + ".translation");
    if (i == 0 && (r != Vec3::Zero() || t != Vec3::Zero())) {
      throw ValidationError("viewpoint 0 must have a zero relative pose (gauge)");
    }
    vp.relative = RigidTransform::from_axis_angle(r, t);
    c.viewpoints.push_back(vp);
  }

  const json& frames = field(doc, "frames", "$");
  if (!frames.is_array()) throw ParseError("field '$.frames': expected an array");
  for (std::size_t j = 0; j < frames.size(); ++j) {
    c.frame_poses.push_back(pose_from_json(frames[j], "$.frames[" + std::to_string(j) + "]"));
  }

  if (doc.contains("report")) {
    const json& r = doc["report"];
    OptimizeReport rep;
    rep.initial_rms = number(field(r, "initial_rms", "$.report"), "$.report.initial_rms");
    rep.final_rms = number(field(r, "final_rms", "$.report"), "$.report.final_rms");
    const json& pv = field(r, "per_viewpoint_rms", "$.report");
    if (!pv.is_array()) throw ParseError("field '$.report.per_viewpoint_rms': expected an array");
    for (std::size_t k = 0; k < pv.size(); ++k) {
      rep.per_viewpoint_rms.push_back(number(pv[k], "$.report.per_viewpoint_rms"));
    }
    rep.per_viewpoint_rms_std =
        number(field(r, "per_viewpoint_rms_std", "$.report"), "$.report.per_viewpoint_rms_std");
    rep.iterations = integer(field(r, "iterations", "$.report"), "$.report.iterations");
    const json& reason = field(r, "termination_reason", "$.report");
    if (!reason.is_string()) throw ParseError("field '$.report.termination_reason': expected a string");
    rep.termination_reason = termination_reason_from_string(reason.get<std::string>());
    out.result.report = rep;
  }
  return out;
}

CalibrationFileContents read_calibration(const std::filesystem::path& path) {
  try {
    return parse_calibration(read_file(path));
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

void write_calibration(const CalibrationResult& result, const std::filesystem::path& path) {
  write_file_atomic(path, format_calibration(result));
}

std::string format_sim_config(const SimConfig& cfg) {
  const auto& in = cfg.intrinsics;
  const auto& d = cfg.distortion;
  const json doc = {
      {"grid", {cfg.grid_cols, cfg.grid_rows}},
      {"spacing_mm", cfg.spacing_mm},
      {"resolution", {cfg.width, cfg.height}},
      {"intrinsics", {in.alpha, in.beta, in.gamma, in.u0, in.v0}},
      {"distortion", {d.k1, d.k2, d.p1, d.p2}},
      {"n_frames", cfg.n_frames},
      {"board", {{"rows", cfg.board.rows}, {"cols", cfg.board.cols}, {"spacing_mm", cfg.board.spacing_mm}}},
      {"noise_sigma", cfg.noise_sigma},
      {"n_trials", cfg.n_trials},
      {"seed", cfg.seed},
      {"rig_rotation_jitter_deg", cfg.rig_rotation_jitter_deg},
      {"rig_translation_jitter_mm", cfg.rig_translation_jitter_mm},
      {"board_distance_mm", {cfg.min_distance_mm, cfg.max_distance_mm}},
      {"max_tilt_deg", cfg.max_tilt_deg}};
  return doc.dump(2) + "\n";
}

SimConfig parse_sim_config(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw ParseError("simulation config must be a JSON object");
  SimConfig cfg = SimConfig::standard();
  static const std::set<std::string> known{
      "grid", "spacing_mm", "resolution", "intrinsics", "distortion", "n_frames", "board",
      "noise_sigma", "n_trials", "seed", "rig_rotation_jitter_deg", "rig_translation_jitter_mm",
      "board_distance_mm", "max_tilt_deg"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ParseError("unknown simulation config field '" + key + "'");
  }
  auto pair_of_ints = [&](const char* key, int& a, int& b) {
    const json& v = doc[key];
    if (!v.is_array() || v.size() != 2) throw ParseError(std::string("field '") + key + "': expected [a, b]");
    a = integer(v[0], key);
    b = integer(v[1], key);
  };
  if (doc.contains("grid")) pair_of_ints("grid", cfg.grid_cols, cfg.grid_rows);
  if (doc.contains("resolution")) pair_of_ints("resolution", cfg.width, cfg.height);
  if (doc.contains("spacing_mm")) cfg.spacing_mm = number(doc["spacing_mm"], "spacing_mm");
  if (doc.contains("intrinsics")) {
    const auto in = vector_field<5>(doc["intrinsics"], "intrinsics");
    cfg.intrinsics = {in(0), in(1), in(2), in(3), in(4)};
  }
  if (doc.contains("distortion")) {
    const auto d = vector_field<4>(doc["distortion"], "distortion");
    cfg.distortion = {d(0), d(1), d(2), d(3)};
  }
  if (doc.contains("n_frames")) cfg.n_frames = integer(doc["n_frames"], "n_frames");
  if (doc.contains("board")) {
    const json& b = doc["board"];
    cfg.board = {integer(field(b, "rows", "board"), "board.rows"),
                 integer(field(b, "cols", "board"), "board.cols"),
                 number(field(b, "spacing_mm", "board"), "board.spacing_mm")};
  }
  if (doc.contains("noise_sigma")) cfg.noise_sigma = number(doc["noise_sigma"], "noise_sigma");
  if (doc.contains("n_trials")) cfg.n_trials = integer(doc["n_trials"], "n_trials");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ParseError("field 'seed': expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("rig_rotation_jitter_deg")) {
    cfg.rig_rotation_jitter_deg = number(doc["rig_rotation_jitter_deg"], "rig_rotation_jitter_deg");
  }
  if (doc.contains("rig_translation_jitter_mm")) {
    cfg.rig_translation_jitter_mm = number(doc["rig_translation_jitter_mm"], "rig_translation_jitter_mm");
  }
  if (doc.contains("board_distance_mm")) {
    const auto d = vector_field<2>(doc["board_distance_mm"], "board_distance_mm");
    cfg.min_distance_mm = d(0);
    cfg.max_distance_mm = d(1);
  }
  if (doc.contains("max_tilt_deg")) cfg.max_tilt_deg = number(doc["max_tilt_deg"], "max_tilt_deg");
  cfg.validate();
  return cfg;
}

SimConfig read_sim_config(const std::filesystem::path& path) {
  try {
    return parse_sim_config(read_file(path));
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

}  // namespace lfcal
