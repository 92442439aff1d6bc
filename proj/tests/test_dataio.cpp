#include <doctest.h>

#include <fstream>

#include "lfcal/dataio.hpp"
#include "lfcal/errors.hpp"
#include "lfcal/image_io.hpp"
#include "lfcal/optimizer.hpp"
#include "lfcal/simulator.hpp"
#include "lfcal/zhang.hpp"
#include "support.hpp"

using namespace lfcal;

namespace {

const char* kHeader = R"({"format": "lfcal-observations", "version": 1,
 "board": {"rows": 2, "cols": 3, "spacing_mm": 10.0},
 "n_viewpoints": 2, "n_frames": 2,
 "records": )";

std::string obs_doc(const std::string& records) { return std::string(kHeader) + records + "}"; }

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

template <typename E>
std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  }
  return "<no error>";
}

Calibration sample_calibration() {
  const SimScene scene = generate_scene(SimConfig::small(), 4);
  Calibration c = scene.truth;
  auto g = test::rng(71);
  for (std::size_t i = 0; i < c.viewpoints.size(); ++i) {
    auto& vp = c.viewpoints[i];
    vp.intrinsics = {700 + test::uniform(g, -5, 5), 701.123456789012, test::uniform(g, -1, 1), 321.5, 239.25};
    vp.distortion = {test::uniform(g, -0.1, 0.1), 1e-17, -3.3e-3, 4.4e-5};
    if (i > 0) {
      vp.relative = RigidTransform::from_axis_angle(test::random_axis_angle(g, 0.0, 0.1),
                                                    vp.relative.translation + Vec3(0.1, -0.2, 0.3));
    }
  }
  return c;
}

}  // namespace

TEST_CASE("observation round trip is lossless") {
  const SimScene scene = generate_scene(SimConfig::small(), 1);
  ObservationSet obs = add_noise(scene.observations, 0.7, 3);
  obs.erase(2, 3, 4);
  const ObservationSet back = parse_observations(format_observations(obs));
  CHECK(back.board() == obs.board());
  CHECK(back.n_viewpoints() == obs.n_viewpoints());
  CHECK(back.n_frames() == obs.n_frames());
  CHECK(back.count() == obs.count());
  CHECK_FALSE(back.has(2, 3, 4));
  double worst = 0.0;
  for (int i = 0; i < obs.n_viewpoints(); ++i) {
    for (int j = 0; j < obs.n_frames(); ++j) {
      for (int k = 0; k < obs.n_points(); ++k) {
        if (!obs.has(i, j, k)) continue;
        worst = std::max({worst, rel_diff(back.at(i, j, k)->x(), obs.at(i, j, k)->x()),
                          rel_diff(back.at(i, j, k)->y(), obs.at(i, j, k)->y())});
      }
    }
  }
  CHECK(worst <= 1e-12);

  test::TempDir dir("obs");
  write_observations(obs, dir / "o.json");
  CHECK(format_observations(read_observations(dir / "o.json")) == format_observations(obs));
  CHECK_FALSE(std::filesystem::exists(dir / "o.json.tmp"));
}

TEST_CASE("observation records are validated") {
  const std::string out_of_range =
      error_of<ValidationError>([] { parse_observations(obs_doc("[[0,0,0,1,2],[2,0,0,1,2]]")); });
  CHECK(out_of_range.find("record 1") != std::string::npos);
  CHECK(out_of_range.find("viewpoint 2") != std::string::npos);

  CHECK_THROWS_AS(parse_observations(obs_doc("[[0,2,0,1,2]]")), ValidationError);
  CHECK_THROWS_AS(parse_observations(obs_doc("[[0,0,6,1,2]]")), ValidationError);
  CHECK_THROWS_AS(parse_observations(obs_doc("[[0,0,-1,1,2]]")), ValidationError);

  const std::string dup =
      error_of<ValidationError>([] { parse_observations(obs_doc("[[0,0,0,1,2],[0,0,0,3,4]]")); });
  CHECK(dup.find("duplicates") != std::string::npos);

  CHECK_THROWS_AS(parse_observations(obs_doc("[[0,0,0,1]]")), ParseError);
  CHECK_THROWS_AS(parse_observations(obs_doc("[[0,0,0.5,1,2]]")), ParseError);
  CHECK_THROWS_AS(parse_observations(obs_doc("[[0,0,0,\"x\",2]]")), ParseError);
  CHECK_THROWS_AS(parse_observations(obs_doc("{}")), ParseError);
}

TEST_CASE("empty record list is a valid but uncalibratable set") {
  const ObservationSet obs = parse_observations(obs_doc("[]"));
  CHECK(obs.count() == 0);
  CHECK(obs.n_viewpoints() == 2);
  CHECK_THROWS_AS(run_closed_form(obs), ValidationError);
}

TEST_CASE("observation header errors carry context") {
  const std::string text = "{\n  \"format\": \"lfcal-observations\",\n  \"version\": 1,\n  oops\n}";
  try {
    parse_observations(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }

  const std::string missing = error_of<ParseError>([] {
    parse_observations(R"({"format": "lfcal-observations", "version": 1, "n_viewpoints": 1, "n_frames": 1, "records": []})");
  });
  CHECK(missing.find("board") != std::string::npos);

  const std::string typed = error_of<ParseError>([] {
    parse_observations(R"({"format": "lfcal-observations", "version": 1,
      "board": {"rows": "7", "cols": 10, "spacing_mm": 20}, "n_viewpoints": 1, "n_frames": 1, "records": []})");
  });
  CHECK(typed.find("$.board.rows") != std::string::npos);

  CHECK_THROWS_AS(parse_observations(R"({"format": "other", "version": 1})"), ParseError);
  CHECK_THROWS_AS(parse_observations(R"({"format": "lfcal-observations", "version": 2})"), ParseError);
  CHECK_THROWS_AS(parse_observations(R"([1, 2])"), ParseError);
  CHECK_THROWS_AS(parse_observations(R"({"format": "lfcal-observations", "version": 1,
      "board": {"rows": 0, "cols": 10, "spacing_mm": 20}, "n_viewpoints": 1, "n_frames": 1, "records": []})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_observations(R"({"format": "lfcal-observations", "version": 1,
      "board": {"rows": 2, "cols": 2, "spacing_mm": 20}, "n_viewpoints": 0, "n_frames": 1, "records": []})"),
                  ValidationError);
}

TEST_CASE("reading a file keeps the line number and adds the path") {
  test::TempDir dir("bad");
  {
    std::ofstream f(dir / "bad.json");
    f << "{\n\"format\": ,\n}";
  }
  try {
    read_observations(dir / "bad.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
  }
  CHECK_THROWS_AS(read_observations(dir / "missing.json"), ValidationError);
}

TEST_CASE("calibration round trip is lossless") {
  const Calibration c = sample_calibration();
  OptimizeReport rep;
  rep.initial_rms = 3.0537123456789;
  rep.final_rms = 0.59949712345678;
  rep.per_viewpoint_rms = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  rep.per_viewpoint_rms_std = 0.2581988897471611;
  rep.iterations = 30;
  rep.termination_reason = TerminationReason::kGradientConverged;
  const std::string text = format_calibration({c, rep});
  const CalibrationFileContents back = parse_calibration(text);
  CHECK_FALSE(back.distortion_defaulted);
  CHECK(back.warnings.empty());
  const Calibration& b = back.result.calibration;
  REQUIRE(b.n_viewpoints() == c.n_viewpoints());
  REQUIRE(b.n_frames() == c.n_frames());
  double worst = 0.0;
  for (int i = 0; i < c.n_viewpoints(); ++i) {
    const auto& x = c.viewpoints[i];
    const auto& y = b.viewpoints[i];
    CHECK(x.intrinsics == y.intrinsics);
    CHECK(x.distortion == y.distortion);
    worst = std::max(worst, test::max_abs(x.relative.rotation - y.relative.rotation));
    for (int k = 0; k < 3; ++k) worst = std::max(worst, rel_diff(x.relative.translation(k), y.relative.translation(k)));
  }
  for (int j = 0; j < c.n_frames(); ++j) {
    worst = std::max(worst, test::max_abs(c.frame_poses[j].rotation - b.frame_poses[j].rotation));
    for (int k = 0; k < 3; ++k) {
      worst = std::max(worst, rel_diff(c.frame_poses[j].translation(k), b.frame_poses[j].translation(k)));
    }
  }
  CHECK(worst <= 1e-12);
  REQUIRE(back.result.report.has_value());
  CHECK(back.result.report->initial_rms == rep.initial_rms);
  CHECK(back.result.report->final_rms == rep.final_rms);
  CHECK(back.result.report->per_viewpoint_rms == rep.per_viewpoint_rms);
  CHECK(back.result.report->per_viewpoint_rms_std == rep.per_viewpoint_rms_std);
  CHECK(back.result.report->iterations == 30);
  CHECK(back.result.report->termination_reason == TerminationReason::kGradientConverged);

  // A second round trip does not drift.
  const Calibration again = parse_calibration(format_calibration(back.result)).result.calibration;
  for (int j = 0; j < c.n_frames(); ++j) {
    CHECK(test::max_abs(again.frame_poses[j].rotation - b.frame_poses[j].rotation) < 1e-15);
    CHECK(again.frame_poses[j].translation == b.frame_poses[j].translation);
  }

  // Viewpoint 0 is written as exact zeros.
  CHECK(text.find("\"rotation\": [\n        0.0,\n        0.0,\n        0.0\n      ]") != std::string::npos);

  test::TempDir dir("cal");
  write_calibration({c, std::nullopt}, dir / "c.json");
  CHECK_FALSE(read_calibration(dir / "c.json").result.report.has_value());
}

TEST_CASE("calibration file validation") {
  const std::string base = R"({"format": "lfcal-calibration", "version": 1,
    "viewpoints": [{"intrinsics": [700, 700, 0, 320, 240], "distortion": [0, 0, 0, 0],
                    "rotation": ROT, "translation": [0, 0, 0]}],
    "frames": [{"rotation": [0.1, 0, 0], "translation": [0, 0, 800]}]})";
  auto with_rot = [&](const std::string& r) {
    std::string s = base;
    s.replace(s.find("ROT"), 3, r);
    return s;
  };
  CHECK_NOTHROW(parse_calibration(with_rot("[0, 0, 0]")));
  const std::string gauge = error_of<ValidationError>([&] { parse_calibration(with_rot("[0, 0, 1e-9]")); });
  CHECK(gauge.find("viewpoint 0") != std::string::npos);

  std::string no_dist = with_rot("[0, 0, 0]");
  no_dist.replace(no_dist.find("\"distortion\": [0, 0, 0, 0],"), 27, "");
  const CalibrationFileContents d = parse_calibration(no_dist);
  CHECK(d.distortion_defaulted);
  CHECK(d.warnings.size() == 1);
  CHECK(d.result.calibration.viewpoints[0].distortion.is_zero());

  std::string neg = with_rot("[0, 0, 0]");
  neg.replace(neg.find("[700, 700"), 9, "[-70, 700");
  CHECK_THROWS_AS(parse_calibration(neg), ValidationError);

  std::string short_intr = with_rot("[0, 0, 0]");
  short_intr.replace(short_intr.find("[700, 700, 0, 320, 240]"), 23, "[700, 700, 0, 320]");
  CHECK(error_of<ParseError>([&] { parse_calibration(short_intr); }).find("intrinsics") != std::string::npos);

  CHECK_THROWS_AS(parse_calibration(with_rot("[0, 0]")), ParseError);
  CHECK_THROWS_AS(parse_calibration(R"({"format": "lfcal-calibration", "version": 1, "viewpoints": [], "frames": []})"),
                  ParseError);

  std::string bad_report = with_rot("[0, 0, 0]");
  bad_report.insert(bad_report.rfind('}'), R"(, "report": {"initial_rms": 1, "final_rms": 1,
    "per_viewpoint_rms": [1], "per_viewpoint_rms_std": 0, "iterations": 3, "termination_reason": "tired"})");
  CHECK_THROWS_AS(parse_calibration(bad_report), ParseError);
}

TEST_CASE("simulation config round trip and defaults") {
  SimConfig cfg = SimConfig::small();
  cfg.seed = 123456789012345ULL;
  cfg.noise_sigma = 0.35;
  cfg.distortion = {0.01, -0.002, 0.0003, 0.0};
  cfg.rig_rotation_jitter_deg = 0.2;
  const SimConfig back = parse_sim_config(format_sim_config(cfg));
  CHECK(format_sim_config(back) == format_sim_config(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.grid_cols == 3);
  CHECK(back.distortion == cfg.distortion);

  const SimConfig defaults = parse_sim_config("{}");
  CHECK(format_sim_config(defaults) == format_sim_config(SimConfig::standard()));
  CHECK(parse_sim_config(R"({"grid": [1, 1]})").n_viewpoints() == 1);

  CHECK_THROWS_AS(parse_sim_config(R"({"gird": [1, 1]})"), ParseError);
  CHECK_THROWS_AS(parse_sim_config(R"({"grid": [1]})"), ParseError);
  CHECK_THROWS_AS(parse_sim_config(R"({"seed": -1})"), ParseError);
  CHECK_THROWS_AS(parse_sim_config(R"({"grid": [0, 5]})"), ValidationError);
  CHECK_THROWS_AS(parse_sim_config(R"({"spacing_mm": -10})"), ValidationError);
}

TEST_CASE("atomic writes leave nothing behind on failure") {
  test::TempDir dir("atomic");
  const auto target = dir / "missing_dir" / "out.json";
  CHECK_THROWS_AS(write_file_atomic(target, "x"), ValidationError);
  CHECK_FALSE(std::filesystem::exists(target));
  write_file_atomic(dir / "ok.txt", "hello");
  CHECK(read_file(dir / "ok.txt") == "hello");
  write_file_atomic(dir / "ok.txt", "again");
  CHECK(read_file(dir / "ok.txt") == "again");
}

TEST_CASE("PNM round trip") {
  auto g = test::rng(72);
  for (int channels : {1, 3}) {
    Image img(7, 5, channels);
    for (auto& s : img.samples()) s = std::round(test::uniform(g, 0, 255)) / 255.0;
    const std::string bytes = encode_pnm(img);
    CHECK(bytes.substr(0, 2) == (channels == 1 ? "P5" : "P6"));
    const Image back = decode_pnm(bytes);
    CHECK(back.channels() == channels);
    CHECK(back.width() == 7);
    CHECK(back.height() == 5);
    for (std::size_t k = 0; k < img.samples().size(); ++k) {
      CHECK(back.samples()[k] == doctest::Approx(img.samples()[k]).epsilon(1e-12));
    }
  }
  Image clamp(2, 1);
  clamp.at(0, 0) = -0.5;
  clamp.at(1, 0) = 1.5;
  const Image c = decode_pnm(encode_pnm(clamp));
  CHECK(c.at(0, 0) == 0.0);
  CHECK(c.at(1, 0) == 1.0);

  test::TempDir dir("pnm");
  write_image(clamp, dir / "a.pgm");
  CHECK(read_image(dir / "a.pgm").width() == 2);
}

TEST_CASE("PNM header parsing") {
  std::string bytes = "P5\n# comment line\n2 1\n# another\n100\n";
  bytes.push_back(static_cast<char>(50));
  bytes.push_back(static_cast<char>(100));
  const Image img = decode_pnm(bytes);
  CHECK(img.at(0, 0) == doctest::Approx(0.5));
  CHECK(img.at(1, 0) == 1.0);

  CHECK_THROWS_AS(decode_pnm("P2\n2 1\n255\n"), ParseError);
  CHECK_THROWS_AS(decode_pnm("P5\n2 1\n255\nx"), ParseError);
  CHECK_THROWS_AS(decode_pnm("P5\n2 1\n65535\nxxxx"), ParseError);
  CHECK_THROWS_AS(decode_pnm("P5\n2 x\n255\nxx"), ParseError);
  CHECK_THROWS_AS(decode_pnm("P5\n2"), ParseError);
  CHECK_THROWS_AS(decode_pnm("P5\n0 1\n255\n"), ParseError);
}
