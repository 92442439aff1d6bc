#include <doctest.h>

#include <fstream>
#include <sstream>
#include <vector>

#include "lfcal/cli.hpp"
#include "lfcal/dataio.hpp"
#include "lfcal/image_io.hpp"
#include "lfcal/simulator.hpp"
#include "lfcal/zhang.hpp"
#include "support.hpp"

using namespace lfcal;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lfcal");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

double printed_value(const std::string& text, const std::string& label) {
  const auto pos = text.find(label);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + label.size()));
}

// Three frames of a parallel board: the closed form is rank deficient.
ObservationSet parallel_frames() {
  const BoardSpec board{7, 10, 20.0};
  ObservationSet obs(board, 1, 3);
  const Intrinsics in{700, 700, 0, 320, 240};
  const Mat3 r = axis_angle_to_matrix({0.2, 0.1, 0.0});
  for (int j = 0; j < 3; ++j) {
    const RigidTransform pose{r, {-90.0 + 10 * j, -60.0, 800.0 + 50 * j}};
    for (int k = 0; k < board.point_count(); ++k) {
      const Point2 m = board.model_point(k);
      obs.set(0, j, k, project(in, {}, pose, {m.x(), m.y(), 0.0}));
    }
  }
  return obs;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"calibrate"}).code == kExitUsage);
  CHECK(run({"simulate", "-o", "x.json", "--preset", "giant"}).code == kExitUsage);
  CHECK(run({"simulate", "-o", "x.json", "--preset", "small", "--config", "c.json"}).code == kExitUsage);
  CHECK(run({"sweep", "-o", "x.csv", "--trials", "3", "--extended"}).code == kExitUsage);
  CHECK(run({"calibrate", "-i", "a", "-o", "b", "--max-iters", "0"}).code == kExitUsage);
  const Run help = run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("calibrate") != std::string::npos);
}

TEST_CASE("simulate writes the standard preset deterministically") {
  test::TempDir dir("sim");
  const Run a = run({"simulate", "-o", (dir / "a.json").string(), "--seed", "7", "--truth",
                     (dir / "truth.json").string()});
  CHECK(a.code == kExitOk);
  CHECK(a.out.find("19250 records") != std::string::npos);
  CHECK(read_observations(dir / "a.json").count() == 19250);
  CHECK(read_calibration(dir / "truth.json").result.calibration.n_viewpoints() == 25);

  CHECK(run({"simulate", "-o", (dir / "b.json").string(), "--seed", "7"}).code == kExitOk);
  CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
  CHECK(run({"simulate", "-o", (dir / "c.json").string(), "--seed", "8"}).code == kExitOk);
  CHECK(read_file(dir / "a.json") != read_file(dir / "c.json"));

  const Run single = run({"simulate", "--preset", "single", "-o", (dir / "s.json").string()});
  CHECK(single.code == kExitOk);
  const ObservationSet s = read_observations(dir / "s.json");
  CHECK(s.n_viewpoints() == 1);
  CHECK_NOTHROW(s.validate());

  {
    std::ofstream f(dir / "bad.json");
    f << R"({"grid": [0, 3]})";
  }
  const Run bad = run({"simulate", "--config", (dir / "bad.json").string(), "-o", (dir / "d.json").string()});
  CHECK(bad.code == kExitData);
  CHECK_FALSE(std::filesystem::exists(dir / "d.json"));
}

TEST_CASE("calibrate a noiseless simulation") {
  test::TempDir dir("cal");
  REQUIRE(run({"simulate", "-o", (dir / "obs.json").string()}).code == kExitOk);
  const Run r = run({"calibrate", "-i", (dir / "obs.json").string(), "-o", (dir / "cal.json").string()});
  CHECK(r.code == kExitOk);
  CHECK(printed_value(r.out, "final RMS:") < 1e-8);
  CHECK(r.out.find("iterations:") != std::string::npos);
  CHECK(r.out.find("       24  ") != std::string::npos);
  const auto cal = read_calibration(dir / "cal.json");
  REQUIRE(cal.result.report.has_value());
  CHECK(cal.result.report->final_rms < 1e-8);
}

TEST_CASE("calibrate honours --no-intrinsics") {
  test::TempDir dir("noin");
  REQUIRE(run({"simulate", "--preset", "small", "--noise", "0.4", "-o", (dir / "obs.json").string()}).code ==
          kExitOk);
  const Run r = run({"calibrate", "-i", (dir / "obs.json").string(), "-o", (dir / "cal.json").string(),
                     "--no-intrinsics", "--no-distortion"});
  CHECK(r.code == kExitOk);
  const InitialCalibration init = run_closed_form(read_observations(dir / "obs.json"));
  const Calibration out = read_calibration(dir / "cal.json").result.calibration;
  for (int i = 0; i < out.n_viewpoints(); ++i) {
    CHECK(out.viewpoints[i].intrinsics == init.viewpoints[i].intrinsics);
    CHECK(out.viewpoints[i].distortion.is_zero());
  }
  CHECK(printed_value(r.out, "final RMS:") < printed_value(r.out, "initial RMS:"));
}

TEST_CASE("calibrate failures leave no output") {
  test::TempDir dir("fail");
  {
    std::ofstream f(dir / "bad.json");
    f << "{\n  \"format\": \"lfcal-observations\",\n  \"version\": 1,\n  \"board\": [\n";
  }
  const Run parse = run({"calibrate", "-i", (dir / "bad.json").string(), "-o", (dir / "cal.json").string()});
  CHECK(parse.code == kExitData);
  CHECK(parse.err.find("line") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "cal.json"));

  const Run missing = run({"calibrate", "-i", (dir / "nope.json").string(), "-o", (dir / "cal.json").string()});
  CHECK(missing.code == kExitData);

  write_observations(parallel_frames(), dir / "parallel.json");
  const Run numeric = run({"calibrate", "-i", (dir / "parallel.json").string(), "-o", (dir / "cal.json").string()});
  CHECK(numeric.code == kExitNumeric);
  CHECK(numeric.err.find("rank deficient") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "cal.json"));
}

TEST_CASE("sweep writes one row per sigma, method and metric") {
  test::TempDir dir("sweep");
  const Run zero = run({"sweep", "--preset", "small", "--sigmas", "0", "--trials", "1", "-o",
                        (dir / "zero.csv").string()});
  CHECK(zero.code == kExitOk);
  std::istringstream csv(read_file(dir / "zero.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const double mean = std::stod(line.substr(line.find(',', line.find(',', line.find(',') + 1) + 1) + 1));
    CHECK(mean < 1e-5);
  }
  CHECK(rows == 15);

  const Run nine = run({"sweep", "--preset", "small", "--trials", "1", "--threads", "2", "-o",
                        (dir / "nine.csv").string()});
  CHECK(nine.code == kExitOk);
  const std::string text = read_file(dir / "nine.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 9 * 3 * 5);

  const Run unreadable = run({"sweep", "--config", (dir / "none.json").string(), "-o", (dir / "x.csv").string()});
  CHECK(unreadable.code == kExitData);
  CHECK_FALSE(std::filesystem::exists(dir / "x.csv"));
}

TEST_CASE("rectify and refocus") {
  test::TempDir dir("lf");
  SimConfig cfg = SimConfig::small();
  cfg.grid_cols = 2;
  cfg.grid_rows = 1;
  const SimScene scene = generate_scene(cfg, 3);
  write_calibration({scene.truth, std::nullopt}, dir / "cal.json");
  PlaneRenderOptions opts;
  opts.width = 64;
  opts.height = 48;
  Image tex(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) tex.at(x, y) = ((x / 4 + y / 4) % 2) ? 1.0 : 0.0;
  }
  const auto views = render_plane_views(scene.truth, tex, 500.0, opts);
  write_image(views[0], dir / "v0.pgm");
  write_image(views[1], dir / "v1.pgm");
  write_image(Image(32, 48), dir / "odd.pgm");

  const std::string cal = (dir / "cal.json").string();
  const std::string v0 = (dir / "v0.pgm").string();
  const std::string v1 = (dir / "v1.pgm").string();

  const Run rect = run({"rectify", "-c", cal, "--images", v0, v1, "--output-dir", (dir / "rect").string()});
  CHECK(rect.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "rect" / "view_000.pgm"));
  CHECK(std::filesystem::exists(dir / "rect" / "view_001.pgm"));

  const Run ref = run({"refocus", "-c", cal, "--images", v0, v1, "--depth", "500", "-o", (dir / "r.pgm").string()});
  CHECK(ref.code == kExitOk);
  CHECK(printed_value(ref.out, "sharpness:") > 0.0);
  CHECK(read_image(dir / "r.pgm").width() == 64);

  const Run count = run({"refocus", "-c", cal, "--images", v0, "--depth", "500", "-o", (dir / "c.pgm").string()});
  CHECK(count.code == kExitData);
  CHECK(count.err.find("expected 2 images") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "c.pgm"));

  const Run dims = run({"rectify", "-c", cal, "--images", v0, (dir / "odd.pgm").string(), "--output-dir",
                        (dir / "rect2").string()});
  CHECK(dims.code == kExitData);
  CHECK_FALSE(std::filesystem::exists(dir / "rect2"));

  const Run depth = run({"refocus", "-c", cal, "--images", v0, v1, "--depth", "-1", "-o", (dir / "d.pgm").string()});
  CHECK(depth.code == kExitUsage);
}

TEST_CASE("single-view refocus returns the input view") {
  test::TempDir dir("one");
  const SimScene scene = generate_scene(SimConfig::single_camera(), 4);
  write_calibration({scene.truth, std::nullopt}, dir / "cal.json");
  auto g = test::rng(81);
  Image img(640, 480);
  for (auto& s : img.samples()) s = std::round(test::uniform(g, 0, 255)) / 255.0;
  write_image(img, dir / "v.pgm");
  const Run r = run({"refocus", "-c", (dir / "cal.json").string(), "--images", (dir / "v.pgm").string(),
                     "--depth", "700", "-o", (dir / "out.pgm").string()});
  CHECK(r.code == kExitOk);
  CHECK(read_file(dir / "out.pgm") == read_file(dir / "v.pgm"));
}
