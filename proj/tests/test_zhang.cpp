#include <doctest.h>

#include <vector>

#include "lfcal/errors.hpp"
#include "lfcal/optimizer.hpp"
#include "lfcal/simulator.hpp"
#include "lfcal/zhang.hpp"
#include "support.hpp"

using namespace lfcal;
using lfcal::test::uniform;

namespace {

Homography synthesize(const Intrinsics& in, const RigidTransform& pose) {
  Mat3 m;
  m.col(0) = pose.rotation.col(0);
  m.col(1) = pose.rotation.col(1);
  m.col(2) = pose.translation;
  return Homography::from_matrix(in.matrix() * m);
}

RigidTransform random_board_pose(std::mt19937_64& g) {
  return RigidTransform::from_axis_angle(
      test::random_axis_angle(g, 0.1, 0.6),
      {uniform(g, -100, 100), uniform(g, -100, 100), uniform(g, 500, 1500)});
}

double rel_err(double est, double truth) { return std::abs(est - truth) / std::abs(truth); }

}  // namespace

TEST_CASE("intrinsics from 11 noiseless homographies") {
  auto g = test::rng(41);
  const Intrinsics truth{700, 700, 0, 320, 240};
  std::vector<Homography> hs;
  for (int j = 0; j < 11; ++j) hs.push_back(synthesize(truth, random_board_pose(g)));
  const Intrinsics est = intrinsics_from_homographies(hs);
  CHECK(rel_err(est.alpha, 700) < 1e-6);
  CHECK(rel_err(est.beta, 700) < 1e-6);
  CHECK(std::abs(est.gamma) < 1e-6 * 700);
  CHECK(rel_err(est.u0, 320) < 1e-6);
  CHECK(rel_err(est.v0, 240) < 1e-6);

  // Non-zero skew and unequal focal lengths are recovered as well.
  const Intrinsics skewed{820, 760, 2.5, 300, 250};
  hs.clear();
  for (int j = 0; j < 6; ++j) hs.push_back(synthesize(skewed, random_board_pose(g)));
  const Intrinsics est2 = intrinsics_from_homographies(hs);
  CHECK(rel_err(est2.alpha, 820) < 1e-6);
  CHECK(rel_err(est2.beta, 760) < 1e-6);
  CHECK(rel_err(est2.gamma, 2.5) < 1e-4);
  CHECK(rel_err(est2.u0, 300) < 1e-6);
  CHECK(rel_err(est2.v0, 250) < 1e-6);
}

TEST_CASE("fixed skew needs only two homographies") {
  auto g = test::rng(42);
  const Intrinsics truth{700, 700, 0, 320, 240};
  std::vector<Homography> hs{synthesize(truth, random_board_pose(g)),
                             synthesize(truth, random_board_pose(g))};
  CHECK_THROWS_AS(intrinsics_from_homographies(hs, false), NumericError);
  const Intrinsics est = intrinsics_from_homographies(hs, true);
  CHECK(est.gamma == 0.0);
  CHECK(rel_err(est.alpha, 700) < 1e-6);
  CHECK(rel_err(est.v0, 240) < 1e-6);
}

TEST_CASE("parallel board orientations are rank deficient") {
  auto g = test::rng(43);
  const Intrinsics truth{700, 700, 0, 320, 240};
  const RigidTransform a = random_board_pose(g);
  RigidTransform b = a;
  b.translation += Vec3{30, -20, 150};
  const std::vector<Homography> hs{synthesize(truth, a), synthesize(truth, b),
                                   synthesize(truth, random_board_pose(g))};
  CHECK_THROWS_AS(intrinsics_from_homographies(hs), NumericError);
}

TEST_CASE("extrinsics from a synthesized homography") {
  auto g = test::rng(44);
  const Intrinsics in{700, 690, 0.5, 320, 240};
  for (int n = 0; n < 100; ++n) {
    const RigidTransform pose = random_board_pose(g);
    const Homography h = synthesize(in, pose);
    const RigidTransform est = extrinsics_from_homography(in, h);
    CHECK(test::max_abs(est.rotation - pose.rotation) < 1e-8);
    CHECK((est.translation - pose.translation).norm() < 1e-8 * pose.translation.norm());

    // The sign of H is irrelevant.
    const RigidTransform flipped = extrinsics_from_homography(in, Homography{-h.h});
    CHECK(test::max_abs(flipped.rotation - est.rotation) < 1e-12);
    CHECK((flipped.translation - est.translation).norm() < 1e-9);
  }

  const RigidTransform frontal{Mat3::Identity(), {-90, -60, 800}};
  const RigidTransform est = extrinsics_from_homography(in, synthesize(in, frontal));
  CHECK(test::max_abs(est.rotation - Mat3::Identity()) < 1e-8);
  CHECK((est.translation - frontal.translation).norm() < 1e-8);
}

TEST_CASE("aggregate_relative_poses examples") {
  CHECK_THROWS_AS(aggregate_relative_poses({}), ArgumentError);

  auto g = test::rng(45);
  const RigidTransform t = test::random_transform(g);
  const std::vector<RigidTransform> same{t, t, t, t};
  const RigidTransform agg = aggregate_relative_poses(same);
  CHECK(agg.rotation == t.rotation);
  CHECK(agg.translation == t.translation);

  const std::vector<RigidTransform> outlier{{Mat3::Identity(), {1, 0, 0}},
                                            {Mat3::Identity(), {2, 0, 0}},
                                            {Mat3::Identity(), {100, 0, 0}}};
  const RigidTransform med = aggregate_relative_poses(outlier);
  CHECK(med.translation == Vec3(2, 0, 0));
  CHECK(test::max_abs(med.rotation - Mat3::Identity()) == 0.0);
}

TEST_CASE("median aggregate is robust to one corrupted frame") {
  auto g = test::rng(46);
  for (int n = 0; n < 1000; ++n) {
    const RigidTransform base = RigidTransform::from_axis_angle(
        test::random_axis_angle(g, 0.0, 0.3), {uniform(g, -50, 50), uniform(g, -50, 50), 0});
    std::vector<RigidTransform> poses;
    for (int f = 0; f < 7; ++f) {
      poses.push_back(RigidTransform::from_axis_angle(
          base.axis_angle() + test::random_axis_angle(g, 0.0, 0.01),
          base.translation + Vec3{uniform(g, -1, 1), uniform(g, -1, 1), uniform(g, -1, 1)}));
    }
    const std::vector<RigidTransform> clean(poses.begin() + 1, poses.end());
    poses[0] = test::random_transform(g);
    const RigidTransform agg = aggregate_relative_poses(poses);
    const AxisAngle r = agg.axis_angle();
    for (int c = 0; c < 3; ++c) {
      double tlo = 1e300, thi = -1e300, rlo = 1e300, rhi = -1e300;
      for (const auto& p : clean) {
        tlo = std::min(tlo, p.translation(c));
        thi = std::max(thi, p.translation(c));
        rlo = std::min(rlo, p.axis_angle()(c));
        rhi = std::max(rhi, p.axis_angle()(c));
      }
      CHECK(agg.translation(c) >= tlo);
      CHECK(agg.translation(c) <= thi);
      CHECK(r(c) >= rlo - 1e-12);
      CHECK(r(c) <= rhi + 1e-12);
    }
  }
}

TEST_CASE("closed form on the noiseless standard configuration") {
  const SimConfig cfg = SimConfig::standard();
  const SimScene scene = generate_scene(cfg, 5);
  const InitialCalibration init = run_closed_form(scene.observations);

  CHECK(init.n_viewpoints() == 25);
  CHECK(init.n_frames() == 11);
  // Gauge is exact.
  CHECK(init.viewpoints[0].relative.rotation == Mat3::Identity());
  CHECK(init.viewpoints[0].relative.translation == Vec3::Zero());

  double worst_intr = 0.0;
  double worst_t = 0.0;
  for (int i = 0; i < 25; ++i) {
    const auto& est = init.viewpoints[i];
    const auto& truth = scene.truth.viewpoints[i];
    CHECK(est.distortion.is_zero());
    worst_intr = std::max({worst_intr, rel_err(est.intrinsics.alpha, 700),
                           rel_err(est.intrinsics.beta, 700), rel_err(est.intrinsics.u0, 320),
                           rel_err(est.intrinsics.v0, 240), std::abs(est.intrinsics.gamma) / 700});
    worst_t = std::max(worst_t, (est.relative.translation - truth.relative.translation).norm());
  }
  CHECK(worst_intr < 1e-6);
  CHECK(worst_t < 1e-6);
}

TEST_CASE("noiseless per-frame relative poses agree") {
  const SimScene scene = generate_scene(SimConfig::small(), 6);
  const ViewpointInit ref = calibrate_viewpoint(scene.observations, 0);
  for (int i = 1; i < scene.observations.n_viewpoints(); ++i) {
    const auto rel = per_frame_relative_poses(calibrate_viewpoint(scene.observations, i), ref);
    REQUIRE(rel.size() == 5);
    for (const auto& r : rel) {
      CHECK(test::max_abs(r.rotation - rel[0].rotation) < 1e-9);
      CHECK((r.translation - rel[0].translation).norm() < 1e-9);
    }
    const RigidTransform agg = aggregate_relative_poses(rel);
    CHECK((agg.translation - rel[3].translation).norm() < 1e-9);
    CHECK(test::max_abs(agg.rotation - rel[3].rotation) < 1e-9);
  }
}

TEST_CASE("noisy closed form is finite and improved by optimization") {
  const SimScene scene = generate_scene(SimConfig::small(), 7);
  const ObservationSet noisy = add_noise(scene.observations, 0.5, 99);
  const InitialCalibration init = run_closed_form(noisy);
  const double r0 = rms(residuals(init, noisy));
  CHECK(std::isfinite(r0));
  const OptimizeResult res = optimize(init, noisy);
  CHECK(res.report.final_rms < r0);
}

TEST_CASE("a viewpoint with two frames is rejected by name") {
  const SimScene scene = generate_scene(SimConfig::small(), 8);
  ObservationSet obs = scene.observations;
  for (int j = 2; j < obs.n_frames(); ++j) obs.clear_view(4, j);
  try {
    run_closed_form(obs);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("viewpoint 4") != std::string::npos);
  }
  // With the skew pinned two frames are enough.
  CHECK_NOTHROW(run_closed_form(obs, ClosedFormOptions{true}));
}

TEST_CASE("frames missing from viewpoint 0 are recovered through another viewpoint") {
  const SimScene scene = generate_scene(SimConfig::small(), 9);
  ObservationSet obs = scene.observations;
  // A homography failure (too few points after dropping) on viewpoint 0 only.
  for (int k = 4; k < obs.n_points(); ++k) obs.erase(0, 2, k);
  for (int k = 1; k < 4; ++k) obs.set(0, 2, k, *obs.at(0, 2, 0) + Vec2(k, k));
  const InitialCalibration init = run_closed_form(obs);
  CHECK((init.frame_poses[2].translation - scene.truth.frame_poses[2].translation).norm() < 1e-6);
}
