#include <doctest.h>

#include <random>

#include "mocap/calib.hpp"
#include "mocap/synth.hpp"
#include "support.hpp"

using namespace mocap;
using doctest::Approx;

namespace {

CameraModel reference_camera() { return testing::camera_at("cam", Vec3(3.0, 1.0, 1.5), Vec3(0, 0, 1)); }

std::vector<Vec3> volume_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(testing::random_vec(rng, -0.6, 0.6) + Vec3(0, 0, 1));
  return pts;
}

double max_reprojection(const CameraModel& c, const CorrespondenceSet& set) {
  double worst = 0.0;
  for (const auto& p : set.pairs) worst = std::max(worst, reprojection_error(c, p.world, p.pixel));
  return worst;
}

}  // namespace

TEST_CASE("resect: ten exact correspondences recover the camera") {
  const CameraModel truth = reference_camera();
  const auto set = synth::correspondences(truth, volume_points(10, 3));
  const ProjectionMatrix a = resect(set);
  CHECK((a.matrix() - truth.projection().matrix()).cwiseAbs().maxCoeff() < 1e-9);
  const CameraModel c = decompose(a);
  CHECK(max_reprojection(c, set) < 1e-6);
  CHECK((c.center - truth.center).norm() < 1e-6);
  CHECK((c.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((c.intrinsics - truth.intrinsics).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("resect: 0.5 px noise keeps the mean reprojection error under 1.5 px") {
  const CameraModel truth = reference_camera();
  double worst_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto set = synth::correspondences(truth, volume_points(10, 1000 + seed), 0.5, seed);
    const CameraModel c = decompose(resect(set));
    worst_mean = std::max(worst_mean, audit(c, set).mean_error);
  }
  CHECK(worst_mean < 1.5);
}

TEST_CASE("resect: fewer than six correspondences") {
  const auto set = synth::correspondences(reference_camera(), volume_points(5, 3));
  try {
    resect(set);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_points);
  }
}

TEST_CASE("resect: coplanar world points are degenerate") {
  std::vector<Vec3> plane;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) plane.emplace_back(0.0, 0.1 * i, 0.8 + 0.1 * j);
  }
  const auto set = synth::correspondences(reference_camera(), plane);
  try {
    resect(set);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_configuration);
  }
}

TEST_CASE("resect: checkerboard placements give a usable calibration") {
  const auto pts = synth::checkerboard_placements();
  CHECK(pts.size() == 45);
  // Adjacent corners on one board are one 95 mm square apart.
  CHECK((pts[1] - pts[0]).norm() == Approx(0.095));
  CHECK((pts[5] - pts[0]).norm() == Approx(0.095));
  for (const auto& cam : synth::paper_rig().cameras) {
    const auto set = synth::correspondences(cam, pts);
    const CameraModel c = decompose(resect(set));
    CHECK((c.center - cam.center).norm() < 1e-6);
  }
}

TEST_CASE("decompose inverts compose over random cameras") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Mat3 k = intrinsics_matrix(400 + 1500 * u(rng), 400 + 1500 * u(rng), 800 + 300 * u(rng), 400 + 300 * u(rng),
                                     5 * (u(rng) - 0.5));
    const Mat3 r = testing::random_rotation(rng);
    const Vec3 c = testing::random_vec(rng, -4, 4);
    const CameraModel back = decompose(compose(k, r, c));
    CHECK((back.intrinsics - k).cwiseAbs().maxCoeff() < 1e-9 * k.norm());
    CHECK((back.rotation - r).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((back.center - c).norm() < 1e-9);
    const Mat34 a = compose(k, r, c).matrix();
    CHECK((back.projection().matrix() - a).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("decompose: singular left block") {
  Mat34 a = Mat34::Zero();
  a(0, 0) = 1;
  a(1, 1) = 1;
  a(2, 0) = 1;
  a(2, 3) = 1;
  try {
    decompose(ProjectionMatrix(a));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_left_block);
  }
}

TEST_CASE("resect is scale-equivariant in pixel coordinates") {
  const CameraModel truth = reference_camera();
  auto set = synth::correspondences(truth, volume_points(12, 9), 0.3, 4);
  const CameraModel base = decompose(resect(set));
  const double s = 2.5;
  for (auto& p : set.pairs) p.pixel.uv *= s;
  const CameraModel scaled = decompose(resect(set));
  CHECK(scaled.intrinsics(0, 0) == Approx(s * base.intrinsics(0, 0)).epsilon(1e-6));
  CHECK(scaled.intrinsics(1, 1) == Approx(s * base.intrinsics(1, 1)).epsilon(1e-6));
  CHECK(scaled.intrinsics(0, 2) == Approx(s * base.intrinsics(0, 2)).epsilon(1e-6));
  CHECK(scaled.intrinsics(1, 2) == Approx(s * base.intrinsics(1, 2)).epsilon(1e-6));
  CHECK((scaled.rotation - base.rotation).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((scaled.center - base.center).norm() < 1e-6);
}

TEST_CASE("audit: clean points, default 8 px threshold") {
  CHECK(kCalibrationThresholdPx == 8.0);
  const CameraModel truth = reference_camera();
  const auto set = synth::correspondences(truth, volume_points(15, 5));
  const auto report = audit(truth, set);
  CHECK(report.threshold == 8.0);
  CHECK(report.excluded_points.empty());
  CHECK_FALSE(report.recalibration_recommended);
  CHECK(report.mean_error <= report.max_error);
  CHECK(report.max_error < 1e-9);
}

TEST_CASE("audit: one 20 px outlier is the only exclusion") {
  const CameraModel truth = reference_camera();
  auto set = synth::correspondences(truth, volume_points(15, 5));
  set.pairs[6].pixel.uv += Vec2(12.0, 16.0);
  const auto report = audit(truth, set, 8.0);
  REQUIRE(report.excluded_points.size() == 1);
  CHECK(report.excluded_points[0] == 6);
  CHECK(report.per_point_errors[6] == Approx(20.0));
  for (std::size_t i : report.excluded_points) CHECK(report.per_point_errors[i] > report.threshold);
}

TEST_CASE("audit: flags recalibration when the mean exceeds the threshold") {
  const CameraModel truth = reference_camera();
  auto set = synth::correspondences(truth, volume_points(10, 5));
  for (auto& p : set.pairs) p.pixel.uv += Vec2(9.0, 0.0);
  const auto report = audit(truth, set, 8.0);
  CHECK(report.recalibration_recommended);
  CHECK(report.excluded_points.size() == 10);
}
