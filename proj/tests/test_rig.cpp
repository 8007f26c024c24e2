#include <doctest.h>

#include <random>

#include "mocap/rig.hpp"
#include "mocap/synth.hpp"
#include "support.hpp"

using namespace mocap;
using doctest::Approx;

TEST_CASE("project: optical-axis point lands on the principal point") {
  CameraModel c;
  c.intrinsics = Mat3::Identity();
  const Vec2 uv = project(c, Vec3(0, 0, 1));
  CHECK(uv.x() == Approx(0.0));
  CHECK(uv.y() == Approx(0.0));
  CHECK(project_pixel(c, Vec3(0, 0, 1)).confidence == 1.0);
}

TEST_CASE("project: focal 1000 px, principal (960, 540)") {
  CameraModel c;
  c.intrinsics = intrinsics_matrix(1000, 1000, 960, 540);
  const Vec2 uv = project(c, Vec3(0.1, 0, 1));
  CHECK(uv.x() == Approx(1060.0).epsilon(1e-12));
  CHECK(uv.y() == Approx(540.0).epsilon(1e-12));
}

TEST_CASE("project: scaling the projection matrix leaves pixels unchanged") {
  std::mt19937_64 rng(11);
  const CameraModel c = testing::camera_at("a", Vec3(3, 1, 1.5), Vec3(0, 0, 1));
  const Mat34 a = c.projection().matrix();
  const ProjectionMatrix scaled(7.0 * a);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = testing::random_vec(rng, -0.5, 0.5) + Vec3(0, 0, 1);
    CHECK((scaled.project(p) - c.projection().project(p)).norm() < 1e-9);
    const Vec3 h = a * p.homogeneous();
    CHECK((h.hnormalized() - (7.0 * a * p.homogeneous()).hnormalized()).norm() < 1e-9);
  }
}

TEST_CASE("project: point on the principal plane is at infinity") {
  CameraModel c;
  c.intrinsics = intrinsics_matrix(1000, 1000, 960, 540);
  CHECK_THROWS_AS(project(c, Vec3(1, 1, 0)), Error);
  try {
    project(c, Vec3(1, 1, 0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::point_at_infinity);
  }
}

TEST_CASE("projection matrix is stored with a unit last row and positive depth") {
  const CameraModel c = testing::camera_at("a", Vec3(3, 1, 1.5), Vec3(0, 0, 1));
  const ProjectionMatrix p(-3.5 * c.projection().matrix());
  CHECK(p.matrix().row(2).norm() == Approx(1.0).epsilon(1e-15));
  CHECK(p.apply(Vec3(0, 0, 1)).z() > 0.0);
  CHECK((p.matrix() - c.projection().matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reprojection error: zero on exact, 5 px on a 3-4-5 offset") {
  CameraModel c;
  c.intrinsics = intrinsics_matrix(1000, 1000, 960, 540);
  const Vec3 p(0.1, -0.2, 2.0);
  const Vec2 uv = project(c, p);
  CHECK(reprojection_error(c, p, {uv, 1.0}) == Approx(0.0));
  CHECK(reprojection_error(c, p, {uv + Vec2(3, 4), 1.0}) == Approx(5.0).epsilon(1e-12));
}

TEST_CASE("reprojection error under 1 px Gaussian noise averages sigma*sqrt(pi/2)") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const CameraModel c = testing::camera_at("a", Vec3(3, 0, 1), Vec3(0, 0, 1));
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = testing::random_vec(rng, -0.5, 0.5) + Vec3(0, 0, 1);
    const double nx = g(rng), ny = g(rng);
    sum += reprojection_error(c, p, {project(c, p) + Vec2(nx, ny), 1.0});
  }
  CHECK(sum / n == Approx(std::sqrt(kPi / 2.0)).epsilon(0.10));
}

TEST_CASE("gauge invariance: one rigid motion of camera and point leaves pixels unchanged") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const CameraModel c = testing::camera_at("a", Vec3(2.5, -1, 1.4), Vec3(0, 0, 1));
    const Mat3 r = testing::random_rotation(rng);
    const Vec3 t = testing::random_vec(rng, -5, 5);
    CameraModel moved = c;
    moved.rotation = c.rotation * r.transpose();
    moved.center = r * c.center + t;
    for (int i = 0; i < 10; ++i) {
      const Vec3 p = testing::random_vec(rng, -0.5, 0.5) + Vec3(0, 0, 1);
      CHECK((project(moved, r * p + t) - project(c, p)).norm() < 1e-9);
    }
  }
}

TEST_CASE("collinear world points map to collinear pixels") {
  const CameraModel c = testing::camera_at("a", Vec3(2.5, -1, 1.4), Vec3(0, 0, 1));
  const Vec3 a(0.1, 0.2, 0.8), d(0.3, -0.1, 0.4);
  const Vec3 h0 = project(c, a).homogeneous(), h1 = project(c, a + d).homogeneous(), h2 = project(c, a + 2.5 * d).homogeneous();
  // Normalise to image scale so the determinant is in comparable units.
  const double det = h0.cross(h1).dot(h2) / (h0.norm() * h1.norm() * h2.norm());
  CHECK(std::abs(det) < 1e-9);
}

TEST_CASE("distortion: Brown-Conrady apply and remove are inverse") {
  Distortion d{{-0.12, 0.03, 0.001, -0.0005, 0.002}};
  for (double x : {-0.4, -0.1, 0.0, 0.2, 0.45}) {
    for (double y : {-0.3, 0.0, 0.25}) {
      const Vec2 n(x, y);
      CHECK((d.remove(d.apply(n)) - n).norm() < 1e-12);
    }
  }
  CameraModel c = testing::camera_at("a", Vec3(3, 0, 1), Vec3(0, 0, 1));
  c.distortion = d;
  const Vec3 p(0.2, 0.3, 1.4);
  CameraModel ideal = c;
  ideal.distortion = {};
  CHECK((c.undistort(project(c, p)) - project(ideal, p)).norm() < 1e-8);
}

TEST_CASE("camera validation rejects broken parameters") {
  CameraModel c = testing::camera_at("a", Vec3(3, 0, 1), Vec3(0, 0, 1));
  CHECK_NOTHROW(c.validate());
  CameraModel bad = c;
  bad.rotation(0, 0) += 1e-3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.rotation = -c.rotation;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.intrinsics(0, 0) = -5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.intrinsics(0, 2) = 5000;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.distortion.coefficients.assign(6, 0.0);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("look_at_rotation puts the target on the optical axis") {
  const Vec3 pos(1.8, 0.2, 0.9), target(0, 0, 0.9);
  const CameraModel c = testing::camera_at("a", pos, target);
  const Vec2 uv = project(c, target);
  CHECK(uv.x() == Approx(960.0));
  CHECK(uv.y() == Approx(540.0));
  CHECK(c.rotation.determinant() == Approx(1.0));
  // Image "down" follows world -z.
  CHECK(project(c, target - Vec3(0, 0, 0.1)).y() > 540.0);
}

TEST_CASE("paper rig: four cameras at the stated separations") {
  const auto rig = synth::paper_rig();
  REQUIRE(rig.cameras.size() == 4);
  const auto* ant = find_camera(rig.cameras, "anterior");
  const auto* post = find_camera(rig.cameras, "posterior");
  const auto* left = find_camera(rig.cameras, "left");
  const auto* right = find_camera(rig.cameras, "right");
  REQUIRE((ant && post && left && right));
  CHECK((ant->center - post->center).norm() == Approx(3.67).epsilon(1e-9));
  CHECK((left->center - right->center).norm() == Approx(2.45).epsilon(1e-9));
  for (const auto& c : rig.cameras) {
    CHECK_NOTHROW(c.validate());
    const Vec2 uv = project(c, Vec3(0, 0, 0.9));
    CHECK(uv.x() == Approx(960.0));
    CHECK(uv.y() == Approx(540.0));
  }
  CHECK(find_camera(rig.cameras, "nope") == nullptr);
}
