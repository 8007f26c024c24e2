#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mocap/types.hpp"

namespace mocap {

inline constexpr double kMinHomogeneousW = 1e-12;

/// A pixel observation with a detector confidence in [0, 1].
struct PixelPoint {
  Vec2 uv = Vec2::Zero();
  double confidence = 1.0;
};

using WorldPoint = Vec3;

/// Homogeneous 3x4 camera matrix stored with a unit-norm last row whose sign
/// makes the left 3x3 block's determinant positive, so points in front of the
/// camera have positive homogeneous w.
class ProjectionMatrix {
 public:
  ProjectionMatrix() = default;

  explicit ProjectionMatrix(const Mat34& raw) : a_(raw) {
    const double n = a_.row(2).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::invalid_argument, "rig", "projection matrix has a zero last row");
    }
    a_ /= n;
    if (a_.leftCols<3>().determinant() < 0.0) a_ = -a_;
  }

  const Mat34& matrix() const noexcept { return a_; }

  /// Homogeneous image point A·(x, y, z, 1).
  Vec3 apply(const WorldPoint& x) const { return a_ * x.homogeneous(); }

  Vec2 project(const WorldPoint& x) const {
    const Vec3 h = apply(x);
    if (std::abs(h.z()) < kMinHomogeneousW) {
      throw Error(ErrorCode::point_at_infinity, "rig",
                  fmt::format("point ({}, {}, {}) lies on the principal plane", x.x(), x.y(), x.z()));
    }
    return h.hnormalized();
  }

 private:
  Mat34 a_ = Mat34::Zero();
};

/// Brown-Conrady coefficients in OpenCV order: k1, k2, p1, p2, k3.
/// Missing trailing coefficients are zero.
struct Distortion {
  std::vector<double> coefficients;

  bool empty() const {
    for (double c : coefficients) {
      if (c != 0.0) return false;
    }
    return true;
  }

  double at(std::size_t i) const { return i < coefficients.size() ? coefficients[i] : 0.0; }

  Vec2 apply(const Vec2& n) const {
    const double k1 = at(0), k2 = at(1), p1 = at(2), p2 = at(3), k3 = at(4);
    const double x = n.x(), y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
            y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
  }

  // Fixed-point inversion; converges for the mild distortion of ordinary lenses.
  Vec2 remove(const Vec2& distorted) const {
    Vec2 n = distorted;
    for (int it = 0; it < 50; ++it) {
      const Vec2 step = distorted - (apply(n) - n);
      if ((step - n).norm() < 1e-15) break;
      n = step;
    }
    return n;
  }
};

struct CameraModel {
  std::string id;
  int image_width = 1920;
  int image_height = 1080;
  Mat3 intrinsics = Mat3::Identity();  // K
  Mat3 rotation = Mat3::Identity();    // world -> camera
  Vec3 center = Vec3::Zero();          // projection centre, world metres
  Distortion distortion;

  ProjectionMatrix projection() const {
    Mat34 rt;
    rt.leftCols<3>() = rotation;
    rt.col(3) = -rotation * center;
    return ProjectionMatrix(intrinsics * rt);
  }

  /// Throws InvalidArgument when the stored parameters break the model's
  /// invariants.
  void validate() const {
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho >= 1e-9 || rotation.determinant() <= 0.0) {
      throw Error(ErrorCode::invalid_argument, "rig", "camera " + id + ": rotation is not a proper rotation");
    }
    if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "rig", "camera " + id + ": focal lengths must be positive");
    }
    const double cx = intrinsics(0, 2), cy = intrinsics(1, 2);
    if (cx < 0.0 || cy < 0.0 || cx > image_width || cy > image_height) {
      throw Error(ErrorCode::invalid_argument, "rig", "camera " + id + ": principal point outside the image");
    }
    if (distortion.coefficients.size() > 5) {
      throw Error(ErrorCode::invalid_argument, "rig", "camera " + id + ": at most 5 distortion coefficients");
    }
    if (!center.allFinite()) {
      throw Error(ErrorCode::invalid_argument, "rig", "camera " + id + ": non-finite centre");
    }
  }

  /// Maps an observed (distorted) pixel to where an ideal pinhole camera would
  /// have imaged it.
  Vec2 undistort(const Vec2& pixel) const {
    if (distortion.empty()) return pixel;
    const Vec3 n = intrinsics.inverse() * pixel.homogeneous();
    const Vec2 ideal = distortion.remove(n.hnormalized());
    return (intrinsics * ideal.homogeneous()).hnormalized();
  }

  bool in_image(const Vec2& uv) const {
    return uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() <= image_width && uv.y() <= image_height;
  }
};

inline Vec2 project(const CameraModel& camera, const WorldPoint& point) {
  if (camera.distortion.empty()) {
    return camera.projection().project(point);
  }
  const Vec3 c = camera.rotation * (point - camera.center);
  if (std::abs(c.z()) < kMinHomogeneousW) {
    throw Error(ErrorCode::point_at_infinity, "rig", "point lies on the principal plane of camera " + camera.id);
  }
  const Vec2 d = camera.distortion.apply(c.hnormalized());
  return (camera.intrinsics * d.homogeneous()).hnormalized();
}

/// Same as project() but packaged as an observation with confidence 1.
inline PixelPoint project_pixel(const CameraModel& camera, const WorldPoint& point) {
  return PixelPoint{project(camera, point), 1.0};
}

inline double reprojection_error(const CameraModel& camera, const WorldPoint& point, const PixelPoint& observed) {
  return (project(camera, point) - observed.uv).norm();
}

/// Camera whose optical axis passes through `target`, with image +y pointing
/// as close to world -z as possible (world frame is Z-up).
inline Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return r;
}

inline Mat3 intrinsics_matrix(double fx, double fy, double cx, double cy, double skew = 0.0) {
  Mat3 k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

inline const CameraModel* find_camera(const std::vector<CameraModel>& rig, const std::string& id) {
  for (const auto& c : rig) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

}  // namespace mocap
