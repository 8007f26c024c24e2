#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "mocap/rig.hpp"

namespace mocap {

enum class CorrespondenceSource { checkerboard, synthetic, manual };

struct Correspondence {
  WorldPoint world;
  PixelPoint pixel;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  CorrespondenceSource source = CorrespondenceSource::manual;
};

struct CalibrationReport {
  std::vector<double> per_point_errors;
  double mean_error = 0.0;
  double max_error = 0.0;
  std::vector<std::size_t> excluded_points;
  double threshold = 8.0;
  bool recalibration_recommended = false;
};

/// Reprojection gate used to judge a calibration.
inline constexpr double kCalibrationThresholdPx = 8.0;

namespace detail {

// Similarity that moves the centroid to the origin and scales the mean
// distance from it to sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> normalizing_transform(const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  using Vec = Eigen::Matrix<double, Dim, 1>;
  Vec centroid = Vec::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(static_cast<double>(Dim)) / mean_dist : 1.0;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= s;
  t.template topRightCorner<Dim, 1>() = -s * centroid;
  return t;
}

}  // namespace detail

/// Linear (DLT) camera resection from at least six non-coplanar
/// world<->pixel correspondences. Both point sets are conditioned before the
/// 2n x 12 system is solved; the result is the right singular vector of the
/// smallest singular value, mapped back to the original coordinates.
inline ProjectionMatrix resect(const CorrespondenceSet& correspondences) {
  const auto& pairs = correspondences.pairs;
  const std::size_t n = pairs.size();
  if (n < 6) {
    throw Error(ErrorCode::insufficient_points, "calib",
                fmt::format("resection needs at least 6 correspondences, got {}", n));
  }

  std::vector<Vec3> world(n);
  std::vector<Vec2> pixel(n);
  for (std::size_t i = 0; i < n; ++i) {
    world[i] = pairs[i].world;
    pixel[i] = pairs[i].pixel.uv;
  }

  {
    Vec3 centroid = Vec3::Zero();
    for (const auto& w : world) centroid += w;
    centroid /= static_cast<double>(n);
    Eigen::MatrixXd centered(3, n);
    for (std::size_t i = 0; i < n; ++i) centered.col(static_cast<Eigen::Index>(i)) = world[i] - centroid;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const auto& sv = svd.singularValues();
    if (sv(2) <= 1e-9 * sv(0)) {
      throw Error(ErrorCode::degenerate_configuration, "calib", "world points are coplanar or collinear");
    }
  }

  const Eigen::Matrix4d tw = detail::normalizing_transform<3>(world);
  const Eigen::Matrix3d tp = detail::normalizing_transform<2>(pixel);

  Eigen::MatrixXd design(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::RowVector4d x = (tw * world[i].homogeneous()).transpose();
    const Vec3 u = tp * pixel[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    design.row(r) << x, Eigen::RowVector4d::Zero(), -u.x() * x;
    design.row(r + 1) << Eigen::RowVector4d::Zero(), x, -u.y() * x;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index last = sv.size() - 1;
  if (sv(last - 1) - sv(last) < 1e-8 * sv(0)) {
    throw Error(ErrorCode::degenerate_configuration, "calib", "resection solution is not unique");
  }
  const Eigen::VectorXd v = svd.matrixV().col(11);
  Mat34 normalized;
  normalized << v.segment<4>(0).transpose(), v.segment<4>(4).transpose(), v.segment<4>(8).transpose();

  const Mat34 a = tp.inverse() * normalized * tw;
  return ProjectionMatrix(a);
}

/// Splits A = K[R | -R K0] with K upper-triangular (positive diagonal,
/// K(2,2) = 1) and R a proper rotation.
inline CameraModel decompose(const ProjectionMatrix& projection, int image_width = 1920, int image_height = 1080) {
  const Mat34& a = projection.matrix();
  const Mat3 m = a.leftCols<3>();
  const double scale = m.norm();
  if (!(std::abs(m.determinant()) > 1e-12 * scale * scale * scale)) {
    throw Error(ErrorCode::singular_left_block, "calib", "left 3x3 block of the projection matrix is singular");
  }

  // RQ via QR of the row-reversed transpose.
  Mat3 flip = Mat3::Zero();
  flip(0, 2) = flip(1, 1) = flip(2, 0) = 1.0;
  const Mat3 reversed = (flip * m).transpose();
  Eigen::HouseholderQR<Mat3> qr(reversed);
  const Mat3 q = qr.householderQ();
  const Mat3 r_upper = qr.matrixQR().triangularView<Eigen::Upper>();
  Mat3 k = flip * r_upper.transpose() * flip;
  Mat3 rot = flip * q.transpose();

  const Eigen::Vector3d signs(k(0, 0) < 0 ? -1.0 : 1.0, k(1, 1) < 0 ? -1.0 : 1.0, k(2, 2) < 0 ? -1.0 : 1.0);
  k = k * signs.asDiagonal();
  rot = signs.asDiagonal() * rot;
  if (rot.determinant() < 0.0) rot = -rot;  // overall sign of A is arbitrary

  CameraModel camera;
  camera.image_width = image_width;
  camera.image_height = image_height;
  camera.intrinsics = k / k(2, 2);
  camera.intrinsics(1, 0) = camera.intrinsics(2, 0) = camera.intrinsics(2, 1) = 0.0;
  camera.rotation = rot;
  camera.center = -m.inverse() * a.col(3);
  return camera;
}

inline ProjectionMatrix compose(const Mat3& intrinsics, const Mat3& rotation, const Vec3& center) {
  CameraModel c;
  c.intrinsics = intrinsics;
  c.rotation = rotation;
  c.center = center;
  return c.projection();
}

inline CalibrationReport audit(const CameraModel& camera, const CorrespondenceSet& correspondences,
                               double threshold = kCalibrationThresholdPx) {
  CalibrationReport report;
  report.threshold = threshold;
  report.per_point_errors.reserve(correspondences.pairs.size());
  for (std::size_t i = 0; i < correspondences.pairs.size(); ++i) {
    const auto& c = correspondences.pairs[i];
    const double e = reprojection_error(camera, c.world, c.pixel);
    report.per_point_errors.push_back(e);
    if (e > threshold) report.excluded_points.push_back(i);
  }
  if (!report.per_point_errors.empty()) {
    report.mean_error = std::accumulate(report.per_point_errors.begin(), report.per_point_errors.end(), 0.0) /
                        static_cast<double>(report.per_point_errors.size());
    report.max_error = *std::max_element(report.per_point_errors.begin(), report.per_point_errors.end());
  }
  report.recalibration_recommended = report.mean_error > threshold;
  return report;
}

}  // namespace mocap
