#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "mocap/parallel.hpp"
#include "mocap/rig.hpp"

namespace mocap {

struct Observation {
  std::string camera_id;
  int landmark_id = 0;
  PixelPoint pixel;
};

/// Per-camera, per-frame detections. `landmarks` holds body25b::kCount
/// entries, or is empty when the camera produced no detection for the frame.
struct KeypointFrame {
  std::string camera_id;
  int frame_index = 0;
  std::vector<PixelPoint> landmarks;
};

struct CameraStream {
  std::string camera_id;
  std::vector<KeypointFrame> frames;
};

enum class PointStatus { accepted, excluded_low_confidence, excluded_reprojection, insufficient_views };

inline const char* to_string(PointStatus s) {
  switch (s) {
    case PointStatus::accepted: return "accepted";
    case PointStatus::excluded_low_confidence: return "excluded_low_confidence";
    case PointStatus::excluded_reprojection: return "excluded_reprojection";
    case PointStatus::insufficient_views: return "insufficient_views";
  }
  return "unknown";
}

struct ViewError {
  std::string camera_id;
  double pixels = 0.0;
};

struct TriangulatedPoint {
  int landmark_id = 0;
  WorldPoint xyz = WorldPoint::Constant(std::numeric_limits<double>::quiet_NaN());
  double confidence = 0.0;
  std::vector<ViewError> reprojection_errors;  // contributing views only
  PointStatus status = PointStatus::insufficient_views;

  bool accepted() const { return status == PointStatus::accepted; }
};

struct GateConfig {
  double confidence_min = 0.6;
  double reprojection_max = 8.0;
  int min_views = 2;

  static GateConfig paper_default() { return {0.6, 8.0, 2}; }
  static GateConfig validation() { return {0.55, 10.0, 2}; }

  void validate() const {
    if (!(confidence_min > 0.0 && confidence_min <= 1.0) || !(reprojection_max > 0.0) || min_views < 2) {
      throw Error(ErrorCode::invalid_argument, "triang",
                  fmt::format("invalid gates: confidence_min={} reprojection_max={} min_views={}", confidence_min,
                              reprojection_max, min_views));
    }
  }
};

namespace detail {

struct WeightedView {
  const CameraModel* camera;
  const Observation* obs;
};

// Confidence-weighted homogeneous DLT: two rows c·(A1 - X·A3), c·(A2 - Y·A3)
// per view, solved by the right singular vector of the smallest singular value.
inline WorldPoint solve_weighted_dlt(const std::vector<WeightedView>& views) {
  Eigen::MatrixXd design(2 * views.size(), 4);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Mat34& a = views[i].camera->projection().matrix();
    const Vec2 uv = views[i].camera->undistort(views[i].obs->pixel.uv);
    const double c = views[i].obs->pixel.confidence;
    const auto r = static_cast<Eigen::Index>(2 * i);
    design.row(r) = c * (a.row(0) - uv.x() * a.row(2));
    design.row(r + 1) = c * (a.row(1) - uv.y() * a.row(2));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Vec4 v = svd.matrixV().col(3);
  if (std::abs(v(3)) < 1e-12) {
    throw Error(ErrorCode::numerical_degeneracy, "triang", "triangulated point is at infinity");
  }
  return v.head<3>() / v(3);
}

inline double safe_reprojection(const CameraModel& camera, const WorldPoint& x, const PixelPoint& p) {
  try {
    return reprojection_error(camera, x, p);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

/// Triangulates one landmark from its observations. Views under the
/// confidence gate are dropped, then the worst view is removed and the solve
/// repeated while any reprojection error exceeds the gate.
inline TriangulatedPoint triangulate(const std::vector<Observation>& observations, const std::vector<CameraModel>& rig,
                                     const GateConfig& gates) {
  TriangulatedPoint result;
  if (!observations.empty()) result.landmark_id = observations.front().landmark_id;

  std::vector<detail::WeightedView> views;
  bool gated_any = false;
  for (const auto& obs : observations) {
    if (obs.landmark_id != result.landmark_id) {
      throw Error(ErrorCode::inconsistent_landmark, "triang",
                  fmt::format("observations mix landmarks {} and {}", result.landmark_id, obs.landmark_id));
    }
    const CameraModel* cam = find_camera(rig, obs.camera_id);
    if (cam == nullptr) {
      throw Error(ErrorCode::invalid_argument, "triang", "unknown camera '" + obs.camera_id + "'");
    }
    if (obs.pixel.confidence < gates.confidence_min || !obs.pixel.uv.allFinite()) {
      gated_any = gated_any || obs.pixel.confidence > 0.0;
      continue;
    }
    views.push_back({cam, &obs});
  }

  const auto min_views = static_cast<std::size_t>(gates.min_views);
  if (views.size() < min_views) {
    result.status = (gated_any && !views.empty()) ? PointStatus::excluded_low_confidence
                                                  : PointStatus::insufficient_views;
    return result;
  }

  while (true) {
    const WorldPoint x = detail::solve_weighted_dlt(views);
    std::vector<double> errors(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
      errors[i] = detail::safe_reprojection(*views[i].camera, x, views[i].obs->pixel);
    }
    const auto worst = std::max_element(errors.begin(), errors.end());
    if (*worst <= gates.reprojection_max) {
      result.xyz = x;
      result.status = PointStatus::accepted;
      double csum = 0.0;
      for (std::size_t i = 0; i < views.size(); ++i) {
        csum += views[i].obs->pixel.confidence;
        result.reprojection_errors.push_back({views[i].camera->id, errors[i]});
      }
      result.confidence = csum / static_cast<double>(views.size());
      return result;
    }
    views.erase(views.begin() + (worst - errors.begin()));
    if (views.size() < min_views) {
      result.status = PointStatus::excluded_reprojection;
      return result;
    }
  }
}

struct FrameResult {
  int frame_index = 0;
  std::vector<TriangulatedPoint> points;  // indexed by landmark id
};

/// Triangulates every landmark of one synchronized frame.
inline FrameResult triangulate_frame(const std::vector<KeypointFrame>& frames, const std::vector<CameraModel>& rig,
                                     const GateConfig& gates, std::size_t landmark_count = body25b::kCount) {
  FrameResult out;
  if (!frames.empty()) out.frame_index = frames.front().frame_index;
  for (const auto& f : frames) {
    if (f.frame_index != out.frame_index) {
      throw Error(ErrorCode::frame_index_mismatch, "triang",
                  fmt::format("frame {} from camera {} mixed with frame {}", f.frame_index, f.camera_id,
                              out.frame_index));
    }
  }
  out.points.resize(landmark_count);
  std::vector<Observation> obs;
  for (std::size_t l = 0; l < landmark_count; ++l) {
    obs.clear();
    for (const auto& f : frames) {
      if (l < f.landmarks.size()) obs.push_back({f.camera_id, static_cast<int>(l), f.landmarks[l]});
    }
    out.points[l] = triangulate(obs, rig, gates);
    out.points[l].landmark_id = static_cast<int>(l);
  }
  return out;
}

/// Triangulates whole streams frame by frame. Streams must cover the same
/// frame range; frames are independent and may run on `jobs` threads.
inline std::vector<FrameResult> triangulate_sequence(const std::vector<CameraStream>& streams,
                                                     const std::vector<CameraModel>& rig, const GateConfig& gates,
                                                     std::size_t jobs = 1) {
  gates.validate();
  if (streams.empty()) return {};
  const std::size_t n = streams.front().frames.size();
  for (const auto& s : streams) {
    if (s.frames.size() != n) {
      throw Error(ErrorCode::frame_index_mismatch, "triang",
                  fmt::format("camera {} has {} frames, expected {}", s.camera_id, s.frames.size(), n));
    }
  }
  std::vector<FrameResult> results(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    std::vector<KeypointFrame> frames;
    frames.reserve(streams.size());
    for (const auto& s : streams) frames.push_back(s.frames[i]);
    results[i] = triangulate_frame(frames, rig, gates);
  });
  return results;
}

/// Table-style statistics over a triangulated sequence.
struct ExclusionSummary {
  std::string task;
  std::size_t frames = 0;
  std::size_t landmarks_per_frame = 0;
  double mean_excluded_markers = 0.0;  // per frame
  double excluded_percent = 0.0;       // mean over frames
  double reprojection_mean_px = 0.0;   // over accepted points' views
  double reprojection_std_px = 0.0;
  std::size_t accepted_points = 0;
};

inline ExclusionSummary exclusion_stats(const std::vector<FrameResult>& sequence, std::string task = "custom") {
  if (sequence.empty()) {
    throw Error(ErrorCode::empty_sequence, "triang", "exclusion statistics need at least one frame");
  }
  ExclusionSummary s;
  s.task = std::move(task);
  s.frames = sequence.size();
  s.landmarks_per_frame = sequence.front().points.size();
  double excluded_total = 0.0, percent_total = 0.0;
  std::vector<double> errors;
  for (const auto& frame : sequence) {
    std::size_t excluded = 0;
    for (const auto& p : frame.points) {
      if (!p.accepted()) {
        ++excluded;
        continue;
      }
      ++s.accepted_points;
      for (const auto& e : p.reprojection_errors) errors.push_back(e.pixels);
    }
    excluded_total += static_cast<double>(excluded);
    if (!frame.points.empty()) {
      percent_total += 100.0 * static_cast<double>(excluded) / static_cast<double>(frame.points.size());
    }
  }
  s.mean_excluded_markers = excluded_total / static_cast<double>(s.frames);
  s.excluded_percent = percent_total / static_cast<double>(s.frames);
  if (!errors.empty()) {
    const double n = static_cast<double>(errors.size());
    s.reprojection_mean_px = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : errors) ss += (e - s.reprojection_mean_px) * (e - s.reprojection_mean_px);
    s.reprojection_std_px = errors.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return s;
}

}  // namespace mocap
