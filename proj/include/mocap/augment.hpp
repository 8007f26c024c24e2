#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mocap/filt.hpp"
#include "mocap/parallel.hpp"
#include "mocap/types.hpp"

namespace mocap {

inline constexpr std::size_t kMarkerCount = 57;

/// Orthonormal segment frame; columns of `rotation` are the local x, y, z
/// axes in world coordinates.
struct RigidFrame {
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();

  Vec3 to_world(const Vec3& local) const { return origin + rotation * local; }
  Vec3 to_local(const Vec3& world) const { return rotation.transpose() * (world - origin); }
};

/// How one segment's frame is built from Body_25B landmarks. Points given as
/// several landmarks use their midpoint. The local z axis runs from `origin`
/// toward `distal`; y is the width direction made orthogonal to z; x = y × z.
/// When `width_from_cross` is set the width direction is
/// (distal - origin) × (cross_tip - distal), the hinge normal of a limb.
struct SegmentFrameDef {
  std::string segment;
  std::vector<int> origin;
  std::vector<int> distal;
  std::vector<int> width_from;
  std::vector<int> width_to;
  bool width_from_cross = false;
  int cross_tip = -1;

  std::vector<int> defining_landmarks() const {
    std::set<int> s(origin.begin(), origin.end());
    s.insert(distal.begin(), distal.end());
    s.insert(width_from.begin(), width_from.end());
    s.insert(width_to.begin(), width_to.end());
    if (width_from_cross) s.insert(cross_tip);
    return {s.begin(), s.end()};
  }
};

inline std::vector<SegmentFrameDef> default_segment_frames() {
  using namespace body25b;
  std::vector<SegmentFrameDef> d;
  d.push_back({"pelvis", {r_hip, l_hip}, {r_shoulder, l_shoulder}, {r_hip}, {l_hip}});
  d.push_back({"torso", {r_shoulder, l_shoulder}, {upper_neck}, {r_shoulder}, {l_shoulder}});
  d.push_back({"head", {upper_neck}, {head_top}, {upper_neck}, {nose}});
  d.push_back({"thigh_l", {l_hip}, {l_knee}, {l_big_toe}, {l_small_toe}});
  d.push_back({"shank_l", {l_knee}, {l_ankle}, {l_big_toe}, {l_small_toe}});
  d.push_back({"foot_l", {l_ankle}, {l_big_toe, l_small_toe}, {l_big_toe}, {l_small_toe}});
  d.push_back({"thigh_r", {r_hip}, {r_knee}, {r_big_toe}, {r_small_toe}});
  d.push_back({"shank_r", {r_knee}, {r_ankle}, {r_big_toe}, {r_small_toe}});
  d.push_back({"foot_r", {r_ankle}, {r_big_toe, r_small_toe}, {r_big_toe}, {r_small_toe}});
  d.push_back({"upper_arm_l", {l_shoulder}, {l_elbow}, {}, {}, true, l_wrist});
  d.push_back({"forearm_l", {l_elbow}, {l_wrist}, {l_shoulder}, {}, true, -1});
  d.push_back({"upper_arm_r", {r_shoulder}, {r_elbow}, {}, {}, true, r_wrist});
  d.push_back({"forearm_r", {r_elbow}, {r_wrist}, {r_shoulder}, {}, true, -1});
  return d;
}

/// One Body_25B frame; nullopt marks a gap.
using LandmarkFrame = std::array<std::optional<Vec3>, body25b::kCount>;

namespace detail {

inline std::optional<Vec3> midpoint(const LandmarkFrame& f, const std::vector<int>& ids) {
  if (ids.empty()) return std::nullopt;
  Vec3 sum = Vec3::Zero();
  for (int id : ids) {
    const auto& p = f[static_cast<std::size_t>(id)];
    if (!p) return std::nullopt;
    sum += *p;
  }
  return sum / static_cast<double>(ids.size());
}

}  // namespace detail

inline RigidFrame segment_frame(const SegmentFrameDef& def, const LandmarkFrame& landmarks) {
  for (int id : def.defining_landmarks()) {
    if (id < 0) continue;
    if (!landmarks[static_cast<std::size_t>(id)]) {
      throw Error(ErrorCode::missing_defining_landmark, "augment",
                  fmt::format("segment {} needs landmark {}", def.segment, body25b::kNames[static_cast<std::size_t>(id)]));
    }
  }
  const Vec3 o = *detail::midpoint(landmarks, def.origin);
  const Vec3 d = *detail::midpoint(landmarks, def.distal);
  Vec3 width;
  if (def.width_from_cross) {
    if (def.cross_tip >= 0) {
      width = (d - o).cross(*landmarks[static_cast<std::size_t>(def.cross_tip)] - d);
    } else {
      // Forearm: width_from holds the shoulder, origin the elbow, distal the wrist.
      width = (o - *detail::midpoint(landmarks, def.width_from)).cross(d - o);
    }
  } else {
    width = *detail::midpoint(landmarks, def.width_to) - *detail::midpoint(landmarks, def.width_from);
  }
  const Vec3 z = d - o;
  if (z.norm() < 1e-9) {
    throw Error(ErrorCode::numerical_degeneracy, "augment", "segment " + def.segment + " has zero length");
  }
  const Vec3 ez = z.normalized();
  Vec3 ey = width - width.dot(ez) * ez;
  if (ey.norm() < 1e-9 * std::max(1.0, width.norm())) {
    throw Error(ErrorCode::numerical_degeneracy, "augment", "segment " + def.segment + " width is parallel to its axis");
  }
  ey.normalize();
  RigidFrame f;
  f.rotation.col(0) = ey.cross(ez);
  f.rotation.col(1) = ey;
  f.rotation.col(2) = ez;
  f.origin = o;
  return f;
}

/// Frames of every segment whose defining landmarks are present.
inline std::map<std::string, RigidFrame> segment_frames(const LandmarkFrame& landmarks,
                                                        const std::vector<SegmentFrameDef>& defs = default_segment_frames()) {
  std::map<std::string, RigidFrame> out;
  for (const auto& def : defs) {
    try {
      out.emplace(def.segment, segment_frame(def, landmarks));
    } catch (const Error&) {
      // segment skipped; its markers become gaps
    }
  }
  return out;
}

struct MarkerSetTemplate {
  std::vector<std::string> names;
  std::vector<std::string> segment_of;
  std::vector<Vec3> local_offset;
  std::vector<SegmentFrameDef> frames = default_segment_frames();

  std::size_t size() const { return names.size(); }

  void add(const std::string& name, const std::string& segment, const Vec3& offset) {
    names.push_back(name);
    segment_of.push_back(segment);
    local_offset.push_back(offset);
  }

  void validate(std::size_t expected = kMarkerCount) const {
    if (names.size() != expected || segment_of.size() != expected || local_offset.size() != expected) {
      throw Error(ErrorCode::invalid_argument, "augment",
                  fmt::format("template has {} markers, expected {}", names.size(), expected));
    }
    std::set<std::string> unique(names.begin(), names.end());
    if (unique.size() != names.size()) throw Error(ErrorCode::invalid_argument, "augment", "duplicate marker names");
    for (std::size_t i = 0; i < names.size(); ++i) {
      const bool known = std::any_of(frames.begin(), frames.end(), [&](const auto& d) { return d.segment == segment_of[i]; });
      if (!known) {
        throw Error(ErrorCode::invalid_argument, "augment",
                    "marker " + names[i] + " is attached to unknown segment " + segment_of[i]);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Landmark trajectories <-> per-frame arrays

/// Per-frame landmark arrays from trajectories named after Body_25B keypoints.
/// Unnamed keypoints and gap samples are left empty.
inline std::vector<LandmarkFrame> landmark_frames(const TrajectorySet& landmarks) {
  if (landmarks.empty()) return {};
  const std::size_t n = landmarks.front().size();
  std::vector<LandmarkFrame> out(n);
  for (const auto& t : landmarks) {
    if (t.size() != n) throw Error(ErrorCode::invalid_argument, "augment", "landmark trajectories differ in length");
    const auto id = body25b::index_of(t.marker_id);
    if (!id) throw Error(ErrorCode::invalid_argument, "augment", "unknown landmark '" + t.marker_id + "'");
    for (std::size_t i = 0; i < n; ++i) {
      if (!t.gaps[i] && t.positions[i].allFinite()) out[i][static_cast<std::size_t>(*id)] = t.positions[i];
    }
  }
  return out;
}

inline TrajectorySet make_trajectories(const std::vector<std::string>& names, const std::vector<int>& frames, double rate) {
  TrajectorySet out(names.size());
  for (std::size_t m = 0; m < names.size(); ++m) {
    out[m].marker_id = names[m];
    out[m].frames = frames;
    out[m].rate = rate;
    out[m].positions.assign(frames.size(), Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
    out[m].gaps.assign(frames.size(), true);
  }
  return out;
}

/// Places every template marker rigidly in its segment frame, frame by frame.
/// Markers of segments that cannot be built in a frame are gaps.
inline TrajectorySet augment_baseline(const TrajectorySet& landmarks, const MarkerSetTemplate& tmpl, std::size_t jobs = 1) {
  if (landmarks.empty()) throw Error(ErrorCode::empty_sequence, "augment", "no landmark trajectories");
  const auto frames = landmark_frames(landmarks);
  TrajectorySet out = make_trajectories(tmpl.names, landmarks.front().frames, landmarks.front().rate);
  parallel_for(frames.size(), jobs, [&](std::size_t i) {
    const auto seg = segment_frames(frames[i], tmpl.frames);
    for (std::size_t m = 0; m < tmpl.size(); ++m) {
      const auto it = seg.find(tmpl.segment_of[m]);
      if (it == seg.end()) continue;
      out[m].positions[i] = it->second.to_world(tmpl.local_offset[m]);
      out[m].gaps[i] = false;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pluggable augmenters

enum class AugmenterKind { baseline_rigid, external_model };

inline const char* to_string(AugmenterKind k) {
  return k == AugmenterKind::baseline_rigid ? "baseline_rigid" : "external_model";
}

/// Window of consecutive frames handed to an external model: [frame][landmark]
/// over the 21-landmark subset, NaN where the input has a gap.
using LandmarkWindow = std::vector<std::array<Vec3, body25b::kAugmentationSubset.size()>>;

/// Per-window prediction of all template markers (NaN entries become gaps).
using MarkerPredictor = std::function<std::vector<Vec3>(const LandmarkWindow&)>;

class Augmenter {
 public:
  static Augmenter baseline() { return Augmenter(); }

  static Augmenter external(MarkerPredictor predictor, std::size_t window, bool thread_safe = true) {
    Augmenter a;
    a.kind_ = AugmenterKind::external_model;
    a.predictor_ = std::move(predictor);
    a.window_ = window;
    a.thread_safe_ = thread_safe;
    return a;
  }

  AugmenterKind kind() const { return kind_; }
  std::size_t window() const { return window_; }
  bool thread_safe() const { return thread_safe_; }
  const MarkerPredictor& predictor() const { return predictor_; }

 private:
  AugmenterKind kind_ = AugmenterKind::baseline_rigid;
  MarkerPredictor predictor_;
  std::size_t window_ = 1;
  bool thread_safe_ = true;
};

/// Affine map from a flattened landmark window to the flattened markers:
/// y = W·x + b, x of length 63·window (frame-major, then x/y/z), y of 3·markers.
struct LinearWindowModel {
  std::size_t window = 1;
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  void validate(std::size_t markers) const {
    const auto in = static_cast<Eigen::Index>(3 * body25b::kAugmentationSubset.size() * window);
    const auto out = static_cast<Eigen::Index>(3 * markers);
    if (window == 0 || weights.rows() != out || weights.cols() != in || bias.size() != out) {
      throw Error(ErrorCode::invalid_argument, "augment",
                  fmt::format("linear model is {}x{} (+{}), expected {}x{} (+{})", weights.rows(), weights.cols(),
                              bias.size(), out, in, out));
    }
  }

  std::vector<Vec3> operator()(const LandmarkWindow& w) const {
    Eigen::VectorXd x(weights.cols());
    Eigen::Index k = 0;
    for (const auto& frame : w) {
      for (const auto& p : frame) {
        x.segment<3>(k) = p;
        k += 3;
      }
    }
    const Eigen::VectorXd y = weights * x + bias;
    std::vector<Vec3> out(static_cast<std::size_t>(y.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = y.segment<3>(static_cast<Eigen::Index>(3 * i));
    return out;
  }
};

/// Runs the chosen augmenter over a landmark sequence. External models see a
/// window ending at each frame, shifted forward near the start so it always
/// fits inside the sequence.
inline TrajectorySet augment(const TrajectorySet& landmarks, const Augmenter& augmenter, const MarkerSetTemplate& tmpl,
                             std::size_t jobs = 1) {
  if (augmenter.kind() == AugmenterKind::baseline_rigid) return augment_baseline(landmarks, tmpl, jobs);
  if (!augmenter.predictor()) {
    throw Error(ErrorCode::model_artifact_missing, "augment", "external augmenter has no model loaded");
  }
  if (landmarks.empty()) throw Error(ErrorCode::empty_sequence, "augment", "no landmark trajectories");
  const auto frames = landmark_frames(landmarks);
  const std::size_t n = frames.size();
  const std::size_t w = augmenter.window();
  if (w == 0 || w > n) {
    throw Error(ErrorCode::window_too_long, "augment", fmt::format("model window {} exceeds sequence of {} frames", w, n));
  }

  TrajectorySet out = make_trajectories(tmpl.names, landmarks.front().frames, landmarks.front().rate);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto predict = [&](std::size_t t) {
    const std::size_t start = std::min(t + 1 >= w ? t + 1 - w : 0, n - w);
    LandmarkWindow window(w);
    for (std::size_t f = 0; f < w; ++f) {
      for (std::size_t k = 0; k < body25b::kAugmentationSubset.size(); ++k) {
        const auto& p = frames[start + f][static_cast<std::size_t>(body25b::kAugmentationSubset[k])];
        window[f][k] = p ? *p : Vec3::Constant(nan);
      }
    }
    const auto pred = augmenter.predictor()(window);
    if (pred.size() != tmpl.size()) {
      throw Error(ErrorCode::invalid_argument, "augment",
                  fmt::format("model predicted {} markers, template has {}", pred.size(), tmpl.size()));
    }
    for (std::size_t m = 0; m < pred.size(); ++m) {
      out[m].positions[t] = pred[m];
      out[m].gaps[t] = !pred[m].allFinite();
    }
  };
  parallel_for(n, augmenter.thread_safe() ? jobs : 1, predict);
  return out;
}

}  // namespace mocap
