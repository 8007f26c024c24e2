#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mocap/anthro.hpp"
#include "mocap/augment.hpp"
#include "mocap/calib.hpp"
#include "mocap/kin.hpp"
#include "mocap/rig.hpp"
#include "mocap/triang.hpp"

namespace mocap::synth {

// ---------------------------------------------------------------------------
// Skeleton

/// Joint-centre layout of the standing humanoid (metres, Z-up, facing +x).
struct BodyDimensions {
  double stature = 1.75;
  double hip_height = 0.91;
  double hip_half_width = 0.09;
  double thigh = 0.41;
  double shank = 0.41;
  double lumbar_height = 1.05;
  double shoulder_height = 1.43;
  double shoulder_half_width = 0.20;
  double neck_height = 1.55;
  double upper_arm = 0.30;
  double forearm = 0.25;

  double ankle_height() const { return hip_height - thigh - shank; }
};

struct SideJoints {
  Vec3 hip, knee, ankle, shoulder, elbow, wrist;
};

inline SideJoints joints(const BodyDimensions& d, double side) {
  SideJoints j;
  j.hip = {0.0, side * d.hip_half_width, d.hip_height};
  j.knee = j.hip - Vec3(0, 0, d.thigh);
  j.ankle = j.knee - Vec3(0, 0, d.shank);
  j.shoulder = {0.0, side * d.shoulder_half_width, d.shoulder_height};
  j.elbow = j.shoulder - Vec3(0, 0, d.upper_arm);
  j.wrist = j.elbow - Vec3(0, 0, d.forearm);
  return j;
}

/// Pelvis-rooted tree: lumbar, neck, hips and shoulders are ball joints;
/// knees, ankles and elbows are hinges. Flexion is positive everywhere.
inline SkeletonModel humanoid_skeleton(const BodyDimensions& d = {}) {
  SkeletonModel m;
  m.name = "humanoid30";
  const double r = kPi;
  auto c = [](const std::string& n, double lo, double hi) { return Coordinate{n, lo, hi, true}; };
  auto t = [](const std::string& n) { return Coordinate{n, -5.0, 5.0, false}; };
  const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();

  const int pelvis = m.add_segment({"pelvis", -1, Vec3(0, 0, d.hip_height), JointType::free, {z, x, y}},
                                   {t("pelvis_tx"), t("pelvis_ty"), t("pelvis_tz"), c("pelvis_rotation", -r, r),
                                    c("pelvis_list", -r / 2, r / 2), c("pelvis_tilt", -r / 2, r / 2)});
  const int torso = m.add_segment({"torso", pelvis, Vec3(0, 0, d.lumbar_height - d.hip_height), JointType::ball, {y, x, -z}},
                                  {c("lumbar_flexion", -rad(60), rad(90)), c("lumbar_bending", -rad(45), rad(45)),
                                   c("lumbar_rotation", -rad(45), rad(45))});
  m.add_segment({"head", torso, Vec3(0, 0, d.neck_height - d.lumbar_height), JointType::ball, {y, x, -z}},
                {c("neck_flexion", -rad(60), rad(70)), c("neck_bending", -rad(45), rad(45)),
                 c("neck_rotation", -rad(70), rad(70))});

  for (const double side : {1.0, -1.0}) {
    const std::string s = side > 0 ? "_l" : "_r";
    const SideJoints j = joints(d, side);
    const int thigh = m.add_segment({"thigh" + s, pelvis, j.hip - Vec3(0, 0, d.hip_height), JointType::ball, {-y, -side * x, -side * z}},
                                    {c("hip_flexion" + s, -rad(30), rad(120)), c("hip_adduction" + s, -rad(45), rad(30)),
                                     c("hip_rotation" + s, -rad(45), rad(45))});
    const int shank = m.add_segment({"shank" + s, thigh, j.knee - j.hip, JointType::hinge, {y}},
                                    {c("knee_angle" + s, -rad(10), rad(140))});
    m.add_segment({"foot" + s, shank, j.ankle - j.knee, JointType::hinge, {-y}}, {c("ankle_angle" + s, -rad(50), rad(40))});
  }
  for (const double side : {1.0, -1.0}) {
    const std::string s = side > 0 ? "_l" : "_r";
    const SideJoints j = joints(d, side);
    const int upper = m.add_segment(
        {"upper_arm" + s, torso, j.shoulder - Vec3(0, 0, d.lumbar_height), JointType::ball, {-y, side * x, side * z}},
        {c("shoulder_flexion" + s, -rad(60), rad(150)), c("shoulder_abduction" + s, -rad(30), rad(120)),
         c("shoulder_rotation" + s, -rad(70), rad(70))});
    m.add_segment({"forearm" + s, upper, j.elbow - j.shoulder, JointType::hinge, {-y}},
                  {c("elbow_flexion" + s, 0.0, rad(150))});
  }
  for (const char* s : {"_r", "_l"}) {
    m.add_angle({std::string("hip_flexion") + s, std::string("hip_flexion") + s, 1.0});
    m.add_angle({std::string("knee_angle") + s, std::string("knee_angle") + s, 1.0});
    m.add_angle({std::string("elbow_flexion") + s, std::string("elbow_flexion") + s, 1.0});
    m.add_angle({std::string("ankle_angle") + s, std::string("ankle_angle") + s, 1.0});
  }
  return m;
}

struct MarkerSpec {
  std::string name;
  std::string segment;
  Vec3 neutral;
};

/// The 57 anatomical markers at the neutral pose.
inline std::vector<MarkerSpec> biomech57(const BodyDimensions& d = {}) {
  std::vector<MarkerSpec> v;
  const double sh = d.shoulder_height, nh = d.neck_height;
  v.push_back({"HeadTop", "head", {0.0, 0.0, d.stature}});
  v.push_back({"HeadFront", "head", {0.095, 0.0, nh + 0.11}});
  v.push_back({"LHeadSide", "head", {0.0, 0.085, nh + 0.11}});
  v.push_back({"RHeadSide", "head", {0.0, -0.085, nh + 0.11}});
  v.push_back({"C7", "torso", {-0.07, 0.0, sh + 0.07}});
  v.push_back({"T10", "torso", {-0.11, 0.0, sh - 0.18}});
  v.push_back({"CLAV", "torso", {0.06, 0.0, sh + 0.03}});
  v.push_back({"STRN", "torso", {0.13, 0.0, sh - 0.13}});
  v.push_back({"RBAK", "torso", {-0.12, -0.08, sh - 0.07}});
  v.push_back({"LBAK", "torso", {-0.12, 0.08, sh - 0.10}});
  v.push_back({"LASI", "pelvis", {0.09, 0.12, d.hip_height + 0.07}});
  v.push_back({"RASI", "pelvis", {0.09, -0.12, d.hip_height + 0.07}});
  v.push_back({"LPSI", "pelvis", {-0.10, 0.05, d.hip_height + 0.09}});
  v.push_back({"RPSI", "pelvis", {-0.10, -0.05, d.hip_height + 0.09}});
  v.push_back({"SACR", "pelvis", {-0.11, 0.0, d.hip_height + 0.06}});
  for (const double side : {1.0, -1.0}) {
    const std::string p = side > 0 ? "L" : "R";
    const std::string s = side > 0 ? "_l" : "_r";
    const SideJoints j = joints(d, side);
    const Vec3 out(0, side, 0);
    v.push_back({p + "SHO", "torso", j.shoulder + Vec3(0, side * 0.01, 0.03)});
    v.push_back({p + "UPA", "upper_arm" + s, j.shoulder + Vec3(0.0, side * 0.045, -0.15)});
    v.push_back({p + "ELB", "upper_arm" + s, j.elbow + 0.035 * out});
    v.push_back({p + "MELB", "upper_arm" + s, j.elbow - 0.035 * out});
    v.push_back({p + "FRM", "forearm" + s, j.elbow + Vec3(0.02, side * 0.035, -0.13)});
    v.push_back({p + "WRA", "forearm" + s, j.wrist + Vec3(0.025, 0, 0)});
    v.push_back({p + "WRB", "forearm" + s, j.wrist + Vec3(-0.025, 0, 0)});
    v.push_back({p + "FIN", "forearm" + s, j.wrist + Vec3(0, 0, -0.10)});
    v.push_back({p + "TRO", "thigh" + s, j.hip + Vec3(0, side * 0.08, -0.01)});
    v.push_back({p + "THI", "thigh" + s, j.hip + Vec3(0.02, side * 0.07, -0.21)});
    v.push_back({p + "THI2", "thigh" + s, j.hip + Vec3(0.07, side * 0.01, -0.26)});
    v.push_back({p + "KNE", "thigh" + s, j.knee + 0.055 * out});
    v.push_back({p + "MKNE", "thigh" + s, j.knee - 0.055 * out});
    v.push_back({p + "TIB", "shank" + s, j.knee + Vec3(0.02, side * 0.045, -0.20)});
    v.push_back({p + "TIB2", "shank" + s, j.knee + Vec3(0.06, 0.0, -0.15)});
    v.push_back({p + "ANK", "shank" + s, j.ankle + 0.04 * out});
    v.push_back({p + "MANK", "shank" + s, j.ankle - 0.04 * out});
    v.push_back({p + "HEE", "foot" + s, j.ankle + Vec3(-0.07, 0, -0.05)});
    v.push_back({p + "TOE", "foot" + s, j.ankle + Vec3(0.18, 0, -0.05)});
    v.push_back({p + "MT5", "foot" + s, j.ankle + Vec3(0.12, side * 0.045, -0.06)});
    v.push_back({p + "MT1", "foot" + s, j.ankle + Vec3(0.13, -side * 0.04, -0.06)});
  }
  return v;
}

/// Body_25B keypoints at the neutral pose, with the segment carrying each.
inline std::vector<MarkerSpec> body25b_keypoints(const BodyDimensions& d = {}) {
  using namespace body25b;
  std::vector<MarkerSpec> v(kCount);
  const Vec3 neck(0, 0, d.neck_height);
  auto set = [&](int id, const std::string& seg, const Vec3& p) { v[static_cast<std::size_t>(id)] = {std::string(kNames[static_cast<std::size_t>(id)]), seg, p}; };
  set(nose, "head", neck + Vec3(0.10, 0, 0.09));
  set(l_eye, "head", neck + Vec3(0.085, 0.032, 0.12));
  set(r_eye, "head", neck + Vec3(0.085, -0.032, 0.12));
  set(l_ear, "head", neck + Vec3(0.0, 0.075, 0.10));
  set(r_ear, "head", neck + Vec3(0.0, -0.075, 0.10));
  set(upper_neck, "torso", neck);
  set(head_top, "head", Vec3(0, 0, d.stature));
  for (const double side : {1.0, -1.0}) {
    const bool left = side > 0;
    const std::string s = left ? "_l" : "_r";
    const SideJoints j = joints(d, side);
    set(left ? l_shoulder : r_shoulder, "torso", j.shoulder);
    set(left ? l_elbow : r_elbow, "upper_arm" + s, j.elbow);
    set(left ? l_wrist : r_wrist, "forearm" + s, j.wrist);
    set(left ? l_hip : r_hip, "pelvis", j.hip);
    set(left ? l_knee : r_knee, "thigh" + s, j.knee);
    set(left ? l_ankle : r_ankle, "shank" + s, j.ankle);
    set(left ? l_big_toe : r_big_toe, "foot" + s, j.ankle + Vec3(0.17, -side * 0.03, -0.07));
    set(left ? l_small_toe : r_small_toe, "foot" + s, j.ankle + Vec3(0.17, side * 0.035, -0.07));
    set(left ? l_heel : r_heel, "foot" + s, j.ankle + Vec3(-0.06, 0, -0.08));
  }
  return v;
}

inline SkeletonModel marker_model(const BodyDimensions& d = {}) {
  SkeletonModel m = humanoid_skeleton(d);
  for (const auto& s : biomech57(d)) m.add_marker_neutral(s.name, s.segment, s.neutral);
  return m;
}

inline SkeletonModel keypoint_model(const BodyDimensions& d = {}) {
  SkeletonModel m = humanoid_skeleton(d);
  for (const auto& s : body25b_keypoints(d)) m.add_marker_neutral(s.name, s.segment, s.neutral);
  return m;
}

/// Pose used to express the template offsets: upright with bent elbows so that
/// the arm frames are well defined.
inline Eigen::VectorXd reference_pose(const SkeletonModel& model) {
  Eigen::VectorXd q = model.neutral();
  for (const char* c : {"elbow_flexion_l", "elbow_flexion_r"}) q(static_cast<Eigen::Index>(*model.coordinate_index(c))) = rad(30);
  return q;
}

inline LandmarkFrame to_landmark_frame(const std::vector<Vec3>& keypoints) {
  LandmarkFrame f;
  for (std::size_t i = 0; i < keypoints.size() && i < f.size(); ++i) f[i] = keypoints[i];
  return f;
}

/// Template whose offsets reproduce the marker model exactly when the
/// landmarks are exact.
inline MarkerSetTemplate marker_template(const BodyDimensions& d = {}) {
  const SkeletonModel markers = marker_model(d);
  const SkeletonModel keys = keypoint_model(d);
  const Eigen::VectorXd q = reference_pose(markers);
  const auto frames = segment_frames(to_landmark_frame(forward_kinematics(keys, q)));
  const auto pos = forward_kinematics(markers, q);
  MarkerSetTemplate t;
  for (std::size_t i = 0; i < markers.markers().size(); ++i) {
    const auto& vm = markers.markers()[i];
    const std::string& seg = markers.segments()[static_cast<std::size_t>(vm.segment)].name;
    t.add(vm.name, seg, frames.at(seg).to_local(pos[i]));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Motion scripts

enum class Task { leaning, bending, squatting, walking, static_pose };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::leaning: return "leaning";
    case Task::bending: return "bending";
    case Task::squatting: return "squatting";
    case Task::walking: return "walking";
    case Task::static_pose: return "static";
  }
  return "custom";
}

inline std::optional<Task> task_from_string(const std::string& s) {
  for (Task t : {Task::leaning, Task::bending, Task::squatting, Task::walking, Task::static_pose}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

struct MotionScript {
  std::string task = "custom";
  double duration = 10.0;
  double rate = 30.0;
  std::function<Eigen::VectorXd(double)> q;

  std::size_t frame_count() const { return static_cast<std::size_t>(std::llround(duration * rate)); }
  double time(std::size_t i) const { return static_cast<double>(i) / rate; }
};

namespace detail {

struct CoordinateSetter {
  const SkeletonModel& model;
  Eigen::VectorXd q;
  void operator()(const std::string& name, double value) {
    q(static_cast<Eigen::Index>(*model.coordinate_index(name))) = value;
  }
};

// Smooth 0 -> 1 -> 0 cycle of period `period`.
inline double cycle(double t, double period) { return 0.5 * (1.0 - std::cos(2.0 * kPi * t / period)); }

}  // namespace detail

/// Scripted coordinate curves. Arms stay bent at the elbow and the lumbar and
/// neck joints stay neutral, so the trunk moves as one piece.
inline MotionScript script(Task task, double duration = 10.0, double rate = 30.0, const BodyDimensions& dims = {}) {
  const SkeletonModel model = humanoid_skeleton(dims);
  MotionScript s;
  s.task = to_string(task);
  s.duration = duration;
  s.rate = rate;
  s.q = [task, model, dims](double t) {
    detail::CoordinateSetter set{model, model.neutral()};
    set("elbow_flexion_l", rad(20));
    set("elbow_flexion_r", rad(20));
    set("shoulder_abduction_l", rad(5));
    set("shoulder_abduction_r", rad(5));
    switch (task) {
      case Task::static_pose:
        break;
      case Task::leaning: {
        const double lean = rad(15) * std::sin(2.0 * kPi * t / 5.0);
        set("pelvis_list", lean);
        set("hip_adduction_l", lean);
        set("hip_adduction_r", -lean);
        set("pelvis_tilt", rad(8) * detail::cycle(t, 10.0 / 3.0));
        set("hip_flexion_l", rad(8) * detail::cycle(t, 10.0 / 3.0));
        set("hip_flexion_r", rad(8) * detail::cycle(t, 10.0 / 3.0));
        set("elbow_flexion_l", rad(20 + 25 * detail::cycle(t, 5.0)));
        break;
      }
      case Task::bending: {
        const double b = rad(60) * detail::cycle(t, 5.0);
        set("pelvis_tilt", b);
        set("hip_flexion_l", b);
        set("hip_flexion_r", b);
        set("shoulder_flexion_l", 0.6 * b);
        set("shoulder_flexion_r", 0.6 * b);
        set("elbow_flexion_l", rad(20) + 0.4 * b);
        set("elbow_flexion_r", rad(20) + 0.4 * b);
        break;
      }
      case Task::squatting: {
        const double c = detail::cycle(t, 5.0);
        const double knee = rad(100) * c, hip = rad(95) * c, tilt = rad(30) * c;
        const double thigh_w = tilt - hip, shank_w = thigh_w + knee;
        set("pelvis_tilt", tilt);
        for (const char* side : {"_l", "_r"}) {
          set(std::string("hip_flexion") + side, hip);
          set(std::string("knee_angle") + side, knee);
          set(std::string("ankle_angle") + side, shank_w);  // keeps the feet flat
          set(std::string("shoulder_flexion") + side, rad(80) * c);
          set(std::string("elbow_flexion") + side, rad(20 + 50 * c));
        }
        // Hips placed so the ankles stay where they stand.
        const double dx = dims.thigh * std::sin(thigh_w) + dims.shank * std::sin(shank_w);
        const double dz = dims.thigh * std::cos(thigh_w) + dims.shank * std::cos(shank_w);
        set("pelvis_tx", dx);
        set("pelvis_tz", dims.ankle_height() + dz - dims.hip_height);
        break;
      }
      case Task::walking: {
        const double w = 2.0 * kPi / 1.1;
        for (const double side : {-1.0, 1.0}) {
          const std::string s = side > 0 ? "_l" : "_r";
          const double ph = side > 0 ? kPi : 0.0;
          set("hip_flexion" + s, rad(10 + 22 * std::sin(w * t + ph)));
          set("knee_angle" + s, rad(32 + 25 * std::sin(w * t + ph - 1.4) + 6 * std::sin(2 * w * t + 2 * ph - 0.5)));
          set("ankle_angle" + s, rad(3 + 10 * std::sin(w * t + ph - 0.6)));
          set("shoulder_flexion" + s, rad(-18 * std::sin(w * t + ph)));
          set("elbow_flexion" + s, rad(25 + 12 * std::sin(w * t + ph + kPi)));
        }
        set("pelvis_rotation", rad(5) * std::sin(w * t));
        set("pelvis_list", rad(3) * std::sin(w * t + 0.3));
        set("pelvis_tz", 0.012 * std::sin(2 * w * t));
        break;
      }
    }
    return set.q;
  };
  return s;
}

// ---------------------------------------------------------------------------
// Camera rig

struct RigLayout {
  std::vector<CameraModel> cameras;
  std::string name = "custom";
};

/// Four cameras around a treadmill: anterior/posterior 3.67 m apart and yawed
/// 5 degrees, lateral pair 2.45 m apart, all aimed at the volume centre.
inline RigLayout paper_rig(double focal_px = 600.0, int width = 1920, int height = 1080) {
  RigLayout rig;
  rig.name = "paper-rig";
  const Vec3 target(0, 0, 0.9);
  const double yaw = rad(5);
  const std::vector<std::pair<std::string, Vec3>> places = {
      {"anterior", Vec3(1.835 * std::cos(yaw), 1.835 * std::sin(yaw), 0.9)},
      {"posterior", Vec3(-1.835 * std::cos(yaw), -1.835 * std::sin(yaw), 0.9)},
      {"left", Vec3(0, 1.225, 0.9)},
      {"right", Vec3(0, -1.225, 0.9)},
  };
  for (const auto& [id, pos] : places) {
    CameraModel c;
    c.id = id;
    c.image_width = width;
    c.image_height = height;
    c.intrinsics = intrinsics_matrix(focal_px, focal_px, width / 2.0, height / 2.0);
    c.rotation = look_at_rotation(pos, target);
    c.center = pos;
    rig.cameras.push_back(c);
  }
  return rig;
}

// ---------------------------------------------------------------------------
// Calibration fixtures

/// Inner corners of a checkerboard with 5 x 3 inner vertices and 95 mm
/// squares. `orientation` columns are the board's row, column and normal
/// directions; `origin` is the first corner.
inline std::vector<Vec3> checkerboard_corners(const Vec3& origin, const Mat3& orientation, double square = 0.095) {
  std::vector<Vec3> pts;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) pts.push_back(origin + orientation * Vec3(c * square, r * square, 0.0));
  }
  return pts;
}

/// Three board placements around the volume centre, tilted against each
/// other so the union is not coplanar.
inline std::vector<Vec3> checkerboard_placements() {
  std::vector<Vec3> pts;
  const double tilts[] = {-35.0, 0.0, 35.0};
  const double heights[] = {0.55, 0.95, 1.35};
  for (int i = 0; i < 3; ++i) {
    const Mat3 rot = (Eigen::AngleAxisd(rad(tilts[i]), Vec3::UnitZ()) * Eigen::AngleAxisd(rad(90.0), Vec3::UnitY())).toRotationMatrix();
    const Vec3 origin(0.05 * (i - 1), -0.19, heights[i]);
    for (const auto& p : checkerboard_corners(origin, rot)) pts.push_back(p);
  }
  return pts;
}

/// Projects `points` through `camera` with Gaussian pixel noise.
inline CorrespondenceSet correspondences(const CameraModel& camera, const std::vector<Vec3>& points, double sigma = 0.0,
                                         std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CorrespondenceSet set;
  set.source = CorrespondenceSource::synthetic;
  for (const auto& p : points) {
    Vec2 uv = project(camera, p);
    const double nx = gauss(rng), ny = gauss(rng);
    uv += sigma * Vec2(nx, ny);
    set.pairs.push_back({p, PixelPoint{uv, 1.0}});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Parametric body mesh

namespace detail {

struct MeshBuilder {
  BodyMesh mesh;
  static constexpr int kAround = 96;

  int add_vertex(const Vec3& p) {
    mesh.vertices.push_back(p);
    return static_cast<int>(mesh.vertices.size()) - 1;
  }

  // Flip the faces added since `first_face` when they enclose negative volume.
  void orient_outward(std::size_t first_face) {
    std::vector<Face> shell(mesh.faces.begin() + static_cast<std::ptrdiff_t>(first_face), mesh.faces.end());
    if (mocap::detail::signed_volume(mesh.vertices, shell) < 0.0) {
      for (std::size_t f = first_face; f < mesh.faces.size(); ++f) std::swap(mesh.faces[f][1], mesh.faces[f][2]);
    }
  }

  /// Capped loft of elliptical rings centred on (cx, cy); `levels` are
  /// (z, a, b) from bottom to top. Returns the first vertex of each ring.
  std::vector<int> loft(const std::string& segment, double cx, double cy, const std::vector<Vec3>& levels,
                        int* bottom_center = nullptr, int* top_center = nullptr) {
    const std::size_t first_face = mesh.faces.size();
    std::vector<int> rings;
    auto& seg = mesh.segments[segment];
    for (const auto& l : levels) {
      rings.push_back(static_cast<int>(mesh.vertices.size()));
      for (int k = 0; k < kAround; ++k) {
        const double phi = 2.0 * kPi * k / kAround;
        seg.push_back(add_vertex({cx + l.y() * std::cos(phi), cy + l.z() * std::sin(phi), l.x()}));
      }
    }
    for (std::size_t r = 0; r + 1 < rings.size(); ++r) {
      for (int k = 0; k < kAround; ++k) {
        const int a = rings[r] + k, b = rings[r] + (k + 1) % kAround;
        const int c = rings[r + 1] + k, d = rings[r + 1] + (k + 1) % kAround;
        mesh.faces.push_back({a, b, d});
        mesh.faces.push_back({a, d, c});
      }
    }
    const int bc = add_vertex({cx, cy, levels.front().x()});
    const int tc = add_vertex({cx, cy, levels.back().x()});
    seg.push_back(bc);
    seg.push_back(tc);
    for (int k = 0; k < kAround; ++k) {
      mesh.faces.push_back({bc, rings.front() + (k + 1) % kAround, rings.front() + k});
      mesh.faces.push_back({tc, rings.back() + k, rings.back() + (k + 1) % kAround});
    }
    orient_outward(first_face);
    if (bottom_center) *bottom_center = bc;
    if (top_center) *top_center = tc;
    return rings;
  }

  /// Closed box with `n` subdivisions per edge (n even so face midlines exist).
  /// Returns the lattice lookup for landmark picking.
  std::map<std::array<int, 3>, int> box(const std::string& segment, const Vec3& lo, const Vec3& hi, int n = 4) {
    const std::size_t first_face = mesh.faces.size();
    std::map<std::array<int, 3>, int> index;
    auto& seg = mesh.segments[segment];
    auto vertex = [&](int i, int j, int k) {
      const std::array<int, 3> key{i, j, k};
      const auto it = index.find(key);
      if (it != index.end()) return it->second;
      const Vec3 p(lo.x() + (hi.x() - lo.x()) * i / n, lo.y() + (hi.y() - lo.y()) * j / n, lo.z() + (hi.z() - lo.z()) * k / n);
      const int v = add_vertex(p);
      seg.push_back(v);
      index.emplace(key, v);
      return v;
    };
    // Each side: fixed axis `a` at value `s`, spanned by axes u, v.
    for (int a = 0; a < 3; ++a) {
      for (int s : {0, n}) {
        const int u = (a + 1) % 3, w = (a + 2) % 3;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            auto at = [&](int di, int dj) {
              std::array<int, 3> c{};
              c[static_cast<std::size_t>(a)] = s;
              c[static_cast<std::size_t>(u)] = i + di;
              c[static_cast<std::size_t>(w)] = j + dj;
              return vertex(c[0], c[1], c[2]);
            };
            const int p00 = at(0, 0), p10 = at(1, 0), p11 = at(1, 1), p01 = at(0, 1);
            if (s == n) {
              mesh.faces.push_back({p00, p10, p11});
              mesh.faces.push_back({p00, p11, p01});
            } else {
              mesh.faces.push_back({p00, p11, p10});
              mesh.faces.push_back({p00, p01, p11});
            }
          }
        }
      }
    }
    orient_outward(first_face);
    return index;
  }
};

inline double ellipse_perimeter(double a, double b) {
  const double h = (a - b) * (a - b) / ((a + b) * (a + b));
  return kPi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

}  // namespace detail

/// Design values the mesh was built from, keyed by measurement code, plus
/// the stature and the enclosed volume.
struct MeshTruth {
  std::map<std::string, double> values;
  double stature = 0.0;
  double volume = 0.0;
  double density = 985.0;
  double mass() const { return density * volume; }
};

struct HumanoidMesh {
  BodyMesh mesh;
  MeshTruth truth;
};

/// Standing body built from separate closed shells (elliptic cylinders,
/// boxes) that touch but never overlap, so segment volumes add up exactly.
/// Every landmark is a mesh vertex and all ground truth is analytic.
inline HumanoidMesh humanoid_mesh(double density = 985.0) {
  detail::MeshBuilder b;
  MeshTruth truth;
  truth.density = density;
  truth.stature = 1.75;
  auto& lm = b.mesh.landmarks;
  const int quarter = detail::MeshBuilder::kAround / 4;
  double volume = 0.0;
  // Volume of the 96-gon prism actually meshed, not of the smooth cylinder.
  auto cyl_volume = [](double a, double bb, double h) {
    const int n = detail::MeshBuilder::kAround;
    return 0.5 * n * std::sin(2.0 * kPi / n) * a * bb * h;
  };

  int bc = 0, tc = 0;
  // Head and neck.
  auto rings = b.loft("head", 0, 0, {{1.53, 0.09, 0.09}, {1.64, 0.09, 0.09}, {1.75, 0.09, 0.09}}, &bc, &tc);
  lm["HEAD_TOP"] = tc;
  lm["HEAD_LEFT_TEMPLE"] = rings[1] + quarter;
  truth.values["A"] = 2.0 * kPi * 0.09;
  volume += cyl_volume(0.09, 0.09, 0.22);
  rings = b.loft("neck", 0, 0, {{1.48, 0.06, 0.06}, {1.505, 0.06, 0.06}, {1.53, 0.06, 0.06}});
  lm["NECK_ADAM_APPLE"] = rings[1];
  truth.values["B"] = 2.0 * kPi * 0.06;
  volume += cyl_volume(0.06, 0.06, 0.05);

  // Torso: chest, abdomen, pelvis.
  rings = b.loft("torso", 0, 0, {{1.20, 0.12, 0.155}, {1.35, 0.12, 0.155}, {1.48, 0.12, 0.155}}, &bc, &tc);
  lm["SHOULDER_TOP"] = tc;
  lm["CHEST"] = rings[1];
  truth.values["D"] = detail::ellipse_perimeter(0.12, 0.155);
  double torso = cyl_volume(0.12, 0.155, 0.28);
  rings = b.loft("torso", 0, 0, {{0.99, 0.105, 0.145}, {1.08, 0.105, 0.145}, {1.20, 0.105, 0.145}});
  lm["WAIST"] = rings[1];
  truth.values["E"] = detail::ellipse_perimeter(0.105, 0.145);
  torso += cyl_volume(0.105, 0.145, 0.21);
  b.loft("torso", 0, 0, {{0.86, 0.10, 0.15}, {0.99, 0.10, 0.15}}, &bc, &tc);
  lm["CROTCH"] = bc;
  torso += cyl_volume(0.10, 0.15, 0.13);
  truth.values["C"] = 1.48 - 0.86;
  truth.values["O"] = density * torso;
  volume += torso;

  for (const double side : {1.0, -1.0}) {
    const bool left = side > 0;
    const std::string arm = left ? "left_arm" : "right_arm";
    const std::string leg = left ? "left_leg" : "right_leg";
    const std::string P = left ? "LEFT_" : "RIGHT_";
    const int lateral = left ? quarter : 3 * quarter;
    const double ay = side * 0.21, ly = side * 0.09;

    // Arm: upper arm, forearm, wrist, hand.
    double arm_volume = 0.0;
    b.loft(arm, 0, ay, {{1.13, 0.045, 0.045}, {1.43, 0.045, 0.045}}, &bc, &tc);
    lm[P + "SHOULDER"] = tc;
    arm_volume += cyl_volume(0.045, 0.045, 0.30);
    rings = b.loft(arm, 0, ay, {{0.97, 0.038, 0.038}, {1.05, 0.038, 0.038}, {1.13, 0.038, 0.038}}, &bc, &tc);
    lm[P + "ELBOW"] = tc;
    if (left) lm["LEFT_FOREARM"] = rings[1] + lateral;
    arm_volume += cyl_volume(0.038, 0.038, 0.16);
    rings = b.loft(arm, 0, ay, {{0.88, 0.03, 0.03}, {0.90, 0.03, 0.03}, {0.97, 0.03, 0.03}});
    lm[P + "WRIST"] = rings[1] + lateral;
    arm_volume += cyl_volume(0.03, 0.03, 0.09);
    b.box(arm, Vec3(-0.02, ay - 0.045, 0.71), Vec3(0.02, ay + 0.045, 0.88));
    arm_volume += 0.04 * 0.09 * 0.17;
    volume += arm_volume;
    truth.values[left ? "P" : "Q"] = density * arm_volume;

    // Leg: thigh, calf, lower leg, foot.
    rings = b.loft(leg, 0, ly, {{0.51, 0.07, 0.07}, {0.70, 0.07, 0.07}, {0.86, 0.07, 0.07}}, &bc, &tc);
    lm[P + "HIP"] = tc;
    lm[P + "KNEE"] = bc;
    if (left) lm["LEFT_THIGH"] = rings[1] + lateral;
    volume += cyl_volume(0.07, 0.07, 0.35);
    rings = b.loft(leg, 0, ly, {{0.30, 0.055, 0.055}, {0.42, 0.055, 0.055}, {0.51, 0.055, 0.055}});
    if (left) lm["LEFT_CALF"] = rings[1] + lateral;
    volume += cyl_volume(0.055, 0.055, 0.21);
    rings = b.loft(leg, 0, ly, {{0.07, 0.04, 0.04}, {0.12, 0.04, 0.04}, {0.30, 0.04, 0.04}});
    lm[P + "ANKLE"] = rings[1] + lateral;
    volume += cyl_volume(0.04, 0.04, 0.23);
    const auto foot = b.box(leg, Vec3(-0.07, ly - 0.045, 0.0), Vec3(0.19, ly + 0.045, 0.07));
    lm[P + "HEEL"] = foot.at({0, 2, 0});
    volume += 0.26 * 0.09 * 0.07;
  }
  truth.values["G"] = 2.0 * kPi * 0.03;
  truth.values["H"] = 2.0 * kPi * 0.038;
  truth.values["J"] = 2.0 * kPi * 0.07;
  truth.values["K"] = 2.0 * kPi * 0.055;
  truth.values["L"] = 2.0 * kPi * 0.04;

  const auto& v = b.mesh.vertices;
  auto at = [&](const std::string& n) { return v[static_cast<std::size_t>(lm.at(n))]; };
  truth.values["F"] = (at("LEFT_SHOULDER") - at("RIGHT_SHOULDER")).norm();
  truth.values["I"] = (at("LEFT_SHOULDER") - at("LEFT_ELBOW")).norm() + (at("LEFT_ELBOW") - at("LEFT_WRIST")).norm();
  truth.values["M"] = (at("HEAD_TOP") - at("LEFT_HEEL")).norm();
  truth.volume = volume;
  truth.values["N"] = truth.mass();

  HumanoidMesh out{std::move(b.mesh), std::move(truth)};
  return out;
}

/// Measurement definitions matching humanoid_mesh(): limb slices use the
/// vertical hip-knee and shoulder-elbow lines as plane normals.
inline std::vector<MeasurementDefinition> humanoid_measurements() {
  auto defs = default_measurements();
  for (auto& d : defs) {
    if (d.code == "A" || d.code == "B") {
      d.axis_from = "CROTCH";
      d.axis_to = "SHOULDER_TOP";
    } else if (d.code == "G" || d.code == "H") {
      d.axis_from = "LEFT_SHOULDER";
      d.axis_to = "LEFT_ELBOW";
    } else if (d.code == "J" || d.code == "K" || d.code == "L") {
      d.axis_from = "LEFT_HIP";
      d.axis_to = "LEFT_KNEE";
    }
  }
  return defs;
}

// ---------------------------------------------------------------------------
// Dataset generation

struct NoiseSpec {
  double pixel_sigma = 0.0;
  double occlusion_rate = 0.0;  // per landmark-frame, all cameras at once
  double outlier_rate = 0.0;    // per landmark-frame-camera, confident but displaced
  double outlier_px = 40.0;
  double visible_confidence_lo = 0.75, visible_confidence_hi = 0.95;
  double occluded_confidence_lo = 0.05, occluded_confidence_hi = 0.45;
  std::uint64_t seed = 1;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(pixel_sigma >= 0.0) || !prob(occlusion_rate) || !prob(outlier_rate) || !prob(visible_confidence_lo) ||
        !prob(visible_confidence_hi) || !prob(occluded_confidence_lo) || !prob(occluded_confidence_hi)) {
      throw Error(ErrorCode::invalid_argument, "synth", "noise parameters out of range");
    }
  }
};

struct Bundle {
  std::string task;
  double rate = 30.0;
  std::vector<int> frames;
  RigLayout rig;
  std::vector<CameraStream> streams;
  std::vector<Eigen::VectorXd> q;                      // truth, per frame
  std::vector<std::vector<Vec3>> keypoints;            // truth, [frame][25]
  std::vector<std::vector<bool>> occluded;             // [frame][25]
  TrajectorySet markers;                               // truth, 57 markers
  SkeletonModel model;                                 // marker model
  MarkerSetTemplate marker_template;
  HumanoidMesh body;

  std::vector<std::vector<double>> truth_angles() const {
    std::vector<std::vector<double>> out;
    for (const auto& qi : q) out.push_back(joint_angles(qi, model));
    return out;
  }
};

/// Samples the script, projects the keypoints through the rig and corrupts
/// them per `noise`. The same seed always yields the same bundle.
inline Bundle generate(const MotionScript& script, const RigLayout& rig, const NoiseSpec& noise,
                       const BodyDimensions& dims = {}) {
  noise.validate();
  Bundle b;
  b.task = script.task;
  b.rate = script.rate;
  b.rig = rig;
  b.model = marker_model(dims);
  b.marker_template = marker_template(dims);
  b.body = humanoid_mesh();
  const SkeletonModel keys = keypoint_model(dims);

  const std::size_t n = script.frame_count();
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  for (const auto& cam : rig.cameras) b.streams.push_back({cam.id, {}});
  b.markers = make_trajectories([&] {
    std::vector<std::string> names;
    for (const auto& m : b.model.markers()) names.push_back(m.name);
    return names;
  }(), {}, script.rate);

  for (std::size_t i = 0; i < n; ++i) {
    const int frame = static_cast<int>(i);
    b.frames.push_back(frame);
    Eigen::VectorXd q = script.q(script.time(i));
    bool clamped = false;
    q = b.model.clamped(q, &clamped);
    if (clamped) throw Error(ErrorCode::invalid_argument, "synth", fmt::format("script leaves the joint bounds at frame {}", i));
    b.q.push_back(q);
    const auto kp = forward_kinematics(keys, q);
    b.keypoints.push_back(kp);
    const auto mk = forward_kinematics(b.model, q);
    for (std::size_t m = 0; m < mk.size(); ++m) {
      b.markers[m].frames.push_back(frame);
      b.markers[m].positions.push_back(mk[m]);
      b.markers[m].gaps.push_back(false);
    }

    std::vector<bool> occl(kp.size());
    for (std::size_t l = 0; l < kp.size(); ++l) occl[l] = uni(rng) < noise.occlusion_rate;
    b.occluded.push_back(occl);

    for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
      const auto& cam = rig.cameras[c];
      KeypointFrame kf{cam.id, frame, {}};
      for (std::size_t l = 0; l < kp.size(); ++l) {
        const Vec3 local = cam.rotation * (kp[l] - cam.center);
        if (local.z() <= 0.05) {
          throw Error(ErrorCode::subject_out_of_view, "synth",
                      fmt::format("{} behind camera {} at frame {}", body25b::kNames[l], cam.id, i));
        }
        Vec2 uv = project(cam, kp[l]);
        if (!cam.in_image(uv)) {
          throw Error(ErrorCode::subject_out_of_view, "synth",
                      fmt::format("{} outside camera {} at frame {} ({:.1f}, {:.1f})", body25b::kNames[l], cam.id, i,
                                  uv.x(), uv.y()));
        }
        const double nx = gauss(rng), ny = gauss(rng);
        uv += noise.pixel_sigma * Vec2(nx, ny);
        double conf = uniform(noise.visible_confidence_lo, noise.visible_confidence_hi);
        const double occluded_conf = uniform(noise.occluded_confidence_lo, noise.occluded_confidence_hi);
        const double outlier = uni(rng);
        const double angle = uniform(0.0, 2.0 * kPi);
        if (occl[l]) {
          conf = occluded_conf;
        } else if (outlier < noise.outlier_rate) {
          uv += noise.outlier_px * Vec2(std::cos(angle), std::sin(angle));
        }
        kf.landmarks.push_back({uv, conf});
      }
      b.streams[c].frames.push_back(std::move(kf));
    }
  }
  return b;
}

}  // namespace mocap::synth
