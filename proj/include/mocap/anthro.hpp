#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "mocap/augment.hpp"
#include "mocap/types.hpp"

namespace mocap {

using Face = std::array<int, 3>;

struct BodyMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::map<std::string, int> landmarks;
  std::map<std::string, std::vector<int>> segments;  // segment -> vertex indices

  void validate() const {
    const int n = static_cast<int>(vertices.size());
    for (const auto& f : faces) {
      for (int v : f) {
        if (v < 0 || v >= n) throw Error(ErrorCode::invalid_argument, "anthro", fmt::format("face index {} out of range", v));
      }
    }
    for (const auto& [name, v] : landmarks) {
      if (v < 0 || v >= n) throw Error(ErrorCode::invalid_argument, "anthro", "landmark " + name + " has an invalid vertex");
    }
    for (const auto& [name, set] : segments) {
      for (int v : set) {
        if (v < 0 || v >= n) throw Error(ErrorCode::invalid_argument, "anthro", "segment " + name + " has an invalid vertex");
      }
    }
  }

  const Vec3& landmark(const std::string& name) const {
    const auto it = landmarks.find(name);
    if (it == landmarks.end()) throw Error(ErrorCode::unknown_landmark, "anthro", "no landmark named '" + name + "'");
    return vertices.at(static_cast<std::size_t>(it->second));
  }

  /// Faces whose three vertices all belong to `segment`; every face when the
  /// name is empty or "whole".
  std::vector<Face> faces_of(const std::string& segment) const {
    if (segment.empty() || segment == "whole") return faces;
    const auto it = segments.find(segment);
    if (it == segments.end()) throw Error(ErrorCode::invalid_argument, "anthro", "no segment named '" + segment + "'");
    std::vector<bool> in(vertices.size(), false);
    for (int v : it->second) in[static_cast<std::size_t>(v)] = true;
    std::vector<Face> out;
    for (const auto& f : faces) {
      if (in[static_cast<std::size_t>(f[0])] && in[static_cast<std::size_t>(f[1])] && in[static_cast<std::size_t>(f[2])]) {
        out.push_back(f);
      }
    }
    return out;
  }

  BodyMesh scaled(double s) const {
    BodyMesh m = *this;
    for (auto& v : m.vertices) v *= s;
    return m;
  }
};

/// Vertex indices of the landmarks on the 10,475-vertex parametric body
/// topology. RIGHT_ANKLE repeats RIGHT_HIP's vertex in the source table and
/// is kept only so the table stays complete; meshes from other topologies
/// ship their own sidecar.
inline std::map<std::string, int> reference_topology_landmarks() {
  return {{"HEAD_TOP", 8976},     {"HEAD_LEFT_TEMPLE", 1980}, {"NECK_ADAM_APPLE", 8940}, {"LEFT_HEEL", 8846},
          {"RIGHT_HEEL", 8635},   {"SHOULDER_TOP", 5616},     {"RIGHT_WRIST", 7449},     {"LEFT_WRIST", 4823},
          {"LEFT_ELBOW", 4219},   {"RIGHT_ELBOW", 6788},      {"LEFT_SHOULDER", 4442},   {"RIGHT_SHOULDER", 7218},
          {"RIGHT_HIP", 3732},    {"LEFT_HIP", 4112},         {"LEFT_ANKLE", 5880},      {"RIGHT_ANKLE", 3732}};
}

inline constexpr std::size_t kReferenceTopologyVertices = 10475;

// ---------------------------------------------------------------------------
// Lengths

inline double landmark_distance(const BodyMesh& mesh, const std::string& a, const std::string& b) {
  return (mesh.landmark(a) - mesh.landmark(b)).norm();
}

/// Sum of consecutive landmark distances along a chain.
inline double landmark_path(const BodyMesh& mesh, const std::vector<std::string>& chain) {
  double total = 0.0;
  for (std::size_t i = 1; i < chain.size(); ++i) total += landmark_distance(mesh, chain[i - 1], chain[i]);
  return total;
}

// ---------------------------------------------------------------------------
// Plane slicing

struct SliceLoop {
  std::vector<Vec3> points;
  double perimeter = 0.0;
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

}  // namespace detail

/// Closed loops where the plane through `point` with normal `normal` cuts the
/// given faces. Vertices on the plane count as being on its positive side.
inline std::vector<SliceLoop> slice(const BodyMesh& mesh, const std::vector<Face>& faces, const Vec3& point,
                                    const Vec3& normal) {
  const Vec3 n = normal.normalized();
  auto dist = [&](int v) { return n.dot(mesh.vertices[static_cast<std::size_t>(v)] - point); };

  std::unordered_map<std::uint64_t, Vec3> crossing;
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> links;
  auto cross_point = [&](int a, int b) {
    const auto key = detail::edge_key(a, b);
    if (!crossing.count(key)) {
      const double da = dist(a), db = dist(b);
      const Vec3& pa = mesh.vertices[static_cast<std::size_t>(a)];
      const Vec3& pb = mesh.vertices[static_cast<std::size_t>(b)];
      crossing[key] = pa + (da / (da - db)) * (pb - pa);
    }
    return key;
  };

  for (const auto& f : faces) {
    std::array<bool, 3> pos{};
    for (int i = 0; i < 3; ++i) pos[static_cast<std::size_t>(i)] = dist(f[static_cast<std::size_t>(i)]) >= 0.0;
    if (pos[0] == pos[1] && pos[1] == pos[2]) continue;
    std::vector<std::uint64_t> ends;
    for (int i = 0; i < 3; ++i) {
      const int a = f[static_cast<std::size_t>(i)], b = f[static_cast<std::size_t>((i + 1) % 3)];
      if (pos[static_cast<std::size_t>(i)] != pos[static_cast<std::size_t>((i + 1) % 3)]) ends.push_back(cross_point(a, b));
    }
    links[ends[0]].push_back(ends[1]);
    links[ends[1]].push_back(ends[0]);
  }

  for (const auto& [key, adj] : links) {
    if (adj.size() != 2) {
      throw Error(ErrorCode::open_loop, "anthro", "slice does not form closed loops (mesh is open along the plane)");
    }
  }

  std::vector<SliceLoop> loops;
  std::set<std::uint64_t> visited;
  std::vector<std::uint64_t> keys;
  keys.reserve(links.size());
  for (const auto& kv : links) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  for (const auto start : keys) {
    if (visited.count(start)) continue;
    SliceLoop loop;
    visited.insert(start);
    loop.points.push_back(crossing[start]);
    std::uint64_t prev = start, cur = links[start][0];
    while (cur != start) {
      if (visited.count(cur)) throw Error(ErrorCode::open_loop, "anthro", "slice loop does not close");
      visited.insert(cur);
      loop.points.push_back(crossing[cur]);
      const auto& adj = links[cur];
      const std::uint64_t next = adj[0] == prev ? adj[1] : adj[0];
      prev = cur;
      cur = next;
    }
    for (std::size_t i = 0; i < loop.points.size(); ++i) {
      loop.perimeter += (loop.points[(i + 1) % loop.points.size()] - loop.points[i]).norm();
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

/// Perimeter of the slice loop nearest `point` on the plane with normal
/// `axis`. `segment` restricts the slice to that segment's faces.
inline double circumference_at(const BodyMesh& mesh, const Vec3& point, const Vec3& axis, const std::string& segment = "") {
  const auto loops = slice(mesh, mesh.faces_of(segment), point, axis);
  if (loops.empty()) throw Error(ErrorCode::no_intersection, "anthro", "slicing plane misses the mesh");
  const SliceLoop* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& l : loops) {
    for (const auto& p : l.points) {
      const double d = (p - point).norm();
      if (d < best_d) {
        best_d = d;
        best = &l;
      }
    }
  }
  return best->perimeter;
}

inline double circumference(const BodyMesh& mesh, const std::string& landmark, const Vec3& axis,
                            const std::string& segment = "") {
  return circumference_at(mesh, mesh.landmark(landmark), axis, segment);
}

// ---------------------------------------------------------------------------
// Volume

namespace detail {

inline std::map<std::uint64_t, int> edge_use(const std::vector<Face>& faces) {
  std::map<std::uint64_t, int> use;
  for (const auto& f : faces) {
    for (int i = 0; i < 3; ++i) ++use[edge_key(f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>((i + 1) % 3)])];
  }
  return use;
}

inline double signed_volume(const std::vector<Vec3>& v, const std::vector<Face>& faces) {
  double sum = 0.0;
  for (const auto& f : faces) {
    const Vec3& a = v[static_cast<std::size_t>(f[0])];
    const Vec3& b = v[static_cast<std::size_t>(f[1])];
    const Vec3& c = v[static_cast<std::size_t>(f[2])];
    sum += a.dot(b.cross(c));
  }
  return sum / 6.0;
}

}  // namespace detail

inline bool is_watertight(const std::vector<Face>& faces) {
  if (faces.empty()) return false;
  for (const auto& [key, n] : detail::edge_use(faces)) {
    if (n != 2) return false;
  }
  return true;
}

/// Enclosed volume by the signed-tetrahedron sum over faces. The whole mesh
/// must be closed; a segment subset is first closed by fanning every boundary
/// loop to its centroid.
inline double mesh_volume(const BodyMesh& mesh, const std::string& segment = "") {
  const bool whole = segment.empty() || segment == "whole";
  std::vector<Face> faces = mesh.faces_of(segment);
  if (whole) {
    if (!is_watertight(faces)) throw Error(ErrorCode::not_watertight, "anthro", "mesh is not closed");
    return std::abs(detail::signed_volume(mesh.vertices, faces));
  }
  if (faces.empty()) throw Error(ErrorCode::not_watertight, "anthro", "segment " + segment + " has no faces");

  // Directed boundary edges (used by exactly one face), chained into loops.
  const auto use = detail::edge_use(faces);
  std::map<int, int> next;
  for (const auto& f : faces) {
    for (int i = 0; i < 3; ++i) {
      const int a = f[static_cast<std::size_t>(i)], b = f[static_cast<std::size_t>((i + 1) % 3)];
      if (use.at(detail::edge_key(a, b)) == 1) {
        if (next.count(a)) throw Error(ErrorCode::not_watertight, "anthro", "segment boundary is not a simple loop");
        next[a] = b;
      }
    }
  }
  std::vector<Vec3> verts = mesh.vertices;
  std::set<int> done;
  for (const auto& [first, unused] : next) {
    if (done.count(first)) continue;
    std::vector<int> loop;
    int v = first;
    while (!done.count(v)) {
      done.insert(v);
      loop.push_back(v);
      const auto it = next.find(v);
      if (it == next.end()) throw Error(ErrorCode::not_watertight, "anthro", "segment boundary is not closed");
      v = it->second;
    }
    if (v != first) throw Error(ErrorCode::not_watertight, "anthro", "segment boundary is not a simple loop");
    Vec3 c = Vec3::Zero();
    for (int i : loop) c += verts[static_cast<std::size_t>(i)];
    verts.push_back(c / static_cast<double>(loop.size()));
    const int ci = static_cast<int>(verts.size()) - 1;
    for (std::size_t i = 0; i < loop.size(); ++i) faces.push_back({ci, loop[(i + 1) % loop.size()], loop[i]});
  }
  if (!is_watertight(faces)) throw Error(ErrorCode::not_watertight, "anthro", "segment " + segment + " cannot be closed");
  return std::abs(detail::signed_volume(verts, faces));
}

// ---------------------------------------------------------------------------
// Weight

enum class BmiCategory { underweight, normal, overweight, obese };

inline const char* to_string(BmiCategory c) {
  switch (c) {
    case BmiCategory::underweight: return "underweight";
    case BmiCategory::normal: return "normal";
    case BmiCategory::overweight: return "overweight";
    case BmiCategory::obese: return "obese";
  }
  return "unknown";
}

struct DensityModel {
  double rho = 985.0;  // kg/m^3
  std::array<double, 4> bmi_medians = {17.0, 21.7, 27.5, 35.0};

  static BmiCategory category(double bmi) {
    if (bmi < 18.5) return BmiCategory::underweight;
    if (bmi < 25.0) return BmiCategory::normal;
    if (bmi < 30.0) return BmiCategory::overweight;
    return BmiCategory::obese;
  }

  double median(BmiCategory c) const { return bmi_medians[static_cast<std::size_t>(c)]; }

  void validate() const {
    if (!(rho > 0.0)) throw Error(ErrorCode::invalid_argument, "anthro", "density must be positive");
    for (std::size_t i = 1; i < bmi_medians.size(); ++i) {
      if (!(bmi_medians[i] > bmi_medians[i - 1])) {
        throw Error(ErrorCode::invalid_argument, "anthro", "BMI medians must increase across categories");
      }
    }
  }
};

struct WeightEstimate {
  double extracted = 0.0;  // rho * V
  double bmi_calculated = 0.0;
  BmiCategory category = BmiCategory::normal;
  double weight = 0.0;  // after moving BMI to the category median
};

inline WeightEstimate weight_estimate(double volume, double height, const DensityModel& density = {}) {
  if (!(volume > 0.0) || !(height > 0.0)) {
    throw Error(ErrorCode::non_positive_input, "anthro", fmt::format("volume {} and height {} must be positive", volume, height));
  }
  density.validate();
  WeightEstimate w;
  w.extracted = density.rho * volume;
  w.bmi_calculated = w.extracted / (height * height);
  w.category = DensityModel::category(w.bmi_calculated);
  w.weight = w.extracted + (w.bmi_calculated - density.median(w.category)) * height * height;
  return w;
}

// ---------------------------------------------------------------------------
// Measurement pose

/// Frame whose trunk (mid-hip to mid-shoulder) and leg (mid-hip to mid-ankle)
/// lines are together closest to vertical. Ties go to the earliest frame.
inline std::size_t select_measurement_frame(const std::vector<LandmarkFrame>& frames) {
  using namespace body25b;
  std::optional<std::size_t> best;
  double best_score = std::numeric_limits<double>::infinity();
  auto angle_to_vertical = [](const Vec3& v) { return std::acos(std::clamp(v.normalized().z(), -1.0, 1.0)); };
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const auto hip = detail::midpoint(f, {l_hip, r_hip});
    const auto shoulder = detail::midpoint(f, {l_shoulder, r_shoulder});
    const auto ankle = detail::midpoint(f, {l_ankle, r_ankle});
    if (!hip || !shoulder || !ankle) continue;
    const double trunk = angle_to_vertical(*shoulder - *hip);
    const double leg = angle_to_vertical(*hip - *ankle);
    const double score = trunk + leg;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  if (!best) throw Error(ErrorCode::no_valid_frame, "anthro", "no frame has hips, shoulders and ankles");
  return *best;
}

// ---------------------------------------------------------------------------
// Measurement set

enum class MeasurementMethod { length, circumference, volume_weight };

inline const char* to_string(MeasurementMethod m) {
  switch (m) {
    case MeasurementMethod::length: return "length";
    case MeasurementMethod::circumference: return "circumference";
    case MeasurementMethod::volume_weight: return "volume_weight";
  }
  return "unknown";
}

/// One coded measurement. Lengths follow `landmarks` as a chain;
/// circumferences slice at `landmarks[0]` with the normal running from
/// `axis_from` to `axis_to`; weights integrate `segment` ("whole" applies the
/// BMI correction).
struct MeasurementDefinition {
  std::string code;
  std::string name;
  MeasurementMethod method = MeasurementMethod::length;
  std::vector<std::string> landmarks;
  std::string axis_from;
  std::string axis_to;
  std::string segment;
};

inline std::vector<MeasurementDefinition> default_measurements() {
  using M = MeasurementMethod;
  return {
      {"A", "Head Circumference", M::circumference, {"HEAD_LEFT_TEMPLE"}, "NECK_ADAM_APPLE", "HEAD_TOP", "head"},
      {"B", "Neck Circumference", M::circumference, {"NECK_ADAM_APPLE"}, "SHOULDER_TOP", "HEAD_TOP", "neck"},
      {"C", "Full Torso Length", M::length, {"SHOULDER_TOP", "CROTCH"}, "", "", ""},
      {"D", "Chest Circumference", M::circumference, {"CHEST"}, "CROTCH", "SHOULDER_TOP", "torso"},
      {"E", "Waist Circumference", M::circumference, {"WAIST"}, "CROTCH", "SHOULDER_TOP", "torso"},
      {"F", "Shoulder to Shoulder length", M::length, {"LEFT_SHOULDER", "RIGHT_SHOULDER"}, "", "", ""},
      {"G", "Wrist Circumference", M::circumference, {"LEFT_WRIST"}, "LEFT_ELBOW", "LEFT_WRIST", "left_arm"},
      {"H", "Forearm Circumference", M::circumference, {"LEFT_FOREARM"}, "LEFT_ELBOW", "LEFT_WRIST", "left_arm"},
      {"I", "Arm Length", M::length, {"LEFT_SHOULDER", "LEFT_ELBOW", "LEFT_WRIST"}, "", "", ""},
      {"J", "Thigh Circumference", M::circumference, {"LEFT_THIGH"}, "LEFT_HIP", "LEFT_KNEE", "left_leg"},
      {"K", "Calf Circumference", M::circumference, {"LEFT_CALF"}, "LEFT_KNEE", "LEFT_ANKLE", "left_leg"},
      {"L", "Ankle Circumference", M::circumference, {"LEFT_ANKLE"}, "LEFT_KNEE", "LEFT_ANKLE", "left_leg"},
      {"M", "Height", M::length, {"HEAD_TOP", "LEFT_HEEL"}, "", "", ""},
      {"N", "Weight", M::volume_weight, {}, "", "", "whole"},
      {"O", "Torso Weight", M::volume_weight, {}, "", "", "torso"},
      {"P", "Arm Left Weight", M::volume_weight, {}, "", "", "left_arm"},
      {"Q", "Arm Right Weight", M::volume_weight, {}, "", "", "right_arm"},
  };
}

struct MeasurementValue {
  std::string name;
  double value = 0.0;
  std::string unit;
  MeasurementMethod method = MeasurementMethod::length;
};

struct MeasurementReport {
  std::map<std::string, MeasurementValue> values;
  std::map<std::string, std::string> missing;  // code -> reason
  double bmi = 0.0;
  BmiCategory bmi_category = BmiCategory::normal;
  std::optional<WeightEstimate> weight_detail;

  bool has(const std::string& code) const { return values.count(code) > 0; }
  double at(const std::string& code) const {
    const auto it = values.find(code);
    if (it == values.end()) throw Error(ErrorCode::invalid_argument, "anthro", "report has no measurement " + code);
    return it->second.value;
  }
};

/// Evaluates every definition. Failures are collected per code instead of
/// aborting the report; the whole-body weight needs the height (code M).
inline MeasurementReport measure_all(const BodyMesh& mesh, const DensityModel& density = {},
                                     const std::vector<MeasurementDefinition>& defs = default_measurements()) {
  mesh.validate();
  density.validate();
  MeasurementReport report;
  std::optional<double> height;
  for (const auto& d : defs) {
    if (d.method == MeasurementMethod::length && d.code == "M") {
      try {
        height = landmark_path(mesh, d.landmarks);
      } catch (const Error&) {
      }
    }
  }
  for (const auto& d : defs) {
    try {
      MeasurementValue v{d.name, 0.0, "m", d.method};
      switch (d.method) {
        case MeasurementMethod::length:
          v.value = landmark_path(mesh, d.landmarks);
          break;
        case MeasurementMethod::circumference: {
          if (d.landmarks.empty()) throw Error(ErrorCode::invalid_argument, "anthro", "circumference needs a landmark");
          const Vec3 axis = mesh.landmark(d.axis_to) - mesh.landmark(d.axis_from);
          v.value = circumference(mesh, d.landmarks.front(), axis, d.segment);
          break;
        }
        case MeasurementMethod::volume_weight: {
          v.unit = "kg";
          const double volume = mesh_volume(mesh, d.segment);
          if (d.segment.empty() || d.segment == "whole") {
            if (!height) throw Error(ErrorCode::unknown_landmark, "anthro", "whole-body weight needs the height (M)");
            const WeightEstimate w = weight_estimate(volume, *height, density);
            v.value = w.weight;
            report.weight_detail = w;
          } else {
            v.value = density.rho * volume;
          }
          break;
        }
      }
      if (!(v.value > 0.0)) throw Error(ErrorCode::numerical_degeneracy, "anthro", "measurement is not positive");
      report.values.emplace(d.code, v);
    } catch (const Error& e) {
      report.missing.emplace(d.code, e.what());
    }
  }
  if (report.weight_detail && height) {
    report.bmi = report.weight_detail->weight / (*height * *height);
    report.bmi_category = DensityModel::category(report.bmi);
  }
  return report;
}

}  // namespace mocap
