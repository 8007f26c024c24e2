#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "mocap/filt.hpp"
#include "mocap/types.hpp"

namespace mocap {

enum class JointType { free, ball, hinge, weld };

inline const char* to_string(JointType t) {
  switch (t) {
    case JointType::free: return "free";
    case JointType::ball: return "ball";
    case JointType::hinge: return "hinge";
    case JointType::weld: return "weld";
  }
  return "unknown";
}

inline std::optional<JointType> joint_type_from_string(const std::string& s) {
  if (s == "free") return JointType::free;
  if (s == "ball") return JointType::ball;
  if (s == "hinge") return JointType::hinge;
  if (s == "weld") return JointType::weld;
  return std::nullopt;
}

struct Coordinate {
  std::string name;
  double lower = -kPi;
  double upper = kPi;
  bool rotational = true;
};

/// A rigid body attached to its parent by one joint. `origin` is the joint
/// centre in the parent frame; segment frames coincide with the world axes
/// at q = 0. Rotational axes are applied intrinsically in listed order.
struct Segment {
  std::string name;
  int parent = -1;
  Vec3 origin = Vec3::Zero();
  JointType joint = JointType::weld;
  std::vector<Vec3> axes;
  std::size_t first_coordinate = 0;

  std::size_t coordinate_count() const {
    switch (joint) {
      case JointType::free: return 3 + axes.size();
      case JointType::ball: return 3;
      case JointType::hinge: return 1;
      case JointType::weld: return 0;
    }
    return 0;
  }
};

struct VirtualMarker {
  std::string name;
  int segment = 0;
  Vec3 local = Vec3::Zero();
};

/// Named angle read straight from one coordinate, reported in degrees.
struct AngleDefinition {
  std::string name;
  std::string coordinate;
  double sign = 1.0;
};

struct SegmentPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
};

class SkeletonModel {
 public:
  std::string name = "skeleton";

  int add_segment(Segment segment, const std::vector<Coordinate>& coordinates) {
    if (segment.parent >= static_cast<int>(segments_.size())) {
      throw Error(ErrorCode::invalid_argument, "kin", "segment " + segment.name + " added before its parent");
    }
    segment.first_coordinate = coordinates_.size();
    if (coordinates.size() != segment.coordinate_count()) {
      throw Error(ErrorCode::invalid_argument, "kin",
                  fmt::format("segment {} needs {} coordinates, got {}", segment.name, segment.coordinate_count(),
                              coordinates.size()));
    }
    coordinates_.insert(coordinates_.end(), coordinates.begin(), coordinates.end());
    segments_.push_back(std::move(segment));
    rebuild_ancestry();
    return static_cast<int>(segments_.size()) - 1;
  }

  /// Adds a marker from its position in the neutral (q = 0) pose.
  void add_marker_neutral(const std::string& marker, const std::string& segment, const Vec3& neutral) {
    const int s = segment_index(segment);
    markers_.push_back({marker, s, neutral - neutral_origins_.at(static_cast<std::size_t>(s))});
  }

  void add_angle(AngleDefinition def) { angles_.push_back(std::move(def)); }

  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Coordinate>& coordinates() const { return coordinates_; }
  const std::vector<VirtualMarker>& markers() const { return markers_; }
  const std::vector<AngleDefinition>& angles() const { return angles_; }
  std::size_t dof() const { return coordinates_.size(); }

  int segment_index(const std::string& segment) const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i].name == segment) return static_cast<int>(i);
    }
    throw Error(ErrorCode::invalid_argument, "kin", "unknown segment '" + segment + "'");
  }

  std::optional<std::size_t> coordinate_index(const std::string& coordinate) const {
    for (std::size_t i = 0; i < coordinates_.size(); ++i) {
      if (coordinates_[i].name == coordinate) return i;
    }
    return std::nullopt;
  }

  std::optional<std::size_t> marker_index(const std::string& marker) const {
    for (std::size_t i = 0; i < markers_.size(); ++i) {
      if (markers_[i].name == marker) return i;
    }
    return std::nullopt;
  }

  const Vec3& neutral_origin(std::size_t segment) const { return neutral_origins_.at(segment); }

  /// True when `ancestor` is `segment` or lies on its path to the root.
  bool moves_with(std::size_t ancestor, std::size_t segment) const { return ancestry_[segment][ancestor]; }

  Eigen::VectorXd neutral() const { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof())); }

  Eigen::VectorXd clamped(const Eigen::VectorXd& q, bool* changed = nullptr) const {
    Eigen::VectorXd out = q;
    bool any = false;
    for (std::size_t i = 0; i < coordinates_.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double c = std::clamp(q(k), coordinates_[i].lower, coordinates_[i].upper);
      any = any || c != q(k);
      out(k) = c;
    }
    if (changed) *changed = any;
    return out;
  }

  void validate() const {
    if (segments_.empty() || segments_.front().parent != -1) {
      throw Error(ErrorCode::invalid_argument, "kin", "model needs a single root segment first");
    }
    for (std::size_t i = 1; i < segments_.size(); ++i) {
      if (segments_[i].parent < 0 || segments_[i].parent >= static_cast<int>(i)) {
        throw Error(ErrorCode::invalid_argument, "kin", "segment " + segments_[i].name + " breaks the tree order");
      }
    }
    for (const auto& s : segments_) {
      if (s.joint == JointType::ball) {
        const Mat3 b = axes_basis(s);
        if ((b.transpose() * b - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || b.determinant() < 0.0) {
          throw Error(ErrorCode::invalid_argument, "kin", "ball joint " + s.name + " needs right-handed orthonormal axes");
        }
      }
      for (const auto& a : s.axes) {
        if (std::abs(a.norm() - 1.0) > 1e-9) {
          throw Error(ErrorCode::invalid_argument, "kin", "segment " + s.name + " has a non-unit axis");
        }
      }
    }
    for (const auto& c : coordinates_) {
      if (!(c.lower <= c.upper)) throw Error(ErrorCode::invalid_argument, "kin", "coordinate " + c.name + " has empty bounds");
    }
    for (const auto& m : markers_) {
      if (m.segment < 0 || m.segment >= static_cast<int>(segments_.size())) {
        throw Error(ErrorCode::invalid_argument, "kin", "marker " + m.name + " references a missing segment");
      }
    }
    for (const auto& a : angles_) {
      if (!coordinate_index(a.coordinate)) {
        throw Error(ErrorCode::invalid_argument, "kin", "angle " + a.name + " references unknown coordinate " + a.coordinate);
      }
    }
  }

  static Mat3 axes_basis(const Segment& s) {
    Mat3 b = Mat3::Identity();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, s.axes.size()); ++i) b.col(static_cast<Eigen::Index>(i)) = s.axes[i];
    return b;
  }

 private:
  void rebuild_ancestry() {
    const std::size_t n = segments_.size();
    ancestry_.assign(n, std::vector<bool>(n, false));
    neutral_origins_.assign(n, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      ancestry_[i][i] = true;
      const int p = segments_[i].parent;
      if (p >= 0) {
        for (std::size_t a = 0; a < n; ++a) {
          if (ancestry_[static_cast<std::size_t>(p)][a]) ancestry_[i][a] = true;
        }
        neutral_origins_[i] = neutral_origins_[static_cast<std::size_t>(p)] + segments_[i].origin;
      } else {
        neutral_origins_[i] = segments_[i].origin;
      }
    }
  }

  std::vector<Segment> segments_;
  std::vector<Coordinate> coordinates_;
  std::vector<VirtualMarker> markers_;
  std::vector<AngleDefinition> angles_;
  std::vector<std::vector<bool>> ancestry_;
  std::vector<Vec3> neutral_origins_;
};

// ---------------------------------------------------------------------------
// Forward kinematics

struct CoordinateAxis {
  Vec3 direction = Vec3::Zero();  // world
  Vec3 pivot = Vec3::Zero();      // world, rotational coordinates only
  bool rotational = true;
  std::size_t segment = 0;
};

struct SkeletonPose {
  std::vector<SegmentPose> segments;
  std::vector<CoordinateAxis> axes;  // one per coordinate
};

inline Mat3 axis_rotation(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis).toRotationMatrix(); }

/// Poses every segment root-to-leaf. q is clamped to the coordinate bounds.
inline SkeletonPose pose_segments(const SkeletonModel& model, const Eigen::VectorXd& q_in) {
  const Eigen::VectorXd q = model.clamped(q_in);
  SkeletonPose pose;
  pose.segments.resize(model.segments().size());
  pose.axes.resize(model.dof());
  for (std::size_t i = 0; i < model.segments().size(); ++i) {
    const Segment& s = model.segments()[i];
    const SegmentPose parent = s.parent >= 0 ? pose.segments[static_cast<std::size_t>(s.parent)] : SegmentPose{};
    SegmentPose& out = pose.segments[i];
    out.position = parent.position + parent.rotation * s.origin;
    Mat3 frame = parent.rotation;
    std::size_t k = s.first_coordinate;
    if (s.joint == JointType::free) {
      for (int t = 0; t < 3; ++t, ++k) {
        const Vec3 dir = parent.rotation.col(t);
        out.position += dir * q(static_cast<Eigen::Index>(k));
        pose.axes[k] = {dir, Vec3::Zero(), false, i};
      }
    }
    for (const Vec3& axis : s.axes) {
      const Vec3 world_axis = frame * axis;
      pose.axes[k] = {world_axis, out.position, true, i};
      frame = frame * axis_rotation(axis, q(static_cast<Eigen::Index>(k)));
      ++k;
    }
    out.rotation = frame;
  }
  return pose;
}

inline std::vector<Vec3> marker_positions(const SkeletonModel& model, const SkeletonPose& pose) {
  std::vector<Vec3> out;
  out.reserve(model.markers().size());
  for (const auto& m : model.markers()) {
    const auto& sp = pose.segments[static_cast<std::size_t>(m.segment)];
    out.push_back(sp.position + sp.rotation * m.local);
  }
  return out;
}

/// World position of every virtual marker, in model marker order.
inline std::vector<Vec3> forward_kinematics(const SkeletonModel& model, const Eigen::VectorXd& q) {
  return marker_positions(model, pose_segments(model, q));
}

inline std::map<std::string, Vec3> forward_kinematics_named(const SkeletonModel& model, const Eigen::VectorXd& q) {
  const auto pos = forward_kinematics(model, q);
  std::map<std::string, Vec3> out;
  for (std::size_t i = 0; i < pos.size(); ++i) out.emplace(model.markers()[i].name, pos[i]);
  return out;
}

/// d(marker)/dq from the joint screw axes: ω × (x - pivot) for rotations and
/// the axis itself for translations. Rows are 3 per marker.
inline Eigen::MatrixXd marker_jacobian(const SkeletonModel& model, const Eigen::VectorXd& q) {
  const SkeletonPose pose = pose_segments(model, q);
  const auto pos = marker_positions(model, pose);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * pos.size()), static_cast<Eigen::Index>(model.dof()));
  for (std::size_t m = 0; m < pos.size(); ++m) {
    const auto seg = static_cast<std::size_t>(model.markers()[m].segment);
    for (std::size_t k = 0; k < model.dof(); ++k) {
      const auto& ax = pose.axes[k];
      if (!model.moves_with(ax.segment, seg)) continue;
      const Vec3 d = ax.rotational ? Vec3(ax.direction.cross(pos[m] - ax.pivot)) : ax.direction;
      jac.block<3, 1>(static_cast<Eigen::Index>(3 * m), static_cast<Eigen::Index>(k)) = d;
    }
  }
  return jac;
}

/// Central-difference counterpart of marker_jacobian(). Perturbations that
/// would leave the bounds fall back to one-sided differences.
inline Eigen::MatrixXd marker_jacobian_numeric(const SkeletonModel& model, const Eigen::VectorXd& q, double step = 1e-6) {
  const auto n = static_cast<Eigen::Index>(model.dof());
  const auto m = static_cast<Eigen::Index>(3 * model.markers().size());
  Eigen::MatrixXd jac(m, n);
  auto flat = [&](const Eigen::VectorXd& qq) {
    const auto p = forward_kinematics(model, qq);
    Eigen::VectorXd v(m);
    for (std::size_t i = 0; i < p.size(); ++i) v.segment<3>(static_cast<Eigen::Index>(3 * i)) = p[i];
    return v;
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& c = model.coordinates()[static_cast<std::size_t>(k)];
    Eigen::VectorXd hi = q, lo = q;
    hi(k) = std::min(q(k) + step, c.upper);
    lo(k) = std::max(q(k) - step, c.lower);
    jac.col(k) = (flat(hi) - flat(lo)) / (hi(k) - lo(k));
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Inverse kinematics

struct IkWeights {
  std::map<std::string, double> w;
  double default_weight = 1.0;

  double of(const std::string& marker) const {
    const auto it = w.find(marker);
    return it == w.end() ? default_weight : it->second;
  }
};

/// Observed position per model marker (model order); nullopt marks a gap.
using MarkerObservation = std::vector<std::optional<Vec3>>;

enum class JacobianMode { analytic, central_difference };

struct IkOptions {
  double lambda0 = 1e-3;
  double step_tolerance = 1e-8;
  int max_iterations = 100;
  JacobianMode jacobian = JacobianMode::analytic;
  bool initialize_from_markers = true;  // per-segment rigid fit before iterating
  bool record_objective = false;
};

struct IkResult {
  Eigen::VectorXd q;
  double residual = 0.0;  // RMS weighted marker error, metres
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // per iteration when requested
};

namespace detail {

// Least-squares rotation taking `from` onto `to` (both centred), det = +1.
inline Mat3 kabsch(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h += from[i] * to[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

// Coordinates of a joint whose relative rotation is `rel`.
inline void joint_coordinates_from_rotation(const SkeletonModel& model, const Segment& s, const Mat3& rel,
                                            Eigen::VectorXd& q) {
  auto k = static_cast<Eigen::Index>(s.first_coordinate + (s.joint == JointType::free ? 3 : 0));
  if (s.joint == JointType::hinge) {
    const Vec3& a = s.axes[0];
    Vec3 u = a.unitOrthogonal();
    const Vec3 v = rel * u;
    q(k) = std::atan2(a.dot(u.cross(v)), u.dot(v));
    return;
  }
  if (s.axes.size() != 3) return;
  const Mat3 b = SkeletonModel::axes_basis(s);
  const Mat3 m = b.transpose() * rel * b;  // = Rx(a) Ry(b) Rz(c)
  const double b0 = std::asin(std::clamp(m(0, 2), -1.0, 1.0));
  const Vec3 first{std::atan2(-m(1, 2), m(2, 2)), b0, std::atan2(-m(0, 1), m(0, 0))};
  // The same rotation with the middle angle reflected through 90 degrees.
  auto wrap = [](double x) { return std::remainder(x, 2.0 * kPi); };
  const Vec3 second{wrap(first(0) + kPi), wrap(kPi - b0), wrap(first(2) + kPi)};
  auto violation = [&](const Vec3& v) {
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto& c = model.coordinates()[static_cast<std::size_t>(k + i)];
      total += std::max(0.0, c.lower - v(i)) + std::max(0.0, v(i) - c.upper);
    }
    return total;
  };
  const Vec3& pick = violation(second) < violation(first) ? second : first;
  for (int i = 0; i < 3; ++i) q(k + i) = pick(i);
}

}  // namespace detail

/// Per-segment rigid fits of the observed markers, converted into joint
/// coordinates. Segments with fewer than three usable markers keep `q`.
inline Eigen::VectorXd initialize_from_markers(const SkeletonModel& model, const IkWeights& weights,
                                               const MarkerObservation& observed, Eigen::VectorXd q) {
  const std::size_t ns = model.segments().size();
  std::vector<std::optional<SegmentPose>> fitted(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    std::vector<Vec3> local, world;
    for (std::size_t m = 0; m < model.markers().size(); ++m) {
      const auto& vm = model.markers()[m];
      if (static_cast<std::size_t>(vm.segment) != s || !observed[m] || weights.of(vm.name) <= 0.0) continue;
      local.push_back(vm.local);
      world.push_back(*observed[m]);
    }
    if (local.size() < 3) continue;
    Vec3 cl = Vec3::Zero(), cw = Vec3::Zero();
    for (std::size_t i = 0; i < local.size(); ++i) {
      cl += local[i];
      cw += world[i];
    }
    cl /= static_cast<double>(local.size());
    cw /= static_cast<double>(local.size());
    double spread = 0.0;
    for (auto& p : local) {
      p -= cl;
      spread = std::max(spread, p.norm());
    }
    for (auto& p : world) p -= cw;
    // Collinear marker sets leave the rotation about their line undetermined.
    Eigen::MatrixXd lm(3, static_cast<Eigen::Index>(local.size()));
    for (std::size_t i = 0; i < local.size(); ++i) lm.col(static_cast<Eigen::Index>(i)) = local[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lm);
    if (svd.singularValues()(1) < 1e-6 * std::max(spread, 1e-12)) continue;
    SegmentPose pose;
    pose.rotation = detail::kabsch(local, world);
    pose.position = cw - pose.rotation * cl;
    fitted[s] = pose;
  }

  // Walk the tree, converting relative rotations into joint coordinates.
  for (std::size_t s = 0; s < ns; ++s) {
    if (!fitted[s]) continue;
    const Segment& seg = model.segments()[s];
    if (seg.joint == JointType::weld) continue;
    const SkeletonPose current = pose_segments(model, q);
    const Mat3 parent_rot =
        seg.parent >= 0 ? (fitted[static_cast<std::size_t>(seg.parent)] ? fitted[static_cast<std::size_t>(seg.parent)]->rotation
                                                                         : current.segments[static_cast<std::size_t>(seg.parent)].rotation)
                        : Mat3::Identity();
    detail::joint_coordinates_from_rotation(model, seg, parent_rot.transpose() * fitted[s]->rotation, q);
    if (seg.joint == JointType::free) {
      const Vec3 base = seg.parent >= 0 ? current.segments[static_cast<std::size_t>(seg.parent)].position : Vec3::Zero();
      const Vec3 t = fitted[s]->position - base - seg.origin;
      for (int i = 0; i < 3; ++i) q(static_cast<Eigen::Index>(seg.first_coordinate) + i) = t(i);
    }
  }
  return model.clamped(q);
}

/// Minimises Σ w_i ||x_i^exp - x_i(q)||² over the non-gap markers with damped
/// Gauss-Newton steps. A step is kept only when it lowers the objective, so
/// the objective never increases between iterations.
inline IkResult solve_frame(const SkeletonModel& model, const IkWeights& weights, const MarkerObservation& observed,
                            const Eigen::VectorXd& q_init, const IkOptions& options = {}) {
  if (observed.size() != model.markers().size()) {
    throw Error(ErrorCode::invalid_argument, "kin", "observation count does not match the model's markers");
  }
  std::vector<std::size_t> active;
  std::vector<double> w;
  for (std::size_t m = 0; m < observed.size(); ++m) {
    const double wm = weights.of(model.markers()[m].name);
    if (wm < 0.0) throw Error(ErrorCode::invalid_argument, "kin", "negative weight for " + model.markers()[m].name);
    if (observed[m] && wm > 0.0) {
      active.push_back(m);
      w.push_back(wm);
    }
  }
  {
    // Observability: three weighted markers that are not collinear.
    bool ok = false;
    if (active.size() >= 3) {
      const Vec3& a = *observed[active[0]];
      for (std::size_t i = 1; i < active.size() && !ok; ++i) {
        for (std::size_t j = i + 1; j < active.size() && !ok; ++j) {
          ok = (*observed[active[i]] - a).cross(*observed[active[j]] - a).norm() > 1e-9;
        }
      }
    }
    if (!ok) {
      throw Error(ErrorCode::unobservable, "kin",
                  fmt::format("{} usable markers; need 3 non-collinear weighted markers", active.size()));
    }
  }

  const auto na = static_cast<Eigen::Index>(active.size());
  auto residuals = [&](const Eigen::VectorXd& qq) {
    const auto pos = forward_kinematics(model, qq);
    Eigen::VectorXd r(3 * na);
    for (Eigen::Index i = 0; i < na; ++i) {
      const auto m = active[static_cast<std::size_t>(i)];
      r.segment<3>(3 * i) = std::sqrt(w[static_cast<std::size_t>(i)]) * (pos[m] - *observed[m]);
    }
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& qq) {
    const Eigen::MatrixXd full = options.jacobian == JacobianMode::analytic ? marker_jacobian(model, qq)
                                                                            : marker_jacobian_numeric(model, qq);
    Eigen::MatrixXd j(3 * na, full.cols());
    for (Eigen::Index i = 0; i < na; ++i) {
      j.middleRows<3>(3 * i) =
          std::sqrt(w[static_cast<std::size_t>(i)]) * full.middleRows<3>(static_cast<Eigen::Index>(3 * active[static_cast<std::size_t>(i)]));
    }
    return j;
  };

  IkResult result;
  result.q = model.clamped(q_init);
  if (options.initialize_from_markers) result.q = initialize_from_markers(model, weights, observed, result.q);
  Eigen::VectorXd r = residuals(result.q);
  double cost = r.squaredNorm();
  if (options.record_objective) result.objective_trace.push_back(cost);

  double lambda = options.lambda0;
  const auto n = static_cast<Eigen::Index>(model.dof());
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    const Eigen::MatrixXd j = jacobian(result.q);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    bool accepted = false;
    Eigen::VectorXd step;
    while (lambda < 1e12) {
      const Eigen::MatrixXd damped = jtj + lambda * Eigen::MatrixXd::Identity(n, n);
      step = -damped.ldlt().solve(g);
      const Eigen::VectorXd candidate = model.clamped(result.q + step);
      const Eigen::VectorXd rc = residuals(candidate);
      const double cc = rc.squaredNorm();
      if (cc <= cost) {
        step = candidate - result.q;
        result.q = candidate;
        r = rc;
        cost = cc;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (options.record_objective) result.objective_trace.push_back(cost);
    if (!accepted || step.norm() < options.step_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.objective = cost;
  double wsum = 0.0;
  for (double wi : w) wsum += wi;
  result.residual = std::sqrt(cost / wsum);
  return result;
}

/// Named angles in degrees.
inline std::vector<double> joint_angles(const Eigen::VectorXd& q, const SkeletonModel& model) {
  std::vector<double> out;
  out.reserve(model.angles().size());
  for (const auto& a : model.angles()) {
    const auto k = model.coordinate_index(a.coordinate);
    out.push_back(k ? deg(a.sign * q(static_cast<Eigen::Index>(*k))) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

struct JointAngleSeries {
  std::vector<std::string> names;
  std::vector<int> frames;
  double rate = 30.0;
  std::vector<std::vector<double>> values;  // [frame][angle], degrees
  std::vector<double> residual;             // metres
  std::vector<bool> converged;
  std::vector<Eigen::VectorXd> q;

  std::size_t column(const std::string& angle) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == angle) return i;
    }
    throw Error(ErrorCode::invalid_argument, "kin", "no angle named " + angle);
  }
};

/// Observations of the model's markers at sample `i`, matched by name.
inline MarkerObservation observation_at(const SkeletonModel& model, const TrajectorySet& trajectories, std::size_t i) {
  MarkerObservation obs(model.markers().size());
  for (const auto& t : trajectories) {
    const auto m = model.marker_index(t.marker_id);
    if (!m || i >= t.size() || t.gaps[i] || !t.positions[i].allFinite()) continue;
    obs[*m] = t.positions[i];
  }
  return obs;
}

/// Frame 0 starts from the neutral pose, later frames from the previous
/// solution. Frames that fail to converge keep their best iterate and are
/// flagged.
inline JointAngleSeries solve_sequence(const SkeletonModel& model, const IkWeights& weights,
                                       const TrajectorySet& trajectories, const IkOptions& options = {}) {
  model.validate();
  JointAngleSeries series;
  for (const auto& a : model.angles()) series.names.push_back(a.name);
  if (trajectories.empty()) throw Error(ErrorCode::empty_sequence, "kin", "no marker trajectories");
  const auto& ref = trajectories.front();
  series.frames = ref.frames;
  series.rate = ref.rate;
  for (const auto& t : trajectories) {
    if (t.size() != ref.size()) throw Error(ErrorCode::invalid_argument, "kin", "trajectories differ in length");
  }

  Eigen::VectorXd q = model.neutral();
  for (std::size_t i = 0; i < ref.size(); ++i) {
    IkOptions opt = options;
    opt.initialize_from_markers = (i == 0) && options.initialize_from_markers;
    const IkResult r = solve_frame(model, weights, observation_at(model, trajectories, i), q, opt);
    q = r.q;
    series.values.push_back(joint_angles(q, model));
    series.residual.push_back(r.residual);
    series.converged.push_back(r.converged);
    series.q.push_back(q);
  }
  return series;
}

}  // namespace mocap
