#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "mocap/anthro.hpp"
#include "mocap/augment.hpp"
#include "mocap/calib.hpp"
#include "mocap/filt.hpp"
#include "mocap/kin.hpp"
#include "mocap/rig.hpp"
#include "mocap/triang.hpp"

namespace mocap::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Plumbing

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "io", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "io", "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "io", "short write to " + path.string());
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::malformed_document, "io", fmt::format("{} at byte {}: {}", origin, e.byte, e.what()));
  }
}

inline json read_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

inline void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

// Access helpers that turn schema mismatches into MalformedDocument.
template <typename T>
T get(const json& j, const char* key, const std::string& origin) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_document, "io", fmt::format("{}: field '{}': {}", origin, key, e.what()));
  }
}

inline void check_schema(const json& doc, const std::string& origin) {
  const int v = get<int>(doc, "schema_version", origin);
  if (v != kSchemaVersion) {
    throw Error(ErrorCode::malformed_document, "io", fmt::format("{}: unsupported schema_version {}", origin, v));
  }
}

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 json_vec(const json& j, const std::string& origin) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::malformed_document, "io", origin + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/// 64-bit FNV-1a, used to fingerprint configurations and artifacts.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

// ---------------------------------------------------------------------------
// Calibration

inline json calibration_json(const std::vector<CameraModel>& rig) {
  json cams = json::array();
  for (const auto& c : rig) {
    json k = json::array(), r = json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        k.push_back(c.intrinsics(i, j));
        r.push_back(c.rotation(i, j));
      }
    }
    cams.push_back({{"id", c.id},
                    {"image_size", {c.image_width, c.image_height}},
                    {"K", k},
                    {"R", r},
                    {"K0", vec_json(c.center)},
                    {"distortion", c.distortion.coefficients}});
  }
  return {{"schema_version", kSchemaVersion}, {"cameras", cams}};
}

inline std::vector<CameraModel> calibration_from_json(const json& doc, const std::string& origin) {
  check_schema(doc, origin);
  std::vector<CameraModel> rig;
  for (const auto& c : get<json>(doc, "cameras", origin)) {
    CameraModel cam;
    cam.id = get<std::string>(c, "id", origin);
    const auto size = get<std::vector<int>>(c, "image_size", origin);
    const auto k = get<std::vector<double>>(c, "K", origin);
    const auto r = get<std::vector<double>>(c, "R", origin);
    if (size.size() != 2 || k.size() != 9 || r.size() != 9) {
      throw Error(ErrorCode::malformed_document, "io", origin + ": camera " + cam.id + " has malformed matrices");
    }
    cam.image_width = size[0];
    cam.image_height = size[1];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        cam.intrinsics(i, j) = k[static_cast<std::size_t>(3 * i + j)];
        cam.rotation(i, j) = r[static_cast<std::size_t>(3 * i + j)];
      }
    }
    cam.center = json_vec(get<json>(c, "K0", origin), origin);
    if (c.contains("distortion")) cam.distortion.coefficients = get<std::vector<double>>(c, "distortion", origin);
    cam.validate();
    rig.push_back(std::move(cam));
  }
  return rig;
}

inline void write_calibration(const fs::path& path, const std::vector<CameraModel>& rig) {
  write_json(path, calibration_json(rig));
}

inline std::vector<CameraModel> read_calibration(const fs::path& path) {
  return calibration_from_json(read_json(path), path.string());
}

// ---------------------------------------------------------------------------
// Correspondences: one "x y z u v" row per point, '#' starts a comment.

inline std::string correspondences_text(const CorrespondenceSet& set) {
  std::string out = "# x y z (world, metres) u v (pixels)\n";
  for (const auto& c : set.pairs) {
    out += fmt::format("{} {} {} {} {}\n", c.world.x(), c.world.y(), c.world.z(), c.pixel.uv.x(), c.pixel.uv.y());
  }
  return out;
}

inline CorrespondenceSet parse_correspondences(const std::string& text, const std::string& origin) {
  CorrespondenceSet set;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::vector<double> v;
    double x = 0.0;
    while (row >> x) v.push_back(x);
    if (!row.eof()) throw Error(ErrorCode::malformed_document, "io", fmt::format("{}:{}: not a number", origin, lineno));
    if (v.empty()) continue;
    if (v.size() != 5) {
      throw Error(ErrorCode::malformed_document, "io", fmt::format("{}:{}: expected 5 values, got {}", origin, lineno, v.size()));
    }
    set.pairs.push_back({Vec3(v[0], v[1], v[2]), PixelPoint{Vec2(v[3], v[4]), 1.0}});
  }
  return set;
}

inline CorrespondenceSet read_correspondences(const fs::path& path) {
  return parse_correspondences(read_text(path), path.string());
}

inline void write_correspondences(const fs::path& path, const CorrespondenceSet& set) {
  write_text(path, correspondences_text(set));
}

// ---------------------------------------------------------------------------
// Keypoints: one OpenPose-style document per camera and frame, named
// {camera}_{frame:06d}.json. The first person's pose_keypoints_2d holds 25
// (x, y, confidence) triples; a document without people is an empty frame.

inline std::string keypoint_filename(const std::string& camera, int frame) {
  return fmt::format("{}_{:06d}.json", camera, frame);
}

inline json keypoints_json(const KeypointFrame& frame) {
  json people = json::array();
  if (!frame.landmarks.empty()) {
    json flat = json::array();
    for (const auto& p : frame.landmarks) {
      flat.push_back(p.uv.x());
      flat.push_back(p.uv.y());
      flat.push_back(p.confidence);
    }
    people.push_back({{"person_id", {-1}}, {"pose_keypoints_2d", flat}});
  }
  return {{"schema_version", kSchemaVersion}, {"version", 1.3}, {"people", people}};
}

inline KeypointFrame keypoints_from_json(const json& doc, const std::string& camera, int frame, const std::string& origin) {
  KeypointFrame kf{camera, frame, {}};
  const auto people = get<json>(doc, "people", origin);
  if (!people.is_array()) throw Error(ErrorCode::malformed_document, "io", origin + ": 'people' is not an array");
  if (people.empty()) return kf;
  const auto flat = get<std::vector<double>>(people[0], "pose_keypoints_2d", origin);
  if (flat.size() != 3 * body25b::kCount) {
    throw Error(ErrorCode::inconsistent_landmark_count, "io",
                fmt::format("{}: {} values, expected {} (25 x, y, c triples)", origin, flat.size(), 3 * body25b::kCount));
  }
  for (std::size_t i = 0; i < body25b::kCount; ++i) {
    kf.landmarks.push_back({Vec2(flat[3 * i], flat[3 * i + 1]), flat[3 * i + 2]});
  }
  return kf;
}

inline void write_keypoints(const fs::path& dir, const std::vector<CameraStream>& streams) {
  fs::create_directories(dir);
  for (const auto& s : streams) {
    for (const auto& f : s.frames) {
      write_text(dir / keypoint_filename(s.camera_id, f.frame_index), keypoints_json(f).dump() + "\n");
    }
  }
}

/// Every {camera}_{frame}.json under `dir`, grouped by camera (sorted by id)
/// and ordered by frame. All streams cover the same frame range; frames a
/// camera has no file for are empty.
inline std::vector<CameraStream> read_keypoints(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "io", "keypoint directory " + dir.string() + " does not exist");
  static const std::regex pattern(R"(^(.+)_(\d{6})(?:_keypoints)?\.json$)");
  std::map<std::string, std::map<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) continue;
    files[m[1].str()][std::stoi(m[2].str())] = entry.path();
  }
  if (files.empty()) throw Error(ErrorCode::io, "io", "no keypoint files in " + dir.string());
  int first = std::numeric_limits<int>::max(), last = std::numeric_limits<int>::min();
  for (const auto& [cam, frames] : files) {
    first = std::min(first, frames.begin()->first);
    last = std::max(last, frames.rbegin()->first);
  }
  std::vector<CameraStream> streams;
  for (const auto& [cam, frames] : files) {
    CameraStream s{cam, {}};
    for (int f = first; f <= last; ++f) {
      const auto it = frames.find(f);
      if (it == frames.end()) {
        s.frames.push_back({cam, f, {}});
        continue;
      }
      const std::string origin = it->second.string();
      s.frames.push_back(keypoints_from_json(read_json(it->second), cam, f, origin));
    }
    streams.push_back(std::move(s));
  }
  return streams;
}

// ---------------------------------------------------------------------------
// TRC marker trajectories

enum class TrcUnits { m, mm };

struct TrcDocument {
  double data_rate = 30.0;
  double camera_rate = 30.0;
  TrcUnits units = TrcUnits::m;
  TrajectorySet trajectories;  // always in metres
};

inline void check_uniform(const TrajectorySet& trajs) {
  if (trajs.empty()) throw Error(ErrorCode::ragged_trajectories, "io", "no trajectories to write");
  for (const auto& t : trajs) {
    if (t.frames != trajs.front().frames || t.positions.size() != t.frames.size()) {
      throw Error(ErrorCode::ragged_trajectories, "io", "trajectory " + t.marker_id + " covers different frames");
    }
  }
}

/// Tab-separated TRC. Frame numbers run from 1; gap samples are written as
/// empty cells.
inline std::string trc_text(const TrajectorySet& trajs, const std::string& filename = "markers.trc",
                            TrcUnits units = TrcUnits::m) {
  check_uniform(trajs);
  const double rate = trajs.front().rate;
  const std::size_t n = trajs.front().size();
  const double scale = units == TrcUnits::mm ? 1000.0 : 1.0;
  const char* unit = units == TrcUnits::mm ? "mm" : "m";
  std::string out;
  out += fmt::format("PathFileType\t4\t(X/Y/Z)\t{}\n", filename);
  out += "DataRate\tCameraRate\tNumFrames\tNumMarkers\tUnits\tOrigDataRate\tOrigDataStartFrame\tOrigNumFrames\n";
  out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", rate, rate, n, trajs.size(), unit, rate, 1, n);
  out += "Frame#\tTime";
  for (const auto& t : trajs) out += fmt::format("\t{}\t\t", t.marker_id);
  out += "\n\t";
  for (std::size_t m = 0; m < trajs.size(); ++m) out += fmt::format("\tX{0}\tY{0}\tZ{0}", m + 1);
  out += "\n\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += fmt::format("{}\t{:.10g}", i + 1, trajs.front().frames[i] / rate);
    for (const auto& t : trajs) {
      const Vec3& p = t.positions[i];
      if ((!t.gaps.empty() && t.gaps[i]) || !p.allFinite()) {
        out += "\t\t\t";
      } else {
        out += fmt::format("\t{:.10g}\t{:.10g}\t{:.10g}", p.x() * scale, p.y() * scale, p.z() * scale);
      }
    }
    out += "\n";
  }
  return out;
}

inline void write_trc(const fs::path& path, const TrajectorySet& trajs, TrcUnits units = TrcUnits::m) {
  write_text(path, trc_text(trajs, path.filename().string(), units));
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == '\t') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::malformed_document, "io", where + ": '" + s + "' is not a number");
  }
}

}  // namespace detail

inline TrcDocument parse_trc(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  if (lines.size() < 5) throw Error(ErrorCode::malformed_document, "io", origin + ": truncated TRC header");
  const auto meta = detail::split_tabs(lines[2]);
  if (meta.size() < 5) throw Error(ErrorCode::malformed_document, "io", origin + ": malformed TRC header line 3");
  TrcDocument doc;
  doc.data_rate = detail::parse_double(meta[0], origin + ":3");
  doc.camera_rate = detail::parse_double(meta[1], origin + ":3");
  const auto frames = static_cast<std::size_t>(detail::parse_double(meta[2], origin + ":3"));
  const auto markers = static_cast<std::size_t>(detail::parse_double(meta[3], origin + ":3"));
  if (meta[4] == "mm") {
    doc.units = TrcUnits::mm;
  } else if (meta[4] != "m") {
    throw Error(ErrorCode::malformed_document, "io", origin + ": units must be m or mm, got '" + meta[4] + "'");
  }
  const double scale = doc.units == TrcUnits::mm ? 1e-3 : 1.0;
  const auto names = detail::split_tabs(lines[3]);
  std::vector<std::string> marker_names;
  for (std::size_t i = 2; i < names.size(); i += 3) {
    if (!names[i].empty()) marker_names.push_back(names[i]);
  }
  if (marker_names.size() != markers) {
    throw Error(ErrorCode::malformed_document, "io",
                fmt::format("{}: header declares {} markers, name row has {}", origin, markers, marker_names.size()));
  }
  doc.trajectories = make_trajectories(marker_names, {}, doc.data_rate);
  std::size_t row = 0;
  for (std::size_t li = 5; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li] == "\r") continue;
    const std::string where = fmt::format("{}:{}", origin, li + 1);
    const auto cells = detail::split_tabs(lines[li]);
    if (cells.size() < 2 + 3 * markers) {
      throw Error(ErrorCode::malformed_document, "io",
                  fmt::format("{}: {} columns, expected {}", where, cells.size(), 2 + 3 * markers));
    }
    const auto frame_no = static_cast<std::size_t>(detail::parse_double(cells[0], where));
    if (frame_no != row + 1) throw Error(ErrorCode::malformed_document, "io", where + ": frame numbers must run from 1");
    const double time = detail::parse_double(cells[1], where);
    const int frame = static_cast<int>(std::llround(time * doc.data_rate));
    for (std::size_t m = 0; m < markers; ++m) {
      auto& t = doc.trajectories[m];
      t.frames.push_back(frame);
      const auto& cx = cells[2 + 3 * m];
      if (cx.empty()) {
        t.positions.push_back(Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
        t.gaps.push_back(true);
        continue;
      }
      t.positions.push_back(scale * Vec3(detail::parse_double(cx, where), detail::parse_double(cells[3 + 3 * m], where),
                                         detail::parse_double(cells[4 + 3 * m], where)));
      t.gaps.push_back(false);
    }
    ++row;
  }
  if (row != frames) {
    throw Error(ErrorCode::malformed_document, "io", fmt::format("{}: header declares {} frames, found {}", origin, frames, row));
  }
  return doc;
}

inline TrcDocument read_trc(const fs::path& path) { return parse_trc(read_text(path), path.string()); }

// ---------------------------------------------------------------------------
// Marker template

inline json landmark_names(const std::vector<int>& ids) {
  json out = json::array();
  for (int id : ids) out.push_back(std::string(body25b::kNames[static_cast<std::size_t>(id)]));
  return out;
}

inline std::vector<int> landmark_ids(const json& names, const std::string& origin) {
  std::vector<int> out;
  for (const auto& n : names) {
    const auto id = body25b::index_of(n.get<std::string>());
    if (!id) throw Error(ErrorCode::malformed_document, "io", origin + ": unknown landmark " + n.dump());
    out.push_back(*id);
  }
  return out;
}

inline json template_json(const MarkerSetTemplate& t) {
  json markers = json::array(), frames = json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    markers.push_back({{"name", t.names[i]}, {"segment", t.segment_of[i]}, {"offset", vec_json(t.local_offset[i])}});
  }
  for (const auto& f : t.frames) {
    json j = {{"segment", f.segment},
              {"origin", landmark_names(f.origin)},
              {"distal", landmark_names(f.distal)},
              {"width_from", landmark_names(f.width_from)},
              {"width_to", landmark_names(f.width_to)},
              {"width_from_cross", f.width_from_cross}};
    j["cross_tip"] = f.cross_tip >= 0 ? json(std::string(body25b::kNames[static_cast<std::size_t>(f.cross_tip)])) : json(nullptr);
    frames.push_back(j);
  }
  return {{"schema_version", kSchemaVersion}, {"units", "m"}, {"markers", markers}, {"segment_frames", frames}};
}

inline MarkerSetTemplate template_from_json(const json& doc, const std::string& origin) {
  check_schema(doc, origin);
  MarkerSetTemplate t;
  for (const auto& m : get<json>(doc, "markers", origin)) {
    t.add(get<std::string>(m, "name", origin), get<std::string>(m, "segment", origin), json_vec(get<json>(m, "offset", origin), origin));
  }
  if (doc.contains("segment_frames")) {
    t.frames.clear();
    for (const auto& f : doc["segment_frames"]) {
      SegmentFrameDef d;
      d.segment = get<std::string>(f, "segment", origin);
      d.origin = landmark_ids(get<json>(f, "origin", origin), origin);
      d.distal = landmark_ids(get<json>(f, "distal", origin), origin);
      d.width_from = landmark_ids(get<json>(f, "width_from", origin), origin);
      d.width_to = landmark_ids(get<json>(f, "width_to", origin), origin);
      d.width_from_cross = get<bool>(f, "width_from_cross", origin);
      if (f.contains("cross_tip") && !f["cross_tip"].is_null()) d.cross_tip = landmark_ids(json::array({f["cross_tip"]}), origin)[0];
      t.frames.push_back(d);
    }
  }
  t.validate();
  return t;
}

inline void write_template(const fs::path& path, const MarkerSetTemplate& t) { write_json(path, template_json(t)); }
inline MarkerSetTemplate read_template(const fs::path& path) { return template_from_json(read_json(path), path.string()); }

// ---------------------------------------------------------------------------
// Skeleton model

inline json model_json(const SkeletonModel& m) {
  json segs = json::array(), markers = json::array(), angles = json::array();
  const Eigen::VectorXd q0 = m.neutral();
  const auto neutral = forward_kinematics(m, q0);
  for (const auto& s : m.segments()) {
    json axes = json::array(), coords = json::array();
    for (const auto& a : s.axes) axes.push_back(vec_json(a));
    for (std::size_t k = 0; k < s.coordinate_count(); ++k) {
      const auto& c = m.coordinates()[s.first_coordinate + k];
      coords.push_back({{"name", c.name}, {"lower", c.lower}, {"upper", c.upper}, {"rotational", c.rotational}});
    }
    segs.push_back({{"name", s.name},
                    {"parent", s.parent >= 0 ? json(m.segments()[static_cast<std::size_t>(s.parent)].name) : json(nullptr)},
                    {"origin", vec_json(s.origin)},
                    {"joint", to_string(s.joint)},
                    {"axes", axes},
                    {"coordinates", coords}});
  }
  for (std::size_t i = 0; i < m.markers().size(); ++i) {
    const auto& vm = m.markers()[i];
    markers.push_back({{"name", vm.name},
                       {"segment", m.segments()[static_cast<std::size_t>(vm.segment)].name},
                       {"neutral", vec_json(neutral[i])}});
  }
  for (const auto& a : m.angles()) angles.push_back({{"name", a.name}, {"coordinate", a.coordinate}, {"sign", a.sign}});
  return {{"schema_version", kSchemaVersion},
          {"name", m.name},
          {"conventions",
           "Z-up world, subject faces +x, y to the left. Segment frames equal the world axes at q = 0. Rotational axes "
           "are applied intrinsically in the listed order and expressed in the parent frame. Flexion is positive; "
           "rotations in radians, translations in metres."},
          {"segments", segs},
          {"markers", markers},
          {"angles", angles}};
}

inline SkeletonModel model_from_json(const json& doc, const std::string& origin) {
  check_schema(doc, origin);
  SkeletonModel m;
  m.name = doc.value("name", std::string("skeleton"));
  for (const auto& s : get<json>(doc, "segments", origin)) {
    Segment seg;
    seg.name = get<std::string>(s, "name", origin);
    seg.parent = s.at("parent").is_null() ? -1 : m.segment_index(s.at("parent").get<std::string>());
    seg.origin = json_vec(get<json>(s, "origin", origin), origin);
    const auto jt = joint_type_from_string(get<std::string>(s, "joint", origin));
    if (!jt) throw Error(ErrorCode::malformed_document, "io", origin + ": unknown joint type in segment " + seg.name);
    seg.joint = *jt;
    for (const auto& a : get<json>(s, "axes", origin)) seg.axes.push_back(json_vec(a, origin));
    std::vector<Coordinate> coords;
    for (const auto& c : get<json>(s, "coordinates", origin)) {
      coords.push_back({get<std::string>(c, "name", origin), get<double>(c, "lower", origin), get<double>(c, "upper", origin),
                        get<bool>(c, "rotational", origin)});
    }
    m.add_segment(std::move(seg), coords);
  }
  for (const auto& mk : get<json>(doc, "markers", origin)) {
    m.add_marker_neutral(get<std::string>(mk, "name", origin), get<std::string>(mk, "segment", origin),
                         json_vec(get<json>(mk, "neutral", origin), origin));
  }
  if (doc.contains("angles")) {
    for (const auto& a : doc["angles"]) {
      m.add_angle({get<std::string>(a, "name", origin), get<std::string>(a, "coordinate", origin), a.value("sign", 1.0)});
    }
  }
  m.validate();
  return m;
}

inline void write_model(const fs::path& path, const SkeletonModel& m) { write_json(path, model_json(m)); }
inline SkeletonModel read_model(const fs::path& path) { return model_from_json(read_json(path), path.string()); }

// ---------------------------------------------------------------------------
// Mesh: indexed triangles ("v x y z", "f a b c", 1-based) plus a landmark
// sidecar document.

inline std::string mesh_text(const BodyMesh& mesh) {
  std::string out = fmt::format("# vertices {} faces {}\n", mesh.vertices.size(), mesh.faces.size());
  for (const auto& v : mesh.vertices) out += fmt::format("v {:.12g} {:.12g} {:.12g}\n", v.x(), v.y(), v.z());
  for (const auto& f : mesh.faces) out += fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  return out;
}

/// Sidecar: landmark vertex ids, per-segment vertex sets and, optionally,
/// the slicing axis of each circumference ("measurement_axes").
inline json sidecar_json(const BodyMesh& mesh, const std::vector<MeasurementDefinition>* defs = nullptr,
                         const std::map<std::string, std::string>& notes = {}) {
  json segs = json::object();
  for (const auto& [name, ids] : mesh.segments) segs[name] = ids;
  json doc = {{"schema_version", kSchemaVersion}, {"landmarks", mesh.landmarks}, {"segments", segs}};
  if (defs) {
    json axes = json::object();
    for (const auto& d : *defs) {
      if (d.method == MeasurementMethod::circumference) axes[d.code] = {d.axis_from, d.axis_to};
    }
    doc["measurement_axes"] = axes;
  }
  if (!notes.empty()) doc["notes"] = notes;
  return doc;
}

/// Default measurement definitions with any axis overrides from a sidecar.
inline std::vector<MeasurementDefinition> measurements_from_sidecar(const fs::path& sidecar_path) {
  auto defs = default_measurements();
  const json side = read_json(sidecar_path);
  if (!side.contains("measurement_axes")) return defs;
  for (auto& d : defs) {
    if (!side["measurement_axes"].contains(d.code)) continue;
    const auto pair = side["measurement_axes"][d.code].get<std::vector<std::string>>();
    if (pair.size() != 2) throw Error(ErrorCode::malformed_document, "io", sidecar_path.string() + ": bad axis for " + d.code);
    d.axis_from = pair[0];
    d.axis_to = pair[1];
  }
  return defs;
}

inline BodyMesh parse_mesh(const std::string& text, const std::string& origin) {
  BodyMesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream row(line);
    std::string tag;
    if (!(row >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(row >> v.x() >> v.y() >> v.z())) {
        throw Error(ErrorCode::malformed_document, "io", fmt::format("{}:{}: bad vertex", origin, lineno));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      Face f{};
      for (int& i : f) {
        std::string tok;
        if (!(row >> tok)) throw Error(ErrorCode::malformed_document, "io", fmt::format("{}:{}: bad face", origin, lineno));
        i = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

inline void write_mesh(const fs::path& mesh_path, const fs::path& sidecar_path, const BodyMesh& mesh,
                       const std::vector<MeasurementDefinition>* defs = nullptr) {
  write_text(mesh_path, mesh_text(mesh));
  write_json(sidecar_path, sidecar_json(mesh, defs));
}

inline BodyMesh read_mesh(const fs::path& mesh_path, const fs::path& sidecar_path) {
  BodyMesh mesh = parse_mesh(read_text(mesh_path), mesh_path.string());
  const json side = read_json(sidecar_path);
  check_schema(side, sidecar_path.string());
  mesh.landmarks = get<std::map<std::string, int>>(side, "landmarks", sidecar_path.string());
  if (side.contains("segments")) mesh.segments = side["segments"].get<std::map<std::string, std::vector<int>>>();
  mesh.validate();
  return mesh;
}

// ---------------------------------------------------------------------------
// External augmentation model

inline LinearWindowModel read_linear_model(const fs::path& path, std::size_t markers = kMarkerCount) {
  if (!fs::exists(path)) throw Error(ErrorCode::model_artifact_missing, "augment", "model file " + path.string() + " not found");
  const json doc = read_json(path);
  const std::string origin = path.string();
  check_schema(doc, origin);
  if (get<std::string>(doc, "kind", origin) != "linear_window") {
    throw Error(ErrorCode::malformed_document, "io", origin + ": only linear_window models are supported");
  }
  LinearWindowModel m;
  m.window = get<std::size_t>(doc, "window", origin);
  const auto w = get<std::vector<std::vector<double>>>(doc, "weights", origin);
  const auto b = get<std::vector<double>>(doc, "bias", origin);
  m.weights.resize(static_cast<Eigen::Index>(w.size()), w.empty() ? 0 : static_cast<Eigen::Index>(w[0].size()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i].size() != w[0].size()) throw Error(ErrorCode::malformed_document, "io", origin + ": ragged weight matrix");
    for (std::size_t j = 0; j < w[i].size(); ++j) m.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w[i][j];
  }
  m.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  m.validate(markers);
  return m;
}

inline void write_linear_model(const fs::path& path, const LinearWindowModel& m) {
  std::vector<std::vector<double>> w(static_cast<std::size_t>(m.weights.rows()));
  for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.weights.cols(); ++j) w[static_cast<std::size_t>(i)].push_back(m.weights(i, j));
  }
  std::vector<double> b(m.bias.data(), m.bias.data() + m.bias.size());
  write_json(path, {{"schema_version", kSchemaVersion}, {"kind", "linear_window"}, {"window", m.window}, {"weights", w}, {"bias", b}});
}

// ---------------------------------------------------------------------------
// Reports

/// Right-side hip, knee and elbow angles with the per-frame residual.
inline std::string angles_csv(const JointAngleSeries& s) {
  const std::size_t hip = s.column("hip_flexion_r"), knee = s.column("knee_angle_r"), elbow = s.column("elbow_flexion_r");
  std::string out = "frame,time,hip_flexion,knee,elbow,residual\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.9f}\n", s.frames[i], s.frames[i] / s.rate, s.values[i][hip],
                       s.values[i][knee], s.values[i][elbow], s.residual[i]);
  }
  return out;
}

/// Every named angle, both sides, plus residual and convergence flag.
inline std::string angles_wide_csv(const JointAngleSeries& s) {
  std::string out = "frame,time";
  for (const auto& n : s.names) out += "," + n;
  out += ",residual,converged\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    out += fmt::format("{},{:.6f}", s.frames[i], s.frames[i] / s.rate);
    for (double v : s.values[i]) out += fmt::format(",{:.6f}", v);
    out += fmt::format(",{:.9f},{}\n", s.residual[i], s.converged[i] ? 1 : 0);
  }
  return out;
}

inline json anthro_json(const MeasurementReport& r) {
  json values = json::object();
  for (const auto& [code, v] : r.values) {
    values[code] = {{"name", v.name}, {"value", v.value}, {"unit", v.unit}, {"method", to_string(v.method)}};
  }
  json doc = {{"schema_version", kSchemaVersion}, {"measurements", values}, {"missing", r.missing}};
  json bmi = {{"value", r.bmi}, {"category", to_string(r.bmi_category)}};
  if (r.weight_detail) {
    bmi["weight_extracted_kg"] = r.weight_detail->extracted;
    bmi["bmi_calculated"] = r.weight_detail->bmi_calculated;
    bmi["calculated_category"] = to_string(r.weight_detail->category);
  }
  doc["bmi"] = bmi;
  return doc;
}

inline json stats_json(const ExclusionSummary& s) {
  return {{"schema_version", kSchemaVersion},
          {"task", s.task},
          {"frames", s.frames},
          {"landmarks_per_frame", s.landmarks_per_frame},
          {"mean_excluded_markers", s.mean_excluded_markers},
          {"mean_excluded_percent", s.excluded_percent},
          {"reprojection_mean_px", s.reprojection_mean_px},
          {"reprojection_std_px", s.reprojection_std_px},
          {"accepted_points", s.accepted_points}};
}

inline void write_reports(const fs::path& dir, const JointAngleSeries* angles, const MeasurementReport* anthro,
                          const ExclusionSummary* stats) {
  fs::create_directories(dir);
  if (angles) {
    write_text(dir / "angles.csv", angles_csv(*angles));
    write_text(dir / "angles_all.csv", angles_wide_csv(*angles));
  }
  if (anthro) write_json(dir / "anthro.json", anthro_json(*anthro));
  if (stats) write_json(dir / "stats.json", stats_json(*stats));
}

/// Triangulated landmarks as trajectories named after Body_25B keypoints;
/// anything not accepted becomes a gap.
inline TrajectorySet landmark_trajectories(const std::vector<FrameResult>& seq, double rate) {
  std::vector<std::string> names(body25b::kNames.begin(), body25b::kNames.end());
  std::vector<int> frames;
  for (const auto& f : seq) frames.push_back(f.frame_index);
  TrajectorySet out = make_trajectories(names, frames, rate);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (std::size_t l = 0; l < seq[i].points.size() && l < names.size(); ++l) {
      const auto& p = seq[i].points[l];
      if (!p.accepted()) continue;
      out[l].positions[i] = p.xyz;
      out[l].gaps[i] = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest

struct Manifest {
  std::string command;
  json config = json::object();
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
};

/// Fingerprints of inputs, configuration and outputs. Nothing time- or
/// host-dependent is recorded, so identical runs give identical manifests.
inline json manifest_json(const Manifest& m, const std::string& version) {
  auto fingerprint = [](const fs::path& p) {
    json j = {{"path", p.generic_string()}};
    if (fs::is_regular_file(p)) {
      j["fnv1a"] = hex64(fnv1a(read_text(p)));
    } else if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      std::uint64_t h = fnv1a("");
      for (const auto& f : files) h ^= fnv1a(f.filename().string() + read_text(f)) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      j["fnv1a"] = hex64(h);
      j["files"] = files.size();
    }
    return j;
  };
  json inputs = json::array(), outputs = json::array();
  for (const auto& p : m.inputs) inputs.push_back(fingerprint(p));
  for (const auto& p : m.outputs) outputs.push_back(fingerprint(p));
  return {{"schema_version", kSchemaVersion},
          {"tool", "mocap"},
          {"version", version},
          {"command", m.command},
          {"config", m.config},
          {"config_hash", hex64(fnv1a(m.config.dump()))},
          {"inputs", inputs},
          {"outputs", outputs},
          {"versions", {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                        {"fmt", FMT_VERSION},
                        {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                                      NLOHMANN_JSON_VERSION_PATCH)}}}};
}

}  // namespace mocap::io
