#include <doctest.h>

#include <filesystem>
#include <random>

#include "mocap/io.hpp"
#include "mocap/synth.hpp"
#include "support.hpp"

using namespace mocap;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

template <typename F>
std::string expect_code(ErrorCode code, F&& f) {
  try {
    f();
    FAIL("expected " << to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
    return e.what();
  }
  return {};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const synth::Bundle& walking_bundle() {
  static const synth::Bundle b = [] {
    synth::NoiseSpec noise;
    noise.pixel_sigma = 1.0;
    noise.occlusion_rate = 0.1;
    noise.seed = 8;
    return synth::generate(synth::script(synth::Task::walking), synth::paper_rig(), noise);
  }();
  return b;
}

}  // namespace

TEST_CASE("calibration round trip") {
  testing::TempDir dir("calib");
  auto rig = synth::paper_rig().cameras;
  rig[1].distortion.coefficients = {-0.12, 0.01, 0.0, 0.001};
  io::write_calibration(dir / "calibration.json", rig);
  const auto back = io::read_calibration(dir / "calibration.json");
  REQUIRE(back.size() == rig.size());
  const Vec3 probe(0.3, -0.2, 1.4);
  for (std::size_t c = 0; c < rig.size(); ++c) {
    CHECK(back[c].id == rig[c].id);
    CHECK(back[c].image_width == rig[c].image_width);
    CHECK(back[c].image_height == rig[c].image_height);
    CHECK((back[c].intrinsics - rig[c].intrinsics).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((back[c].rotation - rig[c].rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back[c].center - rig[c].center).norm() < 1e-12);
    CHECK((project(back[c], probe) - project(rig[c], probe)).norm() < 1e-9);
  }
  CHECK(back[1].distortion.coefficients == rig[1].distortion.coefficients);
  CHECK(io::read_json(dir / "calibration.json").at("schema_version") == io::kSchemaVersion);
}

TEST_CASE("malformed documents name the file and offset") {
  testing::TempDir dir("bad");
  io::write_text(dir / "calibration.json", "{\"schema_version\": 1, \"cameras\": [");
  const auto msg = expect_code(ErrorCode::malformed_document, [&] { io::read_calibration(dir / "calibration.json"); });
  CHECK(msg.find("calibration.json") != std::string::npos);
  CHECK(msg.find("byte") != std::string::npos);
  expect_code(ErrorCode::io, [&] { io::read_calibration(dir / "missing.json"); });
}

TEST_CASE("correspondence round trip") {
  testing::TempDir dir("corr");
  const auto cam = synth::paper_rig().cameras[2];
  const auto set = synth::correspondences(cam, synth::checkerboard_placements(), 0.3, 4);
  io::write_correspondences(dir / "left.txt", set);
  const auto back = io::read_correspondences(dir / "left.txt");
  REQUIRE(back.pairs.size() == set.pairs.size());
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    CHECK((back.pairs[i].world - set.pairs[i].world).norm() < 1e-12);
    CHECK((back.pairs[i].pixel.uv - set.pairs[i].pixel.uv).norm() < 1e-9);
  }
  expect_code(ErrorCode::malformed_document, [] { io::parse_correspondences("1 2 3 4\n", "inline"); });
}

TEST_CASE("keypoint round trip is exact") {
  testing::TempDir dir("kp");
  const auto& b = walking_bundle();
  io::write_keypoints(dir / "keypoints", b.streams);
  const auto back = io::read_keypoints(dir / "keypoints");
  REQUIRE(back.size() == 4);
  std::map<std::string, const CameraStream*> by_id;
  for (const auto& s : b.streams) by_id[s.camera_id] = &s;
  for (const auto& s : back) {
    const auto& orig = *by_id.at(s.camera_id);
    REQUIRE(s.frames.size() == 300);
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      CHECK(s.frames[i].frame_index == orig.frames[i].frame_index);
      REQUIRE(s.frames[i].landmarks.size() == 25);
      for (std::size_t l = 0; l < 25; ++l) {
        CHECK(s.frames[i].landmarks[l].uv == orig.frames[i].landmarks[l].uv);
        CHECK(s.frames[i].landmarks[l].confidence == orig.frames[i].landmarks[l].confidence);
      }
    }
  }
}

TEST_CASE("keypoint ingestion errors and gaps") {
  testing::TempDir dir("kp_err");
  std::vector<CameraStream> streams;
  const auto& b = walking_bundle();
  for (const auto& s : b.streams) {
    CameraStream c{s.camera_id, {s.frames.begin(), s.frames.begin() + 5}};
    streams.push_back(c);
  }
  io::write_keypoints(dir.path(), streams);

  SUBCASE("missing file becomes an empty frame") {
    fs::remove(dir / io::keypoint_filename("left", 2));
    const auto back = io::read_keypoints(dir.path());
    for (const auto& s : back) {
      REQUIRE(s.frames.size() == 5);
      CHECK(s.frames[2].landmarks.empty() == (s.camera_id == "left"));
    }
  }
  SUBCASE("corrupt file is named") {
    io::write_text(dir / io::keypoint_filename("right", 3), "{\"people\": [{\"pose_keypoints_2d\": [1, 2,");
    const auto msg = expect_code(ErrorCode::malformed_document, [&] { io::read_keypoints(dir.path()); });
    CHECK(msg.find("right_000003.json") != std::string::npos);
  }
  SUBCASE("wrong landmark count") {
    io::write_text(dir / io::keypoint_filename("right", 3), R"({"people": [{"pose_keypoints_2d": [1, 2, 0.9]}]})");
    expect_code(ErrorCode::inconsistent_landmark_count, [&] { io::read_keypoints(dir.path()); });
  }
  SUBCASE("OpenPose file suffix is accepted") {
    fs::rename(dir / io::keypoint_filename("left", 4), dir / "left_000004_keypoints.json");
    const auto back = io::read_keypoints(dir.path());
    for (const auto& s : back) CHECK(s.frames[4].landmarks.size() == 25);
  }
  expect_code(ErrorCode::io, [&] { io::read_keypoints(dir / "nowhere"); });
}

TEST_CASE("TRC header and round trip") {
  testing::TempDir dir("trc");
  const auto& b = walking_bundle();
  io::write_trc(dir / "markers.trc", b.markers);
  const auto lines = lines_of(io::read_text(dir / "markers.trc"));
  const auto meta = io::detail::split_tabs(lines[2]);
  CHECK(meta[2] == "300");
  CHECK(meta[3] == "57");
  CHECK(meta[4] == "m");
  for (std::size_t i = 5; i < lines.size(); ++i) {
    if (!lines[i].empty()) CHECK(io::detail::split_tabs(lines[i]).size() == 2 + 3 * 57);
  }
  // Five header lines, a blank separator, then frame 1.
  CHECK(lines[5].empty());
  CHECK(io::detail::split_tabs(lines[6])[0] == "1");

  for (auto units : {io::TrcUnits::m, io::TrcUnits::mm}) {
    io::write_trc(dir / "markers.trc", b.markers, units);
    const auto doc = io::read_trc(dir / "markers.trc");
    CHECK(doc.units == units);
    CHECK(doc.data_rate == 30.0);
    REQUIRE(doc.trajectories.size() == 57);
    double worst = 0.0;
    for (std::size_t m = 0; m < 57; ++m) {
      CHECK(doc.trajectories[m].marker_id == b.markers[m].marker_id);
      CHECK(doc.trajectories[m].frames == b.markers[m].frames);
      for (std::size_t i = 0; i < 300; ++i) {
        worst = std::max(worst, (doc.trajectories[m].positions[i] - b.markers[m].positions[i]).cwiseAbs().maxCoeff());
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("TRC gaps and errors") {
  TrajectorySet set = make_trajectories({"A", "B"}, {0, 1, 2}, 60.0);
  for (auto& t : set) {
    for (std::size_t i = 0; i < 3; ++i) {
      t.positions[i] = Vec3(1.0 * i, 2.0, 3.0);
      t.gaps[i] = false;
    }
  }
  set[1].gaps[1] = true;
  const auto doc = io::parse_trc(io::trc_text(set), "inline");
  CHECK(doc.trajectories[1].gaps[1]);
  CHECK_FALSE(doc.trajectories[0].gaps[1]);
  CHECK(doc.data_rate == 60.0);

  expect_code(ErrorCode::ragged_trajectories, [] { io::trc_text({}); });
  TrajectorySet ragged = set;
  ragged[1].frames.pop_back();
  ragged[1].positions.pop_back();
  ragged[1].gaps.pop_back();
  expect_code(ErrorCode::ragged_trajectories, [&] { io::trc_text(ragged); });

  auto text = io::trc_text(set);
  text.replace(text.find("\tm\t"), 3, "\tcm\t");
  expect_code(ErrorCode::malformed_document, [&] { io::parse_trc(text, "inline"); });
  expect_code(ErrorCode::malformed_document, [] { io::parse_trc("PathFileType\n", "inline"); });
}

TEST_CASE("template round trip") {
  const auto t = synth::marker_template();
  const auto back = io::template_from_json(io::template_json(t), "inline");
  REQUIRE(back.size() == t.size());
  CHECK(back.names == t.names);
  CHECK(back.segment_of == t.segment_of);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK((back.local_offset[i] - t.local_offset[i]).norm() < 1e-12);
  REQUIRE(back.frames.size() == t.frames.size());
  // The round-tripped template augments exactly like the original.
  const auto& b = walking_bundle();
  std::vector<std::string> names(body25b::kNames.begin(), body25b::kNames.end());
  TrajectorySet landmarks = make_trajectories(names, {0}, 30.0);
  for (std::size_t l = 0; l < 25; ++l) {
    landmarks[l].positions[0] = b.keypoints[0][l];
    landmarks[l].gaps[0] = false;
  }
  const auto a1 = augment_baseline(landmarks, t), a2 = augment_baseline(landmarks, back);
  for (std::size_t m = 0; m < a1.size(); ++m) CHECK((a1[m].positions[0] - a2[m].positions[0]).norm() < 1e-12);
}

TEST_CASE("model round trip") {
  testing::TempDir dir("model");
  const auto m = synth::marker_model();
  io::write_model(dir / "model.json", m);
  const auto back = io::read_model(dir / "model.json");
  REQUIRE(back.dof() == m.dof());
  REQUIRE(back.markers().size() == m.markers().size());
  CHECK(back.angles().size() == m.angles().size());
  for (std::size_t i = 0; i < m.dof(); ++i) {
    CHECK(back.coordinates()[i].name == m.coordinates()[i].name);
    CHECK(back.coordinates()[i].lower == Approx(m.coordinates()[i].lower));
    CHECK(back.coordinates()[i].upper == Approx(m.coordinates()[i].upper));
  }
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::VectorXd q(m.dof());
  for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = u(rng);
  const auto a = forward_kinematics(m, q), b = forward_kinematics(back, q);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-12);

  auto doc = io::model_json(m);
  doc["schema_version"] = 99;
  CHECK_THROWS_AS(io::model_from_json(doc, "inline"), Error);
}

TEST_CASE("mesh round trip") {
  testing::TempDir dir("mesh");
  const auto body = synth::humanoid_mesh();
  const auto defs = synth::humanoid_measurements();
  io::write_mesh(dir / "mesh.obj", dir / "mesh_landmarks.json", body.mesh, &defs);
  const auto back = io::read_mesh(dir / "mesh.obj", dir / "mesh_landmarks.json");
  CHECK(back.vertices.size() == body.mesh.vertices.size());
  CHECK(back.faces == body.mesh.faces);
  CHECK(back.landmarks == body.mesh.landmarks);
  CHECK(back.segments == body.mesh.segments);
  double worst = 0.0;
  for (std::size_t i = 0; i < back.vertices.size(); ++i) worst = std::max(worst, (back.vertices[i] - body.mesh.vertices[i]).norm());
  CHECK(worst < 1e-9);

  const auto read_defs = io::measurements_from_sidecar(dir / "mesh_landmarks.json");
  for (std::size_t i = 0; i < defs.size(); ++i) {
    CHECK(read_defs[i].axis_from == defs[i].axis_from);
    CHECK(read_defs[i].axis_to == defs[i].axis_to);
  }
  expect_code(ErrorCode::malformed_document, [] { io::parse_mesh("v 1 2\n", "inline"); });
  io::write_text(dir / "bad.obj", "v 0 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS(io::read_mesh(dir / "bad.obj", dir / "mesh_landmarks.json"), Error);
}

TEST_CASE("linear augmentation model round trip") {
  testing::TempDir dir("linear");
  LinearWindowModel m;
  m.window = 2;
  m.weights = Eigen::MatrixXd::Random(3 * 57, 63 * 2);
  m.bias = Eigen::VectorXd::Random(3 * 57);
  io::write_linear_model(dir / "model.json", m);
  const auto back = io::read_linear_model(dir / "model.json");
  CHECK(back.window == 2);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  expect_code(ErrorCode::model_artifact_missing, [&] { io::read_linear_model(dir / "absent.json"); });
}

TEST_CASE("report documents") {
  testing::TempDir dir("reports");
  const auto m = synth::marker_model();
  const auto b = synth::generate(synth::script(synth::Task::squatting, 1.0), synth::paper_rig(), {});
  const auto series = solve_sequence(m, IkWeights{}, b.markers);
  const auto body = synth::humanoid_mesh();
  const auto report = measure_all(body.mesh, DensityModel{}, synth::humanoid_measurements());
  const auto triangulated = triangulate_sequence(b.streams, b.rig.cameras, GateConfig::paper_default());
  const auto stats = exclusion_stats(triangulated, "squatting");
  io::write_reports(dir.path(), &series, &report, &stats);

  const auto csv = lines_of(io::read_text(dir / "angles.csv"));
  CHECK(csv.front() == "frame,time,hip_flexion,knee,elbow,residual");
  CHECK(csv.size() == 31);
  const auto wide = lines_of(io::read_text(dir / "angles_all.csv"));
  CHECK(wide.front().rfind("frame,time,hip_flexion_r,", 0) == 0);
  CHECK(wide.front().find(",residual,converged") != std::string::npos);

  const auto anthro = io::read_json(dir / "anthro.json");
  for (const char* code : {"A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N", "O", "P", "Q"}) {
    INFO(code);
    REQUIRE(anthro["measurements"].contains(code));
    CHECK(anthro["measurements"][code].contains("unit"));
  }
  CHECK(anthro["measurements"]["N"]["unit"] == "kg");
  CHECK(anthro["measurements"]["M"]["unit"] == "m");
  CHECK(anthro["bmi"].contains("category"));

  const auto s = io::read_json(dir / "stats.json");
  for (const char* key : {"task", "frames", "mean_excluded_percent", "reprojection_mean_px", "reprojection_std_px"}) {
    CHECK(s.contains(key));
  }
  CHECK(s["task"] == "squatting");
  CHECK(s["frames"] == 30);
  CHECK(s["schema_version"] == io::kSchemaVersion);
}

TEST_CASE("manifest is reproducible") {
  testing::TempDir dir("manifest");
  io::write_text(dir / "a.txt", "alpha");
  io::write_text(dir / "sub/b.txt", "beta");
  io::Manifest m{"test", {{"cutoff", 6.0}}, {dir / "a.txt"}, {dir / "sub"}};
  const auto j1 = io::manifest_json(m, "0.1.0"), j2 = io::manifest_json(m, "0.1.0");
  CHECK(j1 == j2);
  CHECK(j1["outputs"][0]["files"] == 1);
  io::write_text(dir / "a.txt", "alphA");
  CHECK(io::manifest_json(m, "0.1.0")["inputs"][0]["fnv1a"] != j1["inputs"][0]["fnv1a"]);
  m.config["cutoff"] = 7.0;
  CHECK(io::manifest_json(m, "0.1.0")["config_hash"] != j1["config_hash"]);
}
