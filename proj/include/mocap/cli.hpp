#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mocap/mocap.hpp"

namespace mocap::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Bad invocation: missing inputs, unknown presets. Exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct Paths {
  fs::path keypoints, calibration, model, marker_template, mesh, mesh_landmarks;
};

struct PipelineSettings {
  Paths paths;
  std::string gate_preset = "paper-default";
  GateConfig gates = GateConfig::paper_default();
  FilterSpec filter;
  double rate = 30.0;
  std::string augmenter = "baseline";
  fs::path augmenter_model;
  double density = 985.0;
  std::string task = "custom";
  fs::path out = "out";
};

inline GateConfig gate_preset(const std::string& name) {
  if (name == "paper-default") return GateConfig::paper_default();
  if (name == "validation") return GateConfig::validation();
  throw UsageError("unknown gate preset '" + name + "' (paper-default, validation, custom)");
}

/// Relative paths in a config file resolve against the file's directory.
inline PipelineSettings settings_from_json(const json& doc, const fs::path& base) {
  PipelineSettings s;
  auto path = [&](const json& j, const char* key, fs::path& dst) {
    if (j.contains(key) && !j[key].is_null()) {
      fs::path p = j[key].get<std::string>();
      dst = p.is_absolute() ? p : base / p;
    }
  };
  try {
    io::check_schema(doc, "config");
    if (doc.contains("paths")) {
      const auto& p = doc["paths"];
      path(p, "keypoints", s.paths.keypoints);
      path(p, "calibration", s.paths.calibration);
      path(p, "model", s.paths.model);
      path(p, "template", s.paths.marker_template);
      path(p, "mesh", s.paths.mesh);
      path(p, "mesh_landmarks", s.paths.mesh_landmarks);
    }
    if (doc.contains("gate")) {
      const auto& g = doc["gate"];
      s.gate_preset = g.value("preset", s.gate_preset);
      if (s.gate_preset != "custom") s.gates = gate_preset(s.gate_preset);
      s.gates.confidence_min = g.value("confidence_min", s.gates.confidence_min);
      s.gates.reprojection_max = g.value("reprojection_max", s.gates.reprojection_max);
      s.gates.min_views = g.value("min_views", s.gates.min_views);
    }
    if (doc.contains("filter")) {
      s.filter.order = doc["filter"].value("order", s.filter.order);
      s.filter.cutoff_hz = doc["filter"].value("cutoff_hz", s.filter.cutoff_hz);
    }
    s.rate = doc.value("rate", s.rate);
    if (doc.contains("augmenter")) {
      s.augmenter = doc["augmenter"].value("kind", s.augmenter);
      path(doc["augmenter"], "model", s.augmenter_model);
    }
    s.density = doc.value("density", s.density);
    s.task = doc.value("task", s.task);
    path(doc, "out", s.out);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_document, "cli", std::string("config: ") + e.what());
  }
  return s;
}

inline json settings_json(const PipelineSettings& s) {
  auto p = [](const fs::path& x) { return x.empty() ? json(nullptr) : json(x.generic_string()); };
  return {{"schema_version", io::kSchemaVersion},
          {"paths",
           {{"keypoints", p(s.paths.keypoints)},
            {"calibration", p(s.paths.calibration)},
            {"model", p(s.paths.model)},
            {"template", p(s.paths.marker_template)},
            {"mesh", p(s.paths.mesh)},
            {"mesh_landmarks", p(s.paths.mesh_landmarks)}}},
          {"gate",
           {{"preset", s.gate_preset},
            {"confidence_min", s.gates.confidence_min},
            {"reprojection_max", s.gates.reprojection_max},
            {"min_views", s.gates.min_views}}},
          {"filter", {{"order", s.filter.order}, {"cutoff_hz", s.filter.cutoff_hz}}},
          {"rate", s.rate},
          {"augmenter", {{"kind", s.augmenter}, {"model", p(s.augmenter_model)}}},
          {"density", s.density},
          {"task", s.task}};
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " path not given");
  if (!fs::exists(p)) throw UsageError(what + " not found: " + p.string());
}

inline Augmenter make_augmenter(const PipelineSettings& s, std::size_t markers) {
  if (s.augmenter == "baseline") return Augmenter::baseline();
  if (s.augmenter == "linear") {
    if (s.augmenter_model.empty()) throw UsageError("--augmenter linear needs --augmenter-model");
    const LinearWindowModel m = io::read_linear_model(s.augmenter_model, markers);
    return Augmenter::external(m, m.window);
  }
  throw UsageError("unknown augmenter '" + s.augmenter + "' (baseline, linear)");
}

// ---------------------------------------------------------------------------
// Small readers for report

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline Table read_csv(const fs::path& path) {
  Table t;
  std::istringstream in(io::read_text(path));
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::malformed_document, "cli", path.string() + ": empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& c : split(line)) row.push_back(io::detail::parse_double(c, path.string()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
  std::ostream& out;
  std::size_t jobs = 1;
};

inline void finish(const Context& ctx, const std::string& command, const json& config, const std::vector<fs::path>& inputs,
                   const std::vector<fs::path>& outputs, const fs::path& dir) {
  io::Manifest m{command, config, inputs, outputs};
  io::write_json(dir / "manifest.json", io::manifest_json(m, kVersion));
  for (const auto& p : outputs) ctx.out << "wrote " << p.generic_string() << "\n";
}

inline int cmd_calibrate(const Context& ctx, const std::vector<std::string>& points, const fs::path& points_dir, int width,
                         int height, double threshold, const fs::path& out) {
  std::vector<std::pair<std::string, fs::path>> inputs;
  for (const auto& p : points) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw UsageError("--points expects CAMERA=FILE, got '" + p + "'");
    inputs.emplace_back(p.substr(0, eq), p.substr(eq + 1));
  }
  if (!points_dir.empty()) {
    if (!fs::is_directory(points_dir)) throw UsageError("correspondence directory not found: " + points_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(points_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) inputs.emplace_back(f.stem().string(), f);
  }
  if (inputs.empty()) throw UsageError("no correspondence files given (--points or --points-dir)");
  for (const auto& [cam, file] : inputs) require_file(file, "correspondence file for " + cam);

  std::vector<CameraModel> rig;
  json report = {{"schema_version", io::kSchemaVersion}, {"threshold_px", threshold}, {"cameras", json::array()}};
  std::vector<fs::path> in_paths;
  bool recalibrate = false;
  for (const auto& [cam, file] : inputs) {
    in_paths.push_back(file);
    const CorrespondenceSet set = io::read_correspondences(file);
    CameraModel c = decompose(resect(set), width, height);
    c.id = cam;
    const CalibrationReport a = audit(c, set, threshold);
    recalibrate = recalibrate || a.recalibration_recommended;
    report["cameras"].push_back({{"id", cam},
                                 {"points", set.pairs.size()},
                                 {"mean_error_px", a.mean_error},
                                 {"max_error_px", a.max_error},
                                 {"per_point_errors_px", a.per_point_errors},
                                 {"excluded_points", a.excluded_points},
                                 {"recalibration_recommended", a.recalibration_recommended}});
    ctx.out << fmt::format("{}: {} points, mean {:.3f} px, max {:.3f} px, {} above {} px\n", cam, set.pairs.size(),
                           a.mean_error, a.max_error, a.excluded_points.size(), threshold);
    rig.push_back(c);
  }
  const fs::path cal = out / "calibration.json", rep = out / "calibration_report.json";
  io::write_calibration(cal, rig);
  io::write_json(rep, report);
  if (recalibrate) ctx.out << "warning: mean reprojection error above threshold, recalibration recommended\n";
  finish(ctx, "calibrate", {{"image_size", {width, height}}, {"threshold_px", threshold}}, in_paths, {cal, rep}, out);
  return 0;
}

inline int cmd_synth(const Context& ctx, const std::string& task_name, double duration, double rate,
                     const synth::NoiseSpec& noise, const fs::path& out) {
  const auto task = synth::task_from_string(task_name);
  if (!task) throw UsageError("unknown task '" + task_name + "' (leaning, bending, squatting, walking, static)");
  const auto rig = synth::paper_rig();
  const synth::Bundle b = synth::generate(synth::script(*task, duration, rate), rig, noise);

  const fs::path truth = out / "truth";
  const fs::path cal = out / "calibration.json", kp = out / "keypoints", model = out / "model.json",
                 tmpl = out / "template.json", mesh = out / "mesh.obj", side = out / "mesh_landmarks.json",
                 markers = truth / "markers.trc", angles = truth / "angles_all.csv", anthro = truth / "anthro.json",
                 config = out / "config.json";
  io::write_calibration(cal, rig.cameras);
  io::write_keypoints(kp, b.streams);
  io::write_model(model, b.model);
  io::write_template(tmpl, b.marker_template);
  const auto defs = synth::humanoid_measurements();
  io::write_mesh(mesh, side, b.body.mesh, &defs);
  io::write_trc(markers, b.markers);

  JointAngleSeries series;
  for (const auto& a : b.model.angles()) series.names.push_back(a.name);
  series.frames = b.frames;
  series.rate = b.rate;
  for (const auto& q : b.q) {
    series.values.push_back(joint_angles(q, b.model));
    series.residual.push_back(0.0);
    series.converged.push_back(true);
  }
  io::write_text(angles, io::angles_wide_csv(series));
  json tv = json::object();
  for (const auto& [code, v] : b.body.truth.values) tv[code] = v;
  io::write_json(anthro, {{"schema_version", io::kSchemaVersion},
                          {"values", tv},
                          {"stature_m", b.body.truth.stature},
                          {"volume_m3", b.body.truth.volume},
                          {"density", b.body.truth.density},
                          {"mass_kg", b.body.truth.mass()}});

  PipelineSettings s;
  s.paths = {"keypoints", "calibration.json", "model.json", "template.json", "mesh.obj", "mesh_landmarks.json"};
  s.rate = rate;
  s.task = b.task;
  json cfg = settings_json(s);
  cfg["out"] = "run";
  io::write_json(config, cfg);

  const json used = {{"task", b.task},
                     {"duration_s", duration},
                     {"rate", rate},
                     {"pixel_sigma", noise.pixel_sigma},
                     {"occlusion_rate", noise.occlusion_rate},
                     {"outlier_rate", noise.outlier_rate},
                     {"seed", noise.seed},
                     {"rig", rig.name}};
  finish(ctx, "synth", used, {}, {cal, kp, model, tmpl, mesh, side, markers, angles, anthro, config}, out);
  return 0;
}

inline int cmd_triangulate(const Context& ctx, const PipelineSettings& s) {
  require_file(s.paths.calibration, "calibration");
  require_file(s.paths.keypoints, "keypoint directory");
  const auto rig = io::read_calibration(s.paths.calibration);
  const auto streams = io::read_keypoints(s.paths.keypoints);
  const auto seq = triangulate_sequence(streams, rig, s.gates, ctx.jobs);
  const fs::path trc = s.out / "landmarks.trc", stats = s.out / "stats.json";
  io::write_trc(trc, io::landmark_trajectories(seq, s.rate));
  io::write_json(stats, io::stats_json(exclusion_stats(seq, s.task)));
  finish(ctx, "triangulate", settings_json(s), {s.paths.calibration, s.paths.keypoints}, {trc, stats}, s.out);
  return 0;
}

inline int cmd_augment(const Context& ctx, const PipelineSettings& s, const fs::path& landmarks) {
  require_file(landmarks, "landmark TRC");
  require_file(s.paths.marker_template, "marker template");
  const auto tmpl = io::read_template(s.paths.marker_template);
  const Augmenter aug = make_augmenter(s, tmpl.size());
  const auto doc = io::read_trc(landmarks);
  const auto filled = fill_landmarks(doc.trajectories, ctx.jobs);
  const fs::path trc = s.out / "markers.trc";
  io::write_trc(trc, augment(filled, aug, tmpl, ctx.jobs));
  std::vector<fs::path> inputs{landmarks, s.paths.marker_template};
  if (!s.augmenter_model.empty()) inputs.push_back(s.augmenter_model);
  finish(ctx, "augment", settings_json(s), inputs, {trc}, s.out);
  return 0;
}

inline int cmd_filter(const Context& ctx, const PipelineSettings& s, const fs::path& in, std::optional<double> rate) {
  require_file(in, "marker TRC");
  auto doc = io::read_trc(in);
  if (rate) {
    for (auto& t : doc.trajectories) t.rate = *rate;
  }
  const fs::path trc = s.out / "markers_filtered.trc";
  io::write_trc(trc, filter_available(doc.trajectories, s.filter, ctx.jobs), doc.units);
  finish(ctx, "filter", settings_json(s), {in}, {trc}, s.out);
  return 0;
}

inline int cmd_ik(const Context& ctx, const PipelineSettings& s, const fs::path& markers) {
  require_file(s.paths.model, "skeleton model");
  require_file(markers, "marker TRC");
  const auto model = io::read_model(s.paths.model);
  const auto doc = io::read_trc(markers);
  const auto series = solve_sequence(model, IkWeights{}, doc.trajectories);
  const fs::path a = s.out / "angles.csv", w = s.out / "angles_all.csv";
  io::write_text(a, io::angles_csv(series));
  io::write_text(w, io::angles_wide_csv(series));
  std::size_t bad = 0;
  for (bool c : series.converged) bad += c ? 0 : 1;
  if (bad) ctx.out << fmt::format("warning: {} of {} frames did not converge\n", bad, series.converged.size());
  finish(ctx, "ik", settings_json(s), {s.paths.model, markers}, {a, w}, s.out);
  return 0;
}

inline json anthro_document(const PipelineSettings& s, std::optional<std::size_t> frame) {
  require_file(s.paths.mesh, "mesh");
  require_file(s.paths.mesh_landmarks, "mesh landmark sidecar");
  const BodyMesh mesh = io::read_mesh(s.paths.mesh, s.paths.mesh_landmarks);
  DensityModel density;
  density.rho = s.density;
  json doc = io::anthro_json(measure_all(mesh, density, io::measurements_from_sidecar(s.paths.mesh_landmarks)));
  if (frame) doc["measurement_frame"] = *frame;
  return doc;
}

inline int cmd_anthro(const Context& ctx, const PipelineSettings& s) {
  const fs::path a = s.out / "anthro.json";
  io::write_json(a, anthro_document(s, std::nullopt));
  finish(ctx, "anthro", settings_json(s), {s.paths.mesh, s.paths.mesh_landmarks}, {a}, s.out);
  return 0;
}

inline int cmd_pipeline(const Context& ctx, const PipelineSettings& s) {
  require_file(s.paths.calibration, "calibration");
  require_file(s.paths.keypoints, "keypoint directory");
  require_file(s.paths.model, "skeleton model");
  require_file(s.paths.marker_template, "marker template");
  const auto rig = io::read_calibration(s.paths.calibration);
  const auto streams = io::read_keypoints(s.paths.keypoints);
  const auto model = io::read_model(s.paths.model);
  const auto tmpl = io::read_template(s.paths.marker_template);

  PipelineConfig cfg;
  cfg.gates = s.gates;
  cfg.filter = s.filter;
  cfg.rate = s.rate;
  cfg.jobs = ctx.jobs;
  cfg.task = s.task;
  const PipelineResult r = run_pipeline(streams, rig, model, tmpl, make_augmenter(s, tmpl.size()), cfg);

  const fs::path lm = s.out / "landmarks.trc", mk = s.out / "markers.trc", mf = s.out / "markers_filtered.trc";
  io::write_trc(lm, io::landmark_trajectories(r.triangulated, s.rate));
  io::write_trc(mk, r.markers);
  io::write_trc(mf, r.filtered);
  io::write_reports(s.out, &r.angles, nullptr, &r.stats);
  std::vector<fs::path> inputs{s.paths.calibration, s.paths.keypoints, s.paths.model, s.paths.marker_template};
  std::vector<fs::path> outputs{lm, mk, mf, s.out / "angles.csv", s.out / "angles_all.csv", s.out / "stats.json"};
  if (!s.paths.mesh.empty()) {
    std::optional<std::size_t> frame;
    try {
      frame = select_measurement_frame(landmark_frames(r.landmarks));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::no_valid_frame) throw;
      ctx.out << "warning: no frame shows hips, shoulders and ankles; anthropometry not tied to a frame\n";
    }
    io::write_json(s.out / "anthro.json", anthro_document(s, frame));
    inputs.push_back(s.paths.mesh);
    inputs.push_back(s.paths.mesh_landmarks);
    outputs.push_back(s.out / "anthro.json");
  }
  ctx.out << fmt::format("{}: {} frames, {:.2f}% excluded, reprojection {:.3f} +/- {:.3f} px\n", s.task, r.stats.frames,
                         r.stats.excluded_percent, r.stats.reprojection_mean_px, r.stats.reprojection_std_px);
  finish(ctx, "pipeline", settings_json(s), inputs, outputs, s.out);
  return 0;
}

/// Summarises a run directory; with a synth truth directory, also scores it.
inline int cmd_report(const Context& ctx, const fs::path& run, const fs::path& truth) {
  if (!fs::is_directory(run)) throw UsageError("run directory not found: " + run.string());
  json rep = {{"schema_version", io::kSchemaVersion}};
  if (fs::exists(run / "stats.json")) {
    const json st = io::read_json(run / "stats.json");
    rep["stats"] = st;
    ctx.out << fmt::format("task {}: excluded {:.2f}%, reprojection {:.3f} +/- {:.3f} px\n", st.value("task", "?"),
                           st.value("mean_excluded_percent", 0.0), st.value("reprojection_mean_px", 0.0),
                           st.value("reprojection_std_px", 0.0));
  }
  const fs::path angles = run / "angles_all.csv";
  if (fs::exists(angles) && !truth.empty() && fs::exists(truth / "angles_all.csv")) {
    const Table est = read_csv(angles), ref = read_csv(truth / "angles_all.csv");
    if (est.rows.size() != ref.rows.size()) {
      throw Error(ErrorCode::invalid_argument, "cli", "run and truth differ in frame count");
    }
    json scores = json::object();
    ctx.out << fmt::format("{:<18} {:>9} {:>9}\n", "angle", "ME deg", "RMSE deg");
    for (std::size_t c = 2; c < ref.header.size(); ++c) {
      const auto& name = ref.header[c];
      const auto ce = est.column(name);
      if (!ce || name == "residual" || name == "converged") continue;
      double abs_sum = 0.0, sq_sum = 0.0;
      for (std::size_t i = 0; i < ref.rows.size(); ++i) {
        const double e = est.rows[i][*ce] - ref.rows[i][c];
        abs_sum += std::abs(e);
        sq_sum += e * e;
      }
      const double n = static_cast<double>(ref.rows.size());
      scores[name] = {{"me_deg", abs_sum / n}, {"rmse_deg", std::sqrt(sq_sum / n)}};
      ctx.out << fmt::format("{:<18} {:>9.3f} {:>9.3f}\n", name, abs_sum / n, std::sqrt(sq_sum / n));
    }
    rep["angles"] = scores;
  }
  if (fs::exists(run / "anthro.json") && !truth.empty() && fs::exists(truth / "anthro.json")) {
    const json est = io::read_json(run / "anthro.json"), ref = io::read_json(truth / "anthro.json");
    json scores = json::object();
    for (const auto& [code, v] : ref["values"].items()) {
      if (!est["measurements"].contains(code)) continue;
      const double e = est["measurements"][code]["value"].get<double>();
      const double t = v.get<double>();
      scores[code] = {{"estimate", e}, {"truth", t}, {"relative_error", (e - t) / t}};
      ctx.out << fmt::format("{} {:>10.4f} {:>10.4f} {:>+7.2f}%\n", code, e, t, 100.0 * (e - t) / t);
    }
    rep["anthro"] = scores;
  }
  io::write_json(run / "report.json", rep);
  ctx.out << "wrote " << (run / "report.json").generic_string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point

/// Parses arguments and runs one subcommand. 0 on success, 1 on data
/// errors, 2 on usage errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Markerless motion capture: calibration, triangulation, augmentation, filtering, IK, anthropometry"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // Shared pipeline flags; std::nullopt keeps the config-file value.
  fs::path config_path;
  std::optional<std::string> gate, augmenter, task;
  std::optional<double> cutoff, rate, conf_min, repro_max, density;
  std::optional<int> order, min_views;
  std::optional<fs::path> out_dir, keypoints, calibration, model, tmpl, mesh, mesh_landmarks, aug_model;
  std::size_t jobs = 1;

  auto shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "pipeline configuration document");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto gate_flags = [&](CLI::App* sub) {
    sub->add_option("--gate", gate, "gate preset: paper-default, validation, custom");
    sub->add_option("--confidence-min", conf_min, "custom gate: minimum keypoint confidence");
    sub->add_option("--reprojection-max", repro_max, "custom gate: maximum reprojection error, px");
    sub->add_option("--min-views", min_views, "custom gate: minimum contributing views");
  };
  auto filter_flags = [&](CLI::App* sub) {
    sub->add_option("--cutoff", cutoff, "low-pass cutoff, Hz (6)");
    sub->add_option("--order", order, "filter order, even (4)");
  };
  auto aug_flags = [&](CLI::App* sub) {
    sub->add_option("--augmenter", augmenter, "baseline or linear");
    sub->add_option("--augmenter-model", aug_model, "model document for --augmenter linear");
  };

  auto* calibrate = app.add_subcommand("calibrate", "resect cameras from 3D-2D correspondences");
  std::vector<std::string> points;
  fs::path points_dir;
  int width = 1920, height = 1080;
  double threshold = kCalibrationThresholdPx;
  calibrate->add_option("--points", points, "CAMERA=FILE correspondence file (repeatable)");
  calibrate->add_option("--points-dir", points_dir, "directory of CAMERA.txt correspondence files");
  calibrate->add_option("--width", width, "image width, px");
  calibrate->add_option("--height", height, "image height, px");
  calibrate->add_option("--threshold", threshold, "audit threshold, px");
  shared(calibrate);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
  std::string synth_task = "walking";
  double duration = 10.0, synth_rate = 30.0;
  synth::NoiseSpec noise;
  synth_cmd->add_option("--task", synth_task, "leaning, bending, squatting, walking, static");
  synth_cmd->add_option("--duration", duration, "seconds")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--rate", synth_rate, "frames per second")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", noise.pixel_sigma, "keypoint pixel noise sigma, px");
  synth_cmd->add_option("--occlusion", noise.occlusion_rate, "occlusion probability per landmark-frame");
  synth_cmd->add_option("--outliers", noise.outlier_rate, "outlier probability per landmark-frame-camera");
  synth_cmd->add_option("--seed", noise.seed, "random seed");
  shared(synth_cmd);

  auto* tri = app.add_subcommand("triangulate", "keypoints + calibration to 3D landmarks");
  tri->add_option("--keypoints", keypoints, "keypoint directory");
  tri->add_option("--calibration", calibration, "calibration document");
  tri->add_option("--rate", rate, "frames per second");
  tri->add_option("--task", task, "label for the statistics document");
  shared(tri);
  gate_flags(tri);

  auto* aug = app.add_subcommand("augment", "landmarks to the 57-marker set");
  fs::path landmarks_in;
  aug->add_option("--landmarks", landmarks_in, "landmark TRC")->required();
  aug->add_option("--template", tmpl, "marker template document");
  shared(aug);
  aug_flags(aug);

  auto* filt = app.add_subcommand("filter", "gap filling and zero-lag Butterworth filtering");
  fs::path filter_in;
  filt->add_option("--in", filter_in, "marker TRC")->required();
  filt->add_option("--rate", rate, "override the TRC data rate");
  shared(filt);
  filter_flags(filt);

  auto* ik = app.add_subcommand("ik", "marker trajectories to joint angles");
  fs::path ik_markers;
  ik->add_option("--markers", ik_markers, "marker TRC")->required();
  ik->add_option("--model", model, "skeleton model document");
  shared(ik);

  auto* anthro = app.add_subcommand("anthro", "measurements from a body mesh");
  anthro->add_option("--mesh", mesh, "mesh (v/f text)");
  anthro->add_option("--mesh-landmarks", mesh_landmarks, "landmark sidecar");
  anthro->add_option("--density", density, "body density, kg/m^3");
  shared(anthro);

  auto* pipe = app.add_subcommand("pipeline", "full chain: triangulate, augment, filter, IK, anthropometry");
  pipe->add_option("--keypoints", keypoints, "keypoint directory");
  pipe->add_option("--calibration", calibration, "calibration document");
  pipe->add_option("--model", model, "skeleton model document");
  pipe->add_option("--template", tmpl, "marker template document");
  pipe->add_option("--mesh", mesh, "mesh (v/f text)");
  pipe->add_option("--mesh-landmarks", mesh_landmarks, "landmark sidecar");
  pipe->add_option("--rate", rate, "frames per second");
  pipe->add_option("--task", task, "task label");
  pipe->add_option("--density", density, "body density, kg/m^3");
  shared(pipe);
  gate_flags(pipe);
  filter_flags(pipe);
  aug_flags(pipe);

  auto* report = app.add_subcommand("report", "summarise a run, optionally against synth truth");
  fs::path run_dir, truth_dir;
  report->add_option("--run", run_dir, "run directory")->required();
  report->add_option("--truth", truth_dir, "synth truth directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineSettings s;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw UsageError("config not found: " + config_path.string());
      s = settings_from_json(io::read_json(config_path), config_path.parent_path());
    }
    if (keypoints) s.paths.keypoints = *keypoints;
    if (calibration) s.paths.calibration = *calibration;
    if (model) s.paths.model = *model;
    if (tmpl) s.paths.marker_template = *tmpl;
    if (mesh) s.paths.mesh = *mesh;
    if (mesh_landmarks) s.paths.mesh_landmarks = *mesh_landmarks;
    if (gate) {
      s.gate_preset = *gate;
      if (*gate != "custom") s.gates = gate_preset(*gate);
    }
    if (conf_min || repro_max || min_views) s.gate_preset = "custom";
    if (conf_min) s.gates.confidence_min = *conf_min;
    if (repro_max) s.gates.reprojection_max = *repro_max;
    if (min_views) s.gates.min_views = *min_views;
    if (cutoff) s.filter.cutoff_hz = *cutoff;
    if (order) s.filter.order = *order;
    if (rate) s.rate = *rate;
    if (augmenter) s.augmenter = *augmenter;
    if (aug_model) s.augmenter_model = *aug_model;
    if (density) s.density = *density;
    if (task) s.task = *task;
    if (out_dir) s.out = *out_dir;

    const Context ctx{out, jobs};
    if (*calibrate) return cmd_calibrate(ctx, points, points_dir, width, height, threshold, s.out);
    if (*synth_cmd) return cmd_synth(ctx, synth_task, duration, synth_rate, noise, s.out);
    if (*tri) return cmd_triangulate(ctx, s);
    if (*aug) return cmd_augment(ctx, s, landmarks_in);
    if (*filt) return cmd_filter(ctx, s, filter_in, rate);
    if (*ik) return cmd_ik(ctx, s, ik_markers);
    if (*anthro) return cmd_anthro(ctx, s);
    if (*pipe) return cmd_pipeline(ctx, s);
    if (*report) return cmd_report(ctx, run_dir, truth_dir);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mocap::cli
