#include <doctest.h>

#include <random>

#include "mocap/filt.hpp"
#include "mocap/kin.hpp"
#include "mocap/synth.hpp"
#include "support.hpp"

using namespace mocap;
using doctest::Approx;

namespace {

Eigen::VectorXd random_pose(const SkeletonModel& m, std::mt19937_64& rng, double shrink = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd q(m.dof());
  for (std::size_t i = 0; i < m.dof(); ++i) {
    const auto& c = m.coordinates()[i];
    double lo = c.rotational ? c.lower : -1.0, hi = c.rotational ? c.upper : 1.0;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo) * shrink;
    q(static_cast<Eigen::Index>(i)) = mid - half + 2.0 * half * u(rng);
  }
  return q;
}

MarkerObservation exact(const SkeletonModel& m, const Eigen::VectorXd& q) {
  const auto x = forward_kinematics(m, q);
  return {x.begin(), x.end()};
}

MarkerObservation noisy(const SkeletonModel& m, const Eigen::VectorXd& q, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  auto obs = exact(m, q);
  for (auto& o : obs) *o += Vec3(g(rng), g(rng), g(rng));
  return obs;
}

// Weld root at the origin, one hinge about z, one marker a unit length out.
SkeletonModel single_hinge() {
  SkeletonModel m;
  m.add_segment({"base", -1, Vec3::Zero(), JointType::weld, {}}, {});
  m.add_segment({"link", 0, Vec3::Zero(), JointType::hinge, {Vec3::UnitZ()}}, {{"swing", -kPi, kPi, true}});
  m.add_marker_neutral("tip", "link", Vec3(1, 0, 0));
  m.add_marker_neutral("anchor", "base", Vec3(0, 0, 0));
  return m;
}

std::size_t coord(const SkeletonModel& m, const std::string& name) { return *m.coordinate_index(name); }

}  // namespace

TEST_CASE("forward kinematics at zero reproduces the neutral markers") {
  const auto m = synth::marker_model();
  const auto spec = synth::biomech57();
  const auto x = forward_kinematics(m, m.neutral());
  REQUIRE(x.size() == spec.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK((x[i] - spec[i].neutral).norm() < 1e-9);
}

TEST_CASE("root translation shifts every marker") {
  const auto m = synth::marker_model();
  Eigen::VectorXd q = m.neutral();
  q(static_cast<Eigen::Index>(coord(m, "pelvis_tx"))) = 1.0;
  const auto a = forward_kinematics(m, m.neutral());
  const auto b = forward_kinematics(m, q);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((b[i] - a[i] - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("quarter turn of a hinge") {
  const auto m = single_hinge();
  m.validate();
  Eigen::VectorXd q(1);
  q << kPi / 2;
  const auto x = forward_kinematics_named(m, q);
  CHECK((x.at("tip") - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(x.at("anchor").norm() < 1e-12);
}

TEST_CASE("out-of-bounds coordinates are clamped") {
  const auto m = single_hinge();
  Eigen::VectorXd q(1);
  q << 4.0;
  bool changed = false;
  CHECK(m.clamped(q, &changed)(0) == Approx(kPi));
  CHECK(changed);
}

TEST_CASE("model validation") {
  SkeletonModel m;
  CHECK_THROWS_AS(m.validate(), Error);
  CHECK_THROWS_AS(m.add_segment({"orphan", 3, Vec3::Zero(), JointType::weld, {}}, {}), Error);
  m.add_segment({"base", -1, Vec3::Zero(), JointType::weld, {}}, {});
  CHECK_THROWS_AS(m.add_segment({"link", 0, Vec3::Zero(), JointType::hinge, {Vec3::UnitZ()}}, {}), Error);
  m.add_segment({"skew", 0, Vec3::Zero(), JointType::ball, {Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitZ()}},
                {{"a", -1, 1, true}, {"b", -1, 1, true}, {"c", -1, 1, true}});
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("analytic and central-difference jacobians agree") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd q = random_pose(m, rng, 0.9);
    const Eigen::MatrixXd a = marker_jacobian(m, q);
    const Eigen::MatrixXd n = marker_jacobian_numeric(m, q);
    CHECK((a - n).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("round trip over random in-bounds poses") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(7);
  double worst = 0.0, worst_residual = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = random_pose(m, rng);
    const auto r = solve_frame(m, IkWeights{}, exact(m, q), m.neutral());
    worst = std::max(worst, (r.q - q).cwiseAbs().maxCoeff());
    worst_residual = std::max(worst_residual, r.residual);
  }
  CHECK(worst < 1e-6);
  CHECK(worst_residual < 1e-9);
}

TEST_CASE("both jacobian modes reach the same solution") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(11);
  const Eigen::VectorXd q = random_pose(m, rng, 0.8);
  const auto obs = noisy(m, q, 0.003, rng);
  IkOptions numeric;
  numeric.jacobian = JacobianMode::central_difference;
  const auto a = solve_frame(m, IkWeights{}, obs, m.neutral());
  const auto b = solve_frame(m, IkWeights{}, obs, m.neutral(), numeric);
  CHECK((a.q - b.q).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("two observed markers are unobservable") {
  const auto m = synth::marker_model();
  MarkerObservation obs = exact(m, m.neutral());
  for (std::size_t i = 2; i < obs.size(); ++i) obs[i].reset();
  try {
    solve_frame(m, IkWeights{}, obs, m.neutral());
    FAIL("expected Unobservable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unobservable);
  }
}

TEST_CASE("zero weights count as gaps") {
  const auto m = synth::marker_model();
  IkWeights w;
  w.default_weight = 0.0;
  CHECK_THROWS_AS(solve_frame(m, w, exact(m, m.neutral()), m.neutral()), Error);
  MarkerObservation wrong(3);
  CHECK_THROWS_AS(solve_frame(m, IkWeights{}, wrong, m.neutral()), Error);
}

TEST_CASE("3 mm marker noise keeps angles within a degree RMS") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(19);
  const double sigma = 0.003;
  const int trials = 60;
  std::vector<double> sq(m.angles().size(), 0.0);
  double mean_residual = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd q = random_pose(m, rng, 0.6);
    const auto r = solve_frame(m, IkWeights{}, noisy(m, q, sigma, rng), m.neutral());
    CHECK(r.converged);
    const auto truth = joint_angles(q, m), got = joint_angles(r.q, m);
    for (std::size_t a = 0; a < truth.size(); ++a) sq[a] += std::pow(truth[a] - got[a], 2);
    mean_residual += r.residual / trials;
  }
  // Per-marker RMS of 3D noise is sigma*sqrt(3), less the share the 30
  // coordinates absorb out of 171 residual components.
  const double expected = sigma * std::sqrt(3.0 * (171.0 - 30.0) / 171.0);
  CHECK(mean_residual == Approx(expected).epsilon(0.05));
  for (std::size_t a = 0; a < sq.size(); ++a) {
    const double rms = std::sqrt(sq[a] / trials);
    INFO(m.angles()[a].name << " rms " << rms);
    CHECK(rms < 1.0);
  }
}

TEST_CASE("scaling all weights leaves the argmin unchanged") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(23);
  const Eigen::VectorXd q = random_pose(m, rng, 0.6);
  const auto obs = noisy(m, q, 0.004, rng);
  IkWeights base;
  for (std::size_t i = 0; i < m.markers().size(); i += 3) base.w[m.markers()[i].name] = 2.5;
  IkWeights scaled = base;
  scaled.default_weight *= 7.0;
  for (auto& [name, w] : scaled.w) w *= 7.0;
  const auto a = solve_frame(m, base, obs, m.neutral());
  const auto b = solve_frame(m, scaled, obs, m.neutral());
  CHECK((a.q - b.q).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(b.objective == Approx(7.0 * a.objective).epsilon(1e-8));
  CHECK(b.residual == Approx(a.residual).epsilon(1e-8));
}

TEST_CASE("rigid motion of the markers only moves the root") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(29);
  const Eigen::VectorXd q = random_pose(m, rng, 0.5);
  const auto obs = noisy(m, q, 0.002, rng);
  const Mat3 rot = (Eigen::AngleAxisd(0.4, Vec3::UnitZ()) * Eigen::AngleAxisd(0.15, Vec3(1, 1, 0).normalized())).toRotationMatrix();
  const Vec3 shift(0.3, -0.2, 0.05);
  MarkerObservation moved = obs;
  for (auto& o : moved) *o = rot * *o + shift;
  const auto a = solve_frame(m, IkWeights{}, obs, m.neutral());
  const auto b = solve_frame(m, IkWeights{}, moved, m.neutral());
  const std::size_t root = m.segments().front().coordinate_count();
  CHECK((a.q.tail(m.dof() - root) - b.q.tail(m.dof() - root)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(a.residual == Approx(b.residual).epsilon(1e-6));
}

TEST_CASE("objective never increases between iterations") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(31);
  IkOptions opt;
  opt.record_objective = true;
  opt.initialize_from_markers = false;
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd q = random_pose(m, rng, 0.5);
    const auto r = solve_frame(m, IkWeights{}, noisy(m, q, 0.005, rng), m.neutral(), opt);
    REQUIRE(r.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  }
}

TEST_CASE("iteration cap returns the best iterate flagged") {
  const auto m = synth::marker_model();
  std::mt19937_64 rng(37);
  const Eigen::VectorXd q = random_pose(m, rng, 0.5);
  IkOptions opt;
  opt.max_iterations = 1;
  opt.initialize_from_markers = false;
  const auto r = solve_frame(m, IkWeights{}, exact(m, q), m.neutral(), opt);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.residual > 0.0);
}

TEST_CASE("named joint angles") {
  const auto m = synth::marker_model();
  for (double a : joint_angles(m.neutral(), m)) CHECK(a == 0.0);

  Eigen::VectorXd q = m.neutral();
  q(static_cast<Eigen::Index>(coord(m, "knee_angle_r"))) = kPi / 2;
  q(static_cast<Eigen::Index>(coord(m, "hip_flexion_l"))) = rad(60);
  const auto angles = joint_angles(q, m);
  const auto idx = [&](const std::string& name) {
    for (std::size_t i = 0; i < m.angles().size(); ++i) {
      if (m.angles()[i].name == name) return i;
    }
    return m.angles().size();
  };
  CHECK(angles[idx("knee_angle_r")] == Approx(90.0).epsilon(1e-12));
  CHECK(std::abs(angles[idx("hip_flexion_l")] - 60.0) < 1e-6);
  CHECK(angles[idx("hip_flexion_r")] == 0.0);

  // Recovered from markers of the same pose.
  const auto r = solve_frame(m, IkWeights{}, exact(m, q), m.neutral());
  CHECK(std::abs(joint_angles(r.q, m)[idx("hip_flexion_l")] - 60.0) < 1e-6);
}

TEST_CASE("static sequence gives constant angles") {
  const auto m = synth::marker_model();
  const auto b = synth::generate(synth::script(synth::Task::static_pose, 1.0), synth::paper_rig(), {});
  const auto series = solve_sequence(m, IkWeights{}, b.markers);
  REQUIRE(series.values.size() == 30);
  CHECK(series.frames == b.frames);
  const auto truth = joint_angles(b.q.front(), m);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    CHECK(series.converged[i]);
    CHECK(series.residual[i] >= 0.0);
    for (std::size_t a = 0; a < truth.size(); ++a) CHECK(series.values[i][a] == Approx(truth[a]).epsilon(1e-9));
  }
}

TEST_CASE("squat script recovered within 2 degrees RMS after filtering") {
  const auto m = synth::marker_model();
  const auto b = synth::generate(synth::script(synth::Task::squatting, 10.0), synth::paper_rig(), {});
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 0.005);
  TrajectorySet markers = b.markers;
  for (auto& t : markers) {
    for (auto& p : t.positions) p += Vec3(g(rng), g(rng), g(rng));
  }
  const auto series = solve_sequence(m, IkWeights{}, filter_set(markers, FilterSpec{}));
  const auto truth = b.truth_angles();
  for (const char* name : {"hip_flexion_r", "knee_angle_r", "elbow_flexion_r", "hip_flexion_l", "knee_angle_l", "elbow_flexion_l"}) {
    const std::size_t a = series.column(name);
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sq += std::pow(series.values[i][a] - truth[i][a], 2);
    const double rms = std::sqrt(sq / static_cast<double>(truth.size()));
    INFO(name << " rms " << rms);
    CHECK(rms < 2.0);
  }
}

TEST_CASE("solve_sequence input checks") {
  const auto m = synth::marker_model();
  CHECK_THROWS_AS(solve_sequence(m, IkWeights{}, TrajectorySet{}), Error);
  auto b = synth::generate(synth::script(synth::Task::static_pose, 0.5), synth::paper_rig(), {});
  b.markers[3].frames.pop_back();
  b.markers[3].positions.pop_back();
  b.markers[3].gaps.pop_back();
  CHECK_THROWS_AS(solve_sequence(m, IkWeights{}, b.markers), Error);
}
