#pragma once

#include <string>
#include <vector>

#include "mocap/augment.hpp"
#include "mocap/filt.hpp"
#include "mocap/io.hpp"
#include "mocap/kin.hpp"
#include "mocap/parallel.hpp"
#include "mocap/triang.hpp"

namespace mocap {

struct PipelineConfig {
  GateConfig gates = GateConfig::paper_default();
  FilterSpec filter;
  IkOptions ik;
  IkWeights weights;
  double rate = 30.0;
  std::size_t jobs = 1;
  std::string task = "custom";
};

struct PipelineResult {
  std::vector<FrameResult> triangulated;
  ExclusionSummary stats;
  TrajectorySet landmarks;  // gap-filled, masks cleared
  TrajectorySet markers;    // augmented, before filtering
  TrajectorySet filtered;
  JointAngleSeries angles;
};

/// Fills interior and edge gaps of every landmark that was seen at least
/// once and clears their masks. Landmarks never seen stay all-gap.
inline TrajectorySet fill_landmarks(const TrajectorySet& landmarks, std::size_t jobs = 1) {
  TrajectorySet out = landmarks;
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    if (out[i].gap_count() == out[i].size()) return;
    out[i] = fill_gaps(out[i]);
    std::fill(out[i].gaps.begin(), out[i].gaps.end(), false);
  });
  return out;
}

/// Filters every marker that has at least one sample; empty markers pass
/// through and are ignored by the solver.
inline TrajectorySet filter_available(const TrajectorySet& markers, const FilterSpec& spec, std::size_t jobs = 1) {
  TrajectorySet seen;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (markers[i].gap_count() < markers[i].size()) {
      seen.push_back(markers[i]);
      where.push_back(i);
    }
  }
  TrajectorySet out = markers;
  const TrajectorySet filtered = filter_set(seen, spec, jobs);
  for (std::size_t k = 0; k < where.size(); ++k) out[where[k]] = filtered[k];
  return out;
}

/// Keypoints to joint angles: triangulate, fill landmark gaps, augment to
/// the dense marker set, filter, solve.
inline PipelineResult run_pipeline(const std::vector<CameraStream>& streams, const std::vector<CameraModel>& rig,
                                   const SkeletonModel& model, const MarkerSetTemplate& tmpl, const Augmenter& augmenter,
                                   const PipelineConfig& config) {
  PipelineResult r;
  r.triangulated = triangulate_sequence(streams, rig, config.gates, config.jobs);
  r.stats = exclusion_stats(r.triangulated, config.task);
  r.landmarks = fill_landmarks(io::landmark_trajectories(r.triangulated, config.rate), config.jobs);
  r.markers = augment(r.landmarks, augmenter, tmpl, config.jobs);
  r.filtered = filter_available(r.markers, config.filter, config.jobs);
  r.angles = solve_sequence(model, config.weights, r.filtered, config.ik);
  return r;
}

}  // namespace mocap
