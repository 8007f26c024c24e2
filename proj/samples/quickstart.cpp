// Generate a short synthetic squat seen by four cameras, run the full
// markerless pipeline on the 2D keypoints, and compare knee angles with truth.

#include <fmt/core.h>

#include "mocap/mocap.hpp"

int main() {
  using namespace mocap;

  synth::NoiseSpec noise;
  noise.pixel_sigma = 1.0;
  noise.occlusion_rate = 0.1;
  noise.seed = 42;
  const auto b = synth::generate(synth::script(synth::Task::squatting, 4.0), synth::paper_rig(), noise);

  PipelineConfig config;
  config.task = b.task;
  config.rate = b.rate;
  const auto r = run_pipeline(b.streams, b.rig.cameras, b.model, b.marker_template, Augmenter::baseline(), config);

  fmt::print("{} frames, {:.1f}% of landmarks excluded, reprojection {:.2f} px\n", r.stats.frames,
             r.stats.excluded_percent, r.stats.reprojection_mean_px);

  const auto truth = b.truth_angles();
  const std::size_t knee = r.angles.column("knee_angle_r");
  fmt::print("{:>6} {:>10} {:>10}\n", "frame", "knee_r", "truth");
  for (std::size_t i = 0; i < r.angles.values.size(); i += 15) {
    fmt::print("{:>6} {:>10.2f} {:>10.2f}\n", r.angles.frames[i], r.angles.values[i][knee], truth[i][knee]);
  }
  return 0;
}
