#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mocap/parallel.hpp"
#include "mocap/types.hpp"

namespace mocap {

/// Time-indexed 3D positions of one marker. Samples flagged in `gaps` were
/// excluded or missing; their positions are meaningless until filled.
struct MarkerTrajectory {
  std::string marker_id;
  std::vector<int> frames;
  std::vector<Vec3> positions;
  std::vector<bool> gaps;
  double rate = 30.0;

  std::size_t size() const { return frames.size(); }

  std::size_t gap_count() const { return static_cast<std::size_t>(std::count(gaps.begin(), gaps.end(), true)); }

  void validate() const {
    if (positions.size() != frames.size() || gaps.size() != frames.size()) {
      throw Error(ErrorCode::invalid_argument, "filt", "trajectory " + marker_id + ": ragged sample arrays");
    }
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i] <= frames[i - 1]) {
        throw Error(ErrorCode::invalid_argument, "filt", "trajectory " + marker_id + ": frames not increasing");
      }
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!gaps[i] && !positions[i].allFinite()) {
        throw Error(ErrorCode::invalid_argument, "filt", "trajectory " + marker_id + ": non-finite sample");
      }
    }
    if (!(rate > 0.0)) throw Error(ErrorCode::invalid_argument, "filt", "trajectory " + marker_id + ": bad rate");
  }
};

using TrajectorySet = std::vector<MarkerTrajectory>;

struct FilterSpec {
  int order = 4;
  double cutoff_hz = 6.0;

  void validate(double rate) const {
    if (order != 2 && order != 4 && order != 6 && order != 8) {
      throw Error(ErrorCode::invalid_argument, "filt", fmt::format("filter order {} not in {{2, 4, 6, 8}}", order));
    }
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate / 2.0)) {
      throw Error(ErrorCode::nyquist_violation, "filt",
                  fmt::format("cutoff {} Hz must lie in (0, {}) for rate {} Hz", cutoff_hz, rate / 2.0, rate));
    }
  }
};

// ---------------------------------------------------------------------------
// Gap filling

/// Natural cubic spline through (x[i], y[i]), x strictly increasing.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Tridiagonal system for the interior second derivatives.
    std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double lower = x_[i] - x_[i - 1];
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
      if (i == 1) break;
    }
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    if (n == 1) return y_[0];
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    k = std::min(k, n - 2);
    const double h = x_[k + 1] - x_[k];
    const double a = (x_[k + 1] - t) / h, b = (t - x_[k]) / h;
    return a * y_[k] + b * y_[k + 1] + ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

/// Interior gaps are interpolated with a natural cubic spline through the
/// valid samples; leading and trailing gaps hold the nearest valid value.
/// The gap mask is left untouched.
inline MarkerTrajectory fill_gaps(const MarkerTrajectory& traj) {
  traj.validate();
  std::vector<double> t;
  std::array<std::vector<double>, 3> coord;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.gaps[i]) continue;
    t.push_back(traj.frames[i]);
    for (int c = 0; c < 3; ++c) coord[c].push_back(traj.positions[i][c]);
  }
  if (t.empty()) throw Error(ErrorCode::all_gaps, "filt", "trajectory " + traj.marker_id + " has no valid samples");
  MarkerTrajectory out = traj;
  if (t.size() == traj.size()) return out;

  const NaturalCubicSpline sx(t, coord[0]), sy(t, coord[1]), sz(t, coord[2]);
  const double first = t.front(), last = t.back();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (!traj.gaps[i]) continue;
    const double f = std::clamp(static_cast<double>(traj.frames[i]), first, last);
    out.positions[i] = Vec3(sx(f), sy(f), sz(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Butterworth low-pass

/// One biquad of a cascaded Butterworth low-pass.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Digital Butterworth low-pass as second-order sections, obtained from the
/// analog prototype by the bilinear transform pre-warped at the cutoff.
inline std::vector<Biquad> butterworth_sections(int order, double cutoff_hz, double rate) {
  const double k = std::tan(kPi * cutoff_hz / rate);
  std::vector<Biquad> sections;
  for (int i = 1; i <= order / 2; ++i) {
    const double damping = 2.0 * std::sin((2.0 * i - 1.0) * kPi / (2.0 * order));
    const double norm = 1.0 / (1.0 + damping * k + k * k);
    Biquad s{};
    s.b0 = k * k * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (k * k - 1.0) * norm;
    s.a2 = (1.0 - damping * k + k * k) * norm;
    sections.push_back(s);
  }
  return sections;
}

/// Squared magnitude of the digital design above at frequency f.
inline double butterworth_gain_squared(int order, double cutoff_hz, double rate, double f) {
  const double ratio = std::tan(kPi * f / rate) / std::tan(kPi * cutoff_hz / rate);
  return 1.0 / (1.0 + std::pow(ratio, 2 * order));
}

namespace detail {

// Causal pass; every section starts in the steady state of its first input.
inline void run_sections(const std::vector<Biquad>& sections, std::vector<double>& x) {
  for (const auto& s : sections) {
    double x1 = x.front(), x2 = x.front(), y1 = x.front(), y2 = x.front();
    for (double& v : x) {
      const double y = s.b0 * v + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
}

inline std::vector<double> forward_backward(const std::vector<Biquad>& sections, std::vector<double> x,
                                            bool forward_first) {
  if (!forward_first) std::reverse(x.begin(), x.end());
  run_sections(sections, x);
  std::reverse(x.begin(), x.end());
  run_sections(sections, x);
  if (forward_first) std::reverse(x.begin(), x.end());
  return x;
}

}  // namespace detail

/// Zero-phase filtering of one channel. The signal is extended at both ends by
/// odd reflection of length `pad`, filtered forward-backward, and averaged with
/// the backward-forward pass so that edge transients are symmetric in time.
inline std::vector<double> zero_phase_filter(const std::vector<double>& signal, const std::vector<Biquad>& sections,
                                             std::size_t pad) {
  const std::size_t n = signal.size();
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * signal.front() - signal[i]);
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * signal.back() - signal[n - 1 - i]);

  const auto fb = detail::forward_backward(sections, ext, true);
  const auto bf = detail::forward_backward(sections, ext, false);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (fb[pad + i] + bf[pad + i]);
  return out;
}

inline MarkerTrajectory butterworth(const MarkerTrajectory& traj, const FilterSpec& spec) {
  traj.validate();
  spec.validate(traj.rate);
  const auto needed = static_cast<std::size_t>(3 * spec.order);
  if (traj.size() < needed) {
    throw Error(ErrorCode::too_short, "filt",
                fmt::format("trajectory {} has {} samples, needs {}", traj.marker_id, traj.size(), needed));
  }
  for (const auto& p : traj.positions) {
    if (!p.allFinite()) {
      throw Error(ErrorCode::invalid_argument, "filt", "trajectory " + traj.marker_id + " has unfilled gaps");
    }
  }
  const auto sections = butterworth_sections(spec.order, spec.cutoff_hz, traj.rate);
  MarkerTrajectory out = traj;
  std::vector<double> channel(traj.size());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < traj.size(); ++i) channel[i] = traj.positions[i][c];
    const auto filtered = zero_phase_filter(channel, sections, needed);
    for (std::size_t i = 0; i < traj.size(); ++i) out.positions[i][c] = filtered[i];
  }
  return out;
}

/// Gap filling followed by zero-phase filtering for every marker. Errors are
/// re-raised with the offending marker named.
inline TrajectorySet filter_set(const TrajectorySet& trajs, const FilterSpec& spec, std::size_t jobs = 1) {
  TrajectorySet out(trajs.size());
  parallel_for(trajs.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = butterworth(fill_gaps(trajs[i]), spec);
    } catch (const Error& e) {
      throw Error(e.code(), "filt", "marker '" + trajs[i].marker_id + "': " + e.what());
    }
  });
  return out;
}

}  // namespace mocap
