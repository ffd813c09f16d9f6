// Core domain types shared by every module: planning clock, observations,
// kernel hyperparameters, workspace bounds.
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigp {

using Vec2 = Eigen::Vector2d;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Discrete planning clock: the prediction window is the `horizon` steps
/// strictly after `t_now`, spaced `dt` seconds apart.
struct TimeGrid {
  int t_now = 0;
  int horizon = 1;
  double dt = 0.1;

  void validate() const {
    if (horizon < 1) throw Error("TimeGrid: horizon must be >= 1");
    if (!(dt > 0.0)) throw Error("TimeGrid: dt must be > 0");
  }
  int first_step() const { return t_now + 1; }
  int last_step() const { return t_now + horizon; }
  double time_of(int step) const { return step * dt; }
  std::vector<int> horizon_steps() const {
    std::vector<int> s(static_cast<std::size_t>(horizon));
    for (int i = 0; i < horizon; ++i) s[static_cast<std::size_t>(i)] = t_now + 1 + i;
    return s;
  }
};

struct Observation {
  int step = 0;
  Vec2 pos = Vec2::Zero();
};

/// Timestamped 2-D position measurements for one agent. Steps are strictly
/// increasing; gaps are allowed and handled downstream by conditioning only
/// on the steps that are present.
struct TrajectoryObservations {
  std::string agent_id;
  std::vector<Observation> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }

  void append(int step, const Vec2& pos) {
    if (!samples.empty() && step <= samples.back().step)
      throw Error("TrajectoryObservations: steps must be strictly increasing (agent " +
                  agent_id + ")");
    samples.push_back({step, pos});
  }

  const Observation& latest() const {
    if (samples.empty()) throw Error("TrajectoryObservations: no samples (agent " + agent_id + ")");
    return samples.back();
  }

  /// Last `max_count` samples (all of them if max_count == 0).
  TrajectoryObservations tail(std::size_t max_count) const {
    if (max_count == 0 || samples.size() <= max_count) return *this;
    TrajectoryObservations out;
    out.agent_id = agent_id;
    out.samples.assign(samples.end() - static_cast<std::ptrdiff_t>(max_count), samples.end());
    return out;
  }

  void validate() const {
    for (std::size_t i = 1; i < samples.size(); ++i)
      if (samples[i].step <= samples[i - 1].step)
        throw Error("TrajectoryObservations: steps must be strictly increasing (agent " +
                    agent_id + ")");
  }
};

/// Squared-exponential kernel plus observation noise. Hyperparameters are
/// fixed per scenario, never learned.
struct KernelSpec {
  double signal_variance = 1.0;  // m^2
  double length_scale = 1.0;     // s
  double noise_variance = 1e-4;  // m^2

  void validate() const {
    if (!(signal_variance > 0.0)) throw Error("KernelSpec: signal_variance must be > 0");
    if (!(length_scale > 0.0)) throw Error("KernelSpec: length_scale must be > 0");
    if (!(noise_variance > 0.0)) throw Error("KernelSpec: noise_variance must be > 0");
  }

  double operator()(double t1, double t2) const {
    const double d = (t1 - t2) / length_scale;
    return signal_variance * std::exp(-0.5 * d * d);
  }
};

/// Axis-aligned workspace bounds.
struct Rect {
  double xmin = -50.0, xmax = 50.0, ymin = -50.0, ymax = 50.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x() >= xmin - margin && p.x() <= xmax + margin && p.y() >= ymin - margin &&
           p.y() <= ymax + margin;
  }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x(), xmin, xmax), std::clamp(p.y(), ymin, ymax)};
  }
  void validate() const {
    if (!(xmax > xmin) || !(ymax > ymin)) throw Error("Rect: empty workspace");
  }
};

inline double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log(1 - exp(x)) for x <= 0, stable near both ends; returns -inf at x == 0.
inline double log1mexp(double x) {
  if (x >= 0.0) return -std::numeric_limits<double>::infinity();
  if (x > -0.6931471805599453)  // -ln 2
    return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

}  // namespace sigp
