// Gaussian process regression over agent trajectories: conditioning on sparse
// observations, horizon prediction, and data-likelihood weights for mixture
// components. Spatial coordinates are two independent GPs sharing one kernel,
// so the per-coordinate covariance is stored once per component.
#pragma once

#include "sigp/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace sigp {

/// One mixture component. The support is a strictly increasing list of step
/// indices whose trailing `horizon` entries form the prediction window; the
/// leading entries are the (observed) past, kept so data likelihoods can be
/// evaluated against the component. The effective per-coordinate covariance
/// is cov_scale * base_cov, which lets sampled components share one matrix.
struct GpComponent {
  std::vector<int> steps;
  int horizon = 0;
  Eigen::VectorXd mean_x, mean_y;
  std::shared_ptr<const Eigen::MatrixXd> base_cov;
  double cov_scale = 1.0;
  double log_weight = 0.0;

  int support_size() const { return static_cast<int>(steps.size()); }
  int horizon_offset() const { return support_size() - horizon; }

  /// Index of `step` within the support, or -1 when absent.
  int index_of_step(int step) const {
    auto it = std::lower_bound(steps.begin(), steps.end(), step);
    if (it == steps.end() || *it != step) return -1;
    return static_cast<int>(it - steps.begin());
  }

  Vec2 mean_at(int idx) const { return {mean_x(idx), mean_y(idx)}; }

  Eigen::MatrixXd cov() const { return cov_scale * (*base_cov); }

  Eigen::MatrixXd horizon_cov() const {
    const int o = horizon_offset();
    return cov_scale * base_cov->block(o, o, horizon, horizon);
  }
  Eigen::VectorXd horizon_mean_x() const { return mean_x.tail(horizon); }
  Eigen::VectorXd horizon_mean_y() const { return mean_y.tail(horizon); }
  Vec2 horizon_point(int i) const {
    const int o = horizon_offset();
    return {mean_x(o + i), mean_y(o + i)};
  }
  std::vector<Vec2> horizon_path() const {
    std::vector<Vec2> p(static_cast<std::size_t>(horizon));
    for (int i = 0; i < horizon; ++i) p[static_cast<std::size_t>(i)] = horizon_point(i);
    return p;
  }

  void validate() const {
    if (steps.empty()) throw Error("GpComponent: empty support");
    if (horizon < 1 || horizon > support_size()) throw Error("GpComponent: bad horizon");
    for (std::size_t i = 1; i < steps.size(); ++i)
      if (steps[i] <= steps[i - 1]) throw Error("GpComponent: support not increasing");
    if (mean_x.size() != support_size() || mean_y.size() != support_size())
      throw Error("GpComponent: mean size mismatch");
    if (!base_cov || base_cov->rows() != support_size() || base_cov->cols() != support_size())
      throw Error("GpComponent: covariance size mismatch");
    if (!(cov_scale > 0.0)) throw Error("GpComponent: cov_scale must be > 0");
    if (!mean_x.allFinite() || !mean_y.allFinite()) throw Error("GpComponent: non-finite mean");
    if (!std::isfinite(log_weight)) throw Error("GpComponent: non-finite log_weight");
  }
};

struct GpMixture {
  std::string agent_id;
  std::vector<GpComponent> components;
};

namespace detail {

/// Weighted least-squares line a + b*t through (t_i, v_i) with weights w_i.
/// Falls back to the weighted mean (b = 0) when the fit is degenerate.
inline void fit_trend(const std::vector<double>& t, const std::vector<double>& v,
                      const std::vector<double>& w, double& a, double& b) {
  double sw = 0, swt = 0, swtt = 0, swv = 0, swtv = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sw += w[i];
    swt += w[i] * t[i];
    swtt += w[i] * t[i] * t[i];
    swv += w[i] * v[i];
    swtv += w[i] * t[i] * v[i];
  }
  const double det = sw * swtt - swt * swt;
  if (t.size() < 2 || det <= 1e-12 * sw * swtt) {
    a = swv / sw;
    b = 0.0;
    return;
  }
  a = (swtt * swv - swt * swtv) / det;
  b = (sw * swtv - swt * swv) / det;
}

/// log N(z | mean, scale*base[idx,idx] + diag(noise)) summed over both
/// coordinates; `idx` selects support rows of the component.
inline double loglik_at_points(const GpComponent& c, const std::vector<int>& idx,
                               const Eigen::VectorXd& zx, const Eigen::VectorXd& zy,
                               const Eigen::VectorXd& noise) {
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = c.cov_scale * (*c.base_cov)(idx[i], idx[j]);
  s.diagonal() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw Error("log_data_likelihood: covariance at observed steps is not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));

  Eigen::VectorXd rx(n), ry(n);
  for (int i = 0; i < n; ++i) {
    rx(i) = zx(i) - c.mean_x(idx[i]);
    ry(i) = zy(i) - c.mean_y(idx[i]);
  }
  const double qx = llt.matrixL().solve(rx).squaredNorm();
  const double qy = llt.matrixL().solve(ry).squaredNorm();
  const double log2pi = 1.8378770664093454835606594728112353;
  return -0.5 * (2.0 * n * log2pi + 2.0 * logdet + qx + qy);
}

}  // namespace detail

/// Soft belief about an agent's future, treated as data with its own noise:
/// the robot's planning goal, a pedestrian's trend projection.
struct PseudoObservation {
  int step = 0;
  Vec2 pos = Vec2::Zero();
  double noise_var = 1e-2;
};

/// GP posterior over the support (observed steps ∪ {t_now} ∪ horizon steps).
/// The mean function is a weighted linear trend through the data; residuals
/// are conditioned with the squared-exponential kernel. Pseudo-observations
/// participate like measurements but carry their own noise. A small diagonal
/// jitter keeps the posterior covariance factorizable downstream.
inline GpComponent condition(const TrajectoryObservations& obs, const KernelSpec& kernel,
                             const TimeGrid& grid, const std::vector<PseudoObservation>& pseudo) {
  kernel.validate();
  grid.validate();
  obs.validate();
  if (obs.empty()) throw Error("condition: no observations for agent " + obs.agent_id);

  std::vector<int> data_steps;
  std::vector<double> dx, dy, noise;
  data_steps.reserve(obs.size() + pseudo.size());
  for (const auto& s : obs.samples) {
    data_steps.push_back(s.step);
    dx.push_back(s.pos.x());
    dy.push_back(s.pos.y());
    noise.push_back(kernel.noise_variance);
  }
  for (const auto& p : pseudo) {
    if (!(p.noise_var > 0.0)) throw Error("condition: pseudo-observation noise must be > 0");
    if (p.step <= obs.samples.back().step)
      throw Error("condition: pseudo-observation collides with an observation");
    data_steps.push_back(p.step);
    dx.push_back(p.pos.x());
    dy.push_back(p.pos.y());
    noise.push_back(p.noise_var);
  }
  const int nd = static_cast<int>(data_steps.size());

  // Support: observed steps, t_now, then the horizon window, deduplicated.
  std::vector<int> support;
  for (const auto& s : obs.samples) support.push_back(s.step);
  support.push_back(grid.t_now);
  for (int s : grid.horizon_steps()) support.push_back(s);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  const int ns = static_cast<int>(support.size());

  std::vector<double> td(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) td[static_cast<std::size_t>(i)] = grid.time_of(data_steps[i]);

  double ax, bx, ay, by;
  {
    std::vector<double> w(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i) w[static_cast<std::size_t>(i)] = 1.0 / noise[i];
    detail::fit_trend(td, dx, w, ax, bx);
    detail::fit_trend(td, dy, w, ay, by);
  }

  Eigen::MatrixXd kdd(nd, nd);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nd; ++j) kdd(i, j) = kernel(td[i], td[j]);
  kdd.diagonal() += Eigen::Map<const Eigen::VectorXd>(noise.data(), nd);
  Eigen::LLT<Eigen::MatrixXd> llt(kdd);
  if (llt.info() != Eigen::Success)
    throw Error("condition: kernel matrix is not positive definite "
                "(noise too small or coincident timestamps)");

  Eigen::MatrixXd ksd(ns, nd);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nd; ++j) ksd(i, j) = kernel(grid.time_of(support[i]), td[j]);

  Eigen::VectorXd rx(nd), ry(nd);
  for (int i = 0; i < nd; ++i) {
    rx(i) = dx[i] - (ax + bx * td[i]);
    ry(i) = dy[i] - (ay + by * td[i]);
  }

  GpComponent out;
  out.steps = support;
  out.horizon = grid.horizon;
  out.mean_x.resize(ns);
  out.mean_y.resize(ns);
  const Eigen::VectorXd alpha_x = llt.solve(rx);
  const Eigen::VectorXd alpha_y = llt.solve(ry);
  for (int i = 0; i < ns; ++i) {
    const double t = grid.time_of(support[i]);
    out.mean_x(i) = ax + bx * t + ksd.row(i).dot(alpha_x);
    out.mean_y(i) = ay + by * t + ksd.row(i).dot(alpha_y);
  }

  Eigen::MatrixXd kss(ns, ns);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j) kss(i, j) = kernel(grid.time_of(support[i]), grid.time_of(support[j]));
  Eigen::MatrixXd cov = kss - ksd * llt.solve(ksd.transpose());
  cov = 0.5 * (cov + cov.transpose()).eval();
  cov.diagonal().array() += 1e-10 * kernel.signal_variance;

  out.base_cov = std::make_shared<const Eigen::MatrixXd>(std::move(cov));
  out.cov_scale = 1.0;
  out.log_weight = 0.0;
  return out;
}

/// Goal form: the goal is one pseudo-observation at the last horizon step
/// with noise goal_slack * noise_variance.
inline GpComponent condition(const TrajectoryObservations& obs, const KernelSpec& kernel,
                             const TimeGrid& grid, std::optional<Vec2> goal = std::nullopt,
                             double goal_slack = 10.0) {
  std::vector<PseudoObservation> pseudo;
  if (goal) {
    if (!(goal_slack > 0.0)) throw Error("condition: goal_slack must be > 0");
    pseudo.push_back({grid.last_step(), *goal, goal_slack * kernel.noise_variance});
  }
  return condition(obs, kernel, grid, pseudo);
}

/// log N(z | μ at observed steps, Σ at observed steps + σ_n² I), summed over
/// the two coordinates. Every observation step must lie in the component's
/// support.
inline double log_data_likelihood(const GpComponent& c, const TrajectoryObservations& obs,
                                  const KernelSpec& kernel) {
  kernel.validate();
  obs.validate();
  if (obs.empty()) throw Error("log_data_likelihood: no observations");
  const int n = static_cast<int>(obs.size());
  std::vector<int> idx(static_cast<std::size_t>(n));
  Eigen::VectorXd zx(n), zy(n);
  for (int i = 0; i < n; ++i) {
    const auto& s = obs.samples[static_cast<std::size_t>(i)];
    const int k = c.index_of_step(s.step);
    if (k < 0)
      throw Error("log_data_likelihood: observation step " + std::to_string(s.step) +
                  " outside component support");
    idx[static_cast<std::size_t>(i)] = k;
    zx(i) = s.pos.x();
    zy(i) = s.pos.y();
  }
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(n, kernel.noise_variance);
  return detail::loglik_at_points(c, idx, zx, zy, noise);
}

/// Density of one pseudo-observation under a component, with slack-widened
/// noise; the pseudo-datum's contribution to a sample's weight.
inline double pseudo_log_density(const GpComponent& c, const PseudoObservation& p) {
  const int idx = c.index_of_step(p.step);
  if (idx < 0) throw Error("pseudo_log_density: step outside component support");
  const double var = c.cov_scale * (*c.base_cov)(idx, idx) + p.noise_var;
  const double log2pi = 1.8378770664093454835606594728112353;
  const double rx = p.pos.x() - c.mean_x(idx);
  const double ry = p.pos.y() - c.mean_y(idx);
  return -0.5 * (2.0 * (log2pi + std::log(var)) + (rx * rx + ry * ry) / var);
}

/// Goal factor of a robot component's weight: the density of the goal under
/// the component at the last horizon step, with slack-widened noise.
inline double goal_log_density(const GpComponent& c, const Vec2& goal, const KernelSpec& kernel,
                               double goal_slack) {
  return pseudo_log_density(c, {c.steps.back(), goal, goal_slack * kernel.noise_variance});
}

/// Shift log-weights so they log-sum-exp to 0. Ordering is preserved.
inline GpMixture normalize_mixture(GpMixture mix) {
  if (mix.components.empty()) throw Error("normalize_mixture: empty mixture");
  std::vector<double> lw;
  lw.reserve(mix.components.size());
  for (const auto& c : mix.components) lw.push_back(c.log_weight);
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw Error("normalize_mixture: all weights are zero");
  for (auto& c : mix.components) c.log_weight -= lse;
  return mix;
}

/// Factor L with L Lᵀ = cov for drawing trajectory samples; eigenvalue-based
/// so positive-semidefinite posteriors (pinned observations) are accepted.
inline Eigen::MatrixXd sampling_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("sampling_factor: eigendecomposition failed");
  Eigen::VectorXd d = es.eigenvalues();
  for (int i = 0; i < d.size(); ++i) d(i) = d(i) > 0.0 ? std::sqrt(d(i)) : 0.0;
  return es.eigenvectors() * d.asDiagonal();
}

}  // namespace sigp
