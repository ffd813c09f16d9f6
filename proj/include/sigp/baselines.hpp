// The three comparison planners: independent (predict-then-act), trajectory
// sampling (SBMP), and convex-lane. Each shares the sIGP conditioning and
// robot sampling streams so cross-planner comparisons at a fixed seed are
// apples to apples.
#pragma once

#include "sigp/geometry.hpp"
#include "sigp/planner.hpp"

#include <functional>
#include <map>
#include <string>

namespace sigp {

/// One convex free-space region of the lane partition.
struct Lane {
  ConvexPolygon polygon;
  Vec2 site = Vec2::Zero();  // the pedestrian the region surrounds
  double width = 0.0;        // largest clearance available inside the lane
  double weight = 0.0;       // clearance-proportional, normalized
};

struct LanePartition {
  std::vector<Lane> lanes;
};

/// Voronoi partition of the workspace around current pedestrian positions,
/// weighted by clearance. With no pedestrians the whole workspace is one
/// lane.
inline LanePartition build_lane_partition(const std::vector<Vec2>& positions, const Rect& rect) {
  rect.validate();
  LanePartition out;
  if (positions.empty()) {
    Lane lane;
    lane.polygon = rect_polygon(rect);
    lane.site = Vec2{0.5 * (rect.xmin + rect.xmax), 0.5 * (rect.ymin + rect.ymax)};
    lane.width = 0.5 * std::min(rect.width(), rect.height());
    lane.weight = 1.0;
    out.lanes.push_back(std::move(lane));
    return out;
  }
  const std::vector<ConvexPolygon> cells = voronoi_cells(positions, rect);
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    Lane lane;
    lane.polygon = cells[i];
    lane.site = positions[i];
    for (const Vec2& v : cells[i].vertices)
      lane.width = std::max(lane.width, (v - positions[i]).norm());
    total += lane.width;
    out.lanes.push_back(std::move(lane));
  }
  for (Lane& lane : out.lanes) lane.weight = total > 0.0 ? lane.width / total : 0.0;
  return out;
}

/// Predict-then-act: humans are frozen at their MAP GPs (weights untouched,
/// never reweighted by interaction) and the robot basis is scored with the
/// decoupled cost
///   log C(ℓ) = log w^R_ℓ + progress_gain · goal_progress(ℓ)
///              + penalty_gain · Σ_i log(Λ/w)(ℓ, i),
/// where Λ/w is the non-collision probability against the frozen prediction.
inline PlanResult independent_plan(const PlanInput& input, const PlannerConfig& cfg) {
  cfg.validate();
  const detail::ConditionedWorld w = detail::condition_world(input, cfg);
  const BasisSet robot_only =
      sample_bases({w.bases[0]}, {&w.windowed[0]}, cfg, {w.pseudo[0]});
  const GpMixture& robot = robot_only.agents[0];
  const std::size_t n_t = input.humans.size();

  PlanResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_l = 0;
  const double d0 = (w.robot_position - w.effective_goal).norm();
  for (std::size_t l = 0; l < robot.components.size(); ++l) {
    const GpComponent& rc = robot.components[l];
    double score = rc.log_weight;
    score += cfg.indep_progress_gain *
             (d0 - (rc.horizon_point(cfg.horizon - 1) - w.effective_goal).norm());
    for (std::size_t i = 0; i < n_t; ++i) {
      const double ratio = collision_prob(rc, w.bases[i + 1]).lambda_ratio();
      score += cfg.indep_penalty_gain * std::log(ratio);
    }
    detail::insert_top(result.top, JointBasis{{l}, score}, cfg.top_k);
    if (score > best) {
      best = score;
      best_l = l;
    }
  }
  if (!std::isfinite(best)) return detail::hold_position(w, cfg, std::move(result));

  result.selected = JointBasis{{best_l}, best};
  const GpComponent& rc = robot.components[best_l];
  result.action = rc.horizon_point(0);
  result.robot_path = rc.horizon_path();
  result.agent_paths.push_back(result.robot_path);
  for (std::size_t i = 0; i < n_t; ++i) result.agent_paths.push_back(w.bases[i + 1].horizon_path());
  return result;
}

/// Sampling-based motion planning: draw whole trajectory tuples from the MAP
/// GPs, reject tuples with a pairwise approach inside collision_radius, rank
/// the survivors by their joint draw log-density, execute the best tuple's
/// robot next step.
inline PlanResult sbmp_plan(const PlanInput& input, const PlannerConfig& cfg) {
  cfg.validate();
  const detail::ConditionedWorld w = detail::condition_world(input, cfg);
  const std::size_t n_agents = w.bases.size();
  const int t = cfg.horizon;
  const double log2pi = 1.8378770664093454835606594728112353;
  const double r2 = cfg.collision_radius * cfg.collision_radius;

  struct AgentSampler {
    Eigen::MatrixXd factor;
    Eigen::VectorXd mx, my;
    double logdet = 0.0;
    Rng rng{0};
  };
  std::vector<AgentSampler> samplers(n_agents);
  for (std::size_t a = 0; a < n_agents; ++a) {
    const Eigen::MatrixXd cov = w.bases[a].horizon_cov();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error("sbmp_plan: eigendecomposition failed");
    Eigen::VectorXd d = es.eigenvalues();
    double logdet = 0.0;
    for (int i = 0; i < t; ++i) {
      d(i) = std::max(d(i), 1e-12);
      logdet += std::log(d(i));
    }
    samplers[a].factor = es.eigenvectors() * d.cwiseSqrt().asDiagonal();
    samplers[a].logdet = logdet;
    samplers[a].mx = w.bases[a].horizon_mean_x();
    samplers[a].my = w.bases[a].horizon_mean_y();
    samplers[a].rng = Rng(derive_seed(cfg.seed, kStreamSbmp, a));
  }

  std::vector<Eigen::VectorXd> xs(n_agents), ys(n_agents);
  Eigen::VectorXd z(t);
  PlanResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_tuple = 0;
  std::vector<Eigen::VectorXd> best_xs, best_ys;

  for (int n = 0; n < cfg.samples_per_agent; ++n) {
    double score = 0.0;
    for (std::size_t a = 0; a < n_agents; ++a) {
      AgentSampler& s = samplers[a];
      for (int i = 0; i < t; ++i) z(i) = s.rng.normal();
      xs[a] = s.mx + s.factor * z;
      score += -0.5 * (t * log2pi + s.logdet + z.squaredNorm());
      for (int i = 0; i < t; ++i) z(i) = s.rng.normal();
      ys[a] = s.my + s.factor * z;
      score += -0.5 * (t * log2pi + s.logdet + z.squaredNorm());
    }
    bool hit = false;
    for (std::size_t i = 1; i < n_agents && !hit; ++i)
      for (int k = 0; k < t && !hit; ++k) {
        const double dx = xs[0](k) - xs[i](k);
        const double dy = ys[0](k) - ys[i](k);
        hit = dx * dx + dy * dy <= r2;
      }
    if (cfg.include_ped_ped)
      for (std::size_t i = 1; i < n_agents && !hit; ++i)
        for (std::size_t j = i + 1; j < n_agents && !hit; ++j)
          for (int k = 0; k < t && !hit; ++k) {
            const double dx = xs[i](k) - xs[j](k);
            const double dy = ys[i](k) - ys[j](k);
            hit = dx * dx + dy * dy <= r2;
          }
    if (hit) continue;

    const std::size_t tuple = static_cast<std::size_t>(n);
    detail::insert_top(result.top, JointBasis{std::vector<std::size_t>(n_agents, tuple), score},
                       cfg.top_k);
    if (score > best) {
      best = score;
      best_tuple = tuple;
      best_xs = xs;
      best_ys = ys;
    }
  }

  if (!std::isfinite(best)) return detail::hold_position(w, cfg, std::move(result));
  result.selected = JointBasis{std::vector<std::size_t>(n_agents, best_tuple), best};
  result.agent_paths.resize(n_agents);
  for (std::size_t a = 0; a < n_agents; ++a) {
    result.agent_paths[a].resize(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i)
      result.agent_paths[a][static_cast<std::size_t>(i)] = Vec2{best_xs[a](i), best_ys[a](i)};
  }
  result.robot_path = result.agent_paths[0];
  result.action = result.robot_path.front();
  return result;
}

/// Convex-lane planning, via the single-time-step restriction: each human is
/// frozen at its current posterior point (mean μ(t_now), covariance
/// Σ(t_now)·I across the horizon) and selection runs the sIGP machinery
/// against those static bubbles. The lane partition gates the planner (no
/// lane wide enough for the robot means a degraded stop) and carries the
/// clearance weights.
inline PlanResult convex_lane_plan(const PlanInput& input, const PlannerConfig& cfg) {
  cfg.validate();
  const detail::ConditionedWorld w = detail::condition_world(input, cfg);
  const std::size_t n_t = input.humans.size();

  std::vector<Vec2> positions;
  positions.reserve(n_t);
  for (std::size_t i = 0; i < n_t; ++i) positions.push_back(w.windowed[i + 1].latest().pos);
  const LanePartition partition = build_lane_partition(positions, input.workspace);
  double widest = 0.0;
  for (const Lane& lane : partition.lanes) widest = std::max(widest, lane.width);
  if (widest < cfg.collision_radius) {
    PlanResult blocked;
    return detail::hold_position(w, cfg, std::move(blocked));
  }

  BasisSet basis = sample_bases({w.bases[0]}, {&w.windowed[0]}, cfg, {w.pseudo[0]});
  basis.agents.reserve(1 + n_t);
  for (std::size_t i = 0; i < n_t; ++i) {
    const GpComponent& base = w.bases[i + 1];
    const int at_now = base.index_of_step(input.t_now);
    if (at_now < 0) throw Error("convex_lane_plan: t_now missing from support");
    const Vec2 here = base.mean_at(at_now);
    const double var = base.cov_scale * (*base.base_cov)(at_now, at_now);

    GpComponent frozen;
    frozen.steps = TimeGrid{input.t_now, cfg.horizon, cfg.dt}.horizon_steps();
    frozen.horizon = cfg.horizon;
    frozen.mean_x = Eigen::VectorXd::Constant(cfg.horizon, here.x());
    frozen.mean_y = Eigen::VectorXd::Constant(cfg.horizon, here.y());
    frozen.base_cov = std::make_shared<const Eigen::MatrixXd>(
        (var * Eigen::MatrixXd::Identity(cfg.horizon, cfg.horizon)).eval());
    frozen.cov_scale = 1.0;
    frozen.log_weight = 0.0;
    basis.agents.push_back(GpMixture{input.humans[i].agent_id, {std::move(frozen)}});
  }

  PlanResult result = select_optimal(basis, cfg);
  if (result.degraded) return detail::hold_position(w, cfg, std::move(result));
  return result;
}

using PlanFn = std::function<PlanResult(const PlanInput&, const PlannerConfig&)>;

inline const std::map<std::string, PlanFn>& planner_registry() {
  static const std::map<std::string, PlanFn> registry = {
      {"sigp", [](const PlanInput& in, const PlannerConfig& cfg) { return plan_step(in, cfg); }},
      {"independent",
       [](const PlanInput& in, const PlannerConfig& cfg) { return independent_plan(in, cfg); }},
      {"sbmp", [](const PlanInput& in, const PlannerConfig& cfg) { return sbmp_plan(in, cfg); }},
      {"convex_lane",
       [](const PlanInput& in, const PlannerConfig& cfg) { return convex_lane_plan(in, cfg); }},
  };
  return registry;
}

}  // namespace sigp
