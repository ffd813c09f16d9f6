// The sIGP planner: sample GP bases per agent, assemble joint non-collision
// coefficients, select the optimal joint basis, emit the next robot action.
#pragma once

#include "sigp/gp.hpp"
#include "sigp/interaction.hpp"
#include "sigp/rng.hpp"
#include "sigp/types.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace sigp {

struct PlannerConfig {
  KernelSpec kernel;
  int samples_per_agent = 100;
  double alpha_min = 0.1;
  double alpha_max = 1.0;
  int horizon = 20;
  double dt = 0.1;
  bool include_ped_ped = false;
  double prune_threshold = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int obs_window = 20;  // most recent samples used per agent; 0 keeps all
  double goal_slack = 10.0;
  double trend_slack = 10.0;  // pseudo-observation slack for human trend points
  double max_speed = 1.5;        // m/s, used to project the per-cycle goal
  double collision_radius = 0.25;  // m, trajectory-sampling planners only
  double indep_penalty_gain = 1.0;
  double indep_progress_gain = 0.0;
  int top_k = 10;

  void validate() const {
    kernel.validate();
    if (samples_per_agent < 1) throw Error("PlannerConfig: samples_per_agent must be >= 1");
    if (!(alpha_min > 0.0) || !(alpha_max >= alpha_min))
      throw Error("PlannerConfig: need 0 < alpha_min <= alpha_max");
    if (horizon < 1) throw Error("PlannerConfig: horizon must be >= 1");
    if (!(dt > 0.0)) throw Error("PlannerConfig: dt must be > 0");
    if (obs_window < 0) throw Error("PlannerConfig: obs_window must be >= 0");
    if (!(goal_slack > 0.0)) throw Error("PlannerConfig: goal_slack must be > 0");
    if (!(trend_slack > 0.0)) throw Error("PlannerConfig: trend_slack must be > 0");
    if (!(max_speed > 0.0)) throw Error("PlannerConfig: max_speed must be > 0");
    if (!(collision_radius > 0.0)) throw Error("PlannerConfig: collision_radius must be > 0");
    if (top_k < 1) throw Error("PlannerConfig: top_k must be >= 1");
  }
};

/// Everything a planner sees at one replanning cycle.
struct PlanInput {
  int t_now = 0;
  TrajectoryObservations robot;
  Vec2 goal = Vec2::Zero();
  std::vector<TrajectoryObservations> humans;
  Rect workspace;
};

/// Sampled GP bases, one mixture per agent; agents[0] is the robot.
struct BasisSet {
  std::vector<GpMixture> agents;

  std::size_t human_count() const { return agents.empty() ? 0 : agents.size() - 1; }
  void validate() const {
    if (agents.empty()) throw Error("BasisSet: no agents");
    for (const auto& m : agents)
      if (m.components.empty()) throw Error("BasisSet: agent " + m.agent_id + " has no components");
  }
};

/// One choice of component per agent (robot first) with its log coefficient.
struct JointBasis {
  std::vector<std::size_t> eta;
  double log_coeff = -std::numeric_limits<double>::infinity();
};

struct PlanResult {
  JointBasis selected;
  Vec2 action = Vec2::Zero();           // commanded position at step t_now + 1
  std::vector<Vec2> robot_path;         // selected robot mean over the horizon
  std::vector<std::vector<Vec2>> agent_paths;  // selected means, robot at [0]
  std::vector<JointBasis> top;          // best coefficients, descending
  bool degraded = false;
};

namespace detail {

/// Pairwise overlap between two sampled mixtures. Sampled covariances are
/// scalar multiples of one base matrix per agent, so only the two horizon
/// diagonals are needed; each (ℓ, k) evaluation is O(T) over cached means.
class PairOverlapCache {
 public:
  PairOverlapCache(const GpMixture& a, const GpMixture& b) : a_(a), b_(b) {
    const auto homogeneous = [](const GpMixture& m) {
      for (const auto& c : m.components)
        if (c.base_cov != m.components.front().base_cov) return false;
      return true;
    };
    fast_ = homogeneous(a) && homogeneous(b) && !a.components.empty() && !b.components.empty() &&
            a.components.front().horizon == b.components.front().horizon;
    if (!fast_) return;

    t_ = a.components.front().horizon;
    auto extract = [&](const GpMixture& m, Eigen::VectorXd& diag) {
      const GpComponent& c = m.components.front();
      const int o = c.horizon_offset();
      diag.resize(t_);
      for (int i = 0; i < t_; ++i) diag(i) = (*c.base_cov)(o + i, o + i);
    };
    extract(a, diag_a_);
    extract(b, diag_b_);
  }

  OverlapCoefficient overlap(std::size_t i, std::size_t j) const {
    if (!fast_) return collision_prob(a_.components[i], b_.components[j]);
    const GpComponent& ca = a_.components[i];
    const GpComponent& cb = b_.components[j];
    const int oa = ca.horizon_offset(), ob = cb.horizon_offset();
    StepOverlapAccum acc;
    for (int k = 0; k < t_; ++k) {
      const double s = ca.cov_scale * diag_a_(k) + cb.cov_scale * diag_b_(k);
      acc.add(s, ca.mean_x(oa + k) - cb.mean_x(ob + k), ca.mean_y(oa + k) - cb.mean_y(ob + k));
    }
    return acc.finish(t_);
  }

 private:
  const GpMixture& a_;
  const GpMixture& b_;
  bool fast_ = false;
  int t_ = 0;
  Eigen::VectorXd diag_a_, diag_b_;
};

/// Log-domain building blocks of the joint coefficients. Interaction enters
/// through the non-collision ratio Λ/w = ∏_τ(1 - exp(-q_τ/2)) rather than
/// the absolute Λ: the density normalizer (2πs)^{-T} in Λ rewards pairs of
/// near-zero-covariance components by tens of nats while their own draw
/// jitter evades the proximity penalty (q = d²/s grows as s shrinks), so a
/// planner maximizing Λw chases confident near-misses. The ratio is the
/// probability-like quantity the δ̄ indicator ideal calls for.
struct CoefficientTables {
  Eigen::VectorXd robot_log_w;
  std::vector<Eigen::VectorXd> human_log_w;
  // term[i](l, k) = log(Λ/w)^{R,f_i}_{l,k} + log w^{f_i}_k
  std::vector<Eigen::MatrixXd> term;
  // ped_ped[i][j - i - 1](k_i, k_j) = log(Λ/w)^{f_i,f_j}; built when enabled
  std::vector<std::vector<Eigen::MatrixXd>> ped_ped;
};

inline CoefficientTables build_tables(const BasisSet& basis, const PlannerConfig& cfg) {
  basis.validate();
  const std::size_t n_t = basis.human_count();
  const GpMixture& robot = basis.agents[0];
  CoefficientTables tb;
  tb.robot_log_w.resize(static_cast<Eigen::Index>(robot.components.size()));
  for (std::size_t l = 0; l < robot.components.size(); ++l)
    tb.robot_log_w(static_cast<Eigen::Index>(l)) = robot.components[l].log_weight;

  tb.human_log_w.resize(n_t);
  tb.term.resize(n_t);
  for (std::size_t i = 0; i < n_t; ++i) {
    const GpMixture& human = basis.agents[i + 1];
    PairOverlapCache cache(robot, human);
    Eigen::MatrixXd m(robot.components.size(), human.components.size());
    Eigen::VectorXd hw(static_cast<Eigen::Index>(human.components.size()));
    for (std::size_t k = 0; k < human.components.size(); ++k)
      hw(static_cast<Eigen::Index>(k)) = human.components[k].log_weight;
    for (std::size_t l = 0; l < robot.components.size(); ++l)
      for (std::size_t k = 0; k < human.components.size(); ++k) {
        const OverlapCoefficient o = cache.overlap(l, k);
        m(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) =
            (o.log_lambda - o.log_w) + hw(static_cast<Eigen::Index>(k));
      }
    tb.term[i] = std::move(m);
    tb.human_log_w[i] = std::move(hw);
  }

  if (cfg.include_ped_ped && n_t >= 2) {
    tb.ped_ped.resize(n_t);
    for (std::size_t i = 0; i < n_t; ++i) {
      for (std::size_t j = i + 1; j < n_t; ++j) {
        const GpMixture& hi = basis.agents[i + 1];
        const GpMixture& hj = basis.agents[j + 1];
        PairOverlapCache cache(hi, hj);
        Eigen::MatrixXd m(hi.components.size(), hj.components.size());
        for (std::size_t a = 0; a < hi.components.size(); ++a)
          for (std::size_t b = 0; b < hj.components.size(); ++b) {
            const OverlapCoefficient o = cache.overlap(a, b);
            m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                o.log_lambda - o.log_w;
          }
        tb.ped_ped[i].push_back(std::move(m));
      }
    }
  }
  return tb;
}

inline double enumeration_size(const BasisSet& basis) {
  double n = static_cast<double>(basis.agents[0].components.size());
  for (std::size_t i = 1; i < basis.agents.size(); ++i)
    n *= static_cast<double>(basis.agents[i].components.size());
  return n;
}

/// Best factorized (pedestrian-pedestrian off) joint coefficient through
/// every component; the ranking used by prune and by the pre-coupling
/// sparsification.
inline std::vector<std::vector<double>> best_through_factorized(const BasisSet& basis,
                                                                const CoefficientTables& tb) {
  const std::size_t n_t = basis.human_count();
  const std::size_t n_r = basis.agents[0].components.size();
  std::vector<std::vector<double>> best_through(basis.agents.size());
  best_through[0].assign(n_r, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n_t; ++i)
    best_through[i + 1].assign(basis.agents[i + 1].components.size(),
                               -std::numeric_limits<double>::infinity());
  for (std::size_t l = 0; l < n_r; ++l) {
    double total = tb.robot_log_w(static_cast<Eigen::Index>(l));
    std::vector<double> best_i(n_t, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n_t; ++i) {
      for (std::size_t k = 0; k < static_cast<std::size_t>(tb.term[i].cols()); ++k)
        best_i[i] = std::max(best_i[i],
                             tb.term[i](static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)));
      total += best_i[i];
    }
    best_through[0][l] = std::max(best_through[0][l], total);
    for (std::size_t i = 0; i < n_t; ++i) {
      if (!std::isfinite(total) && !std::isfinite(best_i[i])) continue;
      for (std::size_t k = 0; k < static_cast<std::size_t>(tb.term[i].cols()); ++k) {
        const double through =
            total - best_i[i] +
            tb.term[i](static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
        best_through[i + 1][k] = std::max(best_through[i + 1][k], through);
      }
    }
  }
  return best_through;
}

/// Shrink a basis so the pedestrian-pedestrian enumeration stays tractable:
/// per agent, keep the components with the best factorized joint coefficient
/// (ties to the lower index). Humans are capped hardest since they multiply.
inline BasisSet sparsify_for_coupling(const BasisSet& basis, const PlannerConfig& cfg,
                                      double target_joint) {
  const std::size_t n_t = basis.human_count();
  PlannerConfig off = cfg;
  off.include_ped_ped = false;
  const CoefficientTables tb = build_tables(basis, off);
  const auto best_through = best_through_factorized(basis, tb);

  std::size_t human_cap = 8;
  double robot_cap_d = target_joint;
  for (std::size_t i = 0; i < n_t; ++i) robot_cap_d /= static_cast<double>(human_cap);
  while (robot_cap_d < 1.0 && human_cap > 1) {
    human_cap -= 1;
    robot_cap_d = target_joint;
    for (std::size_t i = 0; i < n_t; ++i) robot_cap_d /= static_cast<double>(human_cap);
  }
  const std::size_t robot_cap = std::max<std::size_t>(1, static_cast<std::size_t>(robot_cap_d));

  BasisSet out;
  out.agents.resize(basis.agents.size());
  for (std::size_t a = 0; a < basis.agents.size(); ++a) {
    const std::size_t cap = a == 0 ? robot_cap : human_cap;
    const std::size_t n = basis.agents[a].components.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t c = 0; c < n; ++c) idx[c] = c;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return best_through[a][x] > best_through[a][y];
    });
    if (idx.size() > cap) idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    GpMixture kept;
    kept.agent_id = basis.agents[a].agent_id;
    for (std::size_t c : idx) kept.components.push_back(basis.agents[a].components[c]);
    out.agents[a] = std::move(kept);
  }
  return out;
}

inline void insert_top(std::vector<JointBasis>& top, JointBasis cand, int k) {
  auto it = std::upper_bound(top.begin(), top.end(), cand.log_coeff,
                             [](double v, const JointBasis& b) { return v > b.log_coeff; });
  top.insert(it, std::move(cand));
  if (top.size() > static_cast<std::size_t>(k)) top.pop_back();
}

}  // namespace detail

/// Draw `samples_per_agent` GP components per agent: sample 0 is the
/// conditioned base itself (α = 1, μ = μ0); the rest have μ_ℓ ~ N(μ0, Σ0)
/// and Σ_ℓ = α Σ0 with α ~ U[alpha_min, alpha_max]. Weights are data
/// likelihoods plus, where an agent has a goal pseudo-datum (the robot's
/// planning goal, a human's trend projection), that datum's density — so
/// goal progress and trend persistence participate in selection. Weights
/// are normalized per agent. Deterministic in cfg.seed.
inline BasisSet sample_bases(const std::vector<GpComponent>& base_components,
                             const std::vector<const TrajectoryObservations*>& observations,
                             const PlannerConfig& cfg,
                             const std::vector<std::vector<PseudoObservation>>& pseudo = {}) {
  cfg.validate();
  if (base_components.empty()) throw Error("sample_bases: no agents");
  if (observations.size() != base_components.size())
    throw Error("sample_bases: observations/base size mismatch");
  if (!pseudo.empty() && pseudo.size() != base_components.size())
    throw Error("sample_bases: pseudo/base size mismatch");

  static const std::vector<PseudoObservation> kNoPseudo;
  BasisSet basis;
  basis.agents.resize(base_components.size());
  for (std::size_t a = 0; a < base_components.size(); ++a) {
    const GpComponent& base = base_components[a];
    base.validate();
    const TrajectoryObservations& obs = *observations[a];
    Rng rng(derive_seed(cfg.seed, kStreamSample, a));
    const Eigen::MatrixXd factor = sampling_factor(*base.base_cov);
    const int ns = base.support_size();
    const std::vector<PseudoObservation>& agent_pseudo = pseudo.empty() ? kNoPseudo : pseudo[a];

    GpMixture mix;
    mix.agent_id = obs.agent_id;
    mix.components.reserve(static_cast<std::size_t>(cfg.samples_per_agent));

    auto weigh = [&](GpComponent& c) {
      c.log_weight = log_data_likelihood(c, obs, cfg.kernel);
      for (const auto& p : agent_pseudo) c.log_weight += pseudo_log_density(c, p);
    };

    GpComponent first = base;
    first.cov_scale = 1.0;
    weigh(first);
    mix.components.push_back(std::move(first));

    Eigen::VectorXd z(ns);
    for (int s = 1; s < cfg.samples_per_agent; ++s) {
      GpComponent c = base;
      c.cov_scale = rng.uniform(cfg.alpha_min, cfg.alpha_max);
      for (int i = 0; i < ns; ++i) z(i) = rng.normal();
      c.mean_x = base.mean_x + factor * z;
      for (int i = 0; i < ns; ++i) z(i) = rng.normal();
      c.mean_y = base.mean_y + factor * z;
      weigh(c);
      mix.components.push_back(std::move(c));
    }
    basis.agents[a] = normalize_mixture(std::move(mix));
  }
  return basis;
}

/// Direct evaluation of one joint coefficient
///   log coeff_η = log w^R_ℓ + Σ_i (log(Λ/w)^{R,f_i}_{ℓ,k_i} + log w^{f_i}_{k_i})
///                 (+ Σ_{j>i} log(Λ/w)^{f_i,f_j}_{k_i,k_j} when enabled),
/// each pair via collision_prob; see CoefficientTables for why the ratio
/// replaces the absolute Λ. Reference route; selection uses cached tables.
inline double joint_coefficient(const BasisSet& basis, const std::vector<std::size_t>& eta,
                                const PlannerConfig& cfg) {
  basis.validate();
  if (eta.size() != basis.agents.size()) throw Error("joint_coefficient: eta size mismatch");
  for (std::size_t a = 0; a < eta.size(); ++a)
    if (eta[a] >= basis.agents[a].components.size())
      throw Error("joint_coefficient: eta index out of range");

  const GpComponent& robot = basis.agents[0].components[eta[0]];
  double acc = robot.log_weight;
  const std::size_t n_t = basis.human_count();
  for (std::size_t i = 0; i < n_t; ++i) {
    const GpComponent& human = basis.agents[i + 1].components[eta[i + 1]];
    const OverlapCoefficient o = collision_prob(robot, human);
    acc += (o.log_lambda - o.log_w) + human.log_weight;
  }
  if (cfg.include_ped_ped) {
    for (std::size_t i = 0; i < n_t; ++i)
      for (std::size_t j = i + 1; j < n_t; ++j) {
        const OverlapCoefficient o = collision_prob(basis.agents[i + 1].components[eta[i + 1]],
                                                    basis.agents[j + 1].components[eta[j + 1]]);
        acc += o.log_lambda - o.log_w;
      }
  }
  return acc;
}

/// Pick η* = argmax [Λw]_η. With pedestrian-pedestrian terms off the argmax
/// factorizes: each agent's best k_i is independent per robot index ℓ, so the
/// search costs O(N_R · Σ_i N_i) coefficient evaluations. With them on, falls
/// back to full enumeration (guarded). Ties break to the lexicographically
/// smallest η. All-(-inf) coefficients flag the result degraded; the caller
/// owns the stop action.
inline PlanResult select_optimal(const BasisSet& basis, const PlannerConfig& cfg) {
  cfg.validate();
  basis.validate();
  const std::size_t n_t = basis.human_count();
  const std::size_t n_r = basis.agents[0].components.size();
  const detail::CoefficientTables tb = detail::build_tables(basis, cfg);

  PlanResult result;
  std::vector<JointBasis> top;

  if (!cfg.include_ped_ped) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_eta;
    for (std::size_t l = 0; l < n_r; ++l) {
      double total = tb.robot_log_w(static_cast<Eigen::Index>(l));
      std::vector<std::size_t> eta(n_t + 1);
      eta[0] = l;
      for (std::size_t i = 0; i < n_t; ++i) {
        const Eigen::MatrixXd& term = tb.term[i];
        double bi = -std::numeric_limits<double>::infinity();
        std::size_t ki = 0;
        for (std::size_t k = 0; k < static_cast<std::size_t>(term.cols()); ++k) {
          const double v = term(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
          if (v > bi) {
            bi = v;
            ki = k;
          }
        }
        total += bi;
        eta[i + 1] = ki;
      }
      detail::insert_top(top, JointBasis{eta, total}, cfg.top_k);
      if (total > best) {
        best = total;
        best_eta = eta;
      }
    }
    result.selected = JointBasis{best_eta, best};
  } else {
    const double count = detail::enumeration_size(basis);
    if (count > 2e6)
      throw Error("select_optimal: pedestrian-pedestrian enumeration too large (" +
                  std::to_string(static_cast<long long>(count)) + " joint bases)");
    std::vector<std::size_t> eta(n_t + 1, 0);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_eta;
    bool done = false;
    while (!done) {
      double acc = tb.robot_log_w(static_cast<Eigen::Index>(eta[0]));
      for (std::size_t i = 0; i < n_t; ++i)
        acc += tb.term[i](static_cast<Eigen::Index>(eta[0]), static_cast<Eigen::Index>(eta[i + 1]));
      for (std::size_t i = 0; i < n_t; ++i)
        for (std::size_t j = i + 1; j < n_t; ++j)
          acc += tb.ped_ped[i][j - i - 1](static_cast<Eigen::Index>(eta[i + 1]),
                                          static_cast<Eigen::Index>(eta[j + 1]));
      detail::insert_top(top, JointBasis{eta, acc}, cfg.top_k);
      if (acc > best) {
        best = acc;
        best_eta = eta;
      }
      // lexicographic odometer, last agent fastest
      done = true;
      for (std::size_t a = eta.size(); a-- > 0;) {
        if (++eta[a] < basis.agents[a].components.size()) {
          done = false;
          break;
        }
        eta[a] = 0;
      }
    }
    result.selected = JointBasis{best_eta, best};
  }

  result.top = std::move(top);
  if (!std::isfinite(result.selected.log_coeff)) {
    result.degraded = true;
    result.selected.eta.clear();
    return result;
  }

  const GpComponent& robot = basis.agents[0].components[result.selected.eta[0]];
  result.action = robot.horizon_point(0);
  result.robot_path = robot.horizon_path();
  result.agent_paths.reserve(basis.agents.size());
  for (std::size_t a = 0; a < basis.agents.size(); ++a)
    result.agent_paths.push_back(
        basis.agents[a].components[result.selected.eta[a]].horizon_path());
  return result;
}

struct PruneResult {
  BasisSet basis;
  std::vector<std::size_t> retained;  // per agent, robot first
  double max_log_coeff = -std::numeric_limits<double>::infinity();
};

/// Drop components that participate only in joint bases whose coefficient
/// falls more than `threshold` below the maximum. Realizes the sparsity of
/// the basis: most samples carry negligible joint mass.
inline PruneResult prune(const BasisSet& basis, const PlannerConfig& cfg,
                         double threshold = std::numeric_limits<double>::quiet_NaN()) {
  cfg.validate();
  basis.validate();
  if (std::isnan(threshold)) threshold = cfg.prune_threshold;
  if (threshold < 0.0) throw Error("prune: threshold must be >= 0");
  const std::size_t n_t = basis.human_count();
  const std::size_t n_r = basis.agents[0].components.size();

  // Best joint coefficient through each component.
  std::vector<std::vector<double>> best_through(basis.agents.size());
  best_through[0].assign(n_r, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n_t; ++i)
    best_through[i + 1].assign(basis.agents[i + 1].components.size(),
                               -std::numeric_limits<double>::infinity());

  const detail::CoefficientTables tb = detail::build_tables(basis, cfg);
  double global_best = -std::numeric_limits<double>::infinity();

  if (!cfg.include_ped_ped) {
    best_through = detail::best_through_factorized(basis, tb);
    for (double v : best_through[0]) global_best = std::max(global_best, v);
  } else {
    const double count = detail::enumeration_size(basis);
    if (count > 2e6) throw Error("prune: pedestrian-pedestrian enumeration too large");
    std::vector<std::size_t> eta(n_t + 1, 0);
    bool done = false;
    while (!done) {
      double acc = tb.robot_log_w(static_cast<Eigen::Index>(eta[0]));
      for (std::size_t i = 0; i < n_t; ++i)
        acc += tb.term[i](static_cast<Eigen::Index>(eta[0]), static_cast<Eigen::Index>(eta[i + 1]));
      for (std::size_t i = 0; i < n_t; ++i)
        for (std::size_t j = i + 1; j < n_t; ++j)
          acc += tb.ped_ped[i][j - i - 1](static_cast<Eigen::Index>(eta[i + 1]),
                                          static_cast<Eigen::Index>(eta[j + 1]));
      global_best = std::max(global_best, acc);
      for (std::size_t a = 0; a < eta.size(); ++a)
        best_through[a][eta[a]] = std::max(best_through[a][eta[a]], acc);
      done = true;
      for (std::size_t a = eta.size(); a-- > 0;) {
        if (++eta[a] < basis.agents[a].components.size()) {
          done = false;
          break;
        }
        eta[a] = 0;
      }
    }
  }

  PruneResult out;
  out.max_log_coeff = global_best;
  out.basis.agents.resize(basis.agents.size());
  out.retained.resize(basis.agents.size());
  if (!std::isfinite(global_best)) {
    // Nothing to rank against; keep everything.
    out.basis = basis;
    for (std::size_t a = 0; a < basis.agents.size(); ++a)
      out.retained[a] = basis.agents[a].components.size();
    return out;
  }
  const double cutoff = global_best - threshold;
  for (std::size_t a = 0; a < basis.agents.size(); ++a) {
    GpMixture kept;
    kept.agent_id = basis.agents[a].agent_id;
    for (std::size_t c = 0; c < basis.agents[a].components.size(); ++c)
      if (best_through[a][c] >= cutoff) kept.components.push_back(basis.agents[a].components[c]);
    out.retained[a] = kept.components.size();
    out.basis.agents[a] = std::move(kept);
  }
  return out;
}

/// log of the total joint coefficient mass flowing through each robot
/// component: log m_ℓ = log w^R_ℓ + Σ_i logsumexp_k(term_i(ℓ, k)).
/// Diagnostic behind the sparsity measurements and the CLI histogram export.
inline Eigen::VectorXd log_robot_mode_mass(const BasisSet& basis, const PlannerConfig& cfg) {
  basis.validate();
  const std::size_t n_t = basis.human_count();
  const std::size_t n_r = basis.agents[0].components.size();
  const detail::CoefficientTables tb = detail::build_tables(basis, cfg);
  if (cfg.include_ped_ped)
    throw Error("log_robot_mode_mass: defined for the factorized (ped-ped off) form");
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_r));
  std::vector<double> row;
  for (std::size_t l = 0; l < n_r; ++l) {
    double acc = tb.robot_log_w(static_cast<Eigen::Index>(l));
    for (std::size_t i = 0; i < n_t; ++i) {
      row.assign(static_cast<std::size_t>(tb.term[i].cols()), 0.0);
      for (std::size_t k = 0; k < row.size(); ++k)
        row[k] = tb.term[i](static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
      acc += log_sum_exp(row);
    }
    out(static_cast<Eigen::Index>(l)) = acc;
  }
  return out;
}

namespace detail {

/// Per-cycle goal: the scenario goal projected onto the ball the robot can
/// reach within one horizon, so conditioned paths stay kinematically sane.
inline Vec2 project_goal(const Vec2& current, const Vec2& goal, const PlannerConfig& cfg) {
  const double reach = cfg.max_speed * cfg.horizon * cfg.dt;
  const Vec2 d = goal - current;
  const double dist = d.norm();
  if (dist <= reach || dist == 0.0) return goal;
  return current + d * (reach / dist);
}

struct ConditionedWorld {
  TimeGrid grid;
  Vec2 robot_position = Vec2::Zero();
  Vec2 effective_goal = Vec2::Zero();
  std::vector<GpComponent> bases;                       // robot first
  std::vector<TrajectoryObservations> windowed;         // aligned with bases
  std::vector<std::vector<PseudoObservation>> pseudo;   // per-agent soft futures
  std::vector<const TrajectoryObservations*> windowed_ptrs() const {
    std::vector<const TrajectoryObservations*> p;
    p.reserve(windowed.size());
    for (const auto& w : windowed) p.push_back(&w);
    return p;
  }
};

/// Where an agent's recent motion points: the linear trend of its windowed
/// observations evaluated at `step`. Trend points serve as human
/// pseudo-observations so sampled predictions stay anchored to observed
/// intent instead of swerving for free.
inline Vec2 trend_point(const TrajectoryObservations& obs, const TimeGrid& grid, int step) {
  std::vector<double> t, vx, vy, w;
  t.reserve(obs.size());
  for (const auto& s : obs.samples) {
    t.push_back(grid.time_of(s.step));
    vx.push_back(s.pos.x());
    vy.push_back(s.pos.y());
    w.push_back(1.0);
  }
  double ax, bx, ay, by;
  fit_trend(t, vx, w, ax, bx);
  fit_trend(t, vy, w, ay, by);
  const double te = grid.time_of(step);
  return {ax + bx * te, ay + by * te};
}

inline ConditionedWorld condition_world(const PlanInput& input, const PlannerConfig& cfg) {
  if (input.robot.empty()) throw Error("plan: robot has no observations");
  ConditionedWorld w;
  w.grid = TimeGrid{input.t_now, cfg.horizon, cfg.dt};
  w.windowed.push_back(input.robot.tail(static_cast<std::size_t>(cfg.obs_window)));
  for (const auto& h : input.humans) {
    if (h.empty()) throw Error("plan: human " + h.agent_id + " has no observations");
    w.windowed.push_back(h.tail(static_cast<std::size_t>(cfg.obs_window)));
  }
  w.robot_position = w.windowed[0].latest().pos;
  w.effective_goal = project_goal(w.robot_position, input.goal, cfg);

  // Robot: the projected goal at the horizon end. Humans: trend projections
  // at the horizon's middle and end.
  w.pseudo.push_back({{w.grid.last_step(), w.effective_goal,
                       cfg.goal_slack * cfg.kernel.noise_variance}});
  for (std::size_t i = 1; i < w.windowed.size(); ++i) {
    const int mid = input.t_now + (cfg.horizon + 1) / 2;
    const int end = w.grid.last_step();
    const double noise = cfg.trend_slack * cfg.kernel.noise_variance;
    std::vector<PseudoObservation> ps;
    if (mid > w.windowed[i].latest().step && mid < end)
      ps.push_back({mid, trend_point(w.windowed[i], w.grid, mid), noise});
    ps.push_back({end, trend_point(w.windowed[i], w.grid, end), noise});
    w.pseudo.push_back(std::move(ps));
  }

  w.bases.reserve(w.windowed.size());
  for (std::size_t i = 0; i < w.windowed.size(); ++i)
    w.bases.push_back(condition(w.windowed[i], cfg.kernel, w.grid, w.pseudo[i]));
  return w;
}

inline PlanResult hold_position(const ConditionedWorld& w, const PlannerConfig& cfg,
                                PlanResult result) {
  result.degraded = true;
  result.action = w.robot_position;
  result.robot_path.assign(static_cast<std::size_t>(cfg.horizon), w.robot_position);
  return result;
}

}  // namespace detail

/// One sIGP replanning cycle: condition → sample_bases → coefficients →
/// select_optimal. With pedestrian-pedestrian terms on, an oversized basis
/// is first sparsified by its factorized coefficients so the coupled
/// enumeration stays tractable. Degrades to a hold-position action when
/// every joint coefficient vanishes.
inline PlanResult plan_step(const PlanInput& input, const PlannerConfig& cfg) {
  cfg.validate();
  const detail::ConditionedWorld w = detail::condition_world(input, cfg);
  BasisSet basis = sample_bases(w.bases, w.windowed_ptrs(), cfg, w.pseudo);
  if (cfg.include_ped_ped && detail::enumeration_size(basis) > 2e5)
    basis = detail::sparsify_for_coupling(basis, cfg, 2e5);
  PlanResult result = select_optimal(basis, cfg);
  if (result.degraded) return detail::hold_position(w, cfg, std::move(result));
  return result;
}

}  // namespace sigp
