// Pairwise interaction mathematics between two GP components: the Gaussian
// product-integral collision probability, its log-domain coefficients, the
// finite-γ interaction function, and a Monte-Carlo non-intersection oracle.
#pragma once

#include "sigp/gp.hpp"
#include "sigp/rng.hpp"
#include "sigp/types.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <vector>

namespace sigp {

/// Log-domain (w, P(κ), Λ) triple for one GP pair. Λ = w - P(κ) is the
/// non-collision coefficient; P(κ) ≤ w always, so log_lambda is a real
/// number or -inf (coincident means).
struct OverlapCoefficient {
  double log_w = 0.0;
  double log_collision = 0.0;  // log P(κ) = log Z^{-1}
  double log_lambda = 0.0;     // log(w - P(κ))

  /// Λ/w = 1 - exp(-½ d²) in [0, 1].
  double lambda_ratio() const { return -std::expm1(log_collision - log_w); }
};

namespace detail {

inline OverlapCoefficient overlap_from_parts(int dim_per_coord, double logdet_per_coord,
                                             double quad_total, int n_coords) {
  const double log2pi = 1.8378770664093454835606594728112353;
  OverlapCoefficient out;
  out.log_w = n_coords * (-0.5 * dim_per_coord * log2pi - 0.5 * logdet_per_coord);
  out.log_collision = out.log_w - 0.5 * quad_total;
  out.log_lambda = out.log_w + log1mexp(-0.5 * quad_total);
  return out;
}

}  // namespace detail

/// Single-coordinate overlap: ∫ N(x|μ_a,Σ_a) N(x|μ_b,Σ_b) dx and the derived
/// coefficients, computed via Cholesky of Σ_a + Σ_b.
inline OverlapCoefficient collision_prob_1d(const Eigen::VectorXd& mean_a,
                                            const Eigen::VectorXd& mean_b,
                                            const Eigen::MatrixXd& cov_a,
                                            const Eigen::MatrixXd& cov_b) {
  const int n = static_cast<int>(mean_a.size());
  if (mean_b.size() != n || cov_a.rows() != n || cov_b.rows() != n)
    throw Error("collision_prob: dimension mismatch");
  Eigen::MatrixXd s = cov_a + cov_b;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw Error("collision_prob: Σ_a + Σ_b is not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double quad = llt.matrixL().solve((mean_a - mean_b).eval()).squaredNorm();
  return detail::overlap_from_parts(n, logdet, quad, 1);
}

namespace detail {

/// Per-step accumulator for the pair coefficients:
///   w        = ∏_τ w_τ,                w_τ = (2π s_τ)^{-1} (both coordinates)
///   Λ/w      = ∏_τ (1 - exp(-q_τ/2))   (collision-free at every step)
///   P(κ)     = w - Λ.
/// A coincidence at any single step annihilates Λ; steps where the agents
/// are far apart contribute factors of one (exp is skipped once the factor
/// rounds to one in double precision). Products stay in double range for
/// T ≤ 60. Both the reference route and the planner cache run this exact
/// arithmetic, so they agree bit for bit.
struct StepOverlapAccum {
  double prod_s = 1.0;
  double prod_factor = 1.0;

  void add(double s, double dx, double dy) {
    if (!(s > 0.0)) throw Error("collision_prob: Σ_a + Σ_b is not positive definite");
    const double q = (dx * dx + dy * dy) / s;
    prod_s *= s;
    if (q < 80.0) prod_factor *= -std::expm1(-0.5 * q);
  }

  OverlapCoefficient finish(int t) const {
    const double log2pi = 1.8378770664093454835606594728112353;
    const double log_w = -(t * log2pi + std::log(prod_s));
    const double sum_log1mexp =
        prod_factor > 0.0 ? std::log(prod_factor) : -std::numeric_limits<double>::infinity();
    OverlapCoefficient out;
    out.log_w = log_w;
    out.log_lambda = log_w + sum_log1mexp;
    out.log_collision = log_w + log1mexp(sum_log1mexp);
    return out;
  }
};

}  // namespace detail

/// Pairwise overlap of the horizon blocks of two components, assembled from
/// per-step Gaussian product integrals. Each step is the T=1 case of the
/// stacked product integral (both coordinates, shared per-coordinate
/// variance); steps combine through the non-collision product, mirroring the
/// δ̄ structure. The fully stacked T-dimensional form saturates on
/// conditioned components — observation-pinned steps with nonzero separation
/// push the joint exponent past 700 and Λ/w rounds to one for every pair —
/// so it carries no ranking power there; the per-step product preserves the
/// T=1 algebra and tracks the Monte-Carlo oracle.
inline OverlapCoefficient collision_prob(const GpComponent& a, const GpComponent& b) {
  if (a.horizon != b.horizon) throw Error("collision_prob: mismatched horizons");
  const int t = a.horizon;
  const int oa = a.horizon_offset(), ob = b.horizon_offset();
  detail::StepOverlapAccum acc;
  for (int i = 0; i < t; ++i) {
    const double s =
        a.cov_scale * (*a.base_cov)(oa + i, oa + i) + b.cov_scale * (*b.base_cov)(ob + i, ob + i);
    acc.add(s, a.mean_x(oa + i) - b.mean_x(ob + i), a.mean_y(oa + i) - b.mean_y(ob + i));
  }
  return acc.finish(t);
}

/// ψ(f_a, f_b) = ∏_τ (1 - exp(-|f_a(τ) - f_b(τ)|² / 2γ)) on discretized
/// trajectories; the γ→0 limit is the 0/1 non-intersection indicator.
inline double finite_gamma_psi(const std::vector<Vec2>& traj_a, const std::vector<Vec2>& traj_b,
                               double gamma) {
  if (traj_a.size() != traj_b.size()) throw Error("finite_gamma_psi: length mismatch");
  if (traj_a.empty()) throw Error("finite_gamma_psi: empty trajectories");
  if (!(gamma > 0.0)) throw Error("finite_gamma_psi: gamma must be > 0");
  double prod = 1.0;
  for (std::size_t i = 0; i < traj_a.size(); ++i) {
    const double d2 = (traj_a[i] - traj_b[i]).squaredNorm();
    prod *= -std::expm1(-d2 / (2.0 * gamma));
  }
  return prod;
}

/// Monte-Carlo estimate of the non-intersection probability of two components:
/// fraction of sampled horizon trajectory pairs whose minimum pointwise
/// distance exceeds collision_radius. Exact intersection has measure zero on
/// continuous samples; the radius discretizes the event. Deterministic given
/// the seed.
inline double bar_delta_mc(const GpComponent& a, const GpComponent& b, double collision_radius,
                           int n_samples, std::uint64_t seed) {
  if (a.horizon != b.horizon) throw Error("bar_delta_mc: mismatched horizons");
  if (n_samples < 1) throw Error("bar_delta_mc: n_samples must be >= 1");
  if (!(collision_radius > 0.0)) throw Error("bar_delta_mc: collision_radius must be > 0");
  const int t = a.horizon;
  const Eigen::MatrixXd la = sampling_factor(a.horizon_cov());
  const Eigen::MatrixXd lb = sampling_factor(b.horizon_cov());
  const Eigen::VectorXd ax = a.horizon_mean_x(), ay = a.horizon_mean_y();
  const Eigen::VectorXd bx = b.horizon_mean_x(), by = b.horizon_mean_y();
  const double r2 = collision_radius * collision_radius;

  Rng rng(seed);
  Eigen::VectorXd z(t);
  auto draw = [&](const Eigen::MatrixXd& l) {
    for (int i = 0; i < t; ++i) z(i) = rng.normal();
    return (l * z).eval();
  };

  int clear = 0;
  for (int n = 0; n < n_samples; ++n) {
    const Eigen::VectorXd sax = ax + draw(la);
    const Eigen::VectorXd say = ay + draw(la);
    const Eigen::VectorXd sbx = bx + draw(lb);
    const Eigen::VectorXd sby = by + draw(lb);
    bool hit = false;
    for (int i = 0; i < t && !hit; ++i) {
      const double dx = sax(i) - sbx(i);
      const double dy = say(i) - sby(i);
      hit = dx * dx + dy * dy <= r2;
    }
    if (!hit) ++clear;
  }
  return static_cast<double>(clear) / static_cast<double>(n_samples);
}

}  // namespace sigp
