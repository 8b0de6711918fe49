#pragma once

// Hybrid feedback: the mode-dependent control law, flow/jump set membership
// for each mode, and the jump map with deterministic selection.
//
// Set characterizations (r = |x - c|, v_m = p_m - c):
//   J_0 = {eps <= r <= eps_s} \ B°_{|c/2|}(c/2)
//   F_0 = {r >= eps} n ({r >= eps_s} u B_{|c/2|}(c/2))
//   F_m = H(c, eps, eps_h, mu) minus the open nappe of the psi-cone about v_m
//         that points away from p_m
//   J_m = {r >= eps} n ({r >= eps_h} u B_{|mu c|}(mu c) u closed far nappe)
// Each is encoded as a continuous margin g with g <= 0 on the set.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "hybrid_avoid/errors.hpp"
#include "hybrid_avoid/geometry.hpp"
#include "hybrid_avoid/params.hpp"

namespace hybrid_avoid {

inline constexpr double kVerifyTol = 1e-9;
inline constexpr double kSimTol = 1e-7;

// u = -k_0 x in stabilization; -k_m pi_perp(x - c)(x - p_m) in avoidance.
inline VecN kappa(const VecN& x, Mode m, const ValidatedParams& P) {
  require_same_dim(x, P.c());
  if (m == Mode::Stabilize) return -P.gain(m) * x;
  const VecN rel = x - P.c();
  if (!(rel.squaredNorm() > 0.0)) throw Error(ErrorCode::AtObstacleCenter, "avoidance law undefined at c");
  return -P.gain(m) * orth_proj_apply(rel, x - P.p(m));
}

namespace detail {

inline double helmet_margin(const VecN& c, double eps_in, double eps_out, double mu, const VecN& x) {
  const double r = (x - c).norm();
  const double carve = mu * c.norm() - (x - mu * c).norm();
  return std::max({eps_in - r, r - eps_out, carve});
}

// Cone quadratic about v_m with half-aperture psi, and the signed distance
// along the unit axis; both <= 0 on the far nappe.
struct NappeCoords {
  double quad = 0.0;
  double along = 0.0;
};

inline NappeCoords nappe_coords(const VecN& x, Mode m, double psi, const ValidatedParams& P) {
  const VecN axis = P.p(m) - P.c();
  const VecN rel = x - P.c();
  return {cone_quadratic(axis, psi, rel), axis.dot(rel) / axis.norm()};
}

}  // namespace detail

inline double flow_margin(const VecN& x, Mode m, const ValidatedParams& P) {
  require_same_dim(x, P.c());
  const VecN& c = P.c();
  const double r = (x - c).norm();
  if (m == Mode::Stabilize) {
    const double inside_half_ball = (x - 0.5 * c).norm() - 0.5 * c.norm();
    return std::max(P.eps() - r, std::min(P.eps_s() - r, inside_half_ball));
  }
  const double helmet = detail::helmet_margin(c, P.eps(), P.eps_h(), P.mu(), x);
  const auto nap = detail::nappe_coords(x, m, P.psi(), P);
  return std::max(helmet, std::min(-nap.quad, -nap.along));
}

inline double jump_margin(const VecN& x, Mode m, const ValidatedParams& P) {
  require_same_dim(x, P.c());
  const VecN& c = P.c();
  if (m == Mode::Stabilize) return detail::helmet_margin(c, P.eps(), P.eps_s(), 0.5, x);
  const double r = (x - c).norm();
  const double in_carve = (x - P.mu() * c).norm() - P.mu() * c.norm();
  const auto nap = detail::nappe_coords(x, m, P.psi(), P);
  return std::max(P.eps() - r, std::min({P.eps_h() - r, in_carve, std::max(nap.quad, nap.along)}));
}

inline bool flow_set_contains(const VecN& x, Mode m, const ValidatedParams& P, double tol = kVerifyTol) {
  return flow_margin(x, m, P) <= tol;
}

inline bool jump_set_contains(const VecN& x, Mode m, const ValidatedParams& P, double tol = kVerifyTol) {
  return jump_margin(x, m, P) <= tol;
}

// Angular clearance of x - c from the psi_bar-cone about the axis of p_m:
// the angle to the nearer nappe axis minus psi_bar. Nonnegative exactly when
// x lies outside (or on) that cone.
inline double cone_clearance(const VecN& x, Mode m, const ValidatedParams& P) {
  const VecN rel = x - P.c();
  if (!(rel.squaredNorm() > 0.0)) throw Error(ErrorCode::AtObstacleCenter, "clearance undefined at c");
  const double a = angle_between(rel, P.p(m) - P.c());
  return std::min(a, std::numbers::pi - a) - P.psi_bar();
}

// Members of the set-valued jump map from mode 0.
inline std::vector<Mode> jump_targets(const VecN& x, const ValidatedParams& P) {
  std::vector<Mode> out;
  for (Mode m : {Mode::Plus, Mode::Minus}) {
    if (cone_clearance(x, m, P) >= 0.0) out.push_back(m);
  }
  return out;
}

struct JumpDecision {
  Mode to = Mode::Stabilize;
  bool ambiguous = false;  // both avoidance modes were admissible
};

// From mode 0 pick the admissible avoidance mode with the larger clearance
// (+1 on an exact tie); from +-1 always return to 0.
inline JumpDecision jump_decide(const VecN& x, Mode m, const ValidatedParams& P) {
  require_same_dim(x, P.c());
  if (is_avoidance(m)) return {Mode::Stabilize, false};
  const double plus = cone_clearance(x, Mode::Plus, P);
  const double minus = cone_clearance(x, Mode::Minus, P);
  const bool plus_ok = plus >= 0.0;
  const bool minus_ok = minus >= 0.0;
  if (!plus_ok && !minus_ok) {
    throw Error(ErrorCode::EmptyJumpTarget, "x lies inside both psi_bar-cones");
  }
  if (plus_ok && minus_ok) return {minus > plus ? Mode::Minus : Mode::Plus, true};
  return {plus_ok ? Mode::Plus : Mode::Minus, false};
}

inline Mode jump_select(const VecN& x, Mode m, const ValidatedParams& P) { return jump_decide(x, m, P).to; }

// V(x, m) = m^2 / 2 + |x - p_m|^2 / 2 with p_0 = 0.
inline double lyapunov(const VecN& x, Mode m, const ValidatedParams& P) {
  const double mi = to_int(m);
  return 0.5 * mi * mi + 0.5 * (x - P.p(m)).squaredNorm();
}

// <grad V, kappa>: -k_0 |x|^2 or -k_m |pi_perp(x - c)(x - p_m)|^2.
inline double lyapunov_rate(const VecN& x, Mode m, const ValidatedParams& P) {
  const VecN u = kappa(x, m, P);
  return (x - P.p(m)).dot(u);
}

}  // namespace hybrid_avoid
