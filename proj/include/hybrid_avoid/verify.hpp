#pragma once

// Sampled property checks for the controller geometry and post-run audits of
// simulated trajectories. Every check is deterministic given its seed and
// reports the worst slack observed (slack > 0 means the property held at that
// sample).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hybrid_avoid/controller.hpp"
#include "hybrid_avoid/errors.hpp"
#include "hybrid_avoid/geometry.hpp"
#include "hybrid_avoid/hybrid_sim.hpp"
#include "hybrid_avoid/params.hpp"

namespace hybrid_avoid {

struct Witness {
  std::string label;
  VecN x;
  double margin = 0.0;
};

struct PropertyReport {
  std::string name;
  std::uint64_t seed = 0;
  Eigen::Index dim = 0;
  std::size_t samples_tested = 0;
  std::size_t failure_count = 0;
  std::vector<Witness> failures;  // first kMaxWitnesses failures
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;

  static constexpr std::size_t kMaxWitnesses = 16;

  bool pass() const { return failure_count == 0; }

  void add(const std::string& label, const VecN& x, double slack) {
    ++samples_tested;
    if (slack < worst_margin || std::isnan(slack)) worst_margin = slack;
    if (!(slack > 0.0)) {
      ++failure_count;
      if (failures.size() < kMaxWitnesses) failures.push_back({label, x, slack});
    }
  }

  std::size_t failures_labelled(const std::string& label) const {
    return static_cast<std::size_t>(
        std::count_if(failures.begin(), failures.end(), [&](const Witness& w) { return w.label == label; }));
  }
};

inline PropertyReport make_report(std::string name, std::uint64_t seed, Eigen::Index dim) {
  PropertyReport r;
  r.name = std::move(name);
  r.seed = seed;
  r.dim = dim;
  return r;
}

// ---------------------------------------------------------------------------
// Sampling helpers

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline VecN random_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  VecN v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline VecN random_unit(Eigen::Index n, Rng& rng) {
  while (true) {
    VecN v = random_normal(n, rng);
    const double nv = v.norm();
    if (nv > 1e-6) return v / nv;
  }
}

// Unit vector orthogonal to the nonzero vector a.
inline VecN random_unit_orthogonal(const VecN& a, Rng& rng) {
  while (true) {
    const VecN w = orth_proj_apply(a, random_normal(a.size(), rng));
    const double nw = w.norm();
    if (nw > 1e-6) return w / nw;
  }
}

inline double lerp(double lo, double hi, double t) { return lo + (hi - lo) * t; }

// Raw parameters drawn strictly inside every admissible interval.
inline RawParams random_feasible_raw(Eigen::Index n, Rng& rng) {
  RawParams r;
  r.obstacle.c = random_unit(n, rng) * uniform(rng, 1.0, 3.0);
  const double nc = r.obstacle.c.norm();
  r.obstacle.epsilon = nc * uniform(rng, 0.2, 0.6);
  r.eps_h = lerp(r.obstacle.epsilon, eps_h_upper(r.obstacle), uniform(rng, 0.2, 0.8));
  r.eps_s = lerp(r.obstacle.epsilon, r.eps_h, uniform(rng, 0.2, 0.8));
  r.mu = lerp(mu_min(r.obstacle, r.eps_h), 0.5, uniform(rng, 0.2, 0.8));
  r.theta = theta_max(r.obstacle, r.eps_h, r.mu) * uniform(rng, 0.2, 0.8);
  const double pmax = psi_max(r.theta);
  r.psi = pmax * uniform(rng, 0.2, 0.5);
  r.psi_bar = lerp(r.psi, pmax, uniform(rng, 0.2, 0.8));
  r.gains = {uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0)};
  r.w_hint = random_normal(n, rng);
  return r;
}

inline ValidatedParams random_feasible_params(Eigen::Index n, Rng& rng) { return validate(random_feasible_raw(n, rng)); }

// ---------------------------------------------------------------------------
// Operator identities

inline PropertyReport check_operator_identities(Eigen::Index n, std::size_t samples, std::uint64_t seed,
                                                double tol = 1e-12) {
  auto rep = make_report("operator_identities", seed, n);
  Rng rng(seed);
  for (std::size_t k = 0; k < samples; ++k) {
    VecN z = random_normal(n, rng) * std::exp(uniform(rng, -2.0, 2.0));
    const VecN x = random_normal(n, rng);
    const VecN y = random_normal(n, rng);
    const double theta = uniform(rng, 0.0, std::numbers::pi / 2);
    const double scale = std::max({1.0, x.norm(), z.norm(), y.norm()});

    const VecN par = par_proj_apply(z, x);
    const VecN orth = orth_proj_apply(z, x);
    const VecN refl = reflect_apply(z, x);
    const double pt_xy = x.dot(pi_theta_apply(z, theta, y));
    const double pt_yx = y.dot(pi_theta_apply(z, theta, x));

    const double errs[] = {
        (par_proj_apply(z, z) - z).cwiseAbs().maxCoeff(),
        orth_proj_apply(z, z).cwiseAbs().maxCoeff(),
        (reflect_apply(z, z) + z).cwiseAbs().maxCoeff(),
        (orth_proj_apply(z, orth) - orth).cwiseAbs().maxCoeff(),
        (par_proj_apply(z, par) - par).cwiseAbs().maxCoeff(),
        (reflect_apply(z, refl) - x).cwiseAbs().maxCoeff(),
        orth_proj_apply(z, par).cwiseAbs().maxCoeff(),
        (orth + par - x).cwiseAbs().maxCoeff(),
        (2.0 * orth - refl - x).cwiseAbs().maxCoeff(),
        (par_proj_apply(z, refl) + par).cwiseAbs().maxCoeff(),
        (orth_proj_apply(z, refl) - orth).cwiseAbs().maxCoeff(),
        (2.0 * par + refl - x).cwiseAbs().maxCoeff(),
        std::abs(pt_xy - pt_yx) / scale,
    };
    double worst = 0.0;
    for (double e : errs) worst = std::max(worst, e);
    rep.add("identity", x, tol * scale - worst);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Two cones about axes separated by more than psi1 + psi2 (and less than
// pi - (psi1 + psi2)) meet only at the apex.

inline PropertyReport check_lemma1(const VecN& c, const VecN& v1, const VecN& v2, double psi1, double psi2,
                                   std::size_t samples, std::uint64_t seed, bool enforce_precondition = true) {
  require_same_dim(c, v1);
  require_same_dim(c, v2);
  const double sep = geodesic_dist(v1, v2);
  const double sum = psi1 + psi2;
  const bool hypothesis = sum < sep && sep < std::numbers::pi - sum;
  if (sep >= std::numbers::pi - 1e-12 || (enforce_precondition && !hypothesis)) {
    throw Error(ErrorCode::PreconditionViolated, "need psi1 + psi2 < d(v1, v2) < pi - (psi1 + psi2)");
  }

  auto rep = make_report("lemma1_cone_disjointness", seed, c.size());
  if (!hypothesis) rep.notes.push_back("hypothesis violated; running as falsifier");
  Rng rng(seed);
  auto sample_cone = [&](const VecN& v, double psi) {
    const double phi = psi * uniform(rng, 0.0, 1.0);
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const VecN u = random_unit_orthogonal(v, rng);
    return VecN(c + uniform(rng, 0.05, 3.0) * (sign * std::cos(phi) * v + std::sin(phi) * u));
  };
  for (std::size_t k = 0; k < samples; ++k) {
    const VecN a = sample_cone(v1, psi1);
    const VecN d1 = a - c;
    rep.add("in_cone1_and_cone2", a, cone_quadratic(v2, psi2, d1) / d1.squaredNorm());
    const VecN b = sample_cone(v2, psi2);
    const VecN d2 = b - c;
    rep.add("in_cone2_and_cone1", b, cone_quadratic(v1, psi1, d2) / d2.squaredNorm());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The avoidance field vanishes exactly on the line through c and p_m.

inline PropertyReport check_lemma3(const ValidatedParams& P, std::size_t samples, std::uint64_t seed) {
  auto rep = make_report("lemma3_equilibria", seed, P.dim());
  Rng rng(seed);
  const double box = 2.0 * (P.eps_h() + P.c().norm());
  for (Mode m : {Mode::Plus, Mode::Minus}) {
    const VecN axis = P.p(m) - P.c();
    const double k = P.gain(m);
    for (std::size_t i = 0; i < samples; ++i) {
      double lambda = 0.0;
      while (std::abs(lambda) < 1e-3) lambda = uniform(rng, -3.0, 3.0);
      const VecN on = P.c() + lambda * axis;
      const double scale = k * std::max(1.0, (on - P.p(m)).norm());
      rep.add("on_line_nonzero", on, 1e-10 * scale - kappa(on, m, P).norm());

      VecN off;
      double d = 0.0;
      do {
        off = P.c() + random_normal(P.dim(), rng) * (box / 3.0);
        d = dist_to_line(off, P.c(), axis);
      } while (d < 1e-3);
      // |kappa| = k |p_m - c| d / |x - c| exactly.
      const double expect = k * axis.norm() * d / (off - P.c()).norm();
      rep.add("off_line_zero", off, kappa(off, m, P).norm() - 0.99 * expect);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// No point of the line through c and p_m belongs to F_m.

inline PropertyReport check_lemma4(const ValidatedParams& P, std::size_t samples, std::uint64_t seed) {
  auto rep = make_report("lemma4_line_outside_flow_set", seed, P.dim());
  Rng rng(seed);
  for (Mode m : {Mode::Plus, Mode::Minus}) {
    const VecN axis = (P.p(m) - P.c()).normalized();
    for (std::size_t i = 0; i < samples; ++i) {
      const double s = uniform(rng, -2.0 * P.eps_h(), 2.0 * P.eps_h());
      const VecN x = P.c() + s * axis;
      rep.add("line_point_in_flow_set", x, flow_margin(x, m, P) - kVerifyTol);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Every point of J_0 has a nonempty jump image, and every admissible target
// lands strictly inside F_m' \ J_m'.

inline PropertyReport check_jump_cover(const ValidatedParams& P, std::size_t samples, std::uint64_t seed) {
  auto rep = make_report("jump_cover_and_hysteresis", seed, P.dim());
  Rng rng(seed);
  std::size_t accepted = 0;
  const std::size_t budget = 200 * samples + 1000;
  for (std::size_t attempt = 0; attempt < budget && accepted < samples; ++attempt) {
    const VecN x = P.c() + uniform(rng, P.eps(), P.eps_s()) * random_unit(P.dim(), rng);
    if (!jump_set_contains(x, Mode::Stabilize, P, 0.0)) continue;
    ++accepted;
    const double cover =
        std::max(cone_clearance(x, Mode::Plus, P), cone_clearance(x, Mode::Minus, P)) + 1e-15;
    rep.add("jump_image_empty", x, cover);
    for (Mode target : jump_targets(x, P)) {
      const double inside_flow = kVerifyTol - flow_margin(x, target, P);
      const double outside_jump = jump_margin(x, target, P);
      rep.add("target_not_in_flow_minus_jump", x, std::min(inside_flow, outside_jump));
    }
  }
  if (accepted == 0) rep.notes.push_back("EmptyStratum: no samples of J_0");
  return rep;
}

// ---------------------------------------------------------------------------
// Sign conditions of the closed-loop field on each boundary stratum of the
// flow sets.

inline PropertyReport check_boundary_flow(const ValidatedParams& P, std::size_t samples, std::uint64_t seed) {
  auto rep = make_report("boundary_flow_signs", seed, P.dim());
  Rng rng(seed);
  const VecN& c = P.c();
  const VecN half = 0.5 * c;
  const double half_r = 0.5 * c.norm();
  const VecN mu_c = P.mu() * c;
  const double mu_r = P.mu() * c.norm();
  const std::size_t budget = 50 * samples + 100;
  constexpr double kInset = 1e-9;
  constexpr double kEqTol = 1e-12;

  // Draws points from `draw` until `keep` accepts `samples` of them.
  auto stratum = [&](const std::string& label, auto draw, auto keep, auto slack) {
    std::size_t got = 0;
    for (std::size_t a = 0; a < budget && got < samples; ++a) {
      const VecN x = draw();
      if (!keep(x)) continue;
      ++got;
      rep.add(label, x, slack(x));
    }
    if (got == 0) rep.notes.push_back("EmptyStratum: " + label);
  };
  auto on_sphere = [&](const VecN& center, double radius) {
    return [&, center, radius] { return VecN(center + radius * random_unit(P.dim(), rng)); };
  };

  const Mode zero = Mode::Stabilize;
  stratum(
      "F0_inner_shell_inside_half_ball", on_sphere(c, P.eps()),
      [&](const VecN& x) { return (x - half).norm() < half_r - kInset; },
      [&](const VecN& x) { return (x - c).dot(kappa(x, zero, P)); });
  stratum(
      "F0_outer_shell_exit", on_sphere(c, P.eps_s()),
      [&](const VecN& x) { return (x - half).norm() > half_r + kInset; },
      [&](const VecN& x) { return -(x - c).dot(kappa(x, zero, P)); });
  stratum(
      "F0_half_ball_sphere", on_sphere(half, half_r),
      [&](const VecN& x) {
        const double r = (x - c).norm();
        return r > P.eps() + kInset && r < P.eps_s() - kInset;
      },
      [&](const VecN& x) {
        const VecN u = kappa(x, zero, P);
        return -(x - half).dot(u) + kEqTol * std::max(1.0, (x - half).norm() * u.norm());
      });

  for (Mode m : {Mode::Plus, Mode::Minus}) {
    const std::string tag = m == Mode::Plus ? "F1_" : "Fm1_";
    const VecN axis = P.p(m) - c;
    const VecN axis_hat = axis.normalized();
    auto off_carve_and_nappe = [&, m](const VecN& x) {
      const auto nap = detail::nappe_coords(x, m, P.psi(), P);
      return (x - mu_c).norm() > mu_r + kInset && (nap.quad > 0.0 || nap.along > 0.0);
    };
    auto tangent = [&, m](const VecN& x) {
      const VecN u = kappa(x, m, P);
      return kEqTol * std::max(1.0, (x - c).norm() * u.norm()) - std::abs((x - c).dot(u));
    };
    stratum(tag + "inner_shell_tangent", on_sphere(c, P.eps()), off_carve_and_nappe, tangent);
    stratum(tag + "outer_shell_tangent", on_sphere(c, P.eps_h()), off_carve_and_nappe, tangent);

    stratum(
        tag + "cone_surface",
        [&] {
          const double r = uniform(rng, P.eps(), P.eps_h());
          const VecN u = random_unit_orthogonal(axis_hat, rng);
          return VecN(c + r * (-std::cos(P.psi()) * axis_hat + std::sin(P.psi()) * u));
        },
        [](const VecN&) { return true; },
        [&, m](const VecN& x) {
          const VecN normal = pi_theta_apply(axis, P.psi(), x - c);
          const VecN u = kappa(x, m, P);
          return normal.dot(u) + kEqTol * std::max(1.0, normal.norm() * u.norm());
        });

    // Points of the carve sphere at a prescribed distance r from c.
    stratum(
        tag + "carve_sphere_exit",
        [&] {
          const double r = uniform(rng, P.eps(), P.eps_h());
          const double nc = c.norm();
          const double a = ((P.mu() * P.mu() + (1 - P.mu()) * (1 - P.mu())) * nc * nc - r * r) /
                           (2.0 * P.mu() * (1 - P.mu()) * nc * nc);
          if (std::abs(a) > 1.0) return VecN(VecN::Constant(P.dim(), std::numeric_limits<double>::quiet_NaN()));
          const VecN u = random_unit_orthogonal(c, rng);
          return VecN(mu_c + mu_r * (a * c / nc + std::sqrt(1.0 - a * a) * u));
        },
        [](const VecN& x) { return x.allFinite(); },
        [&, m](const VecN& x) { return -(x - mu_c).dot(kappa(x, m, P)); });
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lyapunov function along trajectories

struct LyapunovSample {
  double t = 0.0;
  Mode m = Mode::Stabilize;
  double V = 0.0;
};

inline std::vector<LyapunovSample> lyapunov_series(const HybridTrajectory& traj, const ValidatedParams& P) {
  std::vector<LyapunovSample> out;
  for (const auto& arc : traj.arcs)
    for (const auto& s : arc.samples) out.push_back({s.t, arc.mode, lyapunov(s.x, arc.mode, P)});
  return out;
}

// Spread of |x - c| within each avoidance arc; the exact flow keeps it constant.
inline std::vector<double> avoidance_drifts(const HybridTrajectory& traj, const VecN& c) {
  std::vector<double> out;
  for (const auto& arc : traj.arcs) {
    if (!is_avoidance(arc.mode) || arc.samples.size() < 2) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : arc.samples) {
      const double r = (s.x - c).norm();
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    out.push_back(hi - lo);
  }
  return out;
}

struct AuditOptions {
  double safety_rel = 1e-6;
  int max_jumps = 3;
  double v_step_tol = 1e-9;
  double h = 1e-3;
  // Radius drift of an avoidance arc must stay below
  // drift_coeff * h^4 * duration + drift_floor.
  double drift_coeff = 1.0;
  double drift_floor = 1e-11;
};

inline PropertyReport audit_trajectory(const HybridTrajectory& traj, const ValidatedParams& P,
                                       const AuditOptions& opt = {}) {
  if (traj.arcs.empty() || traj.arcs.front().samples.empty()) {
    throw Error(ErrorCode::MismatchedParams, "empty trajectory");
  }
  for (const auto& arc : traj.arcs)
    for (const auto& s : arc.samples)
      if (s.x.size() != P.dim()) throw Error(ErrorCode::MismatchedParams, "trajectory dimension differs from params");

  auto rep = make_report("trajectory_audit", 0, P.dim());
  const VecN& c = P.c();
  const double floor_dist = P.eps() * (1.0 - opt.safety_rel);
  for (const auto& arc : traj.arcs)
    for (const auto& s : arc.samples) rep.add("safety", s.x, (s.x - c).norm() - floor_dist);

  rep.add("jump_bound", traj.final_sample().x, opt.max_jumps + 0.5 - traj.jumps());

  for (std::size_t a = 0; a < traj.arcs.size(); ++a) {
    const auto& arc = traj.arcs[a];
    if (arc.samples.size() < 2) continue;
    double path = 0.0;
    double v_prev = lyapunov(arc.samples.front().x, arc.mode, P);
    const double v_start = v_prev;
    for (std::size_t k = 1; k < arc.samples.size(); ++k) {
      const auto& s = arc.samples[k];
      path += (s.x - arc.samples[k - 1].x).norm();
      const double v = lyapunov(s.x, arc.mode, P);
      rep.add("lyapunov_step", s.x, v_prev + opt.v_step_tol - v);
      v_prev = v;
    }
    rep.add("lyapunov_arc", arc.samples.back().x, (v_start - 1e-12 * path) - v_prev);

    if (is_avoidance(arc.mode)) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& s : arc.samples) {
        const double r = (s.x - c).norm();
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      const double bound = opt.drift_coeff * std::pow(opt.h, 4) * arc.duration() + opt.drift_floor;
      rep.add("drift", arc.samples.back().x, bound - (hi - lo));
    }
  }

  // A jump out of mode 0 lands strictly inside the new flow set, so it must be
  // followed by flow of positive duration (or by the end of the run).
  for (std::size_t a = 0; a + 1 < traj.arcs.size(); ++a) {
    const auto& arc = traj.arcs[a];
    if (!arc.jump || arc.jump->from != Mode::Stabilize) continue;
    const auto& next = traj.arcs[a + 1];
    const bool ok = next.duration() > 0.0 || next.terminal.has_value();
    rep.add("consecutive_jump", arc.jump->x, ok ? 1.0 : -1.0);
  }
  return rep;
}

// Forward difference of V against the analytic rate <grad V, kappa> along
// every full step of every flow arc.
inline PropertyReport check_lyapunov_rate(const HybridTrajectory& traj, const ValidatedParams& P) {
  auto rep = make_report("lyapunov_rate", 0, P.dim());
  for (const auto& arc : traj.arcs) {
    for (std::size_t k = 1; k + 1 < arc.samples.size(); ++k) {
      const auto& s0 = arc.samples[k - 1];
      const auto& s1 = arc.samples[k];
      const auto& s2 = arc.samples[k + 1];
      const double dt = s1.t - s0.t;
      if (!(dt > 0.0)) continue;
      const double fd = (lyapunov(s1.x, arc.mode, P) - lyapunov(s0.x, arc.mode, P)) / dt;
      const double a0 = lyapunov_rate(s0.x, arc.mode, P);
      const double a1 = lyapunov_rate(s1.x, arc.mode, P);
      const double a2 = lyapunov_rate(s2.x, arc.mode, P);
      const double curvature = std::max(std::abs(a1 - a0) / dt, std::abs(a2 - a1) / std::max(dt, s2.t - s1.t));
      const double bound = 10.0 * dt * curvature + 1e-9;
      rep.add("rate_mismatch", s0.x, bound - std::abs(fd - a0));
    }
  }
  return rep;
}

}  // namespace hybrid_avoid
