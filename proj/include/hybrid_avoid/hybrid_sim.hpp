#pragma once

// Closed-loop integration on hybrid time domains. Flow uses fixed-step RK4
// with the mode frozen; entry into the jump set is located by bisection on the
// jump-set margin, after which the jump map is applied with x unchanged.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hybrid_avoid/controller.hpp"
#include "hybrid_avoid/errors.hpp"
#include "hybrid_avoid/geometry.hpp"
#include "hybrid_avoid/params.hpp"

namespace hybrid_avoid {

struct HybridState {
  VecN x;
  Mode m = Mode::Stabilize;
  double t = 0.0;
  int j = 0;
};

struct SimConfig {
  double h = 1e-3;
  double t_max = 50.0;
  double goal_tol = 1e-3;
  double event_tol = 1e-10;
  int max_jumps_hard = 10;

  void check() const {
    if (!(h > 0.0) || !(t_max > 0.0) || !(goal_tol > 0.0) || !(event_tol > 0.0) || max_jumps_hard < 1) {
      throw Error(ErrorCode::BadConfig, "sim config needs h, t_max, goal_tol, event_tol > 0");
    }
  }
};

enum class TerminalReason { GoalReached, TimeLimit, JumpLimit };

constexpr std::string_view to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::GoalReached: return "goal_reached";
    case TerminalReason::TimeLimit: return "time_limit";
    case TerminalReason::JumpLimit: return "jump_limit";
  }
  return "unknown";
}

struct Sample {
  double t = 0.0;
  VecN x;
};

struct JumpEvent {
  double t = 0.0;
  Mode from = Mode::Stabilize;
  Mode to = Mode::Stabilize;
  VecN x;
  bool ambiguous = false;
};

// A maximal interval of flow in a single mode, closed by either a jump or the
// end of the run.
struct Arc {
  Mode mode = Mode::Stabilize;
  int j = 0;
  std::vector<Sample> samples;
  std::optional<JumpEvent> jump;
  std::optional<TerminalReason> terminal;

  double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
};

struct HybridTrajectory {
  std::vector<Arc> arcs;
  TerminalReason terminal = TerminalReason::TimeLimit;

  int jumps() const {
    int n = 0;
    for (const auto& a : arcs) n += a.jump ? 1 : 0;
    return n;
  }

  int ambiguity_count() const {
    int n = 0;
    for (const auto& a : arcs) n += (a.jump && a.jump->ambiguous) ? 1 : 0;
    return n;
  }

  double min_dist(const VecN& c) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& a : arcs)
      for (const auto& s : a.samples) d = std::min(d, (s.x - c).norm());
    return d;
  }

  const Sample& final_sample() const { return arcs.back().samples.back(); }
  double t_end() const { return final_sample().t; }
  bool reached_goal() const { return terminal == TerminalReason::GoalReached; }
};

// One classical RK4 step of x' = kappa(x, m) with m frozen.
inline VecN rk4_flow_step(const HybridState& s, double h, const ValidatedParams& P) {
  const VecN k1 = kappa(s.x, s.m, P);
  const VecN k2 = kappa(s.x + 0.5 * h * k1, s.m, P);
  const VecN k3 = kappa(s.x + 0.5 * h * k2, s.m, P);
  const VecN k4 = kappa(s.x + h * k3, s.m, P);
  return s.x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct EventHit {
  double dt = 0.0;  // offset from s.t
  VecN x;
};

// Earliest entry into the jump set of s.m within a step of length h. The
// returned point satisfies jump_margin <= event_tol.
inline std::optional<EventHit> locate_event(const HybridState& s, double h, const ValidatedParams& P,
                                            double event_tol = SimConfig{}.event_tol) {
  auto state_at = [&](double tau) { return tau == 0.0 ? s.x : rk4_flow_step(s, tau, P); };
  auto margin_at = [&](const VecN& x) { return jump_margin(x, s.m, P); };

  if (margin_at(s.x) <= event_tol) return EventHit{0.0, s.x};
  VecN x_end = state_at(h);
  // A step that ends outside both sets may have crossed a thin jump set
  // entirely; scan it finely before giving up.
  const bool end_in_jump = margin_at(x_end) <= event_tol;
  const bool end_left_flow = !end_in_jump && flow_margin(x_end, s.m, P) > kSimTol;
  if (!end_in_jump && !end_left_flow) return std::nullopt;

  // Coarse scan so that a double crossing inside the step resolves to the
  // earlier root.
  const int kScan = end_left_flow ? 64 : 4;
  double lo = 0.0;
  double hi = h;
  VecN x_hi = x_end;
  bool found = end_in_jump;
  for (int k = 1; k < kScan; ++k) {
    const double tau = h * k / kScan;
    VecN xk = state_at(tau);
    if (margin_at(xk) <= event_tol) {
      hi = tau;
      x_hi = std::move(xk);
      found = true;
      break;
    }
    lo = tau;
  }
  if (!found) return std::nullopt;

  double g_hi = margin_at(x_hi);
  for (int it = 0; it < 200; ++it) {
    if (g_hi >= -event_tol) break;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * h) break;
    const double mid = 0.5 * (lo + hi);
    VecN xm = state_at(mid);
    const double gm = margin_at(xm);
    if (gm <= event_tol) {
      hi = mid;
      x_hi = std::move(xm);
      g_hi = gm;
    } else {
      lo = mid;
    }
  }
  return EventHit{hi, std::move(x_hi)};
}

inline HybridTrajectory simulate(const VecN& x0, Mode m0, const ValidatedParams& P, const SimConfig& cfg = {}) {
  cfg.check();
  require_finite(x0, "initial state");
  require_same_dim(x0, P.c());
  if ((x0 - P.c()).norm() < P.eps()) throw Error(ErrorCode::UnsafeStart, "initial state inside the obstacle");

  // Flow-set slack tolerated before declaring the run stuck, scaled by the
  // size of the avoidance sets.
  const double stall_tol = kSimTol * std::max(1.0, P.c().norm() + P.eps_h());

  HybridState s{x0, m0, 0.0, 0};
  HybridTrajectory traj;
  traj.arcs.push_back(Arc{s.m, s.j, {{s.t, s.x}}, std::nullopt, std::nullopt});

  auto finish = [&](TerminalReason why) {
    traj.terminal = why;
    traj.arcs.back().terminal = why;
  };

  while (true) {
    if (s.x.norm() <= cfg.goal_tol) {
      finish(TerminalReason::GoalReached);
      break;
    }
    if (s.t >= cfg.t_max) {
      finish(TerminalReason::TimeLimit);
      break;
    }

    // Jump priority on shared boundaries.
    if (jump_margin(s.x, s.m, P) <= cfg.event_tol) {
      const JumpDecision d = jump_decide(s.x, s.m, P);
      traj.arcs.back().jump = JumpEvent{s.t, s.m, d.to, s.x, d.ambiguous};
      s.m = d.to;
      ++s.j;
      traj.arcs.push_back(Arc{s.m, s.j, {{s.t, s.x}}, std::nullopt, std::nullopt});
      if (s.j >= cfg.max_jumps_hard) {
        finish(TerminalReason::JumpLimit);
        break;
      }
      continue;
    }

    if (flow_margin(s.x, s.m, P) > stall_tol) {
      throw Error(ErrorCode::NumericalStall, "state left both flow and jump sets of mode " +
                                                 std::to_string(to_int(s.m)) + " at t = " + std::to_string(s.t));
    }

    const double dt = std::min(cfg.h, cfg.t_max - s.t);
    auto& samples = traj.arcs.back().samples;
    if (auto hit = locate_event(s, dt, P, cfg.event_tol)) {
      const double t_new = s.t + hit->dt;
      s.x = std::move(hit->x);
      if (t_new > s.t) {
        s.t = t_new;
        samples.push_back({s.t, s.x});
      } else {
        samples.back().x = s.x;
      }
      if (jump_margin(s.x, s.m, P) > cfg.event_tol) {
        throw Error(ErrorCode::NumericalStall, "bisection failed to reach the jump set");
      }
    } else {
      s.x = rk4_flow_step(s, dt, P);
      s.t += dt;
      samples.push_back({s.t, s.x});
    }
  }
  return traj;
}

struct InitialCondition {
  VecN x0;
  Mode m0 = Mode::Stabilize;
};

struct RunOutcome {
  std::optional<HybridTrajectory> trajectory;
  std::optional<Error> error;

  bool ok() const { return trajectory.has_value(); }
};

// Independent runs; order-preserving; failures are collected per run.
inline std::vector<RunOutcome> batch_simulate(const std::vector<InitialCondition>& inits, const ValidatedParams& P,
                                              const SimConfig& cfg = {}, bool parallel = false) {
  auto run_one = [&](const InitialCondition& ic) {
    RunOutcome out;
    try {
      out.trajectory = simulate(ic.x0, ic.m0, P, cfg);
    } catch (const Error& e) {
      out.error = e;
    }
    return out;
  };

  std::vector<RunOutcome> results(inits.size());
  if (!parallel || inits.size() < 2) {
    for (std::size_t i = 0; i < inits.size(); ++i) results[i] = run_one(inits[i]);
    return results;
  }
  const std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t base = 0; base < inits.size(); base += workers) {
    std::vector<std::future<RunOutcome>> pending;
    const std::size_t end = std::min(inits.size(), base + workers);
    for (std::size_t i = base; i < end; ++i) pending.push_back(std::async(std::launch::async, run_one, inits[i]));
    for (std::size_t i = base; i < end; ++i) results[i] = pending[i - base].get();
  }
  return results;
}

}  // namespace hybrid_avoid
