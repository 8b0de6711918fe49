#include <cmath>

#include <gtest/gtest.h>

#include "hybrid_avoid/hybrid_sim.hpp"
#include "reference_params.hpp"

using namespace hybrid_avoid;
using hybrid_avoid::testing::avoidance_start;
using hybrid_avoid::testing::reference_params;

namespace {

class Sim : public ::testing::Test {
 protected:
  ValidatedParams P = reference_params();
  VecN c_hat = P.c().normalized();
};

std::vector<int> mode_sequence(const HybridTrajectory& t) {
  std::vector<int> out;
  for (const auto& a : t.arcs) out.push_back(to_int(a.mode));
  return out;
}

}  // namespace

TEST_F(Sim, Rk4MatchesExponentialDecay) {
  const HybridState s{make_vec({1, 0, 0}), Mode::Stabilize, 0.0, 0};
  const VecN x1 = rk4_flow_step(s, 0.1, P);
  EXPECT_NEAR(x1[0], 0.904837418035959568, 1e-7);
  EXPECT_NEAR(x1[0], 0.904837418035959568, 1e-7);
  EXPECT_EQ(x1[1], 0.0);
}

TEST_F(Sim, Rk4ZeroFieldLeavesStateUnchanged) {
  const VecN on_line = P.c() + 0.5 * (P.p1() - P.c());
  const HybridState s{on_line, Mode::Plus, 0.0, 0};
  const VecN x1 = rk4_flow_step(s, 0.1, P);
  EXPECT_LT((x1 - on_line).norm(), 1e-15);
}

TEST_F(Sim, Rk4AvoidanceRadiusDriftIsHighOrder) {
  const auto x0 = avoidance_start(P, Mode::Plus, 0.85);
  ASSERT_TRUE(x0);
  auto drift = [&](double h) {
    const HybridState s{*x0, Mode::Plus, 0.0, 0};
    return std::abs((rk4_flow_step(s, h, P) - P.c()).norm() - 0.85);
  };
  const double d1 = drift(0.2);
  const double d2 = drift(0.1);
  EXPECT_LT(d1, 1e-4);
  // Local error is fifth order: halving h shrinks it by about 32.
  EXPECT_GT(d1 / d2, 16.0);
}

TEST_F(Sim, LocateEventOnOuterShell) {
  // Straight line toward the origin through the obstacle center.
  const HybridState s{3.0 * c_hat, Mode::Stabilize, 0.0, 0};
  const double t_star = std::log(3.0 / (P.c().norm() + P.eps_s()));
  HybridState at = s;
  at.x = s.x * std::exp(-(t_star - 0.0005));
  const auto hit = locate_event(at, 1e-3, P);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->dt, 0.0005, 1e-9);
  EXPECT_NEAR((hit->x - P.c()).norm(), P.eps_s(), 1e-9);
  EXPECT_LE(jump_margin(hit->x, Mode::Stabilize, P), SimConfig{}.event_tol);
}

TEST_F(Sim, LocateEventNone) {
  const HybridState s{-2.0 * c_hat, Mode::Stabilize, 0.0, 0};
  EXPECT_FALSE(locate_event(s, 1e-3, P).has_value());
}

TEST_F(Sim, LocateEventImmediate) {
  const HybridState s{P.c() + P.eps_s() * c_hat, Mode::Stabilize, 0.0, 0};
  const auto hit = locate_event(s, 1e-3, P);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->dt, 0.0);
}

TEST_F(Sim, LocateEventCatchesThinShellInCoarseStep) {
  // A step long enough to cross the whole J_0 shell.
  const HybridState s{P.c() + 0.85 * c_hat, Mode::Stabilize, 0.0, 0};
  const auto hit = locate_event(s, 0.2, P);
  ASSERT_TRUE(hit);
  EXPECT_LE(jump_margin(hit->x, Mode::Stabilize, P), SimConfig{}.event_tol);
}

TEST_F(Sim, FrontStartNeverJumps) {
  const auto t = simulate(-2.0 * c_hat, Mode::Stabilize, P);
  EXPECT_EQ(t.terminal, TerminalReason::GoalReached);
  EXPECT_EQ(t.jumps(), 0);
  EXPECT_LE(t.final_sample().x.norm(), 1e-3);
}

TEST_F(Sim, BehindStartJumpsTwice) {
  const auto t = simulate(3.0 * c_hat, Mode::Stabilize, P);
  EXPECT_EQ(t.terminal, TerminalReason::GoalReached);
  EXPECT_EQ(t.jumps(), 2);
  const auto modes = mode_sequence(t);
  ASSERT_EQ(modes.size(), 3u);
  EXPECT_EQ(modes[0], 0);
  EXPECT_NE(modes[1], 0);
  EXPECT_EQ(modes[2], 0);
  EXPECT_GE(t.min_dist(P.c()), P.eps());
  // Starting exactly on the symmetry axis both avoidance modes are admissible.
  EXPECT_EQ(t.ambiguity_count(), 1);
}

TEST_F(Sim, AvoidanceStartJumpsOnce) {
  for (Mode m : {Mode::Plus, Mode::Minus}) {
    const auto x0 = avoidance_start(P, m, 0.85);
    ASSERT_TRUE(x0);
    const auto t = simulate(*x0, m, P);
    EXPECT_EQ(t.terminal, TerminalReason::GoalReached);
    EXPECT_EQ(t.jumps(), 1) << to_int(m);
    EXPECT_EQ(mode_sequence(t), (std::vector<int>{to_int(m), 0}));
  }
}

TEST_F(Sim, JumpEventsRecordContinuity) {
  const auto t = simulate(3.0 * c_hat, Mode::Stabilize, P);
  for (std::size_t a = 0; a + 1 < t.arcs.size(); ++a) {
    ASSERT_TRUE(t.arcs[a].jump);
    const auto& next = t.arcs[a + 1];
    EXPECT_EQ(t.arcs[a].jump->to, next.mode);
    EXPECT_EQ(next.samples.front().x, t.arcs[a].samples.back().x);
    EXPECT_EQ(next.samples.front().t, t.arcs[a].samples.back().t);
    EXPECT_EQ(next.j, t.arcs[a].j + 1);
  }
}

TEST_F(Sim, Limits) {
  SimConfig cfg;
  cfg.t_max = 1.0;
  const auto slow = simulate(4.0 * make_vec({0, 1, 0}), Mode::Stabilize, P, cfg);
  EXPECT_EQ(slow.terminal, TerminalReason::TimeLimit);
  EXPECT_NEAR(slow.t_end(), 1.0, 1e-12);

  cfg = {};
  cfg.max_jumps_hard = 1;
  const auto capped = simulate(3.0 * c_hat, Mode::Stabilize, P, cfg);
  EXPECT_EQ(capped.terminal, TerminalReason::JumpLimit);
  EXPECT_EQ(capped.jumps(), 1);
}

TEST_F(Sim, Errors) {
  try {
    simulate(P.c() + 0.1 * c_hat, Mode::Stabilize, P);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsafeStart);
  }
  SimConfig bad;
  bad.h = 0.0;
  try {
    simulate(3.0 * c_hat, Mode::Stabilize, P, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadConfig);
  }
  EXPECT_THROW(simulate(make_vec({1, 2}), Mode::Stabilize, P), Error);
}

TEST_F(Sim, BatchPreservesOrderAndIsDeterministic) {
  EXPECT_TRUE(batch_simulate({}, P).empty());
  std::vector<InitialCondition> inits{{3.0 * c_hat, Mode::Stabilize},
                                      {P.c() + 0.1 * c_hat, Mode::Stabilize},
                                      {-2.0 * c_hat, Mode::Stabilize},
                                      {3.0 * c_hat, Mode::Stabilize}};
  const auto serial = batch_simulate(inits, P);
  const auto parallel = batch_simulate(inits, P, {}, true);
  ASSERT_EQ(serial.size(), 4u);
  EXPECT_TRUE(serial[0].ok());
  EXPECT_FALSE(serial[1].ok());
  EXPECT_EQ(serial[1].error->code(), ErrorCode::UnsafeStart);
  EXPECT_EQ(serial[2].trajectory->jumps(), 0);
  for (std::size_t i : {0u, 2u, 3u}) {
    const auto& a = *serial[i].trajectory;
    const auto& b = *parallel[i].trajectory;
    ASSERT_EQ(a.arcs.size(), b.arcs.size());
    for (std::size_t k = 0; k < a.arcs.size(); ++k) {
      ASSERT_EQ(a.arcs[k].samples.size(), b.arcs[k].samples.size());
      EXPECT_EQ(a.arcs[k].samples.back().x, b.arcs[k].samples.back().x);
    }
  }
  const auto& first = *serial[0].trajectory;
  const auto& dup = *serial[3].trajectory;
  EXPECT_EQ(first.final_sample().x, dup.final_sample().x);
  EXPECT_EQ(first.t_end(), dup.t_end());
}
