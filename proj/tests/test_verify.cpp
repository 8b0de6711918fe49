#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hybrid_avoid/verify.hpp"
#include "reference_params.hpp"

using namespace hybrid_avoid;
using hybrid_avoid::testing::reference_params;
using hybrid_avoid::testing::reference_raw;

namespace {

constexpr std::size_t kSamples = 2000;

HybridTrajectory reference_run() {
  const ValidatedParams P = reference_params();
  return simulate(3.0 * P.c().normalized(), Mode::Stabilize, P);
}

}  // namespace

TEST(OperatorIdentities, HoldAcrossDimensions) {
  for (int n = 2; n <= 6; ++n) {
    const auto r = check_operator_identities(n, kSamples, 11 + n);
    EXPECT_TRUE(r.pass()) << n << " worst " << r.worst_margin;
    EXPECT_EQ(r.samples_tested, kSamples);
  }
}

TEST(Lemma1, OrthogonalAxesPass) {
  for (int n = 2; n <= 6; ++n) {
    const VecN c = VecN::Constant(n, 0.5);
    VecN v1 = VecN::Zero(n);
    VecN v2 = VecN::Zero(n);
    v1[0] = 1.0;
    v2[1] = 1.0;
    const auto r = check_lemma1(c, v1, v2, 0.3, 0.3, kSamples, 5);
    EXPECT_TRUE(r.pass()) << n;
    EXPECT_EQ(r.samples_tested, 2 * kSamples);
  }
}

TEST(Lemma1, ViolatedHypothesisFindsOverlap) {
  const VecN c = make_vec({0, 0, 0});
  const VecN v1 = make_vec({1, 0, 0});
  const VecN v2 = make_vec({0, 1, 0});
  EXPECT_THROW(check_lemma1(c, v1, v2, 0.9, 0.9, kSamples, 5), Error);
  const auto r = check_lemma1(c, v1, v2, 0.9, 0.9, kSamples, 5, false);
  EXPECT_FALSE(r.pass());
  ASSERT_FALSE(r.failures.empty());
  // The bisector direction lies in both cones.
  const VecN bis = make_vec({1, 1, 0}).normalized();
  EXPECT_LT(cone_quadratic(v1, 0.9, bis), 0.0);
  EXPECT_LT(cone_quadratic(v2, 0.9, bis), 0.0);
}

TEST(Lemma1, OppositeAxesArePreconditionViolation) {
  const VecN c = make_vec({0, 0});
  try {
    check_lemma1(c, make_vec({1, 0}), make_vec({-1, 0}), 0.1, 0.1, 10, 1, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PreconditionViolated);
  }
}

TEST(LemmaChecks, ReferenceParameters) {
  const ValidatedParams P = reference_params();
  EXPECT_TRUE(check_lemma3(P, kSamples, 1).pass());
  EXPECT_TRUE(check_lemma4(P, kSamples, 1).pass());
  const auto cover = check_jump_cover(P, kSamples, 1);
  EXPECT_TRUE(cover.pass());
  EXPECT_TRUE(cover.notes.empty());
  const auto bnd = check_boundary_flow(P, kSamples, 1);
  EXPECT_TRUE(bnd.pass()) << (bnd.failures.empty() ? "" : bnd.failures[0].label);
  EXPECT_TRUE(bnd.notes.empty());
}

TEST(LemmaChecks, DeterministicUnderSeed) {
  const ValidatedParams P = reference_params();
  const auto a = check_boundary_flow(P, 500, 42);
  const auto b = check_boundary_flow(P, 500, 42);
  EXPECT_EQ(a.worst_margin, b.worst_margin);
  EXPECT_EQ(a.samples_tested, b.samples_tested);
  EXPECT_EQ(a.seed, 42u);
  const auto c = check_boundary_flow(P, 500, 43);
  EXPECT_NE(a.worst_margin, c.worst_margin);
}

TEST(LemmaChecks, RandomFeasibleConfigurations) {
  for (int n = 2; n <= 6; ++n) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      Rng rng(1000 * n + s);
      const ValidatedParams Q = random_feasible_params(n, rng);
      EXPECT_TRUE(Q.certified());
      EXPECT_TRUE(check_lemma3(Q, 500, s).pass()) << n;
      EXPECT_TRUE(check_lemma4(Q, 500, s).pass()) << n;
      EXPECT_TRUE(check_jump_cover(Q, 500, s).pass()) << n;
      EXPECT_TRUE(check_boundary_flow(Q, 500, s).pass()) << n;
    }
  }
}

TEST(LemmaChecks, SwappedHysteresisAnglesFailJumpCover) {
  RawParams r = reference_raw();
  r.psi = 0.266;
  r.psi_bar = 0.249;
  const ValidatedParams U = ValidatedParams::unchecked(r);
  const auto rep = check_jump_cover(U, kSamples, 3);
  EXPECT_FALSE(rep.pass());
  EXPECT_GT(rep.failures_labelled("target_not_in_flow_minus_jump"), 0u);
}

TEST(Audit, ReferenceRunPasses) {
  const ValidatedParams P = reference_params();
  const auto t = reference_run();
  const auto rep = audit_trajectory(t, P);
  EXPECT_TRUE(rep.pass()) << (rep.failures.empty() ? "" : rep.failures[0].label);
  EXPECT_TRUE(check_lyapunov_rate(t, P).pass());
}

TEST(Audit, DipIntoObstacleFails) {
  const ValidatedParams P = reference_params();
  auto t = reference_run();
  const VecN dip = P.c() + 0.5 * P.eps() * P.c().normalized();
  auto& s = t.arcs.front().samples;
  s.insert(s.begin() + 1, Sample{0.5 * (s[0].t + s[1].t), dip});
  const auto rep = audit_trajectory(t, P);
  EXPECT_FALSE(rep.pass());
  ASSERT_GT(rep.failures_labelled("safety"), 0u);
  EXPECT_EQ(rep.failures[0].x, dip);
  EXPECT_NEAR(rep.failures[0].margin, -0.5 * P.eps() + 0.7e-6, 1e-12);
}

TEST(Audit, FourJumpsFailJumpBound) {
  const ValidatedParams P = reference_params();
  HybridTrajectory t;
  const VecN x = make_vec({4, 0, 0});
  const Mode seq[] = {Mode::Stabilize, Mode::Plus, Mode::Stabilize, Mode::Minus, Mode::Stabilize};
  for (int k = 0; k < 5; ++k) {
    Arc a{seq[k], k, {{1.0 * k, x}, {1.0 * k + 0.5, x}}, std::nullopt, std::nullopt};
    if (k < 4) a.jump = JumpEvent{1.0 * k + 0.5, seq[k], seq[k + 1], x, false};
    t.arcs.push_back(a);
  }
  EXPECT_EQ(t.jumps(), 4);
  const auto rep = audit_trajectory(t, P);
  EXPECT_EQ(rep.failures_labelled("jump_bound"), 1u);
}

TEST(Audit, MismatchedDimension) {
  const ValidatedParams P = reference_params();
  HybridTrajectory t;
  t.arcs.push_back(Arc{Mode::Stabilize, 0, {{0.0, make_vec({3, 0})}}, std::nullopt, std::nullopt});
  try {
    audit_trajectory(t, P);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MismatchedParams);
  }
}

TEST(Audit, LyapunovIncreaseAlongArcFails) {
  const ValidatedParams P = reference_params();
  HybridTrajectory t;
  t.arcs.push_back(Arc{Mode::Stabilize, 0, {{0.0, make_vec({3, 0, 0})}, {0.1, make_vec({3.1, 0, 0})}},
                       std::nullopt, TerminalReason::TimeLimit});
  const auto rep = audit_trajectory(t, P);
  EXPECT_EQ(rep.failures_labelled("lyapunov_step"), 1u);
  EXPECT_EQ(rep.failures_labelled("lyapunov_arc"), 1u);
}

TEST(LyapunovSeries, ValuesAndMonotoneArcs) {
  const ValidatedParams P = reference_params();
  const auto t = reference_run();
  const auto series = lyapunov_series(t, P);
  std::size_t total = 0;
  for (const auto& a : t.arcs) total += a.samples.size();
  ASSERT_EQ(series.size(), total);
  for (std::size_t k = 1; k < series.size(); ++k) {
    if (series[k].m == series[k - 1].m && series[k].t > series[k - 1].t) {
      EXPECT_LE(series[k].V, series[k - 1].V + 1e-12);
    }
  }
  EXPECT_LT(series.back().V, 1e-6);
}

TEST(Drift, ShrinksWithStep) {
  const ValidatedParams P = reference_params();
  auto worst = [&](double h) {
    SimConfig cfg;
    cfg.h = h;
    const auto d = avoidance_drifts(simulate(3.0 * P.c().normalized(), Mode::Stabilize, P, cfg), P.c());
    double w = 0.0;
    for (double x : d) w = std::max(w, x);
    return w;
  };
  EXPECT_GE(worst(0.08) / worst(0.04), 8.0);
}
