#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kgcmlp/analysis.hpp"
#include "kgcmlp/tpm.hpp"

using namespace kgcmlp;

namespace {

InputMatrix inputs_from(int k, int n, const std::vector<int>& v) {
  InputMatrix x(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) x.set(i, j, v[static_cast<std::size_t>(i) * n + j]);
  return x;
}

// Scalar form of one gated update for a single weight.
int oracle_update(int w, int x, int sigma, int tau_self, int tau_other, LearningRule rule, int l) {
  if (sigma != tau_self || tau_self != tau_other) return w;
  int f = 0;
  if (rule == LearningRule::Hebbian) f = x * tau_self;
  if (rule == LearningRule::AntiHebbian) f = -x * tau_self;
  if (rule == LearningRule::RandomWalk) f = x;
  const int v = w + f;
  return v > l ? l : (v < -l ? -l : v);
}

}  // namespace

TEST(TpmParams, Validation) {
  EXPECT_NO_THROW((TpmParams{3, 32, 3, 1, 0}.validate()));
  EXPECT_THROW((TpmParams{0, 32, 3, 1, 0}.validate()), ParameterError);
  EXPECT_THROW((TpmParams{3, 0, 3, 1, 0}.validate()), ParameterError);
  EXPECT_THROW((TpmParams{3, 32, 128, 1, 0}.validate()), ParameterError);
  EXPECT_THROW((TpmParams{3, 32, -1, 1, 0}.validate()), ParameterError);
  EXPECT_THROW((TpmParams{3, 32, 3, 2, 2}.validate()), ParameterError);
  EXPECT_THROW((TpmParams{3, 32, 3, 0, 0}.validate()), ParameterError);
}

TEST(InitNetwork, DepthZeroGivesZeroWeight) {
  RngState rng{1, 2};
  const TpmNetwork net = init_network(TpmParams{1, 1, 0, 1, 0}, rng);
  EXPECT_EQ(net.weight(0, 0), 0);
}

TEST(InitNetwork, DeterministicForSameSeed) {
  const TpmParams p{3, 32, 5, 3, 1};
  RngState a{11, 22};
  RngState b{11, 22};
  EXPECT_EQ(init_network(p, a), init_network(p, b));
  EXPECT_EQ(a, b);
}

TEST(InitNetwork, UniformOverFullDepthRange) {
  const TpmParams p{3, 32, 127, 1, 0};
  RngState rng{0x5EED, 0x1};
  std::vector<std::uint64_t> counts(255, 0);
  for (int i = 0; i < 10'000; ++i) {
    const TpmNetwork net = init_network(p, rng);
    for (auto w : net.active()) ++counts[w + 127];
  }
  EXPECT_GT(chi_square_p_value(chi_square(counts), 254), 0.01);
}

TEST(InitNetwork, RejectsInvalidParams) {
  RngState rng{1, 2};
  EXPECT_THROW(init_network(TpmParams{3, 32, 3, 1, 1}, rng), ParameterError);
}

TEST(TpmNetwork, SetWeightEnforcesBound) {
  TpmNetwork net(TpmParams{1, 2, 2, 1, 0});
  net.set_weight(0, 1, -2);
  EXPECT_EQ(net.weight(0, 1), -2);
  EXPECT_THROW(net.set_weight(0, 0, 3), RangeError);
  EXPECT_THROW(net.set_weight(1, 0, 0), ParameterError);
}

TEST(Evaluate, AllOnes) {
  const TpmParams p{2, 2, 1, 1, 0};
  const std::vector<int> w{1, 1, 1, 1};
  const Evaluation ev = evaluate(TpmNetwork::from_weights(p, w), inputs_from(2, 2, {1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(ev.fields[0], std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(ev.fields[1], std::sqrt(2.0));
  EXPECT_EQ(ev.sigmas, (std::vector<int>{1, 1}));
  EXPECT_EQ(ev.tau, 1);
}

TEST(Evaluate, ZeroFieldMapsToMinusOne) {
  const TpmParams p{1, 2, 1, 1, 0};
  const std::vector<int> w{1, -1};
  const Evaluation ev = evaluate(TpmNetwork::from_weights(p, w), inputs_from(1, 2, {1, 1}));
  EXPECT_EQ(ev.fields[0], 0.0);
  EXPECT_EQ(ev.sigmas[0], -1);
  EXPECT_EQ(ev.tau, -1);
}

TEST(Evaluate, TauIsProductOfRecomputedSigmas) {
  const TpmParams p{3, 32, 4, 1, 0};
  RngState rng{99, 100};
  for (int trial = 0; trial < 200; ++trial) {
    const TpmNetwork net = init_network(p, rng);
    auto [x, next] = draw_inputs(rng, 3, 32);
    rng = next;
    const Evaluation ev = evaluate(net, x);
    int tau = 1;
    for (int i = 0; i < 3; ++i) {
      double h = 0;
      for (int j = 0; j < 32; ++j) h += net.weight(i, j) * x(i, j);
      h /= std::sqrt(32.0);
      EXPECT_NEAR(ev.fields[i], h, 1e-12);
      const int s = h > 0 ? 1 : -1;
      EXPECT_EQ(ev.sigmas[i], s);
      tau *= s;
    }
    EXPECT_EQ(ev.tau, tau);
    EXPECT_EQ(evaluate(net, x), ev);
  }
}

TEST(Evaluate, ShapeMismatchThrows) {
  const TpmNetwork net(TpmParams{3, 32, 3, 1, 0});
  EXPECT_THROW(evaluate(net, InputMatrix(3, 31)), ParameterError);
}

TEST(Evaluate, UsesOnlyActiveLayer) {
  const TpmParams p{1, 2, 1, 2, 1};
  TpmNetwork net(p);
  net.set_weight(0, 0, 1);
  net.set_weight(0, 1, 1);
  const Evaluation ev = evaluate(net, inputs_from(1, 2, {1, 1}));
  EXPECT_EQ(ev.sigmas[0], 1);
  for (auto w : net.layer(0)) EXPECT_EQ(w, 0);
}

TEST(ApplyLearning, DisagreeingOutputsLeaveWeightsAlone) {
  const TpmParams p{3, 8, 3, 1, 0};
  RngState rng{5, 6};
  TpmNetwork net = init_network(p, rng);
  const TpmNetwork before = net;
  auto [x, _] = draw_inputs(rng, 3, 8);
  const Evaluation ev = evaluate(net, x);
  for (auto rule : {LearningRule::Hebbian, LearningRule::AntiHebbian, LearningRule::RandomWalk}) {
    const auto kinds = apply_learning(net, x, ev, -ev.tau, rule);
    EXPECT_EQ(net, before);
    for (auto k : kinds) EXPECT_EQ(k, StepKind::Idle);
  }
}

TEST(ApplyLearning, RandomWalkClampsAtBoundary) {
  const TpmParams p{1, 1, 1, 1, 0};
  TpmNetwork net = TpmNetwork::from_weights(p, std::vector<int>{1});
  const InputMatrix x = inputs_from(1, 1, {1});
  const Evaluation ev = evaluate(net, x);
  ASSERT_EQ(ev.sigmas[0], 1);
  apply_learning(net, x, ev, 1, LearningRule::RandomWalk);
  EXPECT_EQ(net.weight(0, 0), 1);
}

TEST(ApplyLearning, HebbianHandExample) {
  const TpmParams p{1, 2, 3, 1, 0};
  TpmNetwork net = TpmNetwork::from_weights(p, std::vector<int>{0, 0});
  const InputMatrix x = inputs_from(1, 2, {1, -1});
  const Evaluation ev = evaluate(net, x);
  ASSERT_EQ(ev.sigmas[0], -1);
  ASSERT_EQ(ev.tau, -1);
  apply_learning(net, x, ev, -1, LearningRule::Hebbian);
  EXPECT_EQ(net.weight(0, 0), oracle_update(0, 1, -1, -1, -1, LearningRule::Hebbian, 3));
  EXPECT_EQ(net.weight(0, 1), oracle_update(0, -1, -1, -1, -1, LearningRule::Hebbian, 3));
  EXPECT_EQ(net.weight(0, 0), -1);
  EXPECT_EQ(net.weight(0, 1), 1);
}

TEST(ApplyLearning, MatchesScalarOracleForAllRules) {
  const TpmParams p{3, 16, 2, 1, 0};
  RngState rng{41, 42};
  for (auto rule : {LearningRule::Hebbian, LearningRule::AntiHebbian, LearningRule::RandomWalk}) {
    for (int trial = 0; trial < 300; ++trial) {
      TpmNetwork net = init_network(p, rng);
      auto [x, next] = draw_inputs(rng, 3, 16);
      rng = next;
      const Evaluation ev = evaluate(net, x);
      const int tau_other = (take_word(rng) & 1U) ? 1 : -1;
      const TpmNetwork before = net;
      apply_learning(net, x, ev, tau_other, rule);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 16; ++j)
          ASSERT_EQ(net.weight(i, j), oracle_update(before.weight(i, j), x(i, j), ev.sigmas[i], ev.tau,
                                                    tau_other, rule, p.l));
    }
  }
}

TEST(ApplyLearning, ClampAndGateInvariantsOverLongRun) {
  const TpmParams p{3, 8, 2, 2, 0};
  RngState rng{77, 78};
  TpmNetwork net = init_network(p, rng);
  const auto inactive = std::vector<std::int8_t>(net.layer(1).begin(), net.layer(1).end());
  for (int step = 0; step < 20'000; ++step) {
    auto [x, next] = draw_inputs(rng, 3, 8);
    rng = next;
    const Evaluation ev = evaluate(net, x);
    const TpmNetwork before = net;
    apply_learning(net, x, ev, ev.tau, LearningRule::Hebbian);
    for (int i = 0; i < 3; ++i) {
      const bool changed = !std::ranges::equal(net.row(i), before.row(i));
      if (changed) {
        ASSERT_EQ(ev.sigmas[i], ev.tau);
      }
    }
    for (auto w : net.active()) ASSERT_TRUE(w >= -2 && w <= 2);
  }
  EXPECT_TRUE(std::ranges::equal(net.layer(1), inactive));
}

TEST(ApplyLearning, StepClassificationWithPeerSigmas) {
  const TpmParams p{3, 1, 3, 1, 0};
  // tau = +1. Unit 0 agrees with the peer on +1, unit 1 disagrees, unit 2
  // agrees on -1.
  TpmNetwork a = TpmNetwork::from_weights(p, std::vector<int>{1, -1, -1});
  const InputMatrix x = inputs_from(3, 1, {1, 1, 1});
  const Evaluation ea = evaluate(a, x);
  ASSERT_EQ(ea.sigmas, (std::vector<int>{1, -1, -1}));
  ASSERT_EQ(ea.tau, 1);
  const std::vector<int> peer{1, 1, -1};
  const auto kinds = apply_learning(a, x, ea, ea.tau, LearningRule::RandomWalk, peer);
  EXPECT_EQ(kinds[0], StepKind::Attractive);
  EXPECT_EQ(kinds[1], StepKind::Repulsive);
  EXPECT_EQ(kinds[2], StepKind::NoMove);
  const auto plain = apply_learning(a, x, evaluate(a, x), ea.tau, LearningRule::RandomWalk);
  for (auto k : plain) EXPECT_EQ(k, StepKind::NoMove);
}

TEST(OrderParams, IdenticalNetsGiveExactlyOne) {
  const TpmParams p{3, 32, 3, 1, 0};
  RngState rng{8, 9};
  const TpmNetwork a = init_network(p, rng);
  for (int i = 0; i < 3; ++i) {
    const auto op = order_params(a, a, i);
    ASSERT_TRUE(op.rho.has_value());
    EXPECT_EQ(*op.rho, 1.0);
  }
}

TEST(OrderParams, OrthogonalRows) {
  const TpmParams p{1, 2, 1, 1, 0};
  const auto a = TpmNetwork::from_weights(p, std::vector<int>{1, 1});
  const auto b = TpmNetwork::from_weights(p, std::vector<int>{1, -1});
  const auto op = order_params(a, b, 0);
  EXPECT_EQ(op.r, 0.0);
  EXPECT_EQ(op.rho.value(), 0.0);
  EXPECT_EQ(op.q_a, 1.0);
}

TEST(OrderParams, ZeroRowHasUndefinedRho) {
  const TpmParams p{1, 2, 1, 1, 0};
  const auto a = TpmNetwork::from_weights(p, std::vector<int>{0, 0});
  const auto b = TpmNetwork::from_weights(p, std::vector<int>{1, 0});
  EXPECT_FALSE(order_params(a, b, 0).rho.has_value());
}

TEST(OrderParams, MatchesBruteForce) {
  const TpmParams p{3, 32, 5, 1, 0};
  RngState rng{1234, 5678};
  for (int trial = 0; trial < 100; ++trial) {
    const TpmNetwork a = init_network(p, rng);
    const TpmNetwork b = init_network(p, rng);
    for (int i = 0; i < 3; ++i) {
      double aa = 0, bb = 0, ab = 0;
      for (int j = 0; j < 32; ++j) {
        aa += a.weight(i, j) * a.weight(i, j);
        bb += b.weight(i, j) * b.weight(i, j);
        ab += a.weight(i, j) * b.weight(i, j);
      }
      const auto op = order_params(a, b, i);
      EXPECT_NEAR(op.q_a, aa / 32, 1e-12);
      EXPECT_NEAR(op.q_b, bb / 32, 1e-12);
      EXPECT_NEAR(op.r, ab / 32, 1e-12);
      if (aa > 0 && bb > 0) {
        EXPECT_NEAR(op.rho.value(), ab / std::sqrt(aa * bb), 1e-12);
      }
    }
  }
}

TEST(OrderParams, MismatchedParamsThrow) {
  const TpmNetwork a(TpmParams{3, 32, 3, 1, 0});
  const TpmNetwork b(TpmParams{3, 32, 4, 1, 0});
  EXPECT_THROW(order_params(a, b, 0), ParameterError);
  EXPECT_THROW(order_params(a, a, 3), ParameterError);
  EXPECT_THROW(is_synchronized(a, b), ParameterError);
}

TEST(IsSynchronized, DetectsSingleDifference) {
  const TpmParams p{3, 32, 3, 1, 0};
  RngState rng{4, 4};
  const TpmNetwork a = init_network(p, rng);
  TpmNetwork b = a;
  EXPECT_TRUE(is_synchronized(a, b));
  const int w = b.weight(2, 31);
  b.set_weight(2, 31, w == 3 ? 2 : w + 1);
  EXPECT_FALSE(is_synchronized(a, b));
}

TEST(IsSynchronized, AbsorbingAfterMutualLearning) {
  const TpmParams p{3, 32, 3, 1, 0};
  RngState ra{1, 0};
  RngState rb{2, 0};
  RngState rx{3, 0};
  TpmNetwork a = init_network(p, ra);
  TpmNetwork b = init_network(p, rb);
  int steps = 0;
  while (!is_synchronized(a, b)) {
    ASSERT_LT(++steps, 100'000);
    auto [x, next] = draw_inputs(rx, 3, 32);
    rx = next;
    const auto ea = evaluate(a, x);
    const auto eb = evaluate(b, x);
    apply_learning(a, x, ea, eb.tau, LearningRule::RandomWalk);
    apply_learning(b, x, eb, ea.tau, LearningRule::RandomWalk);
  }
  for (int i = 0; i < 3; ++i) EXPECT_EQ(order_params(a, b, i).rho.value_or(1.0), 1.0);
  for (int step = 0; step < 2000; ++step) {
    auto [x, next] = draw_inputs(rx, 3, 32);
    rx = next;
    const auto ea = evaluate(a, x);
    const auto eb = evaluate(b, x);
    apply_learning(a, x, ea, eb.tau, LearningRule::RandomWalk);
    apply_learning(b, x, eb, ea.tau, LearningRule::RandomWalk);
    ASSERT_TRUE(is_synchronized(a, b));
  }
}

TEST(LearningDistribution, RandomWalkStaysUniform) {
  const TpmParams p{3, 16, 2, 1, 0};
  RngState rng{0xABC, 0xDEF};
  TpmNetwork net = init_network(p, rng);
  std::vector<std::uint64_t> counts(5, 0);
  for (int step = 0; step < 60'000; ++step) {
    auto [x, next] = draw_inputs(rng, 3, 16);
    rng = next;
    const auto ev = evaluate(net, x);
    apply_learning(net, x, ev, ev.tau, LearningRule::RandomWalk);
    if (step >= 1000 && step % 20 == 0)
      for (int i = 0; i < 3; ++i) ++counts[net.weight(i, (step / 20) % 16) + 2];
  }
  EXPECT_GT(chi_square_p_value(chi_square(counts), 4), 0.001);
}

TEST(LearningDistribution, HebbianOverRepresentsBoundary) {
  const TpmParams p{3, 8, 3, 1, 0};
  RngState rng{0x111, 0x222};
  TpmNetwork net = init_network(p, rng);
  std::vector<double> counts(7, 0);
  double total = 0;
  for (int step = 0; step < 50'000; ++step) {
    auto [x, next] = draw_inputs(rng, 3, 8);
    rng = next;
    const auto ev = evaluate(net, x);
    apply_learning(net, x, ev, ev.tau, LearningRule::Hebbian);
    if (step >= 1000 && step % 10 == 0)
      for (auto w : net.active()) {
        counts[w + 3] += 1;
        total += 1;
      }
  }
  EXPECT_GT((counts[0] + counts[6]) / total, 2.0 / 7.0 + 0.05);
}

TEST(ParseRule, RoundTrip) {
  for (auto r : {LearningRule::Hebbian, LearningRule::AntiHebbian, LearningRule::RandomWalk})
    EXPECT_EQ(parse_rule(to_string(r)), r);
  EXPECT_FALSE(parse_rule("other").has_value());
}
