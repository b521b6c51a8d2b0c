#include <gtest/gtest.h>

#include <map>

#include "bobw/acceptance.hpp"
#include "bobw/mdp.hpp"
#include "fixtures.hpp"

namespace bobw {
namespace {

using testing::diamond_mdp;
using testing::random_interior;
using testing::single_state;

TEST(LayeredMdp, RejectsRowsThatDoNotSumToOne) {
  EXPECT_THROW(LayeredMdp(MdpShape({1, 2, 1}, 1), {0.5, 0.4, 1.0, 1.0}), Error);
  EXPECT_THROW(LayeredMdp(MdpShape({1, 2, 1}, 1), {1.2, -0.2, 1.0, 1.0}), Error);
}

TEST(LayeredMdp, RenormalizesWithinTolerance) {
  const LayeredMdp m(MdpShape({1, 2, 1}, 1), {0.5 + 4e-10, 0.5, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(m.next(0, 0)[0] + m.next(0, 0)[1], 1.0);
}

TEST(LayeredMdp, ShapeNeedsSingletonEnds) {
  EXPECT_THROW(MdpShape({2, 1}, 2), Error);
  EXPECT_THROW(MdpShape({1}, 2), Error);
  EXPECT_THROW(MdpShape({1, 1}, 0), Error);
}

TEST(LayeredMdp, FromNamedSpec) {
  MdpSpec spec{{{"s0"}, {"x", "y"}, {"end"}}, {"left", "right"}, {}};
  spec.transitions = {{"s0", "left", "x", 1.0}, {"s0", "right", "y", 1.0}, {"x", "left", "end", 1.0},
                      {"x", "right", "end", 1.0}, {"y", "left", "end", 1.0}, {"y", "right", "end", 1.0}};
  const LayeredMdp m = LayeredMdp::from_spec(spec);
  EXPECT_EQ(m.shape().state_count(), 4);
  EXPECT_EQ(m.shape().state_name(2), "y");
  EXPECT_DOUBLE_EQ(m.prob(0, 1, 2), 1.0);
  spec.transitions.pop_back();
  EXPECT_THROW(LayeredMdp::from_spec(spec), Error);
}

TEST(QFromPolicy, SingleLayerUniform) {
  const LayeredMdp m = single_state();
  const Occupancy q = q_from_policy(m, uniform_policy(m.shape()));
  EXPECT_DOUBLE_EQ(q.sa[0], 0.5);
  EXPECT_DOUBLE_EQ(q.sa[1], 0.5);
}

TEST(QFromPolicy, DeterministicIsPointMass) {
  const LayeredMdp m = diamond_mdp();
  const std::vector<int> act{1, 0, 1};
  const Occupancy q = q_from_policy(m, deterministic_policy(m.shape(), act));
  EXPECT_EQ(q.sa, (PairVector{0, 1, 0, 0, 0, 1}));
}

TEST(QFromPolicy, DiamondForwardStep) {
  const LayeredMdp m = diamond_mdp();
  Policy pi = uniform_policy(m.shape());
  pi.prob[0] = 0.3;
  pi.prob[1] = 0.7;
  const Occupancy q = q_from_policy(m, pi);
  EXPECT_DOUBLE_EQ(q.s[1], 0.3);
  EXPECT_DOUBLE_EQ(q.s[2], 0.7);
  EXPECT_DOUBLE_EQ(q.s[3], 1.0);
}

TEST(QFromPolicy, LayerMassAndConservation) {
  Rng rng = make_stream(2, Stream::instance);
  for (int trial = 0; trial < 40; ++trial) {
    auto [m, loss] = random_mdp(rng, {1, 3, 2, 4, 1}, 3);
    const MdpShape& sh = m.shape();
    const Occupancy q = q_from_policy(m, random_interior(sh, rng));
    for (int k = 0; k < sh.layer_count(); ++k) {
      double mass = 0.0;
      for (int s = sh.layer_begin(k); s < sh.layer_begin(k) + sh.layer_size(k); ++s) {
        for (int a = 0; a < sh.action_count(); ++a) mass += q.sa[sh.pair(s, a)];
      }
      EXPECT_NEAR(mass, 1.0, 1e-14);
    }
    for (int s2 = 1; s2 < sh.state_count(); ++s2) {
      double in = 0.0;
      const int prev = sh.layer_of(s2) - 1;
      for (int s = sh.layer_begin(prev); s < sh.layer_begin(prev) + sh.layer_size(prev); ++s) {
        for (int a = 0; a < sh.action_count(); ++a) in += m.prob(s, a, s2) * q.sa[sh.pair(s, a)];
      }
      EXPECT_NEAR(in, q.s[s2], 1e-14);
    }
  }
}

TEST(PolicyFromQ, Normalizes) {
  const MdpShape sh({1, 1}, 2);
  const Policy pi = policy_from_q(sh, PairVector{0.3, 0.7});
  EXPECT_DOUBLE_EQ(pi.prob[0], 0.3);
  EXPECT_DOUBLE_EQ(pi.prob[1], 0.7);
}

TEST(PolicyFromQ, UnreachedStateIsUniform) {
  const MdpShape sh({1, 2, 1}, 2);
  const Policy pi = policy_from_q(sh, PairVector{1, 0, 0, 0, 1, 0});
  EXPECT_DOUBLE_EQ(pi.prob[sh.pair(1, 0)], 0.5);
  EXPECT_DOUBLE_EQ(pi.prob[sh.pair(1, 1)], 0.5);
}

TEST(PolicyFromQ, RoundTripOnReachedStates) {
  Rng rng = make_stream(4, Stream::instance);
  for (int trial = 0; trial < 30; ++trial) {
    auto [m, loss] = random_mdp(rng, {1, 2, 3, 1}, 2);
    const Policy pi = random_interior(m.shape(), rng);
    const Policy back = policy_from_q(m.shape(), q_from_policy(m, pi).sa);
    for (std::size_t j = 0; j < pi.prob.size(); ++j) EXPECT_NEAR(back.prob[j], pi.prob[j], 1e-12);
  }
}

TEST(QvValues, SingleStateByHand) {
  const LayeredMdp m = single_state();
  const ValueTables vt = q_v_values(m, uniform_policy(m.shape()), PairVector{1.0, 0.0});
  EXPECT_DOUBLE_EQ(vt.q[0], 1.0);
  EXPECT_DOUBLE_EQ(vt.q[1], 0.0);
  EXPECT_DOUBLE_EQ(vt.v[0], 0.5);
  EXPECT_DOUBLE_EQ(vt.v[1], 0.0);
  const PairVector adv = advantage(m.shape(), vt);
  EXPECT_DOUBLE_EQ(adv[0], 0.5);
  EXPECT_DOUBLE_EQ(adv[1], -0.5);
}

TEST(QvValues, ZeroLoss) {
  const LayeredMdp m = diamond_mdp();
  const ValueTables vt = q_v_values(m, uniform_policy(m.shape()), PairVector(6, 0.0));
  for (double x : vt.q) EXPECT_EQ(x, 0.0);
  for (double x : vt.v) EXPECT_EQ(x, 0.0);
}

TEST(QvValues, InitialValueEqualsInnerProduct) {
  Rng rng = make_stream(6, Stream::instance);
  for (int trial = 0; trial < 40; ++trial) {
    auto [m, loss] = random_mdp(rng, {1, 2, 3, 2, 1}, 3);
    for (double& x : loss) x = 2.0 * uniform01(rng) - 1.0;  // signed losses are allowed
    const Policy pi = random_interior(m.shape(), rng);
    EXPECT_NEAR(q_v_values(m, pi, loss).v[0], value_of(q_from_policy(m, pi).sa, loss), 1e-12);
  }
}

TEST(Advantage, DeterministicChosenActionIsZero) {
  const LayeredMdp m = diamond_mdp();
  const std::vector<int> act{0, 1, 0};
  const Policy pi = deterministic_policy(m.shape(), act);
  const PairVector adv = advantage(m.shape(), q_v_values(m, pi, PairVector{0.1, 0.4, 0.2, 0.3, 0.5, 0.1}));
  for (int s = 0; s < 3; ++s) EXPECT_DOUBLE_EQ(adv[m.shape().pair(s, act[s])], 0.0);
}

TEST(Advantage, PolicyWeightedSumVanishes) {
  Rng rng = make_stream(7, Stream::instance);
  auto [m, loss] = random_mdp(rng, {1, 3, 3, 1}, 4);
  const Policy pi = random_interior(m.shape(), rng);
  const PairVector adv = advantage(m.shape(), q_v_values(m, pi, loss));
  for (int s = 0; s < m.shape().nonterminal_count(); ++s) {
    double total = 0.0;
    for (int a = 0; a < 4; ++a) total += pi.prob[m.shape().pair(s, a)] * adv[m.shape().pair(s, a)];
    EXPECT_NEAR(total, 0.0, 1e-14);
  }
}

// Replacing l by its advantage under pi shifts every value of any other
// policy by V^pi.
TEST(PerformanceDifference, IdentityOnRandomInstances) {
  Rng rng = make_stream(9, Stream::instance);
  for (int trial = 0; trial < 40; ++trial) {
    auto [m, loss] = random_mdp(rng, {1, 2, 2, 3, 1}, 2 + trial % 2);
    const MdpShape& sh = m.shape();
    const Policy pi = random_interior(sh, rng);
    const Policy other = random_interior(sh, rng);
    const ValueTables base = q_v_values(m, pi, loss);
    const PairVector adv = advantage(sh, base);
    const ValueTables lhs = q_v_values(m, other, adv);
    const ValueTables rhs = q_v_values(m, other, loss);
    for (int s = 0; s < sh.state_count(); ++s) EXPECT_NEAR(lhs.v[s], rhs.v[s] - base.v[s], 1e-12);
    for (int p = 0; p < sh.pair_count(); ++p) {
      EXPECT_NEAR(lhs.q[p], rhs.q[p] - base.v[sh.state_of_pair(p)], 1e-12);
    }
  }
}

TEST(SampleTrajectory, DeterministicIsUnique) {
  const LayeredMdp m = diamond_mdp();
  const std::vector<int> act{1, 0, 1};
  const Policy pi = deterministic_policy(m.shape(), act);
  std::size_t n = for_each_trajectory(m, pi, [](const Trajectory& t, double prob) {
    EXPECT_EQ(t.states, (std::vector<int>{0, 2, 3}));
    EXPECT_DOUBLE_EQ(prob, 1.0);
  });
  EXPECT_EQ(n, 1u);
}

TEST(SampleTrajectory, DiamondVisitProbability) {
  const LayeredMdp m = diamond_mdp();
  Policy pi = uniform_policy(m.shape());
  pi.prob[0] = 0.3;
  pi.prob[1] = 0.7;
  double visit_x = 0.0;
  for_each_trajectory(m, pi, [&](const Trajectory& t, double prob) { visit_x += t.visits(m.shape(), 1) ? prob : 0.0; });
  EXPECT_NEAR(visit_x, 0.3, 1e-15);
}

TEST(SampleTrajectory, ExactMarginalsMatchOccupancy) {
  Rng rng = make_stream(10, Stream::instance);
  for (int trial = 0; trial < 20; ++trial) {
    auto [m, loss] = detail::random_small_mdp(rng, 1000);
    const Policy pi = random_interior(m.shape(), rng);
    const Occupancy q = q_from_policy(m, pi);
    PairVector marginal(m.shape().pair_count(), 0.0);
    double total = 0.0;
    for_each_trajectory(m, pi, [&](const Trajectory& t, double prob) {
      total += prob;
      for (std::size_t k = 0; k < t.actions.size(); ++k) marginal[m.shape().pair(t.states[k], t.actions[k])] += prob;
    });
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t j = 0; j < marginal.size(); ++j) EXPECT_NEAR(marginal[j], q.sa[j], 1e-12);
  }
}

TEST(SampleTrajectory, SampledStatesFollowLayers) {
  Rng rng = make_stream(12, Stream::instance);
  auto [m, loss] = random_mdp(rng, {1, 3, 2, 1}, 2);
  Rng traj = make_stream(12, Stream::trajectory);
  for (int i = 0; i < 200; ++i) {
    const Trajectory t = sample_trajectory(m, uniform_policy(m.shape()), traj);
    ASSERT_EQ(t.states.size(), 4u);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(m.shape().layer_of(t.states[k]), k);
    for (int k = 0; k < 3; ++k) EXPECT_GT(m.prob(t.states[k], t.actions[k], t.states[k + 1]), 0.0);
  }
}

TEST(ValueOf, Examples) {
  EXPECT_EQ(value_of(PairVector{0.5, 0.5}, PairVector{0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(value_of(PairVector{0.5, 0.5}, PairVector{1.0, 0.0}), 0.5);
}

TEST(MaxAggregateLoss, PicksWorstTrajectory) {
  const LayeredMdp m = diamond_mdp();
  EXPECT_DOUBLE_EQ(max_aggregate_loss(m, PairVector{0.1, 0.2, 0.7, 0.3, 0.1, 0.4}), 0.8);
}

TEST(OptimalValues, GreedyPolicyAttainsMinimum) {
  Rng rng = make_stream(13, Stream::instance);
  auto [m, loss] = random_mdp(rng, {1, 2, 3, 1}, 3);
  const ValueTables opt = optimal_values(m, loss);
  const Policy greedy = greedy_policy(m.shape(), opt.q);
  EXPECT_NEAR(q_v_values(m, greedy, loss).v[0], opt.v[0], 1e-14);
  for (int trial = 0; trial < 50; ++trial) {
    EXPECT_LE(opt.v[0], q_v_values(m, random_interior(m.shape(), rng), loss).v[0] + 1e-14);
  }
}

}  // namespace
}  // namespace bobw
