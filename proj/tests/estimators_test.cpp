#include <gtest/gtest.h>

#include "bobw/acceptance.hpp"
#include "bobw/estimators.hpp"
#include "fixtures.hpp"

namespace bobw {
namespace {

using testing::parallel_edges;
using testing::random_interior;
using testing::single_state;

constexpr double kUtMomentConstant = 4.0;

Trajectory single_step(int a) { return Trajectory{{0, 1}, {a}}; }

UpperOccupancy scaled_upper(const MdpShape& sh, const Occupancy& q, const Policy& pi, std::span<const double> factor) {
  UpperOccupancy u{std::vector<double>(sh.state_count()), PairVector(sh.pair_count())};
  for (int s = 0; s < sh.state_count(); ++s) u.s[s] = q.s[s] * factor[s];
  for (int p = 0; p < sh.pair_count(); ++p) u.sa[p] = u.s[sh.state_of_pair(p)] * pi.prob[p];
  return u;
}

TEST(SpEstimate, ParallelEdgesByHand) {
  const Dag d = parallel_edges();
  const std::vector<double> q{0.5, 0.5};
  const auto est = sp_estimate(d, q, make_path(d, std::vector<int>{0}), 1.0);
  EXPECT_DOUBLE_EQ(est[0], 1.0);
  EXPECT_DOUBLE_EQ(est[1], -1.0);
}

TEST(SpEstimate, ZeroFeedbackGivesZero) {
  const Dag d = testing::diamond();
  const auto est = sp_estimate(d, std::vector<double>{0.3, 0.7, 0.3, 0.7}, make_path(d, std::vector<int>{1, 3}), 0.0);
  for (double x : est) EXPECT_EQ(x, 0.0);
}

TEST(SpEstimate, PointMassPathEdgesAreZero) {
  const Dag d = testing::diamond();
  const std::vector<double> q{1.0, 0.0, 1.0, 0.0};
  const auto est = sp_estimate(d, q, make_path(d, std::vector<int>{0, 2}), 0.8);
  EXPECT_DOUBLE_EQ(est[0], 0.0);
  EXPECT_DOUBLE_EQ(est[2], 0.0);
}

TEST(SpEstimate, DegenerateSupport) {
  const Dag d = parallel_edges();
  try {
    sp_estimate(d, std::vector<double>{1.0, 0.0}, make_path(d, std::vector<int>{1}), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_support);
  }
}

// <l_hat, p'> equals L_hat(p') - c, where L_hat(p') = c 1[p' = p] / P(p).
TEST(SpEstimate, PathSumIdentity) {
  const Dag d = testing::layered_grid(2);
  Rng rng = make_stream(1, Stream::instance);
  const auto q = detail::random_interior_flow(d, rng);
  const auto paths = enumerate_paths(d);
  for (const auto& p : paths) {
    const auto est = sp_estimate(d, q, p, 0.7);
    for (const auto& other : paths) {
      double inner = 0.0;
      for (int e : other.edges) inner += est[e];
      const double importance = other == p ? 0.7 / path_probability(d, q, p) : 0.0;
      EXPECT_NEAR(inner, importance - 0.7, 1e-12);
    }
  }
}

TEST(SpEstimate, BernoulliExpectationOfDifference) {
  const Dag d = parallel_edges();
  const auto m = sp_estimator_moments(d, std::vector<double>{0.5, 0.5}, std::vector<double>{0.6, 0.2},
                                      FeedbackLaw::bernoulli);
  EXPECT_NEAR(m.mean[0] - m.mean[1], 0.4, 1e-15);
}

TEST(SpEstimate, UnbiasedOnPathDifferences) {
  Rng rng = make_stream(2, Stream::instance);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Dag d = detail::random_dag(rng, 2 + trial % 5, 0.5);
    const auto paths = enumerate_paths(d);
    if (paths.size() > 100) continue;
    const auto q = detail::random_interior_flow(d, rng);
    std::vector<double> loss(d.edge_count());
    for (double& x : loss) x = uniform01(rng) / d.max_path_len();
    const auto m = sp_estimator_moments(d, q, loss, FeedbackLaw::bernoulli);
    for (std::size_t i = 0; i < paths.size(); ++i) {
      for (std::size_t j = i + 1; j < paths.size(); ++j) {
        double est = 0.0, truth = 0.0;
        for (int e : paths[i].edges) est += m.mean[e], truth += loss[e];
        for (int e : paths[j].edges) est -= m.mean[e], truth -= loss[e];
        EXPECT_NEAR(est, truth, 1e-10);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(KtEstimate, SingleStateByHand) {
  const LayeredMdp m = single_state();
  const Occupancy q = q_from_policy(m, uniform_policy(m.shape()));
  EXPECT_DOUBLE_EQ(kt_estimate(m.shape(), q, single_step(0), 1.0)[0], 1.0);
  EXPECT_DOUBLE_EQ(kt_estimate(m.shape(), q, single_step(1), 0.0)[0], 0.0);
  const auto mean = exact_expectation(EstimatorKind::known_transition, m, uniform_policy(m.shape()),
                                      PairVector{1.0, 0.0}, FeedbackLaw::deterministic);
  EXPECT_DOUBLE_EQ(mean[0], 0.5);
  EXPECT_DOUBLE_EQ(mean[1], -0.5);
}

TEST(KtEstimate, UnvisitedStateIsZero) {
  const LayeredMdp m = testing::diamond_mdp();
  const Occupancy q = q_from_policy(m, uniform_policy(m.shape()));
  const auto est = kt_estimate(m.shape(), q, Trajectory{{0, 1, 3}, {0, 1}}, 1.0);
  EXPECT_EQ(est[m.shape().pair(2, 0)], 0.0);
  EXPECT_EQ(est[m.shape().pair(2, 1)], 0.0);
  for (double x : kt_estimate(m.shape(), q, Trajectory{{0, 1, 3}, {0, 1}}, 0.0)) EXPECT_EQ(x, 0.0);
}

TEST(KtEstimate, DegenerateSupport) {
  const LayeredMdp m = single_state();
  const Occupancy q{PairVector{1.0, 0.0}, {1.0, 1.0}};
  EXPECT_THROW(kt_estimate(m.shape(), q, single_step(1), 1.0), Error);
}

TEST(KtEstimate, ExpectationEqualsAdvantage) {
  Rng rng = make_stream(3, Stream::instance);
  for (int trial = 0; trial < 25; ++trial) {
    auto [m, loss] = detail::random_small_mdp(rng, 300);
    const Policy pi = random_interior(m.shape(), rng);
    const auto adv = advantage(m.shape(), q_v_values(m, pi, loss));
    for (FeedbackLaw law : {FeedbackLaw::bernoulli, FeedbackLaw::deterministic}) {
      const auto mean = exact_expectation(EstimatorKind::known_transition, m, pi, loss, law);
      for (std::size_t j = 0; j < adv.size(); ++j) EXPECT_NEAR(mean[j], adv[j], 1e-12);
    }
  }
}

TEST(KtEstimate, SecondMomentBound) {
  const LayeredMdp m = single_state();
  const auto second = second_moment(EstimatorKind::known_transition, m, uniform_policy(m.shape()),
                                    PairVector{1.0, 0.0}, FeedbackLaw::deterministic);
  EXPECT_DOUBLE_EQ(second[0], 0.5);
  Rng rng = make_stream(4, Stream::instance);
  for (int trial = 0; trial < 25; ++trial) {
    auto [mm, loss] = detail::random_small_mdp(rng, 300);
    const Policy pi = random_interior(mm.shape(), rng);
    const Occupancy q = q_from_policy(mm, pi);
    const auto s2 = second_moment(EstimatorKind::known_transition, mm, pi, loss, FeedbackLaw::bernoulli);
    for (std::size_t j = 0; j < s2.size(); ++j) EXPECT_LE(s2[j], (1.0 - pi.prob[j]) / q.sa[j] + 1e-12);
  }
}

TEST(KtEstimate, DeterministicPolicyHasZeroEstimate) {
  const LayeredMdp m = single_state();
  const Policy pi{PairVector{1.0, 0.0}};
  const Occupancy q = q_from_policy(m, pi);
  EXPECT_DOUBLE_EQ(kt_estimate(m.shape(), q, single_step(0), 1.0)[0], 0.0);
}

TEST(UtEstimate, SingleStateWithExactUpper) {
  const LayeredMdp m = single_state();
  const Policy pi = uniform_policy(m.shape());
  const Occupancy q = q_from_policy(m, pi);
  const UpperOccupancy u{q.s, q.sa};
  EXPECT_DOUBLE_EQ(ut_estimate(m.shape(), u, pi, single_step(0), 1.0)[0], 1.0);
  EXPECT_DOUBLE_EQ(ut_estimate(m.shape(), u, pi, single_step(1), 0.0)[0], 0.0);
  const auto mean =
      exact_expectation(EstimatorKind::unknown_transition, m, pi, PairVector{1.0, 0.0}, FeedbackLaw::deterministic, &u);
  EXPECT_NEAR(mean[0], 0.5, 1e-15);
  EXPECT_NEAR(mean[1], -0.5, 1e-15);
}

TEST(UtEstimate, UnvisitedStateKeepsConstantTerm) {
  const LayeredMdp m = testing::diamond_mdp();
  Policy pi = uniform_policy(m.shape());
  pi.prob[m.shape().pair(2, 0)] = 0.2;
  pi.prob[m.shape().pair(2, 1)] = 0.8;
  const Occupancy q = q_from_policy(m, pi);
  const auto est = ut_estimate(m.shape(), UpperOccupancy{q.s, q.sa}, pi, Trajectory{{0, 1, 3}, {0, 0}}, 1.0);
  EXPECT_DOUBLE_EQ(est[m.shape().pair(2, 0)], -0.8);
  EXPECT_DOUBLE_EQ(est[m.shape().pair(2, 1)], -0.2);
}

TEST(UtEstimate, LooseUpperIsOptimistic) {
  const LayeredMdp m = single_state();
  const Policy pi = uniform_policy(m.shape());
  const Occupancy q = q_from_policy(m, pi);
  const std::vector<double> factor{1.2, 1.2};
  const UpperOccupancy u = scaled_upper(m.shape(), q, pi, factor);
  const auto mean =
      exact_expectation(EstimatorKind::unknown_transition, m, pi, PairVector{1.0, 0.0}, FeedbackLaw::deterministic, &u);
  EXPECT_NEAR(mean[0], 1.0 / 3.0, 1e-15);
  EXPECT_LE(mean[0], 0.5);
}

TEST(UtEstimate, NeedsUpperOccupancy) {
  const LayeredMdp m = single_state();
  EXPECT_THROW(exact_expectation(EstimatorKind::unknown_transition, m, uniform_policy(m.shape()), PairVector{1, 0},
                                 FeedbackLaw::bernoulli),
               Error);
}

TEST(UtEstimate, DegenerateSupport) {
  const LayeredMdp m = single_state();
  const Policy pi = uniform_policy(m.shape());
  const UpperOccupancy u{{0.0, 1.0}, PairVector{0.0, 0.0}};
  EXPECT_THROW(ut_estimate(m.shape(), u, pi, single_step(0), 1.0), Error);
}

// With u(s) >= q(s):
//   ladv - E[l^u] = ((u - q) / u) (ladv + 1 - pi)  and  0 <= gap <= 2 ((u - q)/u)(1 - pi).
TEST(UtEstimate, ExactGapIdentityAndBounds) {
  Rng rng = make_stream(5, Stream::instance);
  for (int trial = 0; trial < 25; ++trial) {
    auto [m, loss] = detail::random_small_mdp(rng, 300);
    const MdpShape& sh = m.shape();
    const Policy pi = random_interior(sh, rng);
    const Occupancy q = q_from_policy(m, pi);
    std::vector<double> factor(sh.state_count());
    for (double& f : factor) f = 1.0 + uniform01(rng);
    const UpperOccupancy u = scaled_upper(sh, q, pi, factor);
    const auto adv = advantage(sh, q_v_values(m, pi, loss));
    const auto moments = estimator_moments(EstimatorKind::unknown_transition, m, pi, loss, FeedbackLaw::bernoulli, &u);
    for (int p = 0; p < sh.pair_count(); ++p) {
      const int s = sh.state_of_pair(p);
      const double slack = (u.s[s] - q.s[s]) / u.s[s];
      const double gap = adv[p] - moments.mean[p];
      EXPECT_GE(adv[p] + 1.0 - pi.prob[p], -1e-12);
      EXPECT_NEAR(gap, slack * (adv[p] + 1.0 - pi.prob[p]), 1e-12);
      EXPECT_GE(gap, -1e-12);
      EXPECT_LE(gap, 2.0 * slack * (1.0 - pi.prob[p]) + 1e-12);
      const double moment_bound = kUtMomentConstant * (1.0 - pi.prob[p]) / u.sa[p] * (q.s[s] / u.s[s] + 1.0);
      EXPECT_LE(moments.second[p], moment_bound + 1e-12);
    }
  }
}

TEST(UtEstimate, SecondMomentSingleState) {
  const LayeredMdp m = single_state();
  const Policy pi = uniform_policy(m.shape());
  const Occupancy q = q_from_policy(m, pi);
  const UpperOccupancy u{q.s, q.sa};
  const auto s2 =
      second_moment(EstimatorKind::unknown_transition, m, pi, PairVector{1.0, 0.0}, FeedbackLaw::deterministic, &u);
  EXPECT_TRUE(std::isfinite(s2[0]));
  EXPECT_LE(s2[0], kUtMomentConstant * 0.5 / 0.5 * 2.0);
}

TEST(ApplyBonus, Arithmetic) {
  EXPECT_EQ(apply_bonus(PairVector{1.0, -0.5}, PairVector{0.0, 0.0}), (PairVector{1.0, -0.5}));
  EXPECT_DOUBLE_EQ(apply_bonus(PairVector{1.0}, PairVector{0.25})[0], 0.75);
  const auto out = apply_bonus(PairVector{0.3, -1.0}, PairVector{2.0, 1.5});
  EXPECT_GE(out[0], 0.3 - 2.0);
  EXPECT_GE(out[1], -1.0 - 2.0);
}

TEST(ExactExpectation, OutcomeCap) {
  Rng rng = make_stream(6, Stream::instance);
  auto [m, loss] = random_mdp(rng, {1, 4, 4, 4, 1}, 3);
  EXPECT_THROW(estimator_moments(EstimatorKind::known_transition, m, uniform_policy(m.shape()), loss,
                                 FeedbackLaw::bernoulli, nullptr, 100),
               Error);
}

}  // namespace
}  // namespace bobw
