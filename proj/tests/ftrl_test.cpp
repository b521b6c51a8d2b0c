#include <gtest/gtest.h>

#include <cmath>

#include "bobw/acceptance.hpp"
#include "bobw/ftrl.hpp"
#include "fixtures.hpp"

namespace bobw {
namespace {

using testing::parallel_edges;
using testing::single_state;

SeparableBarrier hybrid(std::size_t dim, double eta = 1.0, double beta = 2.0) {
  return TsallisHybrid{eta, beta, 2.0}.coefficients(dim);
}

// s->v, v->g, s->g.
Dag two_path_graph() { return Dag::validate({{"v"}, {{"s", "v"}, {"v", "g"}, {"s", "g"}}}); }

std::vector<double> random_feasible(const Polytope& poly, Rng& rng) {
  const auto verts = poly.vertices(20);
  std::vector<double> w(verts.size());
  double total = 0.0;
  for (double& x : w) total += x = 0.01 + uniform01(rng);
  std::vector<double> q(poly.dimension(), 0.0);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    for (int j = 0; j < poly.dimension(); ++j) q[j] += w[i] / total * verts[i][j];
  }
  return q;
}

TEST(SolveFtrl, SymmetricParallelEdges) {
  const Polytope poly = Polytope::flow(parallel_edges());
  const auto sol = solve_ftrl(poly, std::vector<double>{0.0, 0.0}, hybrid(2));
  EXPECT_NEAR(sol.point[0], 0.5, 1e-10);
  EXPECT_NEAR(sol.point[1], 0.5, 1e-10);
  EXPECT_LE(sol.report.kkt_residual_inf, 1e-8);
}

TEST(SolveFtrl, LargeLossPushesTowardBoundaryButStaysInterior) {
  const Polytope poly = Polytope::occupancy(single_state());
  const auto sol = solve_ftrl(poly, std::vector<double>{1e3, 0.0}, hybrid(2));
  EXPECT_GT(sol.point[0], 0.0);
  EXPECT_LT(sol.point[0], 0.01);
}

TEST(SolveFtrl, MatchesGridOnTwoPathInstance) {
  Rng rng = make_stream(1, Stream::instance);
  const Polytope poly = Polytope::flow(two_path_graph());
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> loss(3);
    for (double& x : loss) x = 10.0 * (2.0 * uniform01(rng) - 1.0);
    const auto reg = hybrid(3, 0.2 + uniform01(rng));
    const auto sol = solve_ftrl(poly, loss, reg);
    // One mixture weight w on s->v->g; scan it densely.
    double best_w = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 1; i < 200000; ++i) {
      const double w = i / 200000.0;
      const double f = ftrl_objective(poly, std::vector<double>{w, w, 1.0 - w}, loss, reg);
      if (f < best) best = f, best_w = w;
    }
    EXPECT_NEAR(sol.point[0], best_w, 1e-5);
    EXPECT_NEAR(sol.point[2], 1.0 - best_w, 1e-5);
  }
}

TEST(SolveFtrl, RequiresLogBarrier) {
  const Polytope poly = Polytope::flow(parallel_edges());
  try {
    solve_ftrl(poly, std::vector<double>{0.0, 0.0}, SeparableBarrier{{2.0, 2.0}, {0.0, 0.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::domain_error);
  }
  EXPECT_THROW(solve_ftrl(poly, std::vector<double>{NAN, 0.0}, hybrid(2)), Error);
}

TEST(SolveFtrl, IterationBudgetExhaustion) {
  const Polytope poly = Polytope::flow(testing::layered_grid(3));
  std::vector<double> loss(poly.dimension());
  for (int j = 0; j < poly.dimension(); ++j) loss[j] = 500.0 * ((j * 37) % 11) - 2000.0;
  try {
    solve_ftrl(poly, loss, hybrid(poly.dimension(), 0.01), SolverOptions{1e-8, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_convergence);
  }
}

TEST(KktResidual, SymmetricPointWithClosedFormMultiplier) {
  const Polytope poly = Polytope::flow(parallel_edges());
  const auto reg = hybrid(2);
  const std::vector<double> q{0.5, 0.5};
  const double lambda = std::sqrt(2.0) + 4.0;  // -grad psi at 1/2
  EXPECT_LE(kkt_residual(poly, q, std::vector<double>{lambda}, std::vector<double>{0.0, 0.0}, reg), 1e-12);
}

TEST(KktResidual, PerturbedPointIsRejected) {
  Rng rng = make_stream(2, Stream::instance);
  const Polytope poly = Polytope::flow(testing::layered_grid(2));
  std::vector<double> loss(poly.dimension());
  for (double& x : loss) x = 3.0 * uniform01(rng);
  const auto reg = hybrid(poly.dimension(), 0.5);
  const auto sol = solve_ftrl(poly, loss, reg);
  EXPECT_LE(kkt_residual(poly, sol.point, sol.multipliers, loss, reg), 1e-8);
  const auto verts = poly.vertices();
  auto moved = sol.point;
  for (int j = 0; j < poly.dimension(); ++j) moved[j] += 1e-3 * (verts[0][j] - verts[1][j]);
  EXPECT_LT(poly.feasibility_violation(moved), 1e-12);
  EXPECT_GT(kkt_residual(poly, moved, sol.multipliers, loss, reg), 1e-8);
}

TEST(SolveFtrl, OccupancyPointIsAValidOccupancy) {
  Rng rng = make_stream(3, Stream::instance);
  for (int trial = 0; trial < 20; ++trial) {
    auto [m, unused] = random_mdp(rng, {1, 3, 2, 1}, 3);
    const Polytope poly = Polytope::occupancy(m);
    std::vector<double> loss(poly.dimension());
    for (double& x : loss) x = 20.0 * (2.0 * uniform01(rng) - 1.0);
    const auto sol = solve_ftrl(poly, loss, hybrid(poly.dimension(), 0.3));
    const Occupancy back = q_from_policy(m, policy_from_q(m.shape(), sol.point));
    for (int j = 0; j < poly.dimension(); ++j) {
      EXPECT_GT(sol.point[j], 0.0);
      EXPECT_NEAR(back.sa[j], sol.point[j], 1e-7);
    }
  }
}

TEST(Polytope, UnreachableStatesAreStructuralZeros) {
  // Both actions at s0 lead to x; y is never reached.
  const LayeredMdp m(MdpShape({1, 2, 1}, 2), {1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0});
  const Polytope poly = Polytope::occupancy(m);
  EXPECT_EQ(poly.active_count(), 4);
  const auto sol = solve_ftrl(poly, std::vector<double>(6, 0.0), hybrid(6));
  EXPECT_EQ(sol.point[m.shape().pair(2, 0)], 0.0);
  EXPECT_EQ(sol.point[m.shape().pair(2, 1)], 0.0);
  EXPECT_NEAR(sol.point[m.shape().pair(1, 0)] + sol.point[m.shape().pair(1, 1)], 1.0, 1e-9);
}

TEST(Polytope, VertexCounts) {
  EXPECT_EQ(Polytope::flow(testing::layered_grid(3)).vertices().size(), 8u);
  EXPECT_EQ(Polytope::occupancy(testing::diamond_mdp()).vertices().size(), 4u);
  try {
    Polytope::flow(testing::layered_grid(5)).vertices(20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_large);
  }
}

TEST(Polytope, DirectionSlopeIsAtLeastOne) {
  Rng rng = make_stream(4, Stream::instance);
  for (int trial = 0; trial < 10; ++trial) {
    const Polytope flow = Polytope::flow(detail::random_dag(rng, 3 + trial, 0.5));
    for (int j = 0; j < flow.active_count(); ++j) EXPECT_GE(flow.direction_slope(j), 1.0);
    auto [m, unused] = random_mdp(rng, {1, 2, 3, 1}, 2);
    const Polytope occ = Polytope::occupancy(m);
    for (int j = 0; j < occ.active_count(); ++j) EXPECT_GE(occ.direction_slope(j), 1.0 - 1e-12);
  }
}

TEST(SolveFtrl, AgreesWithBruteForceOnTinyInstances) {
  Rng rng = make_stream(5, Stream::instance);
  int checked = 0;
  while (checked < 10) {
    const bool graph = checked % 2 == 0;
    const Polytope poly = graph ? Polytope::flow(detail::random_dag(rng, 2, 0.4))
                                : Polytope::occupancy(random_mdp(rng, {1, 1, 1}, 2).first);
    if (poly.vertices(1000).size() > 6) continue;
    std::vector<double> loss(poly.dimension());
    for (double& x : loss) x = 4.0 * (2.0 * uniform01(rng) - 1.0);
    const auto reg = hybrid(poly.dimension(), 0.5);
    const auto sol = solve_ftrl(poly, loss, reg);
    const auto brute = brute_force_minimize(poly, loss, reg);
    const double f_brute = ftrl_objective(poly, brute, loss, reg);
    EXPECT_NEAR(sol.report.objective, f_brute, 1e-4);
    EXPECT_LE(sol.report.objective, f_brute + 1e-9);
    ++checked;
  }
}

TEST(BruteForce, HugeLossesElsewhereSelectOneVertex) {
  const Polytope poly = Polytope::flow(two_path_graph());
  const std::vector<double> loss{1e4, 1e4, 0.0};
  const auto q = brute_force_minimize(poly, loss, hybrid(3));
  EXPECT_GT(q[2], 0.99);
  EXPECT_LT(q[2], 1.0);
}

TEST(BruteForce, LargeBetaApproachesAnalyticCenter) {
  const Polytope poly = Polytope::flow(two_path_graph());
  const std::vector<double> loss{0.3, 0.2, -0.4};
  const auto reg = hybrid(3, 1.0, 1e5);
  const auto center = solve_ftrl(poly, std::vector<double>(3, 0.0), reg).point;
  const auto q = brute_force_minimize(poly, loss, reg);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(q[j], center[j], 1e-4);
}

TEST(SolveFtrl, IsDeterministic) {
  Rng rng = make_stream(6, Stream::instance);
  auto [m, unused] = random_mdp(rng, {1, 3, 3, 1}, 2);
  const Polytope poly = Polytope::occupancy(m);
  std::vector<double> loss(poly.dimension());
  for (double& x : loss) x = 5.0 * uniform01(rng);
  const auto reg = hybrid(poly.dimension(), 0.7);
  EXPECT_EQ(solve_ftrl(poly, loss, reg).point, solve_ftrl(poly, loss, reg).point);
}

TEST(SolveFtrl, ObjectiveBeatsRandomFeasiblePoints) {
  Rng rng = make_stream(7, Stream::instance);
  const Polytope poly = Polytope::flow(testing::layered_grid(3));
  std::vector<double> loss(poly.dimension());
  for (double& x : loss) x = 6.0 * (2.0 * uniform01(rng) - 1.0);
  const auto reg = hybrid(poly.dimension(), 0.4);
  const auto sol = solve_ftrl(poly, loss, reg);
  for (int i = 0; i < 100; ++i) {
    EXPECT_LE(sol.report.objective, ftrl_objective(poly, random_feasible(poly, rng), loss, reg) + 1e-9);
  }
}

TEST(FtrlSolver, WarmStartMatchesColdStart) {
  Rng rng = make_stream(8, Stream::instance);
  const Polytope poly = Polytope::flow(testing::layered_grid(3));
  FtrlSolver warm(poly);
  std::vector<double> loss(poly.dimension(), 0.0);
  for (int t = 1; t <= 200; ++t) {
    for (double& x : loss) x += 2.0 * uniform01(rng) - 0.5;
    const auto reg = hybrid(poly.dimension(), 1.0 / std::sqrt(t));
    const auto& q = warm.solve(loss, reg);
    EXPECT_LE(warm.report().kkt_residual_inf, 1e-8);
    if (t % 50 == 0) {
      const auto cold = solve_ftrl(poly, loss, reg).point;
      for (int j = 0; j < poly.dimension(); ++j) EXPECT_NEAR(q[j], cold[j], 1e-7);
    }
  }
}

}  // namespace
}  // namespace bobw
