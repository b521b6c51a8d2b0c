#pragma once

// Acceptance suite: exact-oracle equivalence checks plus regime
// experiments on a fixed two-layer instance. Shared by the test binary and
// the `accept` CLI subcommand.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bobw/confidence.hpp"
#include "bobw/environments.hpp"
#include "bobw/estimators.hpp"
#include "bobw/ftrl.hpp"
#include "bobw/graph.hpp"
#include "bobw/harness.hpp"
#include "bobw/learners.hpp"
#include "bobw/mdp.hpp"
#include "bobw/random.hpp"
#include "bobw/regularizers.hpp"

namespace bobw {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;
};

struct AcceptanceOptions {
  std::string fixture_dir;
  int threads = 1;
  std::set<int> only;  // empty runs every criterion
};

/// S0={s0}, S1={x,y}, S2={sL}, two actions; optimal gap 0.2.
inline LayeredMdp acceptance_mdp() {
  MdpSpec spec;
  spec.layers = {{"s0"}, {"x", "y"}, {"sL"}};
  spec.actions = {"a0", "a1"};
  spec.transitions = {{"s0", "a0", "x", 0.7}, {"s0", "a0", "y", 0.3}, {"s0", "a1", "x", 0.3},
                      {"s0", "a1", "y", 0.7}, {"x", "a0", "sL", 1.0}, {"x", "a1", "sL", 1.0},
                      {"y", "a0", "sL", 1.0}, {"y", "a1", "sL", 1.0}};
  return LayeredMdp::from_spec(spec);
}

/// Mean loss in pair order (s0,a0), (s0,a1), (x,a0), (x,a1), (y,a0), (y,a1).
inline std::vector<double> acceptance_mean() { return {0.2, 0.4, 0.1, 0.3, 0.45, 0.2}; }

/// The mean with the two actions exchanged at every state.
inline std::vector<double> acceptance_swapped() { return {0.4, 0.2, 0.3, 0.1, 0.2, 0.45}; }

namespace detail {

inline std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

inline std::string fmt(const char* f, double a, double b, double c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

inline Policy random_interior_policy(const MdpShape& shape, Rng& rng) {
  Policy pi{PairVector(shape.pair_count())};
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    double total = 0.0;
    for (int a = 0; a < shape.action_count(); ++a) total += pi.prob[shape.pair(s, a)] = 0.05 + uniform01(rng);
    for (int a = 0; a < shape.action_count(); ++a) pi.prob[shape.pair(s, a)] /= total;
  }
  return pi;
}

/// Small random layered MDP whose trajectory count stays at most `cap`.
inline std::pair<LayeredMdp, std::vector<double>> random_small_mdp(Rng& rng, std::size_t cap = 500) {
  while (true) {
    const int layers = 1 + static_cast<int>(uniform01(rng) * 3.0);
    const int actions = 2 + static_cast<int>(uniform01(rng) * 2.0);
    std::vector<int> sizes{1};
    double count = 1.0;
    for (int k = 1; k < layers; ++k) sizes.push_back(1 + static_cast<int>(uniform01(rng) * 3.0));
    sizes.push_back(1);
    for (int k = 0; k < layers; ++k) count *= actions * sizes[k + 1];
    if (count <= static_cast<double>(cap)) return random_mdp(rng, sizes, actions);
  }
}

/// Random s-g DAG on n internal vertices: a spine s,1..n,g plus extra
/// forward edges.
inline Dag random_dag(Rng& rng, int n, double extra) {
  DagSpec spec;
  for (int v = 1; v <= n; ++v) spec.vertices.push_back("v" + std::to_string(v));
  auto name = [&](int v) { return v == 0 ? std::string("s") : v == n + 1 ? std::string("g") : "v" + std::to_string(v); };
  for (int i = 0; i <= n; ++i) {
    for (int j = i + 1; j <= n + 1; ++j) {
      if (j == i + 1 || uniform01(rng) < extra) spec.edges.emplace_back(name(i), name(j));
    }
  }
  return Dag::validate(spec);
}

/// Mixture of every s-g path with random positive weights.
inline std::vector<double> random_interior_flow(const Dag& dag, Rng& rng) {
  const auto paths = enumerate_paths(dag);
  std::vector<double> q(dag.edge_count(), 0.0);
  double total = 0.0;
  std::vector<double> w(paths.size());
  for (double& x : w) total += x = 0.05 + uniform01(rng);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (int e : paths[i].edges) q[e] += w[i] / total;
  }
  return q;
}

inline RunConfig acceptance_config(LearnerId learner, EnvironmentSpec env, long long horizon, int seeds,
                                   std::uint64_t first_seed = 1) {
  RunConfig cfg;
  cfg.instance = acceptance_mdp();
  cfg.environment = std::move(env);
  cfg.learner = learner;
  cfg.horizon = horizon;
  for (int i = 0; i < seeds; ++i) cfg.seeds.push_back(first_seed + static_cast<std::uint64_t>(i));
  return cfg;
}

inline EnvironmentSpec stochastic_env() {
  EnvironmentSpec env;
  env.mode = EnvMode::stochastic;
  env.mean = acceptance_mean();
  return env;
}

inline EnvironmentSpec adversarial_env(long long horizon) {
  EnvironmentSpec env;
  env.mode = EnvMode::adversarial;
  env.mean = acceptance_mean();
  env.tables = {acceptance_mean(), acceptance_swapped()};
  env.cycle.period = static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(horizon))));
  env.cycle.tables = {0, 1};
  return env;
}

inline EnvironmentSpec corrupted_env(double budget) {
  EnvironmentSpec env;
  env.mode = EnvMode::corrupted;
  env.mean = acceptance_mean();
  env.tables = {acceptance_swapped()};
  env.corruption.budget = budget;
  env.corruption.table = 0;
  return env;
}

}  // namespace detail

class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(AcceptanceOptions opt) : opt_(std::move(opt)) {}

  std::vector<CriterionResult> run(std::ostream& log) {
    using Fn = CriterionResult (AcceptanceSuite::*)();
    const std::vector<std::pair<int, Fn>> all = {
        {1, &AcceptanceSuite::c1},   {2, &AcceptanceSuite::c2},   {3, &AcceptanceSuite::c3},
        {4, &AcceptanceSuite::c4},   {5, &AcceptanceSuite::c5},   {6, &AcceptanceSuite::c6},
        {7, &AcceptanceSuite::c7},   {8, &AcceptanceSuite::c8},   {9, &AcceptanceSuite::c9},
        {10, &AcceptanceSuite::c10}, {11, &AcceptanceSuite::c11}, {12, &AcceptanceSuite::c12},
        {13, &AcceptanceSuite::c13}, {14, &AcceptanceSuite::c14}};
    std::vector<CriterionResult> out;
    for (const auto& [id, fn] : all) {
      if (!opt_.only.empty() && !opt_.only.count(id)) continue;
      const auto start = std::chrono::steady_clock::now();
      CriterionResult r;
      try {
        r = (this->*fn)();
      } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
      }
      r.id = id;
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (r.time_limit > 0.0 && r.seconds >= r.time_limit) {
        r.passed = false;
        r.detail += detail::fmt("; runtime %.1f s exceeds %.0f s", r.seconds, r.time_limit);
      }
      log << (r.passed ? "PASS" : "FAIL") << "  criterion " << id << " (" << r.name << "): " << r.detail
          << detail::fmt(" [%.2f s]", r.seconds) << std::endl;
      out.push_back(r);
    }
    return out;
  }

 private:
  // 1. The known-transition estimator is unbiased for the advantage.
  CriterionResult c1() {
    CriterionResult r{0, "estimator exactness", false, "", 0.0, 10.0};
    Rng rng = make_stream(101, Stream::instance);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      auto [mdp, loss] = detail::random_small_mdp(rng);
      const Policy pi = detail::random_interior_policy(mdp.shape(), rng);
      const auto adv = advantage(mdp.shape(), q_v_values(mdp, pi, loss));
      const auto mean = exact_expectation(EstimatorKind::known_transition, mdp, pi, loss, FeedbackLaw::bernoulli);
      for (std::size_t j = 0; j < adv.size(); ++j) worst = std::max(worst, std::abs(mean[j] - adv[j]));
    }
    r.passed = worst <= 1e-10;
    r.detail = detail::fmt("50 instances, max |E[l_hat] - advantage| = %.3g (tol 1e-10)", worst);
    return r;
  }

  // 2. The optimistic estimator's exact mean, optimism and gap identity.
  CriterionResult c2() {
    CriterionResult r{0, "optimistic estimator expectation", false, "", 0.0, 10.0};
    Rng rng = make_stream(102, Stream::instance);
    double worst_mean = 0.0, worst_gap = 0.0;
    int optimism_violations = 0;
    for (int i = 0; i < 50; ++i) {
      auto [mdp, loss] = detail::random_small_mdp(rng);
      const MdpShape& shape = mdp.shape();
      const Policy pi = detail::random_interior_policy(shape, rng);
      const Occupancy q = q_from_policy(mdp, pi);
      UpperOccupancy u{q.s, PairVector(shape.pair_count())};
      for (int s = 1; s < shape.state_count(); ++s) u.s[s] = q.s[s] + uniform01(rng) * (1.0 - q.s[s]);
      for (int p = 0; p < shape.pair_count(); ++p) u.sa[p] = u.s[shape.state_of_pair(p)] * pi.prob[p];
      const auto adv = advantage(shape, q_v_values(mdp, pi, loss));
      const auto mean = exact_expectation(EstimatorKind::unknown_transition, mdp, pi, loss, FeedbackLaw::bernoulli, &u);
      for (int p = 0; p < shape.pair_count(); ++p) {
        const int s = shape.state_of_pair(p);
        const double slack = 1.0 - pi.prob[p];
        const double predicted = q.s[s] / u.s[s] * (adv[p] + slack) - slack;
        worst_mean = std::max(worst_mean, std::abs(mean[p] - predicted));
        if (mean[p] > adv[p] + 1e-12) ++optimism_violations;
        const double gap = (u.s[s] - q.s[s]) / u.s[s] * (adv[p] + slack);
        worst_gap = std::max(worst_gap, std::abs((adv[p] - mean[p]) - gap));
      }
    }
    r.passed = worst_mean <= 1e-10 && worst_gap <= 1e-10 && optimism_violations == 0;
    r.detail = detail::fmt("max mean error %.3g, max gap-identity error %.3g (tol 1e-10), optimism violations ",
                           worst_mean, worst_gap) + std::to_string(optimism_violations);
    return r;
  }

  // 3. Second-moment bounds; the optimistic one with constant 4.
  CriterionResult c3() {
    CriterionResult r{0, "second moments", false, "", 0.0, 10.0};
    Rng rng = make_stream(103, Stream::instance);
    int violations = 0, checked = 0;
    double worst_ratio = 0.0;
    auto check = [&](double value, double bound) {
      ++checked;
      worst_ratio = std::max(worst_ratio, value / bound);
      if (value > bound * (1.0 + 1e-9) + 1e-12) ++violations;
    };
    for (int i = 0; i < 50; ++i) {
      auto [mdp, loss] = detail::random_small_mdp(rng);
      const MdpShape& shape = mdp.shape();
      const Policy pi = detail::random_interior_policy(shape, rng);
      const Occupancy q = q_from_policy(mdp, pi);
      const auto kt = second_moment(EstimatorKind::known_transition, mdp, pi, loss, FeedbackLaw::bernoulli);
      UpperOccupancy u{q.s, PairVector(shape.pair_count())};
      for (int s = 1; s < shape.state_count(); ++s) u.s[s] = q.s[s] + uniform01(rng) * (1.0 - q.s[s]);
      for (int p = 0; p < shape.pair_count(); ++p) u.sa[p] = u.s[shape.state_of_pair(p)] * pi.prob[p];
      const auto ut = second_moment(EstimatorKind::unknown_transition, mdp, pi, loss, FeedbackLaw::bernoulli, &u);
      for (int p = 0; p < shape.pair_count(); ++p) {
        const int s = shape.state_of_pair(p);
        const double slack = 1.0 - pi.prob[p];
        check(kt[p], slack / q.sa[p]);
        check(ut[p], 4.0 * slack / u.sa[p] * (q.s[s] / u.s[s] + 1.0));
      }
    }
    r.passed = violations == 0;
    r.detail = std::to_string(checked) + " bounds checked, " + std::to_string(violations) +
               " violations, largest moment/bound ratio " + detail::fmt("%.3f", worst_ratio);
    return r;
  }

  // 4. One-dimensional stability lemmas against a numeric supremum.
  CriterionResult c4() {
    CriterionResult r{0, "stability lemmas", false, "", 0.0, 5.0};
    Rng rng = make_stream(104, Stream::instance);
    auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, uniform01(rng)); };
    int violations[3] = {0, 0, 0};
    auto over = [](const StabilityCheck& c) { return c.lhs > c.rhs + 1e-12 + 1e-9 * std::abs(c.rhs); };
    for (int lemma = 0; lemma < 3; ++lemma) {
      int done = 0;
      while (done < 10000) {
        const double x = log_uniform(1e-6, 0.999);
        const double eta = log_uniform(1e-3, 10.0);
        const double beta = log_uniform(0.1, 2048.0);
        const double loss = (2.0 * uniform01(rng) - 1.0) * log_uniform(1e-3, 100.0);
        bool ok = false;
        if (lemma == 0) ok = eta * std::sqrt(x) * loss > -1.0;
        if (lemma == 1) ok = x * loss >= -beta / 2.0;
        if (lemma == 2) ok = eta * loss * x >= -0.5;
        if (!ok) continue;
        ++done;
        const StabilityCheck c = lemma == 0   ? stability_oracle_tsallis(x, loss, eta)
                                 : lemma == 1 ? stability_oracle_tsallis_lb(x, loss, eta, beta)
                                              : stability_oracle_logbarrier(x, loss, eta);
        if (over(c)) ++violations[lemma];
      }
    }
    r.passed = violations[0] + violations[1] + violations[2] == 0;
    r.detail = "10000 tuples per lemma; violations tsallis " + std::to_string(violations[0]) + ", tsallis+log-barrier " +
               std::to_string(violations[1]) + ", log-barrier " + std::to_string(violations[2]);
    return r;
  }

  // 5. Performance-difference identities.
  CriterionResult c5() {
    CriterionResult r{0, "performance difference", false, "", 0.0, 5.0};
    Rng rng = make_stream(105, Stream::instance);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      auto [mdp, loss] = detail::random_small_mdp(rng, 5000);
      for (double& x : loss) x = 2.0 * x - 0.5;  // signed losses
      const MdpShape& shape = mdp.shape();
      const Policy pi = detail::random_interior_policy(shape, rng);
      const Policy other = detail::random_interior_policy(shape, rng);
      const ValueTables base = q_v_values(mdp, pi, loss);
      const auto adv = advantage(shape, base);
      const ValueTables on_adv = q_v_values(mdp, other, adv);
      const ValueTables on_loss = q_v_values(mdp, other, loss);
      for (int s = 0; s < shape.state_count(); ++s) {
        worst = std::max(worst, std::abs(on_adv.v[s] - (on_loss.v[s] - base.v[s])));
      }
      for (int p = 0; p < shape.pair_count(); ++p) {
        worst = std::max(worst, std::abs(on_adv.q[p] - (on_loss.q[p] - base.v[shape.state_of_pair(p)])));
      }
    }
    r.passed = worst <= 1e-12;
    r.detail = detail::fmt("100 tuples, max identity error %.3g (tol 1e-12)", worst);
    return r;
  }

  // 6. FTRL solves agree with the brute-force oracle; every solve in full
  // runs meets the KKT tolerance.
  CriterionResult c6() {
    CriterionResult r{0, "FTRL solver correctness", false, "", 0.0, 30.0};
    Rng rng = make_stream(106, Stream::instance);
    double worst_gap = 0.0;
    for (int i = 0; i < 10; ++i) {
      std::optional<Polytope> poly;
      if (i % 2 == 0) {
        poly = Polytope::flow(detail::random_dag(rng, 1 + i / 4, 0.5));
      } else {
        MdpShape shape({1, 1 + (i / 4) % 2, 1}, 2);
        std::vector<double> prob(shape.transition_count());
        for (int s = 0; s < shape.nonterminal_count(); ++s) {
          for (int a = 0; a < 2; ++a) {
            const int off = shape.transition_offset(s, a);
            double total = 0.0;
            for (int j = 0; j < shape.next_size(s); ++j) total += prob[off + j] = 0.1 + uniform01(rng);
            for (int j = 0; j < shape.next_size(s); ++j) prob[off + j] /= total;
          }
        }
        poly = Polytope::occupancy(LayeredMdp(shape, prob));
      }
      const int dim = poly->dimension();
      std::vector<double> loss(dim);
      for (double& x : loss) x = 10.0 * (2.0 * uniform01(rng) - 1.0);
      SeparableBarrier reg;
      if (i % 3 == 2) {
        AdaptiveLogBarrier lb(dim, 1000.0);
        for (double& x : lb.rho_sum) x = 50.0 * uniform01(rng);
        reg = lb.coefficients(dim);
      } else {
        reg = TsallisHybrid{0.05 + uniform01(rng), 0.5 + 2.0 * uniform01(rng), 2.0}.coefficients(dim);
      }
      const auto sol = solve_ftrl(*poly, loss, reg);
      const auto bf = brute_force_minimize(*poly, loss, reg);
      worst_gap = std::max(worst_gap, std::abs(sol.report.objective - ftrl_objective(*poly, bf, loss, reg)));
    }
    double worst_kkt = 0.0;
    for (LearnerId id : {LearnerId::mdp_kt_tsallis, LearnerId::mdp_kt_logbarrier, LearnerId::mdp_ut_bobw}) {
      const auto traces = bobw::run(detail::acceptance_config(id, detail::stochastic_env(), 20000, 1));
      worst_kkt = std::max(worst_kkt, traces[0].max_kkt);
    }
    r.passed = worst_gap <= 1e-4 && worst_kkt <= 1e-8;
    r.detail = detail::fmt("10 tiny instances, max objective gap to brute force %.3g (tol 1e-4); "
                           "max KKT residual over full runs %.3g (tol 1e-8)",
                           worst_gap, worst_kkt);
    return r;
  }

  // 7. Exact sampler marginals.
  CriterionResult c7() {
    CriterionResult r{0, "sampler marginals", false, "", 0.0, 5.0};
    Rng rng = make_stream(107, Stream::instance);
    double worst = 0.0;
    int instances = 0;
    for (int i = 0; i < 20; ++i) {
      const Dag dag = detail::random_dag(rng, 2 + i % 5, 0.4);
      if (enumerate_paths(dag, 2000).size() > 1000) continue;
      const auto q = detail::random_interior_flow(dag, rng);
      std::vector<double> marginal(dag.edge_count(), 0.0);
      BranchEnumerator en(1000);
      en.run([&](auto& chooser) { return sample_path(dag, q, chooser); },
             [&](const PathVector& p, double prob) {
               for (int e : p.edges) marginal[e] += prob;
             });
      for (int e = 0; e < dag.edge_count(); ++e) worst = std::max(worst, std::abs(marginal[e] - q[e]));
      ++instances;
    }
    for (int i = 0; i < 20; ++i) {
      auto [mdp, loss] = detail::random_small_mdp(rng, 1000);
      const Policy pi = detail::random_interior_policy(mdp.shape(), rng);
      const Occupancy q = q_from_policy(mdp, pi);
      PairVector marginal(mdp.shape().pair_count(), 0.0);
      for_each_trajectory(
          mdp, pi,
          [&](const Trajectory& traj, double prob) {
            for (std::size_t k = 0; k < traj.actions.size(); ++k) {
              marginal[mdp.shape().pair(traj.states[k], traj.actions[k])] += prob;
            }
          },
          1000);
      for (std::size_t p = 0; p < marginal.size(); ++p) worst = std::max(worst, std::abs(marginal[p] - q.sa[p]));
      ++instances;
    }
    r.passed = worst <= 1e-12;
    r.detail = std::to_string(instances) + detail::fmt(" instances, max marginal error %.3g (tol 1e-12)", worst);
    return r;
  }

  // 8. Confidence sets contain the truth with probability >= 1 - 4 delta.
  CriterionResult c8() {
    CriterionResult r{0, "confidence coverage", false, "", 0.0, 300.0};
    const auto& traces = coverage_runs();
    int covered = 0;
    for (const auto& t : traces) covered += t.truth_covered ? 1 : 0;
    const double frac = static_cast<double>(covered) / static_cast<double>(traces.size());
    const double need = 1.0 - 4.0 * 0.05 - 0.03;
    r.passed = frac >= need;
    r.detail = std::to_string(traces.size()) + detail::fmt(" runs at T=2000, delta=0.05: coverage %.4f (need >= %.2f)",
                                                          frac, need);
    return r;
  }

  // 9. Epoch-count ceiling.
  CriterionResult c9() {
    CriterionResult r{0, "epoch bound", false, "", 0.0, 0.0};
    const LayeredMdp mdp = acceptance_mdp();
    const MdpShape& shape = mdp.shape();
    int runs = 0, violations = 0;
    std::size_t most = 0;
    auto check = [&](const std::vector<RegretTrace>& traces, long long horizon) {
      const double bound = epoch_count_bound(shape, horizon);
      for (const auto& t : traces) {
        ++runs;
        most = std::max(most, t.epoch_starts.size());
        if (static_cast<double>(t.epoch_starts.size()) > bound) ++violations;
      }
    };
    check(coverage_runs(), 2000);
    check(unknown_adversarial_runs(), 50000);
    check(unknown_runs(), 50000);
    r.passed = violations == 0;
    r.detail = std::to_string(runs) + " runs, most epochs " + std::to_string(most) + detail::fmt(
                   " (bound %.0f at T=2000, %.0f at T=50000), violations ", epoch_count_bound(shape, 2000),
                   epoch_count_bound(shape, 50000)) + std::to_string(violations);
    return r;
  }

  // 10. Stochastic regime for the known-transition log-barrier learner.
  CriterionResult c10() {
    CriterionResult r{0, "stochastic regime", false, "", 0.0, 600.0};
    const Summary s = summarize(stochastic_runs());
    const double ratio = s.mean.back() / s.mean[s.mean.size() / 2 - 1];
    const FitResult lf = fit_scaling(s.mean, FitModel::log);
    const FitResult sf = fit_scaling(s.mean, FitModel::sqrt);
    r.passed = ratio <= 1.5 && lf.r2 > sf.r2;
    r.detail = detail::fmt("Reg(T)=%.2f, Reg(T)/Reg(T/2)=%.3f (need <= 1.5)", s.mean.back(), ratio) +
               detail::fmt(", R2 log %.6f vs sqrt %.6f", lf.r2, sf.r2);
    return r;
  }

  // 11. Adversarial regime on the action-swapping schedule.
  CriterionResult c11() {
    CriterionResult r{0, "adversarial regime", false, "", 0.0, 600.0};
    const long long horizon = 100000;
    const Summary s = summarize(adversarial_runs());
    const double limit = 20.0 * std::sqrt(4.0 * 2.0 * 2.0 * static_cast<double>(horizon));
    const FitResult lf = fit_scaling(s.mean, FitModel::log);
    const FitResult sf = fit_scaling(s.mean, FitModel::sqrt);
    r.passed = s.mean.back() <= limit && lf.r2 < sf.r2;
    r.detail = detail::fmt("Reg(T)=%.2f (limit %.0f)", s.mean.back(), limit) +
               detail::fmt(", R2 log %.6f vs sqrt %.6f", lf.r2, sf.r2);
    return r;
  }

  // 12. Unknown-transition learner end to end.
  CriterionResult c12() {
    CriterionResult r{0, "unknown-transition end to end", false, "", 0.0, 900.0};
    const Summary s = summarize(unknown_runs());
    const Summary ref = summarize(bobw::run(
        detail::acceptance_config(LearnerId::mdp_kt_tsallis, detail::stochastic_env(), 50000, 10), run_options()));
    const double ratio = s.mean.back() / s.mean[s.mean.size() / 2 - 1];
    const double limit = 10.0 * ref.final_mean;
    r.passed = s.mean.back() <= limit && ratio <= 1.5;
    r.detail = detail::fmt("Reg(T)=%.1f vs 10 x known-transition Tsallis %.1f", s.mean.back(), limit) +
               detail::fmt(", Reg(T)/Reg(T/2)=%.3f (need <= 1.5)", ratio);
    return r;
  }

  // 13. Gap diagnostics against exact-arithmetic fixtures.
  CriterionResult c13() {
    CriterionResult r{0, "lower-bound diagnostics", false, "", 0.0, 1.0};
    const std::string path = opt_.fixture_dir + "/gap_fixture.json";
    std::ifstream in(path);
    if (!in) {
      r.detail = "cannot open " + path;
      return r;
    }
    const auto fixture = nlohmann::json::parse(in);
    const LayeredMdp mdp = acceptance_mdp();
    const auto report = gap_report(mdp, acceptance_mean());
    double worst = std::abs(report["lower_bound"].get<double>() - fixture["lower_bound"].get<double>());
    for (auto it = fixture["delta"].begin(); it != fixture["delta"].end(); ++it) {
      worst = std::max(worst, std::abs(report["delta"][it.key()].get<double>() - it.value().get<double>()));
    }
    for (auto it = fixture["value"].begin(); it != fixture["value"].end(); ++it) {
      worst = std::max(worst, std::abs(report["value"][it.key()].get<double>() - it.value().get<double>()));
    }
    const bool same_states = report["optimal_states"] == fixture["optimal_states"];
    r.passed = worst <= 1e-10 && same_states;
    r.detail = detail::fmt("sum 1/gap = %.12f, max deviation from fixture %.3g (tol 1e-10)",
                           report["lower_bound"].get<double>(), worst) +
               (same_states ? ", S* matches" : ", S* differs");
    return r;
  }

  // 14. Corruption robustness.
  CriterionResult c14() {
    CriterionResult r{0, "corruption robustness", false, "", 0.0, 600.0};
    const double budget = 50.0;
    const Summary clean = summarize(stochastic_runs());
    const auto corrupted_traces = bobw::run(
        detail::acceptance_config(LearnerId::mdp_kt_logbarrier, detail::corrupted_env(budget), 100000, 20),
        run_options());
    const Summary corrupted = summarize(corrupted_traces);
    const double excess = corrupted.final_mean - clean.final_mean;
    const double limit = 10.0 * (budget + std::sqrt(budget * clean.final_mean));
    r.passed = excess < limit;
    r.detail = detail::fmt("Reg(C=50)=%.2f, Reg(C=0)=%.2f, excess %.2f", corrupted.final_mean, clean.final_mean,
                           excess) +
               detail::fmt(" (limit %.1f), corruption used %.2f", limit, corrupted_traces.front().corruption_used);
    return r;
  }

  RunOptions run_options() const { return RunOptions{opt_.threads}; }

  const std::vector<RegretTrace>& coverage_runs() {
    if (!coverage_) {
      auto cfg = detail::acceptance_config(LearnerId::mdp_ut_bobw, detail::stochastic_env(), 2000, 500, 1000);
      cfg.options.delta = 0.05;
      coverage_ = bobw::run(cfg, run_options());
    }
    return *coverage_;
  }
  const std::vector<RegretTrace>& stochastic_runs() {
    if (!stochastic_) {
      stochastic_ = bobw::run(
          detail::acceptance_config(LearnerId::mdp_kt_logbarrier, detail::stochastic_env(), 100000, 20), run_options());
    }
    return *stochastic_;
  }
  const std::vector<RegretTrace>& adversarial_runs() {
    if (!adversarial_) {
      adversarial_ = bobw::run(detail::acceptance_config(LearnerId::mdp_kt_logbarrier,
                                                         detail::adversarial_env(100000), 100000, 20),
                               run_options());
    }
    return *adversarial_;
  }
  const std::vector<RegretTrace>& unknown_runs() {
    if (!unknown_) {
      unknown_ = bobw::run(
          detail::acceptance_config(LearnerId::mdp_ut_bobw, detail::stochastic_env(), 50000, 10), run_options());
    }
    return *unknown_;
  }
  const std::vector<RegretTrace>& unknown_adversarial_runs() {
    if (!unknown_adversarial_) {
      unknown_adversarial_ = bobw::run(
          detail::acceptance_config(LearnerId::mdp_ut_bobw, detail::adversarial_env(50000), 50000, 10), run_options());
    }
    return *unknown_adversarial_;
  }

  AcceptanceOptions opt_;
  std::optional<std::vector<RegretTrace>> coverage_, stochastic_, adversarial_, unknown_, unknown_adversarial_;
};

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::ostream& log) {
  return AcceptanceSuite(opt).run(log);
}

}  // namespace bobw
