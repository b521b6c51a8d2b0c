#pragma once

// Loss environments, Bernoulli aggregate feedback, and gap diagnostics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bobw/error.hpp"
#include "bobw/graph.hpp"
#include "bobw/mdp.hpp"
#include "bobw/random.hpp"

namespace bobw {

enum class EnvMode { stochastic, adversarial, corrupted };

inline std::string to_string(EnvMode m) {
  switch (m) {
    case EnvMode::stochastic: return "stochastic";
    case EnvMode::adversarial: return "adversarial";
    case EnvMode::corrupted: return "corrupted";
  }
  return "unknown";
}

inline EnvMode parse_env_mode(const std::string& s) {
  if (s == "stochastic") return EnvMode::stochastic;
  if (s == "adversarial") return EnvMode::adversarial;
  if (s == "corrupted") return EnvMode::corrupted;
  throw Error(Errc::config_error, "unknown environment mode '" + s + "'");
}

struct ScheduleBlock {
  long long first;  // inclusive, 1-based
  long long last;   // inclusive
  int table;
};

/// Rounds not covered by a block fall through to the cycle, if any:
/// table cycle[((t - 1) / period) % size].
struct ScheduleCycle {
  long long period = 0;
  std::vector<int> tables;
};

/// While the budget lasts, rounds in [first, last] see `table` instead of
/// the stochastic draw. A round's cost is L max_j |l_t(j) - l*(j)|, and a
/// round is corrupted only if its cost still fits in the budget.
struct CorruptionRule {
  double budget = 0.0;
  int table = -1;
  long long first = 1;
  long long last = std::numeric_limits<long long>::max();
};

struct EnvironmentSpec {
  EnvMode mode = EnvMode::stochastic;
  std::vector<double> mean;                // l*
  std::vector<std::vector<double>> tables;  // referenced by schedule and corruption
  std::vector<ScheduleBlock> blocks;
  ScheduleCycle cycle;
  CorruptionRule corruption;
  double noise = 0.0;  // l_t(j) = l*(j) (1 + noise U[-1,1])
  bool check_band = false;  // require every l*(j) in [3/8, 5/8]
};

namespace detail {

inline double max_aggregate(const std::variant<Dag, LayeredMdp>& model, std::span<const double> loss) {
  if (const auto* mdp = std::get_if<LayeredMdp>(&model)) return max_aggregate_loss(*mdp, loss);
  const Dag& dag = std::get<Dag>(model);
  std::vector<double> best(dag.vertex_count(), -std::numeric_limits<double>::infinity());
  best[dag.sink()] = 0.0;
  auto topo = dag.topological_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    for (int e : dag.out_edges(*it)) best[*it] = std::max(best[*it], loss[e] + best[dag.edge(e).head]);
  }
  return best[dag.source()];
}

}  // namespace detail

class Environment {
 public:
  static Environment for_mdp(const LayeredMdp& mdp, EnvironmentSpec spec) {
    return Environment(mdp, std::move(spec), mdp.shape().pair_count(), mdp.shape().layer_count());
  }
  static Environment for_dag(const Dag& dag, EnvironmentSpec spec) {
    return Environment(dag, std::move(spec), dag.edge_count(), dag.max_path_len());
  }

  const EnvironmentSpec& spec() const { return spec_; }
  int dimension() const { return dim_; }
  double corruption_used() const { return used_; }

  /// Loss table for round t. Corruption bookkeeping is stateful, so rounds
  /// must be drawn in order on a given instance.
  const std::vector<double>& draw_loss(long long t, Rng& rng) {
    switch (spec_.mode) {
      case EnvMode::adversarial: {
        current_ = spec_.tables[scheduled_table(t)];
        return current_;
      }
      case EnvMode::corrupted:
        if (t >= spec_.corruption.first && t <= spec_.corruption.last && spec_.corruption.table >= 0) {
          const double cost = corruption_cost_[spec_.corruption.table];
          if (used_ + cost <= spec_.corruption.budget + 1e-12) {
            used_ += cost;
            current_ = spec_.tables[spec_.corruption.table];
            return current_;
          }
        }
        [[fallthrough]];
      case EnvMode::stochastic:
        current_ = spec_.mean;
        if (spec_.noise > 0.0) {
          for (double& x : current_) x *= 1.0 + spec_.noise * (2.0 * uniform01(rng) - 1.0);
        }
        return current_;
    }
    return current_;
  }

  /// Index into spec.tables of the adversarial table at round t.
  int scheduled_table(long long t) const {
    for (const auto& b : spec_.blocks) {
      if (t >= b.first && t <= b.last) return b.table;
    }
    if (spec_.cycle.period > 0 && !spec_.cycle.tables.empty()) {
      const auto& c = spec_.cycle;
      return c.tables[static_cast<std::size_t>(((t - 1) / c.period) % static_cast<long long>(c.tables.size()))];
    }
    throw Error(Errc::schedule_gap, "no loss table scheduled for round " + std::to_string(t));
  }

 private:
  Environment(std::variant<Dag, LayeredMdp> model, EnvironmentSpec spec, int dim, int horizon_len)
      : model_(std::move(model)), spec_(std::move(spec)), dim_(dim), layers_(horizon_len) {
    auto check = [&](const std::vector<double>& table, const std::string& what) {
      if (static_cast<int>(table.size()) != dim_) {
        throw Error(Errc::config_error, what + " has " + std::to_string(table.size()) + " entries, expected " +
                                            std::to_string(dim_));
      }
      for (double x : table) {
        if (!(x >= 0.0)) throw Error(Errc::config_error, what + " has a negative or non-finite entry");
        if (spec_.check_band && (x < 0.375 || x > 0.625)) {
          throw Error(Errc::config_error, what + " leaves the [3/8, 5/8] band");
        }
      }
      const double scale = what == "mean loss" ? 1.0 + spec_.noise : 1.0;
      const double worst = detail::max_aggregate(model_, table) * scale;
      if (worst > 1.0 + 1e-12) {
        throw Error(Errc::config_error, what + " allows an aggregate loss of " + std::to_string(worst) + " > 1");
      }
    };
    if (!(spec_.noise >= 0.0 && spec_.noise <= 1.0)) throw Error(Errc::config_error, "noise must lie in [0,1]");
    if (spec_.mode != EnvMode::adversarial || !spec_.mean.empty()) check(spec_.mean, "mean loss");
    for (std::size_t i = 0; i < spec_.tables.size(); ++i) check(spec_.tables[i], "loss table " + std::to_string(i));
    auto valid_table = [&](int id) { return id >= 0 && id < static_cast<int>(spec_.tables.size()); };
    for (const auto& b : spec_.blocks) {
      if (!valid_table(b.table)) throw Error(Errc::config_error, "schedule references a missing table");
      if (b.first > b.last) throw Error(Errc::config_error, "schedule block is empty");
    }
    for (int id : spec_.cycle.tables) {
      if (!valid_table(id)) throw Error(Errc::config_error, "cycle references a missing table");
    }
    if (spec_.mode == EnvMode::corrupted) {
      if (!(spec_.corruption.budget >= 0.0)) throw Error(Errc::config_error, "corruption budget must be >= 0");
      if (spec_.corruption.table >= 0 && !valid_table(spec_.corruption.table)) {
        throw Error(Errc::config_error, "corruption references a missing table");
      }
    }
    if (spec_.mode == EnvMode::adversarial && spec_.blocks.empty() && spec_.cycle.tables.empty()) {
      throw Error(Errc::config_error, "adversarial mode needs schedule blocks or a cycle");
    }
    corruption_cost_.resize(spec_.tables.size(), 0.0);
    if (!spec_.mean.empty()) {
      for (std::size_t i = 0; i < spec_.tables.size(); ++i) {
        double worst = 0.0;
        for (int j = 0; j < dim_; ++j) worst = std::max(worst, std::abs(spec_.tables[i][j] - spec_.mean[j]));
        corruption_cost_[i] = worst * layers_;
      }
    }
    current_.assign(dim_, 0.0);
  }

  std::variant<Dag, LayeredMdp> model_;
  EnvironmentSpec spec_;
  int dim_;
  int layers_;
  double used_ = 0.0;
  std::vector<double> corruption_cost_;
  std::vector<double> current_;
};

/// c ~ Bernoulli(aggregate).
inline double aggregate_feedback(double aggregate, Rng& rng) {
  if (!(aggregate >= -1e-12 && aggregate <= 1.0 + 1e-12)) {
    throw Error(Errc::domain_error, "aggregate loss " + std::to_string(aggregate) + " outside [0,1]");
  }
  return uniform01(rng) < aggregate ? 1.0 : 0.0;
}

inline double path_loss(const PathVector& p, std::span<const double> loss) {
  double total = 0.0;
  for (int e : p.edges) total += loss[e];
  return total;
}

// ---------------------------------------------------------------------------
// Gap diagnostics.

inline constexpr double kGapZero = 1e-12;

struct MdpGapProfile {
  PairVector delta;
  ValueTables optimal;
  double delta_min = 0.0;              // smallest positive gap; 0 if none
  std::vector<char> optimal_states;     // S*
  std::vector<std::vector<int>> optimal_actions;  // actions with zero gap, per state
  double lower_bound = 0.0;            // sum over S* of sum_{gap > 0} 1/gap
};

inline MdpGapProfile gap_mdp(const LayeredMdp& mdp, std::span<const double> mean) {
  const MdpShape& shape = mdp.shape();
  MdpGapProfile g;
  g.optimal = optimal_values(mdp, mean);
  g.delta.assign(shape.pair_count(), 0.0);
  g.optimal_actions.assign(shape.nonterminal_count(), {});
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < shape.action_count(); ++a) {
      const int p = shape.pair(s, a);
      double d = g.optimal.q[p] - g.optimal.v[s];
      if (d < kGapZero) d = 0.0;
      g.delta[p] = d;
      if (d == 0.0) g.optimal_actions[s].push_back(a);
    }
  }
  g.optimal_states.assign(shape.state_count(), 0);
  g.optimal_states[shape.initial()] = 1;
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    if (!g.optimal_states[s]) continue;
    for (int a : g.optimal_actions[s]) {
      auto row = mdp.next(s, a);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > 0.0) g.optimal_states[shape.next_begin(s) + j] = 1;
      }
    }
  }
  double dmin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < shape.action_count(); ++a) {
      const double d = g.delta[shape.pair(s, a)];
      if (d <= 0.0) continue;
      dmin = std::min(dmin, d);
      if (g.optimal_states[s]) g.lower_bound += 1.0 / d;
    }
  }
  g.delta_min = std::isfinite(dmin) ? dmin : 0.0;
  return g;
}

struct SpGapProfile {
  std::vector<double> dist;       // dist(v, g) under l*
  std::vector<double> delta;      // per edge
  std::vector<double> delta_bar;  // min over paths through e of <delta, p>
  std::vector<double> delta_tilde;  // per edge; 0 on edges chosen by pi*
  std::vector<int> policy;        // pi*(v): zero-gap out-edge with the lowest id
  std::vector<char> off_policy;   // E' membership
  std::vector<double> best_path;  // p* as a flow
  int off_policy_len = 0;         // L': most E' edges on one s-g path
  double delta_min = 0.0;         // min over p != p* of <l*, p - p*>
  double lower_bound = 0.0;       // sum_{delta_bar > 0} delta / delta_bar^2
};

inline SpGapProfile gap_sp(const Dag& dag, std::span<const double> mean) {
  const int nv = dag.vertex_count();
  const int ne = dag.edge_count();
  const double inf = std::numeric_limits<double>::infinity();
  auto topo = dag.topological_order();
  SpGapProfile g;
  g.dist.assign(nv, inf);
  g.dist[dag.sink()] = 0.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    for (int e : dag.out_edges(*it)) g.dist[*it] = std::min(g.dist[*it], mean[e] + g.dist[dag.edge(e).head]);
  }
  g.delta.assign(ne, 0.0);
  for (int e = 0; e < ne; ++e) {
    double d = mean[e] + g.dist[dag.edge(e).head] - g.dist[dag.edge(e).tail];
    g.delta[e] = d < kGapZero ? 0.0 : d;
  }
  g.policy.assign(nv, -1);
  g.off_policy.assign(ne, 1);
  for (int v = 0; v < nv; ++v) {
    if (v == dag.sink()) continue;
    for (int e : dag.out_edges(v)) {
      if (g.policy[v] < 0 || g.delta[e] < g.delta[g.policy[v]]) g.policy[v] = e;
    }
    g.off_policy[g.policy[v]] = 0;
  }
  g.best_path.assign(ne, 0.0);
  for (int v = dag.source(); v != dag.sink(); v = dag.edge(g.policy[v]).head) g.best_path[g.policy[v]] = 1.0;

  // Minimum delta-cost from s to each vertex; delta-cost to g is zero.
  std::vector<double> from_s(nv, inf);
  from_s[dag.source()] = 0.0;
  for (int v : topo) {
    if (from_s[v] == inf) continue;
    for (int e : dag.out_edges(v)) from_s[dag.edge(e).head] = std::min(from_s[dag.edge(e).head], from_s[v] + g.delta[e]);
  }
  g.delta_bar.assign(ne, 0.0);
  for (int e = 0; e < ne; ++e) g.delta_bar[e] = from_s[dag.edge(e).tail] + g.delta[e];

  // fwd[v][k], bwd[v][k]: min delta-cost of s->v (v->g) paths with exactly
  // k off-policy edges.
  const int kmax = dag.max_path_len();
  std::vector<std::vector<double>> fwd(nv, std::vector<double>(kmax + 1, inf));
  std::vector<std::vector<double>> bwd(nv, std::vector<double>(kmax + 1, inf));
  fwd[dag.source()][0] = 0.0;
  for (int v : topo) {
    for (int e : dag.out_edges(v)) {
      const int h = dag.edge(e).head;
      const int step = g.off_policy[e];
      for (int k = 0; k + step <= kmax; ++k) {
        if (fwd[v][k] < inf) fwd[h][k + step] = std::min(fwd[h][k + step], fwd[v][k] + g.delta[e]);
      }
    }
  }
  bwd[dag.sink()][0] = 0.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    for (int e : dag.out_edges(*it)) {
      const int h = dag.edge(e).head;
      const int step = g.off_policy[e];
      for (int k = 0; k + step <= kmax; ++k) {
        if (bwd[h][k] < inf) bwd[*it][k + step] = std::min(bwd[*it][k + step], bwd[h][k] + g.delta[e]);
      }
    }
  }
  for (int k = kmax; k >= 0; --k) {
    if (fwd[dag.sink()][k] < inf) {
      g.off_policy_len = k;
      break;
    }
  }
  g.delta_tilde.assign(ne, 0.0);
  for (int e = 0; e < ne; ++e) {
    if (!g.off_policy[e]) continue;
    const int tail = dag.edge(e).tail;
    const int head = dag.edge(e).head;
    double best = inf;
    for (int k1 = 0; k1 <= kmax; ++k1) {
      if (fwd[tail][k1] == inf) continue;
      for (int k2 = 0; k1 + k2 + 1 <= kmax; ++k2) {
        if (bwd[head][k2] == inf) continue;
        const double cost = fwd[tail][k1] + g.delta[e] + bwd[head][k2];
        best = std::min(best, cost / static_cast<double>(k1 + k2 + 1));
      }
    }
    g.delta_tilde[e] = best;
  }

  // Second-best path value via the min-through-edge costs of edges off p*.
  double second = inf;
  for (int e = 0; e < ne; ++e) {
    if (g.best_path[e] == 0.0) second = std::min(second, g.delta_bar[e]);
  }
  g.delta_min = std::isfinite(second) ? second : 0.0;
  for (int e = 0; e < ne; ++e) {
    if (g.delta_bar[e] > 0.0) g.lower_bound += g.delta[e] / (g.delta_bar[e] * g.delta_bar[e]);
  }
  return g;
}

/// sum_t sum_{(s,a)} delta(s,a) q_t(s,a) - C, given per-round
/// delta-weighted occupancies.
inline std::vector<double> self_bounding_series(std::span<const double> per_round_gap_mass, double budget) {
  std::vector<double> out(per_round_gap_mass.size());
  double total = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    total += per_round_gap_mass[t];
    out[t] = total - budget;
  }
  return out;
}

inline double gap_mass(std::span<const double> delta, std::span<const double> q) {
  double total = 0.0;
  for (std::size_t j = 0; j < delta.size(); ++j) total += delta[j] * q[j];
  return total;
}

/// Random layered MDP with uniform losses rescaled so that the largest
/// aggregate loss is at most one.
inline std::pair<LayeredMdp, std::vector<double>> random_mdp(Rng& rng, std::vector<int> layer_sizes, int actions) {
  MdpShape shape(std::move(layer_sizes), actions);
  std::vector<double> prob(shape.transition_count());
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < actions; ++a) {
      const int off = shape.transition_offset(s, a);
      double total = 0.0;
      for (int j = 0; j < shape.next_size(s); ++j) total += prob[off + j] = 0.05 + uniform01(rng);
      for (int j = 0; j < shape.next_size(s); ++j) prob[off + j] /= total;
    }
  }
  LayeredMdp mdp(shape, std::move(prob));
  std::vector<double> loss(shape.pair_count());
  for (double& x : loss) x = uniform01(rng);
  const double worst = max_aggregate_loss(mdp, loss);
  if (worst > 1.0) {
    for (double& x : loss) x /= worst;
  }
  return {std::move(mdp), std::move(loss)};
}

}  // namespace bobw
