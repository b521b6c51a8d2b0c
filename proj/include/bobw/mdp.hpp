#pragma once

// Layered episodic MDPs: transitions, policies, occupancy measures, value
// recursions and trajectory sampling.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bobw/enumerate.hpp"
#include "bobw/error.hpp"
#include "bobw/random.hpp"

namespace bobw {

/// Per-(s,a) or per-state dense vector. Pairs are indexed s * |A| + a over
/// non-terminal states; see MdpShape::pair.
using PairVector = std::vector<double>;

/// State/action layout of a layered MDP without its transition law. States
/// are numbered layer by layer; layer 0 is {s0}, layer L is {sL}.
class MdpShape {
 public:
  MdpShape() = default;

  MdpShape(std::vector<int> layer_sizes, int action_count, std::vector<std::string> state_names = {},
           std::vector<std::string> action_names = {})
      : layer_sizes_(std::move(layer_sizes)), action_count_(action_count) {
    if (layer_sizes_.size() < 2) throw Error(Errc::invalid_model, "need at least two layers");
    if (layer_sizes_.front() != 1 || layer_sizes_.back() != 1) {
      throw Error(Errc::invalid_model, "first and last layers must hold exactly one state");
    }
    if (action_count_ < 1) throw Error(Errc::invalid_model, "need at least one action");
    layer_begin_.push_back(0);
    for (int size : layer_sizes_) {
      if (size < 1) throw Error(Errc::invalid_model, "empty layer");
      layer_begin_.push_back(layer_begin_.back() + size);
    }
    for (int k = 0; k + 1 < static_cast<int>(layer_sizes_.size()); ++k) {
      for (int i = 0; i < layer_sizes_[k]; ++i) layer_of_.push_back(k);
    }
    layer_of_.push_back(layer_count());
    for (int s = 0; s < nonterminal_count(); ++s) {
      for (int a = 0; a < action_count_; ++a) {
        transition_offset_.push_back(transition_count_);
        transition_count_ += next_size(s);
      }
    }
    state_names_ = std::move(state_names);
    action_names_ = std::move(action_names);
    if (state_names_.empty()) {
      for (int s = 0; s < state_count(); ++s) state_names_.push_back("s" + std::to_string(s));
    }
    if (action_names_.empty()) {
      for (int a = 0; a < action_count_; ++a) action_names_.push_back("a" + std::to_string(a));
    }
  }

  int layer_count() const { return static_cast<int>(layer_sizes_.size()) - 1; }
  int state_count() const { return layer_begin_.back(); }
  int nonterminal_count() const { return state_count() - 1; }
  int action_count() const { return action_count_; }
  int pair_count() const { return nonterminal_count() * action_count_; }
  int initial() const { return 0; }
  int terminal() const { return state_count() - 1; }
  int layer_of(int s) const { return layer_of_[s]; }
  int layer_begin(int k) const { return layer_begin_[k]; }
  int layer_size(int k) const { return layer_sizes_[k]; }
  int pair(int s, int a) const { return s * action_count_ + a; }
  int state_of_pair(int p) const { return p / action_count_; }
  int action_of_pair(int p) const { return p % action_count_; }
  int next_begin(int s) const { return layer_begin_[layer_of_[s] + 1]; }
  int next_size(int s) const { return layer_sizes_[layer_of_[s] + 1]; }
  int transition_count() const { return transition_count_; }
  int transition_offset(int s, int a) const { return transition_offset_[pair(s, a)]; }
  const std::string& state_name(int s) const { return state_names_[s]; }
  const std::string& action_name(int a) const { return action_names_[a]; }
  std::span<const int> layer_sizes() const { return layer_sizes_; }

  bool operator==(const MdpShape& o) const {
    return layer_sizes_ == o.layer_sizes_ && action_count_ == o.action_count_;
  }

 private:
  std::vector<int> layer_sizes_;
  std::vector<int> layer_begin_;
  std::vector<int> layer_of_;
  std::vector<int> transition_offset_;
  int transition_count_ = 0;
  int action_count_ = 0;
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
};

/// Named description of an MDP, as read from a config file.
struct MdpSpec {
  std::vector<std::vector<std::string>> layers;
  std::vector<std::string> actions;
  struct Entry {
    std::string state, action, next;
    double prob;
  };
  std::vector<Entry> transitions;
};

/// Layered MDP with transition law P(s'|s,a), stored per (s,a) as a row over
/// the next layer.
class LayeredMdp {
 public:
  LayeredMdp() = default;

  /// Rows must sum to one within 1e-9 and are then renormalized.
  LayeredMdp(MdpShape shape, std::vector<double> transitions)
      : shape_(std::move(shape)), prob_(std::move(transitions)) {
    if (static_cast<int>(prob_.size()) != shape_.transition_count()) {
      throw Error(Errc::invalid_model, "transition table has the wrong size");
    }
    for (int s = 0; s < shape_.nonterminal_count(); ++s) {
      for (int a = 0; a < shape_.action_count(); ++a) {
        auto row = mutable_row(s, a);
        double total = 0.0;
        for (double p : row) {
          if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_model, "transition probability outside [0,1]");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
          throw Error(Errc::invalid_model, "transitions from (" + shape_.state_name(s) + "," +
                                               shape_.action_name(a) + ") sum to " + std::to_string(total));
        }
        for (double& p : row) p /= total;
      }
    }
  }

  static LayeredMdp from_spec(const MdpSpec& spec) {
    std::vector<int> sizes;
    std::vector<std::string> names;
    std::map<std::string, int> state_id, action_id;
    for (const auto& layer : spec.layers) {
      sizes.push_back(static_cast<int>(layer.size()));
      for (const auto& name : layer) {
        if (state_id.count(name)) throw Error(Errc::invalid_model, "duplicate state '" + name + "'");
        state_id[name] = static_cast<int>(names.size());
        names.push_back(name);
      }
    }
    for (const auto& a : spec.actions) {
      if (action_id.count(a)) throw Error(Errc::invalid_model, "duplicate action '" + a + "'");
      action_id[a] = static_cast<int>(action_id.size());
    }
    MdpShape shape(sizes, static_cast<int>(spec.actions.size()), names, spec.actions);
    std::vector<double> prob(shape.transition_count(), 0.0);
    for (const auto& t : spec.transitions) {
      auto s = state_id.find(t.state);
      auto a = action_id.find(t.action);
      auto n = state_id.find(t.next);
      if (s == state_id.end() || a == action_id.end() || n == state_id.end()) {
        throw Error(Errc::invalid_model, "transition (" + t.state + "," + t.action + "," + t.next +
                                             ") references an unknown name");
      }
      if (s->second == shape.terminal()) throw Error(Errc::invalid_model, "transition out of the terminal state");
      const int offset = n->second - shape.next_begin(s->second);
      if (offset < 0 || offset >= shape.next_size(s->second)) {
        throw Error(Errc::invalid_model, "transition " + t.state + "->" + t.next + " skips a layer");
      }
      prob[shape.transition_offset(s->second, a->second) + offset] += t.prob;
    }
    return LayeredMdp(std::move(shape), std::move(prob));
  }

  const MdpShape& shape() const { return shape_; }

  /// P(.|s,a) over the states of the next layer.
  std::span<const double> next(int s, int a) const {
    return {prob_.data() + shape_.transition_offset(s, a), static_cast<std::size_t>(shape_.next_size(s))};
  }

  double prob(int s, int a, int next_state) const {
    return next(s, a)[next_state - shape_.next_begin(s)];
  }

  std::span<const double> table() const { return prob_; }

 private:
  std::span<double> mutable_row(int s, int a) {
    return {prob_.data() + shape_.transition_offset(s, a), static_cast<std::size_t>(shape_.next_size(s))};
  }

  MdpShape shape_;
  std::vector<double> prob_;
};

/// pi(a|s) for every non-terminal state, stored by pair index.
struct Policy {
  PairVector prob;

  double operator()(const MdpShape& shape, int s, int a) const { return prob[shape.pair(s, a)]; }
};

struct Occupancy {
  PairVector sa;
  std::vector<double> s;  // q(s) = sum_a q(s,a); q(sL) = 1
};

struct Trajectory {
  std::vector<int> states;   // s_0 .. s_L
  std::vector<int> actions;  // a_0 .. a_{L-1}

  bool visits(const MdpShape& shape, int s) const { return states[shape.layer_of(s)] == s; }
  bool takes(const MdpShape& shape, int s, int a) const {
    const int k = shape.layer_of(s);
    return k < static_cast<int>(actions.size()) && states[k] == s && actions[k] == a;
  }
  bool operator==(const Trajectory&) const = default;
};

struct ValueTables {
  PairVector q;               // Q(s,a)
  std::vector<double> v;      // V(s), V(sL) = 0
};

inline Policy uniform_policy(const MdpShape& shape) {
  return {PairVector(shape.pair_count(), 1.0 / shape.action_count())};
}

/// Forward recursion q(s0)=1, q(s,a)=q(s)pi(a|s), q(s')=sum P(s'|s,a)q(s,a).
inline Occupancy q_from_policy(const LayeredMdp& mdp, const Policy& pi) {
  const MdpShape& shape = mdp.shape();
  Occupancy q{PairVector(shape.pair_count(), 0.0), std::vector<double>(shape.state_count(), 0.0)};
  q.s[shape.initial()] = 1.0;
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    if (q.s[s] == 0.0) continue;
    const int base = shape.next_begin(s);
    for (int a = 0; a < shape.action_count(); ++a) {
      const double mass = q.s[s] * pi.prob[shape.pair(s, a)];
      q.sa[shape.pair(s, a)] = mass;
      if (mass == 0.0) continue;
      auto row = mdp.next(s, a);
      for (std::size_t j = 0; j < row.size(); ++j) q.s[base + j] += row[j] * mass;
    }
  }
  return q;
}

/// State masses implied by a pair vector.
inline std::vector<double> state_mass(const MdpShape& shape, std::span<const double> sa) {
  std::vector<double> mass(shape.state_count(), 0.0);
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < shape.action_count(); ++a) mass[s] += sa[shape.pair(s, a)];
  }
  mass[shape.terminal()] = 1.0;
  return mass;
}

/// pi(a|s) = q(s,a)/q(s); uniform where q(s) = 0.
inline Policy policy_from_q(const MdpShape& shape, std::span<const double> sa) {
  Policy pi{PairVector(shape.pair_count(), 0.0)};
  const double uniform = 1.0 / shape.action_count();
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    double total = 0.0;
    for (int a = 0; a < shape.action_count(); ++a) total += std::max(sa[shape.pair(s, a)], 0.0);
    for (int a = 0; a < shape.action_count(); ++a) {
      pi.prob[shape.pair(s, a)] = total > 0.0 ? std::max(sa[shape.pair(s, a)], 0.0) / total : uniform;
    }
  }
  return pi;
}

/// Backward recursion for Q and V under pi; the loss may be signed.
inline ValueTables q_v_values(const LayeredMdp& mdp, const Policy& pi, std::span<const double> loss) {
  const MdpShape& shape = mdp.shape();
  ValueTables out{PairVector(shape.pair_count(), 0.0), std::vector<double>(shape.state_count(), 0.0)};
  for (int s = shape.nonterminal_count() - 1; s >= 0; --s) {
    const int base = shape.next_begin(s);
    double v = 0.0;
    for (int a = 0; a < shape.action_count(); ++a) {
      auto row = mdp.next(s, a);
      double q = loss[shape.pair(s, a)];
      for (std::size_t j = 0; j < row.size(); ++j) q += row[j] * out.v[base + j];
      out.q[shape.pair(s, a)] = q;
      v += pi.prob[shape.pair(s, a)] * q;
    }
    out.v[s] = v;
  }
  return out;
}

/// Advantage Q(s,a) - V(s).
inline PairVector advantage(const MdpShape& shape, const ValueTables& values) {
  PairVector adv(shape.pair_count());
  for (int p = 0; p < shape.pair_count(); ++p) adv[p] = values.q[p] - values.v[shape.state_of_pair(p)];
  return adv;
}

inline double value_of(std::span<const double> occupancy, std::span<const double> loss) {
  return std::inner_product(occupancy.begin(), occupancy.end(), loss.begin(), 0.0);
}

template <class Chooser>
Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& pi, Chooser&& choose) {
  const MdpShape& shape = mdp.shape();
  Trajectory traj;
  traj.states.reserve(shape.layer_count() + 1);
  traj.actions.reserve(shape.layer_count());
  int s = shape.initial();
  traj.states.push_back(s);
  std::span<const double> action_probs;
  while (s != shape.terminal()) {
    action_probs = {pi.prob.data() + shape.pair(s, 0), static_cast<std::size_t>(shape.action_count())};
    double total = 0.0;
    for (double x : action_probs) total += std::max(x, 0.0);
    const int a = static_cast<int>(choose(action_probs, total));
    traj.actions.push_back(a);
    auto row = mdp.next(s, a);
    double row_total = 0.0;
    for (double x : row) row_total += x;
    s = shape.next_begin(s) + static_cast<int>(choose(row, row_total));
    traj.states.push_back(s);
  }
  return traj;
}

inline Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& pi, Rng& rng) {
  return sample_trajectory(mdp, pi, RngChooser(rng));
}

/// Calls visit(trajectory, probability) for every trajectory of positive
/// probability, by replaying the sampler over all branches.
template <class Visitor>
std::size_t for_each_trajectory(const LayeredMdp& mdp, const Policy& pi, Visitor&& visit,
                                std::size_t cap = 1'000'000) {
  BranchEnumerator enumerator(cap);
  return enumerator.run([&](auto& chooser) { return sample_trajectory(mdp, pi, chooser); },
                        std::forward<Visitor>(visit));
}

inline double aggregate_loss(const MdpShape& shape, const Trajectory& traj, std::span<const double> loss) {
  double total = 0.0;
  for (std::size_t k = 0; k < traj.actions.size(); ++k) total += loss[shape.pair(traj.states[k], traj.actions[k])];
  return total;
}

/// Largest aggregate loss over trajectories that have positive probability
/// under some policy.
inline double max_aggregate_loss(const LayeredMdp& mdp, std::span<const double> loss) {
  const MdpShape& shape = mdp.shape();
  std::vector<double> best(shape.state_count(), 0.0);
  for (int s = shape.nonterminal_count() - 1; s >= 0; --s) {
    double w = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < shape.action_count(); ++a) {
      auto row = mdp.next(s, a);
      double tail = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > 0.0) tail = std::max(tail, best[shape.next_begin(s) + j]);
      }
      w = std::max(w, loss[shape.pair(s, a)] + tail);
    }
    best[s] = w;
  }
  return best[shape.initial()];
}

/// States with positive occupancy under some policy.
inline std::vector<char> reachable_states(const LayeredMdp& mdp) {
  const MdpShape& shape = mdp.shape();
  std::vector<char> reach(shape.state_count(), 0);
  reach[shape.initial()] = 1;
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    if (!reach[s]) continue;
    for (int a = 0; a < shape.action_count(); ++a) {
      auto row = mdp.next(s, a);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > 0.0) reach[shape.next_begin(s) + j] = 1;
      }
    }
  }
  return reach;
}

/// Q*, V* under min-loss backward induction.
inline ValueTables optimal_values(const LayeredMdp& mdp, std::span<const double> loss) {
  const MdpShape& shape = mdp.shape();
  ValueTables out{PairVector(shape.pair_count(), 0.0), std::vector<double>(shape.state_count(), 0.0)};
  for (int s = shape.nonterminal_count() - 1; s >= 0; --s) {
    double v = std::numeric_limits<double>::infinity();
    for (int a = 0; a < shape.action_count(); ++a) {
      auto row = mdp.next(s, a);
      double q = loss[shape.pair(s, a)];
      for (std::size_t j = 0; j < row.size(); ++j) q += row[j] * out.v[shape.next_begin(s) + j];
      out.q[shape.pair(s, a)] = q;
      v = std::min(v, q);
    }
    out.v[s] = v;
  }
  return out;
}

/// Deterministic policy playing argmin_a Q (lowest action index on ties).
inline Policy greedy_policy(const MdpShape& shape, std::span<const double> q_table) {
  Policy pi{PairVector(shape.pair_count(), 0.0)};
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    int best = 0;
    for (int a = 1; a < shape.action_count(); ++a) {
      if (q_table[shape.pair(s, a)] < q_table[shape.pair(s, best)]) best = a;
    }
    pi.prob[shape.pair(s, best)] = 1.0;
  }
  return pi;
}

inline Policy deterministic_policy(const MdpShape& shape, std::span<const int> action_of_state) {
  Policy pi{PairVector(shape.pair_count(), 0.0)};
  for (int s = 0; s < shape.nonterminal_count(); ++s) pi.prob[shape.pair(s, action_of_state[s])] = 1.0;
  return pi;
}

}  // namespace bobw
