#pragma once

// Loss estimators built from one aggregate feedback scalar per episode, and
// exact-enumeration oracles for their first and second moments.

#include <span>
#include <vector>

#include "bobw/enumerate.hpp"
#include "bobw/error.hpp"
#include "bobw/graph.hpp"
#include "bobw/mdp.hpp"

namespace bobw {

/// Upper occupancy bound: per-state u(s) and per-pair u(s,a) = u(s) pi(a|s).
struct UpperOccupancy {
  std::vector<double> s;
  PairVector sa;
};

/// Edge estimate c * (p(e)/q(e) - p(e-)/q(e-)), with e- the tail of e.
inline std::vector<double> sp_estimate(const Dag& dag, std::span<const double> q, const PathVector& p, double c) {
  std::vector<double> est(dag.edge_count(), 0.0);
  if (c == 0.0) return est;
  std::vector<double> tail_term(dag.vertex_count(), 0.0);
  for (int v = 0; v < dag.vertex_count(); ++v) {
    if (v == dag.sink() || !p.visits(v)) continue;
    const double qv = vertex_flow(dag, q, v);
    if (!(qv > 0.0)) throw Error(Errc::degenerate_support, "path visits '" + dag.name(v) + "' with zero flow");
    tail_term[v] = 1.0 / qv;
  }
  for (int e = 0; e < dag.edge_count(); ++e) {
    double value = -tail_term[dag.edge(e).tail];
    if (p.uses_edge(e)) {
      if (!(q[e] > 0.0)) throw Error(Errc::degenerate_support, "path uses edge " + dag.edge_name(e) + " with q(e)=0");
      value += 1.0 / q[e];
    }
    est[e] = c * value;
  }
  return est;
}

/// Known-transition estimate c * (1[s,a]/q(s,a) - 1[s]/q(s)).
inline PairVector kt_estimate(const MdpShape& shape, const Occupancy& q, const Trajectory& traj, double c) {
  PairVector est(shape.pair_count(), 0.0);
  if (c == 0.0) return est;
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const int s = traj.states[k];
    if (!(q.s[s] > 0.0)) throw Error(Errc::degenerate_support, "trajectory visits a state with q(s)=0");
    for (int a = 0; a < shape.action_count(); ++a) {
      const int p = shape.pair(s, a);
      double value = -1.0 / q.s[s];
      if (traj.actions[k] == a) {
        if (!(q.sa[p] > 0.0)) throw Error(Errc::degenerate_support, "trajectory takes a pair with q(s,a)=0");
        value += 1.0 / q.sa[p];
      }
      est[p] = c * value;
    }
  }
  return est;
}

/// Optimistic estimate
///   [c 1[s,a] + (1 - pi(a|s) - c) 1[s] pi(a|s)] / u(s,a) - (1 - pi(a|s)).
inline PairVector ut_estimate(const MdpShape& shape, const UpperOccupancy& u, const Policy& pi,
                              const Trajectory& traj, double c) {
  PairVector est(shape.pair_count());
  for (int p = 0; p < shape.pair_count(); ++p) est[p] = -(1.0 - pi.prob[p]);
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const int s = traj.states[k];
    for (int a = 0; a < shape.action_count(); ++a) {
      const int p = shape.pair(s, a);
      const double pia = pi.prob[p];
      const double numerator = (traj.actions[k] == a ? c : 0.0) + (1.0 - pia - c) * pia;
      if (numerator == 0.0) continue;
      if (!(u.sa[p] > 0.0)) throw Error(Errc::degenerate_support, "upper occupancy is zero on a visited pair");
      est[p] += numerator / u.sa[p];
    }
  }
  return est;
}

inline PairVector apply_bonus(std::span<const double> estimate, std::span<const double> bonus) {
  PairVector out(estimate.begin(), estimate.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bonus[i];
  return out;
}

/// How the aggregate scalar c is drawn given the trajectory's loss sum.
enum class FeedbackLaw {
  bernoulli,      // c ~ Bernoulli(sum of losses)
  deterministic,  // c = sum of losses
};

enum class EstimatorKind { known_transition, unknown_transition };

struct EstimatorMoments {
  std::vector<double> mean;
  std::vector<double> second;
};

namespace detail {

template <class Emit>
void for_each_feedback(double aggregate, FeedbackLaw law, Emit&& emit) {
  if (law == FeedbackLaw::deterministic) {
    emit(aggregate, 1.0);
    return;
  }
  if (aggregate > 0.0) emit(1.0, aggregate);
  if (aggregate < 1.0) emit(0.0, 1.0 - aggregate);
}

inline void accumulate(EstimatorMoments& m, std::span<const double> est, double weight) {
  for (std::size_t i = 0; i < est.size(); ++i) {
    m.mean[i] += weight * est[i];
    m.second[i] += weight * est[i] * est[i];
  }
}

}  // namespace detail

/// Exact mean and second moment of an MDP estimator, enumerating every
/// trajectory under (P, pi) and every feedback outcome. The unknown-transition
/// estimator needs `upper`.
inline EstimatorMoments estimator_moments(EstimatorKind kind, const LayeredMdp& mdp, const Policy& pi,
                                          std::span<const double> loss, FeedbackLaw law,
                                          const UpperOccupancy* upper = nullptr,
                                          std::size_t max_outcomes = 1'000'000) {
  const MdpShape& shape = mdp.shape();
  if (kind == EstimatorKind::unknown_transition && upper == nullptr) {
    throw Error(Errc::precondition_violated, "unknown-transition estimator needs an upper occupancy");
  }
  const Occupancy q = q_from_policy(mdp, pi);
  EstimatorMoments m{std::vector<double>(shape.pair_count(), 0.0), std::vector<double>(shape.pair_count(), 0.0)};
  for_each_trajectory(
      mdp, pi,
      [&](const Trajectory& traj, double prob) {
        detail::for_each_feedback(aggregate_loss(shape, traj, loss), law, [&](double c, double w) {
          const auto est = kind == EstimatorKind::known_transition ? kt_estimate(shape, q, traj, c)
                                                                   : ut_estimate(shape, *upper, pi, traj, c);
          detail::accumulate(m, est, prob * w);
        });
      },
      max_outcomes);
  return m;
}

inline PairVector exact_expectation(EstimatorKind kind, const LayeredMdp& mdp, const Policy& pi,
                                    std::span<const double> loss, FeedbackLaw law,
                                    const UpperOccupancy* upper = nullptr) {
  return estimator_moments(kind, mdp, pi, loss, law, upper).mean;
}

inline PairVector second_moment(EstimatorKind kind, const LayeredMdp& mdp, const Policy& pi,
                                std::span<const double> loss, FeedbackLaw law,
                                const UpperOccupancy* upper = nullptr) {
  return estimator_moments(kind, mdp, pi, loss, law, upper).second;
}

/// Shortest-path counterpart: enumerate every path the Markovian sampler can
/// return from q and every feedback outcome.
inline EstimatorMoments sp_estimator_moments(const Dag& dag, std::span<const double> q, std::span<const double> loss,
                                             FeedbackLaw law, std::size_t max_outcomes = 1'000'000) {
  EstimatorMoments m{std::vector<double>(dag.edge_count(), 0.0), std::vector<double>(dag.edge_count(), 0.0)};
  BranchEnumerator enumerator(max_outcomes);
  enumerator.run([&](auto& chooser) { return sample_path(dag, q, chooser); },
                 [&](const PathVector& p, double prob) {
                   double aggregate = 0.0;
                   for (int e : p.edges) aggregate += loss[e];
                   detail::for_each_feedback(aggregate, law, [&](double c, double w) {
                     detail::accumulate(m, sp_estimate(dag, q, p, c), prob * w);
                   });
                 });
  return m;
}

}  // namespace bobw
