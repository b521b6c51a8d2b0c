#pragma once

// Online learners under aggregate bandit feedback. Each round the harness
// asks for a decision (a unit flow or a policy), samples a path or
// trajectory from it, and feeds back the path and the scalar c.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bobw/confidence.hpp"
#include "bobw/error.hpp"
#include "bobw/estimators.hpp"
#include "bobw/ftrl.hpp"
#include "bobw/graph.hpp"
#include "bobw/mdp.hpp"
#include "bobw/regularizers.hpp"

namespace bobw {

enum class LearnerId { sp_tsallis, sp_logbarrier, mdp_kt_tsallis, mdp_kt_logbarrier, mdp_ut_bobw };

inline std::string to_string(LearnerId id) {
  switch (id) {
    case LearnerId::sp_tsallis: return "sp_tsallis";
    case LearnerId::sp_logbarrier: return "sp_logbarrier";
    case LearnerId::mdp_kt_tsallis: return "mdp_kt_tsallis";
    case LearnerId::mdp_kt_logbarrier: return "mdp_kt_logbarrier";
    case LearnerId::mdp_ut_bobw: return "mdp_ut_bobw";
  }
  return "unknown";
}

inline LearnerId parse_learner(const std::string& name) {
  for (LearnerId id : {LearnerId::sp_tsallis, LearnerId::sp_logbarrier, LearnerId::mdp_kt_tsallis,
                       LearnerId::mdp_kt_logbarrier, LearnerId::mdp_ut_bobw}) {
    if (to_string(id) == name) return id;
  }
  throw Error(Errc::config_error, "unknown learner '" + name + "'");
}

inline bool is_graph_learner(LearnerId id) { return id == LearnerId::sp_tsallis || id == LearnerId::sp_logbarrier; }

struct LearnerOptions {
  std::optional<double> beta;   // log-barrier weight of the Tsallis variants
  std::optional<double> delta;  // confidence parameter of the epoch learner
  double tol = 1e-8;
  MdpRho mdp_rho = MdpRho::visited_state;
  bool sp_rho_tail = true;
};

/// FTRL over the unit-flow polytope with the path estimator.
class ShortestPathLearner {
 public:
  ShortestPathLearner(Dag dag, LearnerId id, long long horizon, const LearnerOptions& opt = {})
      : dag_(std::move(dag)),
        id_(id),
        opt_(opt),
        solver_(Polytope::flow(dag_), SolverOptions{opt.tol, 200}),
        cum_(dag_.edge_count(), 0.0),
        barrier_(dag_.edge_count(), static_cast<double>(std::max<long long>(horizon, 2))),
        beta_(opt.beta.value_or(2.0)) {
    if (!is_graph_learner(id)) throw Error(Errc::config_error, to_string(id) + " is not a shortest-path learner");
  }

  /// q_t for round t (1-based).
  std::span<const double> decide(long long t) {
    t_ = t;
    const SeparableBarrier reg = id_ == LearnerId::sp_tsallis
                                     ? TsallisHybrid{global_sqrt_rate(t), beta_, 2.0}.coefficients(cum_.size())
                                     : barrier_.coefficients(cum_.size());
    solver_.solve(cum_, reg);
    max_kkt_ = std::max(max_kkt_, solver_.report().kkt_residual_inf);
    return solver_.point();
  }

  void observe(const PathVector& path, double c) {
    const auto& q = solver_.point();
    const auto est = sp_estimate(dag_, q, path, c);
    for (std::size_t e = 0; e < cum_.size(); ++e) cum_[e] += est[e];
    if (id_ == LearnerId::sp_logbarrier) {
      barrier_.accumulate(opt_.sp_rho_tail ? rho_sp_tail(dag_, q, path, c) : rho_sp(dag_, q, path, c));
    }
  }

  const Dag& dag() const { return dag_; }
  LearnerId id() const { return id_; }
  const SolverReport& last_report() const { return solver_.report(); }
  double max_kkt_residual() const { return max_kkt_; }
  std::span<const double> cumulative_loss() const { return cum_; }

 private:
  Dag dag_;
  LearnerId id_;
  LearnerOptions opt_;
  FtrlSolver solver_;
  std::vector<double> cum_;
  AdaptiveLogBarrier barrier_;
  double beta_;
  long long t_ = 0;
  double max_kkt_ = 0.0;
};

/// Episode-level interface shared by the three MDP learners.
class MdpLearner {
 public:
  virtual ~MdpLearner() = default;
  virtual const Policy& decide(long long t) = 0;
  virtual void observe(const Trajectory& traj, double c) = 0;
  virtual LearnerId id() const = 0;
  virtual double max_kkt_residual() const = 0;
  virtual const SolverReport& last_report() const = 0;
};

/// FTRL over the occupancy polytope of the known transition law.
class KnownTransitionLearner final : public MdpLearner {
 public:
  KnownTransitionLearner(LayeredMdp mdp, LearnerId id, long long horizon, const LearnerOptions& opt = {})
      : mdp_(std::move(mdp)),
        id_(id),
        opt_(opt),
        solver_(Polytope::occupancy(mdp_), SolverOptions{opt.tol, 200}),
        cum_(mdp_.shape().pair_count(), 0.0),
        barrier_(mdp_.shape().pair_count(), static_cast<double>(std::max<long long>(horizon, 2))),
        beta_(opt.beta.value_or(2.0)) {
    if (id != LearnerId::mdp_kt_tsallis && id != LearnerId::mdp_kt_logbarrier) {
      throw Error(Errc::config_error, to_string(id) + " is not a known-transition learner");
    }
  }

  const Policy& decide(long long t) override {
    const SeparableBarrier reg = id_ == LearnerId::mdp_kt_tsallis
                                     ? TsallisHybrid{global_sqrt_rate(t), beta_, 2.0}.coefficients(cum_.size())
                                     : barrier_.coefficients(cum_.size());
    solver_.solve(cum_, reg);
    max_kkt_ = std::max(max_kkt_, solver_.report().kkt_residual_inf);
    pi_ = policy_from_q(mdp_.shape(), solver_.point());
    q_ = q_from_policy(mdp_, pi_);
    return pi_;
  }

  void observe(const Trajectory& traj, double c) override {
    const auto est = kt_estimate(mdp_.shape(), q_, traj, c);
    for (std::size_t j = 0; j < cum_.size(); ++j) cum_[j] += est[j];
    if (id_ == LearnerId::mdp_kt_logbarrier) barrier_.accumulate(rho_mdp(opt_.mdp_rho, mdp_.shape(), pi_, traj, c));
  }

  LearnerId id() const override { return id_; }
  double max_kkt_residual() const override { return max_kkt_; }
  const SolverReport& last_report() const override { return solver_.report(); }
  const Occupancy& occupancy() const { return q_; }
  std::span<const double> cumulative_loss() const { return cum_; }

 private:
  LayeredMdp mdp_;
  LearnerId id_;
  LearnerOptions opt_;
  FtrlSolver solver_;
  std::vector<double> cum_;
  AdaptiveLogBarrier barrier_;
  double beta_;
  Policy pi_;
  Occupancy q_;
  double max_kkt_ = 0.0;
};

/// Epoch-based learner for an unknown transition law. It sees the layer
/// structure only; transitions are learned from its own trajectories.
class UnknownTransitionLearner final : public MdpLearner {
 public:
  UnknownTransitionLearner(MdpShape shape, long long horizon, const LearnerOptions& opt = {})
      : shape_(std::move(shape)),
        horizon_(std::max<long long>(horizon, 1)),
        opt_(opt),
        beta_(opt.beta.value_or(1024.0 * shape_.layer_count())),
        delta_(opt.delta.value_or(std::pow(static_cast<double>(std::max<long long>(horizon_, 2)), -3.0))),
        log_iota_(log_iota(shape_.state_count(), shape_.action_count(), horizon_, delta_)),
        counters_(Counters::zeros(shape_)),
        epoch_(EpochState::begin(1, 1, shape_, counters_, log_iota_, delta_)),
        solver_(Polytope::occupancy(epoch_.empirical), SolverOptions{opt.tol, 200}),
        cum_(shape_.pair_count(), 0.0),
        upper_solver_(shape_) {
    epoch_starts_.push_back(1);
  }

  const Policy& decide(long long t) override {
    t_ = t;
    const auto reg = TsallisHybrid{epoch_sqrt_rate(t, epoch_.start), beta_, 1.0}.coefficients(cum_.size());
    solver_.solve(cum_, reg);
    max_kkt_ = std::max(max_kkt_, solver_.report().kkt_residual_inf);
    pi_ = policy_from_q(shape_, solver_.point());
    upper_ = upper_solver_.compute(epoch_.empirical, epoch_.width, pi_);
    return pi_;
  }

  void observe(const Trajectory& traj, double c) override {
    const auto est = ut_estimate(shape_, upper_, pi_, traj, c);
    for (std::size_t j = 0; j < cum_.size(); ++j) cum_[j] += est[j] - epoch_.bonus[j];
    update_counters(shape_, counters_, traj);
    if (epoch_trigger(shape_, counters_, epoch_.snapshot, traj)) {
      epoch_ = EpochState::begin(epoch_.index + 1, t_ + 1, shape_, counters_, log_iota_, delta_);
      solver_ = FtrlSolver(Polytope::occupancy(epoch_.empirical), SolverOptions{opt_.tol, 200});
      std::fill(cum_.begin(), cum_.end(), 0.0);
      epoch_starts_.push_back(t_ + 1);
    }
  }

  LearnerId id() const override { return LearnerId::mdp_ut_bobw; }
  double max_kkt_residual() const override { return max_kkt_; }
  const SolverReport& last_report() const override { return solver_.report(); }

  const EpochState& epoch() const { return epoch_; }
  const Counters& counters() const { return counters_; }
  const UpperOccupancy& upper() const { return upper_; }
  std::span<const double> estimated_occupancy() const { return solver_.point(); }
  /// Start rounds of every epoch so far, including epochs not yet played.
  const std::vector<long long>& epoch_starts() const { return epoch_starts_; }
  double beta() const { return beta_; }
  double delta() const { return delta_; }
  double log_iota_value() const { return log_iota_; }

 private:
  MdpShape shape_;
  long long horizon_;
  LearnerOptions opt_;
  double beta_;
  double delta_;
  double log_iota_;
  Counters counters_;
  EpochState epoch_;
  FtrlSolver solver_;
  std::vector<double> cum_;
  UpperOccupancySolver upper_solver_;
  Policy pi_;
  UpperOccupancy upper_;
  std::vector<long long> epoch_starts_;
  long long t_ = 0;
  double max_kkt_ = 0.0;
};

/// Epoch-count ceiling 4|S||A|(log2 T + 1).
inline double epoch_count_bound(const MdpShape& shape, long long horizon) {
  return 4.0 * shape.state_count() * shape.action_count() *
         (std::log2(static_cast<double>(std::max<long long>(horizon, 1))) + 1.0);
}

// ---------------------------------------------------------------------------
// Regret accounting.

/// Cumulative pseudo-regret series sum_{tau<=t} <l_tau, q_tau - q*>, with
/// the per-round inner products supplied by the caller.
class RegretAccumulator {
 public:
  void add(std::span<const double> loss, std::span<const double> played, std::span<const double> comparator) {
    double gap = 0.0;
    for (std::size_t j = 0; j < loss.size(); ++j) gap += loss[j] * (played[j] - comparator[j]);
    total_ += gap;
    series_.push_back(total_);
  }
  const std::vector<double>& series() const { return series_; }
  double total() const { return total_; }

 private:
  double total_ = 0.0;
  std::vector<double> series_;
};

/// Best deterministic policy for a fixed loss table and its occupancy.
inline Occupancy best_policy_occupancy(const LayeredMdp& mdp, std::span<const double> loss) {
  return q_from_policy(mdp, greedy_policy(mdp.shape(), optimal_values(mdp, loss).q));
}

/// Shortest s-g path under a fixed edge loss, as a flow; ties go to the
/// lowest edge id.
inline std::vector<double> best_path_flow(const Dag& dag, std::span<const double> loss) {
  const int nv = dag.vertex_count();
  std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
  std::vector<int> choice(nv, -1);
  dist[dag.sink()] = 0.0;
  auto topo = dag.topological_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    for (int e : dag.out_edges(*it)) {
      const double d = loss[e] + dist[dag.edge(e).head];
      if (d < dist[*it]) {
        dist[*it] = d;
        choice[*it] = e;
      }
    }
  }
  std::vector<double> flow(dag.edge_count(), 0.0);
  for (int v = dag.source(); v != dag.sink(); v = dag.edge(choice[v]).head) flow[choice[v]] = 1.0;
  return flow;
}

}  // namespace bobw
