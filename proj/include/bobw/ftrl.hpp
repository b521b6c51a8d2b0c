#pragma once

// Per-round FTRL step: minimize <L, q> + psi(q) over the unit-flow polytope
// of a DAG or the occupancy polytope of a layered transition law.
//
// The regularizer is separable, psi(q) = sum_j -a_j sqrt(q_j) - b_j ln q_j,
// so for fixed multipliers the Lagrangian minimizer has the closed form
// 1/sqrt(x) = 2c / (a/2 + sqrt(a^2/4 + 4bc)) with c the shifted cost. The
// solver runs damped Newton ascent on the concave dual; primal stationarity
// therefore holds to rounding and the Newton iteration drives feasibility.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bobw/error.hpp"
#include "bobw/graph.hpp"
#include "bobw/mdp.hpp"
#include "bobw/regularizers.hpp"

namespace bobw {

/// Equality-constrained feasible region A q = b over the coordinates that
/// are not structurally zero.
class Polytope {
 public:
  struct Entry {
    int row;
    double coef;
  };

  static Polytope flow(const Dag& dag) {
    Polytope poly;
    poly.model_ = dag;
    poly.dimension_ = dag.edge_count();
    // Rows: source, then internal vertices 1..n; "out - in = rhs".
    const int rows = dag.internal_count() + 1;
    poly.rhs_.assign(rows, 0.0);
    poly.rhs_[0] = 1.0;
    poly.direction_.assign(rows, 0.0);
    for (int v = 0; v < rows; ++v) poly.direction_[v] = dag.levels_to_sink()[v];
    for (int e = 0; e < dag.edge_count(); ++e) {
      poly.active_.push_back(e);
      std::vector<Entry> column{{dag.edge(e).tail, 1.0}};
      if (dag.edge(e).head != dag.sink()) column.push_back({dag.edge(e).head, -1.0});
      poly.columns_.push_back(std::move(column));
    }
    poly.finish();
    return poly;
  }

  /// Occupancy measures of `mdp`. Pairs at states no policy can reach are
  /// structurally zero and dropped from the problem.
  static Polytope occupancy(const LayeredMdp& mdp) {
    const MdpShape& shape = mdp.shape();
    Polytope poly;
    poly.model_ = mdp;
    poly.dimension_ = shape.pair_count();
    const auto reach = reachable_states(mdp);
    std::vector<int> row_of(shape.state_count(), -1);
    for (int s = 0; s < shape.nonterminal_count(); ++s) {
      if (!reach[s]) continue;
      row_of[s] = static_cast<int>(poly.rhs_.size());
      poly.rhs_.push_back(s == shape.initial() ? 1.0 : 0.0);
      poly.direction_.push_back(static_cast<double>(shape.layer_count() - shape.layer_of(s)));
    }
    for (int s = 0; s < shape.nonterminal_count(); ++s) {
      if (!reach[s]) continue;
      for (int a = 0; a < shape.action_count(); ++a) {
        poly.active_.push_back(shape.pair(s, a));
        std::vector<Entry> column{{row_of[s], 1.0}};
        auto next = mdp.next(s, a);
        for (std::size_t j = 0; j < next.size(); ++j) {
          const int sp = shape.next_begin(s) + static_cast<int>(j);
          if (next[j] > 0.0 && sp != shape.terminal()) column.push_back({row_of[sp], -next[j]});
        }
        poly.columns_.push_back(std::move(column));
      }
    }
    poly.finish();
    return poly;
  }

  int dimension() const { return dimension_; }
  int active_count() const { return static_cast<int>(active_.size()); }
  int row_count() const { return static_cast<int>(rhs_.size()); }
  std::span<const int> active() const { return active_; }
  std::span<const Entry> column(int j) const { return columns_[j]; }
  std::span<const double> rhs() const { return rhs_; }
  std::span<const double> dual_direction() const { return direction_; }
  /// (A^T w)_j for the dual direction w; at least 1 everywhere.
  double direction_slope(int j) const { return slope_[j]; }

  bool is_flow() const { return std::holds_alternative<Dag>(model_); }
  const Dag& dag() const { return std::get<Dag>(model_); }
  const LayeredMdp& mdp() const { return std::get<LayeredMdp>(model_); }

  /// max |A q - b| over the active coordinates of a full-length q.
  double feasibility_violation(std::span<const double> q) const {
    std::vector<double> r(rhs_.begin(), rhs_.end());
    for (auto& x : r) x = -x;
    for (int j = 0; j < active_count(); ++j) {
      for (const Entry& en : columns_[j]) r[en.row] += en.coef * q[active_[j]];
    }
    double worst = 0.0;
    for (double x : r) worst = std::max(worst, std::abs(x));
    return worst;
  }

  /// Extreme points (paths or deterministic-policy occupancies), in full
  /// coordinates, deduplicated.
  std::vector<std::vector<double>> vertices(std::size_t cap = 20) const {
    std::vector<std::vector<double>> out;
    auto add = [&](std::vector<double> v) {
      for (const auto& u : out) {
        if (u == v) return;
      }
      if (out.size() >= cap) throw Error(Errc::too_large, "polytope has more than " + std::to_string(cap) + " vertices");
      out.push_back(std::move(v));
    };
    if (is_flow()) {
      std::vector<PathVector> paths;
      try {
        paths = enumerate_paths(dag(), cap);
      } catch (const Error&) {
        throw Error(Errc::too_large, "polytope has more than " + std::to_string(cap) + " vertices");
      }
      for (const auto& p : paths) add(as_flow(p).edge);
      return out;
    }
    const LayeredMdp& m = mdp();
    const MdpShape& shape = m.shape();
    const auto reach = reachable_states(m);
    std::vector<int> states;
    for (int s = 0; s < shape.nonterminal_count(); ++s) {
      if (reach[s]) states.push_back(s);
    }
    std::vector<int> choice(shape.nonterminal_count(), 0);
    while (true) {
      add(q_from_policy(m, deterministic_policy(shape, choice)).sa);
      std::size_t i = 0;
      while (i < states.size() && ++choice[states[i]] == shape.action_count()) choice[states[i++]] = 0;
      if (i == states.size()) break;
    }
    return out;
  }

 private:
  void finish() {
    slope_.assign(active_.size(), 0.0);
    for (std::size_t j = 0; j < active_.size(); ++j) {
      for (const Entry& en : columns_[j]) slope_[j] += en.coef * direction_[en.row];
    }
  }

  std::variant<Dag, LayeredMdp> model_;
  int dimension_ = 0;
  std::vector<int> active_;
  std::vector<std::vector<Entry>> columns_;
  std::vector<double> rhs_;
  std::vector<double> direction_;
  std::vector<double> slope_;
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 200;
};

struct SolverReport {
  int iterations = 0;
  double kkt_residual_inf = 0.0;          // max of the two residuals below
  double stationarity_residual_inf = 0.0;  // scaled by 1 + |shifted cost|
  double feasibility_residual_inf = 0.0;
  double objective = 0.0;
};

/// <L, q> + psi(q) over the active coordinates.
inline double ftrl_objective(const Polytope& poly, std::span<const double> q, std::span<const double> cum_loss,
                             const SeparableBarrier& reg) {
  double total = 0.0;
  for (int j : poly.active()) {
    if (!(q[j] > 0.0)) return std::numeric_limits<double>::infinity();
    total += cum_loss[j] * q[j] - reg.sqrt_coef[j] * std::sqrt(q[j]) - reg.log_coef[j] * std::log(q[j]);
  }
  return total;
}

/// Scaled stationarity residual of grad psi(q) + L + A^T lambda, maxed with
/// the feasibility violation.
inline double kkt_residual(const Polytope& poly, std::span<const double> q, std::span<const double> multipliers,
                           std::span<const double> cum_loss, const SeparableBarrier& reg) {
  double worst = poly.feasibility_violation(q);
  for (int j = 0; j < poly.active_count(); ++j) {
    const int full = poly.active()[j];
    if (!(q[full] > 0.0)) return std::numeric_limits<double>::infinity();
    double shifted = cum_loss[full];
    for (const auto& en : poly.column(j)) shifted += en.coef * multipliers[en.row];
    const double g = -0.5 * reg.sqrt_coef[full] / std::sqrt(q[full]) - reg.log_coef[full] / q[full];
    worst = std::max(worst, std::abs(g + shifted) / (1.0 + std::abs(shifted)));
  }
  return worst;
}

/// Reusable solver bound to one polytope; each solve warm-starts from the
/// previous multipliers.
class FtrlSolver {
 public:
  explicit FtrlSolver(Polytope poly, SolverOptions options = {})
      : poly_(std::move(poly)), options_(options) {
    const int n = poly_.active_count();
    const int r = poly_.row_count();
    point_.assign(poly_.dimension(), 0.0);
    lambda_.assign(r, 0.0);
    trial_.assign(r, 0.0);
    step_.assign(r, 0.0);
    residual_.assign(r, 0.0);
    cost_.assign(n, 0.0);
    x_.assign(n, 0.0);
    loss_.assign(n, 0.0);
    a_.assign(n, 0.0);
    b_.assign(n, 0.0);
    slope_step_.assign(n, 0.0);
    schur_.resize(r, r);
    rhs_vec_.resize(r);
    ldlt_ = Eigen::LDLT<Eigen::MatrixXd>(r);
  }

  const Polytope& polytope() const { return poly_; }
  const std::vector<double>& point() const { return point_; }
  std::span<const double> multipliers() const { return lambda_; }
  const SolverReport& report() const { return report_; }
  void reset_warm_start() { warm_ = false; }

  /// Returns the minimizer in full coordinates (structural zeros stay 0).
  const std::vector<double>& solve(std::span<const double> cum_loss, const SeparableBarrier& reg) {
    const int n = poly_.active_count();
    const int r = poly_.row_count();
    for (int j = 0; j < n; ++j) {
      const int full = poly_.active()[j];
      loss_[j] = cum_loss[full];
      a_[j] = reg.sqrt_coef[full];
      b_[j] = reg.log_coef[full];
      if (!(b_[j] > 0.0)) throw Error(Errc::domain_error, "solver needs a positive log-barrier coefficient");
      if (!std::isfinite(loss_[j])) throw Error(Errc::domain_error, "cumulative loss is not finite");
    }
    if (!warm_) std::fill(lambda_.begin(), lambda_.end(), 0.0);
    lift(lambda_);

    double g = dual_value(lambda_);
    double resid = gradient(residual_);
    int it = 0;
    const double target = options_.tol * 1e-3;
    while (resid > target && it < options_.max_iterations) {
      ++it;
      build_schur();
      for (int i = 0; i < r; ++i) rhs_vec_[i] = residual_[i];
      ldlt_.compute(schur_);
      Eigen::VectorXd dir = ldlt_.solve(rhs_vec_);
      for (int i = 0; i < r; ++i) step_[i] = dir[i];

      // Largest step keeping every shifted cost positive.
      double t_max = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        double ds = 0.0;
        for (const auto& en : poly_.column(j)) ds += en.coef * step_[en.row];
        slope_step_[j] = ds;
        if (ds < 0.0) t_max = std::min(t_max, -cost_[j] / ds);
      }
      double t = std::min(1.0, 0.99 * t_max);
      double predicted = 0.0;
      for (int i = 0; i < r; ++i) predicted += residual_[i] * step_[i];
      // Below this the Armijo test is decided by rounding in g; take the
      // Newton step as is.
      const bool tiny = predicted <= 1e-12 * (1.0 + magnitude_);
      double g_new = g;
      for (int backtrack = 0; backtrack < 60; ++backtrack) {
        for (int i = 0; i < r; ++i) trial_[i] = lambda_[i] + t * step_[i];
        g_new = dual_value(trial_);
        if (tiny || g_new >= g + 1e-4 * t * predicted) break;
        t *= 0.5;
      }
      lambda_.swap(trial_);
      g = dual_value(lambda_);
      const double new_resid = gradient(residual_);
      if (tiny && new_resid >= resid) {
        resid = new_resid;
        break;
      }
      resid = new_resid;
    }

    for (double& v : point_) v = 0.0;
    for (int j = 0; j < n; ++j) point_[poly_.active()[j]] = x_[j];
    report_.iterations = it;
    report_.feasibility_residual_inf = resid;
    report_.stationarity_residual_inf = stationarity();
    report_.kkt_residual_inf = std::max(report_.feasibility_residual_inf, report_.stationarity_residual_inf);
    report_.objective = ftrl_objective(poly_, point_, cum_loss, reg);
    warm_ = true;
    if (!(report_.kkt_residual_inf <= options_.tol)) {
      warm_ = false;
      std::ostringstream msg;
      msg << "FTRL solve stopped after " << it << " iterations with KKT residual " << report_.kkt_residual_inf
          << " (feasibility " << report_.feasibility_residual_inf << ", stationarity "
          << report_.stationarity_residual_inf << ")";
      throw Error(Errc::no_convergence, msg.str());
    }
    return point_;
  }

 private:
  // Shift lambda along the dual direction until every primal coordinate is
  // at most one; this also restores dual feasibility.
  void lift(std::vector<double>& lambda) {
    const int n = poly_.active_count();
    double shift = 0.0;
    for (int j = 0; j < n; ++j) {
      double c = loss_[j];
      for (const auto& en : poly_.column(j)) c += en.coef * lambda[en.row];
      const double needed = b_[j] + 0.5 * a_[j] - c;
      if (needed > 0.0) shift = std::max(shift, needed / poly_.direction_slope(j));
    }
    if (shift > 0.0) {
      auto w = poly_.dual_direction();
      for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] += shift * w[i];
    }
  }

  // Dual objective at lambda; fills cost_ and x_.
  double dual_value(std::span<const double> lambda) {
    const int n = poly_.active_count();
    double total = 0.0;
    double scale = 0.0;
    for (int j = 0; j < n; ++j) {
      double c = loss_[j];
      for (const auto& en : poly_.column(j)) c += en.coef * lambda[en.row];
      if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
      cost_[j] = c;
      const double half_a = 0.5 * a_[j];
      const double y = 2.0 * c / (half_a + std::sqrt(half_a * half_a + 4.0 * b_[j] * c));
      x_[j] = 1.0 / (y * y);
      const double terms[3] = {c * x_[j], a_[j] / y, 2.0 * b_[j] * std::log(y)};
      total += terms[0] - terms[1] + terms[2];
      scale += std::abs(terms[0]) + std::abs(terms[1]) + std::abs(terms[2]);
    }
    auto rhs = poly_.rhs();
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      total -= lambda[i] * rhs[i];
      scale += std::abs(lambda[i] * rhs[i]);
    }
    magnitude_ = scale;
    return total;
  }

  // A x - b at the current x_; returns its max-norm.
  double gradient(std::vector<double>& out) {
    auto rhs = poly_.rhs();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -rhs[i];
    for (int j = 0; j < poly_.active_count(); ++j) {
      for (const auto& en : poly_.column(j)) out[en.row] += en.coef * x_[j];
    }
    double worst = 0.0;
    for (double v : out) worst = std::max(worst, std::abs(v));
    return worst;
  }

  void build_schur() {
    schur_.setZero();
    for (int j = 0; j < poly_.active_count(); ++j) {
      const double x = x_[j];
      const double h = 0.25 * a_[j] / (x * std::sqrt(x)) + b_[j] / (x * x);
      const double d = 1.0 / h;
      auto col = poly_.column(j);
      for (const auto& e1 : col) {
        for (const auto& e2 : col) schur_(e1.row, e2.row) += e1.coef * e2.coef * d;
      }
    }
  }

  double stationarity() const {
    double worst = 0.0;
    for (int j = 0; j < poly_.active_count(); ++j) {
      const double x = x_[j];
      const double g = -0.5 * a_[j] / std::sqrt(x) - b_[j] / x;
      worst = std::max(worst, std::abs(g + cost_[j]) / (1.0 + std::abs(cost_[j])));
    }
    return worst;
  }

  Polytope poly_;
  SolverOptions options_;
  SolverReport report_;
  bool warm_ = false;
  double magnitude_ = 0.0;
  std::vector<double> point_, lambda_, trial_, step_, residual_;
  std::vector<double> cost_, x_, loss_, a_, b_, slope_step_;
  Eigen::MatrixXd schur_;
  Eigen::VectorXd rhs_vec_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

struct FtrlSolution {
  std::vector<double> point;
  std::vector<double> multipliers;
  SolverReport report;
};

/// One-shot cold-start solve.
inline FtrlSolution solve_ftrl(const Polytope& poly, std::span<const double> cum_loss, const SeparableBarrier& reg,
                               SolverOptions options = {}) {
  FtrlSolver solver(poly, options);
  solver.solve(cum_loss, reg);
  const auto mult = solver.multipliers();
  return {solver.point(), std::vector<double>(mult.begin(), mult.end()), solver.report()};
}

/// Grid search over mixture weights of the polytope's vertices followed by
/// pairwise mass-transfer line searches. Only meant for tiny instances.
inline std::vector<double> brute_force_minimize(const Polytope& poly, std::span<const double> cum_loss,
                                                const SeparableBarrier& reg, int resolution = 0) {
  const auto verts = poly.vertices(20);
  const int k = static_cast<int>(verts.size());
  const int dim = poly.dimension();
  auto mix = [&](const std::vector<double>& w) {
    std::vector<double> q(dim, 0.0);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < dim; ++j) q[j] += w[i] * verts[i][j];
    }
    return q;
  };
  auto objective = [&](const std::vector<double>& w) { return ftrl_objective(poly, mix(w), cum_loss, reg); };

  if (resolution <= 0) {
    // Largest resolution with at most ~2e5 grid points.
    resolution = 1;
    auto count = [&](int r) {
      double c = 1.0;
      for (int i = 1; i < k; ++i) c = c * (r + i) / i;
      return c;
    };
    while (resolution < 400 && count(resolution + 1) <= 2e5) ++resolution;
  }

  std::vector<double> best_w(k, 1.0 / k);
  double best = objective(best_w);
  std::vector<int> comp(k, 0);
  auto visit = [&](auto&& self, int i, int remaining) -> void {
    if (i == k - 1) {
      comp[i] = remaining;
      std::vector<double> w(k);
      for (int j = 0; j < k; ++j) w[j] = static_cast<double>(comp[j]) / resolution;
      const double f = objective(w);
      if (f < best) {
        best = f;
        best_w = w;
      }
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      comp[i] = c;
      self(self, i + 1, remaining - c);
    }
  };
  visit(visit, 0, resolution);

  for (int sweep = 0; sweep < 5000 && k > 1; ++sweep) {
    const double before = best;
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        const double lo = -best_w[i], hi = best_w[j];
        if (hi - lo <= 0.0) continue;
        auto along = [&](double delta) {
          std::vector<double> w = best_w;
          w[i] += delta;
          w[j] -= delta;
          return -objective(w);
        };
        auto [delta, neg] = golden_section_max(along, lo, hi, 1e-14);
        if (-neg < best) {
          best = -neg;
          best_w[i] += delta;
          best_w[j] -= delta;
        }
      }
    }
    if (before - best <= 1e-15 * (1.0 + std::abs(best))) break;
  }
  return mix(best_w);
}

}  // namespace bobw
