#pragma once

// Coordinate-separable FTRL regularizers. Every family used by the learners
// has the per-coordinate form
//     phi_j(x) = -a_j sqrt(x) - b_j ln(x),   a_j >= 0, b_j > 0,
// so SeparableBarrier stores (a, b) and the families only differ in how they
// set them.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bobw/error.hpp"
#include "bobw/graph.hpp"
#include "bobw/mdp.hpp"

namespace bobw {

struct SeparableBarrier {
  std::vector<double> sqrt_coef;  // a_j
  std::vector<double> log_coef;   // b_j

  std::size_t size() const { return log_coef.size(); }
};

/// -(scale/eta) sum sqrt(q) - beta sum ln q. The shortest-path and
/// known-transition learners use scale 2; the epoch learner uses scale 1.
struct TsallisHybrid {
  double eta = 1.0;
  double beta = 2.0;
  double tsallis_scale = 2.0;

  SeparableBarrier coefficients(std::size_t dim) const {
    if (!(eta > 0.0) || !(beta >= 0.0)) throw Error(Errc::domain_error, "TsallisHybrid needs eta > 0 and beta >= 0");
    return {std::vector<double>(dim, tsallis_scale / eta), std::vector<double>(dim, beta)};
  }
};

/// Adaptive learning rate eta_t(e) = (4 + rho_sum(e) / ln T)^(-1/2).
inline double adaptive_rate(double rho_sum, double horizon) {
  const double log_t = std::log(horizon);
  if (!(log_t > 0.0)) throw Error(Errc::domain_error, "adaptive rate needs horizon T > 1");
  return 1.0 / std::sqrt(4.0 + rho_sum / log_t);
}

/// -sum (1/eta_t(e)) ln q(e) with the adaptive per-coordinate rate.
struct AdaptiveLogBarrier {
  std::vector<double> rho_sum;
  double horizon = 2.0;

  AdaptiveLogBarrier() = default;
  AdaptiveLogBarrier(std::size_t dim, double horizon_) : rho_sum(dim, 0.0), horizon(horizon_) {}

  double rate(std::size_t j) const { return adaptive_rate(rho_sum[j], horizon); }

  void accumulate(std::span<const double> increment) {
    for (std::size_t j = 0; j < rho_sum.size(); ++j) rho_sum[j] += increment[j];
  }

  SeparableBarrier coefficients(std::size_t dim) const {
    if (dim != rho_sum.size()) throw Error(Errc::precondition_violated, "dimension mismatch");
    SeparableBarrier reg{std::vector<double>(dim, 0.0), std::vector<double>(dim)};
    for (std::size_t j = 0; j < dim; ++j) reg.log_coef[j] = 1.0 / rate(j);
    return reg;
  }
};

namespace detail {

inline void check_interior(std::span<const double> q) {
  for (double x : q) {
    if (!(x > 0.0)) throw Error(Errc::domain_error, "regularizer evaluated at a non-positive coordinate");
  }
}

}  // namespace detail

inline double value(const SeparableBarrier& reg, std::span<const double> q) {
  detail::check_interior(q);
  double total = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    total -= reg.sqrt_coef[j] * std::sqrt(q[j]) + reg.log_coef[j] * std::log(q[j]);
  }
  return total;
}

inline std::vector<double> grad(const SeparableBarrier& reg, std::span<const double> q) {
  detail::check_interior(q);
  std::vector<double> g(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    g[j] = -0.5 * reg.sqrt_coef[j] / std::sqrt(q[j]) - reg.log_coef[j] / q[j];
  }
  return g;
}

inline std::vector<double> hess_diag(const SeparableBarrier& reg, std::span<const double> q) {
  detail::check_interior(q);
  std::vector<double> h(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    h[j] = 0.25 * reg.sqrt_coef[j] / (q[j] * std::sqrt(q[j])) + reg.log_coef[j] / (q[j] * q[j]);
  }
  return h;
}

/// D(y, x) = psi(y) - psi(x) - <grad psi(x), y - x>, summed in the closed
/// per-coordinate forms (a/sqrt x)(sqrt x - sqrt y)^2 / 2 and
/// b(-ln(y/x) + y/x - 1), which avoid cancellation.
inline double bregman(const SeparableBarrier& reg, std::span<const double> y, std::span<const double> x) {
  detail::check_interior(y);
  detail::check_interior(x);
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = std::sqrt(x[j]) - std::sqrt(y[j]);
    const double ratio = y[j] / x[j];
    total += 0.5 * reg.sqrt_coef[j] * diff * diff / std::sqrt(x[j]);
    total += reg.log_coef[j] * (ratio - 1.0 - std::log(ratio));
  }
  return total;
}

template <class Reg>
double value(const Reg& reg, std::span<const double> q) { return value(reg.coefficients(q.size()), q); }
template <class Reg>
std::vector<double> grad(const Reg& reg, std::span<const double> q) { return grad(reg.coefficients(q.size()), q); }
template <class Reg>
std::vector<double> hess_diag(const Reg& reg, std::span<const double> q) {
  return hess_diag(reg.coefficients(q.size()), q);
}
template <class Reg>
double bregman(const Reg& reg, std::span<const double> y, std::span<const double> x) {
  return bregman(reg.coefficients(x.size()), y, x);
}

// ---------------------------------------------------------------------------
// One-dimensional stability checks. Each computes
//   lhs = sup_{y in (0,1]} { l (x - y) - D(y, x) }
// numerically and the closed-form bound rhs.

struct StabilityCheck {
  double lhs;
  double rhs;
  double argmax;
};

/// Golden-section maximization of a unimodal function on [lo, hi]; the
/// endpoints are also evaluated.
template <class F>
std::pair<double, double> golden_section_max(F&& f, double lo, double hi, double tol = 1e-10) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  std::pair<double, double> best{fc > fd ? c : d, std::max(fc, fd)};
  for (double end : {lo, hi}) {
    const double fe = f(end);
    if (fe > best.second) best = {end, fe};
  }
  return best;
}

inline constexpr double kStabilityLower = 1e-12;

/// Pure Tsallis phi(x) = -2 sqrt(x) with the divergence scaled by 1/eta.
/// Bound eta x^{3/2} l^2 / (1 + eta l sqrt x), valid when eta sqrt(x) l > -1.
inline StabilityCheck stability_oracle_tsallis(double x, double loss, double eta) {
  if (!(x > 0.0 && x < 1.0) || !(eta > 0.0) || !(eta * std::sqrt(x) * loss > -1.0)) {
    throw Error(Errc::precondition_violated, "tsallis stability needs x in (0,1), eta > 0, eta sqrt(x) l > -1");
  }
  const double sx = std::sqrt(x);
  auto objective = [&](double y) {
    const double diff = sx - std::sqrt(y);
    return loss * (x - y) - diff * diff / (eta * sx);
  };
  auto [arg, lhs] = golden_section_max(objective, kStabilityLower, 1.0);
  return {lhs, eta * x * sx * loss * loss / (1.0 + eta * loss * sx), arg};
}

/// phi(x) = -(2/eta) sqrt(x) - beta ln x. Bound 6 eta x^{3/2} l^2, valid when
/// x l >= -beta/2.
inline StabilityCheck stability_oracle_tsallis_lb(double x, double loss, double eta, double beta) {
  if (!(x > 0.0 && x < 1.0) || !(eta > 0.0) || !(beta > 0.0) || !(x * loss >= -beta / 2.0)) {
    throw Error(Errc::precondition_violated, "tsallis+log-barrier stability needs x in (0,1), x l >= -beta/2");
  }
  const double sx = std::sqrt(x);
  auto objective = [&](double y) {
    const double diff = sx - std::sqrt(y);
    const double ratio = y / x;
    return loss * (x - y) - diff * diff / (eta * sx) - beta * (ratio - 1.0 - std::log(ratio));
  };
  auto [arg, lhs] = golden_section_max(objective, kStabilityLower, 1.0);
  return {lhs, 6.0 * eta * x * sx * loss * loss, arg};
}

/// phi(x) = -ln x with the divergence scaled by 1/eta. Bound eta x^2 l^2,
/// valid when eta l x >= -1/2.
inline StabilityCheck stability_oracle_logbarrier(double x, double loss, double eta) {
  if (!(x > 0.0 && x < 1.0) || !(eta > 0.0) || !(eta * loss * x >= -0.5)) {
    throw Error(Errc::precondition_violated, "log-barrier stability needs x in (0,1), eta l x >= -1/2");
  }
  auto objective = [&](double y) {
    const double ratio = y / x;
    return loss * (x - y) - (ratio - 1.0 - std::log(ratio)) / eta;
  };
  auto [arg, lhs] = golden_section_max(objective, kStabilityLower, 1.0);
  return {lhs, eta * x * x * loss * loss, arg};
}

// ---------------------------------------------------------------------------
// Stability increments rho_t feeding the adaptive log-barrier.

/// Shortest path: c^2 p(e) (1 - q(e)/q(e-))^2.
inline std::vector<double> rho_sp(const Dag& dag, std::span<const double> q, const PathVector& p, double c) {
  std::vector<double> rho(dag.edge_count(), 0.0);
  for (int e : p.edges) {
    const double ratio = q[e] / vertex_flow(dag, q, dag.edge(e).tail);
    rho[e] = c * c * (1.0 - ratio) * (1.0 - ratio);
  }
  return rho;
}

/// Shortest path, tail-indicator form: c^2 p(e-) (p(e) - q(e)/q(e-))^2.
inline std::vector<double> rho_sp_tail(const Dag& dag, std::span<const double> q, const PathVector& p, double c) {
  std::vector<double> rho(dag.edge_count(), 0.0);
  for (int e = 0; e < dag.edge_count(); ++e) {
    const int tail = dag.edge(e).tail;
    if (!p.visits(tail)) continue;
    const double d = (p.uses_edge(e) ? 1.0 : 0.0) - q[e] / vertex_flow(dag, q, tail);
    rho[e] = c * c * d * d;
  }
  return rho;
}

enum class MdpRho {
  chosen_action,  // c^2 1[s,a] (1 - pi(a|s))^2
  visited_state,  // c^2 1[s] (1[s,a] - pi(a|s))^2
};

inline PairVector rho_mdp(MdpRho kind, const MdpShape& shape, const Policy& pi, const Trajectory& traj, double c) {
  PairVector rho(shape.pair_count(), 0.0);
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const int s = traj.states[k];
    for (int a = 0; a < shape.action_count(); ++a) {
      const int p = shape.pair(s, a);
      const bool taken = traj.actions[k] == a;
      if (kind == MdpRho::chosen_action) {
        if (taken) rho[p] = c * c * (1.0 - pi.prob[p]) * (1.0 - pi.prob[p]);
      } else {
        const double d = (taken ? 1.0 : 0.0) - pi.prob[p];
        rho[p] = c * c * d * d;
      }
    }
  }
  return rho;
}

// ---------------------------------------------------------------------------
// Learning-rate schedules.

/// 1/sqrt(t).
inline double global_sqrt_rate(long t) {
  if (t < 1) throw Error(Errc::precondition_violated, "round index starts at 1");
  return 1.0 / std::sqrt(static_cast<double>(t));
}

/// 1/sqrt(t - t_i + 1), restarting at every epoch start t_i.
inline double epoch_sqrt_rate(long t, long epoch_start) {
  if (t < epoch_start || epoch_start < 1) throw Error(Errc::precondition_violated, "round precedes epoch start");
  return 1.0 / std::sqrt(static_cast<double>(t - epoch_start + 1));
}

}  // namespace bobw
