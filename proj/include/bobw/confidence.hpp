#pragma once

// Visit counters, epoch doubling, empirical transitions, confidence widths
// and upper occupancy bounds for the unknown-transition learner.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bobw/error.hpp"
#include "bobw/estimators.hpp"
#include "bobw/mdp.hpp"

namespace bobw {

/// sa[pair] = m(s,a); sas[transition_offset(s,a) + j] = m(s,a,s') for the
/// j-th state of the next layer.
struct Counters {
  std::vector<long long> sa;
  std::vector<long long> sas;

  static Counters zeros(const MdpShape& shape) {
    return {std::vector<long long>(shape.pair_count(), 0), std::vector<long long>(shape.transition_count(), 0)};
  }
};

inline void update_counters(const MdpShape& shape, Counters& c, const Trajectory& traj) {
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const int s = traj.states[k];
    const int a = traj.actions[k];
    const int next = traj.states[k + 1];
    ++c.sa[shape.pair(s, a)];
    ++c.sas[shape.transition_offset(s, a) + (next - shape.next_begin(s))];
  }
}

/// True iff a pair visited by `traj` reached max{1, 2 m_prev}. Counters must
/// already include `traj`.
inline bool epoch_trigger(const MdpShape& shape, const Counters& c, const Counters& snapshot, const Trajectory& traj) {
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const int p = shape.pair(traj.states[k], traj.actions[k]);
    if (c.sa[p] >= std::max<long long>(1, 2 * snapshot.sa[p])) return true;
  }
  return false;
}

/// Count ratios; rows of unvisited pairs are uniform over the next layer.
inline LayeredMdp empirical_transition(const MdpShape& shape, const Counters& c) {
  std::vector<double> prob(shape.transition_count(), 0.0);
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    const int width = shape.next_size(s);
    for (int a = 0; a < shape.action_count(); ++a) {
      const long long m = c.sa[shape.pair(s, a)];
      const int off = shape.transition_offset(s, a);
      for (int j = 0; j < width; ++j) {
        prob[off + j] = m > 0 ? static_cast<double>(c.sas[off + j]) / static_cast<double>(m) : 1.0 / width;
      }
    }
  }
  return LayeredMdp(shape, std::move(prob));
}

/// ln(|S||A|T/delta), |S| counting every state including the terminal one.
inline double log_iota(int state_count, int action_count, long long horizon, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(Errc::domain_error, "confidence parameter must lie in (0,1)");
  return std::log(static_cast<double>(state_count)) + std::log(static_cast<double>(action_count)) +
         std::log(static_cast<double>(horizon)) - std::log(delta);
}

inline double confidence_width_scalar(double p_bar, long long m, double log_iota_value) {
  const double denom = static_cast<double>(std::max<long long>(m, 1));
  return std::min(2.0 * std::sqrt(p_bar * log_iota_value / denom + 14.0 * log_iota_value / denom), 1.0);
}

/// Per-transition width in the layout of `LayeredMdp::table()`.
inline std::vector<double> confidence_width(const LayeredMdp& empirical, const Counters& c, double log_iota_value) {
  const MdpShape& shape = empirical.shape();
  std::vector<double> width(shape.transition_count());
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < shape.action_count(); ++a) {
      const long long m = c.sa[shape.pair(s, a)];
      const int off = shape.transition_offset(s, a);
      auto row = empirical.next(s, a);
      for (std::size_t j = 0; j < row.size(); ++j) width[off + j] = confidence_width_scalar(row[j], m, log_iota_value);
    }
  }
  return width;
}

inline PairVector bonus_vector(const MdpShape& shape, std::span<const double> width) {
  PairVector bonus(shape.pair_count());
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < shape.action_count(); ++a) {
      const int off = shape.transition_offset(s, a);
      double total = 0.0;
      for (int j = 0; j < shape.next_size(s); ++j) total += width[off + j];
      bonus[shape.pair(s, a)] = std::min(2.0, total);
    }
  }
  return bonus;
}

inline bool contains_truth(const LayeredMdp& truth, const LayeredMdp& empirical, std::span<const double> width) {
  auto t = truth.table();
  auto e = empirical.table();
  if (t.size() != e.size() || t.size() != width.size()) throw Error(Errc::precondition_violated, "transition shapes differ");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - e[i]) > width[i]) return false;
  }
  return true;
}

namespace detail {

// max sum_j p_j f_j over p in the box [lo, hi] intersected with the simplex.
class BoxMaximizer {
 public:
  double run(std::span<const double> center, std::span<const double> width, std::span<const double> f) {
    const std::size_t n = center.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(), [&](int x, int y) { return f[x] > f[y] || (f[x] == f[y] && x < y); });
    double mass = 1.0;
    double value = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = std::max(0.0, center[j] - width[j]);
      mass -= lo;
      value += lo * f[j];
    }
    for (int j : order_) {
      if (mass <= 0.0) break;
      const double lo = std::max(0.0, center[j] - width[j]);
      const double hi = std::min(1.0, center[j] + width[j]);
      const double add = std::min(hi - lo, mass);
      value += add * f[j];
      mass -= add;
    }
    return value;
  }

 private:
  std::vector<int> order_;
};

}  // namespace detail

/// Largest occupancy of each state over all transitions in the box
/// |P - P_bar| <= width, under policy `pi`. u(s,a) = u(s) pi(a|s).
class UpperOccupancySolver {
 public:
  explicit UpperOccupancySolver(const MdpShape& shape) : f_(shape.state_count(), 0.0) {}

  UpperOccupancy compute(const LayeredMdp& empirical, std::span<const double> width, const Policy& pi) {
    const MdpShape& shape = empirical.shape();
    UpperOccupancy out{std::vector<double>(shape.state_count(), 0.0), PairVector(shape.pair_count(), 0.0)};
    out.s[shape.initial()] = 1.0;
    for (int target = 1; target < shape.state_count(); ++target) {
      const int k = shape.layer_of(target);
      std::fill(f_.begin(), f_.end(), 0.0);
      f_[target] = 1.0;
      for (int layer = k - 1; layer >= 0; --layer) {
        const int begin = shape.layer_begin(layer);
        for (int s = begin; s < begin + shape.layer_size(layer); ++s) {
          const int nb = shape.next_begin(s);
          std::span<const double> fn(f_.data() + nb, shape.next_size(s));
          double total = 0.0;
          for (int a = 0; a < shape.action_count(); ++a) {
            const double w = pi.prob[shape.pair(s, a)];
            if (w <= 0.0) continue;
            const int off = shape.transition_offset(s, a);
            total += w * box_.run(empirical.next(s, a), width.subspan(off, shape.next_size(s)), fn);
          }
          f_[s] = total;
        }
      }
      out.s[target] = std::min(1.0, f_[shape.initial()]);
    }
    for (int p = 0; p < shape.pair_count(); ++p) out.sa[p] = out.s[shape.state_of_pair(p)] * pi.prob[p];
    return out;
  }

 private:
  std::vector<double> f_;
  detail::BoxMaximizer box_;
};

inline UpperOccupancy upper_occupancy(const LayeredMdp& empirical, std::span<const double> width, const Policy& pi) {
  return UpperOccupancySolver(empirical.shape()).compute(empirical, width, pi);
}

/// Bookkeeping for the current epoch.
struct EpochState {
  int index = 1;
  long long start = 1;
  LayeredMdp empirical;
  std::vector<double> width;
  PairVector bonus;
  double log_iota = 0.0;
  double delta = 0.0;
  Counters snapshot;  // m_{i-1}: counts when this epoch began

  static EpochState begin(int index, long long start, const MdpShape& shape, const Counters& counters,
                          double log_iota_value, double delta) {
    LayeredMdp emp = empirical_transition(shape, counters);
    auto width = confidence_width(emp, counters, log_iota_value);
    auto bonus = bonus_vector(shape, width);
    return EpochState{index, start, std::move(emp), std::move(width), std::move(bonus), log_iota_value, delta,
                      counters};
  }
};

struct EpochRecord {
  int index;
  long long start;
  long long total_visits;
  long long min_pair_count;
  double max_width;
};

inline EpochRecord describe(const EpochState& e) {
  EpochRecord r{e.index, e.start, 0, 0, 0.0};
  if (!e.snapshot.sa.empty()) r.min_pair_count = *std::min_element(e.snapshot.sa.begin(), e.snapshot.sa.end());
  for (long long m : e.snapshot.sa) r.total_visits += m;
  for (double w : e.width) r.max_width = std::max(r.max_width, w);
  return r;
}

}  // namespace bobw
