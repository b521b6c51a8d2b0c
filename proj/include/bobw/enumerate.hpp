#pragma once

// Choice abstraction shared by the samplers. A sampler asks its chooser to
// pick an index proportional to a weight vector; plugging in BranchEnumerator
// instead of an RNG-backed chooser replays the same sampler code over every
// outcome, which gives exact outcome probabilities for test oracles.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bobw/error.hpp"
#include "bobw/random.hpp"

namespace bobw {

class RngChooser {
 public:
  explicit RngChooser(Rng& rng) : rng_(&rng) {}

  /// Picks i with probability weights[i] / total. `total` is the caller's
  /// computed sum, so tiny floating-point drift in the weights is absorbed.
  std::size_t operator()(std::span<const double> weights, double total) {
    const double u = uniform01(*rng_) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last_positive = i;
      acc += weights[i];
      if (u < acc) return i;
    }
    return last_positive;
  }

 private:
  Rng* rng_;
};

/// Depth-first enumeration of every branch a chooser-driven procedure can take.
class BranchEnumerator {
 public:
  explicit BranchEnumerator(std::size_t max_outcomes = 1'000'000) : max_outcomes_(max_outcomes) {}

  /// Runs `procedure(chooser)` once per distinct branch sequence and calls
  /// `visit(result, probability)`. Zero-weight branches are skipped.
  template <class Procedure, class Visitor>
  std::size_t run(Procedure&& procedure, Visitor&& visit) {
    decisions_.clear();
    std::size_t outcomes = 0;
    while (true) {
      depth_ = 0;
      probability_ = 1.0;
      Replay chooser{this};
      auto result = procedure(chooser);
      decisions_.resize(depth_);
      if (++outcomes > max_outcomes_) {
        throw Error(Errc::too_many_outcomes, "more than " + std::to_string(max_outcomes_) + " outcomes");
      }
      visit(result, probability_);
      if (!advance()) break;
    }
    return outcomes;
  }

 private:
  struct Decision {
    std::vector<double> weights;
    double total;
    std::size_t index;
  };

  struct Replay {
    BranchEnumerator* owner;
    std::size_t operator()(std::span<const double> weights, double total) {
      return owner->choose(weights, total);
    }
  };

  std::size_t choose(std::span<const double> weights, double total) {
    if (depth_ < decisions_.size()) {
      const Decision& d = decisions_[depth_++];
      probability_ *= d.weights[d.index] / d.total;
      return d.index;
    }
    std::size_t first = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) {
        first = i;
        break;
      }
    }
    if (first == weights.size()) {
      throw Error(Errc::precondition_violated, "chooser called with no positive weight");
    }
    decisions_.push_back({std::vector<double>(weights.begin(), weights.end()), total, first});
    ++depth_;
    probability_ *= weights[first] / total;
    return first;
  }

  bool advance() {
    while (!decisions_.empty()) {
      Decision& d = decisions_.back();
      std::size_t next = d.index + 1;
      while (next < d.weights.size() && d.weights[next] <= 0.0) ++next;
      if (next < d.weights.size()) {
        d.index = next;
        return true;
      }
      decisions_.pop_back();
    }
    return false;
  }

  std::size_t max_outcomes_;
  std::vector<Decision> decisions_;
  std::size_t depth_ = 0;
  double probability_ = 1.0;
};

}  // namespace bobw
