#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bobw {

enum class Errc {
  cycle_detected,
  unreachable_vertex,
  dangling_source_sink,
  stuck_at_vertex,
  too_many_paths,
  degenerate_support,
  too_many_outcomes,
  domain_error,
  precondition_violated,
  no_convergence,
  infeasible_polytope,
  too_large,
  schedule_gap,
  degenerate_fit,
  invalid_model,
  config_error,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::cycle_detected: return "CycleDetected";
    case Errc::unreachable_vertex: return "UnreachableVertex";
    case Errc::dangling_source_sink: return "DanglingSourceSink";
    case Errc::stuck_at_vertex: return "StuckAtVertex";
    case Errc::too_many_paths: return "TooManyPaths";
    case Errc::degenerate_support: return "DegenerateSupport";
    case Errc::too_many_outcomes: return "TooManyOutcomes";
    case Errc::domain_error: return "DomainError";
    case Errc::precondition_violated: return "PreconditionViolated";
    case Errc::no_convergence: return "NoConvergence";
    case Errc::infeasible_polytope: return "InfeasiblePolytope";
    case Errc::too_large: return "TooLarge";
    case Errc::schedule_gap: return "ScheduleGap";
    case Errc::degenerate_fit: return "DegenerateFit";
    case Errc::invalid_model: return "InvalidModel";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bobw
