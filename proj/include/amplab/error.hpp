#pragma once

#include <stdexcept>
#include <string>

namespace amplab {

/// Failure categories surfaced by the library. Every throw site uses
/// amplab::fail so the category is machine-checkable from the exception.
enum class errc {
  invalid_interval,
  too_coarse,
  bad_exponent,
  mesh_mismatch,
  nonfinite_value,
  weight_not_nonneg,
  no_convergence,
  bracket_failure,
  midpoint_not_a_node,
  infeasible_constraint,
  geometry_infeasible,
  fibering_infeasible,
  not_subcritical,
  near_resonance,
  out_of_window,
  positivity_violation,
  no_admissible_start,
  basin_escape,
  divergence,
  not_applicable,
  monotonicity_violation,
  no_sign_change,
  watchdog_positive_solution,
  watchdog_zero_pairing,
  watchdog_second_eigenvalue,
  bad_config,
};

inline const char* errc_name(errc c) noexcept {
  switch (c) {
    case errc::invalid_interval: return "invalid-interval";
    case errc::too_coarse: return "too-coarse";
    case errc::bad_exponent: return "bad-exponent";
    case errc::mesh_mismatch: return "mesh-mismatch";
    case errc::nonfinite_value: return "nonfinite-value";
    case errc::weight_not_nonneg: return "weight-not-nonneg";
    case errc::no_convergence: return "no-convergence";
    case errc::bracket_failure: return "bracket-failure";
    case errc::midpoint_not_a_node: return "midpoint-not-a-node";
    case errc::infeasible_constraint: return "infeasible-constraint";
    case errc::geometry_infeasible: return "geometry-infeasible";
    case errc::fibering_infeasible: return "fibering-infeasible";
    case errc::not_subcritical: return "not-subcritical";
    case errc::near_resonance: return "near-resonance";
    case errc::out_of_window: return "out-of-window";
    case errc::positivity_violation: return "positivity-violation";
    case errc::no_admissible_start: return "no-admissible-start";
    case errc::basin_escape: return "basin-escape";
    case errc::divergence: return "divergence";
    case errc::not_applicable: return "not-applicable";
    case errc::monotonicity_violation: return "monotonicity-violation";
    case errc::no_sign_change: return "no-sign-change";
    case errc::watchdog_positive_solution: return "watchdog-positive-solution";
    case errc::watchdog_zero_pairing: return "watchdog-zero-pairing";
    case errc::watchdog_second_eigenvalue: return "watchdog-second-eigenvalue";
    case errc::bad_config: return "bad-config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace amplab
