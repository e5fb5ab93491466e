#pragma once

#include <limits>
#include <string>

namespace cuq {

/// A probability-per-hour threshold for dangerous failures.
struct SafetyLimit {
  double lambda_per_hour = 1e-6;
  std::string label = "ISO 13849 PFH_max";
};

/// Converts an uncertainty into a risk figure. l_bio has no defensible
/// default and must be configured explicitly; it is initialized to NaN so a
/// missing value is caught by validate(), never silently defaulted.
struct RiskModel {
  double severity_constant = 1.0;
  double l_bio = std::numeric_limits<double>::quiet_NaN();

  void validate() const;  // ConfigError unless both fields finite and > 0
};

struct SafetyVerdict {
  double pfh = 0.0;  // per hour
  double r = 0.0;    // u_C * l_bio
  bool pass = false;
  SafetyLimit limit;
  /// log10(lambda / pfh); +inf when pfh == 0 (reports omit non-finite values).
  double margin_orders = 0.0;
};

/// Reads a relative uncertainty directly as a dangerous-failure probability
/// per hour (identity with a unit reinterpretation; the mapping assumption
/// is recorded in the verdict). Throws ConfigError outside [0, 1].
double map_to_pfh(double u_relative);

/// r = u_C * l_bio, pass iff r <= lambda (boundary passes).
SafetyVerdict check_limit(double u_c, const RiskModel& model,
                          const SafetyLimit& limit);

/// Probability that the true distance is <= d_min when the measured distance
/// d_hr carries a Gaussian uncertainty u_d. u_d == 0 degenerates to an
/// indicator.
double distance_constraint_probability(double d_hr, double u_d, double d_min);

}  // namespace cuq
