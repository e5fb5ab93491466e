#include "cuq/safety.hpp"

#include <cmath>

#include "cuq/errors.hpp"

namespace cuq {

void RiskModel::validate() const {
  if (!std::isfinite(l_bio) || !(l_bio > 0.0)) {
    throw ConfigError("risk model requires an explicit l_bio > 0");
  }
  if (!std::isfinite(severity_constant) || !(severity_constant > 0.0)) {
    throw ConfigError("severity constant must be > 0");
  }
}

double map_to_pfh(double u_relative) {
  if (!(u_relative >= 0.0 && u_relative <= 1.0)) {
    throw ConfigError("relative uncertainty must lie in [0,1]");
  }
  // Identity with a unit reinterpretation: the relative uncertainty is read
  // directly as a dangerous-failure probability per hour.
  return u_relative;
}

SafetyVerdict check_limit(double u_c, const RiskModel& model,
                          const SafetyLimit& limit) {
  model.validate();
  if (!(limit.lambda_per_hour > 0.0)) {
    throw ConfigError("safety limit lambda must be > 0");
  }
  SafetyVerdict verdict;
  verdict.r = u_c * model.l_bio;
  verdict.pfh = verdict.r;
  verdict.pass = verdict.r <= limit.lambda_per_hour;
  verdict.limit = limit;
  verdict.margin_orders =
      verdict.pfh > 0.0
          ? std::log10(limit.lambda_per_hour / verdict.pfh)
          : std::numeric_limits<double>::infinity();
  return verdict;
}

double distance_constraint_probability(double d_hr, double u_d, double d_min) {
  if (!(u_d >= 0.0)) throw ConfigError("distance uncertainty must be >= 0");
  if (u_d == 0.0) return d_hr <= d_min ? 1.0 : 0.0;
  const double z = (d_min - d_hr) / u_d;
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace cuq
