#include "cuq/propagation.hpp"

#include <cmath>

#include "cuq/errors.hpp"

namespace cuq {

const char* to_string(TermKind kind) {
  return kind == TermKind::TypeA ? "type_a" : "type_b";
}

const char* to_string(PropagationMode mode) {
  return mode == PropagationMode::AsPrinted ? "as-printed" : "gum-squared";
}

PropagationMode propagation_mode_from_string(const std::string& name) {
  if (name == "as-printed") return PropagationMode::AsPrinted;
  if (name == "gum-squared") return PropagationMode::GumSquared;
  throw ConfigError("unknown propagation mode: " + name);
}

TypeBEval type_b_eval(const TypeBSpec& spec, double operating_point) {
  if (spec.valid_range) {
    const auto& [lo, hi] = *spec.valid_range;
    if (operating_point < lo || operating_point > hi) {
      throw ConfigError(spec.source_id + ": operating point " +
                        std::to_string(operating_point) +
                        " outside valid range");
    }
  }
  TypeBEval out;
  if (const auto* abs = std::get_if<ConstantAbsolute>(&spec.model)) {
    out.u = abs->u;
  } else if (const auto* rel = std::get_if<ConstantRelative>(&spec.model)) {
    out.u = rel->fraction * operating_point;
  } else {
    const auto& lin = std::get<LinearInRange>(spec.model);
    out.u = lin.slope * operating_point + lin.intercept;
  }
  if (out.u < 0.0) {
    out.u = 0.0;
    out.clamped = true;
  }
  return out;
}

double combine(std::span<const SensitivityTerm> terms, PropagationMode mode) {
  if (terms.empty()) throw ConfigError("combine needs at least one term");
  double sum = 0.0;
  for (const auto& term : terms) {
    if (!std::isfinite(term.sensitivity) || !std::isfinite(term.u) ||
        term.sensitivity < 0.0 || term.u < 0.0) {
      throw ConfigError("sensitivity terms must be finite and non-negative");
    }
    const double contribution = term.sensitivity * term.u;
    sum += mode == PropagationMode::GumSquared ? contribution * contribution
                                               : contribution;
  }
  return std::sqrt(sum);
}

SensitivityTerm split_detection(double u_op, double s_op, double u_ls,
                                double s_ls) {
  for (double v : {u_op, s_op, u_ls, s_ls}) {
    if (!(v >= 0.0)) throw ConfigError("split_detection arguments must be >= 0");
  }
  SensitivityTerm term;
  term.symbol = "det";
  term.sensitivity = s_op * s_ls;
  term.u = u_op * u_ls;
  term.kind = TermKind::TypeA;
  return term;
}

PositionUncertainty human_position_uncertainty(
    const SensitivityTerm& det_term, std::span<const SensitivityTerm> env_terms,
    PropagationMode mode, double confidence) {
  PositionUncertainty out;
  out.confidence = confidence;
  out.components.push_back(det_term);
  out.components.insert(out.components.end(), env_terms.begin(), env_terms.end());
  out.u = combine(out.components, mode);
  return out;
}

double hr_distance(const Vec3& r_h, const Vec3& r_r) {
  return distance(r_h, r_r);
}

DistanceUncertainty hr_distance_uncertainty(const Vec3& r_h, const Vec3& r_r,
                                            double u_rh, double u_rr) {
  const double d = hr_distance(r_h, r_r);
  if (d == 0.0) {
    throw DataError("coincident positions: distance uncertainty undefined");
  }
  const Vec3 delta = sub(r_h, r_r);
  const double component_sum = delta[0] + delta[1] + delta[2];

  DistanceUncertainty out;
  out.prefactor = component_sum / d;
  out.value = out.prefactor * (u_rh + u_rr);
  out.abs_value = std::abs(out.prefactor) * (u_rh + u_rr);
  // The signed component sum can cancel at nonzero separation; flag it so
  // callers see the degenerate case instead of a silent zero.
  out.degenerate_prefactor = out.prefactor == 0.0;
  return out;
}

UncertaintyEstimate average_estimates(
    std::span<const UncertaintyEstimate> estimates) {
  if (estimates.empty()) throw DataError("average of no estimates");
  const double confidence = estimates.front().confidence;
  bool all_relative = true;
  UncertaintyEstimate out;
  out.confidence = confidence;
  out.window_id = estimates.front().window_id;
  out.spec_id = "average";
  double inv = 1.0 / static_cast<double>(estimates.size());
  double rel = 0.0;
  for (const auto& est : estimates) {
    if (est.confidence != confidence) {
      throw ConfigError("cannot average estimates at mixed confidence levels");
    }
    out.u += est.u * inv;
    out.lo += est.lo * inv;
    out.hi += est.hi * inv;
    out.point_estimate += est.point_estimate * inv;
    out.signed_mean += est.signed_mean * inv;
    out.standard_error += est.standard_error * inv;
    out.n += est.n;
    out.self_referenced = out.self_referenced || est.self_referenced;
    if (est.relative) {
      rel += *est.relative * inv;
    } else {
      all_relative = false;
    }
  }
  if (all_relative) out.relative = rel;
  return out;
}

double joint_from_pair(double u_pair, double factor) {
  if (!(u_pair >= 0.0) || !(factor > 0.0)) {
    throw ConfigError("pair attribution needs u >= 0 and factor > 0");
  }
  return u_pair * factor;
}

}  // namespace cuq
