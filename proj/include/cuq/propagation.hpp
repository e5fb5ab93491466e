#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cuq/frames.hpp"
#include "cuq/stats.hpp"

namespace cuq {

enum class TermKind { TypeA, TypeB };
const char* to_string(TermKind kind);

/// One summand of a combined standard uncertainty: |da/dx| and u(x).
struct SensitivityTerm {
  std::string symbol;
  double sensitivity = 1.0;  // |da/dx|, >= 0
  double u = 0.0;            // standard uncertainty, >= 0
  TermKind kind = TermKind::TypeB;
};

/// How sensitivity-weighted terms are aggregated.
///   AsPrinted:  u_C = sqrt( sum_j s_j * u_j )        (the default)
///   GumSquared: u_C = sqrt( sum_j (s_j * u_j)^2 )    (standard quadrature,
///               reported separately as a cross-check, never substituted)
enum class PropagationMode { AsPrinted, GumSquared };
const char* to_string(PropagationMode mode);
PropagationMode propagation_mode_from_string(const std::string& name);

struct ConstantAbsolute {
  double u = 0.0;
};
struct ConstantRelative {
  double fraction = 0.0;
};
struct LinearInRange {
  double slope = 0.0;      // units per unit of operating point
  double intercept = 0.0;  // units
};

/// A-priori (manufacturer/model) uncertainty of one source.
struct TypeBSpec {
  std::string source_id;
  std::variant<ConstantAbsolute, ConstantRelative, LinearInRange> model;
  std::optional<std::pair<double, double>> valid_range;
};

struct TypeBEval {
  double u = 0.0;
  bool clamped = false;  // a negative linear evaluation was clamped to 0
};

/// Evaluates a Type B model at an operating point (e.g. camera distance or
/// scan range). LinearInRange values below zero clamp to 0 with the flag
/// set. Throws ConfigError when the point is outside valid_range.
TypeBEval type_b_eval(const TypeBSpec& spec, double operating_point);

/// Combined standard uncertainty over the given terms in the requested mode.
/// Throws ConfigError on an empty term list or non-finite entries.
double combine(std::span<const SensitivityTerm> terms,
               PropagationMode mode = PropagationMode::AsPrinted);

/// Composite detection term: the human-detection contribution split across
/// the pose estimator and the laser scanner, combined multiplicatively, so
/// the term's contribution s*u equals (s_op*u_op) * (s_ls*u_ls). Recorded
/// under symbol "det"; kind TypeA since the pose-estimator side is the
/// data-driven unknown.
SensitivityTerm split_detection(double u_op, double s_op, double u_ls,
                                double s_ls);

struct PositionUncertainty {
  double u = 0.0;
  std::vector<SensitivityTerm> components;
  double confidence = 0.95;
};

/// Combined standard uncertainty on the human position: the detection term
/// plus environmental terms, with component provenance retained.
PositionUncertainty human_position_uncertainty(
    const SensitivityTerm& det_term, std::span<const SensitivityTerm> env_terms,
    PropagationMode mode = PropagationMode::AsPrinted, double confidence = 0.95);

/// Euclidean human-robot distance.
double hr_distance(const Vec3& r_h, const Vec3& r_r);

struct DistanceUncertainty {
  double value = 0.0;      // signed, as printed
  double abs_value = 0.0;  // |prefactor| variant, safe for downstream checks
  double prefactor = 0.0;  // sum_p (r_H,p - r_R,p) / d_HR
  bool degenerate_prefactor = false;  // prefactor vanished at nonzero separation
};

/// Human-robot distance uncertainty with the signed component-sum prefactor:
///   [ sum_p (r_H,p - r_R,p) / d_HR ] * (u_rH + u_rR)
/// The absolute-prefactor variant is carried alongside so safety checks
/// never receive a negative uncertainty. Throws DataError for coincident
/// positions.
DistanceUncertainty hr_distance_uncertainty(const Vec3& r_h, const Vec3& r_r,
                                            double u_rh, double u_rr);

/// Arithmetic mean of estimates sharing a confidence level (u, interval and
/// relative value are averaged element-wise; relative only when every input
/// has one). Throws DataError on empty input, ConfigError on mixed
/// confidence levels.
UncertaintyEstimate average_estimates(
    std::span<const UncertaintyEstimate> estimates);

/// Equal-performance attribution of a pair-distance uncertainty to a single
/// joint: u_joint = factor * u_pair, default factor 1/sqrt(2). Overridable
/// via configuration.
double joint_from_pair(double u_pair, double factor = 0.7071067811865476);

}  // namespace cuq
