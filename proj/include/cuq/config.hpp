#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"  // vendored nlohmann/json

#include "cuq/conservation.hpp"
#include "cuq/propagation.hpp"
#include "cuq/safety.hpp"

namespace cuq {

struct BootstrapConfig {
  std::size_t resamples = 10000;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

struct CovariateConfig {
  enum class Source { JointVelocity, Channel };
  std::string name;
  Source source = Source::JointVelocity;
  int joint_id = -1;      // for JointVelocity
  std::string channel;    // for Channel
};

struct HypothesisConfig {
  double alpha = 0.05;
  std::size_t permutations = 2000;
  std::vector<CovariateConfig> covariates;
};

struct TypeBEntry {
  TypeBSpec spec;
  double sensitivity = 1.0;
};

/// What the reported attribute is. JointPosition applies the pair-to-joint
/// attribution factor to the Type A term before propagation.
enum class AttributeKind { Measured, JointPosition };

enum class EvalMode { Conservation, Baseline };

struct PipelineConfig {
  std::vector<ConservationSpec> specs;
  std::size_t window_size = 10;
  BootstrapConfig bootstrap;
  HypothesisConfig hypothesis;

  ReferencePolicy reference_policy = ReferencePolicy::WindowMean;
  /// Relative Type B uncertainty of manually measured ground-truth
  /// references; when set (and the policy is GroundTruth) it enters the
  /// propagation as a "reference_manual" term.
  std::optional<double> reference_manual_relative;

  std::vector<TypeBEntry> type_b;
  PropagationMode propagation_mode = PropagationMode::AsPrinted;
  AttributeKind attribute = AttributeKind::Measured;
  double pair_attribution_factor = 0.7071067811865476;  // 1/sqrt(2)

  std::optional<RiskModel> risk;       // verdicts emitted only when set
  SafetyLimit safety_limit;
  std::optional<double> operating_range_m;  // enables relative uncertainties

  EvalMode mode = EvalMode::Conservation;
  double max_range_m = kDefaultMaxRangeM;
  int threads = 1;

  /// Throws ConfigError on any violated invariant (window_size >= 2,
  /// resamples >= 1, confidence in (0,1), lambda > 0, spec validity, ...).
  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

/// Normalized dump (defaults filled in), used by check-config.
nlohmann::ordered_json config_to_json(const PipelineConfig& config);

}  // namespace cuq
