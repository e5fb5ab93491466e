#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cuq/frames.hpp"

namespace cuq {

/// What to do when a conserved quantity has no declared reference value.
enum class ReferencePolicy {
  GroundTruth,  // reference must be supplied (config or truth sidecar)
  WindowMean,   // self-calibrate on the window mean of the raw quantity
};

const char* to_string(ReferencePolicy policy);
ReferencePolicy reference_policy_from_string(const std::string& name);

/// Conserved pairwise joint distances (rigid segments of one body).
struct JointPairDistance {
  std::vector<std::pair<int, int>> pairs;
  /// Per-pair reference lengths in meters; empty, or aligned with `pairs`
  /// with nullopt meaning "fall back to the reference policy".
  std::vector<std::optional<double>> reference;
};

/// Static environment: every beam's range is constant over time.
struct StaticScan {
  /// Per-beam reference ranges in meters; empty means policy fallback for
  /// every beam.
  std::vector<std::optional<double>> reference;
};

/// A named scalar channel that is known to be constant.
struct GenericConstant {
  std::string channel;
  std::optional<double> reference;
};

/// A declared invariant of the observed system. Violations of it are the
/// raw material for Type A uncertainty estimation.
struct ConservationSpec {
  std::string id;
  std::variant<JointPairDistance, StaticScan, GenericConstant> kind;
  ReferencePolicy reference_policy = ReferencePolicy::WindowMean;

  /// Throws ConfigError on duplicate/equal pair ids or non-positive
  /// reference values.
  void validate() const;
};

/// Per-window signed violations of one conservation spec, pooled across the
/// spec's targets (pairs or beams). `covariates` carry auxiliary series
/// aligned with `values`; multi-target specs record the target index under
/// "pair" or "beam". Timestamps are strictly increasing per target.
struct DeviationSeries {
  std::string spec_id;
  std::int64_t window_id = 0;
  std::vector<double> values;      // meters or channel units, signed
  std::vector<double> timestamps;  // seconds, aligned with values
  std::map<std::string, std::vector<double>> covariates;
  bool self_referenced = false;  // true when any reference came from the window mean

  std::size_t size() const { return values.size(); }

  /// Throws DataError if alignment or per-target timestamp ordering is broken.
  void check_aligned() const;
};

/// Signed deviation |p_j - p_k| - reference for one frame, or nullopt when
/// either joint is undetected (the frame contributes no sample for this
/// pair). Throws ConfigError for reference <= 0 or j == k.
std::optional<double> evaluate_joint_pair(const SkeletonFrame& frame,
                                          std::pair<int, int> pair,
                                          double reference_m);

struct ScanDeviations {
  std::vector<double> values;  // range - reference, valid beams only
  std::vector<int> beams;      // originating beam index per value
};

/// Element-wise range - reference over valid beams. `reference_m` must match
/// the beam count (FormatError otherwise); NaN reference entries skip that
/// beam.
ScanDeviations evaluate_static_scan(const ScanFrame& frame,
                                    std::span<const double> reference_m,
                                    double max_range_m = kDefaultMaxRangeM);

/// Window-mean reference estimates, keyed by target index (pair index, beam
/// index, or 0 for a generic channel). Targets with fewer than 2 valid
/// samples are omitted; throws DataError when nothing can be estimated.
std::map<int, double> estimate_reference(std::span<const MeasurementFrame> window,
                                         const ConservationSpec& spec,
                                         double max_range_m = kDefaultMaxRangeM);

struct VelocitySeries {
  std::vector<double> t;  // seconds, frames where the joint was present
  std::vector<double> v;  // m/s
};

/// Joint speed via central finite differences of position over time,
/// one-sided at the ends: v_i = |p(t_{i+1}) - p(t_{i-1})| / (t_{i+1} - t_{i-1}).
/// Frames missing the joint are skipped; output aligns with the remaining
/// frames. Throws DataError for fewer than 2 usable frames or repeated
/// timestamps.
VelocitySeries compute_velocity(std::span<const MeasurementFrame> frames,
                                int joint_id);

/// Options for window evaluation.
struct WindowOptions {
  double max_range_m = kDefaultMaxRangeM;
  /// Per-frame, per-beam true references (e.g. from a synth truth sidecar),
  /// aligned with the window's frames. When set, overrides the spec's scan
  /// reference; NaN entries skip the beam.
  const std::vector<std::vector<double>>* per_frame_scan_refs = nullptr;
};

/// Evaluates one spec over one window of frames: the deviation loop.
/// References resolve per target: explicit spec reference first, then the
/// reference policy. GroundTruth policy with no reference available raises
/// ConfigError.
DeviationSeries evaluate_window(std::span<const MeasurementFrame> window,
                                const ConservationSpec& spec,
                                std::int64_t window_id,
                                const WindowOptions& options = {});

/// Comparison mode without conservation knowledge: deviations of the raw
/// measured quantity from its own window mean. References and policies in
/// `spec` are ignored; only the target selection (pairs/beams/channel) is
/// used. Throws DataError when fewer than 2 samples exist for every target.
DeviationSeries baseline_spread(std::span<const MeasurementFrame> window,
                                const ConservationSpec& spec,
                                std::int64_t window_id,
                                const WindowOptions& options = {});

}  // namespace cuq
