#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"  // vendored nlohmann/json

#include "cuq/config.hpp"
#include "cuq/conservation.hpp"
#include "cuq/propagation.hpp"
#include "cuq/safety.hpp"
#include "cuq/stats.hpp"
#include "cuq/synth.hpp"

namespace cuq {

/// Everything the pipeline learned from one window.
struct WindowReport {
  std::int64_t window_id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t frames = 0;

  std::vector<UncertaintyEstimate> estimates;     // one per spec
  std::optional<UncertaintyEstimate> pooled;      // all specs pooled
  std::vector<HypothesisResult> hypotheses;       // pooled series, per covariate
  std::vector<DependencyReport> dependencies;     // only where H0 was rejected

  std::vector<SensitivityTerm> propagation_terms;
  PropagationMode propagation_mode = PropagationMode::AsPrinted;
  std::optional<double> combined_u;
  std::optional<double> combined_relative;

  std::optional<SafetyVerdict> verdict;
  std::string verdict_basis;  // "relative" or "absolute" u fed to the check

  std::string reference_policy;  // policy actually applied this window
  double elapsed_ms = 0.0;
  std::vector<std::string> errors;

  /// Pooled resample means, retained only when the caller asked for plot data.
  std::vector<double> pooled_resamples;
};

using FrameSource = std::function<std::optional<MeasurementFrame>()>;
using ReportSink = std::function<void(const WindowReport&)>;

struct PipelineOptions {
  /// Per-frame ground truth (synth sidecar). Supplies per-frame scan
  /// references and, for skeletons, true bone lengths under the GroundTruth
  /// policy when the spec itself carries no reference.
  const synth::GroundTruth* truth = nullptr;
  bool keep_resamples = false;
};

struct PipelineStats {
  std::size_t frames_in = 0;
  std::size_t windows = 0;
  std::size_t trailing_skipped = 0;  // frames in the final partial window
  std::size_t max_buffered = 0;      // high-water mark of retained frames
};

/// Runs the full loop: window frames, evaluate conservation deviations,
/// bootstrap, hypothesis tests (dependency report on rejection), Type A +
/// Type B propagation, safety verdict. Reports are handed to `sink` in
/// window order as soon as each window completes; no whole-stream
/// buffering. Window analyses run on config.threads workers; per-window
/// seeds derive from the master seed and window id, so results are
/// independent of the thread count.
PipelineStats run_pipeline(const PipelineConfig& config, FrameSource source,
                           const ReportSink& sink,
                           const PipelineOptions& options = {});

/// Tumbling-window splitter. push() hands back a full window every
/// window_size frames; leftover() is the trailing partial count.
class Windower {
 public:
  explicit Windower(std::size_t window_size);

  std::optional<std::vector<MeasurementFrame>> push(MeasurementFrame frame);
  std::size_t leftover() const { return buffer_.size(); }
  std::size_t max_buffered() const { return max_buffered_; }

 private:
  std::size_t window_size_;
  std::vector<MeasurementFrame> buffer_;
  std::size_t max_buffered_ = 0;
};

/// Batch form for tests and small inputs: non-overlapping windows of exactly
/// window_size frames; the trailing partial window is skipped and counted.
std::vector<std::vector<MeasurementFrame>> window_stream(
    std::span<const MeasurementFrame> frames, std::size_t window_size,
    std::size_t* skipped = nullptr);

/// One self-contained JSON object per window; key order fixed, non-finite
/// numbers omitted, absent sections omitted rather than null.
nlohmann::ordered_json report_to_json(const WindowReport& report);

/// One-line human-readable digest.
std::string report_summary(const WindowReport& report);

/// Static-scanner validation workflow: runs conservation mode (ground-truth
/// references, per-frame when a truth sidecar provides them) and baseline
/// mode (window-mean spread, no conservation knowledge) over the same
/// frames and reports both streams plus stream-level mean uncertainties.
struct ScannerValidation {
  double conservation_u = 0.0;
  double baseline_u = 0.0;
  std::optional<double> conservation_relative;
  std::optional<double> baseline_relative;
  std::size_t windows = 0;
  bool conservation_smaller = false;
  std::vector<WindowReport> conservation_reports;
  std::vector<WindowReport> baseline_reports;
};

ScannerValidation validate_scanner(const PipelineConfig& config,
                                   std::span<const MeasurementFrame> frames,
                                   const synth::GroundTruth* truth = nullptr);

}  // namespace cuq
