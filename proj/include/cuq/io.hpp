#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"  // vendored nlohmann/json

#include "cuq/frames.hpp"
#include "cuq/synth.hpp"

namespace cuq {

enum class FrameFormat { Jsonl, Csv };

struct ParseOptions {
  FrameFormat format = FrameFormat::Jsonl;
  /// Scan geometry for CSV input (the wide format has no room for it).
  double csv_angle_start_deg = 0.0;
  double csv_angle_step_deg = 0.0;
  /// When >= 0, the first scan frame must carry exactly this many beams
  /// (FormatError otherwise). Later frames must match the first regardless.
  int expected_beams = -1;
  std::size_t max_recorded_errors = 20;
};

struct ParseStats {
  std::size_t parsed = 0;
  std::size_t skipped = 0;
  std::vector<std::string> errors;  // first max_recorded_errors messages
};

/// Streaming frame reader: holds one record at a time, never the stream.
///
/// Record-level problems (malformed JSON, bad field types, non-monotone
/// timestamps) are counted and skipped. Stream-level contract violations
/// (payload kind change, scan geometry mismatch against the first frame)
/// throw FormatError.
class FrameParser {
 public:
  explicit FrameParser(std::istream& in, ParseOptions options = {});

  std::optional<MeasurementFrame> next();
  const ParseStats& stats() const { return stats_; }

 private:
  std::optional<MeasurementFrame> next_jsonl();
  std::optional<MeasurementFrame> next_csv();
  bool admit(MeasurementFrame& frame, const std::string& context);
  void record_error(const std::string& message);

  std::istream& in_;
  ParseOptions options_;
  ParseStats stats_;
  std::size_t line_no_ = 0;
  double last_t_ = -std::numeric_limits<double>::infinity();
  int payload_index_ = -1;   // variant index of the first frame
  int scan_beams_ = -1;      // beam count locked by the first scan frame
  bool csv_header_done_ = false;
  std::vector<std::string> csv_columns_;
};

MeasurementFrame frame_from_json(const nlohmann::json& j);
nlohmann::ordered_json frame_to_json(const MeasurementFrame& frame);

void write_frames_jsonl(std::ostream& out,
                        std::span<const MeasurementFrame> frames);

/// Truth sidecar: one meta line, then one line per frame.
void write_truth_jsonl(std::ostream& out, const synth::GroundTruth& truth);
synth::GroundTruth read_truth_jsonl(std::istream& in);

/// Histogram export of bootstrap resample means for external plotting.
/// Columns: window_id,spec_id,bin_lo,bin_hi,count. Bin counts sum to the
/// number of resamples.
void write_histogram_csv(std::ostream& out, std::int64_t window_id,
                         const std::string& spec_id,
                         std::span<const double> resample_means, int bins);

}  // namespace cuq
