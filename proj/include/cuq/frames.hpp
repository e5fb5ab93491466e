#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cuq {

using Vec3 = std::array<double, 3>;

inline double norm(const Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

inline Vec3 sub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline double distance(const Vec3& a, const Vec3& b) { return norm(sub(a, b)); }

/// Body25 keypoint model: joint ids 0..24.
inline constexpr int kBody25Joints = 25;

/// Scan beams beyond this range are treated as dropouts, not measurements.
inline constexpr double kDefaultMaxRangeM = 49.0;

struct SkeletonJoint {
  Vec3 p{0, 0, 0};               // meters
  std::optional<double> confidence;  // fraction in [0,1] when reported
};

/// One human pose observation. Absent map entries are undetected joints.
struct SkeletonFrame {
  std::map<int, SkeletonJoint> joints;
};

/// One laser scan. Invalid beams (no return) carry NaN.
struct ScanFrame {
  double angle_start_deg = 0.0;
  double angle_step_deg = 0.0;
  std::vector<double> ranges;  // meters; NaN = invalid
};

/// Named scalar channels for systems without a dedicated payload.
struct GenericFrame {
  std::map<std::string, double> channels;
};

struct MeasurementFrame {
  double t = 0.0;  // seconds; monotone non-decreasing within a stream
  std::variant<SkeletonFrame, ScanFrame, GenericFrame> payload;
};

/// Beam count implied by a scan geometry: floor(span/step) + 1.
int beam_count(double span_deg, double step_deg);

/// A beam is usable if it returned a finite, non-negative range below the
/// dropout threshold.
inline bool valid_range(double range_m, double max_range_m = kDefaultMaxRangeM) {
  return std::isfinite(range_m) && range_m >= 0.0 && range_m <= max_range_m;
}

/// Joint lookup honoring detection validity: a joint reported with
/// confidence <= 0 counts as undetected. Returns nullptr when unusable.
const SkeletonJoint* find_joint(const SkeletonFrame& frame, int joint_id);

const char* payload_kind_name(const MeasurementFrame& frame);

}  // namespace cuq
