#include "cuq/frames.hpp"

#include <cmath>

#include "cuq/errors.hpp"

namespace cuq {

int beam_count(double span_deg, double step_deg) {
  if (!(span_deg > 0.0) || !(step_deg > 0.0)) {
    throw ConfigError("scan geometry requires positive span and step");
  }
  return static_cast<int>(std::floor(span_deg / step_deg)) + 1;
}

const SkeletonJoint* find_joint(const SkeletonFrame& frame, int joint_id) {
  const auto it = frame.joints.find(joint_id);
  if (it == frame.joints.end()) return nullptr;
  const SkeletonJoint& joint = it->second;
  if (joint.confidence && *joint.confidence <= 0.0) return nullptr;
  for (double c : joint.p) {
    if (!std::isfinite(c)) return nullptr;
  }
  return &joint;
}

const char* payload_kind_name(const MeasurementFrame& frame) {
  switch (frame.payload.index()) {
    case 0: return "skeleton";
    case 1: return "scan";
    default: return "generic";
  }
}

}  // namespace cuq
