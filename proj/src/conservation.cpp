#include "cuq/conservation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cuq/errors.hpp"

namespace cuq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const SkeletonFrame* as_skeleton(const MeasurementFrame& f) {
  return std::get_if<SkeletonFrame>(&f.payload);
}
const ScanFrame* as_scan(const MeasurementFrame& f) {
  return std::get_if<ScanFrame>(&f.payload);
}
const GenericFrame* as_generic(const MeasurementFrame& f) {
  return std::get_if<GenericFrame>(&f.payload);
}

void check_pair(std::pair<int, int> pair) {
  if (pair.first == pair.second) {
    throw ConfigError("joint pair must name two distinct joints");
  }
  for (int id : {pair.first, pair.second}) {
    if (id < 0 || id >= kBody25Joints) {
      throw ConfigError("joint id outside the Body25 range [0,24]");
    }
  }
}

std::optional<double> channel_value(const GenericFrame& frame,
                                    const std::string& name) {
  const auto it = frame.channels.find(name);
  if (it == frame.channels.end() || !std::isfinite(it->second)) {
    return std::nullopt;
  }
  return it->second;
}

}  // namespace

const char* to_string(ReferencePolicy policy) {
  return policy == ReferencePolicy::GroundTruth ? "ground_truth" : "window_mean";
}

ReferencePolicy reference_policy_from_string(const std::string& name) {
  if (name == "ground_truth") return ReferencePolicy::GroundTruth;
  if (name == "window_mean") return ReferencePolicy::WindowMean;
  throw ConfigError("unknown reference policy: " + name);
}

void ConservationSpec::validate() const {
  if (id.empty()) throw ConfigError("conservation spec needs an id");
  if (const auto* jp = std::get_if<JointPairDistance>(&kind)) {
    if (jp->pairs.empty()) throw ConfigError(id + ": no joint pairs");
    if (!jp->reference.empty() && jp->reference.size() != jp->pairs.size()) {
      throw ConfigError(id + ": reference list does not match pair list");
    }
    for (const auto& pair : jp->pairs) check_pair(pair);
    for (const auto& ref : jp->reference) {
      if (ref && !(*ref > 0.0)) {
        throw ConfigError(id + ": non-positive reference distance");
      }
    }
  } else if (const auto* scan = std::get_if<StaticScan>(&kind)) {
    for (const auto& ref : scan->reference) {
      if (ref && !(*ref > 0.0)) {
        throw ConfigError(id + ": non-positive reference range");
      }
    }
  } else if (const auto* gc = std::get_if<GenericConstant>(&kind)) {
    if (gc->channel.empty()) throw ConfigError(id + ": channel name required");
  }
}

void DeviationSeries::check_aligned() const {
  if (timestamps.size() != values.size()) {
    throw DataError(spec_id + ": timestamps not aligned with values");
  }
  for (const auto& [name, list] : covariates) {
    if (list.size() != values.size()) {
      throw DataError(spec_id + ": covariate '" + name + "' not aligned");
    }
  }
  // Per-target strict timestamp ordering. Single-target series have no
  // target covariate and are checked as one sequence.
  const std::vector<double>* target = nullptr;
  if (auto it = covariates.find("pair"); it != covariates.end()) target = &it->second;
  if (auto it = covariates.find("beam"); it != covariates.end()) target = &it->second;
  std::map<int, double> last;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int key = target ? static_cast<int>((*target)[i]) : 0;
    const auto it = last.find(key);
    if (it != last.end() && !(timestamps[i] > it->second)) {
      throw DataError(spec_id + ": timestamps not strictly increasing");
    }
    last[key] = timestamps[i];
  }
}

std::optional<double> evaluate_joint_pair(const SkeletonFrame& frame,
                                          std::pair<int, int> pair,
                                          double reference_m) {
  check_pair(pair);
  if (!(reference_m > 0.0)) {
    throw ConfigError("joint pair reference must be positive");
  }
  const SkeletonJoint* a = find_joint(frame, pair.first);
  const SkeletonJoint* b = find_joint(frame, pair.second);
  if (!a || !b) return std::nullopt;  // missing joint: no sample
  return distance(a->p, b->p) - reference_m;
}

ScanDeviations evaluate_static_scan(const ScanFrame& frame,
                                    std::span<const double> reference_m,
                                    double max_range_m) {
  if (reference_m.size() != frame.ranges.size()) {
    throw FormatError("scan reference length " +
                      std::to_string(reference_m.size()) +
                      " does not match beam count " +
                      std::to_string(frame.ranges.size()));
  }
  ScanDeviations out;
  out.values.reserve(frame.ranges.size());
  out.beams.reserve(frame.ranges.size());
  for (std::size_t b = 0; b < frame.ranges.size(); ++b) {
    if (!valid_range(frame.ranges[b], max_range_m)) continue;
    if (!std::isfinite(reference_m[b])) continue;
    out.values.push_back(frame.ranges[b] - reference_m[b]);
    out.beams.push_back(static_cast<int>(b));
  }
  return out;
}

std::map<int, double> estimate_reference(std::span<const MeasurementFrame> window,
                                         const ConservationSpec& spec,
                                         double max_range_m) {
  std::map<int, double> sums;
  std::map<int, int> counts;
  auto add = [&](int key, double value) {
    sums[key] += value;
    counts[key] += 1;
  };

  if (const auto* jp = std::get_if<JointPairDistance>(&spec.kind)) {
    for (const auto& frame : window) {
      const auto* sk = as_skeleton(frame);
      if (!sk) continue;
      for (std::size_t p = 0; p < jp->pairs.size(); ++p) {
        const SkeletonJoint* a = find_joint(*sk, jp->pairs[p].first);
        const SkeletonJoint* b = find_joint(*sk, jp->pairs[p].second);
        if (a && b) add(static_cast<int>(p), distance(a->p, b->p));
      }
    }
  } else if (std::holds_alternative<StaticScan>(spec.kind)) {
    for (const auto& frame : window) {
      const auto* scan = as_scan(frame);
      if (!scan) continue;
      for (std::size_t b = 0; b < scan->ranges.size(); ++b) {
        if (valid_range(scan->ranges[b], max_range_m)) {
          add(static_cast<int>(b), scan->ranges[b]);
        }
      }
    }
  } else if (const auto* gc = std::get_if<GenericConstant>(&spec.kind)) {
    for (const auto& frame : window) {
      const auto* gen = as_generic(frame);
      if (!gen) continue;
      if (auto v = channel_value(*gen, gc->channel)) add(0, *v);
    }
  }

  std::map<int, double> refs;
  for (const auto& [key, sum] : sums) {
    if (counts[key] >= 2) refs[key] = sum / counts[key];
  }
  if (refs.empty()) {
    throw DataError(spec.id + ": insufficient samples to estimate a reference");
  }
  return refs;
}

VelocitySeries compute_velocity(std::span<const MeasurementFrame> frames,
                                int joint_id) {
  std::vector<double> t;
  std::vector<Vec3> p;
  for (const auto& frame : frames) {
    const auto* sk = as_skeleton(frame);
    if (!sk) continue;
    const SkeletonJoint* joint = find_joint(*sk, joint_id);
    if (!joint) continue;
    t.push_back(frame.t);
    p.push_back(joint->p);
  }
  if (t.size() < 2) {
    throw DataError("velocity needs at least 2 frames with joint " +
                    std::to_string(joint_id));
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw DataError("degenerate timestamps in velocity computation");
    }
  }

  VelocitySeries out;
  out.t = t;
  out.v.resize(t.size());
  const std::size_t n = t.size();
  out.v[0] = distance(p[1], p[0]) / (t[1] - t[0]);
  out.v[n - 1] = distance(p[n - 1], p[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out.v[i] = distance(p[i + 1], p[i - 1]) / (t[i + 1] - t[i - 1]);
  }
  return out;
}

namespace {

// Shared target-resolution logic for conservation evaluation: per-target
// reference = explicit spec value, else per-frame truth (scans), else the
// window mean when the policy allows it.
struct ResolvedRefs {
  std::map<int, double> by_target;  // constant per target
  bool self_referenced = false;
};

ResolvedRefs resolve_references(std::span<const MeasurementFrame> window,
                                const ConservationSpec& spec,
                                const WindowOptions& options,
                                std::size_t n_targets,
                                const std::vector<std::optional<double>>& given) {
  ResolvedRefs out;
  bool need_estimate = false;
  for (std::size_t i = 0; i < n_targets; ++i) {
    if (i < given.size() && given[i]) {
      out.by_target[static_cast<int>(i)] = *given[i];
    } else {
      need_estimate = true;
    }
  }
  if (!need_estimate) return out;

  if (spec.reference_policy == ReferencePolicy::GroundTruth) {
    throw ConfigError(spec.id +
                      ": ground-truth policy but no reference available");
  }
  const auto estimated = estimate_reference(window, spec, options.max_range_m);
  for (const auto& [key, value] : estimated) {
    if (!out.by_target.count(key)) {
      out.by_target[key] = value;
      out.self_referenced = true;
    }
  }
  return out;
}

}  // namespace

DeviationSeries evaluate_window(std::span<const MeasurementFrame> window,
                                const ConservationSpec& spec,
                                std::int64_t window_id,
                                const WindowOptions& options) {
  spec.validate();
  DeviationSeries out;
  out.spec_id = spec.id;
  out.window_id = window_id;

  if (const auto* jp = std::get_if<JointPairDistance>(&spec.kind)) {
    const auto refs = resolve_references(window, spec, options,
                                         jp->pairs.size(), jp->reference);
    out.self_referenced = refs.self_referenced;
    auto& pair_cov = out.covariates["pair"];
    for (const auto& frame : window) {
      const auto* sk = as_skeleton(frame);
      if (!sk) continue;
      for (std::size_t p = 0; p < jp->pairs.size(); ++p) {
        const auto ref = refs.by_target.find(static_cast<int>(p));
        if (ref == refs.by_target.end()) continue;
        if (auto dev = evaluate_joint_pair(*sk, jp->pairs[p], ref->second)) {
          out.values.push_back(*dev);
          out.timestamps.push_back(frame.t);
          pair_cov.push_back(static_cast<double>(p));
        }
      }
    }
  } else if (const auto* scan_spec = std::get_if<StaticScan>(&spec.kind)) {
    std::optional<ResolvedRefs> refs;
    if (!options.per_frame_scan_refs) {
      // Resolve constant per-beam references once; the beam count comes from
      // the first scan frame of the window.
      std::size_t beams = 0;
      for (const auto& frame : window) {
        if (const auto* s = as_scan(frame)) {
          beams = s->ranges.size();
          break;
        }
      }
      refs = resolve_references(window, spec, options, beams,
                                scan_spec->reference);
    }
    auto& beam_cov = out.covariates["beam"];
    std::size_t frame_idx = 0;
    for (const auto& frame : window) {
      const auto* scan = as_scan(frame);
      if (!scan) {
        ++frame_idx;
        continue;
      }
      std::vector<double> row;
      if (options.per_frame_scan_refs) {
        if (frame_idx >= options.per_frame_scan_refs->size()) {
          throw DataError(spec.id + ": truth rows do not cover the window");
        }
        row = (*options.per_frame_scan_refs)[frame_idx];
        out.self_referenced = false;
      } else {
        row.assign(scan->ranges.size(), kNaN);
        for (const auto& [beam, value] : refs->by_target) {
          if (beam >= 0 && static_cast<std::size_t>(beam) < row.size()) {
            row[static_cast<std::size_t>(beam)] = value;
          }
        }
        out.self_referenced = refs->self_referenced;
      }
      const auto devs = evaluate_static_scan(*scan, row, options.max_range_m);
      for (std::size_t i = 0; i < devs.values.size(); ++i) {
        out.values.push_back(devs.values[i]);
        out.timestamps.push_back(frame.t);
        beam_cov.push_back(static_cast<double>(devs.beams[i]));
      }
      ++frame_idx;
    }
  } else if (const auto* gc = std::get_if<GenericConstant>(&spec.kind)) {
    std::vector<std::optional<double>> given = {gc->reference};
    const auto refs = resolve_references(window, spec, options, 1, given);
    out.self_referenced = refs.self_referenced;
    const double ref = refs.by_target.at(0);
    for (const auto& frame : window) {
      const auto* gen = as_generic(frame);
      if (!gen) continue;
      if (auto v = channel_value(*gen, gc->channel)) {
        out.values.push_back(*v - ref);
        out.timestamps.push_back(frame.t);
      }
    }
  }

  return out;
}

DeviationSeries baseline_spread(std::span<const MeasurementFrame> window,
                                const ConservationSpec& spec,
                                std::int64_t window_id,
                                const WindowOptions& options) {
  // Strip references and force self-centering; conservation knowledge is
  // exactly what this mode must not use.
  ConservationSpec bare = spec;
  bare.reference_policy = ReferencePolicy::WindowMean;
  std::visit(
      [](auto& kind) {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, JointPairDistance> ||
                      std::is_same_v<T, StaticScan>) {
          kind.reference.clear();
        } else {
          kind.reference.reset();
        }
      },
      bare.kind);
  WindowOptions base_options = options;
  base_options.per_frame_scan_refs = nullptr;
  DeviationSeries out = evaluate_window(window, bare, window_id, base_options);
  if (out.values.size() < 2) {
    throw DataError(spec.id + ": insufficient samples for baseline spread");
  }
  return out;
}

}  // namespace cuq
