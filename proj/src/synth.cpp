#include "cuq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cuq/errors.hpp"
#include "cuq/rng.hpp"

namespace cuq::synth {

namespace {

constexpr double kRoot3 = 1.7320508075688772;

double noise_draw(rng::Engine& eng, double sigma, NoiseShape shape) {
  if (sigma == 0.0) return 0.0;
  if (shape == NoiseShape::Gaussian) return sigma * eng.gaussian();
  // Uniform with matching standard deviation: half-width sqrt(3) * sigma.
  return sigma * kRoot3 * (2.0 * eng.uniform01() - 1.0);
}

// Piecewise-linear waypoint path, looped when t outruns it.
class WaypointPath {
 public:
  WaypointPath(const std::vector<Vec3>& waypoints,
               const std::vector<double>& speeds) {
    if (waypoints.size() < 2) throw ConfigError("path needs >= 2 waypoints");
    if (speeds.empty()) throw ConfigError("path needs >= 1 segment speed");
    for (double s : speeds) {
      if (!(s > 0.0)) throw ConfigError("segment speeds must be > 0");
    }
    double t = 0.0;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
      Segment seg;
      seg.from = waypoints[i];
      seg.to = waypoints[i + 1];
      seg.speed = speeds[i % speeds.size()];
      seg.t0 = t;
      const double len = distance(seg.from, seg.to);
      if (!(len > 0.0)) throw ConfigError("degenerate path segment");
      seg.duration = len / seg.speed;
      t += seg.duration;
      segments_.push_back(seg);
    }
    total_ = t;
  }

  Vec3 position(double t) const {
    const Segment& seg = at(t);
    const double local = std::fmod(t, total_) - seg.t0;
    const double frac = std::clamp(local / seg.duration, 0.0, 1.0);
    return {seg.from[0] + frac * (seg.to[0] - seg.from[0]),
            seg.from[1] + frac * (seg.to[1] - seg.from[1]),
            seg.from[2] + frac * (seg.to[2] - seg.from[2])};
  }

  double speed(double t) const { return at(t).speed; }

 private:
  struct Segment {
    Vec3 from, to;
    double speed = 0.0;
    double t0 = 0.0;
    double duration = 0.0;
  };

  const Segment& at(double t) const {
    double local = std::fmod(t, total_);
    for (const auto& seg : segments_) {
      if (local < seg.t0 + seg.duration) return seg;
    }
    return segments_.back();
  }

  std::vector<Segment> segments_;
  double total_ = 0.0;
};

// Rigid joint offsets realizing the requested pair distances. New joints are
// placed along cycling unit axes; inconsistent cycles are rejected.
std::map<int, Vec3> build_offsets(const std::vector<std::pair<int, int>>& pairs,
                                  const std::vector<double>& lengths) {
  if (pairs.empty()) throw ConfigError("skeleton scenario needs >= 1 pair");
  if (pairs.size() != lengths.size()) {
    throw ConfigError("bone_lengths must align with pairs");
  }
  static constexpr Vec3 kAxes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::map<int, Vec3> offsets;
  double anchor_x = 0.0;
  std::size_t edge = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [j, k] = pairs[i];
    const double len = lengths[i];
    if (!(len > 0.0)) throw ConfigError("bone lengths must be > 0");
    const bool have_j = offsets.count(j) > 0;
    const bool have_k = offsets.count(k) > 0;
    if (have_j && have_k) {
      if (std::abs(distance(offsets[j], offsets[k]) - len) > 1e-9) {
        throw ConfigError("pair lengths form an unrealizable cycle");
      }
      continue;
    }
    if (!have_j && !have_k) {
      offsets[j] = {anchor_x, 0.0, 0.0};
      anchor_x += 1.0;
    }
    const int base = have_k ? k : j;
    const int grow = have_k ? j : k;
    const Vec3& axis = kAxes[edge++ % 3];
    offsets[grow] = {offsets[base][0] + len * axis[0],
                     offsets[base][1] + len * axis[1],
                     offsets[base][2] + len * axis[2]};
  }
  return offsets;
}

SynthResult generate_scan(const StaticScanScenario& scan, std::uint64_t seed) {
  if (scan.n_frames < 1) throw ConfigError("scenario needs n_frames >= 1");
  if (!(scan.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  if (!(scan.frame_rate_hz > 0.0)) throw ConfigError("frame rate must be > 0");
  const int beams = scan.beams();
  std::vector<double> profile;
  if (scan.range_profile.size() == 1) {
    profile.assign(static_cast<std::size_t>(beams), scan.range_profile[0]);
  } else if (scan.range_profile.size() == static_cast<std::size_t>(beams)) {
    profile = scan.range_profile;
  } else {
    throw ConfigError("range profile must have 1 entry or one per beam");
  }
  for (double r : profile) {
    if (!(r > 0.0)) throw ConfigError("range profile entries must be > 0");
  }

  SynthResult out;
  out.truth.noise_sigma.assign(static_cast<std::size_t>(scan.n_frames),
                               scan.noise_sigma);
  rng::Engine eng = rng::Engine::for_stream(seed, 0);
  const double dt = 1.0 / scan.frame_rate_hz;
  for (int f = 0; f < scan.n_frames; ++f) {
    MeasurementFrame frame;
    frame.t = f * dt;
    ScanFrame payload;
    payload.angle_start_deg = 0.0;
    payload.angle_step_deg = scan.step_deg;
    payload.ranges.resize(profile.size());
    std::vector<double> truth_row(profile.size());
    for (std::size_t b = 0; b < profile.size(); ++b) {
      truth_row[b] = profile[b] + scan.drift_per_frame * f;
      payload.ranges[b] =
          truth_row[b] + noise_draw(eng, scan.noise_sigma, scan.noise_shape);
    }
    frame.payload = std::move(payload);
    out.truth.t.push_back(frame.t);
    out.truth.scan_refs.push_back(std::move(truth_row));
    out.frames.push_back(std::move(frame));
  }
  return out;
}

SynthResult generate_walk(const SkeletonWalkScenario& walk, std::uint64_t seed) {
  if (walk.n_frames < 1) throw ConfigError("scenario needs n_frames >= 1");
  if (!(walk.frame_rate_hz > 0.0)) throw ConfigError("frame rate must be > 0");
  const auto offsets = build_offsets(walk.pairs, walk.bone_lengths);
  const WaypointPath path(walk.waypoints, walk.segment_speeds);

  if (const auto* constant = std::get_if<ConstantNoise>(&walk.noise)) {
    if (!(constant->sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  } else {
    const auto& vc = std::get<VelocityCoupledNoise>(walk.noise);
    if (!(vc.sigma0 >= 0.0) || !(vc.gain >= 0.0)) {
      throw ConfigError("velocity-coupled noise needs sigma0, gain >= 0");
    }
  }

  SynthResult out;
  out.truth.pairs = walk.pairs;
  out.truth.bone_lengths = walk.bone_lengths;
  rng::Engine eng = rng::Engine::for_stream(seed, 0);
  const double dt = 1.0 / walk.frame_rate_hz;
  for (int f = 0; f < walk.n_frames; ++f) {
    const double t = f * dt;
    const Vec3 root = path.position(t);
    const double speed = path.speed(t);
    const double sigma =
        std::holds_alternative<ConstantNoise>(walk.noise)
            ? std::get<ConstantNoise>(walk.noise).sigma
            : std::get<VelocityCoupledNoise>(walk.noise).sigma0 +
                  std::get<VelocityCoupledNoise>(walk.noise).gain * speed;

    MeasurementFrame frame;
    frame.t = t;
    SkeletonFrame payload;
    std::map<int, Vec3> truth_joints;
    for (const auto& [joint, offset] : offsets) {
      const Vec3 truth = {root[0] + offset[0], root[1] + offset[1],
                          root[2] + offset[2]};
      truth_joints[joint] = truth;
      SkeletonJoint observed;
      observed.p = {truth[0] + noise_draw(eng, sigma, walk.noise_shape),
                    truth[1] + noise_draw(eng, sigma, walk.noise_shape),
                    truth[2] + noise_draw(eng, sigma, walk.noise_shape)};
      payload.joints[joint] = observed;
    }
    frame.payload = std::move(payload);
    out.truth.t.push_back(t);
    out.truth.joint_positions.push_back(std::move(truth_joints));
    out.truth.true_speed.push_back(speed);
    out.truth.noise_sigma.push_back(sigma);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracles. Deliberately self-contained: own sampling, own bootstrap loop,
// own quantile arithmetic, no stats-engine calls.
// ---------------------------------------------------------------------------

double oracle_quantile_of_resampled_mad(const std::vector<double>& deviations,
                                        std::size_t B, double confidence,
                                        std::uint64_t seed) {
  const std::size_t n = deviations.size();
  std::vector<double> abs_devs(n);
  for (std::size_t i = 0; i < n; ++i) abs_devs[i] = std::abs(deviations[i]);
  std::vector<double> means(B);
  for (std::size_t z = 0; z < B; ++z) {
    rng::Engine eng = rng::Engine::for_stream(seed, z + 1);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += abs_devs[eng.below(n)];
    means[z] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double target = confidence * static_cast<double>(B);
  auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, B);
  return means[rank - 1];
}

}  // namespace

SynthResult generate(const ScenarioSpec& spec) {
  if (const auto* scan = std::get_if<StaticScanScenario>(&spec.kind)) {
    return generate_scan(*scan, spec.seed);
  }
  return generate_walk(std::get<SkeletonWalkScenario>(spec.kind), spec.seed);
}

double oracle_expected_uncertainty(const ScenarioSpec& spec,
                                   const EstimatorDefinition& estimator,
                                   std::size_t n_windows, std::uint64_t seed) {
  if (n_windows == 0 || estimator.B == 0 || estimator.window_size < 2) {
    throw ConfigError("oracle needs windows >= 1, B >= 1, window size >= 2");
  }
  if (!(estimator.confidence > 0.0 && estimator.confidence < 1.0)) {
    throw ConfigError("oracle confidence must lie in (0,1)");
  }

  const auto* scan = std::get_if<StaticScanScenario>(&spec.kind);
  const auto* walk = std::get_if<SkeletonWalkScenario>(&spec.kind);
  if (scan && scan->drift_per_frame != 0.0) {
    throw ConfigError("oracle does not support drifting scans");
  }
  if (walk && !std::holds_alternative<ConstantNoise>(walk->noise)) {
    throw ConfigError("oracle supports constant skeleton noise only");
  }

  const std::size_t w = estimator.window_size;
  double total = 0.0;
  for (std::size_t window = 0; window < n_windows; ++window) {
    const std::uint64_t wseed = rng::stream_seed(seed, window);
    rng::Engine eng = rng::Engine::for_stream(wseed, 0);
    std::vector<double> deviations;

    if (scan) {
      const std::size_t beams = static_cast<std::size_t>(scan->beams());
      const double sigma = scan->noise_sigma;
      deviations.reserve(beams * w);
      if (estimator.policy == ReferencePolicy::GroundTruth) {
        for (std::size_t i = 0; i < beams * w; ++i) {
          deviations.push_back(noise_draw(eng, sigma, scan->noise_shape));
        }
      } else {
        // Window-mean referencing: raw per-beam samples centered at the
        // per-beam window mean. The profile offset cancels; simulate noise
        // and center it.
        std::vector<double> samples(w);
        for (std::size_t b = 0; b < beams; ++b) {
          double sum = 0.0;
          for (std::size_t f = 0; f < w; ++f) {
            samples[f] = noise_draw(eng, sigma, scan->noise_shape);
            sum += samples[f];
          }
          const double m = sum / static_cast<double>(w);
          for (std::size_t f = 0; f < w; ++f) {
            deviations.push_back(samples[f] - m);
          }
        }
      }
    } else {
      const double sigma = std::get<ConstantNoise>(walk->noise).sigma;
      deviations.reserve(walk->pairs.size() * w);
      std::vector<double> dist_samples(w);
      for (std::size_t p = 0; p < walk->pairs.size(); ++p) {
        const double len = walk->bone_lengths[p];
        for (std::size_t f = 0; f < w; ++f) {
          const double ex = len + noise_draw(eng, sigma, walk->noise_shape) -
                            noise_draw(eng, sigma, walk->noise_shape);
          const double ey = noise_draw(eng, sigma, walk->noise_shape) -
                            noise_draw(eng, sigma, walk->noise_shape);
          const double ez = noise_draw(eng, sigma, walk->noise_shape) -
                            noise_draw(eng, sigma, walk->noise_shape);
          dist_samples[f] = std::sqrt(ex * ex + ey * ey + ez * ez);
        }
        if (estimator.policy == ReferencePolicy::GroundTruth) {
          for (double d : dist_samples) deviations.push_back(d - len);
        } else {
          double sum = 0.0;
          for (double d : dist_samples) sum += d;
          const double m = sum / static_cast<double>(w);
          for (double d : dist_samples) deviations.push_back(d - m);
        }
      }
    }

    total += oracle_quantile_of_resampled_mad(deviations, estimator.B,
                                              estimator.confidence, wseed);
  }
  return total / static_cast<double>(n_windows);
}

double oracle_mc_propagation(std::span<const SensitivityTerm> terms,
                             std::size_t n_samples, std::uint64_t seed) {
  if (terms.empty()) throw ConfigError("oracle needs at least one term");
  if (n_samples < 2) throw ConfigError("oracle needs n_samples >= 2");
  rng::Engine eng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double a = 0.0;
    for (const auto& term : terms) {
      a += term.sensitivity * term.u * eng.gaussian();
    }
    sum += a;
    sum_sq += a * a;
  }
  const double n = static_cast<double>(n_samples);
  const double var = (sum_sq - sum * sum / n) / (n - 1.0);
  return std::sqrt(std::max(var, 0.0));
}

}  // namespace cuq::synth
