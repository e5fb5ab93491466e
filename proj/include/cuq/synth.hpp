#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "cuq/conservation.hpp"
#include "cuq/frames.hpp"
#include "cuq/propagation.hpp"

namespace cuq::synth {

enum class NoiseShape { Gaussian, Uniform };

/// Static environment scanned repeatedly. drift_per_frame != 0 turns this
/// into the drifting variant: the true ranges move linearly frame by frame
/// (slow environmental motion), and the truth sidecar tracks them.
struct StaticScanScenario {
  double span_deg = 275.0;
  double step_deg = 0.385;
  std::vector<double> range_profile = {4.0};  // size 1 = flat; else per beam
  double noise_sigma = 0.0;                   // meters
  int n_frames = 0;
  double frame_rate_hz = 12.5;
  double drift_per_frame = 0.0;  // meters/frame added to every true range
  NoiseShape noise_shape = NoiseShape::Gaussian;

  int beams() const { return beam_count(span_deg, step_deg); }
};

struct ConstantNoise {
  double sigma = 0.0;  // meters, per joint coordinate
};

/// Noise scale grows with the body speed: sigma(t) = sigma0 + gain * speed(t).
struct VelocityCoupledNoise {
  double sigma0 = 0.0;
  double gain = 0.0;  // meters per (m/s)
};

/// A rigid skeleton translated along a scripted piecewise-linear waypoint
/// path. Bone constraints are enforced exactly before noise injection, so
/// every configured pair distance is conserved in truth. The path loops
/// when the frame budget outruns it.
struct SkeletonWalkScenario {
  std::vector<std::pair<int, int>> pairs = {{2, 3}};
  std::vector<double> bone_lengths = {0.3};         // meters, aligned with pairs
  std::vector<Vec3> waypoints = {{0, 0, 1}, {6, 0, 1}};
  std::vector<double> segment_speeds = {1.0};       // m/s, one per segment
  std::variant<ConstantNoise, VelocityCoupledNoise> noise = ConstantNoise{};
  int n_frames = 0;
  double frame_rate_hz = 30.0;
  NoiseShape noise_shape = NoiseShape::Gaussian;
};

struct ScenarioSpec {
  std::variant<StaticScanScenario, SkeletonWalkScenario> kind;
  std::uint64_t seed = 0;
};

/// Exact per-frame truth emitted alongside generated frames; noise is
/// re-derivable as frame minus truth.
struct GroundTruth {
  std::vector<double> t;
  // scans
  std::vector<std::vector<double>> scan_refs;  // per frame, per beam
  // skeletons
  std::vector<std::map<int, Vec3>> joint_positions;  // per frame
  std::vector<double> true_speed;                    // m/s per frame
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> bone_lengths;
  // both
  std::vector<double> noise_sigma;  // per frame
};

struct SynthResult {
  std::vector<MeasurementFrame> frames;
  GroundTruth truth;
};

/// Deterministic per seed. Throws ConfigError for inconsistent scenarios
/// (mismatched pair/length lists, unrealizable bone geometry, sigma < 0).
SynthResult generate(const ScenarioSpec& spec);

/// The uncertainty estimator whose expectation the oracle reproduces:
/// bootstrap the window's pooled absolute deviations B times and take the
/// upper `confidence`-quantile of the resample means (nearest rank).
struct EstimatorDefinition {
  std::size_t window_size = 10;
  std::size_t B = 10000;
  double confidence = 0.95;
  ReferencePolicy policy = ReferencePolicy::GroundTruth;
};

/// Brute-force expectation of the estimator over freshly simulated windows.
/// Implemented without touching the stats engine: its own sampling, its own
/// bootstrap loop, its own quantile arithmetic. Supports StaticScan without
/// drift and SkeletonWalk with constant noise; anything else throws
/// ConfigError (unsupported spec).
double oracle_expected_uncertainty(const ScenarioSpec& spec,
                                   const EstimatorDefinition& estimator,
                                   std::size_t n_windows, std::uint64_t seed);

/// Monte Carlo propagation of independent zero-mean perturbations through a
/// linearized attribute: empirical std of sum_j s_j * eps_j with
/// eps_j ~ N(0, u_j^2). Validates the gum-squared combination mode.
double oracle_mc_propagation(std::span<const SensitivityTerm> terms,
                             std::size_t n_samples, std::uint64_t seed);

}  // namespace cuq::synth
