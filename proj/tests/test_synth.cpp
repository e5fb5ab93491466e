#include "doctest.h"

#include <cmath>
#include <vector>

#include "cuq/conservation.hpp"
#include "cuq/errors.hpp"
#include "cuq/stats.hpp"
#include "cuq/synth.hpp"

using namespace cuq;
using namespace cuq::synth;

namespace {

StaticScanScenario small_scan(double sigma, int frames) {
  StaticScanScenario scan;
  scan.span_deg = 19.25;  // 51 beams, keeps tests fast
  scan.step_deg = 0.385;
  scan.range_profile = {4.0};
  scan.noise_sigma = sigma;
  scan.n_frames = frames;
  return scan;
}

SkeletonWalkScenario small_walk(int frames) {
  SkeletonWalkScenario walk;
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.n_frames = frames;
  return walk;
}

}  // namespace

TEST_CASE("noiseless scan satisfies conservation exactly") {
  ScenarioSpec spec;
  spec.kind = small_scan(0.0, 20);
  spec.seed = 1;
  const auto result = generate(spec);
  REQUIRE(result.frames.size() == 20);
  REQUIRE(result.truth.scan_refs.size() == 20);

  ConservationSpec cons;
  cons.id = "scan";
  StaticScan kind;
  for (double r : result.truth.scan_refs[0]) kind.reference.emplace_back(r);
  cons.kind = kind;
  cons.reference_policy = ReferencePolicy::GroundTruth;
  const auto series = evaluate_window(result.frames, cons, 0);
  for (double v : series.values) CHECK(v == 0.0);
}

TEST_CASE("default scan geometry yields 715 beams") {
  StaticScanScenario scan;
  CHECK(scan.beams() == 715);
}

TEST_CASE("generated noise matches the requested sigma") {
  ScenarioSpec spec;
  spec.kind = small_scan(0.002, 100);
  spec.seed = 5;
  const auto result = generate(spec);

  // re-derive noise = frame - truth, per beam and pooled
  const auto& first = std::get<ScanFrame>(result.frames[0].payload);
  const std::size_t beams = first.ranges.size();
  std::size_t within = 0;
  std::vector<double> pooled;
  for (std::size_t b = 0; b < beams; ++b) {
    std::vector<double> noise;
    for (std::size_t f = 0; f < result.frames.size(); ++f) {
      const auto& scan = std::get<ScanFrame>(result.frames[f].payload);
      noise.push_back(scan.ranges[b] - result.truth.scan_refs[f][b]);
    }
    const double sd = sample_std(noise);
    if (std::abs(sd - 0.002) / 0.002 < 0.15) ++within;
    pooled.insert(pooled.end(), noise.begin(), noise.end());
  }
  // with n = 100 the sample std concentrates to ~7%; 15% is ~2 sigma, so a
  // small tail of beams may sit outside it
  CHECK(within >= beams * 9 / 10);
  CHECK(sample_std(pooled) == doctest::Approx(0.002).epsilon(0.03));
}

TEST_CASE("generation is deterministic per seed") {
  ScenarioSpec spec;
  spec.kind = small_scan(0.002, 10);
  spec.seed = 9;
  const auto a = generate(spec);
  const auto b = generate(spec);
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    const auto& ra = std::get<ScanFrame>(a.frames[f].payload).ranges;
    const auto& rb = std::get<ScanFrame>(b.frames[f].payload).ranges;
    CHECK(ra == rb);
  }
  spec.seed = 10;
  const auto c = generate(spec);
  CHECK(std::get<ScanFrame>(a.frames[0].payload).ranges !=
        std::get<ScanFrame>(c.frames[0].payload).ranges);
}

TEST_CASE("drifting scan truth tracks the drift") {
  auto scan = small_scan(0.0, 5);
  scan.drift_per_frame = 0.001;
  ScenarioSpec spec;
  spec.kind = scan;
  spec.seed = 2;
  const auto result = generate(spec);
  CHECK(result.truth.scan_refs[0][0] == doctest::Approx(4.0));
  CHECK(result.truth.scan_refs[4][0] == doctest::Approx(4.004));
}

TEST_CASE("skeleton walk conserves bone lengths exactly in truth") {
  auto walk = small_walk(50);
  walk.pairs = {{2, 3}, {3, 4}};
  walk.bone_lengths = {0.3, 0.25};
  walk.noise = ConstantNoise{0.002};
  ScenarioSpec spec;
  spec.kind = walk;
  spec.seed = 3;
  const auto result = generate(spec);
  REQUIRE(result.truth.joint_positions.size() == 50);
  for (const auto& joints : result.truth.joint_positions) {
    CHECK(distance(joints.at(2), joints.at(3)) ==
          doctest::Approx(0.3).epsilon(1e-12));
    CHECK(distance(joints.at(3), joints.at(4)) ==
          doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("velocity-coupled noise correlates with speed in the sidecar") {
  auto walk = small_walk(200);
  walk.waypoints = {{0, 0, 1}, {0.5, 0, 1}, {2.0, 0, 1}, {2.5, 0, 1}, {4.0, 0, 1},
                    {4.5, 0, 1}, {6.0, 0, 1}};
  walk.segment_speeds = {0.5, 1.5};
  walk.noise = VelocityCoupledNoise{0.00128, 0.00144};
  ScenarioSpec spec;
  spec.kind = walk;
  spec.seed = 4;
  const auto result = generate(spec);

  // noise magnitude re-derived from frame minus truth, joint 2
  std::vector<double> magnitude, speed;
  for (std::size_t f = 0; f < result.frames.size(); ++f) {
    const auto& sk = std::get<SkeletonFrame>(result.frames[f].payload);
    const Vec3 observed = sk.joints.at(2).p;
    const Vec3 truth = result.truth.joint_positions[f].at(2);
    magnitude.push_back(distance(observed, truth));
    speed.push_back(result.truth.true_speed[f]);
  }
  CHECK(pearson(magnitude, speed) > 0.0);

  // sigma recorded per frame follows sigma0 + gain * speed
  for (std::size_t f = 0; f < result.frames.size(); ++f) {
    CHECK(result.truth.noise_sigma[f] ==
          doctest::Approx(0.00128 + 0.00144 * result.truth.true_speed[f]));
  }
}

TEST_CASE("scenario validation") {
  ScenarioSpec spec;
  auto scan = small_scan(-0.1, 10);
  spec.kind = scan;
  CHECK_THROWS_AS(generate(spec), ConfigError);

  auto walk = small_walk(10);
  walk.bone_lengths = {0.3, 0.4};  // mismatched with one pair
  spec.kind = walk;
  CHECK_THROWS_AS(generate(spec), ConfigError);

  auto cyclic = small_walk(10);
  cyclic.pairs = {{2, 3}, {3, 4}, {2, 4}};
  cyclic.bone_lengths = {0.3, 0.3, 0.1};  // triangle inequality broken
  spec.kind = cyclic;
  CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("uncertainty oracle: zero noise, homogeneity, unsupported specs") {
  EstimatorDefinition est;
  est.window_size = 10;
  est.B = 200;
  est.confidence = 0.95;
  est.policy = ReferencePolicy::GroundTruth;

  ScenarioSpec zero;
  zero.kind = small_scan(0.0, 10);
  CHECK(oracle_expected_uncertainty(zero, est, 5, 1) == 0.0);

  ScenarioSpec one;
  one.kind = small_scan(0.001, 10);
  ScenarioSpec three;
  three.kind = small_scan(0.003, 10);
  const double u1 = oracle_expected_uncertainty(one, est, 20, 7);
  const double u3 = oracle_expected_uncertainty(three, est, 20, 7);
  CHECK(u3 == doctest::Approx(3.0 * u1).epsilon(1e-12));

  ScenarioSpec drifting;
  auto drift_scan = small_scan(0.001, 10);
  drift_scan.drift_per_frame = 0.001;
  drifting.kind = drift_scan;
  CHECK_THROWS_AS(oracle_expected_uncertainty(drifting, est, 5, 1), ConfigError);

  ScenarioSpec coupled;
  auto walk = small_walk(10);
  walk.noise = VelocityCoupledNoise{0.001, 0.001};
  coupled.kind = walk;
  CHECK_THROWS_AS(oracle_expected_uncertainty(coupled, est, 5, 1), ConfigError);
}

TEST_CASE("uncertainty oracle tracks the analytic scale") {
  // For ground-truth referencing the deviations are N(0, sigma); the
  // resampled mean-absolute-deviation concentrates near sigma*sqrt(2/pi).
  EstimatorDefinition est;
  est.window_size = 10;
  est.B = 400;
  est.policy = ReferencePolicy::GroundTruth;

  ScenarioSpec spec;
  spec.kind = small_scan(0.002, 10);
  const double u = oracle_expected_uncertainty(spec, est, 50, 11);
  const double base = 0.002 * std::sqrt(2.0 / 3.141592653589793);
  CHECK(u > base);            // upper quantile sits above the mean
  CHECK(u < base * 1.15);     // but not far, given n = 510 per window
}

TEST_CASE("MC propagation oracle") {
  std::vector<SensitivityTerm> single(1);
  single[0].sensitivity = 1.0;
  single[0].u = 0.05;
  CHECK(oracle_mc_propagation(single, 100000, 3) ==
        doctest::Approx(0.05).epsilon(0.02));

  std::vector<SensitivityTerm> pair(2);
  pair[0].sensitivity = 1.0;
  pair[0].u = 0.04;
  pair[1].sensitivity = 1.0;
  pair[1].u = 0.05;
  const double mc = oracle_mc_propagation(pair, 100000, 4);
  CHECK(mc == doctest::Approx(std::sqrt(0.0016 + 0.0025)).epsilon(0.02));

  std::vector<SensitivityTerm> zeros(3);
  for (auto& t : zeros) {
    t.sensitivity = 1.0;
    t.u = 0.0;
  }
  CHECK(oracle_mc_propagation(zeros, 1000, 5) == 0.0);

  // convergence: doubling the sample count moves the estimate by < 2%
  const double a = oracle_mc_propagation(pair, 100000, 6);
  const double b = oracle_mc_propagation(pair, 200000, 6);
  CHECK(std::abs(a - b) / b < 0.02);
}

TEST_CASE("uniform noise shape keeps the requested standard deviation") {
  auto scan = small_scan(0.002, 200);
  scan.noise_shape = NoiseShape::Uniform;
  ScenarioSpec spec;
  spec.kind = scan;
  spec.seed = 8;
  const auto result = generate(spec);
  std::vector<double> noise;
  for (std::size_t f = 0; f < result.frames.size(); ++f) {
    const auto& frame = std::get<ScanFrame>(result.frames[f].payload);
    for (std::size_t b = 0; b < frame.ranges.size(); ++b) {
      noise.push_back(frame.ranges[b] - result.truth.scan_refs[f][b]);
    }
  }
  CHECK(sample_std(noise) == doctest::Approx(0.002).epsilon(0.05));
  // bounded support, unlike the Gaussian
  for (double x : noise) CHECK(std::abs(x) <= 0.002 * std::sqrt(3.0) + 1e-12);
}
