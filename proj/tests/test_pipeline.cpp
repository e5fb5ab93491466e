#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "cuq/errors.hpp"
#include "cuq/pipeline.hpp"
#include "cuq/rng.hpp"
#include "cuq/synth.hpp"

using namespace cuq;

namespace {

FrameSource vector_source(const std::vector<MeasurementFrame>& frames) {
  auto next = std::make_shared<std::size_t>(0);
  return [&frames, next]() -> std::optional<MeasurementFrame> {
    if (*next >= frames.size()) return std::nullopt;
    return frames[(*next)++];
  };
}

PipelineConfig skeleton_config() {
  PipelineConfig config;
  ConservationSpec spec;
  spec.id = "bones";
  spec.kind = JointPairDistance{{{2, 3}}, {{0.3}}};
  spec.reference_policy = ReferencePolicy::GroundTruth;
  config.specs.push_back(spec);
  config.reference_policy = ReferencePolicy::GroundTruth;
  config.window_size = 10;
  config.bootstrap.resamples = 400;
  config.bootstrap.seed = 21;
  RiskModel risk;
  risk.l_bio = 1.0;
  config.risk = risk;
  config.operating_range_m = 4.0;
  return config;
}

std::vector<MeasurementFrame> noiseless_walk(int frames) {
  synth::ScenarioSpec spec;
  auto walk = synth::SkeletonWalkScenario{};
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.noise = synth::ConstantNoise{0.0};
  walk.n_frames = frames;
  spec.kind = walk;
  return synth::generate(spec).frames;
}

std::string render_reports(const PipelineConfig& config,
                           const std::vector<MeasurementFrame>& frames,
                           const PipelineOptions& options = {}) {
  std::ostringstream out;
  run_pipeline(config, vector_source(frames),
               [&out](const WindowReport& r) {
                 out << report_to_json(r).dump() << '\n';
               },
               options);
  return out.str();
}

}  // namespace

TEST_CASE("window splitting: counts and trailing skip") {
  std::vector<MeasurementFrame> frames(25);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i].t = 0.1 * static_cast<double>(i);
    frames[i].payload = GenericFrame{{{"x", 1.0}}};
  }
  std::size_t skipped = 0;
  CHECK(window_stream(frames, 10, &skipped).size() == 2);
  CHECK(skipped == 5);

  frames.resize(10);
  CHECK(window_stream(frames, 10, &skipped).size() == 1);
  CHECK(skipped == 0);

  frames.resize(9);
  CHECK(window_stream(frames, 10, &skipped).empty());
  CHECK(skipped == 9);
}

TEST_CASE("noiseless conforming stream: u = 0 and verdicts pass") {
  const auto frames = noiseless_walk(30);
  const auto config = skeleton_config();

  std::vector<WindowReport> reports;
  const auto stats = run_pipeline(config, vector_source(frames),
                                  [&](const WindowReport& r) {
                                    reports.push_back(r);
                                  });
  CHECK(stats.windows == 3);
  CHECK(stats.frames_in == 30);
  REQUIRE(reports.size() == 3);
  for (const auto& report : reports) {
    REQUIRE(report.pooled.has_value());
    // translated rigid geometry conserves distances to ~1 ulp, not exactly
    CHECK(report.pooled->u <= 1e-12);
    REQUIRE(report.verdict.has_value());
    CHECK(report.verdict->pass);
    CHECK(report.errors.empty());
  }
}

TEST_CASE("end-to-end determinism, including parallel window evaluation") {
  synth::ScenarioSpec spec;
  auto walk = synth::SkeletonWalkScenario{};
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.noise = synth::ConstantNoise{0.002};
  walk.n_frames = 60;
  spec.kind = walk;
  spec.seed = 14;
  const auto frames = synth::generate(spec).frames;

  auto config = skeleton_config();
  const auto first = render_reports(config, frames);
  const auto second = render_reports(config, frames);
  CHECK(first == second);

  config.threads = 4;
  const auto parallel = render_reports(config, frames);
  CHECK(parallel == first);

  auto reseeded = skeleton_config();
  reseeded.bootstrap.seed = 22;
  CHECK(render_reports(reseeded, frames) != first);
}

TEST_CASE("online contract: buffering never exceeds the window") {
  PipelineConfig config;
  ConservationSpec spec;
  spec.id = "ch";
  spec.kind = GenericConstant{"x", {}};
  config.specs.push_back(spec);
  config.window_size = 10;
  config.bootstrap.resamples = 8;

  std::size_t emitted = 0;
  std::size_t produced = 0;
  const std::size_t total = 50000;
  const FrameSource source = [&]() -> std::optional<MeasurementFrame> {
    if (produced >= total) return std::nullopt;
    MeasurementFrame f;
    f.t = 0.01 * static_cast<double>(produced);
    f.payload = GenericFrame{{{"x", 1.0 + std::sin(0.1 * produced)}}};
    ++produced;
    return f;
  };
  const auto stats = run_pipeline(config, source,
                                  [&emitted](const WindowReport&) { ++emitted; });
  CHECK(stats.frames_in == total);
  CHECK(stats.windows == total / 10);
  CHECK(emitted == total / 10);
  CHECK(stats.max_buffered <= config.window_size);
}

TEST_CASE("reports keep flowing when a window has no usable samples") {
  auto frames = noiseless_walk(30);
  // strip joint 3 from the second window so the spec has no samples there
  for (int i = 10; i < 20; ++i) {
    std::get<SkeletonFrame>(frames[i].payload).joints.erase(3);
  }
  const auto config = skeleton_config();
  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].pooled.has_value());
  CHECK(!reports[1].pooled.has_value());
  CHECK(!reports[1].errors.empty());
  CHECK(reports[2].pooled.has_value());
}

TEST_CASE("velocity-coupled stream: dependency detected and reported") {
  synth::ScenarioSpec spec;
  auto walk = synth::SkeletonWalkScenario{};
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.waypoints = {{0, 0, 1}, {0.5, 0, 1}, {2.0, 0, 1}, {2.5, 0, 1},
                    {4.0, 0, 1}, {4.5, 0, 1}, {6.0, 0, 1}, {6.5, 0, 1},
                    {8.0, 0, 1}};
  walk.segment_speeds = {0.5, 1.5};
  // strong coupling so one pooled window suffices
  walk.noise = synth::VelocityCoupledNoise{0.0002, 0.004};
  walk.n_frames = 100;
  spec.kind = walk;
  spec.seed = 77;
  const auto frames = synth::generate(spec).frames;

  auto config = skeleton_config();
  config.window_size = 100;  // one pooled window
  config.bootstrap.resamples = 200;
  config.hypothesis.permutations = 500;
  CovariateConfig cov;
  cov.name = "velocity";
  cov.source = CovariateConfig::Source::JointVelocity;
  cov.joint_id = 2;
  config.hypothesis.covariates.push_back(cov);

  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].hypotheses.size() == 1);
  CHECK(reports[0].hypotheses[0].rejected);
  REQUIRE(reports[0].dependencies.size() == 1);
  CHECK(reports[0].dependencies[0].pearson_r > 0.0);
}

TEST_CASE("constant-noise stream: dependency section absent") {
  synth::ScenarioSpec spec;
  auto walk = synth::SkeletonWalkScenario{};
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.noise = synth::ConstantNoise{0.002};
  walk.n_frames = 100;
  spec.kind = walk;
  spec.seed = 78;
  const auto frames = synth::generate(spec).frames;

  auto config = skeleton_config();
  config.window_size = 100;
  config.bootstrap.resamples = 200;
  config.hypothesis.permutations = 500;
  CovariateConfig cov;
  cov.name = "velocity";
  cov.source = CovariateConfig::Source::JointVelocity;
  cov.joint_id = 2;
  config.hypothesis.covariates.push_back(cov);

  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].hypotheses.size() == 1);
  CHECK(!reports[0].hypotheses[0].rejected);
  CHECK(reports[0].dependencies.empty());
}

TEST_CASE("covariate mismatch is reported, not fatal") {
  // scan stream with a joint-velocity covariate configured
  synth::ScenarioSpec spec;
  auto scan = synth::StaticScanScenario{};
  scan.span_deg = 1.925;  // 6 beams
  scan.noise_sigma = 0.001;
  scan.n_frames = 20;
  spec.kind = scan;
  const auto generated = synth::generate(spec);

  PipelineConfig config;
  ConservationSpec cons;
  cons.id = "scan";
  cons.kind = StaticScan{};
  cons.reference_policy = ReferencePolicy::WindowMean;
  config.specs.push_back(cons);
  config.window_size = 10;
  config.bootstrap.resamples = 50;
  CovariateConfig cov;
  cov.name = "velocity";
  cov.source = CovariateConfig::Source::JointVelocity;
  cov.joint_id = 2;
  config.hypothesis.covariates.push_back(cov);

  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(generated.frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 2);
  for (const auto& report : reports) {
    CHECK(report.pooled.has_value());       // estimation unaffected
    CHECK(report.hypotheses.empty());       // no velocity available
    CHECK(!report.errors.empty());          // and the mismatch is recorded
  }
}

TEST_CASE("window-mean referencing marks estimates self-referenced") {
  synth::ScenarioSpec spec;
  auto walk = synth::SkeletonWalkScenario{};
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.noise = synth::ConstantNoise{0.002};
  walk.n_frames = 20;
  spec.kind = walk;
  const auto frames = synth::generate(spec).frames;

  PipelineConfig config;
  ConservationSpec cons;
  cons.id = "bones";
  cons.kind = JointPairDistance{{{2, 3}}, {}};
  cons.reference_policy = ReferencePolicy::WindowMean;
  config.specs.push_back(cons);
  config.window_size = 10;
  config.bootstrap.resamples = 100;

  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 2);
  for (const auto& report : reports) {
    REQUIRE(report.pooled.has_value());
    CHECK(report.pooled->self_referenced);
    // self-referenced centering forces a (near) zero signed mean
    CHECK(std::abs(report.pooled->signed_mean) < 1e-12);
    CHECK(!report.verdict.has_value());  // no risk model configured
  }
}

TEST_CASE("multiple specs: per-spec estimates plus a pooled aggregate") {
  synth::ScenarioSpec spec;
  auto walk = synth::SkeletonWalkScenario{};
  walk.pairs = {{1, 8}, {2, 3}};
  walk.bone_lengths = {0.52, 0.28};
  walk.noise = synth::ConstantNoise{0.002};
  walk.n_frames = 10;
  spec.kind = walk;
  spec.seed = 91;
  const auto frames = synth::generate(spec).frames;

  PipelineConfig config;
  ConservationSpec torso;
  torso.id = "torso";
  torso.kind = JointPairDistance{{{1, 8}}, {{0.52}}};
  torso.reference_policy = ReferencePolicy::GroundTruth;
  ConservationSpec arm;
  arm.id = "arm";
  arm.kind = JointPairDistance{{{2, 3}}, {{0.28}}};
  arm.reference_policy = ReferencePolicy::GroundTruth;
  config.specs = {torso, arm};
  config.window_size = 10;
  config.bootstrap.resamples = 300;

  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].estimates.size() == 2);
  CHECK(reports[0].estimates[0].spec_id == "torso");
  CHECK(reports[0].estimates[1].spec_id == "arm");
  CHECK(reports[0].estimates[0].n == 10);
  REQUIRE(reports[0].pooled.has_value());
  CHECK(reports[0].pooled->n == 20);  // both specs pooled
}

TEST_CASE("report JSON: stable bytes and conditional sections") {
  const auto frames = noiseless_walk(10);
  auto config = skeleton_config();
  config.risk.reset();  // no verdict expected

  std::vector<WindowReport> reports;
  run_pipeline(config, vector_source(frames),
               [&](const WindowReport& r) { reports.push_back(r); });
  REQUIRE(reports.size() == 1);

  const auto a = report_to_json(reports[0]).dump();
  const auto b = report_to_json(reports[0]).dump();
  CHECK(a == b);
  CHECK(a.find("\"verdict\"") == std::string::npos);
  CHECK(a.find("\"dependencies\"") == std::string::npos);
  CHECK(a.find("null") == std::string::npos);

  const auto summary = report_summary(reports[0]);
  CHECK(summary.find("window 0") != std::string::npos);
}

TEST_CASE("scanner validation workflow on a drifting scene") {
  synth::ScenarioSpec spec;
  auto scan = synth::StaticScanScenario{};
  scan.span_deg = 19.25;  // 51 beams
  scan.noise_sigma = 0.002;
  scan.n_frames = 30;
  scan.drift_per_frame = 0.001;
  spec.kind = scan;
  spec.seed = 5;
  const auto generated = synth::generate(spec);

  PipelineConfig config;
  ConservationSpec cons;
  cons.id = "scan";
  cons.kind = StaticScan{};
  cons.reference_policy = ReferencePolicy::WindowMean;
  config.specs.push_back(cons);
  config.window_size = 10;
  config.bootstrap.resamples = 500;
  config.operating_range_m = 4.0;

  const auto result = validate_scanner(config, generated.frames,
                                       &generated.truth);
  CHECK(result.windows == 3);
  CHECK(result.conservation_smaller);
  CHECK(result.conservation_u < result.baseline_u);
  REQUIRE(result.conservation_relative.has_value());
  CHECK(*result.conservation_relative > 0.0);
}

TEST_CASE("pipeline config validation") {
  PipelineConfig config;
  CHECK_THROWS_AS(config.validate(), ConfigError);  // no specs

  ConservationSpec spec;
  spec.id = "ch";
  spec.kind = GenericConstant{"x", {}};
  config.specs.push_back(spec);
  config.validate();

  config.window_size = 1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.window_size = 10;

  config.bootstrap.confidence = 1.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.bootstrap.confidence = 0.95;

  config.specs.push_back(spec);  // duplicate id
  CHECK_THROWS_AS(config.validate(), ConfigError);
}
