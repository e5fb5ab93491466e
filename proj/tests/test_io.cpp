#include "doctest.h"

#include <sstream>

#include "cuq/errors.hpp"
#include "cuq/io.hpp"
#include "cuq/synth.hpp"

using namespace cuq;

TEST_CASE("skeleton frame JSONL round trip") {
  const std::string line =
      R"({"t":0.5,"joints":[{"id":2,"p":[1.0,2.0,3.0],"c":0.9},{"id":3,"p":[1.3,2.0,3.0]}]})";
  const auto frame = frame_from_json(nlohmann::json::parse(line));
  CHECK(frame.t == 0.5);
  const auto& sk = std::get<SkeletonFrame>(frame.payload);
  REQUIRE(sk.joints.size() == 2);
  CHECK(sk.joints.at(2).confidence == 0.9);
  CHECK(!sk.joints.at(3).confidence.has_value());

  const auto dumped = frame_to_json(frame).dump();
  const auto again = frame_from_json(nlohmann::json::parse(dumped));
  CHECK(frame_to_json(again).dump() == dumped);  // stable bytes
}

TEST_CASE("scan frame JSONL: nulls mark invalid beams") {
  const std::string line =
      R"({"t":0.1,"a0":0.0,"da":0.385,"ranges":[4.0,null,4.1]})";
  const auto frame = frame_from_json(nlohmann::json::parse(line));
  const auto& scan = std::get<ScanFrame>(frame.payload);
  REQUIRE(scan.ranges.size() == 3);
  CHECK(valid_range(scan.ranges[0]));
  CHECK(!valid_range(scan.ranges[1]));

  const auto dumped = frame_to_json(frame).dump();
  CHECK(dumped.find("null") != std::string::npos);
}

TEST_CASE("full Body25 skeleton line parses to 25 joints") {
  nlohmann::json j;
  j["t"] = 0.0;
  j["joints"] = nlohmann::json::array();
  for (int id = 0; id < kBody25Joints; ++id) {
    j["joints"].push_back({{"id", id}, {"p", {0.1 * id, 0.0, 1.0}}});
  }
  const auto frame = frame_from_json(j);
  CHECK(std::get<SkeletonFrame>(frame.payload).joints.size() == 25);

  j["joints"].push_back({{"id", 25}, {"p", {0.0, 0.0, 0.0}}});
  CHECK_THROWS_AS(frame_from_json(j), DataError);
}

TEST_CASE("generic frame JSONL") {
  const auto frame = frame_from_json(
      nlohmann::json::parse(R"({"t":1.0,"channels":{"x":1.5,"y":-2.0}})"));
  const auto& gen = std::get<GenericFrame>(frame.payload);
  CHECK(gen.channels.at("x") == 1.5);
  CHECK(gen.channels.at("y") == -2.0);
}

TEST_CASE("record-level problems are counted and skipped") {
  std::stringstream in(
      "{\"t\":0.0,\"channels\":{\"x\":1.0}}\n"
      "not json at all\n"
      "{\"t\":0.2,\"channels\":{\"x\":2.0}}\n"
      "{\"t\":0.1,\"channels\":{\"x\":3.0}}\n"  // timestamp moved backwards
      "{\"no_t\":1}\n"
      "{\"t\":0.3,\"channels\":{\"x\":4.0}}\n");
  FrameParser parser(in);
  std::size_t frames = 0;
  while (parser.next()) ++frames;
  CHECK(frames == 3);
  CHECK(parser.stats().parsed == 3);
  CHECK(parser.stats().skipped == 3);
  CHECK(parser.stats().parsed + parser.stats().skipped == 6);
  CHECK(parser.stats().errors.size() == 3);
}

TEST_CASE("empty input parses cleanly") {
  std::stringstream in("");
  FrameParser parser(in);
  CHECK(!parser.next().has_value());
  CHECK(parser.stats().parsed == 0);
  CHECK(parser.stats().skipped == 0);
}

TEST_CASE("payload kind change mid-stream is fatal") {
  std::stringstream in(
      "{\"t\":0.0,\"channels\":{\"x\":1.0}}\n"
      "{\"t\":0.1,\"a0\":0.0,\"da\":0.385,\"ranges\":[4.0]}\n");
  FrameParser parser(in);
  CHECK(parser.next().has_value());
  CHECK_THROWS_AS(parser.next(), FormatError);
}

TEST_CASE("scan geometry is locked by the first frame") {
  std::stringstream in(
      "{\"t\":0.0,\"a0\":0.0,\"da\":0.385,\"ranges\":[4.0,4.0,4.0]}\n"
      "{\"t\":0.1,\"a0\":0.0,\"da\":0.385,\"ranges\":[4.0,4.0]}\n");
  FrameParser parser(in);
  CHECK(parser.next().has_value());
  CHECK_THROWS_AS(parser.next(), FormatError);
}

TEST_CASE("expected beam count from the geometry is enforced") {
  ParseOptions opts;
  opts.expected_beams = beam_count(275.0, 0.385);  // 715

  std::string full = "{\"t\":0.0,\"a0\":0.0,\"da\":0.385,\"ranges\":[4.0";
  for (int i = 1; i < 715; ++i) full += ",4.0";
  full += "]}\n";
  std::stringstream ok(full);
  FrameParser accepted(ok, opts);
  CHECK(accepted.next().has_value());

  std::string short_line = "{\"t\":0.0,\"a0\":0.0,\"da\":0.385,\"ranges\":[4.0";
  for (int i = 1; i < 714; ++i) short_line += ",4.0";
  short_line += "]}\n";
  std::stringstream bad(short_line);
  FrameParser rejected(bad, opts);
  CHECK_THROWS_AS(rejected.next(), FormatError);
}

TEST_CASE("CSV scan input") {
  ParseOptions opts;
  opts.format = FrameFormat::Csv;
  opts.csv_angle_start_deg = 0.0;
  opts.csv_angle_step_deg = 0.385;

  std::stringstream in(
      "t,r0,r1,r2\n"
      "0.0,4.0,4.1,4.2\n"
      "0.1,4.0,,4.2\n");
  FrameParser parser(in, opts);
  const auto first = parser.next();
  REQUIRE(first.has_value());
  const auto& scan = std::get<ScanFrame>(first->payload);
  CHECK(scan.ranges == std::vector<double>{4.0, 4.1, 4.2});
  CHECK(scan.angle_step_deg == 0.385);

  const auto second = parser.next();
  REQUIRE(second.has_value());
  CHECK(!valid_range(std::get<ScanFrame>(second->payload).ranges[1]));

  std::stringstream no_geometry("t,r0\n0.0,4.0\n");
  CHECK_THROWS_AS(FrameParser(no_geometry, ParseOptions{FrameFormat::Csv}),
                  ConfigError);
}

TEST_CASE("truth sidecar round trip") {
  synth::ScenarioSpec spec;
  synth::SkeletonWalkScenario walk;
  walk.pairs = {{2, 3}};
  walk.bone_lengths = {0.3};
  walk.n_frames = 5;
  walk.noise = synth::ConstantNoise{0.001};
  spec.kind = walk;
  spec.seed = 6;
  const auto result = synth::generate(spec);

  std::stringstream buffer;
  write_truth_jsonl(buffer, result.truth);
  const auto loaded = read_truth_jsonl(buffer);
  CHECK(loaded.pairs == result.truth.pairs);
  CHECK(loaded.bone_lengths == result.truth.bone_lengths);
  REQUIRE(loaded.joint_positions.size() == 5);
  CHECK(loaded.joint_positions[2].at(3)[0] ==
        doctest::Approx(result.truth.joint_positions[2].at(3)[0]));
  CHECK(loaded.true_speed == result.truth.true_speed);
}

TEST_CASE("frames JSONL writer emits one line per frame") {
  synth::ScenarioSpec spec;
  auto scan = synth::StaticScanScenario{};
  scan.span_deg = 1.155;  // 4 beams
  scan.noise_sigma = 0.0;
  scan.n_frames = 3;
  spec.kind = scan;
  const auto result = synth::generate(spec);

  std::stringstream buffer;
  write_frames_jsonl(buffer, result.frames);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(buffer, line)) ++lines;
  CHECK(lines == 3);
}

TEST_CASE("histogram bins sum to the resample count") {
  std::vector<double> means(10000);
  for (std::size_t i = 0; i < means.size(); ++i) {
    means[i] = static_cast<double>(i % 997) / 997.0;
  }
  std::stringstream out;
  write_histogram_csv(out, 3, "pooled", means, 50);

  std::string line;
  std::size_t total = 0, rows = 0;
  while (std::getline(out, line)) {
    ++rows;
    const auto last_comma = line.rfind(',');
    total += std::stoul(line.substr(last_comma + 1));
  }
  CHECK(rows == 50);
  CHECK(total == 10000);

  // degenerate: all means identical collapses to one bin
  std::stringstream single;
  write_histogram_csv(single, 0, "pooled", std::vector<double>(100, 0.5), 50);
  std::size_t single_rows = 0;
  while (std::getline(single, line)) ++single_rows;
  CHECK(single_rows == 1);
}
