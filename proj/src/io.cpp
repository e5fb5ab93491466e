#include "cuq/io.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cuq/errors.hpp"

namespace cuq {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double finite_number(const json& j, const char* what) {
  if (!j.is_number()) throw DataError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DataError(std::string(what) + " must be finite");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

MeasurementFrame frame_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  MeasurementFrame frame;
  frame.t = finite_number(j.at("t"), "t");

  if (j.contains("joints")) {
    SkeletonFrame sk;
    for (const auto& joint : j["joints"]) {
      const int id = joint.at("id").get<int>();
      if (id < 0 || id >= kBody25Joints) {
        throw DataError("joint id " + std::to_string(id) + " outside [0,24]");
      }
      const auto& p = joint.at("p");
      if (!p.is_array() || p.size() != 3) {
        throw DataError("joint position must be a 3-array");
      }
      SkeletonJoint sj;
      for (int a = 0; a < 3; ++a) sj.p[a] = finite_number(p[a], "joint coordinate");
      if (joint.contains("c") && !joint["c"].is_null()) {
        const double c = finite_number(joint["c"], "confidence");
        if (c < 0.0 || c > 1.0) throw DataError("confidence outside [0,1]");
        sj.confidence = c;
      }
      sk.joints[id] = sj;
    }
    frame.payload = std::move(sk);
  } else if (j.contains("ranges")) {
    ScanFrame scan;
    scan.angle_start_deg = finite_number(j.at("a0"), "a0");
    scan.angle_step_deg = finite_number(j.at("da"), "da");
    for (const auto& r : j["ranges"]) {
      if (r.is_null()) {
        scan.ranges.push_back(kNaN);
        continue;
      }
      const double v = finite_number(r, "range");
      if (v < 0.0) throw DataError("negative range");
      scan.ranges.push_back(v);
    }
    frame.payload = std::move(scan);
  } else if (j.contains("channels")) {
    GenericFrame gen;
    for (const auto& [name, value] : j["channels"].items()) {
      gen.channels[name] = finite_number(value, "channel value");
    }
    frame.payload = std::move(gen);
  } else {
    throw DataError("record has none of joints/ranges/channels");
  }
  return frame;
}

nlohmann::ordered_json frame_to_json(const MeasurementFrame& frame) {
  nlohmann::ordered_json j;
  j["t"] = frame.t;
  if (const auto* sk = std::get_if<SkeletonFrame>(&frame.payload)) {
    auto joints = nlohmann::ordered_json::array();
    for (const auto& [id, joint] : sk->joints) {
      nlohmann::ordered_json item;
      item["id"] = id;
      item["p"] = {joint.p[0], joint.p[1], joint.p[2]};
      if (joint.confidence) item["c"] = *joint.confidence;
      joints.push_back(item);
    }
    j["joints"] = joints;
  } else if (const auto* scan = std::get_if<ScanFrame>(&frame.payload)) {
    j["a0"] = scan->angle_start_deg;
    j["da"] = scan->angle_step_deg;
    auto ranges = nlohmann::ordered_json::array();
    for (double r : scan->ranges) {
      if (std::isfinite(r)) {
        ranges.push_back(r);
      } else {
        ranges.push_back(nullptr);
      }
    }
    j["ranges"] = ranges;
  } else {
    const auto& gen = std::get<GenericFrame>(frame.payload);
    j["channels"] = gen.channels;
  }
  return j;
}

FrameParser::FrameParser(std::istream& in, ParseOptions options)
    : in_(in), options_(options) {
  if (options_.format == FrameFormat::Csv &&
      !(options_.csv_angle_step_deg > 0.0)) {
    throw ConfigError("CSV scan input needs the scan geometry (a0/da flags)");
  }
}

void FrameParser::record_error(const std::string& message) {
  ++stats_.skipped;
  if (stats_.errors.size() < options_.max_recorded_errors) {
    stats_.errors.push_back("line " + std::to_string(line_no_) + ": " + message);
  }
}

bool FrameParser::admit(MeasurementFrame& frame, const std::string& context) {
  if (frame.t < last_t_) {
    record_error(context + ": timestamp moved backwards");
    return false;
  }
  const int index = static_cast<int>(frame.payload.index());
  if (payload_index_ < 0) {
    payload_index_ = index;
  } else if (payload_index_ != index) {
    throw FormatError("payload kind changed mid-stream (line " +
                      std::to_string(line_no_) + ")");
  }
  if (const auto* scan = std::get_if<ScanFrame>(&frame.payload)) {
    const int beams = static_cast<int>(scan->ranges.size());
    if (scan_beams_ < 0) {
      if (options_.expected_beams >= 0 && beams != options_.expected_beams) {
        throw FormatError("scan has " + std::to_string(beams) +
                          " beams, geometry requires " +
                          std::to_string(options_.expected_beams) + " (line " +
                          std::to_string(line_no_) + ")");
      }
      scan_beams_ = beams;
    } else if (scan_beams_ != beams) {
      throw FormatError("scan geometry mismatch: expected " +
                        std::to_string(scan_beams_) + " beams, got " +
                        std::to_string(beams) + " (line " +
                        std::to_string(line_no_) + ")");
    }
  }
  last_t_ = frame.t;
  ++stats_.parsed;
  return true;
}

std::optional<MeasurementFrame> FrameParser::next() {
  return options_.format == FrameFormat::Jsonl ? next_jsonl() : next_csv();
}

std::optional<MeasurementFrame> FrameParser::next_jsonl() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    MeasurementFrame frame;
    try {
      frame = frame_from_json(json::parse(line));
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      record_error(e.what());
      continue;
    }
    if (admit(frame, "record")) return frame;
  }
  return std::nullopt;
}

std::optional<MeasurementFrame> FrameParser::next_csv() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!csv_header_done_) {
      csv_columns_ = split_csv(line);
      if (csv_columns_.size() < 2 || csv_columns_[0] != "t") {
        throw FormatError("CSV header must be t,r0,r1,...");
      }
      csv_header_done_ = true;
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() != csv_columns_.size()) {
      throw FormatError("CSV row width mismatch at line " +
                        std::to_string(line_no_));
    }
    MeasurementFrame frame;
    ScanFrame scan;
    scan.angle_start_deg = options_.csv_angle_start_deg;
    scan.angle_step_deg = options_.csv_angle_step_deg;
    bool bad = false;
    try {
      frame.t = std::stod(fields[0]);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i].empty()) {
          scan.ranges.push_back(kNaN);
          continue;
        }
        const double v = std::stod(fields[i]);
        if (v < 0.0) throw DataError("negative range");
        scan.ranges.push_back(v);
      }
    } catch (const std::exception& e) {
      record_error(e.what());
      bad = true;
    }
    if (bad) continue;
    frame.payload = std::move(scan);
    if (admit(frame, "row")) return frame;
  }
  return std::nullopt;
}

void write_frames_jsonl(std::ostream& out,
                        std::span<const MeasurementFrame> frames) {
  for (const auto& frame : frames) {
    out << frame_to_json(frame).dump() << '\n';
  }
}

void write_truth_jsonl(std::ostream& out, const synth::GroundTruth& truth) {
  nlohmann::ordered_json meta;
  meta["kind"] = truth.scan_refs.empty() ? "skeleton" : "scan";
  if (!truth.pairs.empty()) {
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& [a, b] : truth.pairs) {
      pairs.push_back(nlohmann::ordered_json::array({a, b}));
    }
    meta["pairs"] = pairs;
    meta["bone_lengths"] = truth.bone_lengths;
  }
  nlohmann::ordered_json head;
  head["meta"] = meta;
  out << head.dump() << '\n';

  for (std::size_t i = 0; i < truth.t.size(); ++i) {
    nlohmann::ordered_json j;
    j["i"] = i;
    j["t"] = truth.t[i];
    if (i < truth.scan_refs.size()) j["scan_refs"] = truth.scan_refs[i];
    if (i < truth.joint_positions.size()) {
      auto joints = nlohmann::ordered_json::array();
      for (const auto& [id, p] : truth.joint_positions[i]) {
        joints.push_back(nlohmann::ordered_json::array({id, p[0], p[1], p[2]}));
      }
      j["joints"] = joints;
    }
    if (i < truth.true_speed.size()) j["speed"] = truth.true_speed[i];
    if (i < truth.noise_sigma.size()) j["sigma"] = truth.noise_sigma[i];
    out << j.dump() << '\n';
  }
}

synth::GroundTruth read_truth_jsonl(std::istream& in) {
  synth::GroundTruth truth;
  std::string line;
  bool meta_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(std::string("truth file parse error: ") + e.what());
    }
    if (!meta_seen) {
      if (!j.contains("meta")) throw FormatError("truth file lacks a meta line");
      const auto& meta = j["meta"];
      if (meta.contains("pairs")) {
        for (const auto& pair : meta["pairs"]) {
          truth.pairs.emplace_back(pair[0].get<int>(), pair[1].get<int>());
        }
        truth.bone_lengths = meta["bone_lengths"].get<std::vector<double>>();
      }
      meta_seen = true;
      continue;
    }
    truth.t.push_back(j.at("t").get<double>());
    if (j.contains("scan_refs")) {
      truth.scan_refs.push_back(j["scan_refs"].get<std::vector<double>>());
    }
    if (j.contains("joints")) {
      std::map<int, Vec3> joints;
      for (const auto& entry : j["joints"]) {
        joints[entry[0].get<int>()] = {entry[1].get<double>(),
                                       entry[2].get<double>(),
                                       entry[3].get<double>()};
      }
      truth.joint_positions.push_back(std::move(joints));
    }
    if (j.contains("speed")) truth.true_speed.push_back(j["speed"].get<double>());
    if (j.contains("sigma")) truth.noise_sigma.push_back(j["sigma"].get<double>());
  }
  if (!meta_seen) throw FormatError("truth file is empty");
  return truth;
}

void write_histogram_csv(std::ostream& out, std::int64_t window_id,
                         const std::string& spec_id,
                         std::span<const double> resample_means, int bins) {
  if (bins < 1) throw ConfigError("histogram needs >= 1 bin");
  if (resample_means.empty()) return;
  double lo = resample_means.front();
  double hi = resample_means.front();
  for (double v : resample_means) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::size_t> counts;
  std::vector<std::pair<double, double>> edges;
  if (lo == hi) {
    counts.assign(1, resample_means.size());
    edges.emplace_back(lo, hi);
  } else {
    counts.assign(static_cast<std::size_t>(bins), 0);
    const double width = (hi - lo) / bins;
    for (double v : resample_means) {
      auto idx = static_cast<std::size_t>((v - lo) / width);
      idx = std::min<std::size_t>(idx, counts.size() - 1);
      ++counts[idx];
    }
    for (int b = 0; b < bins; ++b) {
      edges.emplace_back(lo + b * width, b + 1 == bins ? hi : lo + (b + 1) * width);
    }
  }
  out << std::setprecision(17);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out << window_id << ',' << spec_id << ',' << edges[b].first << ','
        << edges[b].second << ',' << counts[b] << '\n';
  }
}

}  // namespace cuq
