// cuq: streaming measurement-uncertainty monitor built on conservation
// measures. Subcommands: run, validate-scanner, synth, check-config.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"  // vendored

#include "cuq/config.hpp"
#include "cuq/errors.hpp"
#include "cuq/io.hpp"
#include "cuq/pipeline.hpp"
#include "cuq/synth.hpp"

namespace {

using namespace cuq;

struct CommonIo {
  std::string input = "-";
  std::string output = "-";
  std::string format = "jsonl";
  double csv_a0 = 0.0;
  double csv_da = 0.0;
  int expected_beams = -1;
};

std::unique_ptr<std::istream> open_input(const std::string& path) {
  if (path == "-") return nullptr;  // caller falls back to std::cin
  auto in = std::make_unique<std::ifstream>(path);
  if (!*in) throw ConfigError("cannot open input file: " + path);
  return in;
}

std::unique_ptr<std::ostream> open_output(const std::string& path) {
  if (path == "-") return nullptr;  // caller falls back to std::cout
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) throw ConfigError("cannot open output file: " + path);
  return out;
}

ParseOptions parse_options(const CommonIo& io) {
  ParseOptions opts;
  if (io.format == "jsonl") {
    opts.format = FrameFormat::Jsonl;
  } else if (io.format == "csv") {
    opts.format = FrameFormat::Csv;
    opts.csv_angle_start_deg = io.csv_a0;
    opts.csv_angle_step_deg = io.csv_da;
  } else {
    throw ConfigError("unknown input format: " + io.format);
  }
  opts.expected_beams = io.expected_beams;
  return opts;
}

std::vector<Vec3> parse_waypoints(const std::string& text) {
  std::vector<Vec3> out;
  std::stringstream points(text);
  std::string point;
  while (std::getline(points, point, ';')) {
    Vec3 v{};
    std::stringstream coords(point);
    std::string coord;
    int axis = 0;
    while (std::getline(coords, coord, ',') && axis < 3) {
      v[axis++] = std::stod(coord);
    }
    if (axis != 3) throw ConfigError("waypoints must be x,y,z;x,y,z;...");
    out.push_back(v);
  }
  return out;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream pairs(text);
  std::string pair;
  while (std::getline(pairs, pair, ',')) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("pairs must be j:k,j:k,...");
    }
    out.emplace_back(std::stoi(pair.substr(0, colon)),
                     std::stoi(pair.substr(colon + 1)));
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream values(text);
  std::string value;
  while (std::getline(values, value, ',')) out.push_back(std::stod(value));
  return out;
}

int run_command(const PipelineConfig& config, const CommonIo& io,
                const std::string& truth_path, const std::string& plot_path,
                bool human) {
  auto in_file = open_input(io.input);
  std::istream& in = in_file ? *in_file : std::cin;
  auto out_file = open_output(io.output);
  std::ostream& out = out_file ? *out_file : std::cout;

  synth::GroundTruth truth;
  PipelineOptions options;
  if (!truth_path.empty()) {
    std::ifstream tin(truth_path);
    if (!tin) throw ConfigError("cannot open truth file: " + truth_path);
    truth = read_truth_jsonl(tin);
    options.truth = &truth;
  }

  std::unique_ptr<std::ofstream> plot;
  if (!plot_path.empty()) {
    plot = std::make_unique<std::ofstream>(plot_path);
    if (!*plot) throw ConfigError("cannot open plot-data file: " + plot_path);
    *plot << "window_id,spec_id,bin_lo,bin_hi,count\n";
    options.keep_resamples = true;
  }

  FrameParser parser(in, parse_options(io));
  bool any_fail = false;
  const ReportSink sink = [&](const WindowReport& report) {
    out << report_to_json(report).dump() << '\n';
    if (human) std::cerr << report_summary(report) << '\n';
    if (plot && !report.pooled_resamples.empty()) {
      write_histogram_csv(*plot, report.window_id, "pooled",
                          report.pooled_resamples, 50);
    }
    if (report.verdict && !report.verdict->pass) any_fail = true;
  };

  const auto stats = run_pipeline(
      config, [&parser] { return parser.next(); }, sink, options);

  std::cerr << "frames=" << stats.frames_in
            << " windows=" << stats.windows
            << " trailing_skipped=" << stats.trailing_skipped
            << " records_skipped=" << parser.stats().skipped << '\n';
  for (const auto& err : parser.stats().errors) {
    std::cerr << "  parse: " << err << '\n';
  }
  if (stats.trailing_skipped > 0) {
    std::cerr << "warning: final partial window of " << stats.trailing_skipped
              << " frame(s) skipped\n";
  }
  return any_fail ? 1 : 0;
}

int validate_scanner_command(PipelineConfig config, const CommonIo& io,
                             const std::string& truth_path, double datasheet_u,
                             double datasheet_range) {
  auto in_file = open_input(io.input);
  std::istream& in = in_file ? *in_file : std::cin;

  std::vector<MeasurementFrame> frames;
  FrameParser parser(in, parse_options(io));
  while (auto frame = parser.next()) frames.push_back(std::move(*frame));

  synth::GroundTruth truth;
  const synth::GroundTruth* truth_ptr = nullptr;
  if (!truth_path.empty()) {
    std::ifstream tin(truth_path);
    if (!tin) throw ConfigError("cannot open truth file: " + truth_path);
    truth = read_truth_jsonl(tin);
    truth_ptr = &truth;
  }

  const auto result = validate_scanner(config, frames, truth_ptr);

  nlohmann::ordered_json j;
  j["windows"] = result.windows;
  j["conservation_u"] = result.conservation_u;
  j["baseline_u"] = result.baseline_u;
  if (result.conservation_relative) {
    j["conservation_relative"] = *result.conservation_relative;
  }
  if (result.baseline_relative) j["baseline_relative"] = *result.baseline_relative;
  j["conservation_smaller"] = result.conservation_smaller;
  if (datasheet_u > 0.0 && datasheet_range > 0.0) {
    const double datasheet_rel = datasheet_u / datasheet_range;
    j["datasheet_relative"] = datasheet_rel;
    if (result.conservation_relative) {
      j["difference_vs_datasheet"] =
          (*result.conservation_relative - datasheet_rel) / datasheet_rel;
    }
  }
  std::cout << j.dump(2) << '\n';
  std::cerr << "conservation u=" << result.conservation_u
            << "  baseline u=" << result.baseline_u << "  ("
            << (result.conservation_smaller ? "conservation smaller"
                                            : "baseline smaller")
            << ")\n";
  return 0;
}

int synth_command(const std::string& scenario, int frames, std::uint64_t seed,
                  const std::string& out_path, const std::string& truth_path,
                  double sigma, double range, double drift, double span,
                  double step, double rate, const std::string& pairs,
                  const std::string& bones, const std::string& speeds,
                  const std::string& waypoints, double sigma0, double gain) {
  synth::ScenarioSpec spec;
  spec.seed = seed;
  if (scenario == "static-scan" || scenario == "drifting-scan") {
    synth::StaticScanScenario scan;
    scan.span_deg = span;
    scan.step_deg = step;
    scan.range_profile = {range};
    scan.noise_sigma = sigma;
    scan.n_frames = frames;
    scan.frame_rate_hz = rate;
    scan.drift_per_frame = scenario == "drifting-scan" ? drift : 0.0;
    if (scenario == "drifting-scan" && drift == 0.0) {
      throw ConfigError("drifting-scan needs --drift != 0");
    }
    spec.kind = scan;
  } else if (scenario == "skeleton-walk") {
    synth::SkeletonWalkScenario walk;
    if (!pairs.empty()) walk.pairs = parse_pairs(pairs);
    if (!bones.empty()) walk.bone_lengths = parse_doubles(bones);
    if (!speeds.empty()) walk.segment_speeds = parse_doubles(speeds);
    if (!waypoints.empty()) walk.waypoints = parse_waypoints(waypoints);
    walk.n_frames = frames;
    walk.frame_rate_hz = rate;
    if (gain > 0.0) {
      walk.noise = synth::VelocityCoupledNoise{sigma0, gain};
    } else {
      walk.noise = synth::ConstantNoise{sigma};
    }
    spec.kind = walk;
  } else {
    throw ConfigError("unknown scenario: " + scenario);
  }

  const auto result = synth::generate(spec);

  auto out_file = open_output(out_path);
  std::ostream& out = out_file ? *out_file : std::cout;
  write_frames_jsonl(out, result.frames);

  if (!truth_path.empty()) {
    std::ofstream tout(truth_path);
    if (!tout) throw ConfigError("cannot open truth output: " + truth_path);
    write_truth_jsonl(tout, result.truth);
  }
  std::cerr << "generated " << result.frames.size() << " frame(s), scenario "
            << scenario << ", seed " << seed << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conservation-based online measurement-uncertainty monitor"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run = app.add_subcommand("run", "run the full pipeline on a stream");
  std::string run_config_path;
  CommonIo run_io;
  std::string run_truth, run_plot;
  bool run_human = false;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_window;
  std::optional<double> run_confidence;
  std::optional<std::string> run_mode, run_propagation;
  std::optional<int> run_threads;
  std::optional<double> run_range;
  run->add_option("--config", run_config_path, "pipeline config file (JSON)")
      ->required();
  run->add_option("--input", run_io.input, "frame stream ('-' = stdin)");
  run->add_option("--output", run_io.output, "report stream ('-' = stdout)");
  run->add_option("--format", run_io.format, "input format: jsonl|csv");
  run->add_option("--a0", run_io.csv_a0, "CSV scan: start angle (deg)");
  run->add_option("--da", run_io.csv_da, "CSV scan: angle step (deg)");
  run->add_option("--beams", run_io.expected_beams,
                  "required beam count for scan frames");
  run->add_option("--truth", run_truth, "ground-truth sidecar (JSONL)");
  run->add_option("--plot-data", run_plot, "bootstrap histogram CSV output");
  run->add_flag("--human", run_human, "print per-window summaries to stderr");
  run->add_option("--seed", run_seed, "override bootstrap seed");
  run->add_option("--window-size", run_window, "override window size");
  run->add_option("--confidence", run_confidence, "override confidence level");
  run->add_option("--mode", run_mode, "conservation|baseline");
  run->add_option("--propagation", run_propagation, "as-printed|gum-squared");
  run->add_option("--threads", run_threads, "parallel window workers");
  run->add_option("--operating-range", run_range, "operating range (m)");

  // ---- validate-scanner ----
  auto* vs = app.add_subcommand(
      "validate-scanner", "static-scan validation incl. baseline comparison");
  std::string vs_config_path;
  CommonIo vs_io;
  std::string vs_truth;
  std::optional<std::uint64_t> vs_seed;
  std::optional<std::size_t> vs_window, vs_resamples;
  std::optional<double> vs_range;
  double vs_datasheet_u = 0.0, vs_datasheet_range = 0.0;
  vs->add_option("--config", vs_config_path, "pipeline config (optional)");
  vs->add_option("--input", vs_io.input, "scan stream ('-' = stdin)");
  vs->add_option("--format", vs_io.format, "input format: jsonl|csv");
  vs->add_option("--a0", vs_io.csv_a0, "CSV scan: start angle (deg)");
  vs->add_option("--da", vs_io.csv_da, "CSV scan: angle step (deg)");
  vs->add_option("--beams", vs_io.expected_beams,
                 "required beam count for scan frames");
  vs->add_option("--truth", vs_truth, "ground-truth sidecar (JSONL)");
  vs->add_option("--seed", vs_seed, "bootstrap seed");
  vs->add_option("--window-size", vs_window, "window size");
  vs->add_option("--resamples", vs_resamples, "bootstrap resamples");
  vs->add_option("--range", vs_range, "operating range for relative u (m)");
  vs->add_option("--datasheet-u", vs_datasheet_u, "datasheet uncertainty (m)");
  vs->add_option("--datasheet-range", vs_datasheet_range,
                 "datasheet operating range (m)");

  // ---- synth ----
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic stream + truth sidecar");
  std::string sy_scenario = "static-scan";
  int sy_frames = 100;
  std::uint64_t sy_seed = 0;
  std::string sy_out = "-", sy_truth;
  double sy_sigma = 0.002, sy_range = 4.0, sy_drift = 0.0;
  double sy_span = 275.0, sy_step = 0.385, sy_rate = 12.5;
  std::string sy_pairs, sy_bones, sy_speeds, sy_waypoints;
  double sy_sigma0 = 0.0, sy_gain = 0.0;
  synth_cmd->add_option("--scenario", sy_scenario,
                        "static-scan|drifting-scan|skeleton-walk");
  synth_cmd->add_option("--frames", sy_frames, "frame count");
  synth_cmd->add_option("--seed", sy_seed, "generator seed");
  synth_cmd->add_option("--out", sy_out, "frame output ('-' = stdout)");
  synth_cmd->add_option("--truth-out", sy_truth, "truth sidecar output");
  synth_cmd->add_option("--sigma", sy_sigma, "noise sigma (m)");
  synth_cmd->add_option("--range", sy_range, "scan range profile (m)");
  synth_cmd->add_option("--drift", sy_drift, "drift (m/frame, drifting-scan)");
  synth_cmd->add_option("--span", sy_span, "scan angular span (deg)");
  synth_cmd->add_option("--step", sy_step, "scan angular step (deg)");
  synth_cmd->add_option("--rate", sy_rate, "frame rate (Hz)");
  synth_cmd->add_option("--pairs", sy_pairs, "skeleton pairs j:k,j:k,...");
  synth_cmd->add_option("--bones", sy_bones, "bone lengths (m), comma list");
  synth_cmd->add_option("--speeds", sy_speeds, "segment speeds (m/s)");
  synth_cmd->add_option("--waypoints", sy_waypoints, "path x,y,z;x,y,z;...");
  synth_cmd->add_option("--sigma0", sy_sigma0, "velocity-coupled base sigma");
  synth_cmd->add_option("--gain", sy_gain,
                        "velocity-coupled gain (m per m/s); >0 selects coupling");

  // ---- check-config ----
  auto* check = app.add_subcommand("check-config", "validate a config file");
  std::string check_path;
  check->add_option("--config", check_path, "config file (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      PipelineConfig config = load_config(run_config_path);
      if (run_seed) config.bootstrap.seed = *run_seed;
      if (run_window) config.window_size = *run_window;
      if (run_confidence) config.bootstrap.confidence = *run_confidence;
      if (run_threads) config.threads = *run_threads;
      if (run_range) config.operating_range_m = *run_range;
      if (run_mode) {
        if (*run_mode == "conservation") {
          config.mode = EvalMode::Conservation;
        } else if (*run_mode == "baseline") {
          config.mode = EvalMode::Baseline;
        } else {
          throw ConfigError("unknown mode: " + *run_mode);
        }
      }
      if (run_propagation) {
        config.propagation_mode = propagation_mode_from_string(*run_propagation);
      }
      config.validate();
      return run_command(config, run_io, run_truth, run_plot, run_human);
    }
    if (vs->parsed()) {
      PipelineConfig config;
      if (!vs_config_path.empty()) {
        config = load_config(vs_config_path);
      } else {
        ConservationSpec spec;
        spec.id = "scan";
        spec.kind = StaticScan{};
        spec.reference_policy = ReferencePolicy::WindowMean;
        config.specs.push_back(spec);
      }
      if (vs_seed) config.bootstrap.seed = *vs_seed;
      if (vs_window) config.window_size = *vs_window;
      if (vs_resamples) config.bootstrap.resamples = *vs_resamples;
      if (vs_range) config.operating_range_m = *vs_range;
      config.validate();
      return validate_scanner_command(config, vs_io, vs_truth, vs_datasheet_u,
                                      vs_datasheet_range);
    }
    if (synth_cmd->parsed()) {
      return synth_command(sy_scenario, sy_frames, sy_seed, sy_out, sy_truth,
                           sy_sigma, sy_range, sy_drift, sy_span, sy_step,
                           sy_rate, sy_pairs, sy_bones, sy_speeds, sy_waypoints,
                           sy_sigma0, sy_gain);
    }
    if (check->parsed()) {
      const PipelineConfig config = load_config(check_path);
      std::cout << config_to_json(config).dump(2) << '\n';
      std::cerr << "config OK\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
