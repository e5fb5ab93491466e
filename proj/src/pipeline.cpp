#include "cuq/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <future>
#include <sstream>
#include <utility>

#include "cuq/errors.hpp"
#include "cuq/rng.hpp"

namespace cuq {

namespace {

using nlohmann::json;

std::pair<int, int> sorted_pair(std::pair<int, int> p) {
  if (p.first > p.second) std::swap(p.first, p.second);
  return p;
}

// Ground-truth bone lengths from the sidecar, keyed by unordered pair.
std::map<std::pair<int, int>, double> truth_lengths(const synth::GroundTruth* t) {
  std::map<std::pair<int, int>, double> out;
  if (!t) return out;
  for (std::size_t i = 0; i < t->pairs.size() && i < t->bone_lengths.size(); ++i) {
    out[sorted_pair(t->pairs[i])] = t->bone_lengths[i];
  }
  return out;
}

// Spec with truth-supplied references filled into the gaps.
ConservationSpec effective_spec(const ConservationSpec& spec,
                                const std::map<std::pair<int, int>, double>& bones) {
  if (bones.empty()) return spec;
  const auto* jp = std::get_if<JointPairDistance>(&spec.kind);
  if (!jp) return spec;
  ConservationSpec out = spec;
  auto& kind = std::get<JointPairDistance>(out.kind);
  if (kind.reference.empty()) kind.reference.resize(kind.pairs.size());
  for (std::size_t i = 0; i < kind.pairs.size(); ++i) {
    if (kind.reference[i]) continue;
    const auto it = bones.find(sorted_pair(kind.pairs[i]));
    if (it != bones.end()) kind.reference[i] = it->second;
  }
  return out;
}

// Per-covariate time -> value tables for one window.
struct CovariateTables {
  std::map<std::string, std::map<double, double>> by_time;
  std::vector<std::string> errors;
};

CovariateTables build_covariates(const PipelineConfig& config,
                                 std::span<const MeasurementFrame> frames) {
  CovariateTables tables;
  for (const auto& cov : config.hypothesis.covariates) {
    auto& table = tables.by_time[cov.name];
    if (cov.source == CovariateConfig::Source::JointVelocity) {
      try {
        const auto series = compute_velocity(frames, cov.joint_id);
        for (std::size_t i = 0; i < series.t.size(); ++i) {
          table[series.t[i]] = series.v[i];
        }
      } catch (const Error& e) {
        tables.errors.push_back("covariate '" + cov.name + "': " + e.what());
      }
    } else {
      for (const auto& frame : frames) {
        const auto* gen = std::get_if<GenericFrame>(&frame.payload);
        if (!gen) continue;
        const auto it = gen->channels.find(cov.channel);
        if (it != gen->channels.end() && std::isfinite(it->second)) {
          table[frame.t] = it->second;
        }
      }
    }
  }
  return tables;
}

// Attaches configured covariates to a deviation series, dropping samples
// that lack a value for any non-empty covariate table.
void attach_covariates(DeviationSeries& series, const CovariateTables& tables) {
  std::vector<std::pair<std::string, const std::map<double, double>*>> active;
  for (const auto& [name, table] : tables.by_time) {
    if (!table.empty()) active.emplace_back(name, &table);
  }
  if (active.empty()) return;

  std::vector<bool> keep(series.values.size(), true);
  std::map<std::string, std::vector<double>> attached;
  for (const auto& [name, table] : active) {
    auto& column = attached[name];
    column.resize(series.values.size());
    for (std::size_t i = 0; i < series.values.size(); ++i) {
      const auto it = table->find(series.timestamps[i]);
      if (it == table->end()) {
        keep[i] = false;
      } else {
        column[i] = it->second;
      }
    }
  }

  auto filter = [&keep](std::vector<double>& xs) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (keep[i]) xs[w++] = xs[i];
    }
    xs.resize(w);
  };
  filter(series.values);
  filter(series.timestamps);
  for (auto& [name, column] : series.covariates) filter(column);
  for (auto& [name, column] : attached) {
    filter(column);
    series.covariates[name] = std::move(column);
  }
}

struct WindowTask {
  std::vector<MeasurementFrame> frames;
  std::int64_t window_id = 0;
  std::size_t global_start = 0;
};

WindowReport analyze_window(const PipelineConfig& config,
                            const PipelineOptions& options, WindowTask task) {
  const auto started = std::chrono::steady_clock::now();
  WindowReport report;
  report.window_id = task.window_id;
  report.frames = task.frames.size();
  report.t_start = task.frames.empty() ? 0.0 : task.frames.front().t;
  report.t_end = task.frames.empty() ? 0.0 : task.frames.back().t;
  report.propagation_mode = config.propagation_mode;
  report.reference_policy = to_string(config.reference_policy);

  const std::uint64_t boot_seed =
      rng::stream_seed(config.bootstrap.seed, 2 * static_cast<std::uint64_t>(task.window_id));
  const std::uint64_t hyp_seed =
      rng::stream_seed(config.bootstrap.seed, 2 * static_cast<std::uint64_t>(task.window_id) + 1);

  // Per-frame scan truth rows covering this window, when a sidecar is present.
  std::vector<std::vector<double>> truth_rows;
  const bool conservation = config.mode == EvalMode::Conservation;
  if (conservation && options.truth && !options.truth->scan_refs.empty()) {
    for (std::size_t i = 0; i < task.frames.size(); ++i) {
      const std::size_t row = task.global_start + i;
      if (row < options.truth->scan_refs.size()) {
        truth_rows.push_back(options.truth->scan_refs[row]);
      }
    }
  }
  const auto bones = conservation ? truth_lengths(options.truth)
                                  : std::map<std::pair<int, int>, double>{};

  const auto tables = build_covariates(config, task.frames);
  report.errors.insert(report.errors.end(), tables.errors.begin(),
                       tables.errors.end());

  // Deviation series per spec, then estimates.
  std::vector<DeviationSeries> series_list;
  bool any_self_referenced = false;
  std::vector<double> explicit_refs;
  for (std::size_t s = 0; s < config.specs.size(); ++s) {
    const auto spec = effective_spec(config.specs[s], bones);
    WindowOptions wopts;
    wopts.max_range_m = config.max_range_m;
    if (!truth_rows.empty() && truth_rows.size() == task.frames.size() &&
        std::holds_alternative<StaticScan>(spec.kind)) {
      wopts.per_frame_scan_refs = &truth_rows;
    }
    try {
      DeviationSeries series =
          conservation
              ? evaluate_window(task.frames, spec, task.window_id, wopts)
              : baseline_spread(task.frames, spec, task.window_id, wopts);
      attach_covariates(series, tables);
      series.check_aligned();
      if (series.values.empty()) {
        report.errors.push_back(spec.id + ": no usable samples in window");
        continue;
      }
      if (series.self_referenced) any_self_referenced = true;

      const auto result = bootstrap(series, config.bootstrap.resamples,
                                    rng::stream_seed(boot_seed, s));
      auto estimate = uncertainty_at(result, config.bootstrap.confidence,
                                     config.operating_range_m);
      estimate.window_id = task.window_id;
      estimate.spec_id = spec.id;
      estimate.self_referenced = series.self_referenced;
      report.estimates.push_back(std::move(estimate));
      series_list.push_back(std::move(series));

      // Reference magnitudes feed the manual-measurement Type B term.
      std::visit(
          [&](const auto& kind) {
            using T = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<T, GenericConstant>) {
              if (kind.reference) explicit_refs.push_back(*kind.reference);
            } else {
              for (const auto& r : kind.reference) {
                if (r) explicit_refs.push_back(*r);
              }
            }
          },
          spec.kind);
    } catch (const Error& e) {
      report.errors.push_back(spec.id + ": " + std::string(e.what()));
    }
  }

  // Pooled series across specs: values always pool; a covariate pools only
  // if every contributing series carries it.
  DeviationSeries pooled;
  pooled.spec_id = "pooled";
  pooled.window_id = task.window_id;
  pooled.self_referenced = any_self_referenced;
  if (!series_list.empty()) {
    std::map<std::string, bool> covariate_everywhere;
    for (const auto& cov : config.hypothesis.covariates) {
      covariate_everywhere[cov.name] = true;
    }
    for (const auto& series : series_list) {
      for (auto& [name, everywhere] : covariate_everywhere) {
        if (!series.covariates.count(name)) everywhere = false;
      }
    }
    for (const auto& series : series_list) {
      pooled.values.insert(pooled.values.end(), series.values.begin(),
                           series.values.end());
      pooled.timestamps.insert(pooled.timestamps.end(),
                               series.timestamps.begin(),
                               series.timestamps.end());
      for (const auto& [name, everywhere] : covariate_everywhere) {
        if (everywhere) {
          const auto& column = series.covariates.at(name);
          auto& target = pooled.covariates[name];
          target.insert(target.end(), column.begin(), column.end());
        }
      }
    }

    const auto result = bootstrap(pooled, config.bootstrap.resamples,
                                  rng::stream_seed(boot_seed, config.specs.size()));
    auto estimate = uncertainty_at(result, config.bootstrap.confidence,
                                   config.operating_range_m);
    estimate.window_id = task.window_id;
    estimate.spec_id = "pooled";
    estimate.self_referenced = pooled.self_referenced;
    report.pooled = std::move(estimate);
    if (options.keep_resamples) report.pooled_resamples = result.resample_means;

    // Hypothesis tests on the pooled series; covariance report only where a
    // dependency was indicated.
    std::size_t cov_idx = 0;
    for (const auto& cov : config.hypothesis.covariates) {
      ++cov_idx;
      if (!pooled.covariates.count(cov.name)) continue;
      try {
        HypothesisOptions hopts;
        hopts.n_perm = config.hypothesis.permutations;
        auto hypothesis =
            test_dependency(pooled, cov.name, config.hypothesis.alpha,
                            rng::stream_seed(hyp_seed, cov_idx), hopts);
        const bool rejected = hypothesis.rejected;
        report.hypotheses.push_back(std::move(hypothesis));
        if (rejected) {
          report.dependencies.push_back(dependency_report(pooled, cov.name));
        }
      } catch (const Error& e) {
        report.errors.push_back("hypothesis '" + cov.name + "': " + e.what());
      }
    }
  }

  // Type A + Type B propagation on the pooled estimate.
  if (report.pooled) {
    SensitivityTerm type_a;
    type_a.symbol = "det";
    type_a.kind = TermKind::TypeA;
    type_a.u = config.attribute == AttributeKind::JointPosition
                   ? joint_from_pair(report.pooled->u, config.pair_attribution_factor)
                   : report.pooled->u;
    report.propagation_terms.push_back(type_a);

    for (const auto& entry : config.type_b) {
      try {
        const double point = config.operating_range_m.value_or(0.0);
        const auto eval = type_b_eval(entry.spec, point);
        SensitivityTerm term;
        term.symbol = entry.spec.source_id;
        term.sensitivity = entry.sensitivity;
        term.u = eval.u;
        term.kind = TermKind::TypeB;
        if (eval.clamped) {
          report.errors.push_back("type_b '" + entry.spec.source_id +
                                  "': negative evaluation clamped to 0");
        }
        report.propagation_terms.push_back(std::move(term));
      } catch (const Error& e) {
        report.errors.push_back("type_b '" + entry.spec.source_id + "': " +
                                e.what());
      }
    }

    if (config.reference_policy == ReferencePolicy::GroundTruth &&
        config.reference_manual_relative && !explicit_refs.empty()) {
      double sum = 0.0;
      for (double r : explicit_refs) sum += std::abs(r);
      SensitivityTerm manual;
      manual.symbol = "reference_manual";
      manual.kind = TermKind::TypeB;
      manual.u = *config.reference_manual_relative *
                 (sum / static_cast<double>(explicit_refs.size()));
      report.propagation_terms.push_back(std::move(manual));
    }

    report.combined_u = combine(report.propagation_terms, config.propagation_mode);
    if (config.operating_range_m) {
      report.combined_relative = *report.combined_u / *config.operating_range_m;
    }

    if (config.risk) {
      const double basis_value = report.combined_relative
                                     ? *report.combined_relative
                                     : *report.combined_u;
      report.verdict_basis = report.combined_relative ? "relative" : "absolute";
      report.verdict = check_limit(basis_value, *config.risk, config.safety_limit);
    }
  }

  report.elapsed_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();
  return report;
}

}  // namespace

Windower::Windower(std::size_t window_size) : window_size_(window_size) {
  if (window_size_ < 2) throw ConfigError("window size must be >= 2");
  buffer_.reserve(window_size_);
}

std::optional<std::vector<MeasurementFrame>> Windower::push(
    MeasurementFrame frame) {
  buffer_.push_back(std::move(frame));
  max_buffered_ = std::max(max_buffered_, buffer_.size());
  if (buffer_.size() < window_size_) return std::nullopt;
  std::vector<MeasurementFrame> full;
  full.swap(buffer_);
  buffer_.reserve(window_size_);
  return full;
}

std::vector<std::vector<MeasurementFrame>> window_stream(
    std::span<const MeasurementFrame> frames, std::size_t window_size,
    std::size_t* skipped) {
  Windower windower(window_size);
  std::vector<std::vector<MeasurementFrame>> out;
  for (const auto& frame : frames) {
    if (auto window = windower.push(frame)) out.push_back(std::move(*window));
  }
  if (skipped) *skipped = windower.leftover();
  return out;
}

PipelineStats run_pipeline(const PipelineConfig& config, FrameSource source,
                           const ReportSink& sink,
                           const PipelineOptions& options) {
  config.validate();
  PipelineStats stats;
  Windower windower(config.window_size);
  std::int64_t window_id = 0;
  std::size_t global_start = 0;

  const auto make_task = [&](std::vector<MeasurementFrame>&& frames) {
    WindowTask task;
    task.frames = std::move(frames);
    task.window_id = window_id++;
    task.global_start = global_start;
    global_start += config.window_size;
    return task;
  };

  if (config.threads <= 1) {
    while (auto frame = source()) {
      ++stats.frames_in;
      if (auto window = windower.push(std::move(*frame))) {
        sink(analyze_window(config, options, make_task(std::move(*window))));
        ++stats.windows;
      }
    }
  } else {
    // Bounded in-flight queue; reports drain in window order, so output is
    // identical to the sequential path.
    std::deque<std::future<WindowReport>> inflight;
    const auto drain_one = [&] {
      sink(inflight.front().get());
      inflight.pop_front();
      ++stats.windows;
    };
    while (auto frame = source()) {
      ++stats.frames_in;
      if (auto window = windower.push(std::move(*frame))) {
        inflight.push_back(std::async(
            std::launch::async,
            [&config, &options](WindowTask task) {
              return analyze_window(config, options, std::move(task));
            },
            make_task(std::move(*window))));
        if (inflight.size() >= static_cast<std::size_t>(config.threads)) {
          drain_one();
        }
      }
    }
    while (!inflight.empty()) drain_one();
  }

  stats.trailing_skipped = windower.leftover();
  stats.max_buffered = windower.max_buffered();
  return stats;
}

nlohmann::ordered_json report_to_json(const WindowReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = "cuq.report.v1";
  j["window_id"] = report.window_id;
  j["t_start"] = report.t_start;
  j["t_end"] = report.t_end;
  j["frames"] = report.frames;
  j["reference_policy"] = report.reference_policy;

  const auto estimate_json = [](const UncertaintyEstimate& est) {
    nlohmann::ordered_json e;
    e["spec_id"] = est.spec_id;
    e["u"] = est.u;
    e["confidence"] = est.confidence;
    e["interval"] = nlohmann::ordered_json::array({est.lo, est.hi});
    if (est.relative) e["relative"] = *est.relative;
    e["point_estimate"] = est.point_estimate;
    e["signed_mean"] = est.signed_mean;
    e["standard_error"] = est.standard_error;
    e["n"] = est.n;
    e["self_referenced"] = est.self_referenced;
    return e;
  };

  auto estimates = nlohmann::ordered_json::array();
  for (const auto& est : report.estimates) estimates.push_back(estimate_json(est));
  j["estimates"] = estimates;
  if (report.pooled) j["pooled"] = estimate_json(*report.pooled);

  if (!report.hypotheses.empty()) {
    auto hs = nlohmann::ordered_json::array();
    for (const auto& h : report.hypotheses) {
      nlohmann::ordered_json e;
      e["covariate"] = h.covariate;
      e["statistic"] = h.statistic;
      e["p_value"] = h.p_value;
      e["alpha"] = h.alpha;
      e["rejected"] = h.rejected;
      e["n"] = h.n;
      if (h.degenerate_deviations) e["degenerate_deviations"] = true;
      hs.push_back(e);
    }
    j["hypotheses"] = hs;
  }
  if (!report.dependencies.empty()) {
    auto ds = nlohmann::ordered_json::array();
    for (const auto& d : report.dependencies) {
      nlohmann::ordered_json e;
      e["covariate"] = d.covariate;
      e["covariance"] = d.covariance;
      e["pearson_r"] = d.pearson_r;
      e["n"] = d.n;
      ds.push_back(e);
    }
    j["dependencies"] = ds;
  }

  if (!report.propagation_terms.empty()) {
    nlohmann::ordered_json p;
    p["mode"] = to_string(report.propagation_mode);
    auto terms = nlohmann::ordered_json::array();
    for (const auto& term : report.propagation_terms) {
      nlohmann::ordered_json e;
      e["symbol"] = term.symbol;
      e["sensitivity"] = term.sensitivity;
      e["u"] = term.u;
      e["kind"] = to_string(term.kind);
      terms.push_back(e);
    }
    p["terms"] = terms;
    if (report.combined_u) p["u_c"] = *report.combined_u;
    if (report.combined_relative) p["u_c_relative"] = *report.combined_relative;
    j["propagation"] = p;
  }

  if (report.verdict) {
    nlohmann::ordered_json v;
    v["pfh"] = report.verdict->pfh;
    v["r"] = report.verdict->r;
    v["pass"] = report.verdict->pass;
    v["lambda_per_hour"] = report.verdict->limit.lambda_per_hour;
    v["label"] = report.verdict->limit.label;
    if (std::isfinite(report.verdict->margin_orders)) {
      v["margin_orders"] = report.verdict->margin_orders;
    }
    v["basis"] = report.verdict_basis;
    j["verdict"] = v;
  }

  // Timing stays out of the JSONL stream so identical inputs yield identical
  // bytes; it is available in the human summary.
  if (!report.errors.empty()) j["errors"] = report.errors;
  return j;
}

std::string report_summary(const WindowReport& report) {
  std::ostringstream out;
  out << "window " << report.window_id << " [" << report.t_start << ", "
      << report.t_end << "] s";
  if (report.pooled) {
    out << "  u=" << report.pooled->u;
    if (report.pooled->relative) {
      out << " (" << *report.pooled->relative * 100.0 << "%)";
    }
  }
  for (const auto& h : report.hypotheses) {
    out << "  H0[" << h.covariate << "] "
        << (h.rejected ? "rejected" : "retained") << " p=" << h.p_value;
  }
  if (report.combined_u) out << "  u_C=" << *report.combined_u;
  if (report.verdict) {
    out << "  verdict=" << (report.verdict->pass ? "PASS" : "FAIL");
    if (std::isfinite(report.verdict->margin_orders)) {
      out << " margin=" << report.verdict->margin_orders << " orders";
    }
  }
  if (!report.errors.empty()) out << "  errors=" << report.errors.size();
  out << "  (" << report.elapsed_ms << " ms)";
  return out.str();
}

ScannerValidation validate_scanner(const PipelineConfig& config,
                                   std::span<const MeasurementFrame> frames,
                                   const synth::GroundTruth* truth) {
  ScannerValidation result;

  const auto run_mode = [&](EvalMode mode, std::vector<WindowReport>& reports) {
    PipelineConfig mode_config = config;
    mode_config.mode = mode;
    PipelineOptions options;
    options.truth = mode == EvalMode::Conservation ? truth : nullptr;
    std::size_t next = 0;
    const FrameSource source = [&]() -> std::optional<MeasurementFrame> {
      if (next >= frames.size()) return std::nullopt;
      return frames[next++];
    };
    run_pipeline(mode_config, source,
                 [&reports](const WindowReport& r) { reports.push_back(r); },
                 options);
  };

  run_mode(EvalMode::Conservation, result.conservation_reports);
  run_mode(EvalMode::Baseline, result.baseline_reports);

  const auto mean_u = [](const std::vector<WindowReport>& reports,
                         std::optional<double>& relative) -> double {
    double sum = 0.0;
    double rel_sum = 0.0;
    std::size_t n = 0;
    bool all_relative = true;
    for (const auto& r : reports) {
      if (!r.pooled) continue;
      sum += r.pooled->u;
      if (r.pooled->relative) {
        rel_sum += *r.pooled->relative;
      } else {
        all_relative = false;
      }
      ++n;
    }
    if (n == 0) throw DataError("scanner validation produced no estimates");
    if (all_relative) relative = rel_sum / static_cast<double>(n);
    return sum / static_cast<double>(n);
  };

  result.conservation_u = mean_u(result.conservation_reports,
                                 result.conservation_relative);
  result.baseline_u = mean_u(result.baseline_reports, result.baseline_relative);
  result.windows = result.conservation_reports.size();
  result.conservation_smaller = result.conservation_u < result.baseline_u;
  return result;
}

}  // namespace cuq
