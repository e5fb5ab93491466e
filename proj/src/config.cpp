#include "cuq/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "cuq/errors.hpp"

namespace cuq {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError(where + ": missing required key '" + key + "'");
  }
  return *it;
}

std::vector<std::optional<double>> optional_list(const json& j) {
  std::vector<std::optional<double>> out;
  for (const auto& v : j) {
    if (v.is_null()) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(v.get<double>());
    }
  }
  return out;
}

ConservationSpec spec_from_json(const json& j, ReferencePolicy default_policy) {
  ConservationSpec spec;
  spec.id = require(j, "id", "spec").get<std::string>();
  const std::string where = "spec '" + spec.id + "'";
  const std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "joint_pair_distance") {
    JointPairDistance jp;
    for (const auto& pair : require(j, "pairs", where)) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ConfigError(where + ": pairs must be [j,k] arrays");
      }
      jp.pairs.emplace_back(pair[0].get<int>(), pair[1].get<int>());
    }
    if (j.contains("reference") && !j["reference"].is_null()) {
      jp.reference = optional_list(j["reference"]);
    }
    spec.kind = std::move(jp);
  } else if (kind == "static_scan") {
    StaticScan scan;
    if (j.contains("reference") && !j["reference"].is_null()) {
      scan.reference = optional_list(j["reference"]);
    }
    spec.kind = std::move(scan);
  } else if (kind == "generic_constant") {
    GenericConstant gc;
    gc.channel = require(j, "channel", where).get<std::string>();
    if (j.contains("reference") && !j["reference"].is_null()) {
      gc.reference = j["reference"].get<double>();
    }
    spec.kind = std::move(gc);
  } else {
    throw ConfigError(where + ": unknown kind '" + kind + "'");
  }
  spec.reference_policy =
      j.contains("reference_policy")
          ? reference_policy_from_string(j["reference_policy"].get<std::string>())
          : default_policy;
  return spec;
}

nlohmann::ordered_json spec_to_json(const ConservationSpec& spec) {
  nlohmann::ordered_json j;
  j["id"] = spec.id;
  auto refs_to_json = [](const std::vector<std::optional<double>>& refs) {
    auto list = nlohmann::ordered_json::array();
    for (const auto& r : refs) {
      if (r) {
        list.push_back(*r);
      } else {
        list.push_back(nullptr);
      }
    }
    return list;
  };
  if (const auto* jp = std::get_if<JointPairDistance>(&spec.kind)) {
    j["kind"] = "joint_pair_distance";
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& [a, b] : jp->pairs) {
      pairs.push_back(nlohmann::ordered_json::array({a, b}));
    }
    j["pairs"] = pairs;
    if (!jp->reference.empty()) j["reference"] = refs_to_json(jp->reference);
  } else if (const auto* scan = std::get_if<StaticScan>(&spec.kind)) {
    j["kind"] = "static_scan";
    if (!scan->reference.empty()) j["reference"] = refs_to_json(scan->reference);
  } else {
    const auto& gc = std::get<GenericConstant>(spec.kind);
    j["kind"] = "generic_constant";
    j["channel"] = gc.channel;
    if (gc.reference) j["reference"] = *gc.reference;
  }
  j["reference_policy"] = to_string(spec.reference_policy);
  return j;
}

TypeBEntry type_b_from_json(const json& j) {
  TypeBEntry entry;
  entry.spec.source_id = require(j, "source_id", "type_b").get<std::string>();
  const std::string where = "type_b '" + entry.spec.source_id + "'";
  const std::string model = require(j, "model", where).get<std::string>();
  if (model == "constant_absolute") {
    entry.spec.model = ConstantAbsolute{require(j, "u", where).get<double>()};
  } else if (model == "constant_relative") {
    entry.spec.model =
        ConstantRelative{require(j, "fraction", where).get<double>()};
  } else if (model == "linear_in_range") {
    entry.spec.model = LinearInRange{require(j, "slope", where).get<double>(),
                                     require(j, "intercept", where).get<double>()};
  } else {
    throw ConfigError(where + ": unknown model '" + model + "'");
  }
  if (j.contains("valid_range") && !j["valid_range"].is_null()) {
    const auto& r = j["valid_range"];
    if (!r.is_array() || r.size() != 2) {
      throw ConfigError(where + ": valid_range must be [lo, hi]");
    }
    entry.spec.valid_range = std::make_pair(r[0].get<double>(), r[1].get<double>());
  }
  entry.sensitivity = j.value("sensitivity", 1.0);
  return entry;
}

nlohmann::ordered_json type_b_to_json(const TypeBEntry& entry) {
  nlohmann::ordered_json j;
  j["source_id"] = entry.spec.source_id;
  if (const auto* abs = std::get_if<ConstantAbsolute>(&entry.spec.model)) {
    j["model"] = "constant_absolute";
    j["u"] = abs->u;
  } else if (const auto* rel = std::get_if<ConstantRelative>(&entry.spec.model)) {
    j["model"] = "constant_relative";
    j["fraction"] = rel->fraction;
  } else {
    const auto& lin = std::get<LinearInRange>(entry.spec.model);
    j["model"] = "linear_in_range";
    j["slope"] = lin.slope;
    j["intercept"] = lin.intercept;
  }
  if (entry.spec.valid_range) {
    j["valid_range"] = nlohmann::ordered_json::array(
        {entry.spec.valid_range->first, entry.spec.valid_range->second});
  }
  j["sensitivity"] = entry.sensitivity;
  return j;
}

CovariateConfig covariate_from_json(const json& j) {
  CovariateConfig cov;
  cov.name = require(j, "name", "covariate").get<std::string>();
  const std::string where = "covariate '" + cov.name + "'";
  const std::string source = require(j, "source", where).get<std::string>();
  if (source == "joint_velocity") {
    cov.source = CovariateConfig::Source::JointVelocity;
    cov.joint_id = require(j, "joint_id", where).get<int>();
  } else if (source == "channel") {
    cov.source = CovariateConfig::Source::Channel;
    cov.channel = require(j, "channel", where).get<std::string>();
  } else {
    throw ConfigError(where + ": unknown source '" + source + "'");
  }
  return cov;
}

}  // namespace

void PipelineConfig::validate() const {
  if (window_size < 2) throw ConfigError("window_size must be >= 2");
  if (bootstrap.resamples < 1) throw ConfigError("bootstrap resamples must be >= 1");
  if (!(bootstrap.confidence > 0.0 && bootstrap.confidence < 1.0)) {
    throw ConfigError("confidence must lie in (0,1)");
  }
  if (!(hypothesis.alpha > 0.0 && hypothesis.alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0,1)");
  }
  if (hypothesis.permutations < 1) throw ConfigError("permutations must be >= 1");
  if (specs.empty()) throw ConfigError("at least one conservation spec required");
  std::set<std::string> ids;
  for (const auto& spec : specs) {
    spec.validate();
    if (!ids.insert(spec.id).second) {
      throw ConfigError("duplicate spec id '" + spec.id + "'");
    }
  }
  std::set<std::string> cov_names;
  for (const auto& cov : hypothesis.covariates) {
    if (cov.name.empty()) throw ConfigError("covariate needs a name");
    if (!cov_names.insert(cov.name).second) {
      throw ConfigError("duplicate covariate '" + cov.name + "'");
    }
    if (cov.source == CovariateConfig::Source::JointVelocity &&
        (cov.joint_id < 0 || cov.joint_id >= kBody25Joints)) {
      throw ConfigError("covariate '" + cov.name + "': joint id out of range");
    }
    if (cov.source == CovariateConfig::Source::Channel && cov.channel.empty()) {
      throw ConfigError("covariate '" + cov.name + "': channel name required");
    }
  }
  if (reference_manual_relative && !(*reference_manual_relative >= 0.0)) {
    throw ConfigError("reference manual_relative must be >= 0");
  }
  if (!(pair_attribution_factor > 0.0)) {
    throw ConfigError("pair_attribution_factor must be > 0");
  }
  if (risk) risk->validate();
  if (!(safety_limit.lambda_per_hour > 0.0)) {
    throw ConfigError("safety limit lambda must be > 0");
  }
  if (operating_range_m && !(*operating_range_m > 0.0)) {
    throw ConfigError("operating_range_m must be > 0");
  }
  if (!(max_range_m > 0.0)) throw ConfigError("max_range_m must be > 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig config;
  config.window_size = j.value("window_size", std::size_t{10});

  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    config.bootstrap.resamples = b.value("resamples", std::size_t{10000});
    config.bootstrap.seed = b.value("seed", std::uint64_t{0});
    config.bootstrap.confidence = b.value("confidence", 0.95);
  }
  if (j.contains("hypothesis")) {
    const auto& h = j["hypothesis"];
    config.hypothesis.alpha = h.value("alpha", 0.05);
    config.hypothesis.permutations = h.value("permutations", std::size_t{2000});
    if (h.contains("covariates")) {
      for (const auto& c : h["covariates"]) {
        config.hypothesis.covariates.push_back(covariate_from_json(c));
      }
    }
  }
  if (j.contains("reference")) {
    const auto& r = j["reference"];
    if (r.contains("policy")) {
      config.reference_policy =
          reference_policy_from_string(r["policy"].get<std::string>());
    }
    if (r.contains("manual_relative") && !r["manual_relative"].is_null()) {
      config.reference_manual_relative = r["manual_relative"].get<double>();
    }
  }
  for (const auto& s : require(j, "specs", "config")) {
    config.specs.push_back(spec_from_json(s, config.reference_policy));
  }
  if (j.contains("type_b")) {
    for (const auto& t : j["type_b"]) {
      config.type_b.push_back(type_b_from_json(t));
    }
  }
  if (j.contains("propagation")) {
    const auto& p = j["propagation"];
    if (p.contains("mode")) {
      config.propagation_mode =
          propagation_mode_from_string(p["mode"].get<std::string>());
    }
    if (p.contains("attribute")) {
      const std::string attr = p["attribute"].get<std::string>();
      if (attr == "measured") {
        config.attribute = AttributeKind::Measured;
      } else if (attr == "joint_position") {
        config.attribute = AttributeKind::JointPosition;
      } else {
        throw ConfigError("unknown attribute '" + attr + "'");
      }
    }
    config.pair_attribution_factor =
        p.value("pair_attribution_factor", config.pair_attribution_factor);
  }
  if (j.contains("risk") && !j["risk"].is_null()) {
    RiskModel risk;
    const auto& r = j["risk"];
    risk.l_bio = require(r, "l_bio", "risk").get<double>();
    risk.severity_constant = r.value("severity_constant", 1.0);
    config.risk = risk;
  }
  if (j.contains("safety_limit")) {
    const auto& s = j["safety_limit"];
    config.safety_limit.lambda_per_hour =
        s.value("lambda_per_hour", config.safety_limit.lambda_per_hour);
    config.safety_limit.label = s.value("label", config.safety_limit.label);
  }
  if (j.contains("operating_range_m") && !j["operating_range_m"].is_null()) {
    config.operating_range_m = j["operating_range_m"].get<double>();
  }
  config.max_range_m = j.value("max_range_m", kDefaultMaxRangeM);
  config.threads = j.value("threads", 1);
  if (j.contains("mode")) {
    const std::string mode = j["mode"].get<std::string>();
    if (mode == "conservation") {
      config.mode = EvalMode::Conservation;
    } else if (mode == "baseline") {
      config.mode = EvalMode::Baseline;
    } else {
      throw ConfigError("unknown mode '" + mode + "'");
    }
  }
  config.validate();
  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const PipelineConfig& config) {
  nlohmann::ordered_json j;
  j["window_size"] = config.window_size;
  j["bootstrap"] = {{"resamples", config.bootstrap.resamples},
                    {"seed", config.bootstrap.seed},
                    {"confidence", config.bootstrap.confidence}};
  nlohmann::ordered_json h;
  h["alpha"] = config.hypothesis.alpha;
  h["permutations"] = config.hypothesis.permutations;
  h["covariates"] = nlohmann::ordered_json::array();
  for (const auto& cov : config.hypothesis.covariates) {
    nlohmann::ordered_json c;
    c["name"] = cov.name;
    if (cov.source == CovariateConfig::Source::JointVelocity) {
      c["source"] = "joint_velocity";
      c["joint_id"] = cov.joint_id;
    } else {
      c["source"] = "channel";
      c["channel"] = cov.channel;
    }
    h["covariates"].push_back(c);
  }
  j["hypothesis"] = h;
  nlohmann::ordered_json ref;
  ref["policy"] = to_string(config.reference_policy);
  if (config.reference_manual_relative) {
    ref["manual_relative"] = *config.reference_manual_relative;
  }
  j["reference"] = ref;
  j["specs"] = nlohmann::ordered_json::array();
  for (const auto& spec : config.specs) j["specs"].push_back(spec_to_json(spec));
  j["type_b"] = nlohmann::ordered_json::array();
  for (const auto& entry : config.type_b) {
    j["type_b"].push_back(type_b_to_json(entry));
  }
  j["propagation"] = {
      {"mode", to_string(config.propagation_mode)},
      {"attribute",
       config.attribute == AttributeKind::Measured ? "measured" : "joint_position"},
      {"pair_attribution_factor", config.pair_attribution_factor}};
  if (config.risk) {
    j["risk"] = {{"l_bio", config.risk->l_bio},
                 {"severity_constant", config.risk->severity_constant}};
  }
  j["safety_limit"] = {{"lambda_per_hour", config.safety_limit.lambda_per_hour},
                       {"label", config.safety_limit.label}};
  if (config.operating_range_m) j["operating_range_m"] = *config.operating_range_m;
  j["max_range_m"] = config.max_range_m;
  j["threads"] = config.threads;
  j["mode"] = config.mode == EvalMode::Conservation ? "conservation" : "baseline";
  return j;
}

}  // namespace cuq
