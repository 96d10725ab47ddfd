#include "ojapca/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

namespace ojapca {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& message) {
  throw Error(Errc::config, "'" + key + "': " + message);
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const json& node, const std::string& key) {
  if (!node.is_object()) fail(key, "expected an object");
}

void reject_unknown(const json& node, const std::string& prefix, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : node.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(join(prefix, key), "unknown key");
  }
}

const json& required(const json& node, const std::string& prefix, const std::string& key) {
  const auto it = node.find(key);
  if (it == node.end()) fail(join(prefix, key), "missing required key");
  return *it;
}

double number(const json& node, const std::string& key) {
  if (!node.is_number()) fail(key, "expected a number");
  return node.get<double>();
}

std::int64_t integer(const json& node, const std::string& key) {
  if (!node.is_number_integer()) fail(key, "expected an integer");
  return node.get<std::int64_t>();
}

bool boolean(const json& node, const std::string& key) {
  if (!node.is_boolean()) fail(key, "expected true or false");
  return node.get<bool>();
}

std::string text(const json& node, const std::string& key) {
  if (!node.is_string()) fail(key, "expected a string");
  return node.get<std::string>();
}

std::vector<std::int64_t> integer_list(const json& node, const std::string& key) {
  if (!node.is_array()) fail(key, "expected an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& item : node) out.push_back(integer(item, key));
  return out;
}

ModelConfig parse_model(const json& node) {
  require_object(node, "model");
  reject_unknown(node, "model", {"spectrum", "family", "rotation"});
  ModelConfig model;

  const json& spectrum = required(node, "model", "spectrum");
  require_object(spectrum, "model.spectrum");
  const std::string kind = text(required(spectrum, "model.spectrum", "kind"), "model.spectrum.kind");
  try {
    model.spectrum.kind = parse_spectrum_kind(kind);
  } catch (const Error& e) {
    fail("model.spectrum.kind", e.what());
  }
  const char* first = "top";
  const char* second = "tail";
  switch (model.spectrum.kind) {
    case SpectrumSpec::Kind::two_block: break;
    case SpectrumSpec::Kind::geometric: first = "lambda1", second = "ratio"; break;
    case SpectrumSpec::Kind::linear: first = "lambda1", second = "lambdad"; break;
  }
  reject_unknown(spectrum, "model.spectrum", {"kind", first, second});
  model.spectrum.first = number(required(spectrum, "model.spectrum", first), std::string("model.spectrum.") + first);
  model.spectrum.second = number(required(spectrum, "model.spectrum", second), std::string("model.spectrum.") + second);

  if (const auto it = node.find("family"); it != node.end()) {
    try {
      model.family = parse_family(text(*it, "model.family"));
    } catch (const Error& e) {
      if (e.code() == Errc::config) throw;
      fail("model.family", e.what());
    }
  }
  if (const auto it = node.find("rotation"); it != node.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "identity") fail("model.rotation", "expected \"identity\" or an integer seed");
    } else if (it->is_number_unsigned() || it->is_number_integer()) {
      model.rotation_seed = it->get<std::uint64_t>();
    } else {
      fail("model.rotation", "expected \"identity\" or an integer seed");
    }
  }
  return model;
}

StepsizeRule parse_stepsize(const json& node) {
  require_object(node, "stepsize");
  reject_unknown(node, "stepsize", {"fixed", "optimal"});
  if (node.size() != 1) fail("stepsize", "expected exactly one of 'fixed' or 'optimal'");
  StepsizeRule rule;
  if (const auto it = node.find("fixed"); it != node.end()) {
    rule.kind = StepsizeRule::Kind::fixed;
    rule.beta = number(*it, "stepsize.fixed");
  } else {
    rule.kind = StepsizeRule::Kind::optimal;
    rule.n_star = integer(node.at("optimal"), "stepsize.optimal");
  }
  return rule;
}

BoundsConfig parse_bounds(const json& node) {
  require_object(node, "bounds");
  reject_unknown(node, "bounds", {"enabled", "diagnostics", "omega", "phi", "delta", "c_p"});
  BoundsConfig b;
  if (node.contains("enabled")) b.enabled = boolean(node["enabled"], "bounds.enabled");
  if (node.contains("diagnostics")) b.diagnostics = boolean(node["diagnostics"], "bounds.diagnostics");
  if (node.contains("omega")) b.omega = number(node["omega"], "bounds.omega");
  if (node.contains("phi")) b.phi = number(node["phi"], "bounds.phi");
  if (node.contains("delta") && !node["delta"].is_null()) b.delta = number(node["delta"], "bounds.delta");
  if (node.contains("c_p") && !node["c_p"].is_null()) b.c_p = number(node["c_p"], "bounds.c_p");
  return b;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  require_object(doc, "<root>");
  reject_unknown(doc, "", {"model", "p", "d", "stepsize", "n_steps", "snapshots", "trials", "base_seed", "kappa", "eps",
                           "bounds", "minimax_c", "output", "budgets"});
  ExperimentConfig c;
  c.model = parse_model(required(doc, "", "model"));
  c.p = integer(required(doc, "", "p"), "p");
  c.d = integer(required(doc, "", "d"), "d");
  c.stepsize = parse_stepsize(required(doc, "", "stepsize"));
  c.n_steps = integer(required(doc, "", "n_steps"), "n_steps");
  if (const auto it = doc.find("snapshots"); it != doc.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "geometric") fail("snapshots", "expected a list or \"geometric\"");
    } else {
      c.snapshots = integer_list(*it, "snapshots");
    }
  }
  if (doc.contains("trials")) c.trials = integer(doc["trials"], "trials");
  if (doc.contains("base_seed")) {
    const json& seed = doc["base_seed"];
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      fail("base_seed", "expected a non-negative integer");
    }
    c.base_seed = seed.get<std::uint64_t>();
  }
  if (doc.contains("kappa")) c.kappa = number(doc["kappa"], "kappa");
  if (doc.contains("eps")) c.eps = number(doc["eps"], "eps");
  if (doc.contains("bounds")) c.bounds = parse_bounds(doc["bounds"]);
  if (doc.contains("minimax_c")) c.minimax_c = number(doc["minimax_c"], "minimax_c");
  if (doc.contains("output")) c.output = text(doc["output"], "output");
  if (doc.contains("budgets")) c.budgets = integer_list(doc["budgets"], "budgets");
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.d < 2) fail("d", "must be >= 2");
  if (c.p < 1 || c.p >= c.d) fail("p", "must satisfy 1 <= p < d");
  try {
    make_spectrum(c.model.spectrum, c.d, c.p);
  } catch (const Error& e) {
    fail("model.spectrum", e.what());
  }
  if (c.stepsize.kind == StepsizeRule::Kind::fixed) {
    if (!(c.stepsize.beta > 0) || !std::isfinite(c.stepsize.beta)) fail("stepsize.fixed", "must be positive");
  } else if (c.stepsize.n_star < 2) {
    fail("stepsize.optimal", "budget must be >= 2");
  }
  if (c.n_steps < 0) fail("n_steps", "must be >= 0");
  for (std::size_t i = 0; i < c.snapshots.size(); ++i) {
    if (c.snapshots[i] < 1 || c.snapshots[i] > c.n_steps) fail("snapshots", "entries must lie in [1, n_steps]");
    if (i > 0 && c.snapshots[i] <= c.snapshots[i - 1]) fail("snapshots", "must be strictly increasing");
  }
  if (c.trials < 1) fail("trials", "must be >= 1");
  if (!(c.kappa > 1)) fail("kappa", "must exceed 1");
  if (!(c.eps > 0) || !(c.eps < 0.5)) fail("eps", "must lie in (0, 1/2)");
  if (!(c.bounds.phi > 0)) fail("bounds.phi", "must be positive");
  if (!(c.bounds.omega > 0)) fail("bounds.omega", "must be positive");
  if (c.bounds.delta && !(*c.bounds.delta > 0)) fail("bounds.delta", "must be positive");
  if (c.bounds.c_p && !(*c.bounds.c_p > 0)) fail("bounds.c_p", "must be positive");
  if (!(c.minimax_c > 0)) fail("minimax_c", "must be positive");
  if (c.output.empty()) fail("output", "must not be empty");
  for (std::size_t i = 0; i < c.budgets.size(); ++i) {
    if (c.budgets[i] < 100) fail("budgets", "each budget must be >= 100");
    if (i > 0 && c.budgets[i] <= c.budgets[i - 1]) fail("budgets", "must be sorted ascending");
  }
}

json config_to_json(const ExperimentConfig& c) {
  json spectrum{{"kind", std::string(to_string(c.model.spectrum.kind))}};
  switch (c.model.spectrum.kind) {
    case SpectrumSpec::Kind::two_block:
      spectrum["top"] = c.model.spectrum.first;
      spectrum["tail"] = c.model.spectrum.second;
      break;
    case SpectrumSpec::Kind::geometric:
      spectrum["lambda1"] = c.model.spectrum.first;
      spectrum["ratio"] = c.model.spectrum.second;
      break;
    case SpectrumSpec::Kind::linear:
      spectrum["lambda1"] = c.model.spectrum.first;
      spectrum["lambdad"] = c.model.spectrum.second;
      break;
  }
  json model{{"spectrum", spectrum}, {"family", std::string(to_string(c.model.family))}};
  if (c.model.rotation_seed) {
    model["rotation"] = *c.model.rotation_seed;
  } else {
    model["rotation"] = "identity";
  }
  json stepsize = c.stepsize.kind == StepsizeRule::Kind::fixed ? json{{"fixed", c.stepsize.beta}}
                                                               : json{{"optimal", c.stepsize.n_star}};
  json bounds{{"enabled", c.bounds.enabled}, {"diagnostics", c.bounds.diagnostics}, {"omega", c.bounds.omega},
              {"phi", c.bounds.phi}};
  bounds["delta"] = c.bounds.delta ? json(*c.bounds.delta) : json(nullptr);
  bounds["c_p"] = c.bounds.c_p ? json(*c.bounds.c_p) : json(nullptr);

  json doc{{"model", model},       {"p", c.p},         {"d", c.d},       {"stepsize", stepsize},
           {"n_steps", c.n_steps}, {"trials", c.trials}, {"base_seed", c.base_seed}, {"kappa", c.kappa},
           {"eps", c.eps},         {"bounds", bounds}, {"minimax_c", c.minimax_c}, {"output", c.output}};
  if (c.snapshots.empty()) {
    doc["snapshots"] = "geometric";
  } else {
    doc["snapshots"] = c.snapshots;
  }
  if (!c.budgets.empty()) doc["budgets"] = c.budgets;
  return doc;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail(assignment, "override must have the form KEY=VALUE");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::stringstream parts(path);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (keys[i].empty()) fail(path, "empty path component");
    if (!node->is_object()) fail(path, "cannot descend into a non-object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (keys.empty() || keys.back().empty()) fail(path, "empty path component");
  if (!node->is_object()) fail(path, "cannot descend into a non-object");
  (*node)[keys.back()] = std::move(value);
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open config file '" + path + "'");
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(Errc::config, "'" + path + "' is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

}  // namespace ojapca
