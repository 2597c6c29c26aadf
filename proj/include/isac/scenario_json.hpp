#pragma once

// JSON scenario documents.
//
//   {
//     "n_subcarriers": 1024, "n_symbols": 1,
//     "subcarrier_spacing_hz": 15000,
//     "radar_noise_var": 1.0, "comm_noise_var": 1.0,
//     "total_power": 1024, "per_entry_power_cap": 4.0,   (cap optional)
//     "comm_channel": [[1, 0], ...],                     (optional, default flat 1+0j)
//     "targets": [{"mean": [0, 0, 1e-6], "cov": [[..],[..],[..]]}]
//   }
//
// Unknown keys (e.g. "notes") are ignored.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "isac/errors.hpp"
#include "isac/scenario.hpp"

namespace isac {

namespace detail {

inline int line_of_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline double get_number(const nlohmann::json& obj, const std::string& key,
                         const std::string& where) {
  if (!obj.contains(key)) throw ScenarioError(where, "missing required key");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ScenarioError(where, "expected a number");
  return v.get<double>();
}

inline int get_positive_int(const nlohmann::json& obj, const std::string& key) {
  if (!obj.contains(key)) throw ScenarioError(key, "missing required key");
  const auto& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ScenarioError(key, "expected an integer");
  const auto value = v.get<long long>();
  if (value < 1 || value > (1LL << 24)) throw ScenarioError(key, "must be a positive integer");
  return static_cast<int>(value);
}

inline Eigen::Vector3d get_vec3(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ScenarioError(where, "expected an array of 3 numbers");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ScenarioError(where, "expected an array of 3 numbers");
    out(i) = v[i].get<double>();
  }
  return out;
}

}  // namespace detail

/// Parses and validates a scenario document. Throws ScenarioError.
inline ScenarioConfig load_scenario(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError("", "parse error at line " +
                                std::to_string(detail::line_of_offset(text, e.byte)) + ": " +
                                e.what());
  }
  if (!doc.is_object()) throw ScenarioError("", "top-level value must be an object");

  ScenarioConfig cfg;
  cfg.n_subcarriers = detail::get_positive_int(doc, "n_subcarriers");
  cfg.n_symbols = detail::get_positive_int(doc, "n_symbols");
  cfg.subcarrier_spacing_hz =
      detail::get_number(doc, "subcarrier_spacing_hz", "subcarrier_spacing_hz");
  cfg.radar_noise_var = detail::get_number(doc, "radar_noise_var", "radar_noise_var");
  cfg.comm_noise_var = detail::get_number(doc, "comm_noise_var", "comm_noise_var");
  cfg.total_power = detail::get_number(doc, "total_power", "total_power");
  cfg.per_entry_power_cap =
      doc.contains("per_entry_power_cap") && !doc["per_entry_power_cap"].is_null()
          ? detail::get_number(doc, "per_entry_power_cap", "per_entry_power_cap")
          : default_power_cap(cfg.total_power, cfg.n_subcarriers, cfg.n_symbols);

  if (doc.contains("comm_channel") && !doc["comm_channel"].is_null()) {
    const auto& ch = doc["comm_channel"];
    if (!ch.is_array()) throw ScenarioError("comm_channel", "expected a list of [re, im] pairs");
    for (std::size_t n = 0; n < ch.size(); ++n) {
      const auto& e = ch[n];
      const std::string where = "comm_channel[" + std::to_string(n) + "]";
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ScenarioError(where, "expected [re, im]");
      cfg.comm_channel.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
  } else {
    cfg.comm_channel.assign(static_cast<std::size_t>(cfg.n_subcarriers), cdouble(1.0, 0.0));
  }

  if (!doc.contains("targets") || !doc["targets"].is_array())
    throw ScenarioError("targets", "expected a list of {mean, cov} objects");
  const auto& targets = doc["targets"];
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::string where = "targets[" + std::to_string(k) + "]";
    const auto& t = targets[k];
    if (!t.is_object() || !t.contains("mean") || !t.contains("cov"))
      throw ScenarioError(where, "expected an object with mean and cov");
    TargetPrior prior;
    prior.mean = detail::get_vec3(t["mean"], where + ".mean");
    const auto& cov = t["cov"];
    if (!cov.is_array() || cov.size() != 3) throw ScenarioError(where + ".cov", "expected 3x3");
    for (int r = 0; r < 3; ++r)
      prior.covariance.row(r) = detail::get_vec3(cov[r], where + ".cov").transpose();
    cfg.priors.push_back(prior);
  }

  validate(cfg);
  return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("scenario", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

inline nlohmann::json to_json(const ScenarioConfig& cfg) {
  nlohmann::json doc;
  doc["n_subcarriers"] = cfg.n_subcarriers;
  doc["n_symbols"] = cfg.n_symbols;
  doc["subcarrier_spacing_hz"] = cfg.subcarrier_spacing_hz;
  doc["radar_noise_var"] = cfg.radar_noise_var;
  doc["comm_noise_var"] = cfg.comm_noise_var;
  doc["total_power"] = cfg.total_power;
  doc["per_entry_power_cap"] = cfg.per_entry_power_cap;
  auto channel = nlohmann::json::array();
  for (const cdouble& h : cfg.comm_channel) channel.push_back({h.real(), h.imag()});
  doc["comm_channel"] = channel;
  auto targets = nlohmann::json::array();
  for (const auto& prior : cfg.priors) {
    nlohmann::json t;
    t["mean"] = {prior.mean(0), prior.mean(1), prior.mean(2)};
    auto cov = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
      cov.push_back({prior.covariance(r, 0), prior.covariance(r, 1), prior.covariance(r, 2)});
    t["cov"] = cov;
    targets.push_back(t);
  }
  doc["targets"] = targets;
  return doc;
}

inline std::string dump_scenario(const ScenarioConfig& cfg) { return to_json(cfg).dump(2); }

}  // namespace isac
