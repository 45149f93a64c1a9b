#pragma once

// Scenario configuration files: a sectioned key-value text format with
// sections [scenario] (optional generator), [nodes], [edges], [partition],
// [ms], [schemes] and [mc].  dB-valued fields carry a `_db` suffix.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cran/scenario.hpp"

namespace cran {

struct ConfigFile {
  // Section -> ordered (key, value) pairs; repeated keys allowed.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;

  bool has(const std::string& section) const { return sections.count(section) > 0; }

  std::vector<std::string> values(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    auto it = sections.find(section);
    if (it == sections.end()) return out;
    for (const auto& [k, v] : it->second)
      if (k == key) out.push_back(v);
    return out;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    const auto v = values(section, key);
    return v.empty() ? fallback : v.front();
  }

  std::string require(const std::string& section, const std::string& key) const {
    const auto v = values(section, key);
    if (v.empty())
      throw ValidationError("config is missing [" + section + "] " + key);
    return v.front();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

}  // namespace detail

inline ConfigFile parse_config(std::istream& in) {
  ConfigFile cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cpos = line.find_first_of("#;");
    if (cpos != std::string::npos) line = line.substr(0, cpos);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError("config line " + std::to_string(lineno) + ": bad section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.sections[section].emplace_back(detail::trim(line.substr(0, eq)),
                                       detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  return parse_config(in);
}

// Build a Scenario from a parsed config.  An optional [scenario] section
// generates the topology (type = hierarchical | multi_cu); otherwise the
// explicit [nodes]/[edges]/[partition] sections are used.
inline Scenario scenario_from_config(const ConfigFile& cfg) {
  Scenario sc;
  const int n_m = std::stoi(cfg.require("ms", "count"));
  const double p_tx_db = std::stod(cfg.get("ms", "p_tx_db", "0"));

  if (cfg.has("scenario")) {
    const std::string type = cfg.require("scenario", "type");
    if (type == "hierarchical") {
      const int n = std::stoi(cfg.require("scenario", "n"));
      const double c = std::stod(cfg.require("scenario", "c"));
      std::vector<int> off;
      for (const std::string& tok :
           detail::split_ws(cfg.get("scenario", "deactivated", "")))
        off.push_back(std::stoi(tok));
      sc = hierarchical_scenario(n, c, n_m, p_tx_db, off);
    } else if (type == "multi_cu") {
      const int n = std::stoi(cfg.require("scenario", "n"));
      const double c_ru = std::stod(cfg.require("scenario", "c_ru"));
      const double c_cu = std::stod(cfg.require("scenario", "c_cu"));
      const int n_m1 = std::stoi(cfg.require("scenario", "n_m1"));
      const int n_m2 = std::stoi(cfg.require("scenario", "n_m2"));
      if (n_m1 + n_m2 != n_m)
        throw ValidationError("[ms] count must equal n_m1 + n_m2");
      sc = multi_cu_scenario(n, c_ru, c_cu, n_m1, n_m2, p_tx_db);
    } else {
      throw ValidationError("unknown scenario type " + type);
    }
  } else {
    std::vector<Node> nodes;
    for (const std::string& v : cfg.values("nodes", "node")) {
      const auto toks = detail::split_ws(v);
      if (toks.size() != 3) throw ValidationError("node entries are: id kind antennas");
      NodeKind kind;
      if (toks[1] == "RU")
        kind = NodeKind::RU;
      else if (toks[1] == "CU")
        kind = NodeKind::CU;
      else
        throw ValidationError("unknown node kind " + toks[1]);
      nodes.push_back({std::stoi(toks[0]), kind, std::stoi(toks[2]), false});
    }
    std::vector<Edge> edges;
    for (const std::string& v : cfg.values("edges", "edge")) {
      const auto toks = detail::split_ws(v);
      if (toks.size() != 3) throw ValidationError("edge entries are: tail head capacity");
      edges.push_back({std::stoi(toks[0]), std::stoi(toks[1]), std::stod(toks[2])});
    }
    sc.topology = Topology(nodes, edges);
    RoutingPartition part;
    for (const std::string& v : cfg.values("partition", "layer")) {
      std::vector<int> ids;
      for (const std::string& tok : detail::split_ws(v)) ids.push_back(std::stoi(tok));
      part.layers.push_back(std::move(ids));
    }
    sc.partition = part;
    sc.num_ms = n_m;
    sc.p_tx = db_to_linear(p_tx_db);
    for (const Edge& e : sc.topology.edges()) sc.edge_capacity.push_back(e.capacity);
  }

  sc.num_ms = n_m;
  sc.p_tx = db_to_linear(p_tx_db);
  sc.schemes.clear();
  for (const std::string& v : cfg.values("schemes", "scheme")) sc.schemes.push_back(parse_scheme(v));
  sc.trials = std::stoi(cfg.get("mc", "trials", "1"));
  sc.seed = static_cast<std::uint64_t>(std::stoull(cfg.get("mc", "seed", "0")));
  sc.delay_t = std::stod(cfg.get("mc", "delay_t", "0"));
  return sc;
}

// Re-generate a scenario with one named parameter overridden (sweeps).
inline Scenario scenario_with_param(const ConfigFile& cfg, const std::string& param,
                                    const std::string& value) {
  ConfigFile mod = cfg;
  auto set = [&](const std::string& section, const std::string& key) {
    auto& entries = mod.sections[section];
    for (auto& [k, v] : entries) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries.emplace_back(key, value);
  };
  if (param == "p_tx_db") {
    set("ms", "p_tx_db");
  } else if (param == "trials") {
    set("mc", "trials");
  } else if (cfg.has("scenario") && (param == "n" || param == "c" || param == "c_ru" ||
                                     param == "c_cu" || param == "n_m1" || param == "n_m2")) {
    set("scenario", param);
  } else if (param == "c") {
    // Explicit topology: apply a uniform capacity to every edge.
    auto& entries = mod.sections["edges"];
    for (auto& [k, v] : entries) {
      if (k != "edge") continue;
      auto toks = detail::split_ws(v);
      if (toks.size() == 3) v = toks[0] + " " + toks[1] + " " + value;
    }
  } else {
    throw ValidationError("unsupported sweep parameter " + param);
  }
  return scenario_from_config(mod);
}

}  // namespace cran
