#pragma once

// JSON schemas for group specs, importance-loss configs and class graphs.
//
//   groups:     {"groups": [{"name": "G1", "classes": ["sky", ...]}, ...]}
//               least important group first.
//   importance: groups as above, plus "lambda", "alpha" and optional
//               "targets": [{"sky": 0, "car": 1, "road": null, ...}, ...]
//               where null masks a class; every class must be listed.
//   graph:      {"adjacency": [[...], ...], "directed": true}
//               or {"groups": [...]} to build edges from importance groups.

#include <string>
#include <vector>

#include "hrseg/gcn.hpp"
#include "hrseg/io.hpp"
#include "hrseg/losses.hpp"
#include "hrseg/metrics.hpp"

namespace hrseg {

inline GroupSpec group_spec_from_json(const Json& j, const ClassSpec& spec) {
  try {
    const Json& arr = j.is_array() ? j : j.at("groups");
    std::vector<Group> groups;
    for (const auto& g : arr) {
      Group out{g.at("name").get<std::string>(), {}};
      for (const auto& name : g.at("classes")) out.classes.push_back(spec.id_of(name.get<std::string>()));
      groups.push_back(std::move(out));
    }
    return GroupSpec(std::move(groups), spec.num_classes());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("group spec: ") + e.what());
  }
}

inline Json to_json(const GroupSpec& groups, const ClassSpec& spec) {
  Json arr = Json::array();
  for (const auto& g : groups.groups()) {
    Json names = Json::array();
    for (ClassId c : g.classes) names.push_back(spec.name(c));
    arr.push_back(Json{{"name", g.name}, {"classes", std::move(names)}});
  }
  return Json{{"groups", std::move(arr)}};
}

inline ImportanceConfig importance_config_from_json(const Json& j, const ClassSpec& spec) {
  GroupSpec groups = group_spec_from_json(j, spec);
  try {
    const double lambda = j.value("lambda", kDefaultImportanceLambda);
    const double alpha = j.value("alpha", kDefaultImportanceAlpha);
    if (!j.contains("targets")) return ImportanceConfig::with_default_targets(std::move(groups), lambda, alpha);
    std::vector<TargetVector> targets;
    for (const auto& level : j.at("targets")) {
      TargetVector t(spec.num_classes());
      for (std::size_t c = 0; c < spec.num_classes(); ++c) {
        const auto& name = spec.names()[c];
        if (!level.contains(name)) throw Error(ErrorCode::Parse, "target level lacks class '" + name + "'");
        const Json& v = level.at(name);
        if (v.is_null()) continue;
        const double m = v.get<double>();
        if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorCode::Parse, "target for '" + name + "' outside [0,1]");
        t[c] = m;
      }
      targets.push_back(std::move(t));
    }
    ImportanceConfig cfg{std::move(groups), std::move(targets), lambda, alpha};
    if (cfg.targets.size() != required_target_levels(cfg.groups.size())) {
      throw Error(ErrorCode::Parse, "expected " + std::to_string(required_target_levels(cfg.groups.size())) +
                                        " target levels, got " + std::to_string(cfg.targets.size()));
    }
    return cfg;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("importance config: ") + e.what());
  }
}

inline Json to_json(const ImportanceConfig& cfg, const ClassSpec& spec) {
  Json j = to_json(cfg.groups, spec);
  j["lambda"] = cfg.lambda;
  j["alpha"] = cfg.alpha;
  Json levels = Json::array();
  for (const auto& t : cfg.targets) {
    Json level = Json::object();
    for (std::size_t c = 0; c < t.size(); ++c) {
      level[spec.names()[c]] = t[c] ? Json(*t[c]) : Json(nullptr);
    }
    levels.push_back(std::move(level));
  }
  j["targets"] = std::move(levels);
  return j;
}

inline GraphSpec graph_from_json(const Json& j, const ClassSpec& spec) {
  try {
    if (j.contains("adjacency")) {
      const auto rows = j.at("adjacency").get<std::vector<std::vector<double>>>();
      const std::size_t n = rows.size();
      if (n != spec.num_classes()) {
        throw Error(ErrorCode::DimensionMismatch, "adjacency has " + std::to_string(n) + " rows for " +
                                                      std::to_string(spec.num_classes()) + " classes");
      }
      Matrix a(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) throw Error(ErrorCode::DimensionMismatch, "adjacency must be square");
        for (std::size_t k = 0; k < n; ++k) a(i, k) = rows[i][k];
      }
      return GraphSpec::from_adjacency(std::move(a), j.value("directed", true));
    }
    return build_graph(group_spec_from_json(j, spec));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("graph: ") + e.what());
  }
}

inline Json to_json(const GraphSpec& g) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < g.adjacency.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < g.adjacency.cols(); ++k) row.push_back(g.adjacency(i, k));
    rows.push_back(std::move(row));
  }
  return Json{{"directed", g.directed}, {"adjacency", std::move(rows)}};
}

}  // namespace hrseg
