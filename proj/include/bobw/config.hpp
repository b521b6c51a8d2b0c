#pragma once

// JSON run configuration. Schema (all keys lower case):
//
//   instance:    {kind: "mdp", layers: [[names]...], actions: [names],
//                 transitions: [{state, action, next, prob}...]}
//              | {kind: "graph", vertices: [names], edges: [[tail, head]...]}
//   environment: {mode, mean, tables, schedule: [{first, last, table}],
//                 cycle: {period: n | "sqrt", tables: [ids]},
//                 corruption: {budget, table, first, last}, noise, band}
//   learner:     {id, beta, delta, tol, rho: "visited_state" | "chosen_action",
//                 sp_rho: "tail" | "edge"}
//   horizon:     T
//   seeds:       [ids] | {first, count}
//   output:      {dir, prefix, stride}
//
// Loss tables are arrays in pair order (s * |A| + a) or edge order, or
// objects keyed by state name then action name (MDP) or "tail->head"
// (graph).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "bobw/environments.hpp"
#include "bobw/error.hpp"
#include "bobw/graph.hpp"
#include "bobw/learners.hpp"
#include "bobw/mdp.hpp"

namespace bobw {

using Json = nlohmann::json;

using Instance = std::variant<Dag, LayeredMdp>;

struct OutputSpec {
  std::string dir = "out";
  std::string prefix = "run";
  long long stride = 1;  // keep every stride-th round in emitted series
};

struct RunConfig {
  Instance instance;
  EnvironmentSpec environment;
  LearnerId learner = LearnerId::mdp_kt_logbarrier;
  LearnerOptions options;
  long long horizon = 0;
  std::vector<std::uint64_t> seeds;
  OutputSpec output;
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& where, const std::string& what) {
  throw Error(Errc::config_error, where + ": " + what);
}

inline const Json& need(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) config_fail(where, "missing key '" + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const Json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const Json::exception& e) {
    config_fail(where, std::string("wrong type (") + e.what() + ")");
  }
}

inline Instance parse_instance(const Json& j) {
  const std::string where = "instance";
  const auto kind = get_as<std::string>(need(j, "kind", where), where + ".kind");
  if (kind == "mdp") {
    MdpSpec spec;
    spec.layers = get_as<std::vector<std::vector<std::string>>>(need(j, "layers", where), where + ".layers");
    spec.actions = get_as<std::vector<std::string>>(need(j, "actions", where), where + ".actions");
    const Json& tr = need(j, "transitions", where);
    if (!tr.is_array()) config_fail(where + ".transitions", "expected an array");
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const std::string w = where + ".transitions[" + std::to_string(i) + "]";
      spec.transitions.push_back({get_as<std::string>(need(tr[i], "state", w), w + ".state"),
                                  get_as<std::string>(need(tr[i], "action", w), w + ".action"),
                                  get_as<std::string>(need(tr[i], "next", w), w + ".next"),
                                  get_as<double>(need(tr[i], "prob", w), w + ".prob")});
    }
    try {
      return LayeredMdp::from_spec(spec);
    } catch (const Error& e) {
      config_fail(where, e.what());
    }
  }
  if (kind == "graph") {
    DagSpec spec;
    spec.vertices = get_as<std::vector<std::string>>(need(j, "vertices", where), where + ".vertices");
    const Json& edges = need(j, "edges", where);
    if (!edges.is_array()) config_fail(where + ".edges", "expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      auto pair = get_as<std::vector<std::string>>(edges[i], where + ".edges[" + std::to_string(i) + "]");
      if (pair.size() != 2) config_fail(where + ".edges[" + std::to_string(i) + "]", "expected [tail, head]");
      spec.edges.emplace_back(pair[0], pair[1]);
    }
    return Dag::validate(spec);
  }
  config_fail(where + ".kind", "expected \"mdp\" or \"graph\", got \"" + kind + "\"");
}

inline std::vector<double> parse_table(const Json& j, const Instance& inst, const std::string& where) {
  if (j.is_array()) return get_as<std::vector<double>>(j, where);
  if (!j.is_object()) config_fail(where, "expected an array or an object");
  if (const auto* mdp = std::get_if<LayeredMdp>(&inst)) {
    const MdpShape& shape = mdp->shape();
    std::vector<double> out(shape.pair_count(), 0.0);
    for (auto it = j.begin(); it != j.end(); ++it) {
      int s = -1;
      for (int x = 0; x < shape.nonterminal_count(); ++x) {
        if (shape.state_name(x) == it.key()) s = x;
      }
      if (s < 0) config_fail(where, "unknown state '" + it.key() + "'");
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
        int a = -1;
        for (int y = 0; y < shape.action_count(); ++y) {
          if (shape.action_name(y) == jt.key()) a = y;
        }
        if (a < 0) config_fail(where + "." + it.key(), "unknown action '" + jt.key() + "'");
        out[shape.pair(s, a)] = get_as<double>(jt.value(), where + "." + it.key() + "." + jt.key());
      }
    }
    return out;
  }
  const Dag& dag = std::get<Dag>(inst);
  std::vector<double> out(dag.edge_count(), 0.0);
  for (auto it = j.begin(); it != j.end(); ++it) {
    int found = -1;
    for (int e = 0; e < dag.edge_count(); ++e) {
      if (dag.edge_name(e) == it.key()) found = e;
    }
    if (found < 0) config_fail(where, "unknown edge '" + it.key() + "'");
    out[found] = get_as<double>(it.value(), where + "." + it.key());
  }
  return out;
}

inline EnvironmentSpec parse_environment(const Json& j, const Instance& inst, long long horizon) {
  const std::string where = "environment";
  EnvironmentSpec env;
  env.mode = parse_env_mode(get_as<std::string>(need(j, "mode", where), where + ".mode"));
  if (j.contains("mean")) env.mean = parse_table(j["mean"], inst, where + ".mean");
  if (j.contains("tables")) {
    const Json& t = j["tables"];
    if (!t.is_array()) config_fail(where + ".tables", "expected an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      env.tables.push_back(parse_table(t[i], inst, where + ".tables[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("schedule")) {
    const Json& s = j["schedule"];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string w = where + ".schedule[" + std::to_string(i) + "]";
      env.blocks.push_back({get_as<long long>(need(s[i], "first", w), w + ".first"),
                            get_as<long long>(need(s[i], "last", w), w + ".last"),
                            get_as<int>(need(s[i], "table", w), w + ".table")});
    }
  }
  if (j.contains("cycle")) {
    const Json& c = j["cycle"];
    const std::string w = where + ".cycle";
    const Json& period = need(c, "period", w);
    if (period.is_string()) {
      if (period.get<std::string>() != "sqrt") config_fail(w + ".period", "expected a count or \"sqrt\"");
      env.cycle.period = static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(horizon))));
    } else {
      env.cycle.period = get_as<long long>(period, w + ".period");
    }
    if (env.cycle.period < 1) config_fail(w + ".period", "must be at least 1");
    env.cycle.tables = get_as<std::vector<int>>(need(c, "tables", w), w + ".tables");
  }
  if (j.contains("corruption")) {
    const Json& c = j["corruption"];
    const std::string w = where + ".corruption";
    env.corruption.budget = get_as<double>(need(c, "budget", w), w + ".budget");
    env.corruption.table = get_as<int>(need(c, "table", w), w + ".table");
    if (c.contains("first")) env.corruption.first = get_as<long long>(c["first"], w + ".first");
    if (c.contains("last")) env.corruption.last = get_as<long long>(c["last"], w + ".last");
  }
  if (j.contains("noise")) env.noise = get_as<double>(j["noise"], where + ".noise");
  if (j.contains("band")) env.check_band = get_as<bool>(j["band"], where + ".band");
  if (env.mode != EnvMode::adversarial && env.mean.empty()) config_fail(where, "mode needs a mean loss table");
  return env;
}

inline std::vector<std::uint64_t> parse_seeds(const Json& j) {
  if (j.is_array()) return get_as<std::vector<std::uint64_t>>(j, "seeds");
  if (j.is_object()) {
    const auto first = get_as<std::uint64_t>(need(j, "first", "seeds"), "seeds.first");
    const auto count = get_as<std::uint64_t>(need(j, "count", "seeds"), "seeds.count");
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(first + i);
    return out;
  }
  config_fail("seeds", "expected an array or {first, count}");
}

}  // namespace detail

/// Parses a run configuration. Apart from JSON syntax errors every failure
/// is an Error carrying the offending field path.
inline RunConfig parse_config(const Json& j) {
  using namespace detail;
  RunConfig cfg;
  if (!j.is_object()) config_fail("config", "top level must be an object");
  cfg.instance = parse_instance(need(j, "instance", "config"));
  cfg.horizon = get_as<long long>(need(j, "horizon", "config"), "horizon");
  if (cfg.horizon < 0) config_fail("horizon", "must be >= 0");
  cfg.environment = parse_environment(need(j, "environment", "config"), cfg.instance, cfg.horizon);
  const Json& l = need(j, "learner", "config");
  cfg.learner = parse_learner(get_as<std::string>(need(l, "id", "learner"), "learner.id"));
  if (l.contains("beta")) cfg.options.beta = get_as<double>(l["beta"], "learner.beta");
  if (l.contains("delta")) cfg.options.delta = get_as<double>(l["delta"], "learner.delta");
  if (l.contains("tol")) cfg.options.tol = get_as<double>(l["tol"], "learner.tol");
  if (l.contains("rho")) {
    const auto r = get_as<std::string>(l["rho"], "learner.rho");
    if (r == "visited_state") cfg.options.mdp_rho = MdpRho::visited_state;
    else if (r == "chosen_action") cfg.options.mdp_rho = MdpRho::chosen_action;
    else config_fail("learner.rho", "expected \"visited_state\" or \"chosen_action\"");
  }
  if (l.contains("sp_rho")) {
    const auto r = get_as<std::string>(l["sp_rho"], "learner.sp_rho");
    if (r != "tail" && r != "edge") config_fail("learner.sp_rho", "expected \"tail\" or \"edge\"");
    cfg.options.sp_rho_tail = r == "tail";
  }
  if (is_graph_learner(cfg.learner) != std::holds_alternative<Dag>(cfg.instance)) {
    config_fail("learner.id", to_string(cfg.learner) + " does not match the instance kind");
  }
  cfg.seeds = j.contains("seeds") ? parse_seeds(j["seeds"]) : std::vector<std::uint64_t>{1};
  if (j.contains("output")) {
    const Json& o = j["output"];
    if (o.contains("dir")) cfg.output.dir = get_as<std::string>(o["dir"], "output.dir");
    if (o.contains("prefix")) cfg.output.prefix = get_as<std::string>(o["prefix"], "output.prefix");
    if (o.contains("stride")) cfg.output.stride = get_as<long long>(o["stride"], "output.stride");
    if (cfg.output.stride < 1) config_fail("output.stride", "must be at least 1");
  }
  // Builds the environment once so table checks surface at parse time.
  if (const auto* mdp = std::get_if<LayeredMdp>(&cfg.instance)) {
    (void)Environment::for_mdp(*mdp, cfg.environment);
  } else {
    (void)Environment::for_dag(std::get<Dag>(cfg.instance), cfg.environment);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::config_error, path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace bobw
