#pragma once

// Directed acyclic s-g graphs, unit flows and Markovian path sampling for the
// online shortest-path problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bobw/enumerate.hpp"
#include "bobw/error.hpp"
#include "bobw/random.hpp"

namespace bobw {

/// Raw description of a graph. "s" and "g" are reserved vertex names and
/// need not appear in `vertices`.
struct DagSpec {
  std::vector<std::string> vertices;
  std::vector<std::pair<std::string, std::string>> edges;
};

struct Edge {
  int tail;
  int head;
};

/// Validated DAG. Vertex 0 is the source, vertices 1..n are the internal
/// vertices in input order and vertex n+1 is the sink. Edge ids follow input
/// order.
class Dag {
 public:
  static Dag validate(const DagSpec& spec) {
    Dag dag;
    std::map<std::string, int> id;
    dag.names_.push_back("s");
    for (const auto& name : spec.vertices) {
      if (name == "s" || name == "g") continue;
      if (id.count(name)) throw Error(Errc::invalid_model, "duplicate vertex '" + name + "'");
      id[name] = static_cast<int>(dag.names_.size());
      dag.names_.push_back(name);
    }
    dag.n_ = static_cast<int>(dag.names_.size()) - 1;
    id["s"] = 0;
    id["g"] = dag.n_ + 1;
    dag.names_.push_back("g");

    for (const auto& [tail, head] : spec.edges) {
      auto t = id.find(tail);
      auto h = id.find(head);
      if (t == id.end() || h == id.end()) {
        throw Error(Errc::invalid_model, "edge " + tail + "->" + head + " references an undeclared vertex");
      }
      dag.edges_.push_back({t->second, h->second});
    }
    dag.finalize();
    return dag;
  }

  int internal_count() const { return n_; }
  int vertex_count() const { return n_ + 2; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int source() const { return 0; }
  int sink() const { return n_ + 1; }
  int max_path_len() const { return max_path_len_; }
  const Edge& edge(int e) const { return edges_[e]; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const int> out_edges(int v) const { return out_[v]; }
  std::span<const int> in_edges(int v) const { return in_[v]; }
  std::span<const int> topological_order() const { return topo_; }
  const std::string& name(int v) const { return names_[v]; }
  std::string edge_name(int e) const { return names_[edges_[e].tail] + "->" + names_[edges_[e].head]; }

  /// Longest s-g path edge count from each vertex to the sink.
  std::span<const int> levels_to_sink() const { return levels_to_sink_; }

 private:
  void finalize() {
    const int nv = vertex_count();
    out_.assign(nv, {});
    in_.assign(nv, {});
    for (int e = 0; e < edge_count(); ++e) {
      out_[edges_[e].tail].push_back(e);
      in_[edges_[e].head].push_back(e);
    }

    // Kahn's method.
    std::vector<int> indeg(nv);
    for (const auto& e : edges_) ++indeg[e.head];
    std::vector<int> ready;
    for (int v = nv - 1; v >= 0; --v) {
      if (indeg[v] == 0) ready.push_back(v);
    }
    topo_.clear();
    while (!ready.empty()) {
      int v = ready.back();
      ready.pop_back();
      topo_.push_back(v);
      for (int e : out_[v]) {
        if (--indeg[edges_[e].head] == 0) ready.push_back(edges_[e].head);
      }
    }
    if (static_cast<int>(topo_.size()) != nv) throw Error(Errc::cycle_detected, "graph contains a directed cycle");

    if (!in_[source()].empty()) throw Error(Errc::dangling_source_sink, "source has incoming edges");
    if (!out_[sink()].empty()) throw Error(Errc::dangling_source_sink, "sink has outgoing edges");
    if (out_[source()].empty()) throw Error(Errc::dangling_source_sink, "source has no outgoing edges");

    std::vector<char> from_source(nv, 0), to_sink(nv, 0);
    from_source[source()] = 1;
    for (int v : topo_) {
      if (!from_source[v]) continue;
      for (int e : out_[v]) from_source[edges_[e].head] = 1;
    }
    to_sink[sink()] = 1;
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      for (int e : out_[*it]) {
        if (to_sink[edges_[e].head]) to_sink[*it] = 1;
      }
    }
    for (int v = 0; v < nv; ++v) {
      if (!from_source[v] || !to_sink[v]) {
        throw Error(Errc::unreachable_vertex, "vertex '" + names_[v] + "' lies on no s-g path");
      }
    }

    levels_to_sink_.assign(nv, 0);
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      for (int e : out_[*it]) levels_to_sink_[*it] = std::max(levels_to_sink_[*it], levels_to_sink_[edges_[e].head] + 1);
    }
    max_path_len_ = levels_to_sink_[source()];
  }

  int n_ = 0;
  int max_path_len_ = 0;
  std::vector<std::string> names_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_, in_;
  std::vector<int> topo_;
  std::vector<int> levels_to_sink_;
};

/// s-g flow of value one, one entry per edge.
struct UnitFlow {
  std::vector<double> edge;
};

/// One s-g path: per-edge and per-vertex indicators plus the edge sequence.
struct PathVector {
  std::vector<std::uint8_t> edge_on;
  std::vector<std::uint8_t> vertex_on;
  std::vector<int> edges;

  bool uses_edge(int e) const { return edge_on[e] != 0; }
  bool visits(int v) const { return vertex_on[v] != 0; }
  bool operator==(const PathVector&) const = default;
};

inline PathVector make_path(const Dag& dag, std::span<const int> edge_sequence) {
  PathVector p;
  p.edge_on.assign(dag.edge_count(), 0);
  p.vertex_on.assign(dag.vertex_count(), 0);
  p.vertex_on[dag.source()] = 1;
  int at = dag.source();
  for (int e : edge_sequence) {
    if (dag.edge(e).tail != at) throw Error(Errc::precondition_violated, "edge sequence is not contiguous");
    p.edge_on[e] = 1;
    at = dag.edge(e).head;
    p.vertex_on[at] = 1;
  }
  if (at != dag.sink()) throw Error(Errc::precondition_violated, "edge sequence does not end at the sink");
  p.edges.assign(edge_sequence.begin(), edge_sequence.end());
  return p;
}

inline UnitFlow as_flow(const PathVector& p) {
  UnitFlow q;
  q.edge.assign(p.edge_on.begin(), p.edge_on.end());
  return q;
}

/// q(v) as outgoing flow; the sink reports its incoming flow.
inline double vertex_flow(const Dag& dag, std::span<const double> q, int v) {
  double total = 0.0;
  if (v == dag.sink()) {
    for (int e : dag.in_edges(v)) total += q[e];
  } else {
    for (int e : dag.out_edges(v)) total += q[e];
  }
  return total;
}

inline double vertex_flow(const Dag& dag, const UnitFlow& q, int v) { return vertex_flow(dag, q.edge, v); }

/// Max violation of conservation, source mass and the [0,1] box.
inline double flow_violation(const Dag& dag, std::span<const double> q) {
  double worst = std::abs(vertex_flow(dag, q, dag.source()) - 1.0);
  for (int v = 1; v <= dag.internal_count(); ++v) {
    double in = 0.0;
    for (int e : dag.in_edges(v)) in += q[e];
    worst = std::max(worst, std::abs(in - vertex_flow(dag, q, v)));
  }
  for (double x : q) worst = std::max({worst, -x, x - 1.0});
  return worst;
}

/// Markovian walk: at v pick e in out(v) with probability q(e)/q(v).
template <class Chooser>
PathVector sample_path(const Dag& dag, std::span<const double> q, Chooser&& choose) {
  std::vector<int> sequence;
  std::vector<double> weights;
  int at = dag.source();
  while (at != dag.sink()) {
    auto out = dag.out_edges(at);
    weights.clear();
    double total = 0.0;
    for (int e : out) {
      const double w = std::max(q[e], 0.0);
      weights.push_back(w);
      total += w;
    }
    if (!(total > 0.0)) throw Error(Errc::stuck_at_vertex, "no outgoing flow at vertex '" + dag.name(at) + "'");
    const int e = out[choose(std::span<const double>(weights), total)];
    sequence.push_back(e);
    at = dag.edge(e).head;
  }
  return make_path(dag, sequence);
}

inline PathVector sample_path(const Dag& dag, const UnitFlow& q, Rng& rng) {
  return sample_path(dag, q.edge, RngChooser(rng));
}

inline std::vector<PathVector> enumerate_paths(const Dag& dag, std::size_t cap = 1'000'000) {
  std::vector<PathVector> paths;
  std::vector<int> stack;
  auto recurse = [&](auto&& self, int v) -> void {
    if (v == dag.sink()) {
      if (paths.size() >= cap) throw Error(Errc::too_many_paths, "more than " + std::to_string(cap) + " paths");
      paths.push_back(make_path(dag, stack));
      return;
    }
    for (int e : dag.out_edges(v)) {
      stack.push_back(e);
      self(self, dag.edge(e).head);
      stack.pop_back();
    }
  };
  recurse(recurse, dag.source());
  return paths;
}

/// Probability that the Markovian sampler returns path p.
inline double path_probability(const Dag& dag, std::span<const double> q, const PathVector& p) {
  double prob = 1.0;
  for (int e : p.edges) {
    const double qv = vertex_flow(dag, q, dag.edge(e).tail);
    prob *= qv > 0.0 ? q[e] / qv : 0.0;
  }
  return prob;
}

/// Lexicographically smallest (by edge id) s-g path that passes through v.
inline std::vector<int> smallest_path_through(const Dag& dag, int v) {
  const int nv = dag.vertex_count();
  std::vector<char> reaches_v(nv, 0);
  reaches_v[v] = 1;
  auto topo = dag.topological_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    for (int e : dag.out_edges(*it)) {
      if (reaches_v[dag.edge(e).head]) reaches_v[*it] = 1;
    }
  }
  std::vector<int> sequence;
  int at = dag.source();
  while (at != v) {
    for (int e : dag.out_edges(at)) {
      if (reaches_v[dag.edge(e).head]) {
        sequence.push_back(e);
        at = dag.edge(e).head;
        break;
      }
    }
  }
  while (at != dag.sink()) {
    const int e = dag.out_edges(at).front();
    sequence.push_back(e);
    at = dag.edge(e).head;
  }
  return sequence;
}

/// q0 = (1/|V|) sum_v p_v, which puts at least 1/n flow on every internal vertex.
inline UnitFlow uniform_covering_flow(const Dag& dag) {
  UnitFlow q{std::vector<double>(dag.edge_count(), 0.0)};
  const int n = dag.internal_count();
  if (n == 0) {
    for (int e : smallest_path_through(dag, dag.sink())) q.edge[e] = 1.0;
    return q;
  }
  for (int v = 1; v <= n; ++v) {
    for (int e : smallest_path_through(dag, v)) q.edge[e] += 1.0;
  }
  for (double& x : q.edge) x /= n;
  return q;
}

}  // namespace bobw
