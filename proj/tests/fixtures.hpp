#pragma once

// Small hand-checkable instances shared by the unit tests.

#include <vector>

#include "bobw/graph.hpp"
#include "bobw/mdp.hpp"
#include "bobw/random.hpp"

namespace bobw::testing {

inline Dag parallel_edges() { return Dag::validate({{}, {{"s", "g"}, {"s", "g"}}}); }

// Edges: 0 s->v1, 1 s->v2, 2 v1->g, 3 v2->g.
inline Dag diamond() { return Dag::validate({{"v1", "v2"}, {{"s", "v1"}, {"s", "v2"}, {"v1", "g"}, {"v2", "g"}}}); }

inline Dag chain() { return Dag::validate({{"v"}, {{"s", "v"}, {"v", "g"}}}); }

// Layers of two vertices, complete edges between consecutive layers.
inline Dag layered_grid(int layers) {
  DagSpec spec;
  auto name = [](int k, int i) { return "v" + std::to_string(k) + "_" + std::to_string(i); };
  for (int k = 0; k < layers; ++k) {
    for (int i = 0; i < 2; ++i) spec.vertices.push_back(name(k, i));
  }
  for (int i = 0; i < 2; ++i) spec.edges.push_back({"s", name(0, i)});
  for (int k = 0; k + 1 < layers; ++k) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) spec.edges.push_back({name(k, i), name(k + 1, j)});
    }
  }
  for (int i = 0; i < 2; ++i) spec.edges.push_back({name(layers - 1, i), "g"});
  return Dag::validate(spec);
}

// S0 = {s0}, S1 = {sL}, two actions.
inline LayeredMdp single_state() { return LayeredMdp(MdpShape({1, 1}, 2), {1.0, 1.0}); }

// S1 = {x, y}; a0 leads to x, a1 to y; then the terminal.
inline LayeredMdp diamond_mdp() {
  return LayeredMdp(MdpShape({1, 2, 1}, 2), {1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0});
}

inline Policy random_interior(const MdpShape& shape, Rng& rng) {
  Policy pi{PairVector(shape.pair_count())};
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    double total = 0.0;
    for (int a = 0; a < shape.action_count(); ++a) total += pi.prob[shape.pair(s, a)] = 0.1 + uniform01(rng);
    for (int a = 0; a < shape.action_count(); ++a) pi.prob[shape.pair(s, a)] /= total;
  }
  return pi;
}

}  // namespace bobw::testing
