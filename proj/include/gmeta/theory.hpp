#pragma once

// Node influence and graph influence loss in the linear GCN regime
// (identity activation and weights, scalar features), with executable
// versions of the decay bounds.
//
// Influence of v on u after L layers is (Â^L)_{uv} with Â = D^-1 A. Every
// length-L walk u = w_0, ..., w_L = v contributes prod_{i<L} 1/deg(w_i), so
//   I_{u,v} <= P * max_walk prod 1/deg = P / D^L <= P / D^{d(u,v)}
// where P counts the walks and D is the smallest geometric-mean degree of
// the first L walk nodes. Both P and D come from dynamic programs over walk
// length, not path enumeration.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmeta/graph.hpp"

namespace gmeta::theory {

/// Largest finite eccentricity over all nodes (0 for an edgeless graph).
std::size_t diameter(const Graph& g);
/// diameter + 2: enough layers for every reachable node to contribute.
int default_layers(const Graph& g);

/// Row u of Â^L. Zero-degree rows of Â are zero, so an isolated u has no
/// influence at L >= 1.
std::vector<double> influence_row(const Graph& g, NodeId u, int layers);
double node_influence(const Graph& g, NodeId u, NodeId v, int layers);

/// Walk statistics from u after exactly `layers` steps, per end node.
struct WalkStats {
  std::vector<double> count;           // number of walks
  std::vector<double> min_log_degree;  // min over walks of sum log deg(w_i), i < L; +inf if none
};
WalkStats walk_stats(const Graph& g, NodeId u, int layers);

struct PairBound {
  NodeId v = 0;
  std::size_t distance = kUnreachable;
  double influence = 0.0;
  double walks = 0.0;        // C
  double mean_degree = 0.0;  // D, 0 when no walk exists
  double tight_bound = 0.0;  // C / D^L
  double bound = 0.0;        // C / D^{d(u,v)}
  bool holds = true;
};

struct DecayCheck {
  NodeId u = 0;
  int layers = 0;
  bool isolated = false;
  bool passed = true;
  std::vector<PairBound> rows;
};

/// Node-influence bound for every v.
DecayCheck influence_decay_check(const Graph& g, NodeId u, int layers);

/// R_h(u): influence on u from nodes farther than h hops.
double influence_loss(const Graph& g, NodeId u, int h, int layers);

struct LossRow {
  int h = 0;
  double subgraph_influence = 0.0;  // I_{S_u}(u)
  double loss = 0.0;                // R_h(u)
  std::size_t outside = 0;          // |V \ V^u|
  std::optional<NodeId> argmax;     // most influential outside node
  double constant = 0.0;            // outside * C_v*
  double mean_degree = 0.0;         // D for v*
  double bound = 0.0;               // constant / D^{h+1}
  bool holds = true;
};

struct InfluenceReport {
  NodeId u = 0;
  int layers = 0;
  bool isolated = false;
  double graph_influence = 0.0;  // I_G(u)
  DecayCheck decay;
  std::vector<LossRow> losses;   // h = 0 .. max_h
  bool passed = true;
};

/// Both checks for one node; max_h defaults to the diameter.
InfluenceReport influence_report(const Graph& g, NodeId u, std::optional<int> layers = {},
                                 std::optional<int> max_h = {});

nlohmann::json to_json(const InfluenceReport& r);

/// Relative slack allowed when comparing a value with its bound.
inline constexpr double kBoundTolerance = 1e-12;

}  // namespace gmeta::theory
