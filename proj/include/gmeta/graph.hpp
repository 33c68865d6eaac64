#pragma once

// Undirected, unweighted graphs and the local-subgraph machinery built on
// them: h-hop extraction around a node or a node pair, BFS distances,
// degree features and negative-edge sampling for link prediction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gmeta/random.hpp"
#include "gmeta/tensor.hpp"

namespace gmeta {

using NodeId = std::uint32_t;
using LabelId = std::int32_t;
inline constexpr LabelId kUnlabeled = -1;
inline constexpr std::size_t kNoCap = std::numeric_limits<std::size_t>::max();
/// Default subgraph size limit; larger neighbourhoods are uniformly subsampled.
inline constexpr std::size_t kDefaultSubgraphCap = 1000;

struct Edge {
  NodeId u;
  NodeId v;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable adjacency structure with optional features and labels.
/// Edges are stored normalized (u < v); neighbour lists are sorted.
class Graph {
 public:
  Graph() = default;
  /// Throws std::invalid_argument on out-of-range endpoints, self-loops,
  /// duplicate edges, or feature/label row-count mismatches.
  Graph(std::size_t node_count, std::vector<Edge> edges, std::optional<Tensor> features = {},
        std::vector<LabelId> labels = {});

  std::size_t node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const NodeId> neighbors(NodeId u) const {
    return {adjacency_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
  bool has_edge(NodeId u, NodeId v) const;

  bool has_features() const { return features_.has_value(); }
  const Tensor& features() const;
  std::size_t feature_dim() const { return features_ ? features_->cols() : 0; }

  bool has_labels() const { return !labels_.empty(); }
  std::span<const LabelId> labels() const { return labels_; }
  LabelId label(NodeId u) const { return labels_.empty() ? kUnlabeled : labels_[u]; }

  Graph with_features(Tensor features) const;
  Graph with_labels(std::vector<LabelId> labels) const;

 private:
  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
  std::optional<Tensor> features_;
  std::vector<LabelId> labels_;
};

/// Induced local subgraph around a centroid (or a node pair for links).
struct Subgraph {
  Graph graph;
  NodeId centroid_local = 0;
  std::vector<NodeId> global_ids;  // local -> global
  int hop = 0;
  std::optional<NodeId> pair_local;
};

void check_node(const Graph& g, NodeId u);

/// BFS distances from `source`; unreachable nodes hold kUnreachable.
inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();
std::vector<std::size_t> bfs_distances(const Graph& g, NodeId source,
                                       std::size_t max_depth = kUnreachable);

/// Hop distance, or std::nullopt when the nodes are in different components.
std::optional<std::size_t> shortest_path_dist(const Graph& g, NodeId u, NodeId v);

/// Node-induced subgraph on {v : d(u, v) <= hop}. The centroid is local node
/// 0; remaining nodes follow in BFS order. When the ball exceeds `cap` nodes,
/// non-centroid nodes are uniformly subsampled down to `cap` with `rng`.
Subgraph extract_subgraph(const Graph& g, NodeId u, int hop, std::size_t cap, Rng& rng);
Subgraph extract_subgraph(const Graph& g, NodeId u, int hop);

/// Union of the h-hop balls of u and v (u is local 0, v local 1). With
/// `drop_target_edge`, the edge (u, v) is left out of the induced structure.
Subgraph extract_pair_subgraph(const Graph& g, NodeId u, NodeId v, int hop, std::size_t cap,
                               Rng& rng, bool drop_target_edge = true);
Subgraph extract_pair_subgraph(const Graph& g, NodeId u, NodeId v, int hop,
                               bool drop_target_edge = true);

/// Saturating one-hot degree encoding: bucket min(degree, dim - 1).
Tensor degree_features(const Graph& g, std::size_t dim);

/// `count` distinct, uniformly drawn node pairs (u < v) that are not edges.
std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, Rng& rng);

// Text formats: edge list `u<TAB>v` per line, feature rows of whitespace
// separated reals, label lines `node<TAB>label`. Malformed input throws with
// file:line in the message.
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
Tensor read_features(const std::filesystem::path& path);
std::vector<LabelId> read_labels(const std::filesystem::path& path, std::size_t node_count);
void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges);
void write_features(const std::filesystem::path& path, const Tensor& features);
void write_labels(const std::filesystem::path& path, std::span<const LabelId> labels);

}  // namespace gmeta
