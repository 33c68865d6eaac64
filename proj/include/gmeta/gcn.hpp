#pragma once

#include <memory>
#include <span>
#include <vector>

#include "gmeta/graph.hpp"
#include "gmeta/params.hpp"
#include "gmeta/random.hpp"
#include "gmeta/tape.hpp"

namespace gmeta {

enum class Activation { Relu, Identity };

struct GcnConfig {
  int layers = 2;
  std::size_t in_dim = 1;
  std::size_t hidden_dim = 16;
  std::size_t out_dim = 16;
  Activation activation = Activation::Relu;
  bool self_loops = true;
  // The last layer stays linear unless this is set.
  bool activate_output = false;

  void validate() const;
};

/// Glorot-uniform weights "gcn.w0" .. "gcn.w{L-1}".
ParamSet init_gcn(const GcnConfig& cfg, Rng& rng);

/// D^-1 A (with optional self-loops added first); zero-degree rows are empty.
std::shared_ptr<const ad::SparseMatrix> normalized_adjacency(const Graph& g, bool self_loops);

/// Several subgraphs stacked into one block-diagonal graph.
struct SubgraphBatch {
  std::shared_ptr<const ad::SparseMatrix> adjacency;
  Tensor features;           // total_nodes x in_dim
  ad::RowIndex centroids;    // one row per subgraph
  ad::RowIndex partners;     // pair_local rows; null unless every subgraph is a pair
  std::size_t count = 0;
};

SubgraphBatch make_batch(std::span<const Subgraph* const> subgraphs, bool self_loops);
SubgraphBatch make_batch(const Subgraph& s, bool self_loops);

/// Per-node embeddings: H <- act((A_hat H) W) for each layer.
ad::Var encode(ad::Tape& tape, const SubgraphBatch& batch, std::span<const ad::Var> weights,
               const GcnConfig& cfg);

/// One row per subgraph: the centroid row, or for pair subgraphs the
/// element-wise product of the two endpoint rows.
ad::Var readout(ad::Tape& tape, ad::Var embeddings, const SubgraphBatch& batch);

/// Single-subgraph readout; `pair` requires sub.pair_local.
ad::Var centroid_embedding(ad::Tape& tape, ad::Var embeddings, const Subgraph& sub,
                           bool pair = false);

}  // namespace gmeta
