#include "gmeta/gcn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gmeta {

void GcnConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("GCN needs at least one layer");
  if (in_dim < 1 || hidden_dim < 1 || out_dim < 1)
    throw std::invalid_argument("GCN dimensions must be >= 1");
}

ParamSet init_gcn(const GcnConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamSet p;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::size_t fan_in = l == 0 ? cfg.in_dim : cfg.hidden_dim;
    const std::size_t fan_out = l == cfg.layers - 1 ? cfg.out_dim : cfg.hidden_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> d(-bound, bound);
    Tensor w(fan_in, fan_out);
    for (auto& x : w.values()) x = d(rng);
    p.add("gcn.w" + std::to_string(l), std::move(w));
  }
  return p;
}

namespace {

void append_block(ad::SparseMatrix& m, const Graph& g, bool self_loops, std::uint32_t base) {
  for (NodeId u = 0; u < g.node_count(); ++u) {
    const auto nb = g.neighbors(u);
    const std::size_t deg = nb.size() + (self_loops ? 1 : 0);
    if (deg > 0) {
      const double w = 1.0 / static_cast<double>(deg);
      // Neighbour lists are sorted, so merge the self entry in order.
      bool self_done = !self_loops;
      for (NodeId v : nb) {
        if (!self_done && u < v) {
          m.indices.push_back(base + u);
          m.values.push_back(w);
          self_done = true;
        }
        m.indices.push_back(base + v);
        m.values.push_back(w);
      }
      if (!self_done) {
        m.indices.push_back(base + u);
        m.values.push_back(w);
      }
    }
    m.offsets.push_back(m.indices.size());
  }
}

}  // namespace

std::shared_ptr<const ad::SparseMatrix> normalized_adjacency(const Graph& g, bool self_loops) {
  auto m = std::make_shared<ad::SparseMatrix>();
  m->rows = m->cols = g.node_count();
  append_block(*m, g, self_loops, 0);
  return m;
}

SubgraphBatch make_batch(std::span<const Subgraph* const> subgraphs, bool self_loops) {
  if (subgraphs.empty()) throw std::invalid_argument("empty subgraph batch");
  std::size_t total = 0;
  const std::size_t dim = subgraphs.front()->graph.feature_dim();
  for (const Subgraph* s : subgraphs) {
    if (!s->graph.has_features()) throw std::invalid_argument("subgraph has no features");
    if (s->graph.feature_dim() != dim)
      throw std::invalid_argument("subgraphs in a batch disagree on feature width");
    total += s->graph.node_count();
  }
  auto adj = std::make_shared<ad::SparseMatrix>();
  adj->rows = adj->cols = total;
  Tensor feats(total, dim);
  std::vector<std::uint32_t> centroids, partners;
  bool all_pairs = true;
  std::uint32_t base = 0;
  for (const Subgraph* s : subgraphs) {
    append_block(*adj, s->graph, self_loops, base);
    const Tensor& f = s->graph.features();
    std::copy(f.values().begin(), f.values().end(), feats.data() + std::size_t{base} * dim);
    centroids.push_back(base + s->centroid_local);
    if (s->pair_local)
      partners.push_back(base + *s->pair_local);
    else
      all_pairs = false;
    base += static_cast<std::uint32_t>(s->graph.node_count());
  }
  SubgraphBatch b;
  b.adjacency = std::move(adj);
  b.features = std::move(feats);
  b.centroids = std::make_shared<const std::vector<std::uint32_t>>(std::move(centroids));
  if (all_pairs)
    b.partners = std::make_shared<const std::vector<std::uint32_t>>(std::move(partners));
  b.count = subgraphs.size();
  return b;
}

SubgraphBatch make_batch(const Subgraph& s, bool self_loops) {
  const Subgraph* one[] = {&s};
  return make_batch(one, self_loops);
}

ad::Var encode(ad::Tape& tape, const SubgraphBatch& batch, std::span<const ad::Var> weights,
               const GcnConfig& cfg) {
  cfg.validate();
  if (weights.size() != static_cast<std::size_t>(cfg.layers))
    throw std::invalid_argument("expected " + std::to_string(cfg.layers) + " weight matrices");
  if (batch.features.cols() != cfg.in_dim)
    throw std::invalid_argument("feature width " + std::to_string(batch.features.cols()) +
                                " != GCN in_dim " + std::to_string(cfg.in_dim));
  ad::Var h = tape.constant(batch.features);
  for (int l = 0; l < cfg.layers; ++l) {
    h = tape.matmul(tape.propagate(batch.adjacency, h), weights[static_cast<std::size_t>(l)]);
    const bool last = l == cfg.layers - 1;
    if (cfg.activation == Activation::Relu && (!last || cfg.activate_output)) h = tape.relu(h);
  }
  return h;
}

ad::Var readout(ad::Tape& tape, ad::Var embeddings, const SubgraphBatch& batch) {
  ad::Var c = tape.gather_rows(embeddings, batch.centroids);
  if (!batch.partners) return c;
  return tape.mul(c, tape.gather_rows(embeddings, batch.partners));
}

ad::Var centroid_embedding(ad::Tape& tape, ad::Var embeddings, const Subgraph& sub, bool pair) {
  if (tape.value(embeddings).rows() != sub.graph.node_count())
    throw std::invalid_argument("embedding rows do not match subgraph size");
  auto row = [&](NodeId r) {
    return tape.gather_rows(embeddings, std::make_shared<const std::vector<std::uint32_t>>(1, r));
  };
  if (!pair) return row(sub.centroid_local);
  if (!sub.pair_local) throw std::invalid_argument("pair readout on a subgraph without a pair");
  return tape.mul(row(sub.centroid_local), row(*sub.pair_local));
}

}  // namespace gmeta
