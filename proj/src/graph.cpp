#include "gmeta/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace gmeta {
namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t{a} << 32) | b;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line,
                              const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  return out;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Uniformly keep `keep` of the entries after the first (the centroid or the
// pair endpoints, `fixed` of them), preserving the original order.
std::vector<NodeId> subsample(std::vector<NodeId> nodes, std::size_t fixed, std::size_t cap,
                              Rng& rng) {
  if (nodes.size() <= cap) return nodes;
  std::vector<std::size_t> idx(nodes.size() - fixed);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = fixed + i;
  const std::size_t keep = cap > fixed ? cap - fixed : 0;
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<NodeId> out(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(fixed));
  for (std::size_t i : idx) out.push_back(nodes[i]);
  return out;
}

Subgraph induce(const Graph& g, std::vector<NodeId> nodes, int hop, bool pair,
                bool drop_target_edge) {
  std::unordered_map<NodeId, NodeId> local;
  local.reserve(nodes.size() * 2);
  for (NodeId i = 0; i < nodes.size(); ++i) local.emplace(nodes[i], i);

  std::vector<Edge> edges;
  for (NodeId a = 0; a < nodes.size(); ++a) {
    for (NodeId w : g.neighbors(nodes[a])) {
      auto it = local.find(w);
      if (it == local.end() || it->second <= a) continue;
      if (pair && drop_target_edge && a == 0 && it->second == 1) continue;
      edges.push_back({a, it->second});
    }
  }

  std::optional<Tensor> features;
  if (g.has_features()) {
    Tensor f(nodes.size(), g.feature_dim());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      auto src = g.features().row(nodes[i]);
      std::copy(src.begin(), src.end(), f.row(i).begin());
    }
    features = std::move(f);
  }

  Subgraph s;
  s.graph = Graph(nodes.size(), std::move(edges), std::move(features));
  s.centroid_local = 0;
  s.global_ids = std::move(nodes);
  s.hop = hop;
  if (pair) s.pair_local = 1;
  return s;
}

// Nodes within `hop` of any source, sources first, then BFS discovery order.
std::vector<NodeId> ball(const Graph& g, std::span<const NodeId> sources, int hop) {
  std::vector<NodeId> order(sources.begin(), sources.end());
  std::unordered_map<NodeId, int> depth;
  std::deque<NodeId> frontier;
  for (NodeId s : sources) {
    depth.emplace(s, 0);
    frontier.push_back(s);
  }
  while (!frontier.empty()) {
    const NodeId x = frontier.front();
    frontier.pop_front();
    const int d = depth[x];
    if (d >= hop) continue;
    for (NodeId w : g.neighbors(x)) {
      if (depth.emplace(w, d + 1).second) {
        order.push_back(w);
        frontier.push_back(w);
      }
    }
  }
  return order;
}

}  // namespace

Graph::Graph(std::size_t node_count, std::vector<Edge> edges, std::optional<Tensor> features,
             std::vector<LabelId> labels)
    : node_count_(node_count), features_(std::move(features)), labels_(std::move(labels)) {
  if (node_count_ > std::numeric_limits<NodeId>::max())
    throw std::invalid_argument("graph too large for 32-bit node ids");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edges.size() * 2);
  std::vector<std::size_t> deg(node_count_, 0);
  for (Edge& e : edges) {
    if (e.u >= node_count_ || e.v >= node_count_)
      throw std::invalid_argument("edge endpoint out of range: (" + std::to_string(e.u) + ", " +
                                  std::to_string(e.v) + ")");
    if (e.u == e.v) throw std::invalid_argument("self-loop at node " + std::to_string(e.u));
    if (e.u > e.v) std::swap(e.u, e.v);
    if (!seen.insert(pair_key(e.u, e.v)).second)
      throw std::invalid_argument("duplicate edge (" + std::to_string(e.u) + ", " +
                                  std::to_string(e.v) + ")");
    ++deg[e.u];
    ++deg[e.v];
  }
  edges_ = std::move(edges);

  offsets_.assign(node_count_ + 1, 0);
  for (std::size_t i = 0; i < node_count_; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) {
    adjacency_[fill[e.u]++] = e.v;
    adjacency_[fill[e.v]++] = e.u;
  }
  for (std::size_t i = 0; i < node_count_; ++i)
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));

  if (features_ && features_->rows() != node_count_)
    throw std::invalid_argument("feature rows (" + std::to_string(features_->rows()) +
                                ") != node count (" + std::to_string(node_count_) + ")");
  if (!labels_.empty() && labels_.size() != node_count_)
    throw std::invalid_argument("label count does not match node count");
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  if (u >= node_count_ || v >= node_count_) return false;
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

const Tensor& Graph::features() const {
  if (!features_) throw std::logic_error("graph has no features");
  return *features_;
}

Graph Graph::with_features(Tensor features) const {
  return Graph(node_count_, edges_, std::move(features), labels_);
}

Graph Graph::with_labels(std::vector<LabelId> labels) const {
  return Graph(node_count_, edges_, features_, std::move(labels));
}

void check_node(const Graph& g, NodeId u) {
  if (u >= g.node_count())
    throw std::out_of_range("node out of range: " + std::to_string(u) + " >= " +
                            std::to_string(g.node_count()));
}

std::vector<std::size_t> bfs_distances(const Graph& g, NodeId source, std::size_t max_depth) {
  check_node(g, source);
  std::vector<std::size_t> dist(g.node_count(), kUnreachable);
  std::vector<NodeId> queue{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId x = queue[head];
    if (dist[x] >= max_depth) continue;
    for (NodeId w : g.neighbors(x))
      if (dist[w] == kUnreachable) {
        dist[w] = dist[x] + 1;
        queue.push_back(w);
      }
  }
  return dist;
}

std::optional<std::size_t> shortest_path_dist(const Graph& g, NodeId u, NodeId v) {
  check_node(g, v);
  const std::size_t d = bfs_distances(g, u)[v];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

Subgraph extract_subgraph(const Graph& g, NodeId u, int hop, std::size_t cap, Rng& rng) {
  check_node(g, u);
  if (hop < 0) throw std::invalid_argument("hop must be >= 0");
  if (cap < 1) throw std::invalid_argument("subgraph cap must be >= 1");
  const NodeId src[] = {u};
  return induce(g, subsample(ball(g, src, hop), 1, cap, rng), hop, false, false);
}

Subgraph extract_subgraph(const Graph& g, NodeId u, int hop) {
  Rng unused(0);
  return extract_subgraph(g, u, hop, kNoCap, unused);
}

Subgraph extract_pair_subgraph(const Graph& g, NodeId u, NodeId v, int hop, std::size_t cap,
                               Rng& rng, bool drop_target_edge) {
  check_node(g, u);
  check_node(g, v);
  if (u == v) throw std::invalid_argument("pair subgraph needs two distinct nodes");
  if (hop < 0) throw std::invalid_argument("hop must be >= 0");
  if (cap < 2) throw std::invalid_argument("pair subgraph cap must be >= 2");
  const NodeId src[] = {u, v};
  return induce(g, subsample(ball(g, src, hop), 2, cap, rng), hop, true, drop_target_edge);
}

Subgraph extract_pair_subgraph(const Graph& g, NodeId u, NodeId v, int hop,
                               bool drop_target_edge) {
  Rng unused(0);
  return extract_pair_subgraph(g, u, v, hop, kNoCap, unused, drop_target_edge);
}

Tensor degree_features(const Graph& g, std::size_t dim) {
  if (dim < 1) throw std::invalid_argument("degree feature dim must be >= 1");
  Tensor f(g.node_count(), dim);
  for (NodeId u = 0; u < g.node_count(); ++u) f(u, std::min(g.degree(u), dim - 1)) = 1.0;
  return f;
}

std::vector<Edge> sample_negative_edges(const Graph& g, std::size_t count, Rng& rng) {
  const std::size_t n = g.node_count();
  const std::size_t all_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::size_t non_edges = all_pairs - g.edge_count();
  if (count > non_edges)
    throw std::invalid_argument("requested " + std::to_string(count) +
                                " negative edges but only " + std::to_string(non_edges) +
                                " non-edges exist");
  std::vector<Edge> out;
  if (count == 0) return out;
  out.reserve(count);

  if (2 * count > non_edges) {
    // Dense regime: enumerate the complement and draw a uniform subset.
    std::vector<Edge> pool;
    pool.reserve(non_edges);
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = a + 1; b < n; ++b)
        if (!g.has_edge(a, b)) pool.push_back({a, b});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
    return out;
  }

  std::unordered_set<std::uint64_t> taken;
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  while (out.size() < count) {
    NodeId a = node(rng), b = node(rng);
    if (a == b || g.has_edge(a, b)) continue;
    if (a > b) std::swap(a, b);
    if (taken.insert(pair_key(a, b)).second) out.push_back({a, b});
  }
  return out;
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line) || line[0] == '#') continue;
    std::istringstream ss(line);
    long long a = -1, b = -1;
    std::string extra;
    if (!(ss >> a >> b) || (ss >> extra) || a < 0 || b < 0)
      parse_error(path, lineno, "expected 'u<TAB>v' with non-negative ids");
    if (a == b) parse_error(path, lineno, "self-loop");
    if (!seen.insert(pair_key(static_cast<NodeId>(a), static_cast<NodeId>(b))).second)
      parse_error(path, lineno, "duplicate edge");
    edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  }
  return edges;
}

Tensor read_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> data;
  std::size_t cols = 0, rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream ss(line);
    std::size_t c = 0;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        data.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        parse_error(path, lineno, "not a real number: '" + tok + "'");
      }
      ++c;
    }
    if (rows == 0) cols = c;
    if (c != cols)
      parse_error(path, lineno,
                  "row has " + std::to_string(c) + " values, expected " + std::to_string(cols));
    ++rows;
  }
  return Tensor(rows, cols, std::move(data));
}

std::vector<LabelId> read_labels(const std::filesystem::path& path, std::size_t node_count) {
  auto in = open_input(path);
  std::vector<LabelId> labels(node_count, kUnlabeled);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line) || line[0] == '#') continue;
    std::istringstream ss(line);
    long long node = -1, label = -1;
    std::string extra;
    if (!(ss >> node >> label) || (ss >> extra) || node < 0 || label < 0)
      parse_error(path, lineno, "expected 'node<TAB>label' with non-negative ids");
    if (static_cast<std::size_t>(node) >= node_count)
      parse_error(path, lineno, "node id " + std::to_string(node) + " out of range");
    labels[static_cast<std::size_t>(node)] = static_cast<LabelId>(label);
  }
  return labels;
}

void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges) {
  auto out = open_output(path);
  for (const Edge& e : edges) out << e.u << '\t' << e.v << '\n';
}

void write_features(const std::filesystem::path& path, const Tensor& features) {
  auto out = open_output(path);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) out << (c ? " " : "") << features(r, c);
    out << '\n';
  }
}

void write_labels(const std::filesystem::path& path, std::span<const LabelId> labels) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kUnlabeled) out << i << '\t' << labels[i] << '\n';
}

}  // namespace gmeta
