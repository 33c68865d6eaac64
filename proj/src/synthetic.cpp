#include "gmeta/synthetic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <lapacke.h>
#include <json.hpp>

namespace gmeta {
namespace {

std::uint64_t key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t{a} << 32) | b;
}

std::vector<ShapeTemplate> build_templates() {
  std::vector<ShapeTemplate> t(kShapeKinds);
  // House: square 0-1-2-3 with roof 4 over the 0-1 side; hangs off the roof.
  t[0] = {5, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}}, 4, {1, 1, 2, 2, 0},
          {"house roof", "house roof-adjacent", "house base"}};
  // Star: center 0 and five leaves; hangs off leaf 1.
  t[1] = {6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}, 1, {0, 1, 2, 2, 2, 2},
          {"star center", "star anchor leaf", "star free leaf"}};
  // Diamond: K4 minus (0, 1); hangs off degree-2 node 0.
  t[2] = {4, {{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, 0, {0, 1, 2, 2},
          {"diamond anchor", "diamond far tip", "diamond degree-3"}};
  // Fan: center 0 joined to the path 1-2-3-4; hangs off the center.
  t[3] = {5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {2, 3}, {3, 4}}, 0, {0, 1, 2, 2, 1},
          {"fan center", "fan path end", "fan path inner"}};
  return t;
}

constexpr LabelId kCycleShapeBase = 1 + static_cast<LabelId>(kShapeKinds);

LabelId shape_label(ShapeKind k, int role) {
  return kCycleShapeBase + 3 * static_cast<LabelId>(k) + role;
}

std::vector<ShapeKind> shuffled_instances(const SyntheticSpec& spec, Rng& rng) {
  std::vector<ShapeKind> out;
  for (std::size_t k = 0; k < kShapeKinds; ++k)
    out.insert(out.end(), spec.shape_counts[k], static_cast<ShapeKind>(k));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

void add_noise(std::size_t n, std::vector<Edge>& edges, std::unordered_set<std::uint64_t>& present,
               std::size_t count, Rng& rng) {
  const std::size_t pairs = n * (n - 1) / 2;
  if (present.size() + count > pairs)
    throw std::invalid_argument("not enough non-edges for the requested noise edges");
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  for (std::size_t added = 0; added < count;) {
    const NodeId a = pick(rng), b = pick(rng);
    if (a == b || !present.insert(key(a, b)).second) continue;
    edges.push_back({a, b});
    ++added;
  }
}

}  // namespace

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::House: return "house";
    case ShapeKind::Star: return "star";
    case ShapeKind::Diamond: return "diamond";
    case ShapeKind::Fan: return "fan";
  }
  return "?";
}

const ShapeTemplate& shape_template(ShapeKind k) {
  static const std::vector<ShapeTemplate> templates = build_templates();
  return templates.at(static_cast<std::size_t>(k));
}

std::vector<std::string> cycle_role_names() {
  std::vector<std::string> names{"cycle"};
  for (std::size_t k = 0; k < kShapeKinds; ++k)
    names.push_back(std::string("cycle anchor of ") + shape_name(static_cast<ShapeKind>(k)));
  for (std::size_t k = 0; k < kShapeKinds; ++k)
    for (const auto& r : shape_template(static_cast<ShapeKind>(k)).role_names) names.push_back(r);
  return names;
}

SyntheticGraph gen_cycle_dataset(const SyntheticSpec& spec) {
  if (spec.base_size < 3) throw std::invalid_argument("cycle base needs at least 3 nodes");
  Rng rng(derive_seed(spec.seed, "cycle"));
  const std::size_t base = spec.base_size;
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> present;
  std::vector<LabelId> labels(base, 0);
  for (NodeId i = 0; i < base; ++i) {
    const NodeId j = static_cast<NodeId>((i + 1) % base);
    edges.push_back({i, j});
    present.insert(key(i, j));
  }

  // Anchors are distinct while cycle nodes last, then drawn with replacement.
  std::vector<NodeId> anchors(base);
  std::iota(anchors.begin(), anchors.end(), 0u);
  std::shuffle(anchors.begin(), anchors.end(), rng);
  std::uniform_int_distribution<NodeId> any_base(0, static_cast<NodeId>(base - 1));

  SyntheticGraph out;
  const auto instances = shuffled_instances(spec, rng);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const ShapeKind kind = instances[i];
    const ShapeTemplate& t = shape_template(kind);
    ShapePlacement pl{kind, {}, i < base ? anchors[i] : any_base(rng)};
    const NodeId first = static_cast<NodeId>(labels.size());
    for (std::size_t v = 0; v < t.size; ++v) {
      pl.nodes.push_back(first + static_cast<NodeId>(v));
      labels.push_back(shape_label(kind, t.role[v]));
    }
    for (const Edge& e : t.edges) {
      edges.push_back({first + e.u, first + e.v});
      present.insert(key(first + e.u, first + e.v));
    }
    edges.push_back({pl.anchor, first + t.attach});
    present.insert(key(pl.anchor, first + t.attach));
    if (labels[pl.anchor] == 0) labels[pl.anchor] = 1 + static_cast<LabelId>(kind);
    out.placements.push_back(std::move(pl));
  }
  add_noise(labels.size(), edges, present, spec.noise_edges, rng);
  const std::size_t n = labels.size();
  out.graph = Graph(n, std::move(edges), std::nullopt, std::move(labels));
  out.spec = spec;
  return out;
}

std::size_t ba_edge_count(std::size_t n, std::size_t m) {
  return (m + 1) * m / 2 + (n - m - 1) * m;
}

SyntheticGraph gen_ba_structure(const SyntheticSpec& spec) {
  const std::size_t m = kBaAttach;
  if (spec.base_size < m + 1) throw std::invalid_argument("BA graph needs at least 4 nodes");
  Rng rng(derive_seed(spec.seed, "ba"));
  const std::size_t n = spec.base_size;
  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> present;
  std::vector<NodeId> ends;  // every edge endpoint: sampling from it is degree-proportional
  auto link = [&](NodeId a, NodeId b) {
    edges.push_back({a, b});
    present.insert(key(a, b));
    ends.push_back(a);
    ends.push_back(b);
  };
  for (NodeId a = 0; a <= m; ++a)
    for (NodeId b = a + 1; b <= m; ++b) link(a, b);
  for (NodeId v = static_cast<NodeId>(m + 1); v < n; ++v) {
    std::vector<NodeId> targets;
    while (targets.size() < m) {
      std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
      const NodeId t = ends[pick(rng)];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (NodeId t : targets) link(t, v);
  }

  SyntheticGraph out;
  for (ShapeKind kind : shuffled_instances(spec, rng)) {
    const ShapeTemplate& t = shape_template(kind);
    // Distinct hosts for the template's nodes, uniform over the graph.
    std::vector<NodeId> pool(n);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t i = 0; i < t.size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    ShapePlacement pl{kind, {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(t.size)}, pool[0]};
    for (const Edge& e : t.edges) {
      const NodeId a = pl.nodes[e.u], b = pl.nodes[e.v];
      if (present.insert(key(a, b)).second) edges.push_back({a, b});
    }
    out.placements.push_back(std::move(pl));
  }
  add_noise(n, edges, present, spec.noise_edges, rng);
  out.graph = Graph(n, std::move(edges));
  out.spec = spec;
  return out;
}

void label_by_graphlets(std::vector<SyntheticGraph>& graphs, std::size_t clusters,
                        std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& g : graphs) total += g.graph.node_count();
  if (total == 0) return;
  Tensor vecs(total, kOrbits);
  std::size_t row = 0;
  for (const auto& g : graphs)
    for (NodeId u = 0; u < g.graph.node_count(); ++u, ++row) {
      const auto v = graphlet_vector(g.graph, u);
      for (std::size_t k = 0; k < kOrbits; ++k) vecs(row, k) = std::log1p(v[k]);
    }
  Rng rng(derive_seed(seed, "spectral"));
  const auto labels = spectral_cluster(vecs, clusters, rng);
  row = 0;
  for (auto& g : graphs) {
    std::vector<LabelId> l(labels.begin() + static_cast<std::ptrdiff_t>(row),
                           labels.begin() + static_cast<std::ptrdiff_t>(row + g.graph.node_count()));
    row += g.graph.node_count();
    g.graph = g.graph.with_labels(std::move(l));
  }
}

SyntheticGraph gen_ba_dataset(const SyntheticSpec& spec, std::size_t clusters) {
  std::vector<SyntheticGraph> one{gen_ba_structure(spec)};
  label_by_graphlets(one, clusters, spec.seed);
  return std::move(one.front());
}

int classify_orbit(std::size_t size, const std::array<unsigned, 4>& adj, std::size_t pos) {
  std::size_t edges2 = 0;
  int maxdeg = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const int d = std::popcount(adj[i]);
    edges2 += static_cast<std::size_t>(d);
    maxdeg = std::max(maxdeg, d);
  }
  const std::size_t e = edges2 / 2;
  const int d = std::popcount(adj[pos]);
  switch (size) {
    case 2: return 0;
    case 3: return e == 3 ? 3 : (d == 1 ? 1 : 2);
    case 4:
      switch (e) {
        case 3:
          if (maxdeg == 3) return d == 3 ? 7 : 6;
          return d == 1 ? 4 : 5;
        case 4:
          if (maxdeg == 2) return 8;
          return d == 1 ? 9 : (d == 2 ? 10 : 11);
        case 5: return d == 2 ? 12 : 13;
        case 6: return 14;
      }
  }
  throw std::invalid_argument("not a connected graphlet on 2-4 nodes");
}

std::array<double, kOrbits> graphlet_vector(const Graph& g, NodeId u) {
  check_node(g, u);
  std::array<double, kOrbits> counts{};
  std::set<std::array<NodeId, 4>> seen;
  std::vector<NodeId> cur{u};

  auto record = [&] {
    std::array<unsigned, 4> adj{};
    for (std::size_t i = 0; i < cur.size(); ++i)
      for (std::size_t j = i + 1; j < cur.size(); ++j)
        if (g.has_edge(cur[i], cur[j])) {
          adj[i] |= 1u << j;
          adj[j] |= 1u << i;
        }
    counts[static_cast<std::size_t>(classify_orbit(cur.size(), adj, 0))] += 1.0;
  };

  // Grow connected node sets from {u}; each set is visited once.
  auto grow = [&](auto&& self) -> void {
    if (cur.size() >= 2) record();
    if (cur.size() == 4) return;
    const std::size_t len = cur.size();
    for (std::size_t i = 0; i < len; ++i) {
      for (NodeId w : g.neighbors(cur[i])) {
        if (std::find(cur.begin(), cur.end(), w) != cur.end()) continue;
        std::array<NodeId, 4> k;
        k.fill(std::numeric_limits<NodeId>::max());
        std::copy(cur.begin(), cur.end(), k.begin());
        k[len] = w;
        std::sort(k.begin(), k.begin() + static_cast<std::ptrdiff_t>(len + 1));
        if (!seen.insert(k).second) continue;
        cur.push_back(w);
        self(self);
        cur.pop_back();
      }
    }
  };
  grow(grow);
  return counts;
}

namespace {

// Row-major point set helper for k-means.
struct Points {
  std::size_t n = 0, d = 0;
  std::vector<double> v;
  const double* row(std::size_t i) const { return v.data() + i * d; }
  double* row(std::size_t i) { return v.data() + i * d; }
};

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

std::vector<std::size_t> kmeans(const Points& x, std::size_t k, Rng& rng, int restarts = 10,
                                int max_iter = 200) {
  const std::size_t n = x.n, d = x.d;
  std::vector<std::size_t> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding.
    Points c{k, d, std::vector<double>(k * d)};
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::copy_n(x.row(first(rng)), d, c.row(0));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x.row(i), c.row(0), d);
    for (std::size_t j = 1; j < k; ++j) {
      std::size_t pick = 0;
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double t = u(rng);
        for (pick = 0; pick + 1 < n; ++pick) {
          t -= d2[pick];
          if (t < 0.0) break;
        }
      } else {
        pick = first(rng);
      }
      std::copy_n(x.row(pick), d, c.row(j));
      for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x.row(i), c.row(j), d));
    }

    std::vector<std::size_t> assign(n, 0);
    double inertia = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      bool changed = it == 0;
      inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          const double dd = sq_dist(x.row(i), c.row(j), d);
          if (dd < bd) bd = dd, arg = j;
        }
        inertia += bd;
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
      }
      if (!changed) break;
      std::vector<double> sum(k * d, 0.0);
      std::vector<std::size_t> cnt(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) sum[assign[i] * d + j] += x.row(i)[j];
        ++cnt[assign[i]];
      }
      for (std::size_t j = 0; j < k; ++j)
        if (cnt[j] > 0)
          for (std::size_t q = 0; q < d; ++q) c.row(j)[q] = sum[j * d + q] / static_cast<double>(cnt[j]);
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = assign;
    }
  }
  return best;
}

// The k smallest eigenpairs of a symmetric matrix (column-major, overwritten).
Points smallest_eigenvectors(std::vector<double>& a, std::size_t n, std::size_t k) {
  std::vector<double> w(n), z(n * k);
  std::vector<lapack_int> support(2 * k);
  lapack_int found = 0;
  const auto ln = static_cast<lapack_int>(n);
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', ln, a.data(), ln, 0.0, 0.0, 1,
                     static_cast<lapack_int>(k), 0.0, &found, w.data(), z.data(), ln, support.data());
  if (info != 0 || found != static_cast<lapack_int>(k))
    throw std::runtime_error("eigendecomposition failed (info " + std::to_string(info) + ")");
  Points out{n, k, std::vector<double>(n * k)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out.row(i)[j] = z[j * n + i];
  return out;
}

}  // namespace

std::vector<LabelId> spectral_cluster(const Tensor& vectors, std::size_t k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("cluster count must be >= 1");
  const std::size_t n = vectors.rows();
  if (n < k) throw std::invalid_argument("fewer rows than clusters");
  if (k == 1) return std::vector<LabelId>(n, 0);

  // Collapse duplicate rows; equal inputs then share a label by construction.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(vectors.row(a).begin(), vectors.row(a).end(),
                                        vectors.row(b).begin(), vectors.row(b).end());
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  std::vector<std::size_t> unique_of(n);
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = order[i];
    if (reps.empty() || row_less(reps.back(), r)) reps.push_back(r);
    unique_of[r] = reps.size() - 1;
  }
  const std::size_t m = reps.size();
  if (m < k)
    throw std::invalid_argument("indistinguishable inputs: " + std::to_string(m) +
                                " distinct rows for " + std::to_string(k) + " clusters");

  const std::size_t dim = vectors.cols();
  std::vector<double> dist(m * m, 0.0);
  std::vector<double> off;
  off.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = std::sqrt(sq_dist(vectors.row(reps[i]).data(), vectors.row(reps[j]).data(), dim));
      dist[i * m + j] = dist[j * m + i] = d;
      off.push_back(d);
    }
  std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2), off.end());
  const double sigma = off[off.size() / 2];

  // Symmetric normalized Laplacian I - D^-1/2 W D^-1/2.
  std::vector<double>& w = dist;
  std::vector<double> deg(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double& x = w[i * m + j];
      x = i == j ? 0.0 : std::exp(-x * x / (2.0 * sigma * sigma));
      deg[i] += x;
    }
  for (auto& d : deg) d = 1.0 / std::sqrt(std::max(d, 1e-300));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      w[i * m + j] = (i == j ? 1.0 : 0.0) - deg[i] * w[i * m + j] * deg[j];

  Points emb = smallest_eigenvectors(w, m, k);
  for (std::size_t i = 0; i < m; ++i) {
    double nrm = 0.0;
    for (std::size_t j = 0; j < k; ++j) nrm += emb.row(i)[j] * emb.row(i)[j];
    nrm = std::sqrt(nrm);
    if (nrm > 0.0)
      for (std::size_t j = 0; j < k; ++j) emb.row(i)[j] /= nrm;
  }
  const auto assign = kmeans(emb, k, rng);

  // Renumber clusters by first appearance in the original row order.
  std::vector<LabelId> remap(k, -1);
  LabelId next = 0;
  std::vector<LabelId> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = assign[unique_of[i]];
    if (remap[c] < 0) remap[c] = next++;
    out[i] = remap[c];
  }
  return out;
}

namespace {

std::array<std::size_t, kShapeKinds> random_counts(Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 15);
  std::array<std::size_t, kShapeKinds> c{};
  for (auto& x : c) x = d(rng);
  return c;
}

}  // namespace

SyntheticSpec cycle_single_spec(std::uint64_t seed) { return {500, {100, 100, 100, 100}, 1000, seed}; }

std::vector<SyntheticSpec> cycle_multi_specs(std::size_t graphs, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "cycle-multi"));
  std::vector<SyntheticSpec> out;
  for (std::size_t i = 0; i < graphs; ++i)
    out.push_back({50, random_counts(rng), 100, derive_seed(seed, i)});
  return out;
}

SyntheticSpec ba_single_spec(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "ba-single"));
  return {200, random_counts(rng), 0, seed};
}

std::vector<SyntheticSpec> ba_multi_specs(std::size_t graphs, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "ba-multi"));
  std::vector<SyntheticSpec> out;
  for (std::size_t i = 0; i < graphs; ++i)
    out.push_back({200, random_counts(rng), 0, derive_seed(seed, i)});
  return out;
}

std::string synthetic_metadata_json(const std::vector<SyntheticGraph>& graphs,
                                    const std::string& family) {
  nlohmann::ordered_json j;
  j["family"] = family;
  if (family == "cycle") {
    j["labels"] = cycle_role_names();
  } else {
    std::set<LabelId> ids;
    for (const auto& g : graphs)
      for (LabelId l : g.graph.labels()) ids.insert(l);
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (LabelId l : ids) labels.push_back("graphlet cluster " + std::to_string(l));
    j["labels"] = labels;
  }
  j["templates"] = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kShapeKinds; ++k) {
    const auto& t = shape_template(static_cast<ShapeKind>(k));
    nlohmann::ordered_json e;
    e["size"] = t.size;
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const Edge& ed : t.edges) edges.push_back({ed.u, ed.v});
    e["edges"] = edges;
    e["attach"] = t.attach;
    e["roles"] = t.role;
    e["role_names"] = t.role_names;
    j["templates"][shape_name(static_cast<ShapeKind>(k))] = e;
  }
  j["graphs"] = nlohmann::ordered_json::array();
  for (const auto& g : graphs) {
    nlohmann::ordered_json e;
    e["seed"] = g.spec.seed;
    e["base_size"] = g.spec.base_size;
    nlohmann::ordered_json counts;
    for (std::size_t k = 0; k < kShapeKinds; ++k)
      counts[shape_name(static_cast<ShapeKind>(k))] = g.spec.shape_counts[k];
    e["shape_counts"] = counts;
    e["noise_edges"] = g.spec.noise_edges;
    e["node_count"] = g.graph.node_count();
    e["edge_count"] = g.graph.edge_count();
    nlohmann::ordered_json pls = nlohmann::ordered_json::array();
    for (const auto& p : g.placements)
      pls.push_back({{"kind", shape_name(p.kind)}, {"anchor", p.anchor}, {"nodes", p.nodes}});
    e["placements"] = pls;
    j["graphs"].push_back(e);
  }
  return j.dump(1);
}

}  // namespace gmeta
