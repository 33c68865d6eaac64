#include "gmeta/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gmeta::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_layers(int layers) {
  if (layers < 0) throw std::invalid_argument("layer count must be >= 0");
}

bool within(double value, double bound) {
  return value <= bound + kBoundTolerance * std::max(1.0, std::abs(bound));
}

}  // namespace

std::size_t diameter(const Graph& g) {
  std::size_t best = 0;
  for (NodeId u = 0; u < g.node_count(); ++u)
    for (std::size_t d : bfs_distances(g, u))
      if (d != kUnreachable) best = std::max(best, d);
  return best;
}

int default_layers(const Graph& g) { return static_cast<int>(diameter(g)) + 2; }

std::vector<double> influence_row(const Graph& g, NodeId u, int layers) {
  check_node(g, u);
  check_layers(layers);
  std::vector<double> row(g.node_count(), 0.0), next(g.node_count());
  row[u] = 1.0;
  for (int step = 0; step < layers; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (NodeId w = 0; w < g.node_count(); ++w) {
      if (row[w] == 0.0 || g.degree(w) == 0) continue;
      const double share = row[w] / static_cast<double>(g.degree(w));
      for (NodeId v : g.neighbors(w)) next[v] += share;
    }
    row.swap(next);
  }
  return row;
}

double node_influence(const Graph& g, NodeId u, NodeId v, int layers) {
  check_node(g, v);
  return influence_row(g, u, layers)[v];
}

WalkStats walk_stats(const Graph& g, NodeId u, int layers) {
  check_node(g, u);
  check_layers(layers);
  const std::size_t n = g.node_count();
  WalkStats s{std::vector<double>(n, 0.0), std::vector<double>(n, kInf)};
  s.count[u] = 1.0;
  s.min_log_degree[u] = 0.0;
  std::vector<double> count(n), cost(n);
  for (int step = 0; step < layers; ++step) {
    std::fill(count.begin(), count.end(), 0.0);
    std::fill(cost.begin(), cost.end(), kInf);
    for (NodeId w = 0; w < n; ++w) {
      if (s.count[w] == 0.0) continue;
      const double c = s.min_log_degree[w] + std::log(static_cast<double>(g.degree(w)));
      for (NodeId v : g.neighbors(w)) {
        count[v] += s.count[w];
        cost[v] = std::min(cost[v], c);
      }
    }
    s.count.swap(count);
    s.min_log_degree.swap(cost);
  }
  for (double c : s.count)
    if (!std::isfinite(c)) throw std::runtime_error("graph too dense for exact check: walk count overflow");
  return s;
}

DecayCheck influence_decay_check(const Graph& g, NodeId u, int layers) {
  DecayCheck out;
  out.u = u;
  out.layers = layers;
  out.isolated = g.degree(u) == 0;
  const auto infl = influence_row(g, u, layers);
  const auto walks = walk_stats(g, u, layers);
  const auto dist = bfs_distances(g, u);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    PairBound r;
    r.v = v;
    r.distance = dist[v];
    r.influence = infl[v];
    r.walks = walks.count[v];
    if (r.walks > 0.0) {
      const double m = walks.min_log_degree[v];
      r.mean_degree = layers > 0 ? std::exp(m / layers) : 1.0;
      r.tight_bound = r.walks * std::exp(-m);
      const double h = static_cast<double>(r.distance);
      r.bound = layers > 0 ? r.walks * std::exp(-m * h / layers) : r.walks;
    }
    r.holds = within(r.influence, r.tight_bound) && within(r.tight_bound, r.bound);
    out.passed = out.passed && r.holds;
    out.rows.push_back(r);
  }
  return out;
}

namespace {

// Summed in node order with zeros for excluded nodes, so a shrinking
// outside set can never produce a larger floating-point sum.
double outside_sum(const std::vector<double>& infl, const std::vector<std::size_t>& dist, int h) {
  double s = 0.0;
  for (std::size_t v = 0; v < infl.size(); ++v)
    s += dist[v] == kUnreachable || dist[v] > static_cast<std::size_t>(h) ? infl[v] : 0.0;
  return s;
}

}  // namespace

double influence_loss(const Graph& g, NodeId u, int h, int layers) {
  if (h < 0) throw std::invalid_argument("hop must be >= 0");
  return outside_sum(influence_row(g, u, layers), bfs_distances(g, u), h);
}

InfluenceReport influence_report(const Graph& g, NodeId u, std::optional<int> layers,
                                 std::optional<int> max_h) {
  check_node(g, u);
  InfluenceReport r;
  r.u = u;
  r.layers = layers.value_or(default_layers(g));
  r.isolated = g.degree(u) == 0;
  r.decay = influence_decay_check(g, u, r.layers);
  const auto dist = bfs_distances(g, u);
  std::vector<double> infl(g.node_count());
  for (const auto& row : r.decay.rows) infl[row.v] = row.influence;
  for (double x : infl) r.graph_influence += x;

  const int top = max_h.value_or(static_cast<int>(diameter(g)));
  for (int h = 0; h <= top; ++h) {
    LossRow row;
    row.h = h;
    row.loss = outside_sum(infl, dist, h);
    row.subgraph_influence = r.graph_influence - row.loss;
    double best = -1.0;
    for (NodeId v = 0; v < g.node_count(); ++v) {
      if (dist[v] != kUnreachable && dist[v] <= static_cast<std::size_t>(h)) continue;
      ++row.outside;
      if (infl[v] > best) best = infl[v], row.argmax = v;
    }
    if (row.argmax) {
      const PairBound& pb = r.decay.rows[*row.argmax];
      row.constant = static_cast<double>(row.outside) * pb.walks;
      row.mean_degree = pb.mean_degree;
      if (pb.walks > 0.0) row.bound = row.constant * std::pow(pb.mean_degree, -(h + 1.0));
    }
    row.holds = within(row.loss, row.bound);
    r.losses.push_back(row);
  }
  r.passed = r.decay.passed;
  for (const auto& row : r.losses) r.passed = r.passed && row.holds;
  return r;
}

nlohmann::json to_json(const InfluenceReport& r) {
  using nlohmann::json;
  json pairs = json::array();
  for (const auto& p : r.decay.rows) {
    pairs.push_back({{"v", p.v},
                     {"distance", p.distance == kUnreachable ? json(nullptr) : json(p.distance)},
                     {"influence", p.influence},
                     {"walks", p.walks},
                     {"mean_degree", p.mean_degree},
                     {"tight_bound", p.tight_bound},
                     {"bound", p.bound},
                     {"holds", p.holds}});
  }
  json losses = json::array();
  for (const auto& l : r.losses) {
    losses.push_back({{"h", l.h},
                      {"subgraph_influence", l.subgraph_influence},
                      {"loss", l.loss},
                      {"outside", l.outside},
                      {"argmax", l.argmax ? json(*l.argmax) : json(nullptr)},
                      {"constant", l.constant},
                      {"mean_degree", l.mean_degree},
                      {"bound", l.bound},
                      {"holds", l.holds}});
  }
  return {{"u", r.u},
          {"layers", r.layers},
          {"isolated", r.isolated},
          {"graph_influence", r.graph_influence},
          {"node_influence", pairs},
          {"influence_loss", losses},
          {"passed", r.passed}};
}

}  // namespace gmeta::theory
