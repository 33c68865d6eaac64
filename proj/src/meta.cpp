#include "gmeta/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gmeta {

const char* problem_name(Problem p) {
  switch (p) {
    case Problem::SingleDisjoint: return "single_disjoint";
    case Problem::MultiShared: return "multi_shared";
    case Problem::MultiDisjoint: return "multi_disjoint";
    case Problem::Link: return "link";
  }
  return "?";
}

const char* method_name(Method m) {
  switch (m) {
    case Method::GMeta: return "gmeta";
    case Method::Knn: return "knn";
    case Method::NoFinetune: return "no_finetune";
    case Method::Finetune: return "finetune";
    case Method::ProtoNet: return "protonet";
    case Method::Maml: return "maml";
  }
  return "?";
}

Problem parse_problem(const std::string& s) {
  for (Problem p : {Problem::SingleDisjoint, Problem::MultiShared, Problem::MultiDisjoint, Problem::Link})
    if (s == problem_name(p)) return p;
  throw std::invalid_argument("unknown problem '" + s + "'");
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::GMeta, Method::Knn, Method::NoFinetune, Method::Finetune,
                   Method::ProtoNet, Method::Maml})
    if (s == method_name(m)) return m;
  throw std::invalid_argument("unknown method '" + s + "'");
}

void MetaConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
  };
  need(n_way >= 2, "n_way must be >= 2");
  need(k_support >= 1, "k_support must be >= 1");
  need(k_query >= 1, "k_query must be >= 1");
  need(hop >= 0, "hop must be >= 0");
  need(inner_lr >= 0.0 && std::isfinite(inner_lr), "inner_lr must be >= 0");
  need(outer_lr >= 0.0 && std::isfinite(outer_lr), "outer_lr must be >= 0");
  need(inner_steps_train >= 0 && inner_steps_test >= 0, "inner steps must be >= 0");
  need(tasks_per_batch >= 1, "tasks_per_batch must be >= 1");
  need(epochs >= 1 && batches_per_epoch >= 1, "epochs and batches_per_epoch must be >= 1");
  need(val_tasks >= 1 && test_tasks >= 1, "val_tasks and test_tasks must be >= 1");
  need(hidden_dim >= 1 && out_dim >= 1, "encoder dims must be >= 1");
  need(subgraph_cap >= 2, "subgraph_cap must be >= 2");
  need(holdout_graph_fraction >= 0.0 && holdout_graph_fraction < 0.5, "holdout fraction in [0, 0.5)");
  need(link_support_fraction > 0.0 && link_support_fraction < 1.0, "link support fraction in (0, 1)");
  need(pretrain_batch >= 1, "pretrain_batch must be >= 1");
}

// --- subgraphs ---------------------------------------------------------------

SubgraphCache::SubgraphCache(const Dataset& data, int hop, std::size_t cap, std::uint64_t seed,
                             std::size_t pair_limit)
    : data_(&data), hop_(hop), cap_(cap), seed_(seed), pair_limit_(pair_limit) {}

std::shared_ptr<const Subgraph> SubgraphCache::get(const TaskItem& item) {
  const Key key{item.graph, item.u, item.v};
  auto& memo = item.v == kNoNode ? nodes_ : pairs_;
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  const Graph& g = data_->graphs.at(item.graph);
  Rng rng(derive_seed(derive_seed(seed_, item.graph),
                      (std::uint64_t{item.u} << 32) | std::uint64_t{item.v}));
  auto s = std::make_shared<const Subgraph>(
      item.v == kNoNode ? extract_subgraph(g, item.u, hop_, cap_, rng)
                        : extract_pair_subgraph(g, item.u, item.v, hop_, cap_, rng, true));
  if (&memo == &pairs_ && pairs_.size() >= pair_limit_) pairs_.clear();
  memo.emplace(key, s);
  return s;
}

// --- task sampling -------------------------------------------------------------

namespace {

// First `count` entries of a partial Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> choose(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

LabelPools pools_of(const Dataset& data, std::span<const std::uint32_t> graphs) {
  LabelPools pools;
  for (std::uint32_t gi : graphs) {
    const Graph& g = data.graphs.at(gi);
    for (NodeId u = 0; u < g.node_count(); ++u) {
      const LabelId l = g.label(u);
      if (l != kUnlabeled) pools[l].push_back({gi, u, kNoNode, l});
    }
  }
  return pools;
}

std::vector<LabelId> eligible_labels(const LabelPools& pools, std::size_t min_count) {
  std::vector<LabelId> out;
  for (const auto& [l, items] : pools)
    if (items.size() >= min_count) out.push_back(l);
  return out;
}

std::vector<std::uint32_t> all_graphs(const Dataset& d) {
  std::vector<std::uint32_t> ids(d.graphs.size());
  std::iota(ids.begin(), ids.end(), 0u);
  return ids;
}

}  // namespace

Task sample_task_disjoint(const LabelPools& pools, std::span<const LabelId> labels,
                          const MetaConfig& cfg, Rng& rng) {
  if (labels.size() < cfg.n_way)
    throw std::invalid_argument("need " + std::to_string(cfg.n_way) + " labels, have " +
                                std::to_string(labels.size()));
  Task t;
  for (std::size_t i : choose(labels.size(), cfg.n_way, rng)) t.label_set.push_back(labels[i]);

  std::size_t kq = cfg.k_query;
  std::vector<const std::vector<TaskItem>*> chosen;
  for (LabelId l : t.label_set) {
    auto it = pools.find(l);
    const std::size_t have = it == pools.end() ? 0 : it->second.size();
    if (have < cfg.k_support + 1)
      throw std::invalid_argument("label " + std::to_string(l) + " has " + std::to_string(have) +
                                  " labeled nodes; need at least " +
                                  std::to_string(cfg.k_support + 1));
    kq = std::min(kq, have - cfg.k_support);
    chosen.push_back(&it->second);
  }
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    const auto idx = choose(chosen[c]->size(), cfg.k_support + kq, rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      TaskItem item = (*chosen[c])[idx[j]];
      item.label = static_cast<int>(c);
      (j < cfg.k_support ? t.support : t.query).push_back(item);
    }
  }
  return t;
}

Task sample_task_disjoint_single(const Graph& g, std::span<const LabelId> labels,
                                 const MetaConfig& cfg, Rng& rng) {
  Dataset one{"", {g}};
  const std::uint32_t id = 0;
  return sample_task_disjoint(pools_of(one, std::span(&id, 1)), labels, cfg, rng);
}

Task sample_task_shared_multi(const Dataset& data, std::span<const std::uint32_t> graph_ids,
                              const MetaConfig& cfg, Rng& rng) {
  std::vector<std::uint32_t> usable;
  std::vector<LabelPools> pools;
  for (std::uint32_t gi : graph_ids) {
    LabelPools p = pools_of(data, std::span(&gi, 1));
    if (eligible_labels(p, cfg.k_support + 1).size() >= cfg.n_way) {
      usable.push_back(gi);
      pools.push_back(std::move(p));
    }
  }
  if (usable.empty())
    throw std::invalid_argument("no graph has " + std::to_string(cfg.n_way) +
                                " labels with enough nodes");
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  const std::size_t g = pick(rng);
  const auto labels = eligible_labels(pools[g], cfg.k_support + 1);
  return sample_task_disjoint(pools[g], labels, cfg, rng);
}

EdgePools split_edges(const Graph& g, double support_fraction, Rng& rng) {
  std::vector<Edge> e(g.edges().begin(), g.edges().end());
  std::shuffle(e.begin(), e.end(), rng);
  const auto ns = static_cast<std::size_t>(std::llround(support_fraction * static_cast<double>(e.size())));
  EdgePools p;
  p.support.assign(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(ns));
  p.query.assign(e.begin() + static_cast<std::ptrdiff_t>(ns), e.end());
  return p;
}

Task sample_task_link(const Dataset& data, std::span<const std::uint32_t> graph_ids,
                      std::span<const EdgePools> pools, const MetaConfig& cfg, Rng& rng) {
  if (graph_ids.empty()) throw std::invalid_argument("no graphs for link tasks");
  std::uniform_int_distribution<std::size_t> pick(0, graph_ids.size() - 1);
  const std::uint32_t gi = graph_ids[pick(rng)];
  const Graph& g = data.graphs.at(gi);
  const EdgePools& p = pools[gi];
  const std::size_t ks = cfg.k_support;
  if (p.support.size() < ks)
    throw std::invalid_argument("graph " + std::to_string(gi) + " has " +
                                std::to_string(p.support.size()) + " support edges; need " +
                                std::to_string(ks));
  if (p.query.empty()) throw std::invalid_argument("graph " + std::to_string(gi) + " has no query edges");
  const std::size_t kq = std::min(cfg.k_query, p.query.size());

  Task t;
  t.label_set = {0, 1};
  const auto neg = sample_negative_edges(g, ks + kq, rng);
  auto item = [&](const Edge& e, int label) { return TaskItem{gi, e.u, e.v, label}; };
  for (std::size_t i = 0; i < ks; ++i) t.support.push_back(item(neg[i], 0));
  for (std::size_t i : choose(p.support.size(), ks, rng)) t.support.push_back(item(p.support[i], 1));
  for (std::size_t i = ks; i < ks + kq; ++i) t.query.push_back(item(neg[i], 0));
  for (std::size_t i : choose(p.query.size(), kq, rng)) t.query.push_back(item(p.query[i], 1));
  return t;
}

MetaSplit::MetaSplit(const Dataset& data, Problem problem, const MetaConfig& cfg, std::size_t fold)
    : data_(&data),
      problem_(problem),
      cfg_(cfg),
      seed_(derive_seed(derive_seed(cfg.seed, "fold"), fold)) {
  cfg.validate();
  if (data.graphs.empty()) throw std::invalid_argument("dataset has no graphs");
  if (problem == Problem::Link && cfg.n_way != 2)
    throw std::invalid_argument("link prediction tasks are 2-way");

  switch (problem) {
    case Problem::SingleDisjoint:
    case Problem::MultiDisjoint: {
      if (problem == Problem::SingleDisjoint && data.graphs.size() != 1)
        throw std::invalid_argument("single-graph problem needs exactly one graph, got " +
                                    std::to_string(data.graphs.size()));
      train_graphs_ = val_graphs_ = test_graphs_ = all_graphs(data);
      pools_ = pools_of(data, train_graphs_);
      auto universe = eligible_labels(pools_, cfg.k_support + 1);
      const std::size_t needed = cfg.test_labels + cfg.val_labels + cfg.n_way;
      if (cfg.test_labels < cfg.n_way || cfg.val_labels < cfg.n_way || universe.size() < needed)
        throw std::invalid_argument("label split impossible: " + std::to_string(universe.size()) +
                                    " usable labels, " + std::to_string(cfg.test_labels) +
                                    " test / " + std::to_string(cfg.val_labels) +
                                    " val held out, " + std::to_string(cfg.n_way) + "-way tasks");
      Rng rng(derive_seed(seed_, "labels"));
      std::shuffle(universe.begin(), universe.end(), rng);
      auto at = universe.begin();
      test_labels_.assign(at, at + static_cast<std::ptrdiff_t>(cfg.test_labels));
      at += static_cast<std::ptrdiff_t>(cfg.test_labels);
      val_labels_.assign(at, at + static_cast<std::ptrdiff_t>(cfg.val_labels));
      at += static_cast<std::ptrdiff_t>(cfg.val_labels);
      train_labels_.assign(at, universe.end());
      for (auto* v : {&test_labels_, &val_labels_, &train_labels_}) std::sort(v->begin(), v->end());
      pretrain_classes_ = train_labels_.size();
      break;
    }
    case Problem::MultiShared:
    case Problem::Link: {
      auto ids = all_graphs(data);
      if (ids.size() < 3) {
        // Too few graphs to hold any out: every part samples from all of them.
        train_graphs_ = val_graphs_ = test_graphs_ = ids;
      } else {
        Rng rng(derive_seed(seed_, "graphs"));
        std::shuffle(ids.begin(), ids.end(), rng);
        const auto hold = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.holdout_graph_fraction * static_cast<double>(ids.size()))));
        test_graphs_.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(hold));
        val_graphs_.assign(ids.begin() + static_cast<std::ptrdiff_t>(hold),
                           ids.begin() + static_cast<std::ptrdiff_t>(2 * hold));
        train_graphs_.assign(ids.begin() + static_cast<std::ptrdiff_t>(2 * hold), ids.end());
        for (auto* v : {&test_graphs_, &val_graphs_, &train_graphs_}) std::sort(v->begin(), v->end());
      }
      if (problem == Problem::Link) {
        // The support/query edge split is fixed per graph, independent of the fold.
        for (std::uint32_t gi = 0; gi < data.graphs.size(); ++gi) {
          Rng rng(derive_seed(derive_seed(cfg.seed, "edges"), gi));
          edge_pools_.push_back(split_edges(data.graphs[gi], cfg.link_support_fraction, rng));
        }
        pretrain_classes_ = 2;
      } else {
        pools_ = pools_of(data, train_graphs_);
        train_labels_ = eligible_labels(pools_, 1);
        pretrain_classes_ = train_labels_.size();
      }
      break;
    }
  }
}

std::span<const LabelId> MetaSplit::labels(Part part) const {
  switch (part) {
    case Part::Train: return train_labels_;
    case Part::Val: return val_labels_;
    case Part::Test: return test_labels_;
  }
  return {};
}

std::span<const std::uint32_t> MetaSplit::graphs(Part part) const {
  switch (part) {
    case Part::Train: return train_graphs_;
    case Part::Val: return val_graphs_;
    case Part::Test: return test_graphs_;
  }
  return {};
}

Task MetaSplit::sample(Part part, Rng& rng) const {
  switch (problem_) {
    case Problem::SingleDisjoint:
    case Problem::MultiDisjoint:
      return sample_task_disjoint(pools_, labels(part), cfg_, rng);
    case Problem::MultiShared:
      return sample_task_shared_multi(*data_, graphs(part), cfg_, rng);
    case Problem::Link:
      return sample_task_link(*data_, graphs(part), edge_pools_, cfg_, rng);
  }
  throw std::logic_error("unreachable");
}

std::size_t MetaSplit::pretrain_classes() const { return pretrain_classes_; }

std::vector<TaskItem> MetaSplit::pretrain_items(Rng& rng) const {
  std::vector<TaskItem> out;
  if (problem_ == Problem::Link) {
    for (std::uint32_t gi : train_graphs_) {
      const auto& pos = edge_pools_[gi].support;
      for (const Edge& e : pos) out.push_back({gi, e.u, e.v, 1});
      for (const Edge& e : sample_negative_edges(data_->graphs[gi], pos.size(), rng))
        out.push_back({gi, e.u, e.v, 0});
    }
    return out;
  }
  // Dense class ids over the training labels.
  for (std::size_t c = 0; c < train_labels_.size(); ++c) {
    const auto it = pools_.find(train_labels_[c]);
    if (it == pools_.end()) continue;
    for (TaskItem item : it->second) {
      item.label = static_cast<int>(c);
      out.push_back(item);
    }
  }
  return out;
}

// --- heads ----------------------------------------------------------------------

ad::Var prototypes(ad::Tape& tape, ad::Var support, std::span<const int> labels,
                   std::size_t n_way) {
  const std::size_t n = tape.value(support).rows();
  if (labels.size() != n) throw std::invalid_argument("one label per support row required");
  std::vector<double> count(n_way, 0.0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_way) throw std::invalid_argument("label out of range");
    count[static_cast<std::size_t>(l)] += 1.0;
  }
  for (std::size_t k = 0; k < n_way; ++k)
    if (count[k] == 0.0) throw std::invalid_argument("class " + std::to_string(k) + " has no support");
  Tensor avg(n_way, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    avg(k, i) = 1.0 / count[k];
  }
  return tape.matmul(tape.constant(std::move(avg)), support);
}

ad::Var class_log_probs(ad::Tape& tape, ad::Var h, ad::Var protos) {
  const std::size_t n = tape.value(h).rows();
  const std::size_t k = tape.value(protos).rows();
  if (tape.value(h).cols() != tape.value(protos).cols())
    throw std::invalid_argument("embedding and prototype widths differ");
  auto hi = std::make_shared<std::vector<std::uint32_t>>(n * k);
  auto ci = std::make_shared<std::vector<std::uint32_t>>(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      (*hi)[i * k + j] = static_cast<std::uint32_t>(i);
      (*ci)[i * k + j] = static_cast<std::uint32_t>(j);
    }
  const ad::Var diff = tape.sub(tape.gather_rows(h, hi), tape.gather_rows(protos, ci));
  const ad::Var dist = tape.sqrt(tape.row_sum(tape.mul(diff, diff)), kDistanceEps);
  return tape.log_softmax_rows(tape.scale(tape.reshape(dist, n, k), -1.0));
}

ad::Var class_distribution(ad::Tape& tape, ad::Var h, ad::Var protos) {
  return tape.exp(class_log_probs(tape, h, protos));
}

ad::Var proto_loss(ad::Tape& tape, ad::Var log_probs, std::span<const int> labels) {
  const Tensor& lp = tape.value(log_probs);
  if (labels.size() != lp.rows()) throw std::invalid_argument("one label per row required");
  Tensor pick(lp.rows(), lp.cols());
  const double w = -1.0 / static_cast<double>(lp.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= lp.cols())
      throw std::invalid_argument("label out of range");
    pick(i, static_cast<std::size_t>(labels[i])) = w;
  }
  const ad::Var floored = tape.clamp_min(log_probs, std::log(1e-12));
  return tape.sum_all(tape.mul(floored, tape.constant(std::move(pick))));
}

ModelSpec model_spec(const MetaConfig& cfg, std::size_t in_dim, Head head) {
  ModelSpec s;
  s.gcn.layers = std::max(1, cfg.hop);
  s.gcn.in_dim = in_dim;
  s.gcn.hidden_dim = cfg.hidden_dim;
  s.gcn.out_dim = cfg.out_dim;
  s.gcn.activation = Activation::Relu;
  s.gcn.self_loops = cfg.self_loops;
  s.head = head;
  s.n_way = cfg.n_way;
  return s;
}

ParamSet init_model(const ModelSpec& spec, Rng& rng) {
  ParamSet p = init_gcn(spec.gcn, rng);
  if (spec.head == Head::Linear) {
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.gcn.out_dim + spec.n_way));
    std::uniform_real_distribution<double> d(-bound, bound);
    Tensor w(spec.gcn.out_dim, spec.n_way);
    for (auto& x : w.values()) x = d(rng);
    p.add("head.w", std::move(w));
    p.add("head.b", Tensor(1, spec.n_way));
  }
  return p;
}

namespace {

SubgraphBatch batch_of(std::span<const TaskItem> items, SubgraphCache& cache, bool self_loops) {
  std::vector<std::shared_ptr<const Subgraph>> held;
  std::vector<const Subgraph*> subs;
  held.reserve(items.size());
  for (const TaskItem& it : items) subs.push_back(held.emplace_back(cache.get(it)).get());
  return make_batch(subs, self_loops);
}

std::vector<int> labels_of(std::span<const TaskItem> items) {
  std::vector<int> out;
  out.reserve(items.size());
  for (const TaskItem& it : items) out.push_back(it.label);
  return out;
}

ad::Var linear_log_probs(ad::Tape& tape, ad::Var emb, ad::Var w, ad::Var b) {
  const std::size_t n = tape.value(emb).rows();
  const ad::Var logits = tape.add(tape.matmul(emb, w), tape.matmul(tape.constant(Tensor(n, 1, 1.0)), b));
  return tape.log_softmax_rows(logits);
}

}  // namespace

EpisodeObjective::EpisodeObjective(const Task& task, SubgraphCache& cache, const ModelSpec& spec)
    : spec_(spec),
      support_(batch_of(task.support, cache, spec.gcn.self_loops)),
      query_(batch_of(task.query, cache, spec.gcn.self_loops)),
      support_labels_(labels_of(task.support)),
      query_labels_(labels_of(task.query)) {}

ad::Var EpisodeObjective::embed(ad::Tape& tape, const SubgraphBatch& b,
                                std::span<const ad::Var> params) const {
  const auto layers = static_cast<std::size_t>(spec_.gcn.layers);
  if (params.size() < layers) throw std::invalid_argument("missing GCN parameters");
  return readout(tape, encode(tape, b, params.first(layers), spec_.gcn), b);
}

ad::Var EpisodeObjective::log_probs(ad::Tape& tape, ad::Var emb,
                                    std::span<const ad::Var> params) const {
  if (spec_.head == Head::Prototype) return class_log_probs(tape, emb, protos_);
  const auto layers = static_cast<std::size_t>(spec_.gcn.layers);
  if (params.size() != layers + 2) throw std::invalid_argument("linear head parameters missing");
  return linear_log_probs(tape, emb, params[layers], params[layers + 1]);
}

ad::Var EpisodeObjective::support_loss(ad::Tape& tape, std::span<const ad::Var> params) {
  const ad::Var emb = embed(tape, support_, params);
  if (spec_.head == Head::Prototype) protos_ = prototypes(tape, emb, support_labels_, spec_.n_way);
  return proto_loss(tape, log_probs(tape, emb, params), support_labels_);
}

ad::Var EpisodeObjective::query_log_probs(ad::Tape& tape, std::span<const ad::Var> params) {
  if (spec_.head == Head::Prototype && !protos_.valid())
    throw std::logic_error("query evaluated before any support pass");
  return log_probs(tape, embed(tape, query_, params), params);
}

ad::Var EpisodeObjective::query_loss(ad::Tape& tape, std::span<const ad::Var> params) {
  last_query_ = query_log_probs(tape, params);
  return proto_loss(tape, last_query_, query_labels_);
}

double accuracy(const Tensor& log_probs, std::span<const int> labels) {
  if (labels.size() != log_probs.rows()) throw std::invalid_argument("one label per row required");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = log_probs.row(i);
    const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    hit += arg == labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

// --- training -----------------------------------------------------------------

namespace {

class OuterOptimizer {
 public:
  OuterOptimizer(const MetaConfig& cfg, const ParamSet& like)
      : lr_(cfg.outer_lr), adam_(cfg.adam), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ParamSet& theta, const ParamSet& grad) {
    if (!adam_) {
      theta.axpy(-lr_, grad);
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i)
      for (std::size_t j = 0; j < theta[i].size(); ++j) {
        const double g = grad[i][j];
        m_[i][j] = b1 * m_[i][j] + (1 - b1) * g;
        v_[i][j] = b2 * v_[i][j] + (1 - b2) * g * g;
        theta[i][j] -= lr_ * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps);
      }
  }

 private:
  double lr_;
  bool adam_;
  ParamSet m_, v_;
  std::size_t t_ = 0;
};

EvalResult summarize(std::vector<double> per_task) {
  EvalResult r;
  r.per_task = std::move(per_task);
  if (r.per_task.empty()) return r;
  const double n = static_cast<double>(r.per_task.size());
  r.mean = std::accumulate(r.per_task.begin(), r.per_task.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : r.per_task) ss += (x - r.mean) * (x - r.mean);
  r.stddev = r.per_task.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return r;
}

}  // namespace

std::vector<Task> sample_tasks(const MetaSplit& split, MetaSplit::Part part, std::size_t count,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Task> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(split.sample(part, rng));
  return out;
}

TrainResult episodic_train(const MetaSplit& split, const MetaConfig& cfg, ParamSet theta,
                           const TaskGradient& task_grad, const TaskScore& score) {
  Rng task_rng(derive_seed(split.seed(), "train-tasks"));
  const auto val = sample_tasks(split, MetaSplit::Part::Val, cfg.val_tasks,
                                derive_seed(split.seed(), "val-tasks"));
  OuterOptimizer opt(cfg, theta);
  TrainResult r;
  r.params = theta;
  r.best_val_acc = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      ParamSet grad = theta.zeros_like();
      double loss = 0.0;
      for (std::size_t t = 0; t < cfg.tasks_per_batch; ++t)
        loss += task_grad(split.sample(MetaSplit::Part::Train, task_rng), theta, grad);
      opt.step(theta, grad);
      r.log.push_back({r.steps++, loss / static_cast<double>(cfg.tasks_per_batch), std::nullopt});
    }
    double acc = 0.0;
    for (const Task& t : val) acc += score(t, theta);
    acc /= static_cast<double>(val.size());
    r.log.back().val_acc = acc;
    if (acc > r.best_val_acc) {
      r.best_val_acc = acc;
      r.params = theta;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return r;
}

double adapted_task_accuracy(const Task& task, SubgraphCache& cache, const ModelSpec& spec,
                             const ParamSet& theta, double alpha, int steps) {
  EpisodeObjective obj(task, cache, spec);
  ad::Tape tape;
  const auto vars = theta.bind(tape);
  adapt(tape, obj, vars, alpha, steps, MamlMode::FirstOrder);
  return accuracy(tape.value(obj.last_query_log_probs()), obj.query_labels());
}

TrainResult meta_train(const MetaSplit& split, SubgraphCache& cache, const MetaConfig& cfg,
                       const ModelSpec& spec, ParamSet theta0) {
  auto grad = [&](const Task& task, const ParamSet& theta, ParamSet& sum) {
    EpisodeObjective obj(task, cache, spec);
    const auto r = grad_through_updates(obj, theta, cfg.inner_lr, cfg.inner_steps_train, cfg.maml_mode);
    sum.axpy(1.0, r.grad);
    return r.query_loss;
  };
  auto score = [&](const Task& task, const ParamSet& theta) {
    return adapted_task_accuracy(task, cache, spec, theta, cfg.inner_lr, cfg.inner_steps_test);
  };
  return episodic_train(split, cfg, std::move(theta0), grad, score);
}

EvalResult meta_test(const ParamSet& theta, std::span<const Task> tasks, SubgraphCache& cache,
                     const MetaConfig& cfg, const ModelSpec& spec) {
  std::vector<double> acc;
  for (const Task& t : tasks)
    acc.push_back(adapted_task_accuracy(t, cache, spec, theta, cfg.inner_lr, cfg.inner_steps_test));
  return summarize(std::move(acc));
}

namespace {

// Plain prototypical episode: prototypes and query log-probs at theta.
ad::Var protonet_log_probs(ad::Tape& tape, const Task& task, SubgraphCache& cache,
                           const ModelSpec& spec, std::span<const ad::Var> w) {
  const auto s = batch_of(task.support, cache, spec.gcn.self_loops);
  const auto q = batch_of(task.query, cache, spec.gcn.self_loops);
  const ad::Var hs = readout(tape, encode(tape, s, w, spec.gcn), s);
  const ad::Var protos = prototypes(tape, hs, labels_of(task.support), spec.n_way);
  const ad::Var hq = readout(tape, encode(tape, q, w, spec.gcn), q);
  return class_log_probs(tape, hq, protos);
}

}  // namespace

TrainResult protonet_train(const MetaSplit& split, SubgraphCache& cache, const MetaConfig& cfg,
                           const ModelSpec& spec, ParamSet theta0) {
  auto grad = [&](const Task& task, const ParamSet& theta, ParamSet& sum) {
    ad::Tape tape;
    const auto w = theta.bind(tape);
    const ad::Var loss = proto_loss(tape, protonet_log_probs(tape, task, cache, spec, w),
                                    labels_of(task.query));
    sum.axpy(1.0, theta.read(tape, tape.gradient(loss, w, false)));
    return tape.value(loss).item();
  };
  auto score = [&](const Task& task, const ParamSet& theta) {
    ad::Tape tape;
    const auto w = theta.bind(tape);
    return accuracy(tape.value(protonet_log_probs(tape, task, cache, spec, w)), labels_of(task.query));
  };
  return episodic_train(split, cfg, std::move(theta0), grad, score);
}

ParamSet pretrain_encoder(const MetaSplit& split, SubgraphCache& cache, const MetaConfig& cfg,
                          std::size_t in_dim, Rng& rng) {
  ModelSpec spec = model_spec(cfg, in_dim, Head::Linear);
  spec.n_way = split.pretrain_classes();
  if (spec.n_way < 2) throw std::invalid_argument("pretraining needs at least two classes");
  ParamSet theta = init_model(spec, rng);
  auto items = split.pretrain_items(rng);
  if (items.empty()) throw std::invalid_argument("no pretraining items");
  MetaConfig opt_cfg = cfg;
  opt_cfg.outer_lr = cfg.pretrain_lr;
  OuterOptimizer opt(opt_cfg, theta);
  const auto layers = static_cast<std::size_t>(spec.gcn.layers);
  std::size_t cursor = items.size();
  for (std::size_t step = 0; step < cfg.pretrain_steps; ++step) {
    std::vector<TaskItem> batch;
    while (batch.size() < std::min(cfg.pretrain_batch, items.size())) {
      if (cursor == items.size()) {
        std::shuffle(items.begin(), items.end(), rng);
        cursor = 0;
      }
      batch.push_back(items[cursor++]);
    }
    const auto b = batch_of(batch, cache, spec.gcn.self_loops);
    ad::Tape tape;
    const auto w = theta.bind(tape);
    const ad::Var emb = readout(tape, encode(tape, b, std::span(w).first(layers), spec.gcn), b);
    const ad::Var loss = proto_loss(tape, linear_log_probs(tape, emb, w[layers], w[layers + 1]),
                                    labels_of(batch));
    opt.step(theta, theta.read(tape, tape.gradient(loss, w, false)));
  }
  return theta;
}

std::vector<int> knn_predict(const Tensor& support, std::span<const int> support_labels,
                             const Tensor& query, std::size_t k, std::size_t n_way) {
  if (support.rows() != support_labels.size()) throw std::invalid_argument("one label per support row");
  if (support.cols() != query.cols()) throw std::invalid_argument("embedding widths differ");
  k = std::min(k, support.rows());
  std::vector<int> out;
  std::vector<std::pair<double, std::size_t>> d(support.rows());
  for (std::size_t q = 0; q < query.rows(); ++q) {
    for (std::size_t s = 0; s < support.rows(); ++s) {
      double acc = 0.0;
      for (std::size_t j = 0; j < query.cols(); ++j) {
        const double diff = query(q, j) - support(s, j);
        acc += diff * diff;
      }
      d[s] = {std::sqrt(acc), s};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> votes(n_way, 0);
    std::vector<double> total(n_way, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      const auto l = static_cast<std::size_t>(support_labels[d[i].second]);
      ++votes[l];
      total[l] += d[i].first;
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < n_way; ++l)
      if (votes[l] > votes[best] || (votes[l] == votes[best] && votes[l] > 0 && total[l] < total[best]))
        best = l;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

namespace {

struct FoldContext {
  MetaSplit split;
  SubgraphCache cache;
  std::size_t in_dim;
  std::vector<Task> tests;

  FoldContext(const Dataset& data, Problem problem, const MetaConfig& cfg, std::size_t fold)
      : split(data, problem, cfg, fold),
        cache(data, cfg.hop, cfg.subgraph_cap, derive_seed(cfg.seed, "subgraphs")),
        in_dim(data.graphs.front().feature_dim()) {
    if (in_dim == 0) throw std::invalid_argument("dataset graphs need node features");
    tests = sample_tasks(split, MetaSplit::Part::Test, cfg.test_tasks,
                         derive_seed(split.seed(), "test-tasks"));
  }
};

double knn_task_accuracy(const Task& t, SubgraphCache& cache, const ModelSpec& spec,
                         const ParamSet& encoder, std::size_t k) {
  ad::Tape tape;
  const auto w = encoder.bind(tape);
  const auto s = batch_of(t.support, cache, spec.gcn.self_loops);
  const auto q = batch_of(t.query, cache, spec.gcn.self_loops);
  const auto wl = std::span(w).first(static_cast<std::size_t>(spec.gcn.layers));
  const Tensor hs = tape.value(readout(tape, encode(tape, s, wl, spec.gcn), s));
  const Tensor hq = tape.value(readout(tape, encode(tape, q, wl, spec.gcn), q));
  const auto pred = knn_predict(hs, labels_of(t.support), hq, k, spec.n_way);
  const auto truth = labels_of(t.query);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

EvalResult evaluate_in(FoldContext& ctx, Method method, const MetaConfig& cfg,
                       const ParamSet& checkpoint) {
  std::vector<double> acc;
  switch (method) {
    case Method::GMeta:
    case Method::Maml:
    case Method::ProtoNet: {
      const Head head = method == Method::GMeta ? cfg.head
                        : method == Method::Maml ? Head::Linear
                                                 : Head::Prototype;
      const auto spec = model_spec(cfg, ctx.in_dim, head);
      // ProtoNet classifies with the trained metric directly.
      const int steps = method == Method::ProtoNet ? 0 : cfg.inner_steps_test;
      const double alpha = method == Method::ProtoNet ? 0.0 : cfg.inner_lr;
      for (const Task& t : ctx.tests)
        acc.push_back(adapted_task_accuracy(t, ctx.cache, spec, checkpoint, alpha, steps));
      break;
    }
    case Method::Knn: {
      const auto spec = model_spec(cfg, ctx.in_dim, Head::Prototype);
      for (const Task& t : ctx.tests)
        acc.push_back(knn_task_accuracy(t, ctx.cache, spec, checkpoint, cfg.k_support));
      break;
    }
    case Method::Finetune:
    case Method::NoFinetune: {
      // Fresh head (and, without pretraining, a fresh encoder) per task.
      const auto spec = model_spec(cfg, ctx.in_dim, Head::Linear);
      const auto layers = static_cast<std::size_t>(spec.gcn.layers);
      for (std::size_t i = 0; i < ctx.tests.size(); ++i) {
        Rng task_rng(derive_seed(derive_seed(ctx.split.seed(), "task-init"), i));
        ParamSet theta = init_model(spec, task_rng);
        if (method == Method::Finetune)
          for (std::size_t l = 0; l < layers; ++l) theta[l] = checkpoint[l];
        acc.push_back(adapted_task_accuracy(ctx.tests[i], ctx.cache, spec, theta, cfg.inner_lr,
                                            cfg.inner_steps_test));
      }
      break;
    }
  }
  return summarize(std::move(acc));
}

}  // namespace

MethodOutcome run_method(Method method, const Dataset& data, Problem problem,
                         const MetaConfig& cfg, std::size_t fold) {
  FoldContext ctx(data, problem, cfg, fold);
  Rng init_rng(derive_seed(ctx.split.seed(), "init"));
  MethodOutcome out;
  switch (method) {
    case Method::GMeta:
    case Method::Maml: {
      const auto spec = model_spec(cfg, ctx.in_dim, method == Method::GMeta ? cfg.head : Head::Linear);
      out.train = meta_train(ctx.split, ctx.cache, cfg, spec, init_model(spec, init_rng));
      out.checkpoint = out.train.params;
      break;
    }
    case Method::ProtoNet: {
      const auto spec = model_spec(cfg, ctx.in_dim, Head::Prototype);
      out.train = protonet_train(ctx.split, ctx.cache, cfg, spec, init_model(spec, init_rng));
      out.checkpoint = out.train.params;
      break;
    }
    case Method::Knn:
    case Method::Finetune:
      out.checkpoint = pretrain_encoder(ctx.split, ctx.cache, cfg, ctx.in_dim, init_rng);
      break;
    case Method::NoFinetune:
      break;
  }
  out.test = evaluate_in(ctx, method, cfg, out.checkpoint);
  return out;
}

EvalResult evaluate_checkpoint(Method method, const Dataset& data, Problem problem,
                               const MetaConfig& cfg, std::size_t fold, const ParamSet& checkpoint) {
  FoldContext ctx(data, problem, cfg, fold);
  return evaluate_in(ctx, method, cfg, checkpoint);
}

}  // namespace gmeta
