#pragma once

// Episodes, prototype classification, meta-training and the baselines.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gmeta/gcn.hpp"
#include "gmeta/graph.hpp"
#include "gmeta/meta_grad.hpp"
#include "gmeta/params.hpp"
#include "gmeta/random.hpp"
#include "gmeta/tape.hpp"

namespace gmeta {

enum class Problem { SingleDisjoint, MultiShared, MultiDisjoint, Link };
enum class Head { Prototype, Linear };
enum class Method { GMeta, Knn, NoFinetune, Finetune, ProtoNet, Maml };

const char* problem_name(Problem p);
const char* method_name(Method m);
Problem parse_problem(const std::string& s);
Method parse_method(const std::string& s);

/// A labeled graph collection. Every graph carries features and labels
/// (labels may be absent for link prediction).
struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
};

struct MetaConfig {
  std::size_t n_way = 2;
  std::size_t k_support = 1;
  std::size_t k_query = 24;  // per class, capped by availability
  int hop = 2;
  double inner_lr = 0.01;    // alpha
  double outer_lr = 1e-3;    // beta
  int inner_steps_train = 5;
  int inner_steps_test = 10;
  std::size_t tasks_per_batch = 4;  // m
  std::size_t epochs = 30;
  std::size_t batches_per_epoch = 10;
  std::size_t patience = 10;  // epochs without val improvement
  std::size_t val_tasks = 20;
  std::size_t test_tasks = 50;
  std::uint64_t seed = 0;
  MamlMode maml_mode = MamlMode::Full;
  bool adam = false;
  Head head = Head::Prototype;  // G-Meta only; swapping in Linear is the MAML ablation

  // Encoder.
  std::size_t hidden_dim = 16;
  std::size_t out_dim = 16;
  bool self_loops = true;
  std::size_t subgraph_cap = kDefaultSubgraphCap;

  // Splits.
  std::size_t test_labels = 2;
  std::size_t val_labels = 2;
  double holdout_graph_fraction = 0.1;
  double link_support_fraction = 0.3;

  // Supervised pretraining for knn / finetune.
  std::size_t pretrain_steps = 200;
  std::size_t pretrain_batch = 32;
  double pretrain_lr = 0.01;

  void validate() const;
};

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// One classified object: a node, or a node pair when v != kNoNode.
struct TaskItem {
  std::uint32_t graph = 0;
  NodeId u = 0;
  NodeId v = kNoNode;
  int label = 0;  // episode-local label in [0, n_way)
  friend bool operator==(const TaskItem&, const TaskItem&) = default;
};

struct Task {
  std::vector<TaskItem> support;
  std::vector<TaskItem> query;
  std::vector<LabelId> label_set;  // local label i <-> global label_set[i]
};

/// Memoized subgraph extraction. Cap subsampling draws from a stream keyed
/// by the item, so results do not depend on request order or on eviction.
/// Node subgraphs are kept for the cache's lifetime; node-pair subgraphs are
/// unbounded in number, so that memo is dropped once it holds `pair_limit`.
class SubgraphCache {
 public:
  SubgraphCache(const Dataset& data, int hop, std::size_t cap, std::uint64_t seed,
                std::size_t pair_limit = kDefaultPairLimit);
  std::shared_ptr<const Subgraph> get(const TaskItem& item);
  std::size_t size() const { return nodes_.size() + pairs_.size(); }

  static constexpr std::size_t kDefaultPairLimit = 4096;

 private:
  using Key = std::tuple<std::uint32_t, NodeId, NodeId>;
  const Dataset* data_;
  int hop_;
  std::size_t cap_;
  std::uint64_t seed_;
  std::size_t pair_limit_;
  std::map<Key, std::shared_ptr<const Subgraph>> nodes_, pairs_;
};

// Pools of candidate items per global label.
using LabelPools = std::map<LabelId, std::vector<TaskItem>>;

/// Problem 1 and 3: labels drawn from `labels`, nodes from the pooled
/// candidates (one graph or many). Throws if a chosen label has fewer than
/// k_support + 1 candidates.
Task sample_task_disjoint(const LabelPools& pools, std::span<const LabelId> labels,
                          const MetaConfig& cfg, Rng& rng);
Task sample_task_disjoint_single(const Graph& g, std::span<const LabelId> labels,
                                 const MetaConfig& cfg, Rng& rng);
/// Problem 2: one graph is drawn from `graph_ids`, then a disjoint-style
/// task inside it over labels that graph has enough nodes for.
Task sample_task_shared_multi(const Dataset& data, std::span<const std::uint32_t> graph_ids,
                              const MetaConfig& cfg, Rng& rng);

struct EdgePools {
  std::vector<Edge> support;  // fixed share of edges for support positives
  std::vector<Edge> query;
};
EdgePools split_edges(const Graph& g, double support_fraction, Rng& rng);
/// Binary link task on one graph: k_support positives from the support
/// pool plus as many non-edges (label 0/1), queries likewise.
Task sample_task_link(const Dataset& data, std::span<const std::uint32_t> graph_ids,
                      std::span<const EdgePools> pools, const MetaConfig& cfg, Rng& rng);

/// Train / val / test task generators for one fold.
class MetaSplit {
 public:
  MetaSplit(const Dataset& data, Problem problem, const MetaConfig& cfg, std::size_t fold);

  enum class Part { Train, Val, Test };
  Task sample(Part part, Rng& rng) const;

  std::span<const LabelId> labels(Part part) const;
  std::span<const std::uint32_t> graphs(Part part) const;
  Problem problem() const { return problem_; }
  /// Root of this fold's random streams.
  std::uint64_t seed() const { return seed_; }

  /// Items (with global labels in TaskItem::label) for supervised
  /// pretraining on the training side of the split.
  std::vector<TaskItem> pretrain_items(Rng& rng) const;
  std::size_t pretrain_classes() const;

 private:
  const Dataset* data_;
  Problem problem_;
  MetaConfig cfg_;
  std::uint64_t seed_;
  std::size_t pretrain_classes_ = 0;
  std::vector<LabelId> train_labels_, val_labels_, test_labels_;
  std::vector<std::uint32_t> train_graphs_, val_graphs_, test_graphs_;
  LabelPools pools_;
  std::vector<EdgePools> edge_pools_;
};

// --- classification heads ---------------------------------------------------

/// Row k = mean of support rows with label k.
ad::Var prototypes(ad::Tape& tape, ad::Var support, std::span<const int> labels,
                   std::size_t n_way);
/// log softmax over negative Euclidean distances, one row per embedding.
ad::Var class_log_probs(ad::Tape& tape, ad::Var h, ad::Var protos);
ad::Var class_distribution(ad::Tape& tape, ad::Var h, ad::Var protos);
/// Mean of -log p_y over rows; log p is floored at log(1e-12).
ad::Var proto_loss(ad::Tape& tape, ad::Var log_probs, std::span<const int> labels);

inline constexpr double kDistanceEps = 1e-10;

struct ModelSpec {
  GcnConfig gcn;
  Head head = Head::Prototype;
  std::size_t n_way = 2;
};
ModelSpec model_spec(const MetaConfig& cfg, std::size_t in_dim, Head head);
/// GCN weights, plus "head.w"/"head.b" for the linear head.
ParamSet init_model(const ModelSpec& spec, Rng& rng);

/// Inner/outer losses of one episode. Prototypes are formed from the
/// support set at the parameters of each inner step and reused by the
/// following query evaluation.
class EpisodeObjective : public InnerLoopObjective {
 public:
  EpisodeObjective(const Task& task, SubgraphCache& cache, const ModelSpec& spec);

  ad::Var support_loss(ad::Tape& tape, std::span<const ad::Var> params) override;
  ad::Var query_loss(ad::Tape& tape, std::span<const ad::Var> params) override;
  /// Query log-probabilities at `params` (prototypes from the last support pass).
  ad::Var query_log_probs(ad::Tape& tape, std::span<const ad::Var> params);
  const std::vector<int>& query_labels() const { return query_labels_; }
  /// Log-probabilities recorded by the most recent query_loss call.
  ad::Var last_query_log_probs() const { return last_query_; }

 private:
  ad::Var embed(ad::Tape& tape, const SubgraphBatch& b, std::span<const ad::Var> params) const;
  ad::Var log_probs(ad::Tape& tape, ad::Var emb, std::span<const ad::Var> params) const;

  ModelSpec spec_;
  SubgraphBatch support_, query_;
  std::vector<int> support_labels_, query_labels_;
  ad::Var protos_;
  ad::Var last_query_;
};

/// Fraction of rows whose argmax (first on ties) equals the label.
double accuracy(const Tensor& log_probs, std::span<const int> labels);

// --- training ---------------------------------------------------------------

struct LogRecord {
  std::size_t step = 0;
  double mean_query_loss = 0.0;
  std::optional<double> val_acc;
};

struct TrainResult {
  ParamSet params;  // best by validation accuracy
  std::vector<LogRecord> log;
  double best_val_acc = 0.0;
  std::size_t steps = 0;
};

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_task;
};

/// Per-task meta-gradient hook: returns the query loss and adds the task's
/// gradient into `grad_sum`.
using TaskGradient = std::function<double(const Task&, const ParamSet&, ParamSet& grad_sum)>;
/// Per-task accuracy hook for validation / test.
using TaskScore = std::function<double(const Task&, const ParamSet&)>;

/// Generic episodic outer loop: m tasks per step, summed gradients, SGD (or
/// Adam) on theta, validation every epoch with early stopping.
TrainResult episodic_train(const MetaSplit& split, const MetaConfig& cfg, ParamSet theta,
                           const TaskGradient& task_grad, const TaskScore& score);

/// G-Meta: episodic training through `inner_steps_train` adaptation steps.
TrainResult meta_train(const MetaSplit& split, SubgraphCache& cache, const MetaConfig& cfg,
                       const ModelSpec& spec, ParamSet theta0);

/// Adapt on each task's support for `steps` then score its query set.
double adapted_task_accuracy(const Task& task, SubgraphCache& cache, const ModelSpec& spec,
                             const ParamSet& theta, double alpha, int steps);
EvalResult meta_test(const ParamSet& theta, std::span<const Task> tasks, SubgraphCache& cache,
                     const MetaConfig& cfg, const ModelSpec& spec);

std::vector<Task> sample_tasks(const MetaSplit& split, MetaSplit::Part part, std::size_t count,
                               std::uint64_t seed);

/// Full run of one method on one fold.
struct MethodOutcome {
  EvalResult test;
  TrainResult train;    // empty for methods without episodic training
  ParamSet checkpoint;  // trained theta, or the pretrained encoder; empty for no_finetune
};
MethodOutcome run_method(Method method, const Dataset& data, Problem problem,
                         const MetaConfig& cfg, std::size_t fold);
/// Meta-test only, from a checkpoint produced by run_method with the same
/// config and fold.
EvalResult evaluate_checkpoint(Method method, const Dataset& data, Problem problem,
                               const MetaConfig& cfg, std::size_t fold, const ParamSet& checkpoint);

// Baseline pieces, exposed for tests.
TrainResult protonet_train(const MetaSplit& split, SubgraphCache& cache, const MetaConfig& cfg,
                           const ModelSpec& spec, ParamSet theta0);
/// Supervised GCN + linear head over the split's pretraining items.
ParamSet pretrain_encoder(const MetaSplit& split, SubgraphCache& cache, const MetaConfig& cfg,
                          std::size_t in_dim, Rng& rng);
/// Majority vote among the K nearest support embeddings (ties: smaller
/// summed distance, then lower label).
std::vector<int> knn_predict(const Tensor& support, std::span<const int> support_labels,
                             const Tensor& query, std::size_t k, std::size_t n_way);

}  // namespace gmeta
