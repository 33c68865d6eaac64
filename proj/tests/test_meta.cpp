#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gmeta/meta.hpp"
#include "gmeta/synthetic.hpp"
#include "test_util.hpp"

namespace gmeta {
namespace {

using ad::Tape;
using ad::Var;

Dataset small_cycle(std::uint64_t seed = 3) {
  SyntheticSpec spec;
  spec.base_size = 40;
  spec.shape_counts = {4, 4, 4, 4};
  spec.noise_edges = 10;
  spec.seed = seed;
  const Graph g = gen_cycle_dataset(spec).graph;
  return {"small", {g.with_features(degree_features(g, 6))}};
}

Dataset small_multi(std::size_t graphs) {
  Dataset d{"multi", {}};
  for (std::size_t i = 0; i < graphs; ++i) d.graphs.push_back(small_cycle(100 + i).graphs[0]);
  return d;
}

MetaConfig quick_cfg() {
  MetaConfig c;
  c.k_query = 3;
  c.hidden_dim = c.out_dim = 4;
  c.epochs = 2;
  c.batches_per_epoch = 2;
  c.tasks_per_batch = 2;
  c.val_tasks = 3;
  c.test_tasks = 4;
  c.inner_steps_train = 2;
  c.inner_steps_test = 2;
  c.outer_lr = 0.05;
  c.inner_lr = 0.1;
  c.pretrain_steps = 5;
  c.pretrain_batch = 8;
  return c;
}

std::vector<int> label_vec(std::span<const TaskItem> items) {
  std::vector<int> out;
  for (const auto& it : items) out.push_back(it.label);
  return out;
}

// --- heads ------------------------------------------------------------------

TEST(Heads, TwoPrototypeExample) {
  Tape t;
  const Var h = t.constant(Tensor(1, 1, {0.0}));
  const Var c = t.constant(Tensor(2, 1, {0.0, 1.0}));
  const Tensor p = t.value(class_distribution(t, h, c));
  // softmax(-0, -1) with the sqrt eps negligible
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-5);
  EXPECT_NEAR(p(0, 0), 0.73106, 1e-5);
  EXPECT_NEAR(p(0, 0) + p(0, 1), 1.0, 1e-12);
}

TEST(Heads, EquidistantIsUniform) {
  Tape t;
  const Var h = t.constant(Tensor(1, 2, {0.0, 0.0}));
  const Var c = t.constant(Tensor(4, 2, {1, 0, 0, 1, -1, 0, 0, -1}));
  const Tensor lp = t.value(class_log_probs(t, h, c));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(lp(0, k), -std::log(4.0), 1e-12);
}

TEST(Heads, PrototypesAreClassMeans) {
  Tape t;
  const Var s = t.constant(Tensor(4, 2, {1, 2, 3, 4, 10, 10, 5, 6}));
  const std::vector<int> y = {0, 0, 1, 0};
  const Tensor c = t.value(prototypes(t, s, y, 2));
  EXPECT_DOUBLE_EQ(c(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 10.0);
  EXPECT_THROW(prototypes(t, s, std::vector<int>{0, 0, 0, 0}, 2), std::invalid_argument);
}

TEST(Heads, ProtoLossIsMeanNll) {
  Rng rng(5);
  Tape t;
  const Var h = t.constant(testing::random_tensor(5, 3, rng));
  const Var c = t.constant(testing::random_tensor(3, 3, rng));
  const Var lp = class_log_probs(t, h, c);
  const std::vector<int> y = {0, 2, 1, 1, 0};
  double want = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) want -= t.value(lp)(i, static_cast<std::size_t>(y[i]));
  EXPECT_NEAR(t.value(proto_loss(t, lp, y)).item(), want / 5.0, 1e-12);
}

TEST(Heads, ProbabilitiesNormalizedAndNearestWins) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    const Tensor hv = testing::random_tensor(4, 3, rng, -3, 3);
    const Tensor cv = testing::random_tensor(3, 3, rng, -3, 3);
    const Tensor p = t.value(class_distribution(t, t.constant(hv), t.constant(cv)));
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0, best = 1e300;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        sum += p(i, k);
        double d = 0.0;
        for (std::size_t j = 0; j < 3; ++j) d += (hv(i, j) - cv(k, j)) * (hv(i, j) - cv(k, j));
        if (d < best) best = d, arg = k;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      const auto row = p.row(i);
      EXPECT_EQ(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()), arg);
    }
  }
}

TEST(Heads, AccuracyTakesFirstOnTies) {
  const Tensor lp(3, 2, {-1, -1, -2, -0.1, -0.1, -3});
  EXPECT_DOUBLE_EQ(accuracy(lp, std::vector<int>{0, 1, 1}), 2.0 / 3.0);
}

// --- sampling ---------------------------------------------------------------

TEST(Sampling, TwoWayOneShotSizes) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  const MetaSplit split(d, Problem::SingleDisjoint, cfg, 0);
  Rng rng(1);
  const Task t = split.sample(MetaSplit::Part::Train, rng);
  EXPECT_EQ(t.support.size(), 2u);
  EXPECT_EQ(t.query.size(), 6u);
  EXPECT_EQ(t.label_set.size(), 2u);
}

TEST(Sampling, ThreeWayThreeShotHasNineSupport) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.n_way = 3;
  cfg.k_support = 3;
  cfg.test_labels = 3;
  cfg.val_labels = 3;
  const MetaSplit split(d, Problem::SingleDisjoint, cfg, 0);
  Rng rng(2);
  const Task t = split.sample(MetaSplit::Part::Train, rng);
  EXPECT_EQ(t.support.size(), 9u);
  for (int k = 0; k < 3; ++k)
    EXPECT_EQ(std::count_if(t.support.begin(), t.support.end(), [&](auto& i) { return i.label == k; }), 3);
}

TEST(Sampling, ExactlyEnoughNodesUsesAllWithoutDuplicates) {
  LabelPools pools;
  for (NodeId u = 0; u < 4; ++u) pools[7].push_back({0, u, kNoNode, 7});
  for (NodeId u = 4; u < 8; ++u) pools[9].push_back({0, u, kNoNode, 9});
  MetaConfig cfg;
  cfg.k_support = 1;
  cfg.k_query = 3;
  Rng rng(3);
  const std::vector<LabelId> labels = {7, 9};
  const Task t = sample_task_disjoint(pools, labels, cfg, rng);
  std::set<NodeId> seen;
  for (const auto* part : {&t.support, &t.query})
    for (const auto& it : *part) EXPECT_TRUE(seen.insert(it.u).second);
  EXPECT_EQ(seen.size(), 8u);
}

TEST(Sampling, QueryCappedByAvailability) {
  LabelPools pools;
  for (NodeId u = 0; u < 3; ++u) pools[1].push_back({0, u, kNoNode, 1});
  for (NodeId u = 3; u < 30; ++u) pools[2].push_back({0, u, kNoNode, 2});
  MetaConfig cfg;
  cfg.k_query = 24;
  Rng rng(4);
  const std::vector<LabelId> labels = {1, 2};
  const Task t = sample_task_disjoint(pools, labels, cfg, rng);
  EXPECT_EQ(t.query.size(), 4u);  // 2 per class, balanced
}

TEST(Sampling, TooFewNodesNamesTheLabel) {
  LabelPools pools;
  pools[5].push_back({0, 0, kNoNode, 5});
  for (NodeId u = 1; u < 5; ++u) pools[6].push_back({0, u, kNoNode, 6});
  MetaConfig cfg;
  Rng rng(5);
  const std::vector<LabelId> labels = {5, 6};
  try {
    sample_task_disjoint(pools, labels, cfg, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("label 5"), std::string::npos);
  }
}

TEST(Sampling, DisjointLabelSplitNeverLeaks) {
  const Dataset d = small_cycle();
  const MetaConfig cfg = quick_cfg();
  for (std::size_t fold = 0; fold < 5; ++fold) {
    const MetaSplit split(d, Problem::SingleDisjoint, cfg, fold);
    std::map<LabelId, int> owner;
    for (auto part : {MetaSplit::Part::Train, MetaSplit::Part::Val, MetaSplit::Part::Test})
      for (LabelId l : split.labels(part)) EXPECT_TRUE(owner.emplace(l, static_cast<int>(part)).second);
    Rng rng(fold);
    for (auto part : {MetaSplit::Part::Train, MetaSplit::Part::Val, MetaSplit::Part::Test}) {
      const auto allowed = split.labels(part);
      for (int i = 0; i < 20; ++i) {
        const Task t = split.sample(part, rng);
        std::set<NodeId> s;
        for (const auto& it : t.support) s.insert(it.u);
        for (const auto& it : t.query) EXPECT_EQ(s.count(it.u), 0u);
        for (LabelId l : t.label_set)
          EXPECT_NE(std::find(allowed.begin(), allowed.end(), l), allowed.end());
        for (const auto* items : {&t.support, &t.query})
          for (const auto& it : *items)
            EXPECT_EQ(d.graphs[0].label(it.u), t.label_set[static_cast<std::size_t>(it.label)]);
      }
    }
  }
}

TEST(Sampling, SharedLabelsHoldOutGraphs) {
  const Dataset d = small_multi(10);
  const MetaConfig cfg = quick_cfg();
  const MetaSplit split(d, Problem::MultiShared, cfg, 0);
  const auto test = split.graphs(MetaSplit::Part::Test);
  const auto train = split.graphs(MetaSplit::Part::Train);
  EXPECT_EQ(test.size(), 1u);
  EXPECT_EQ(split.graphs(MetaSplit::Part::Val).size(), 1u);
  EXPECT_EQ(train.size(), 8u);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const Task t = split.sample(MetaSplit::Part::Test, rng);
    for (const auto& it : t.support) EXPECT_EQ(it.graph, test[0]);
    for (const auto& it : t.query) EXPECT_EQ(it.graph, test[0]);
  }
}

TEST(Sampling, SingleGraphSharedDegeneratesToWithinGraph) {
  const Dataset d = small_cycle();
  const MetaSplit split(d, Problem::MultiShared, quick_cfg(), 0);
  Rng rng(1);
  const Task t = split.sample(MetaSplit::Part::Test, rng);
  EXPECT_EQ(t.support.size(), 2u);
}

TEST(Sampling, DisjointMultiMayMixGraphs) {
  const Dataset d = small_multi(4);
  const MetaSplit split(d, Problem::MultiDisjoint, quick_cfg(), 0);
  Rng rng(2);
  bool mixed = false;
  for (int i = 0; i < 30 && !mixed; ++i) {
    const Task t = split.sample(MetaSplit::Part::Train, rng);
    std::set<std::uint32_t> gs;
    for (const auto& it : t.query) gs.insert(it.graph);
    mixed = gs.size() > 1;
  }
  EXPECT_TRUE(mixed);
}

TEST(Sampling, LinkTasksUseFixedEdgePools) {
  const Dataset d = small_multi(3);
  MetaConfig cfg = quick_cfg();
  cfg.k_support = 4;
  cfg.k_query = 5;
  const MetaSplit split(d, Problem::Link, cfg, 0);
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const Task t = split.sample(MetaSplit::Part::Train, rng);
    ASSERT_EQ(t.support.size(), 8u);
    ASSERT_EQ(t.query.size(), 10u);
    const Graph& g = d.graphs[t.support[0].graph];
    std::set<std::pair<NodeId, NodeId>> support_pos;
    for (const auto& it : t.support) {
      EXPECT_NE(it.v, kNoNode);
      EXPECT_EQ(g.has_edge(it.u, it.v), it.label == 1);
      if (it.label == 1) support_pos.insert(std::minmax(it.u, it.v));
    }
    for (const auto& it : t.query) {
      EXPECT_EQ(g.has_edge(it.u, it.v), it.label == 1);
      if (it.label == 1) EXPECT_EQ(support_pos.count(std::minmax(it.u, it.v)), 0u);
    }
    EXPECT_EQ(std::count_if(t.query.begin(), t.query.end(), [](auto& it) { return it.label == 1; }), 5);
  }
}

TEST(Sampling, SplitEdgesThirtySeventy) {
  const Dataset d = small_cycle();
  Rng rng(1);
  const auto p = split_edges(d.graphs[0], 0.3, rng);
  const std::size_t m = d.graphs[0].edges().size();
  EXPECT_EQ(p.support.size() + p.query.size(), m);
  EXPECT_EQ(p.support.size(), static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(m))));
}

TEST(Sampling, SplitRejectsTooFewLabels) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.test_labels = 9;
  cfg.val_labels = 9;
  EXPECT_THROW(MetaSplit(d, Problem::SingleDisjoint, cfg, 0), std::invalid_argument);
}

TEST(Subgraphs, CacheIsOrderIndependent) {
  const Dataset d = small_cycle();
  const TaskItem a{0, 3, kNoNode, 0}, b{0, 17, kNoNode, 0};
  SubgraphCache c1(d, 2, 4, 11), c2(d, 2, 4, 11);
  const auto a1 = c1.get(a)->global_ids;
  const auto b1 = c1.get(b)->global_ids;
  EXPECT_EQ(c2.get(b)->global_ids, b1);
  EXPECT_EQ(c2.get(a)->global_ids, a1);
  EXPECT_EQ(c1.size(), 2u);
}

TEST(Subgraphs, PairMemoIsBoundedAndEvictionIsInvisible) {
  const Dataset d = small_cycle();
  SubgraphCache bounded(d, 2, 4, 11, 3), full(d, 2, 4, 11, 1000);
  std::vector<TaskItem> pairs;
  for (NodeId u = 0; u < 10; ++u) pairs.push_back({0, u, static_cast<NodeId>(u + 20), 0});
  for (int round = 0; round < 2; ++round)
    for (const auto& p : pairs) {
      const auto s = bounded.get(p);
      EXPECT_EQ(s->global_ids, full.get(p)->global_ids);
      EXPECT_LE(bounded.size(), 3u);
    }
  EXPECT_EQ(full.size(), pairs.size());
}

// --- meta-gradients and training --------------------------------------------

TEST(Episode, MetaGradientMatchesFiniteDifferences) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.hidden_dim = cfg.out_dim = 3;
  const MetaSplit split(d, Problem::SingleDisjoint, cfg, 0);
  SubgraphCache cache(d, cfg.hop, cfg.subgraph_cap, 1);
  Rng rng(21);
  const Task task = split.sample(MetaSplit::Part::Train, rng);
  const ModelSpec spec = model_spec(cfg, d.graphs[0].feature_dim(), Head::Prototype);
  ParamSet theta = init_model(spec, rng);
  const double alpha = 0.3;
  EpisodeObjective obj(task, cache, spec);
  const auto mg = grad_through_updates(obj, theta, alpha, 2, MamlMode::Full);

  auto procedure = [&](const std::vector<double>& x) {
    ParamSet p = theta;
    p.assign_flat(x);
    EpisodeObjective o(task, cache, spec);
    Tape t;
    const auto vars = p.bind(t);
    return t.value(adapt(t, o, vars, alpha, 2, MamlMode::Full).query_loss).item();
  };
  const auto fd = testing::central_difference(procedure, theta.flatten(), 1e-5);
  const auto got = mg.grad.flatten();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (got[i] - fd[i]) * (got[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
}

TEST(Episode, LinearHeadGradientMatchesFiniteDifferences) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.hidden_dim = cfg.out_dim = 3;
  const MetaSplit split(d, Problem::SingleDisjoint, cfg, 1);
  SubgraphCache cache(d, cfg.hop, cfg.subgraph_cap, 1);
  Rng rng(22);
  const Task task = split.sample(MetaSplit::Part::Train, rng);
  const ModelSpec spec = model_spec(cfg, d.graphs[0].feature_dim(), Head::Linear);
  const ParamSet theta = init_model(spec, rng);
  EpisodeObjective obj(task, cache, spec);
  const auto mg = grad_through_updates(obj, theta, 0.2, 1, MamlMode::Full);
  auto procedure = [&](const std::vector<double>& x) {
    ParamSet p = theta;
    p.assign_flat(x);
    EpisodeObjective o(task, cache, spec);
    Tape t;
    const auto vars = p.bind(t);
    return t.value(adapt(t, o, vars, 0.2, 1, MamlMode::Full).query_loss).item();
  };
  const auto fd = testing::central_difference(procedure, theta.flatten(), 1e-5);
  const auto got = mg.grad.flatten();
  for (std::size_t i = 0; i < fd.size(); ++i)
    EXPECT_NEAR(got[i], fd[i], 1e-6 + 1e-4 * std::abs(fd[i])) << i;
}

TEST(Training, ZeroOuterRateLeavesThetaUnchanged) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.outer_lr = 0.0;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 1;
  cfg.tasks_per_batch = 1;
  cfg.inner_steps_train = 1;
  const MetaSplit split(d, Problem::SingleDisjoint, cfg, 0);
  SubgraphCache cache(d, cfg.hop, cfg.subgraph_cap, 1);
  const ModelSpec spec = model_spec(cfg, d.graphs[0].feature_dim(), Head::Prototype);
  Rng rng(1);
  const ParamSet theta = init_model(spec, rng);
  const TrainResult r = meta_train(split, cache, cfg, spec, theta);
  EXPECT_EQ(r.params, theta);
  EXPECT_EQ(r.steps, 1u);
}

TEST(Training, TrainingLowersQueryLossOnAverage) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.epochs = 8;
  cfg.patience = 100;
  cfg.tasks_per_batch = 4;
  cfg.hidden_dim = cfg.out_dim = 8;
  const MetaSplit split(d, Problem::SingleDisjoint, cfg, 0);
  SubgraphCache cache(d, cfg.hop, cfg.subgraph_cap, 1);
  const ModelSpec spec = model_spec(cfg, d.graphs[0].feature_dim(), Head::Prototype);
  Rng rng(1);
  const TrainResult r = meta_train(split, cache, cfg, spec, init_model(spec, rng));
  ASSERT_EQ(r.log.size(), 16u);
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    early += r.log[i].mean_query_loss;
    late += r.log[r.log.size() - 1 - i].mean_query_loss;
  }
  EXPECT_LT(late, early);
  std::size_t with_val = 0;
  for (const auto& rec : r.log) with_val += rec.val_acc.has_value();
  EXPECT_EQ(with_val, 8u);
}

TEST(Training, NoAdaptationEqualsProtoNetBitForBit) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.inner_steps_train = 0;
  cfg.inner_steps_test = 0;
  const auto g = run_method(Method::GMeta, d, Problem::SingleDisjoint, cfg, 1);
  const auto p = run_method(Method::ProtoNet, d, Problem::SingleDisjoint, cfg, 1);
  ASSERT_EQ(g.train.log.size(), p.train.log.size());
  for (std::size_t i = 0; i < g.train.log.size(); ++i) {
    EXPECT_EQ(g.train.log[i].mean_query_loss, p.train.log[i].mean_query_loss) << i;
    EXPECT_EQ(g.train.log[i].val_acc, p.train.log[i].val_acc) << i;
  }
  EXPECT_EQ(g.train.params, p.train.params);
  EXPECT_EQ(g.test.per_task, p.test.per_task);
}

TEST(Training, LinearHeadSwapEqualsMaml) {
  const Dataset d = small_cycle();
  MetaConfig cfg = quick_cfg();
  cfg.head = Head::Linear;
  const auto g = run_method(Method::GMeta, d, Problem::SingleDisjoint, cfg, 2);
  const auto m = run_method(Method::Maml, d, Problem::SingleDisjoint, cfg, 2);
  ASSERT_EQ(g.train.log.size(), m.train.log.size());
  for (std::size_t i = 0; i < g.train.log.size(); ++i)
    EXPECT_EQ(g.train.log[i].mean_query_loss, m.train.log[i].mean_query_loss);
  EXPECT_EQ(g.train.params, m.train.params);
  EXPECT_EQ(g.test.per_task, m.test.per_task);
}

TEST(Training, RunsAreDeterministic) {
  const Dataset d = small_cycle();
  const MetaConfig cfg = quick_cfg();
  for (Method m : {Method::GMeta, Method::Finetune, Method::Knn}) {
    const auto a = run_method(m, d, Problem::SingleDisjoint, cfg, 0);
    const auto b = run_method(m, d, Problem::SingleDisjoint, cfg, 0);
    EXPECT_EQ(a.test.per_task, b.test.per_task) << method_name(m);
  }
}

TEST(Training, EveryMethodRunsOnEveryProblem) {
  const Dataset single = small_cycle();
  const Dataset multi = small_multi(4);
  MetaConfig cfg = quick_cfg();
  cfg.epochs = 1;
  for (Method m : {Method::GMeta, Method::Knn, Method::NoFinetune, Method::Finetune,
                   Method::ProtoNet, Method::Maml}) {
    for (Problem p : {Problem::SingleDisjoint, Problem::MultiShared, Problem::MultiDisjoint,
                      Problem::Link}) {
      const Dataset& d = p == Problem::SingleDisjoint ? single : multi;
      const auto r = run_method(m, d, p, cfg, 0);
      EXPECT_EQ(r.test.per_task.size(), cfg.test_tasks) << method_name(m) << problem_name(p);
      EXPECT_GE(r.test.mean, 0.0);
      EXPECT_LE(r.test.mean, 1.0);
    }
  }
}

TEST(Training, SampleStddev) {
  const Dataset d = small_cycle();
  const auto r = run_method(Method::NoFinetune, d, Problem::SingleDisjoint, quick_cfg(), 0);
  double m = 0.0, ss = 0.0;
  for (double x : r.test.per_task) m += x;
  m /= static_cast<double>(r.test.per_task.size());
  for (double x : r.test.per_task) ss += (x - m) * (x - m);
  EXPECT_NEAR(r.test.mean, m, 1e-12);
  EXPECT_NEAR(r.test.stddev, std::sqrt(ss / static_cast<double>(r.test.per_task.size() - 1)), 1e-12);
}

// --- knn ----------------------------------------------------------------------

TEST(Knn, SeparableClusters) {
  const Tensor s(4, 2, {0, 0, 0.1, 0, 5, 5, 5, 5.1});
  const std::vector<int> y = {0, 0, 1, 1};
  const Tensor q(3, 2, {0.2, 0.1, 4.9, 5, 1, 1});
  EXPECT_EQ(knn_predict(s, y, q, 2, 2), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(knn_predict(s, y, q, 1, 2), (std::vector<int>{0, 1, 0}));
}

TEST(Knn, TiesBrokenByDistance) {
  // One neighbour from each class: the nearer one wins.
  const Tensor s(2, 1, {0.0, 3.0});
  const std::vector<int> y = {1, 0};
  const Tensor q(2, 1, {1.0, 2.0});
  EXPECT_EQ(knn_predict(s, y, q, 2, 2), (std::vector<int>{1, 0}));
}

TEST(Config, ParseNamesRoundTrip) {
  for (Method m : {Method::GMeta, Method::Knn, Method::NoFinetune, Method::Finetune,
                   Method::ProtoNet, Method::Maml})
    EXPECT_EQ(parse_method(method_name(m)), m);
  for (Problem p : {Problem::SingleDisjoint, Problem::MultiShared, Problem::MultiDisjoint,
                    Problem::Link})
    EXPECT_EQ(parse_problem(problem_name(p)), p);
  EXPECT_THROW(parse_method("svm"), std::invalid_argument);
  MetaConfig c;
  c.n_way = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace gmeta
