#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gmeta/runner.hpp"
#include "test_util.hpp"

namespace gmeta {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gmeta_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Graph labeled_cycle(std::size_t n) {
  std::vector<LabelId> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<LabelId>(i % 7);
  return testing::cycle_graph(n).with_labels(labels);
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.output_dir = out;
  c.folds = 2;
  c.meta.k_query = 2;
  c.meta.hidden_dim = c.meta.out_dim = 4;
  c.meta.epochs = 2;
  c.meta.batches_per_epoch = 2;
  c.meta.tasks_per_batch = 2;
  c.meta.val_tasks = 2;
  c.meta.test_tasks = 3;
  c.meta.inner_steps_train = 1;
  c.meta.inner_steps_test = 2;
  c.meta.pretrain_steps = 3;
  return c;
}

TEST(Config, ParsesKeyValueText) {
  const auto c = parse_config(
      "# comment\nmethod = maml\nproblem=multi_shared\n k_support = 3 \ninner_lr = 0.005\n"
      "maml_mode = first_order\noptimizer = adam\nrecord_wall_clock = true\n");
  EXPECT_EQ(c.method, Method::Maml);
  EXPECT_EQ(c.problem, Problem::MultiShared);
  EXPECT_EQ(c.meta.k_support, 3u);
  EXPECT_DOUBLE_EQ(c.meta.inner_lr, 0.005);
  EXPECT_EQ(c.meta.maml_mode, MamlMode::FirstOrder);
  EXPECT_TRUE(c.meta.adam);
  EXPECT_TRUE(c.record_wall_clock);
}

TEST(Config, RoundTripsThroughText) {
  ExperimentConfig c;
  c.meta.outer_lr = 0.1 + 0.2;  // not exactly representable in short decimal
  c.meta.head = Head::Linear;
  c.dataset = "some/dir";
  const auto back = parse_config(config_to_text(c));
  EXPECT_EQ(config_to_text(back), config_to_text(c));
  EXPECT_EQ(back.meta.outer_lr, c.meta.outer_lr);
}

TEST(Config, RejectsUnknownKeysWithLine) {
  try {
    parse_config("folds = 2\nlearning_rate = 3\n");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
  EXPECT_THROW(parse_config("folds = two\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("maml_mode = second\n"), std::invalid_argument);
}

TEST(Config, OutputRootFromEnvironment) {
  ::setenv("GMETA_OUTPUT_ROOT", "/tmp/root", 1);
  EXPECT_EQ(resolve_output("runs/a"), fs::path("/tmp/root/runs/a"));
  EXPECT_EQ(resolve_output("/abs/x"), fs::path("/abs/x"));
  ::unsetenv("GMETA_OUTPUT_ROOT");
  EXPECT_EQ(resolve_output("runs/a"), fs::path("runs/a"));
}

TEST(Config, IncompatibleCombinationsFailEarly) {
  ExperimentConfig c;
  Dataset two{"two", {labeled_cycle(30), labeled_cycle(30)}};
  for (auto& g : two.graphs) g = g.with_features(degree_features(g, 4));
  c.problem = Problem::SingleDisjoint;
  EXPECT_THROW(check_compatible(c, two), std::invalid_argument);
  c.problem = Problem::Link;
  c.meta.n_way = 3;
  EXPECT_THROW(check_compatible(c, two), std::invalid_argument);
  c.problem = Problem::MultiShared;
  Dataset unlabeled{"u", {testing::cycle_graph(10)}};
  unlabeled.graphs[0] = unlabeled.graphs[0].with_features(degree_features(unlabeled.graphs[0], 4));
  c.meta.n_way = 2;
  EXPECT_THROW(check_compatible(c, unlabeled), std::invalid_argument);
}

TEST(Datasets, RoundTripWithDegreeFallback) {
  const fs::path dir = scratch_dir("ds");
  const Graph a = labeled_cycle(12);
  const Graph b = testing::star_graph(4).with_features(Tensor(5, 2, 0.5));
  const std::vector<Graph> gs = {a, b};
  write_dataset(dir, "mix", gs);
  const Dataset d = load_dataset(dir, 3);
  ASSERT_EQ(d.graphs.size(), 2u);
  EXPECT_EQ(d.name, "mix");
  EXPECT_EQ(d.graphs[0].edges().size(), a.edges().size());
  EXPECT_EQ(std::vector<LabelId>(d.graphs[0].labels().begin(), d.graphs[0].labels().end()),
            std::vector<LabelId>(a.labels().begin(), a.labels().end()));
  // No feature file: saturating one-hot degree.
  EXPECT_EQ(d.graphs[0].features(), degree_features(a, 3));
  EXPECT_EQ(d.graphs[1].features(), b.features());
  EXPECT_FALSE(d.graphs[1].has_labels());
}

TEST(Datasets, SyntheticManifestListsTenGraphs) {
  const fs::path dir = scratch_dir("cm");
  write_synthetic(dir, "cycle_multi", generate_synthetic("cycle_multi", 1));
  EXPECT_EQ(load_dataset(dir, 4).graphs.size(), 10u);
  EXPECT_TRUE(fs::exists(dir / "metadata.json"));
}

TEST(Datasets, BadLinesCarryFileAndLine) {
  const fs::path dir = scratch_dir("bad");
  write_dataset(dir, "bad", std::vector<Graph>{labeled_cycle(6)});
  {
    std::ofstream out(dir / "g0.edges", std::ios::app);
    out << "0\t1\n";
  }
  try {
    load_dataset(dir, 3);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("g0.edges:7"), std::string::npos) << e.what();
  }
  {
    std::ofstream f(dir / "g0.features");
    f << "1 0\n0 1\n";
  }
  std::ofstream(dir / "manifest.json")
      << R"({"graphs":[{"nodes":6,"edges":"g1.edges","features":"g0.features"}]})";
  write_edge_list(dir / "g1.edges", testing::cycle_graph(6).edges());
  EXPECT_THROW(load_dataset(dir, 3), std::runtime_error);
}

TEST(Datasets, UnknownSyntheticName) {
  EXPECT_THROW(generate_synthetic("grid_single", 0), std::invalid_argument);
}

TEST(Experiment, WritesResultsSummaryLogsAndCheckpoints) {
  const fs::path out = scratch_dir("exp");
  ExperimentConfig c = tiny(out);
  const Dataset d{"cyc", {labeled_cycle(60).with_features(degree_features(labeled_cycle(60), 3))}};
  const auto r = run_experiment(c, d);
  ASSERT_EQ(r.folds.size(), 2u);
  const std::string csv = slurp(out / "results.csv");
  std::istringstream lines(csv);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "method,problem,dataset,fold,seed,accuracy,wall_clock_s");
  EXPECT_EQ(rows[1].rfind("gmeta,single_disjoint,", 0), 0u);
  EXPECT_NE(rows[3].find(",mean,"), std::string::npos);
  EXPECT_EQ(rows[1].substr(rows[1].size() - 3), ",NA");
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_TRUE(fs::exists(out / "logs" / "fold1.jsonl"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "fold0.json"));
  const auto j = nlohmann::json::parse(slurp(out / "logs" / "fold0.jsonl").substr(0, slurp(out / "logs" / "fold0.jsonl").find('\n')));
  EXPECT_TRUE(j.contains("step"));
  EXPECT_TRUE(j.contains("mean_query_loss"));
  EXPECT_TRUE(j.contains("val_acc"));
  EXPECT_NEAR(r.mean, (r.folds[0].test.mean + r.folds[1].test.mean) / 2.0, 1e-15);
}

TEST(Experiment, SameSeedSameBytes) {
  const Dataset d{"cyc", {labeled_cycle(60).with_features(degree_features(labeled_cycle(60), 3))}};
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run_experiment(tiny(a), d);
  run_experiment(tiny(b), d);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  EXPECT_EQ(slurp(a / "checkpoints" / "fold1.json"), slurp(b / "checkpoints" / "fold1.json"));
}

TEST(Experiment, ParallelFoldsMatchSequential) {
  const Dataset d{"cyc", {labeled_cycle(60).with_features(degree_features(labeled_cycle(60), 3))}};
  const fs::path a = scratch_dir("par_a"), b = scratch_dir("par_b");
  auto ca = tiny(a), cb = tiny(b);
  cb.parallel_folds = true;
  run_experiment(ca, d);
  run_experiment(cb, d);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
}

TEST(Experiment, EvalFromCheckpointsReproducesTest) {
  const fs::path out = scratch_dir("eval");
  const fs::path data = scratch_dir("eval_data");
  const Graph g = labeled_cycle(60);
  write_dataset(data, "cyc", std::vector<Graph>{g});
  for (Method m : {Method::GMeta, Method::Knn, Method::ProtoNet}) {
    ExperimentConfig c = tiny(out);
    c.method = m;
    c.dataset = data.string();
    c.degree_dim = 3;
    const auto trained = run_experiment(c);
    const auto again = eval_experiment(c);
    for (std::size_t f = 0; f < c.folds; ++f)
      EXPECT_EQ(again.folds[f].test.per_task, trained.folds[f].test.per_task) << method_name(m);
    EXPECT_TRUE(fs::exists(out / "eval.csv"));
  }
}

TEST(Theory, PathDatasetPasses) {
  const Dataset d{"paths", {testing::path_graph(6), testing::cycle_graph(7)}};
  const auto j = theory_report(d, {}, {});
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["graphs_checked"], 2);
  EXPECT_EQ(j["graphs"][0]["nodes"].size(), 6u);
}

TEST(Theory, EmptyDatasetIsEmptyReport) {
  const auto j = theory_report(Dataset{"none", {}}, {}, {});
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["graphs"].size(), 0u);
}

TEST(Theory, OverflowingGraphIsSkipped) {
  // Dense graph with a huge layer count overflows walk counts.
  std::vector<Edge> e;
  for (NodeId u = 0; u < 40; ++u)
    for (NodeId v = u + 1; v < 40; ++v) e.push_back({u, v});
  const Dataset d{"dense", {Graph(40, e), testing::path_graph(3)}};
  const auto j = theory_report(d, 400, 1);
  EXPECT_EQ(j["skipped"].size(), 1u);
  EXPECT_EQ(j["graphs_checked"], 1);
}

}  // namespace
}  // namespace gmeta
