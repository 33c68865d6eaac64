#include "gmeta/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gmeta/theory.hpp"

namespace gmeta {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T x{};
  in >> x;
  if (!in || !in.eof()) throw std::invalid_argument("bad value for " + key + ": '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("bad value for " + key + ": '" + v + "' (expected true/false)");
}

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// key -> (setter, getter) over the whole config.
struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field number(T MetaConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.meta.*m = parse_number<T>(k, v);
          },
          [m](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.meta.*m);
            else return std::to_string(c.meta.*m);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"problem", {[](auto& c, auto&, auto& v) { c.problem = parse_problem(v); },
                   [](auto& c) { return std::string(problem_name(c.problem)); }}},
      {"method", {[](auto& c, auto&, auto& v) { c.method = parse_method(v); },
                  [](auto& c) { return std::string(method_name(c.method)); }}},
      {"dataset", {[](auto& c, auto&, auto& v) { c.dataset = v; }, [](auto& c) { return c.dataset; }}},
      {"data_seed", {[](auto& c, auto& k, auto& v) { c.data_seed = parse_number<std::uint64_t>(k, v); },
                     [](auto& c) { return std::to_string(c.data_seed); }}},
      {"folds", {[](auto& c, auto& k, auto& v) { c.folds = parse_number<std::size_t>(k, v); },
                 [](auto& c) { return std::to_string(c.folds); }}},
      {"output_dir", {[](auto& c, auto&, auto& v) { c.output_dir = v; },
                      [](auto& c) { return c.output_dir.string(); }}},
      {"degree_dim", {[](auto& c, auto& k, auto& v) { c.degree_dim = parse_number<std::size_t>(k, v); },
                      [](auto& c) { return std::to_string(c.degree_dim); }}},
      {"record_wall_clock", {[](auto& c, auto& k, auto& v) { c.record_wall_clock = parse_bool(k, v); },
                             [](auto& c) { return std::string(c.record_wall_clock ? "true" : "false"); }}},
      {"parallel_folds", {[](auto& c, auto& k, auto& v) { c.parallel_folds = parse_bool(k, v); },
                          [](auto& c) { return std::string(c.parallel_folds ? "true" : "false"); }}},
      {"checkpoints", {[](auto& c, auto& k, auto& v) { c.checkpoints = parse_bool(k, v); },
                       [](auto& c) { return std::string(c.checkpoints ? "true" : "false"); }}},
      {"n_way", number(&MetaConfig::n_way)},
      {"k_support", number(&MetaConfig::k_support)},
      {"k_query", number(&MetaConfig::k_query)},
      {"hop", number(&MetaConfig::hop)},
      {"inner_lr", number(&MetaConfig::inner_lr)},
      {"outer_lr", number(&MetaConfig::outer_lr)},
      {"inner_steps_train", number(&MetaConfig::inner_steps_train)},
      {"inner_steps_test", number(&MetaConfig::inner_steps_test)},
      {"tasks_per_batch", number(&MetaConfig::tasks_per_batch)},
      {"epochs", number(&MetaConfig::epochs)},
      {"batches_per_epoch", number(&MetaConfig::batches_per_epoch)},
      {"patience", number(&MetaConfig::patience)},
      {"val_tasks", number(&MetaConfig::val_tasks)},
      {"test_tasks", number(&MetaConfig::test_tasks)},
      {"seed", number(&MetaConfig::seed)},
      {"hidden_dim", number(&MetaConfig::hidden_dim)},
      {"out_dim", number(&MetaConfig::out_dim)},
      {"subgraph_cap", number(&MetaConfig::subgraph_cap)},
      {"test_labels", number(&MetaConfig::test_labels)},
      {"val_labels", number(&MetaConfig::val_labels)},
      {"holdout_graph_fraction", number(&MetaConfig::holdout_graph_fraction)},
      {"link_support_fraction", number(&MetaConfig::link_support_fraction)},
      {"pretrain_steps", number(&MetaConfig::pretrain_steps)},
      {"pretrain_batch", number(&MetaConfig::pretrain_batch)},
      {"pretrain_lr", number(&MetaConfig::pretrain_lr)},
      {"maml_mode",
       {[](auto& c, auto& k, auto& v) {
          if (v == "full") c.meta.maml_mode = MamlMode::Full;
          else if (v == "first_order") c.meta.maml_mode = MamlMode::FirstOrder;
          else throw std::invalid_argument("bad value for " + k + ": '" + v + "' (full|first_order)");
        },
        [](auto& c) { return std::string(c.meta.maml_mode == MamlMode::Full ? "full" : "first_order"); }}},
      {"optimizer",
       {[](auto& c, auto& k, auto& v) {
          if (v == "sgd" || v == "adam") c.meta.adam = v == "adam";
          else throw std::invalid_argument("bad value for " + k + ": '" + v + "' (sgd|adam)");
        },
        [](auto& c) { return std::string(c.meta.adam ? "adam" : "sgd"); }}},
      {"head",
       {[](auto& c, auto& k, auto& v) {
          if (v == "prototype") c.meta.head = Head::Prototype;
          else if (v == "linear") c.meta.head = Head::Linear;
          else throw std::invalid_argument("bad value for " + k + ": '" + v + "' (prototype|linear)");
        },
        [](auto& c) { return std::string(c.meta.head == Head::Prototype ? "prototype" : "linear"); }}},
      {"self_loops", {[](auto& c, auto& k, auto& v) { c.meta.self_loops = parse_bool(k, v); },
                      [](auto& c) { return std::string(c.meta.self_loops ? "true" : "false"); }}},
  };
  return f;
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig cfg) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(no) + ": expected key = value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
  try {
    return parse_config(read_file(path), std::move(base));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

fs::path resolve_output(const fs::path& p) {
  const char* root = std::getenv("GMETA_OUTPUT_ROOT");
  if (root && *root && p.is_relative()) return fs::path(root) / p;
  return p;
}

void check_compatible(const ExperimentConfig& cfg, const Dataset& data) {
  const auto fail = [&](const std::string& why) {
    throw std::invalid_argument(std::string(method_name(cfg.method)) + " on " +
                                problem_name(cfg.problem) + ": " + why);
  };
  cfg.meta.validate();
  if (cfg.folds == 0) fail("folds must be >= 1");
  if (data.graphs.empty()) fail("dataset has no graphs");
  if (cfg.problem == Problem::SingleDisjoint && data.graphs.size() != 1)
    fail("needs exactly one graph, dataset has " + std::to_string(data.graphs.size()));
  if (cfg.problem == Problem::Link) {
    if (cfg.meta.n_way != 2) fail("link prediction is 2-way (edge / non-edge)");
  } else {
    for (const Graph& g : data.graphs)
      if (!g.has_labels()) fail("node classification needs node labels");
  }
  if (cfg.method == Method::GMeta && cfg.meta.head == Head::Linear && cfg.meta.n_way < 2)
    fail("linear head needs n_way >= 2");
  const std::size_t d = data.graphs.front().feature_dim();
  for (const Graph& g : data.graphs)
    if (g.feature_dim() != d) fail("graphs disagree on feature width");
}

// --- datasets -------------------------------------------------------------------

Dataset load_dataset(const fs::path& dir, std::size_t degree_dim) {
  const fs::path manifest = dir / "manifest.json";
  json m;
  try {
    m = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest.string() + ": " + e.what());
  }
  Dataset d;
  d.name = m.value("name", dir.filename().string());
  for (const auto& entry : m.at("graphs")) {
    const auto edges = read_edge_list(dir / entry.at("edges").get<std::string>());
    std::size_t n = entry.value("nodes", std::size_t{0});
    for (const Edge& e : edges) n = std::max<std::size_t>(n, std::max(e.u, e.v) + 1);
    std::vector<LabelId> labels;
    if (entry.contains("labels")) labels = read_labels(dir / entry["labels"].get<std::string>(), n);
    std::optional<Tensor> feats;
    if (entry.contains("features")) {
      const fs::path fp = dir / entry["features"].get<std::string>();
      feats = read_features(fp);
      if (feats->rows() != n)
        throw std::runtime_error(fp.string() + ": " + std::to_string(feats->rows()) +
                                 " feature rows for " + std::to_string(n) + " nodes");
    }
    Graph g(n, edges, std::move(feats), std::move(labels));
    if (!g.has_features()) g = g.with_features(degree_features(g, degree_dim));
    d.graphs.push_back(std::move(g));
  }
  return d;
}

void write_dataset(const fs::path& dir, const std::string& name, std::span<const Graph> graphs) {
  fs::create_directories(dir);
  json m{{"name", name}, {"graphs", json::array()}};
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const std::string stem = "g" + std::to_string(i);
    json entry{{"nodes", graphs[i].node_count()}, {"edges", stem + ".edges"}};
    write_edge_list(dir / (stem + ".edges"), graphs[i].edges());
    if (graphs[i].has_features()) {
      write_features(dir / (stem + ".features"), graphs[i].features());
      entry["features"] = stem + ".features";
    }
    if (graphs[i].has_labels()) {
      write_labels(dir / (stem + ".labels"), graphs[i].labels());
      entry["labels"] = stem + ".labels";
    }
    m["graphs"].push_back(entry);
  }
  write_file(dir / "manifest.json", m.dump(1) + "\n");
}

std::vector<SyntheticGraph> generate_synthetic(const std::string& which, std::uint64_t seed) {
  constexpr std::size_t kMultiGraphs = 10;
  if (which == "cycle_single") return {gen_cycle_dataset(cycle_single_spec(seed))};
  if (which == "cycle_multi") {
    std::vector<SyntheticGraph> out;
    for (const auto& s : cycle_multi_specs(kMultiGraphs, seed)) out.push_back(gen_cycle_dataset(s));
    return out;
  }
  if (which == "ba_single") return {gen_ba_dataset(ba_single_spec(seed))};
  if (which == "ba_multi") {
    std::vector<SyntheticGraph> out;
    for (const auto& s : ba_multi_specs(kMultiGraphs, seed)) out.push_back(gen_ba_structure(s));
    label_by_graphlets(out, kBaLabels, derive_seed(seed, "labels"));
    return out;
  }
  throw std::invalid_argument("unknown synthetic dataset '" + which +
                              "' (cycle_single|cycle_multi|ba_single|ba_multi)");
}

void write_synthetic(const fs::path& dir, const std::string& which,
                     const std::vector<SyntheticGraph>& graphs) {
  std::vector<Graph> gs;
  for (const auto& s : graphs) gs.push_back(s.graph);
  write_dataset(dir, which, gs);
  write_file(dir / "metadata.json",
             synthetic_metadata_json(graphs, which.substr(0, which.find('_'))) + "\n");
}

Dataset resolve_dataset(const ExperimentConfig& cfg) {
  constexpr std::string_view kPrefix = "synthetic:";
  if (cfg.dataset.starts_with(kPrefix)) {
    const std::string which = cfg.dataset.substr(kPrefix.size());
    Dataset d{which, {}};
    for (auto& s : generate_synthetic(which, cfg.data_seed))
      d.graphs.push_back(s.graph.with_features(degree_features(s.graph, cfg.degree_dim)));
    return d;
  }
  return load_dataset(cfg.dataset, cfg.degree_dim);
}

// --- experiments ------------------------------------------------------------------

namespace {

ExperimentResult aggregate(std::vector<FoldRecord> folds) {
  ExperimentResult r;
  r.folds = std::move(folds);
  const double n = static_cast<double>(r.folds.size());
  for (const auto& f : r.folds) r.mean += f.test.mean / n;
  double ss = 0.0;
  for (const auto& f : r.folds) ss += (f.test.mean - r.mean) * (f.test.mean - r.mean);
  r.stddev = r.folds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return r;
}

std::string dataset_label(const ExperimentConfig& cfg) {
  return cfg.dataset.starts_with("synthetic:") ? cfg.dataset
                                               : fs::path(cfg.dataset).filename().string();
}

std::string log_jsonl(const TrainResult& t) {
  std::string out;
  for (const auto& rec : t.log) {
    json j{{"step", rec.step}, {"mean_query_loss", rec.mean_query_loss}};
    j["val_acc"] = rec.val_acc ? json(*rec.val_acc) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

json summary_json(const ExperimentConfig& cfg, const ExperimentResult& r) {
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold}, {"seed", f.seed}, {"accuracy", f.test.mean},
                     {"task_stddev", f.test.stddev}, {"tasks", f.test.per_task.size()}});
  return {{"method", method_name(cfg.method)},
          {"problem", problem_name(cfg.problem)},
          {"dataset", dataset_label(cfg)},
          {"folds", folds},
          {"mean_accuracy", r.mean},
          {"stddev_accuracy", r.stddev}};
}

std::uint64_t fold_seed(const MetaConfig& m, std::size_t fold) {
  return derive_seed(derive_seed(m.seed, "fold"), fold);
}

}  // namespace

std::string results_csv(const ExperimentConfig& cfg, const ExperimentResult& r) {
  auto acc = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return std::string(buf);
  };
  const std::string prefix = std::string(method_name(cfg.method)) + "," +
                             problem_name(cfg.problem) + "," + dataset_label(cfg) + ",";
  std::string out = "method,problem,dataset,fold,seed,accuracy,wall_clock_s\n";
  double wall = 0.0;
  for (const auto& f : r.folds) {
    wall += f.wall_clock_s;
    out += prefix + std::to_string(f.fold) + "," + std::to_string(f.seed) + "," + acc(f.test.mean) +
           "," + (cfg.record_wall_clock ? acc(f.wall_clock_s) : "NA") + "\n";
  }
  out += prefix + "mean," + std::to_string(cfg.meta.seed) + "," + acc(r.mean) + "," +
         (cfg.record_wall_clock ? acc(wall) : "NA") + "\n";
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, resolve_dataset(cfg));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  check_compatible(cfg, data);
  const fs::path out = resolve_output(cfg.output_dir);
  fs::create_directories(out);

  auto one = [&](std::size_t fold) {
    const auto t0 = std::chrono::steady_clock::now();
    MethodOutcome o = run_method(cfg.method, data, cfg.problem, cfg.meta, fold);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(std::move(o), s);
  };
  std::vector<std::pair<MethodOutcome, double>> outcomes;
  if (cfg.parallel_folds) {
    std::vector<std::future<std::pair<MethodOutcome, double>>> jobs;
    for (std::size_t f = 0; f < cfg.folds; ++f) jobs.push_back(std::async(std::launch::async, one, f));
    for (auto& j : jobs) outcomes.push_back(j.get());
  } else {
    for (std::size_t f = 0; f < cfg.folds; ++f) outcomes.push_back(one(f));
  }

  std::vector<FoldRecord> folds;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const auto& [o, secs] = outcomes[f];
    folds.push_back({f, fold_seed(cfg.meta, f), o.test, secs});
    if (!o.train.log.empty())
      write_file(out / "logs" / ("fold" + std::to_string(f) + ".jsonl"), log_jsonl(o.train));
    if (cfg.checkpoints && o.checkpoint.size() > 0) {
      fs::create_directories(out / "checkpoints");
      save_params(out / "checkpoints" / ("fold" + std::to_string(f) + ".json"), o.checkpoint);
    }
  }
  ExperimentResult r = aggregate(std::move(folds));
  write_file(out / "results.csv", results_csv(cfg, r));
  write_file(out / "summary.json", summary_json(cfg, r).dump(1) + "\n");
  write_file(out / "config.txt", config_to_text(cfg));
  return r;
}

ExperimentResult eval_experiment(const ExperimentConfig& cfg) {
  const Dataset data = resolve_dataset(cfg);
  check_compatible(cfg, data);
  const fs::path out = resolve_output(cfg.output_dir);
  std::vector<FoldRecord> folds;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    ParamSet theta;
    if (cfg.method != Method::NoFinetune)
      theta = load_params(out / "checkpoints" / ("fold" + std::to_string(f) + ".json"));
    const auto t0 = std::chrono::steady_clock::now();
    EvalResult e = evaluate_checkpoint(cfg.method, data, cfg.problem, cfg.meta, f, theta);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    folds.push_back({f, fold_seed(cfg.meta, f), std::move(e), s});
  }
  ExperimentResult r = aggregate(std::move(folds));
  write_file(out / "eval.csv", results_csv(cfg, r));
  return r;
}

json theory_report(const Dataset& data, std::optional<int> layers, std::optional<int> max_h) {
  json graphs = json::array(), skipped = json::array();
  bool passed = true;
  std::size_t checked = 0;
  for (std::size_t gi = 0; gi < data.graphs.size(); ++gi) {
    const Graph& g = data.graphs[gi];
    json nodes = json::array();
    bool ok = true;
    try {
      for (NodeId u = 0; u < g.node_count(); ++u) {
        const auto rep = theory::influence_report(g, u, layers, max_h);
        ok = ok && rep.passed;
        nodes.push_back(theory::to_json(rep));
      }
    } catch (const std::runtime_error& e) {
      skipped.push_back({{"graph", gi}, {"reason", e.what()}});
      continue;
    }
    ++checked;
    passed = passed && ok;
    graphs.push_back({{"graph", gi}, {"passed", ok}, {"nodes", nodes}});
  }
  return {{"dataset", data.name}, {"graphs_checked", checked}, {"passed", passed},
          {"skipped", skipped}, {"graphs", graphs}};
}

}  // namespace gmeta
