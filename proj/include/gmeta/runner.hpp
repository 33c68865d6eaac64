#pragma once

// Experiment configuration, dataset directories, and result files.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmeta/meta.hpp"
#include "gmeta/synthetic.hpp"

namespace gmeta {

struct ExperimentConfig {
  Problem problem = Problem::SingleDisjoint;
  Method method = Method::GMeta;
  // A dataset directory, or "synthetic:<family>_<setting>" such as
  // synthetic:cycle_single or synthetic:ba_multi.
  std::string dataset = "synthetic:cycle_single";
  std::uint64_t data_seed = 0;  // generator seed for synthetic datasets
  std::size_t folds = 5;
  std::filesystem::path output_dir = "runs";
  std::size_t degree_dim = 8;   // width of substituted degree features
  bool record_wall_clock = false;
  bool parallel_folds = false;
  bool checkpoints = true;
  MetaConfig meta;
};

/// Applies one `key=value` setting. Unknown keys and malformed values throw.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Flat `key = value` text; '#' starts a comment.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Every setting, one per line, in a form parse_config reads back.
std::string config_to_text(const ExperimentConfig& cfg);

/// Output locations are resolved under $GMETA_OUTPUT_ROOT when it is set and
/// the path is relative.
std::filesystem::path resolve_output(const std::filesystem::path& p);

/// Throws before any compute if the method, problem and data cannot work
/// together.
void check_compatible(const ExperimentConfig& cfg, const Dataset& data);

// --- datasets ------------------------------------------------------------------

/// Directory layout: manifest.json listing graphs as
/// {"name": ..., "graphs": [{"nodes": n, "edges": f, "features": f?, "labels": f?}]}.
Dataset load_dataset(const std::filesystem::path& dir, std::size_t degree_dim);
void write_dataset(const std::filesystem::path& dir, const std::string& name,
                   std::span<const Graph> graphs);

/// "cycle_single", "cycle_multi", "ba_single", "ba_multi".
std::vector<SyntheticGraph> generate_synthetic(const std::string& which, std::uint64_t seed);
/// Writes the graphs plus metadata.json (placements, role map, seed).
void write_synthetic(const std::filesystem::path& dir, const std::string& which,
                     const std::vector<SyntheticGraph>& graphs);

/// Loads cfg.dataset (generating synthetic data in memory) and adds degree
/// features where a graph has none.
Dataset resolve_dataset(const ExperimentConfig& cfg);

// --- experiments ---------------------------------------------------------------

struct FoldRecord {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  EvalResult test;
  double wall_clock_s = 0.0;
};

struct ExperimentResult {
  std::vector<FoldRecord> folds;
  double mean = 0.0;
  double stddev = 0.0;  // sample std over folds
};

/// Runs every fold and writes, under the output directory:
///   results.csv    method,problem,dataset,fold,seed,accuracy,wall_clock_s
///                  (one row per fold plus a "mean" row)
///   summary.json   config, per-fold and overall mean / std
///   config.txt     the resolved configuration
///   logs/fold<k>.jsonl, checkpoints/fold<k>.json
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data);

/// Meta-test only from the checkpoints a previous run_experiment wrote.
/// Writes eval.csv in the same schema.
ExperimentResult eval_experiment(const ExperimentConfig& cfg);

std::string results_csv(const ExperimentConfig& cfg, const ExperimentResult& r);

/// Influence reports for every node of every graph plus an aggregate verdict.
/// Graphs that exceed the exact-check budget are listed under "skipped".
nlohmann::json theory_report(const Dataset& data, std::optional<int> layers,
                             std::optional<int> max_h);

}  // namespace gmeta
