#pragma once

// End-to-end orchestration behind the `sleuth` subcommands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sleuth/corpus.hpp"
#include "sleuth/probes.hpp"

namespace sleuth::pipeline {

namespace fs = std::filesystem;

struct StoreRef {
  std::string model;
  fs::path path;
};

struct Seeds {
  std::uint64_t split = 0;
  std::uint64_t control = 0;
  std::uint64_t probe = 0;
};

struct RunConfig {
  std::vector<fs::path> conllu;  // files or directories of *.conllu
  fs::path dataset_dir;          // manifest.jsonl, split.json, control_*.json
  std::vector<StoreRef> stores;  // several stores = checkpoint sweep
  std::vector<corpus::Task> tasks = {corpus::Task::inflection, corpus::Task::lemma};
  std::vector<probes::Family> families = {probes::Family::linear, probes::Family::mlp, probes::Family::forest};
  probes::RidgeGrid ridge_grid;
  probes::MlpGrid mlp_grid;
  probes::ForestGrid forest_grid;
  Seeds seeds;
  std::optional<std::vector<int>> layers;  // default: all
  std::vector<double> thresholds = {50, 60, 70, 80, 90, 95, 99, 100};
  bool pca_train_only = true;
  fs::path analogy_store;
  fs::path analogy_queries;
  fs::path output;

  // Fully resolved configuration (defaults filled in) as JSON text.
  std::string resolved_json() const;
};

// Parses and schema-checks a JSON configuration. Unknown keys, wrong types
// and missing seeds raise ConfigError. Relative paths resolve against
// `base_dir`.
RunConfig parse_config(std::string_view text, const fs::path& base_dir = {});
RunConfig load_config(const fs::path& path);

// Applies `--seed-override K=V` (K in split|control|probe).
void apply_seed_override(RunConfig& config, std::string_view assignment);

// Input files named directly or found (recursively, *.conllu) in directories.
std::vector<fs::path> collect_conllu(const std::vector<fs::path>& inputs);

struct IngestResult {
  corpus::DatasetStats stats;
  fs::path manifest;
  fs::path split;
  fs::path control_lemma;
  fs::path control_inflection;
};

// Parses the corpus, builds the dataset, splits it and writes manifest,
// split and both control mappings into `out_dir`. Nothing is written when
// no input file is found or parsing fails.
IngestResult cmd_ingest(const std::vector<fs::path>& inputs, const fs::path& out_dir, const Seeds& seeds);

// Dataset summary (category %, inflection %, sentence lengths).
void print_stats(std::ostream& os, const corpus::DatasetStats& stats);

struct ProbeOptions {
  unsigned workers = 1;
  bool resume = false;
};

struct CellKey {
  std::string model;
  int layer = 0;
  corpus::Task task = corpus::Task::inflection;
  probes::Family family = probes::Family::linear;

  std::string file_name() const;
  auto operator<=>(const CellKey&) const = default;
};

struct CellResult {
  CellKey key;
  bool skipped = false;
  std::string note;
  double accuracy = 0;
  double macro_f1 = 0;
  double control_accuracy = 0;
  double validation_accuracy = 0;
  std::size_t test_count = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> groups;  // group -> (correct, total)
  std::string config_json;
};

struct ProbeSummary {
  std::vector<CellResult> cells;
  std::size_t computed = 0;
  std::size_t reused = 0;
};

// Tunes, evaluates and reports every (store, layer, task, family) cell.
// Completed cells are reused under `resume`. Throws AlignmentError before
// any training if a store does not match the manifest.
ProbeSummary cmd_probe(const RunConfig& config, const ProbeOptions& options);

// Per-layer dimensionality profiles and the first/mid/final summary.
void cmd_dims(const RunConfig& config);

struct AnalogySummary {
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  std::size_t wholeword_wins = 0;
};
AnalogySummary cmd_analogy(const RunConfig& config);

// Aggregates probe cells under config.output into plot-data CSVs.
void cmd_report(const RunConfig& config);

// Shared helpers.
std::vector<CellResult> load_cells(const fs::path& output_dir);
corpus::Dataset load_manifest(const fs::path& dataset_dir);

}  // namespace sleuth::pipeline
