#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"
#include "sleuth/metrics.hpp"
#include "sleuth/pipeline.hpp"
#include "sleuth/random.hpp"
#include "sleuth/tensorstore.hpp"

namespace sleuth::pipeline {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using probes::Family;
using probes::Matrix;

ordered_json config_to_json(const probes::ProbeConfig& config) {
  return std::visit(
      [](const auto& c) -> ordered_json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, double>) {
          return {{"lambda", c}};
        } else if constexpr (std::is_same_v<T, probes::MlpConfig>) {
          return {{"hidden", c.hidden}, {"epochs", c.epochs}, {"learning_rate", c.learning_rate},
                  {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size}};
        } else {
          return {{"trees", c.trees}, {"max_depth", c.max_depth},
                  {"features", c.features == probes::FeatureRule::sqrt ? "sqrt" : "all"},
                  {"min_samples_split", c.min_samples_split}, {"class_ceiling", c.class_ceiling}};
        }
      },
      config);
}

std::optional<corpus::Task> task_from_string(std::string_view s) {
  if (s == "lemma") return corpus::Task::lemma;
  if (s == "inflection") return corpus::Task::inflection;
  return std::nullopt;
}

std::string cell_to_json(const CellResult& c, const std::string& fingerprint) {
  ordered_json j;
  j["model"] = c.key.model;
  j["layer"] = c.key.layer;
  j["task"] = corpus::to_string(c.key.task);
  j["family"] = probes::to_string(c.key.family);
  j["fingerprint"] = fingerprint;
  j["skipped"] = c.skipped;
  j["note"] = c.note;
  j["accuracy"] = c.accuracy;
  j["macro_f1"] = c.macro_f1;
  j["control_accuracy"] = c.control_accuracy;
  j["validation_accuracy"] = c.validation_accuracy;
  j["test_count"] = c.test_count;
  ordered_json groups = ordered_json::object();
  for (const auto& [name, counts] : c.groups) groups[name] = {counts.first, counts.second};
  j["groups"] = groups;
  j["config"] = c.config_json.empty() ? ordered_json(nullptr) : ordered_json::parse(c.config_json);
  return j.dump(2) + "\n";
}

CellResult cell_from_json(const json& j) {
  CellResult c;
  c.key.model = j.at("model").get<std::string>();
  c.key.layer = j.at("layer").get<int>();
  const auto task = task_from_string(j.at("task").get<std::string>());
  const auto family = probes::family_from_string(j.at("family").get<std::string>());
  if (!task || !family) throw FormatError("cell file names an unknown task or family");
  c.key.task = *task;
  c.key.family = *family;
  c.skipped = j.at("skipped").get<bool>();
  c.note = j.at("note").get<std::string>();
  c.accuracy = j.at("accuracy").get<double>();
  c.macro_f1 = j.at("macro_f1").get<double>();
  c.control_accuracy = j.at("control_accuracy").get<double>();
  c.validation_accuracy = j.at("validation_accuracy").get<double>();
  c.test_count = j.at("test_count").get<std::size_t>();
  for (const auto& [name, counts] : j.at("groups").items()) {
    c.groups[name] = {counts.at(0).get<std::size_t>(), counts.at(1).get<std::size_t>()};
  }
  if (!j.at("config").is_null()) c.config_json = ordered_json(j.at("config")).dump();
  return c;
}

std::optional<CellResult> read_cell(const fs::path& path, const std::string& fingerprint) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const auto j = json::parse(io::read_file(path));
    if (j.at("fingerprint").get<std::string>() != fingerprint) return std::nullopt;
    return cell_from_json(j);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Matrix gather(const store::LayerMatrix& m, std::span<const std::size_t> rows) {
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = m.row(rows[i]);
    for (std::uint64_t c = 0; c < m.cols; ++c) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = r[c];
  }
  return X;
}

std::vector<int> pick(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

// Classes present in either vector; macro-F1 for the lemma task would
// otherwise be dominated by thousands of lemmas absent from the test split.
std::vector<int> present_classes(std::span<const int> a, std::span<const int> b) {
  std::set<int> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  return {s.begin(), s.end()};
}

struct TaskData {
  corpus::Task task;
  corpus::LabelSpace space;
  std::vector<int> control;
  int control_classes = 0;
};

struct Shared {
  const RunConfig* config = nullptr;
  const corpus::Dataset* dataset = nullptr;
  std::vector<TaskData> tasks;
  std::vector<std::size_t> train, validation, test;
  std::vector<std::string> pos_group, inflection_group;  // per test row
  std::string fingerprint;
  fs::path cells_dir;
  bool resume = false;
};

struct Job {
  const StoreRef* store;
  int layer;
};

std::vector<CellResult> run_job(const Shared& sh, const Job& job, std::size_t& reused) {
  const auto& cfg = *sh.config;
  std::vector<CellResult> out;
  std::vector<CellKey> pending;
  for (const auto& td : sh.tasks) {
    for (auto family : cfg.families) {
      CellKey key{job.store->model, job.layer, td.task, family};
      const auto path = sh.cells_dir / job.store->model / key.file_name();
      if (sh.resume) {
        if (auto cached = read_cell(path, sh.fingerprint)) {
          out.push_back(std::move(*cached));
          ++reused;
          continue;
        }
      }
      pending.push_back(key);
    }
  }
  if (pending.empty()) return out;

  const auto layer = store::read_layer(job.store->path, job.layer);
  const Matrix Xtr = gather(layer, sh.train);
  const Matrix Xva = gather(layer, sh.validation);
  const Matrix Xte = gather(layer, sh.test);

  for (const auto& key : pending) {
    const auto& td = *std::find_if(sh.tasks.begin(), sh.tasks.end(), [&](const TaskData& t) { return t.task == key.task; });
    const int classes = static_cast<int>(td.space.classes.size());
    const auto ytr = pick(td.space.labels, sh.train);
    const auto yva = pick(td.space.labels, sh.validation);
    const auto yte = pick(td.space.labels, sh.test);
    const std::uint64_t seed =
        Rng::derived(cfg.seeds.probe, key.layer, static_cast<int>(key.task), static_cast<int>(key.family)).next();

    probes::Grid grid;
    switch (key.family) {
      case Family::linear: grid = cfg.ridge_grid; break;
      case Family::mlp: grid = cfg.mlp_grid; break;
      case Family::forest: grid = cfg.forest_grid; break;
    }

    CellResult cell;
    cell.key = key;
    cell.test_count = sh.test.size();
    try {
      const auto tuned = probes::tune(grid, {&Xtr, ytr, sh.train}, {&Xva, yva, sh.validation}, classes, seed);
      const auto pred = probes::predict(tuned.probe, Xte).classes;
      cell.accuracy = metrics::accuracy(pred, yte);
      cell.macro_f1 = metrics::macro_f1(pred, yte, present_classes(pred, yte));
      cell.validation_accuracy = tuned.validation_accuracy;
      cell.config_json = config_to_json(tuned.config).dump();
      for (const auto* groups : {&sh.pos_group, &sh.inflection_group}) {
        for (const auto& [name, c] : metrics::group_counts(pred, yte, *groups)) cell.groups[name] = {c.correct, c.total};
      }

      const auto ctr = pick(td.control, sh.train);
      const auto cte = pick(td.control, sh.test);
      const auto control = probes::fit_with(tuned.config, Xtr, ctr, td.control_classes, seed);
      cell.control_accuracy = metrics::accuracy(probes::predict(control, Xte).classes, cte);
    } catch (const GuardError& e) {
      cell = CellResult{};
      cell.key = key;
      cell.skipped = true;
      cell.note = e.what();
    }
    io::write_atomic(sh.cells_dir / key.model / key.file_name(), cell_to_json(cell, sh.fingerprint));
    out.push_back(std::move(cell));
  }
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_reports(const RunConfig& cfg, const std::vector<CellResult>& cells, const fs::path& out) {
  std::map<CellKey, const CellResult*> index;
  for (const auto& c : cells) index[c.key] = &c;

  for (const auto& st : cfg.stores) {
    for (auto task : cfg.tasks) {
      for (auto family : cfg.families) {
        std::string csv = io::csv_row({"layer", "accuracy", "macro_f1", "selectivity", "gap"});
        std::size_t rows = 0;
        for (const auto& [key, cell] : index) {
          if (key.model != st.model || key.task != task || key.family != family || cell->skipped) continue;
          std::string gap;
          if (family != Family::linear) {
            auto lin = index.find(CellKey{key.model, key.layer, task, Family::linear});
            if (lin != index.end() && !lin->second->skipped) {
              gap = io::format_double(metrics::separability_gap(cell->accuracy, lin->second->accuracy));
            }
          }
          csv += io::csv_row({std::to_string(key.layer), io::format_double(cell->accuracy),
                              io::format_double(cell->macro_f1),
                              io::format_double(metrics::selectivity(cell->accuracy, cell->control_accuracy)), gap});
          ++rows;
        }
        if (rows == 0) continue;
        const auto name = st.model + "_" + std::string(corpus::to_string(task)) + "_" + std::string(probes::to_string(family));
        io::write_atomic(out / "reports" / (name + ".csv"), csv);
      }
    }
  }
}

}  // namespace

std::string CellKey::file_name() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", layer);
  return "layer" + std::string(buf) + "_" + std::string(corpus::to_string(task)) + "_" +
         std::string(probes::to_string(family)) + ".json";
}

std::vector<CellResult> load_cells(const fs::path& output_dir) {
  std::vector<CellResult> cells;
  const auto dir = output_dir / "cells";
  if (!fs::exists(dir)) return cells;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    try {
      cells.push_back(cell_from_json(json::parse(io::read_file(entry.path()))));
    } catch (const json::exception& e) {
      throw FormatError("malformed cell file " + entry.path().string() + ": " + e.what());
    }
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return cells;
}

ProbeSummary cmd_probe(const RunConfig& cfg, const ProbeOptions& options) {
  if (cfg.stores.empty()) throw ConfigError("no stores configured");
  if (cfg.tasks.empty() || cfg.families.empty()) throw ConfigError("no tasks or probe families configured");
  if (cfg.output.empty()) throw ConfigError("no output directory configured");

  const auto manifest_bytes = io::read_bytes(cfg.dataset_dir / "manifest.jsonl");
  const auto dataset = corpus::parse_manifest(
      std::string_view(reinterpret_cast<const char*>(manifest_bytes.data()), manifest_bytes.size()));
  const auto split = corpus::SplitAssignment::from_json(io::read_file(cfg.dataset_dir / "split.json"));
  if (split.by_id.size() != dataset.points.size()) {
    throw AlignmentError("split.json covers " + std::to_string(split.by_id.size()) + " points, manifest has " +
                         std::to_string(dataset.points.size()));
  }

  // Every store is checked before any training starts.
  std::vector<std::vector<int>> store_layers;
  for (const auto& st : cfg.stores) {
    const auto header = store::validate_store(st.path, manifest_bytes);
    if (header.example_count != dataset.points.size()) {
      throw AlignmentError("store " + st.path.string() + " has " + std::to_string(header.example_count) +
                           " rows, manifest has " + std::to_string(dataset.points.size()));
    }
    std::vector<int> layers;
    if (cfg.layers) {
      for (int l : *cfg.layers) {
        if (l >= static_cast<int>(header.layer_count)) {
          throw ConfigError("layer " + std::to_string(l) + " out of range for store " + st.model + " (" +
                            std::to_string(header.layer_count) + " layers)");
        }
        layers.push_back(l);
      }
    } else {
      for (std::uint32_t l = 0; l < header.layer_count; ++l) layers.push_back(static_cast<int>(l));
    }
    store_layers.push_back(std::move(layers));
  }

  Shared sh;
  sh.config = &cfg;
  sh.dataset = &dataset;
  sh.train = split.indices(corpus::Split::train);
  sh.validation = split.indices(corpus::Split::validation);
  sh.test = split.indices(corpus::Split::test);
  for (auto r : sh.test) {
    const auto& p = dataset.points[r];
    sh.pos_group.push_back("pos:" + std::string(corpus::to_string(p.pos)));
    sh.inflection_group.push_back("inflection:" + std::string(corpus::to_string(p.inflection)));
  }
  for (auto task : cfg.tasks) {
    TaskData td{task, corpus::label_space(dataset.points, task), {}, 0};
    const auto name = std::string("control_") + std::string(corpus::to_string(task)) + ".json";
    const auto mapping = corpus::ControlMapping::from_json(io::read_file(cfg.dataset_dir / name));
    td.control = mapping.labels_for(dataset.points);
    td.control_classes = static_cast<int>(mapping.num_classes);
    sh.tasks.push_back(std::move(td));
  }
  sh.fingerprint = store::to_hex(store::sha256(std::span(
                       reinterpret_cast<const std::uint8_t*>(cfg.resolved_json().data()), cfg.resolved_json().size()))) +
                   ":" + store::to_hex(store::sha256(manifest_bytes));
  sh.cells_dir = cfg.output / "cells";
  sh.resume = options.resume;

  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.stores.size(); ++s) {
    for (int l : store_layers[s]) jobs.push_back({&cfg.stores[s], l});
  }

  const auto started = timestamp();
  ProbeSummary summary;
  std::vector<std::vector<CellResult>> results(jobs.size());
  std::vector<std::size_t> reused(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(jobs.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          {
            std::lock_guard lock(failure_mutex);
            if (failure) return;
          }
          try {
            results[i] = run_job(sh, jobs[i], reused[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    summary.reused += reused[i];
    for (auto& c : results[i]) summary.cells.push_back(std::move(c));
  }
  summary.computed = summary.cells.size() - summary.reused;
  std::sort(summary.cells.begin(), summary.cells.end(), [](const auto& a, const auto& b) { return a.key < b.key; });

  write_reports(cfg, summary.cells, cfg.output);

  ordered_json j;
  j["config"] = ordered_json::parse(cfg.resolved_json());
  j["seeds"] = {{"split", cfg.seeds.split}, {"control", cfg.seeds.control}, {"probe", cfg.seeds.probe}};
  j["manifest_sha256"] = store::to_hex(store::sha256(manifest_bytes));
  j["macro_f1_classes"] = "classes present in gold or prediction";
  ordered_json cells = ordered_json::array();
  for (const auto& c : summary.cells) {
    ordered_json e;
    e["model"] = c.key.model;
    e["layer"] = c.key.layer;
    e["task"] = corpus::to_string(c.key.task);
    e["family"] = probes::to_string(c.key.family);
    if (c.skipped) {
      e["skipped"] = c.note;
    } else {
      e["accuracy"] = c.accuracy;
      e["control_accuracy"] = c.control_accuracy;
      e["config"] = ordered_json::parse(c.config_json);
    }
    cells.push_back(e);
  }
  j["cells"] = cells;
  io::write_atomic(cfg.output / "summary.json", j.dump(2) + "\n");

  ordered_json meta;
  meta["started"] = started;
  meta["finished"] = timestamp();
  meta["workers"] = workers;
  meta["computed"] = summary.computed;
  meta["reused"] = summary.reused;
  io::write_atomic(cfg.output / "run_meta.json", meta.dump(2) + "\n");
  return summary;
}

}  // namespace sleuth::pipeline
