#include <map>
#include <tuple>

#include "json.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"
#include "sleuth/metrics.hpp"
#include "sleuth/pipeline.hpp"

namespace sleuth::pipeline {
namespace {

using Series = std::tuple<std::string, corpus::Task, probes::Family>;

std::vector<std::string> series_fields(const Series& s) {
  return {std::get<0>(s), std::string(corpus::to_string(std::get<1>(s))), std::string(probes::to_string(std::get<2>(s)))};
}

}  // namespace

void cmd_report(const RunConfig& cfg) {
  if (cfg.output.empty()) throw ConfigError("no output directory configured");
  const auto cells = load_cells(cfg.output);
  if (cells.empty()) throw InvalidArgument("no probe results under " + (cfg.output / "cells").string());

  std::map<CellKey, const CellResult*> index;
  std::map<std::string, int> max_layer;
  for (const auto& c : cells) {
    index[c.key] = &c;
    auto& m = max_layer[c.key.model];
    m = std::max(m, c.key.layer);
  }
  const auto depth = [&](const CellKey& k) {
    const int last = max_layer.at(k.model);
    return last > 0 ? static_cast<double>(k.layer) / last : 0.0;
  };

  const std::vector<std::string> head = {"model", "task", "family", "layer", "depth", "value"};
  std::string acc = io::csv_row(head), sel = io::csv_row(head), gap = io::csv_row(head);
  std::map<Series, std::vector<double>> by_series;
  std::map<Series, std::map<std::string, std::pair<double, int>>> groups;  // group -> (sum of accuracies, layers)

  for (const auto& [key, cell] : index) {
    if (cell->skipped) continue;
    const Series series{key.model, key.task, key.family};
    auto row = series_fields(series);
    row.push_back(std::to_string(key.layer));
    row.push_back(io::format_double(depth(key)));

    auto with = [&](double v) {
      auto r = row;
      r.push_back(io::format_double(v));
      return io::csv_row(r);
    };
    acc += with(cell->accuracy);
    sel += with(metrics::selectivity(cell->accuracy, cell->control_accuracy));
    if (key.family != probes::Family::linear) {
      auto lin = index.find(CellKey{key.model, key.layer, key.task, probes::Family::linear});
      if (lin != index.end() && !lin->second->skipped) {
        gap += with(metrics::separability_gap(cell->accuracy, lin->second->accuracy));
      }
    }
    by_series[series].push_back(cell->accuracy);
    for (const auto& [name, counts] : cell->groups) {
      if (counts.second == 0) continue;
      auto& g = groups[series][name];
      g.first += static_cast<double>(counts.first) / static_cast<double>(counts.second);
      g.second += 1;
    }
  }

  std::string trends = io::csv_row({"model", "task", "family", "layers", "slope", "intercept", "r_squared"});
  for (const auto& [series, values] : by_series) {
    if (values.size() < 2) continue;
    const auto fit = metrics::layer_trend(values);
    auto row = series_fields(series);
    row.push_back(std::to_string(values.size()));
    row.push_back(io::format_double(fit.slope));
    row.push_back(io::format_double(fit.intercept));
    row.push_back(io::format_double(fit.r_squared));
    trends += io::csv_row(row);
  }

  std::string pos = io::csv_row({"model", "task", "family", "group", "accuracy"});
  std::string infl = pos;
  for (const auto& [series, per_group] : groups) {
    for (const auto& [name, sum] : per_group) {
      const auto colon = name.find(':');
      auto row = series_fields(series);
      row.push_back(name.substr(colon + 1));
      row.push_back(io::format_double(sum.first / sum.second));
      (name.starts_with("pos:") ? pos : infl) += io::csv_row(row);
    }
  }

  const auto dir = cfg.output / "plots";
  io::write_atomic(dir / "plot_accuracy.csv", acc);
  io::write_atomic(dir / "plot_selectivity.csv", sel);
  io::write_atomic(dir / "plot_gap.csv", gap);
  io::write_atomic(dir / "trends.csv", trends);
  io::write_atomic(dir / "breakdown_pos.csv", pos);
  io::write_atomic(dir / "breakdown_inflection.csv", infl);

  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(cfg.resolved_json());
  j["cells"] = cells.size();
  j["trend_depth"] = "layer / (L - 1)";
  j["breakdown"] = "mean over layers of per-group test accuracy";
  io::write_atomic(dir / "report.json", j.dump(2) + "\n");
}

}  // namespace sleuth::pipeline
