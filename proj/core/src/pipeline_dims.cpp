#include <iostream>

#include "json.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/geometry.hpp"
#include "sleuth/io.hpp"
#include "sleuth/pipeline.hpp"
#include "sleuth/tensorstore.hpp"

namespace sleuth::pipeline {

void cmd_dims(const RunConfig& cfg) {
  if (cfg.stores.empty()) throw ConfigError("no stores configured");
  if (cfg.output.empty()) throw ConfigError("no output directory configured");
  if (cfg.thresholds.empty()) throw ConfigError("no thresholds configured");

  const auto manifest_bytes = io::read_bytes(cfg.dataset_dir / "manifest.jsonl");
  std::vector<std::size_t> rows;
  if (cfg.pca_train_only) {
    rows = corpus::SplitAssignment::from_json(io::read_file(cfg.dataset_dir / "split.json")).indices(corpus::Split::train);
  }
  for (const auto& st : cfg.stores) store::validate_store(st.path, manifest_bytes);

  std::string summary = io::csv_row({"model", "threshold", "first", "mid", "final", "first_fraction", "mid_fraction",
                                     "final_fraction"});
  nlohmann::ordered_json report;
  report["config"] = nlohmann::ordered_json::parse(cfg.resolved_json());
  report["pca_rows"] = cfg.pca_train_only ? "train" : "all";
  nlohmann::ordered_json degenerate = nlohmann::ordered_json::array();

  for (const auto& st : cfg.stores) {
    const auto profile = geometry::dim_profile(st.path, cfg.thresholds, rows, true);
    std::string csv = io::csv_row({"layer", "threshold", "id", "fraction"});
    for (const auto& l : profile.layers) {
      if (l.error) {
        std::cerr << "warning: " << st.model << " layer " << l.layer << ": " << *l.error << "\n";
        degenerate.push_back({{"model", st.model}, {"layer", l.layer}, {"error", *l.error}});
      }
      for (double t : profile.thresholds) {
        if (l.error) {
          csv += io::csv_row({std::to_string(l.layer), io::format_double(t), "", ""});
        } else {
          csv += io::csv_row({std::to_string(l.layer), io::format_double(t), std::to_string(l.id.at(t)),
                              io::format_double(l.fraction(t))});
        }
      }
    }
    io::write_atomic(cfg.output / "dims" / ("dims_" + st.model + ".csv"), csv);

    if (profile.layers.empty()) continue;
    const auto picks = profile.summary_layers();
    for (double t : profile.thresholds) {
      std::vector<std::string> row = {st.model, io::format_double(t)};
      std::vector<std::string> fractions;
      for (int layer : picks) {
        const auto& l = *std::find_if(profile.layers.begin(), profile.layers.end(),
                                      [&](const geometry::LayerDims& d) { return d.layer == layer; });
        row.push_back(l.error ? "" : std::to_string(l.id.at(t)));
        fractions.push_back(l.error ? "" : io::format_double(l.fraction(t)));
      }
      row.insert(row.end(), fractions.begin(), fractions.end());
      summary += io::csv_row(row);
    }
  }
  report["degenerate"] = degenerate;
  io::write_atomic(cfg.output / "dims" / "dims_summary.csv", summary);
  io::write_atomic(cfg.output / "dims" / "dims_report.json", report.dump(2) + "\n");
}

}  // namespace sleuth::pipeline
