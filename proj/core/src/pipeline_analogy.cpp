#include "json.hpp"
#include "sleuth/analogy.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"
#include "sleuth/pipeline.hpp"

namespace sleuth::pipeline {

AnalogySummary cmd_analogy(const RunConfig& cfg) {
  if (cfg.analogy_store.empty() || cfg.analogy_queries.empty()) {
    throw ConfigError("analogy.store and analogy.queries must be set");
  }
  if (cfg.output.empty()) throw ConfigError("no output directory configured");

  store::verify_store(cfg.analogy_store);
  if (!store::has_embeddings(cfg.analogy_store)) {
    throw FormatError("store " + cfg.analogy_store.string() + " has no embedding table");
  }
  const auto table = store::read_embeddings(cfg.analogy_store);
  const auto queries = analogy::parse_queries_csv(io::read_file(cfg.analogy_queries));
  const auto suite = analogy::run_analogy_suite(queries, table, table.encodings);

  const auto rank = [](const std::optional<int>& r) { return r ? std::to_string(*r) : std::string(); };
  std::string csv = io::csv_row({"a", "b", "c", "expected", "rank_subtoken", "rank_wholeword", "fallback", "error"});
  for (const auto& r : suite.results) {
    csv += io::csv_row({r.query.a, r.query.b, r.query.c, r.query.expected, rank(r.rank_subtoken), rank(r.rank_wholeword),
                        r.fallback ? "1" : "0", r.error.value_or("")});
  }
  io::write_atomic(cfg.output / "analogy" / "analogy_ranks.csv", csv);

  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(cfg.resolved_json());
  j["queries"] = suite.results.size();
  j["evaluated"] = suite.evaluated;
  j["failed"] = suite.failed;
  j["wholeword_wins"] = suite.wholeword_wins;
  std::size_t fallback = 0;
  for (const auto& r : suite.results) fallback += r.fallback;
  j["fallback_queries"] = fallback;
  io::write_atomic(cfg.output / "analogy" / "analogy_summary.json", j.dump(2) + "\n");

  return {suite.evaluated, suite.failed, suite.wholeword_wins};
}

}  // namespace sleuth::pipeline
