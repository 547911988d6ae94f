#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/pipeline.hpp"

namespace {

namespace pl = sleuth::pipeline;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kDivergence = 4 };

struct Common {
  std::string config;
  std::string out;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> seed_overrides;
  bool resume = false;
};

pl::RunConfig load(const Common& c) {
  auto cfg = pl::load_config(c.config);
  for (const auto& s : c.seed_overrides) pl::apply_seed_override(cfg, s);
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output directory (overrides the config)");
  app->add_option("--seed-override", c.seed_overrides, "Replace a seed, e.g. probe=7 (repeatable)");
}

int run(int argc, char** argv) {
  CLI::App app{"Layer-wise probing, dimensionality and analogy analysis of activation stores"};
  app.require_subcommand(1);
  Common c;

  auto* ingest = app.add_subcommand("ingest", "Parse CoNLL-U, write manifest, split and control mappings");
  add_common(ingest, c);
  auto* probe = app.add_subcommand("probe", "Train and evaluate probes for every layer, task and family");
  add_common(probe, c);
  probe->add_option("--workers", c.workers, "Parallel (store, layer) jobs")->check(CLI::PositiveNumber);
  probe->add_flag("--resume", c.resume, "Reuse completed cells from a previous run");
  auto* dims = app.add_subcommand("dims", "Per-layer intrinsic dimensionality");
  add_common(dims, c);
  auto* analogy = app.add_subcommand("analogy", "Analogy ranks for subtoken and whole-word vectors");
  add_common(analogy, c);
  auto* report = app.add_subcommand("report", "Aggregate probe results into plot-data CSVs");
  add_common(report, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  auto cfg = load(c);
  if (ingest->parsed()) {
    const auto out = c.out.empty() ? cfg.dataset_dir : std::filesystem::path(c.out);
    if (out.empty()) throw sleuth::ConfigError("no dataset directory: set dataset.dir or pass --out");
    if (cfg.conllu.empty()) throw sleuth::ConfigError("dataset.conllu lists no inputs");
    const auto result = pl::cmd_ingest(cfg.conllu, out, cfg.seeds);
    pl::print_stats(std::cout, result.stats);
    std::cout << "wrote " << result.manifest.string() << "\n";
  } else if (probe->parsed()) {
    const auto summary = pl::cmd_probe(cfg, {c.workers, c.resume});
    std::size_t skipped = 0;
    for (const auto& cell : summary.cells) {
      if (!cell.skipped) continue;
      ++skipped;
      std::cout << "skipped " << cell.key.model << " layer " << cell.key.layer << " "
                << sleuth::corpus::to_string(cell.key.task) << "/" << sleuth::probes::to_string(cell.key.family)
                << ": " << cell.note << "\n";
    }
    std::cout << summary.cells.size() << " cells (" << summary.computed << " computed, " << summary.reused
              << " reused, " << skipped << " skipped)\n";
  } else if (dims->parsed()) {
    pl::cmd_dims(cfg);
  } else if (analogy->parsed()) {
    const auto s = pl::cmd_analogy(cfg);
    std::cout << s.evaluated << " queries evaluated, " << s.failed << " failed, whole-word better on "
              << s.wholeword_wins << "\n";
  } else if (report->parsed()) {
    pl::cmd_report(cfg);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sleuth::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const sleuth::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const sleuth::GuardError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  } catch (const sleuth::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
