#include <charconv>
#include <set>

#include "json.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"
#include "sleuth/pipeline.hpp"

namespace sleuth::pipeline {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' is missing or has the wrong type");
  }
}

template <typename T>
std::vector<T> list_or_scalar(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type");
  }
}

std::uint64_t get_seed(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw ConfigError(std::string("'seeds.") + key + "' must be a nonnegative integer");
  }
  return j.at(key).get<std::uint64_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_grids(const json& j, RunConfig& c) {
  allow_keys(j, "grids", {"linear", "mlp", "forest"});
  if (j.contains("linear")) {
    const auto& g = j["linear"];
    allow_keys(g, "grids.linear", {"lambda"});
    c.ridge_grid.lambdas = list_or_scalar<double>(g, "lambda", "grids.linear");
    for (double l : c.ridge_grid.lambdas) {
      if (!(l >= 0)) throw ConfigError("grids.linear.lambda values must be >= 0");
    }
  }
  if (j.contains("mlp")) {
    const auto& g = j["mlp"];
    allow_keys(g, "grids.mlp", {"hidden", "epochs", "learning_rate", "weight_decay", "batch_size"});
    probes::MlpConfig base;
    if (g.contains("hidden")) base.hidden = get<int>(g, "hidden", "grids.mlp");
    if (g.contains("weight_decay")) base.weight_decay = get<double>(g, "weight_decay", "grids.mlp");
    if (g.contains("batch_size")) base.batch_size = get<int>(g, "batch_size", "grids.mlp");
    std::vector<int> epochs = g.contains("epochs") ? list_or_scalar<int>(g, "epochs", "grids.mlp") : std::vector<int>{base.epochs};
    std::vector<double> rates = g.contains("learning_rate") ? list_or_scalar<double>(g, "learning_rate", "grids.mlp")
                                                            : std::vector<double>{base.learning_rate};
    if (base.hidden < 1 || base.batch_size < 1) throw ConfigError("grids.mlp hidden and batch_size must be >= 1");
    c.mlp_grid.configs.clear();
    for (int e : epochs) {
      if (e < 1) throw ConfigError("grids.mlp.epochs must be >= 1");
      for (double r : rates) {
        auto cfg = base;
        cfg.epochs = e;
        cfg.learning_rate = r;
        c.mlp_grid.configs.push_back(cfg);
      }
    }
  }
  if (j.contains("forest")) {
    const auto& g = j["forest"];
    allow_keys(g, "grids.forest", {"trees", "max_depth", "features", "class_ceiling", "min_samples_split"});
    if (g.contains("trees")) c.forest_grid.trees = list_or_scalar<int>(g, "trees", "grids.forest");
    if (g.contains("max_depth")) c.forest_grid.depths = list_or_scalar<int>(g, "max_depth", "grids.forest");
    if (g.contains("features")) {
      const auto f = get<std::string>(g, "features", "grids.forest");
      if (f == "sqrt") {
        c.forest_grid.base.features = probes::FeatureRule::sqrt;
      } else if (f == "all") {
        c.forest_grid.base.features = probes::FeatureRule::all;
      } else {
        throw ConfigError("grids.forest.features must be 'sqrt' or 'all'");
      }
    }
    if (g.contains("class_ceiling")) c.forest_grid.base.class_ceiling = get<int>(g, "class_ceiling", "grids.forest");
    if (g.contains("min_samples_split")) {
      c.forest_grid.base.min_samples_split = get<int>(g, "min_samples_split", "grids.forest");
    }
  }
}

ordered_json mlp_json(const probes::MlpConfig& m) {
  return {{"hidden", m.hidden}, {"epochs", m.epochs}, {"learning_rate", m.learning_rate},
          {"weight_decay", m.weight_decay}, {"batch_size", m.batch_size}};
}

}  // namespace

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, "config", {"dataset", "stores", "tasks", "families", "grids", "seeds", "layers", "dims", "analogy", "output"});

  RunConfig c;
  if (!j.contains("seeds")) throw ConfigError("config must state seeds explicitly (seeds.split, seeds.control, seeds.probe)");
  const auto& seeds = j["seeds"];
  allow_keys(seeds, "seeds", {"split", "control", "probe"});
  c.seeds.split = get_seed(seeds, "split");
  c.seeds.control = get_seed(seeds, "control");
  c.seeds.probe = get_seed(seeds, "probe");

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    allow_keys(d, "dataset", {"conllu", "dir"});
    if (d.contains("conllu")) {
      for (const auto& p : list_or_scalar<std::string>(d, "conllu", "dataset")) c.conllu.push_back(resolve(base_dir, p));
    }
    if (d.contains("dir")) c.dataset_dir = resolve(base_dir, get<std::string>(d, "dir", "dataset"));
  }
  if (j.contains("stores")) {
    if (!j["stores"].is_array()) throw ConfigError("stores must be a list");
    std::set<std::string> models;
    for (const auto& s : j["stores"]) {
      allow_keys(s, "stores[]", {"model", "path"});
      StoreRef ref{get<std::string>(s, "model", "stores[]"), resolve(base_dir, get<std::string>(s, "path", "stores[]"))};
      if (ref.model.empty() || ref.model.find_first_of("/\\") != std::string::npos) {
        throw ConfigError("store model id must be non-empty and contain no path separators");
      }
      if (!models.insert(ref.model).second) throw ConfigError("duplicate store model id '" + ref.model + "'");
      c.stores.push_back(std::move(ref));
    }
  }
  if (j.contains("tasks")) {
    c.tasks.clear();
    for (const auto& t : list_or_scalar<std::string>(j, "tasks", "config")) {
      if (t == "lemma") {
        c.tasks.push_back(corpus::Task::lemma);
      } else if (t == "inflection") {
        c.tasks.push_back(corpus::Task::inflection);
      } else {
        throw ConfigError("unknown task '" + t + "'");
      }
    }
  }
  if (j.contains("families")) {
    c.families.clear();
    for (const auto& f : list_or_scalar<std::string>(j, "families", "config")) {
      const auto family = probes::family_from_string(f);
      if (!family) throw ConfigError("unknown probe family '" + f + "'");
      c.families.push_back(*family);
    }
  }
  if (j.contains("grids")) parse_grids(j["grids"], c);
  if (j.contains("layers")) {
    const auto& l = j["layers"];
    if (!(l.is_string() && l.get<std::string>() == "all")) {
      c.layers = list_or_scalar<int>(j, "layers", "config");
      for (int v : *c.layers) {
        if (v < 0) throw ConfigError("layers must be nonnegative");
      }
    }
  }
  if (j.contains("dims")) {
    const auto& d = j["dims"];
    allow_keys(d, "dims", {"thresholds", "rows"});
    if (d.contains("thresholds")) c.thresholds = list_or_scalar<double>(d, "thresholds", "dims");
    for (double t : c.thresholds) {
      if (!(t > 0 && t <= 100)) throw ConfigError("dims.thresholds must lie in (0, 100]");
    }
    if (d.contains("rows")) {
      const auto rows = get<std::string>(d, "rows", "dims");
      if (rows != "train" && rows != "all") throw ConfigError("dims.rows must be 'train' or 'all'");
      c.pca_train_only = rows == "train";
    }
  }
  if (j.contains("analogy")) {
    const auto& a = j["analogy"];
    allow_keys(a, "analogy", {"store", "queries"});
    c.analogy_store = resolve(base_dir, get<std::string>(a, "store", "analogy"));
    c.analogy_queries = resolve(base_dir, get<std::string>(a, "queries", "analogy"));
  }
  if (j.contains("output")) c.output = resolve(base_dir, get<std::string>(j, "output", "config"));
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

void apply_seed_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("seed override must look like KEY=VALUE");
  const auto key = assignment.substr(0, eq);
  const auto value = assignment.substr(eq + 1);
  std::uint64_t parsed = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("seed override value must be a nonnegative integer: " + std::string(assignment));
  }
  if (key == "split") {
    config.seeds.split = parsed;
  } else if (key == "control") {
    config.seeds.control = parsed;
  } else if (key == "probe") {
    config.seeds.probe = parsed;
  } else {
    throw ConfigError("unknown seed '" + std::string(key) + "' (expected split, control or probe)");
  }
}

std::string RunConfig::resolved_json() const {
  ordered_json j;
  ordered_json d;
  std::vector<std::string> inputs;
  for (const auto& p : conllu) inputs.push_back(p.string());
  d["conllu"] = inputs;
  d["dir"] = dataset_dir.string();
  j["dataset"] = d;
  ordered_json s = ordered_json::array();
  for (const auto& st : stores) s.push_back({{"model", st.model}, {"path", st.path.string()}});
  j["stores"] = s;
  std::vector<std::string> task_names, family_names;
  for (auto t : tasks) task_names.emplace_back(corpus::to_string(t));
  for (auto f : families) family_names.emplace_back(probes::to_string(f));
  j["tasks"] = task_names;
  j["families"] = family_names;
  ordered_json grids;
  grids["linear"] = {{"lambda", ridge_grid.lambdas}};
  ordered_json mlps = ordered_json::array();
  for (const auto& m : mlp_grid.configs) mlps.push_back(mlp_json(m));
  grids["mlp"] = mlps;
  grids["forest"] = {{"trees", forest_grid.trees},
                     {"max_depth", forest_grid.depths},
                     {"features", forest_grid.base.features == probes::FeatureRule::sqrt ? "sqrt" : "all"},
                     {"class_ceiling", forest_grid.base.class_ceiling},
                     {"min_samples_split", forest_grid.base.min_samples_split}};
  j["grids"] = grids;
  j["seeds"] = {{"split", seeds.split}, {"control", seeds.control}, {"probe", seeds.probe}};
  if (layers) {
    j["layers"] = *layers;
  } else {
    j["layers"] = "all";
  }
  j["dims"] = {{"thresholds", thresholds}, {"rows", pca_train_only ? "train" : "all"}};
  j["analogy"] = {{"store", analogy_store.string()}, {"queries", analogy_queries.string()}};
  j["output"] = output.string();
  return j.dump(2);
}

}  // namespace sleuth::pipeline
