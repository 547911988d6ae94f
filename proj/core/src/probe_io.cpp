#include <cmath>

#include "json.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"
#include "sleuth/probes.hpp"
#include "sleuth/tensorstore.hpp"

namespace sleuth::probes {
namespace {

using ordered_json = nlohmann::ordered_json;

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  auto p = base;
  p += suffix;
  return p;
}

store::LayerMatrix matrix_block(const Matrix& M) {
  store::LayerMatrix m;
  m.layer = 0;
  m.rows = static_cast<std::uint64_t>(M.rows());
  m.cols = static_cast<std::uint64_t>(M.cols());
  m.values.reserve(m.rows * m.cols);
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) m.values.push_back(static_cast<float>(M(r, c)));
  return m;
}

Matrix block_rows(const store::LayerMatrix& m, std::uint64_t first, std::uint64_t count) {
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(m.cols));
  for (std::uint64_t r = 0; r < count; ++r)
    for (std::uint64_t c = 0; c < m.cols; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(m.at(first + r, c));
  return out;
}

ordered_json mlp_config_json(const MlpConfig& c) {
  return {{"hidden", c.hidden},     {"epochs", c.epochs},         {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size}, {"beta1", c.beta1},
          {"beta2", c.beta2},       {"epsilon", c.epsilon}};
}

MlpConfig mlp_config_from(const ordered_json& j) {
  MlpConfig c;
  c.hidden = j.at("hidden");
  c.epochs = j.at("epochs");
  c.learning_rate = j.at("learning_rate");
  c.weight_decay = j.at("weight_decay");
  c.batch_size = j.at("batch_size");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.epsilon = j.at("epsilon");
  return c;
}

ordered_json forest_config_json(const ForestConfig& c) {
  return {{"trees", c.trees},
          {"max_depth", c.max_depth},
          {"features", c.features == FeatureRule::sqrt ? "sqrt" : "all"},
          {"min_samples_split", c.min_samples_split},
          {"bootstrap", c.bootstrap},
          {"class_ceiling", c.class_ceiling}};
}

ForestConfig forest_config_from(const ordered_json& j) {
  ForestConfig c;
  c.trees = j.at("trees");
  c.max_depth = j.at("max_depth");
  c.features = j.at("features").get<std::string>() == "all" ? FeatureRule::all : FeatureRule::sqrt;
  c.min_samples_split = j.at("min_samples_split");
  c.bootstrap = j.at("bootstrap");
  c.class_ceiling = j.at("class_ceiling");
  return c;
}

}  // namespace

// Blob layouts:
//   linear  d x c           W
//   mlp     (d + c) x h     rows 0..d-1 = W1, rows d.. = W2 transposed
//   forest  nodes x 5       feature, threshold, left, right, vote per node
void save_probe(const Probe& probe, const std::filesystem::path& base, const std::array<std::uint8_t, 32>& digest) {
  ordered_json meta;
  store::LayerMatrix block;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        meta["classes"] = p.class_names;
        if constexpr (std::is_same_v<T, LinearProbe>) {
          meta["family"] = "linear";
          meta["config"] = {{"lambda", p.lambda}};
          meta["seed"] = 0;
          meta["input_dim"] = p.weights.rows();
          meta["num_classes"] = p.weights.cols();
          block = matrix_block(p.weights);
        } else if constexpr (std::is_same_v<T, MlpProbe>) {
          meta["family"] = "mlp";
          meta["config"] = mlp_config_json(p.config);
          meta["seed"] = p.seed;
          meta["input_dim"] = p.w1.rows();
          meta["num_classes"] = p.w2.cols();
          meta["epoch_loss"] = p.epoch_loss;
          Matrix packed(p.w1.rows() + p.w2.cols(), p.w1.cols());
          packed << p.w1, p.w2.transpose();
          block = matrix_block(packed);
        } else {
          meta["family"] = "forest";
          meta["config"] = forest_config_json(p.config);
          meta["seed"] = p.seed;
          meta["num_classes"] = p.ensembles.size();
          std::vector<std::vector<std::size_t>> sizes;
          std::size_t total = 0;
          for (const auto& e : p.ensembles) {
            auto& s = sizes.emplace_back();
            for (const auto& t : e) {
              s.push_back(t.nodes.size());
              total += t.nodes.size();
            }
          }
          meta["tree_sizes"] = sizes;
          block.rows = total;
          block.cols = 5;
          block.values.reserve(total * 5);
          for (const auto& e : p.ensembles)
            for (const auto& t : e)
              for (const auto& n : t.nodes) {
                block.values.insert(block.values.end(),
                                    {static_cast<float>(n.feature), n.threshold, static_cast<float>(n.left),
                                     static_cast<float>(n.right), static_cast<float>(n.vote)});
              }
        }
      },
      probe);

  const auto blob_path = with_suffix(base, ".bin");
  meta["blob"] = blob_path.filename().string();
  meta["digest"] = store::to_hex(digest);

  store::StoreHeader header;
  header.model_id = "probe:" + meta["family"].get<std::string>();
  header.layer_count = 1;
  header.example_count = block.rows;
  header.hidden_dim = static_cast<std::uint32_t>(block.cols);
  header.digest = digest;
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  store::write_store(blob_path, header, std::span(&block, 1));
  io::write_atomic(with_suffix(base, ".json"), meta.dump(2) + "\n");
}

Probe load_probe(const std::filesystem::path& base) {
  ordered_json meta;
  try {
    meta = ordered_json::parse(io::read_file(with_suffix(base, ".json")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed probe metadata: ") + e.what());
  }
  const auto blob_path = base.parent_path() / meta.at("blob").get<std::string>();
  const auto header = store::verify_store(blob_path);
  if (store::to_hex(header.digest) != meta.at("digest").get<std::string>()) {
    throw AlignmentError("probe blob digest does not match its metadata");
  }
  const auto block = store::read_layer(blob_path, 0);
  const auto family = meta.at("family").get<std::string>();
  const auto classes = meta.at("classes").get<std::vector<std::string>>();

  if (family == "linear") {
    LinearProbe p;
    p.lambda = meta.at("config").at("lambda");
    p.weights = block_rows(block, 0, block.rows);
    p.class_names = classes;
    return p;
  }
  if (family == "mlp") {
    MlpProbe p;
    p.config = mlp_config_from(meta.at("config"));
    p.seed = meta.at("seed");
    p.epoch_loss = meta.value("epoch_loss", std::vector<double>{});
    const std::uint64_t d = meta.at("input_dim");
    const std::uint64_t c = meta.at("num_classes");
    if (d + c != block.rows) throw IntegrityError("MLP blob shape does not match metadata");
    p.w1 = block_rows(block, 0, d);
    p.w2 = block_rows(block, d, c).transpose();
    p.class_names = classes;
    return p;
  }
  if (family == "forest") {
    ForestProbe p;
    p.config = forest_config_from(meta.at("config"));
    p.seed = meta.at("seed");
    p.class_names = classes;
    const auto sizes = meta.at("tree_sizes").get<std::vector<std::vector<std::size_t>>>();
    std::uint64_t row = 0;
    for (const auto& ensemble_sizes : sizes) {
      auto& ensemble = p.ensembles.emplace_back();
      for (auto n : ensemble_sizes) {
        Tree t;
        for (std::size_t k = 0; k < n; ++k, ++row) {
          if (row >= block.rows) throw IntegrityError("forest blob shorter than metadata");
          TreeNode node;
          node.feature = static_cast<std::int32_t>(block.at(row, 0));
          node.threshold = block.at(row, 1);
          node.left = static_cast<std::int32_t>(block.at(row, 2));
          node.right = static_cast<std::int32_t>(block.at(row, 3));
          node.vote = static_cast<std::uint8_t>(block.at(row, 4));
          t.nodes.push_back(node);
        }
        ensemble.push_back(std::move(t));
      }
    }
    return p;
  }
  throw FormatError("unknown probe family '" + family + "'");
}

}  // namespace sleuth::probes
