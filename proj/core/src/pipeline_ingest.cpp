#include <algorithm>
#include <iomanip>
#include <ostream>

#include "json.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"
#include "sleuth/pipeline.hpp"

namespace sleuth::pipeline {

std::vector<fs::path> collect_conllu(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::recursive_directory_iterator(input)) {
        if (entry.is_regular_file() && entry.path().extension() == ".conllu") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(input)) {
      files.push_back(input);
    } else {
      throw InvalidArgument("input not found: " + input.string());
    }
  }
  return files;
}

IngestResult cmd_ingest(const std::vector<fs::path>& inputs, const fs::path& out_dir, const Seeds& seeds) {
  const auto files = collect_conllu(inputs);
  if (files.empty()) throw InvalidArgument("no .conllu input files found");

  std::vector<corpus::SentenceAnnotation> sentences;
  for (const auto& f : files) {
    auto parsed = corpus::parse_conllu_file(f.string());
    sentences.insert(sentences.end(), std::make_move_iterator(parsed.begin()), std::make_move_iterator(parsed.end()));
  }
  const auto dataset = corpus::build_dataset(std::move(sentences));
  if (dataset.points.empty()) throw InvalidArgument("corpus yields no data points");

  // Everything is computed before the first write.
  const auto manifest = corpus::manifest_jsonl(dataset);
  const auto split = corpus::stratified_split(dataset.points, seeds.split);
  const auto control_lemma = corpus::gen_control_labels(dataset.points, corpus::Task::lemma, seeds.control);
  const auto control_inflection = corpus::gen_control_labels(dataset.points, corpus::Task::inflection, seeds.control);

  IngestResult result;
  result.stats = corpus::dataset_stats(dataset);
  result.manifest = out_dir / "manifest.jsonl";
  result.split = out_dir / "split.json";
  result.control_lemma = out_dir / "control_lemma.json";
  result.control_inflection = out_dir / "control_inflection.json";

  io::write_atomic(result.manifest, manifest);
  io::write_atomic(result.split, split.to_json());
  io::write_atomic(result.control_lemma, control_lemma.to_json());
  io::write_atomic(result.control_inflection, control_inflection.to_json());

  const auto& s = result.stats;
  nlohmann::ordered_json summary;
  std::vector<std::string> sources;
  for (const auto& f : files) sources.push_back(f.string());
  summary["inputs"] = sources;
  summary["seeds"] = {{"split", seeds.split}, {"control", seeds.control}};
  summary["points"] = s.points;
  summary["sentences"] = s.sentences;
  summary["unique_sentences"] = s.unique_sentences;
  summary["unique_lemmas"] = s.unique_lemmas;
  summary["unique_forms"] = s.unique_forms;
  nlohmann::ordered_json pos, infl;
  for (int p = 0; p < 3; ++p) pos[std::string(corpus::to_string(static_cast<corpus::Pos>(p)))] = s.pos_counts[p];
  for (int k = 0; k < corpus::kInflectionCount; ++k) {
    infl[std::string(corpus::to_string(static_cast<corpus::Inflection>(k)))] = s.inflection_counts[k];
  }
  summary["pos"] = pos;
  summary["inflection"] = infl;
  summary["sentence_length"] = {{"mean", s.mean_sentence_length},
                                {"median", s.median_sentence_length},
                                {"min", s.min_sentence_length},
                                {"max", s.max_sentence_length}};
  io::write_atomic(out_dir / "ingest_summary.json", summary.dump(2) + "\n");
  return result;
}

void print_stats(std::ostream& os, const corpus::DatasetStats& s) {
  const auto pct = [&](std::size_t n) { return 100.0 * static_cast<double>(n) / static_cast<double>(s.points); };
  const auto flags = os.flags();
  os << "data points      " << s.points << "\n"
     << "sentences        " << s.sentences << " (" << s.unique_sentences << " unique)\n"
     << "lemmas           " << s.unique_lemmas << "\n"
     << "word forms       " << s.unique_forms << "\n\n";
  os << std::fixed << std::setprecision(1);
  os << "category\n";
  for (int p = 0; p < 3; ++p) {
    os << "  " << std::left << std::setw(12) << corpus::to_string(static_cast<corpus::Pos>(p)) << std::right
       << std::setw(8) << s.pos_counts[p] << std::setw(8) << pct(s.pos_counts[p]) << "%\n";
  }
  os << "inflection\n";
  for (int k = 0; k < corpus::kInflectionCount; ++k) {
    os << "  " << std::left << std::setw(12) << corpus::to_string(static_cast<corpus::Inflection>(k)) << std::right
       << std::setw(8) << s.inflection_counts[k] << std::setw(8) << pct(s.inflection_counts[k]) << "%\n";
  }
  os << "sentence length  mean " << s.mean_sentence_length << ", median " << s.median_sentence_length << ", min "
     << s.min_sentence_length << ", max " << s.max_sentence_length << "\n";
  os.flags(flags);
}

corpus::Dataset load_manifest(const fs::path& dataset_dir) {
  return corpus::parse_manifest(io::read_file(dataset_dir / "manifest.jsonl"));
}

}  // namespace sleuth::pipeline
