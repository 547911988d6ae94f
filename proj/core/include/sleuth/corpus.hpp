#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sleuth::corpus {

using FeatureMap = std::map<std::string, std::string>;

struct Token {
  std::string form;
  std::string lemma;
  std::string upos;
  FeatureMap feats;
};

struct SentenceAnnotation {
  std::vector<Token> tokens;
  std::string source_id;

  // Surface forms joined by single spaces.
  std::string text() const;
};

// The closed set of inflection classes. Enum order is the class index used
// everywhere (labels, splits, reports).
enum class Inflection : std::uint8_t {
  singular,
  plural,
  base,
  past,
  third_person,
  positive,
  comparative,
  superlative,
};
inline constexpr int kInflectionCount = 8;

enum class Pos : std::uint8_t { noun, verb, adjective };

std::string_view to_string(Inflection value);
std::string_view to_string(Pos value);
std::optional<Inflection> inflection_from_string(std::string_view name);
std::optional<Pos> pos_from_string(std::string_view name);

struct DataPoint {
  std::size_t sentence = 0;  // index into Dataset::sentences
  std::size_t target_index = 0;
  std::string form;
  std::string lemma;
  Inflection inflection = Inflection::singular;
  Pos pos = Pos::noun;
  std::uint64_t id = 0;
};

struct Dataset {
  std::vector<SentenceAnnotation> sentences;
  std::vector<DataPoint> points;

  const SentenceAnnotation& sentence_of(const DataPoint& p) const { return sentences[p.sentence]; }
};

// CoNLL-U reader. Multiword-token ranges and empty nodes are skipped. A
// `# sent_id = ...` comment becomes the source id, otherwise
// "<source>#<n>" is used. Throws ParseError on a line with != 10 columns.
std::vector<SentenceAnnotation> parse_conllu(std::istream& in, const std::string& source = "<stream>");
std::vector<SentenceAnnotation> parse_conllu_file(const std::string& path);

// Maps UPOS + UD FEATS onto one of the eight inflection classes.
std::optional<Inflection> derive_inflection(std::string_view upos, const FeatureMap& feats);

// ASCII letters, U+0027 and U+2019 only; non-empty.
bool is_word_form(std::string_view form);

Dataset build_dataset(std::vector<SentenceAnnotation> sentences);

enum class Split : std::uint8_t { train, validation, test };
std::string_view to_string(Split value);

struct SplitAssignment {
  std::vector<Split> by_id;  // indexed by DataPoint::id
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(Split which) const;
  std::string to_json() const;
  static SplitAssignment from_json(std::string_view text);
};

// Per-class 70/10/20 split with seeded within-class shuffling. Requires ids
// to be 0..n-1 in order (as build_dataset assigns them).
SplitAssignment stratified_split(std::span<const DataPoint> data, std::uint64_t seed);

// Target split sizes for a class of n members: round(0.7n), round(0.1n), rest.
std::array<std::size_t, 3> split_sizes(std::size_t n);

enum class Task : std::uint8_t { lemma, inflection };
std::string_view to_string(Task value);

// Dense label space for a task over a dataset.
struct LabelSpace {
  Task task = Task::inflection;
  std::vector<std::string> classes;  // class index -> label name
  std::vector<int> labels;           // per data point, index into classes
};

// Inflection classes are always the full 8-member enum; lemma classes are
// the sorted distinct lemmas.
LabelSpace label_space(std::span<const DataPoint> data, Task task);

// Word-type key used by the control task (lowercased surface form).
std::string word_type(std::string_view form);

struct ControlMapping {
  Task task = Task::inflection;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;
  std::map<std::string, int> by_type;

  int label_of(std::string_view form) const;
  std::vector<int> labels_for(std::span<const DataPoint> data) const;
  std::string to_json() const;
  static ControlMapping from_json(std::string_view text);
};

ControlMapping gen_control_labels(std::span<const DataPoint> data, Task task, std::uint64_t seed);

// JSON Lines manifest, one DataPoint per line.
std::string manifest_jsonl(const Dataset& dataset);

// Reads a manifest back. Sentences are rebuilt from the `text` field, one
// token per whitespace-separated word; lemma/upos are only populated for
// the target tokens.
Dataset parse_manifest(std::string_view text);

struct DatasetStats {
  std::size_t points = 0;
  std::size_t sentences = 0;         // sentences contributing >= 1 point
  std::size_t unique_sentences = 0;  // distinct texts among those
  std::size_t unique_lemmas = 0;
  std::size_t unique_forms = 0;
  std::array<std::size_t, 3> pos_counts{};
  std::array<std::size_t, kInflectionCount> inflection_counts{};
  double mean_sentence_length = 0;
  double median_sentence_length = 0;
  std::size_t min_sentence_length = 0;
  std::size_t max_sentence_length = 0;
};

DatasetStats dataset_stats(const Dataset& dataset);

}  // namespace sleuth::corpus
