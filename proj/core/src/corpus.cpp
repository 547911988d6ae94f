#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sleuth/corpus.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/random.hpp"

namespace sleuth::corpus {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kInflectionCount> kInflectionNames = {
    "singular", "plural", "base", "past", "3rd_pers", "positive", "comparative", "superlative"};
constexpr std::array<std::string_view, 3> kPosNames = {"noun", "verb", "adjective"};
constexpr std::array<std::string_view, 3> kSplitNames = {"train", "validation", "test"};
constexpr std::array<std::string_view, 2> kTaskNames = {"lemma", "inflection"};

std::string_view feat(const FeatureMap& feats, const std::string& key) {
  auto it = feats.find(key);
  return it == feats.end() ? std::string_view() : std::string_view(it->second);
}

std::optional<Pos> pos_of(std::string_view upos) {
  if (upos == "NOUN") return Pos::noun;
  if (upos == "VERB") return Pos::verb;
  if (upos == "ADJ") return Pos::adjective;
  return std::nullopt;
}

}  // namespace

std::string SentenceAnnotation::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t.form;
  }
  return out;
}

std::string_view to_string(Inflection value) { return kInflectionNames[static_cast<int>(value)]; }
std::string_view to_string(Pos value) { return kPosNames[static_cast<int>(value)]; }
std::string_view to_string(Split value) { return kSplitNames[static_cast<int>(value)]; }
std::string_view to_string(Task value) { return kTaskNames[static_cast<int>(value)]; }

std::optional<Inflection> inflection_from_string(std::string_view name) {
  for (int i = 0; i < kInflectionCount; ++i) {
    if (kInflectionNames[i] == name) return static_cast<Inflection>(i);
  }
  return std::nullopt;
}

std::optional<Pos> pos_from_string(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (kPosNames[i] == name) return static_cast<Pos>(i);
  }
  return std::nullopt;
}

std::optional<Inflection> derive_inflection(std::string_view upos, const FeatureMap& feats) {
  if (upos == "NOUN") {
    const auto number = feat(feats, "Number");
    if (number == "Sing") return Inflection::singular;
    if (number == "Plur") return Inflection::plural;
    return std::nullopt;
  }
  if (upos == "VERB") {
    const auto tense = feat(feats, "Tense");
    const auto form = feat(feats, "VerbForm");
    if (tense == "Past") return Inflection::past;
    if (form == "Ger" || form == "Part") return std::nullopt;
    const auto number = feat(feats, "Number");
    if (feat(feats, "Person") == "3" && tense == "Pres" && (number.empty() || number == "Sing")) {
      return Inflection::third_person;
    }
    if (form == "Fin" || form == "Inf") return Inflection::base;
    return std::nullopt;
  }
  if (upos == "ADJ") {
    const auto degree = feat(feats, "Degree");
    if (degree == "Cmp") return Inflection::comparative;
    if (degree == "Sup") return Inflection::superlative;
    return Inflection::positive;
  }
  return std::nullopt;
}

bool is_word_form(std::string_view form) {
  if (form.empty()) return false;
  for (std::size_t i = 0; i < form.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(form[i]);
    if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '\'') continue;
    // U+2019 RIGHT SINGLE QUOTATION MARK
    if (c == 0xE2 && i + 2 < form.size() && static_cast<unsigned char>(form[i + 1]) == 0x80 &&
        static_cast<unsigned char>(form[i + 2]) == 0x99) {
      i += 2;
      continue;
    }
    return false;
  }
  return true;
}

Dataset build_dataset(std::vector<SentenceAnnotation> sentences) {
  Dataset out;
  out.sentences = std::move(sentences);
  std::uint64_t next_id = 0;
  for (std::size_t s = 0; s < out.sentences.size(); ++s) {
    const auto& tokens = out.sentences[s].tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& tok = tokens[i];
      const auto inflection = derive_inflection(tok.upos, tok.feats);
      if (!inflection || !is_word_form(tok.form) || tok.lemma.empty()) continue;
      DataPoint p;
      p.sentence = s;
      p.target_index = i;
      p.form = tok.form;
      p.lemma = tok.lemma;
      p.inflection = *inflection;
      p.pos = *pos_of(tok.upos);
      p.id = next_id++;
      out.points.push_back(std::move(p));
    }
  }
  return out;
}

// --- splits -----------------------------------------------------------------

std::array<std::size_t, 3> split_sizes(std::size_t n) {
  // round-half-up in integer arithmetic
  const std::size_t train = (7 * n + 5) / 10;
  const std::size_t validation = (n + 5) / 10;
  return {train, validation, n - train - validation};
}

std::vector<std::size_t> SplitAssignment::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < by_id.size(); ++i) {
    if (by_id[i] == which) out.push_back(i);
  }
  return out;
}

std::string SplitAssignment::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["stratify_by"] = "inflection";
  j["count"] = by_id.size();
  for (auto s : {Split::train, Split::validation, Split::test}) {
    j[std::string(to_string(s))] = indices(s);
  }
  return j.dump() + "\n";
}

SplitAssignment SplitAssignment::from_json(std::string_view text) {
  SplitAssignment out;
  try {
    const auto j = ordered_json::parse(text);
    out.seed = j.at("seed").get<std::uint64_t>();
    const auto count = j.at("count").get<std::size_t>();
    std::vector<int> seen(count, 0);
    out.by_id.assign(count, Split::train);
    for (auto s : {Split::train, Split::validation, Split::test}) {
      for (auto id : j.at(std::string(to_string(s))).get<std::vector<std::size_t>>()) {
        if (id >= count) throw InvalidArgument("split id out of range: " + std::to_string(id));
        ++seen[id];
        out.by_id[id] = s;
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (seen[i] != 1) throw InvalidArgument("data point " + std::to_string(i) + " not assigned exactly once");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed split file: ") + e.what());
  }
  return out;
}

SplitAssignment stratified_split(std::span<const DataPoint> data, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kInflectionCount> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].id != i) throw InvalidArgument("data point ids must be 0..n-1 in order");
    by_class[static_cast<int>(data[i].inflection)].push_back(i);
  }
  for (int k = 0; k < kInflectionCount; ++k) {
    const auto n = by_class[k].size();
    if (n > 0 && n < 3) {
      throw InvalidArgument("inflection class '" + std::string(to_string(static_cast<Inflection>(k))) +
                            "' has " + std::to_string(n) + " members; stratified split needs at least 3");
    }
  }

  SplitAssignment out;
  out.seed = seed;
  out.by_id.assign(data.size(), Split::train);
  Rng rng(seed);
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto [train, validation, test] = split_sizes(members.size());
    (void)test;
    for (std::size_t r = 0; r < members.size(); ++r) {
      out.by_id[members[r]] = r < train ? Split::train : (r < train + validation ? Split::validation : Split::test);
    }
  }
  return out;
}

// --- labels and control tasks -------------------------------------------------

LabelSpace label_space(std::span<const DataPoint> data, Task task) {
  LabelSpace out;
  out.task = task;
  out.labels.reserve(data.size());
  if (task == Task::inflection) {
    for (auto name : kInflectionNames) out.classes.emplace_back(name);
    for (const auto& p : data) out.labels.push_back(static_cast<int>(p.inflection));
    return out;
  }
  std::set<std::string> lemmas;
  for (const auto& p : data) lemmas.insert(p.lemma);
  out.classes.assign(lemmas.begin(), lemmas.end());
  for (const auto& p : data) {
    auto it = std::lower_bound(out.classes.begin(), out.classes.end(), p.lemma);
    out.labels.push_back(static_cast<int>(it - out.classes.begin()));
  }
  return out;
}

std::string word_type(std::string_view form) {
  std::string out(form);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

int ControlMapping::label_of(std::string_view form) const {
  auto it = by_type.find(word_type(form));
  if (it == by_type.end()) throw InvalidArgument("word type not in control mapping: " + std::string(form));
  return it->second;
}

std::vector<int> ControlMapping::labels_for(std::span<const DataPoint> data) const {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& p : data) out.push_back(label_of(p.form));
  return out;
}

std::string ControlMapping::to_json() const {
  ordered_json j;
  j["task"] = std::string(to_string(task));
  j["seed"] = seed;
  j["num_classes"] = num_classes;
  ordered_json mapping = ordered_json::object();
  for (const auto& [type, label] : by_type) mapping[type] = label;
  j["mapping"] = std::move(mapping);
  return j.dump() + "\n";
}

ControlMapping ControlMapping::from_json(std::string_view text) {
  ControlMapping out;
  try {
    const auto j = ordered_json::parse(text);
    const auto task = j.at("task").get<std::string>();
    if (task == "lemma") {
      out.task = Task::lemma;
    } else if (task == "inflection") {
      out.task = Task::inflection;
    } else {
      throw InvalidArgument("unknown control task '" + task + "'");
    }
    out.seed = j.at("seed").get<std::uint64_t>();
    out.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& [type, label] : j.at("mapping").items()) {
      const int value = label.get<int>();
      if (value < 0 || static_cast<std::size_t>(value) >= out.num_classes) {
        throw InvalidArgument("control label out of range for '" + type + "'");
      }
      out.by_type.emplace(type, value);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed control mapping: ") + e.what());
  }
  return out;
}

ControlMapping gen_control_labels(std::span<const DataPoint> data, Task task, std::uint64_t seed) {
  const auto space = label_space(data, task);
  ControlMapping out;
  out.task = task;
  out.seed = seed;
  out.num_classes = space.classes.size();

  // Empirical distribution of the real labels, as a cumulative table.
  std::vector<double> cumulative(space.classes.size(), 0.0);
  for (int label : space.labels) cumulative[label] += 1.0;
  double total = 0;
  for (auto& c : cumulative) {
    total += c;
    c = total;
  }

  std::set<std::string> types;
  for (const auto& p : data) types.insert(word_type(p.form));

  auto rng = Rng::derived(seed, static_cast<std::uint64_t>(task) + 1);
  for (const auto& type : types) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    out.by_type.emplace(type, static_cast<int>(it - cumulative.begin()));
  }
  return out;
}

// --- manifest -------------------------------------------------------------------

std::string manifest_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& p : dataset.points) {
    const auto& sentence = dataset.sentence_of(p);
    ordered_json j;
    j["id"] = p.id;
    j["text"] = sentence.text();
    j["target_index"] = p.target_index;
    j["lemma"] = p.lemma;
    j["inflection"] = std::string(to_string(p.inflection));
    j["pos"] = std::string(to_string(p.pos));
    j["form"] = p.form;
    j["source"] = sentence.source_id;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

Dataset parse_manifest(std::string_view text) {
  Dataset out;
  std::map<std::pair<std::string, std::string>, std::size_t> sentence_index;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      DataPoint p;
      p.id = j.at("id").get<std::uint64_t>();
      p.target_index = j.at("target_index").get<std::size_t>();
      p.lemma = j.at("lemma").get<std::string>();
      const auto inflection = inflection_from_string(j.at("inflection").get<std::string>());
      const auto pos = pos_from_string(j.at("pos").get<std::string>());
      if (!inflection || !pos) throw InvalidArgument("unknown inflection or pos label");
      p.inflection = *inflection;
      p.pos = *pos;
      const auto sentence_text = j.at("text").get<std::string>();
      const auto source = j.value("source", std::string());

      auto [it, inserted] = sentence_index.emplace(std::make_pair(source, sentence_text), out.sentences.size());
      if (inserted) {
        SentenceAnnotation s;
        s.source_id = source;
        std::istringstream words(sentence_text);
        std::string w;
        while (words >> w) s.tokens.push_back(Token{w, {}, {}, {}});
        out.sentences.push_back(std::move(s));
      }
      p.sentence = it->second;
      auto& sentence = out.sentences[p.sentence];
      if (p.target_index >= sentence.tokens.size()) throw InvalidArgument("target_index beyond sentence length");
      p.form = j.value("form", sentence.tokens[p.target_index].form);
      sentence.tokens[p.target_index].lemma = p.lemma;
      if (p.id != out.points.size()) throw InvalidArgument("manifest ids must be consecutive from 0");
      out.points.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats s;
  s.points = dataset.points.size();
  std::set<std::string> lemmas, forms;
  std::set<std::size_t> contributing;
  for (const auto& p : dataset.points) {
    lemmas.insert(p.lemma);
    forms.insert(p.form);
    contributing.insert(p.sentence);
    ++s.pos_counts[static_cast<int>(p.pos)];
    ++s.inflection_counts[static_cast<int>(p.inflection)];
  }
  s.unique_lemmas = lemmas.size();
  s.unique_forms = forms.size();
  s.sentences = contributing.size();

  std::set<std::string> texts;
  std::vector<std::size_t> lengths;
  for (auto idx : contributing) {
    const auto& sentence = dataset.sentences[idx];
    texts.insert(sentence.text());
    lengths.push_back(sentence.tokens.size());
  }
  s.unique_sentences = texts.size();
  if (!lengths.empty()) {
    std::sort(lengths.begin(), lengths.end());
    double sum = 0;
    for (auto n : lengths) sum += static_cast<double>(n);
    s.mean_sentence_length = sum / static_cast<double>(lengths.size());
    const auto mid = lengths.size() / 2;
    s.median_sentence_length = lengths.size() % 2 ? static_cast<double>(lengths[mid])
                                                   : 0.5 * static_cast<double>(lengths[mid - 1] + lengths[mid]);
    s.min_sentence_length = lengths.front();
    s.max_sentence_length = lengths.back();
  }
  return s;
}

}  // namespace sleuth::corpus
