#include <fstream>
#include <string>
#include <vector>

#include "sleuth/corpus.hpp"
#include "sleuth/errors.hpp"

namespace sleuth::corpus {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool is_range_id(std::string_view id) { return id.find('-') != std::string_view::npos; }
bool is_empty_node_id(std::string_view id) { return id.find('.') != std::string_view::npos; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

FeatureMap parse_feats(std::string_view column, const std::string& source, std::size_t line_no) {
  FeatureMap feats;
  if (column == "_" || column.empty()) return feats;
  std::size_t start = 0;
  while (start <= column.size()) {
    auto bar = column.find('|', start);
    if (bar == std::string_view::npos) bar = column.size();
    const auto item = column.substr(start, bar - start);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(source, line_no, "malformed FEATS item '" + std::string(item) + "'");
    }
    auto [it, inserted] = feats.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (!inserted) {
      throw ParseError(source, line_no, "duplicate feature key '" + it->first + "'");
    }
    start = bar + 1;
  }
  return feats;
}

std::string null_to_empty(std::string_view field) { return field == "_" ? std::string() : std::string(field); }

}  // namespace

std::vector<SentenceAnnotation> parse_conllu(std::istream& in, const std::string& source) {
  std::vector<SentenceAnnotation> sentences;
  SentenceAnnotation current;
  std::size_t line_no = 0;
  std::size_t sentence_no = 0;

  auto flush = [&] {
    if (!current.tokens.empty()) {
      if (current.source_id.empty()) current.source_id = source + "#" + std::to_string(sentence_no);
      sentences.push_back(std::move(current));
      ++sentence_no;
    }
    current = SentenceAnnotation{};
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kSentId = "sent_id";
      auto body = trim(line.substr(1));
      if (body.starts_with(kSentId)) {
        auto rest = trim(body.substr(kSentId.size()));
        if (!rest.empty() && rest.front() == '=') current.source_id = std::string(trim(rest.substr(1)));
      }
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 10) {
      throw ParseError(source, line_no,
                       "expected 10 tab-separated columns, found " + std::to_string(fields.size()));
    }
    if (is_range_id(fields[0]) || is_empty_node_id(fields[0])) continue;
    if (fields[1].empty()) throw ParseError(source, line_no, "token has no surface form");

    Token token;
    token.form = std::string(fields[1]);
    token.lemma = null_to_empty(fields[2]);
    token.upos = null_to_empty(fields[3]);
    token.feats = parse_feats(fields[5], source, line_no);
    current.tokens.push_back(std::move(token));
  }
  flush();
  return sentences;
}

std::vector<SentenceAnnotation> parse_conllu_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open CoNLL-U file: " + path);
  return parse_conllu(in, path);
}

}  // namespace sleuth::corpus
