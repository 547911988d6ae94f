#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sleuth/tensorstore.hpp"

namespace sleuth::analogy {

using store::EmbeddingTable;
using store::WordEncoding;

enum class Mode { subtoken_avg, wholeword_sum };

// a : b :: c : expected
struct AnalogyQuery {
  std::string a, b, c, expected;
};

// subtoken_avg: mean of the subtoken rows; wholeword_sum: sum of the
// whole-word rows. RangeError on an id outside the table.
Eigen::VectorXd compose_vector(const WordEncoding& encoding, const EmbeddingTable& table, Mode mode);

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Candidates are the words in `encodings`. The target v = b - a + c is
// compared by cosine; a, b and c are excluded; ties go to the
// lexicographically smaller word. Returns the 1-based rank of `expected`.
// CoverageError when a query word has no encoding.
int analogy_rank(const AnalogyQuery& query, const EmbeddingTable& table, std::span<const WordEncoding> encodings,
                 Mode mode);

// Candidate words in ranked order (for inspection and tests).
std::vector<std::string> ranked_candidates(const AnalogyQuery& query, const EmbeddingTable& table,
                                           std::span<const WordEncoding> encodings, Mode mode);

struct QueryResult {
  AnalogyQuery query;
  std::optional<int> rank_subtoken;
  std::optional<int> rank_wholeword;
  bool fallback = false;  // some word used the minimal-tokenization fallback
  std::optional<std::string> error;
};

struct SuiteResult {
  std::vector<QueryResult> results;
  std::size_t wholeword_wins = 0;  // queries with rank_wholeword < rank_subtoken
  std::size_t evaluated = 0;
  std::size_t failed = 0;
};

// Coverage errors are recorded per query; InvalidArgument on an empty list.
SuiteResult run_analogy_suite(std::span<const AnalogyQuery> queries, const EmbeddingTable& table,
                              std::span<const WordEncoding> encodings);

// CSV with header a,b,c,expected.
std::vector<AnalogyQuery> parse_queries_csv(std::string_view text);

}  // namespace sleuth::analogy
