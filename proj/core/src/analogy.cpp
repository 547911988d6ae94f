#include "sleuth/analogy.hpp"

#include <algorithm>
#include <map>

#include "sleuth/errors.hpp"
#include "sleuth/io.hpp"

namespace sleuth::analogy {
namespace {

using VectorCache = std::map<std::string, Eigen::VectorXd, std::less<>>;

const WordEncoding& find_encoding(std::span<const WordEncoding> encodings, const std::string& word) {
  for (const auto& e : encodings) {
    if (e.word == word) return e;
  }
  throw CoverageError("no encoding for word '" + word + "'");
}

struct Scored {
  double similarity;
  const std::string* word;
};

std::vector<Scored> score_candidates(const AnalogyQuery& q, const EmbeddingTable& table,
                                     std::span<const WordEncoding> encodings, Mode mode) {
  const auto va = compose_vector(find_encoding(encodings, q.a), table, mode);
  const auto vb = compose_vector(find_encoding(encodings, q.b), table, mode);
  const auto vc = compose_vector(find_encoding(encodings, q.c), table, mode);
  const Eigen::VectorXd target = vb - va + vc;

  std::vector<Scored> scored;
  scored.reserve(encodings.size());
  for (const auto& e : encodings) {
    if (e.word == q.a || e.word == q.b || e.word == q.c) continue;
    scored.push_back({cosine(compose_vector(e, table, mode), target), &e.word});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return *x.word < *y.word;
  });
  return scored;
}

}  // namespace

Eigen::VectorXd compose_vector(const WordEncoding& encoding, const EmbeddingTable& table, Mode mode) {
  const auto& ids = mode == Mode::subtoken_avg ? encoding.subtoken_ids : encoding.wholeword_ids;
  if (ids.empty()) throw CoverageError("empty encoding for word '" + encoding.word + "'");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.dim));
  for (auto id : ids) {
    if (id >= table.vocab_size) {
      throw RangeError("token id " + std::to_string(id) + " outside embedding table of size " +
                       std::to_string(table.vocab_size));
    }
    const auto row = table.row(id);
    for (std::size_t k = 0; k < row.size(); ++k) sum(static_cast<Eigen::Index>(k)) += static_cast<double>(row[k]);
  }
  if (mode == Mode::subtoken_avg) sum /= static_cast<double>(ids.size());
  return sum;
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0 || nv == 0) return 0.0;
  return u.dot(v) / (nu * nv);
}

std::vector<std::string> ranked_candidates(const AnalogyQuery& query, const EmbeddingTable& table,
                                           std::span<const WordEncoding> encodings, Mode mode) {
  std::vector<std::string> out;
  for (const auto& s : score_candidates(query, table, encodings, mode)) out.push_back(*s.word);
  return out;
}

int analogy_rank(const AnalogyQuery& query, const EmbeddingTable& table, std::span<const WordEncoding> encodings,
                 Mode mode) {
  if (query.expected == query.a || query.expected == query.b || query.expected == query.c) {
    throw InvalidArgument("analogy query words must be distinct");
  }
  const auto scored = score_candidates(query, table, encodings, mode);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (*scored[i].word == query.expected) return static_cast<int>(i + 1);
  }
  throw CoverageError("expected word '" + query.expected + "' is not in the candidate list");
}

SuiteResult run_analogy_suite(std::span<const AnalogyQuery> queries, const EmbeddingTable& table,
                              std::span<const WordEncoding> encodings) {
  if (queries.empty()) throw InvalidArgument("analogy suite needs at least one query");
  SuiteResult suite;
  for (const auto& q : queries) {
    QueryResult r;
    r.query = q;
    try {
      for (const auto* w : {&q.a, &q.b, &q.c, &q.expected}) {
        r.fallback = r.fallback || find_encoding(encodings, *w).wholeword_fallback;
      }
      r.rank_subtoken = analogy_rank(q, table, encodings, Mode::subtoken_avg);
      r.rank_wholeword = analogy_rank(q, table, encodings, Mode::wholeword_sum);
      ++suite.evaluated;
      if (*r.rank_wholeword < *r.rank_subtoken) ++suite.wholeword_wins;
    } catch (const CoverageError& e) {
      r.rank_subtoken.reset();
      r.rank_wholeword.reset();
      r.error = e.what();
      ++suite.failed;
    } catch (const InvalidArgument& e) {
      r.rank_subtoken.reset();
      r.rank_wholeword.reset();
      r.error = e.what();
      ++suite.failed;
    }
    suite.results.push_back(std::move(r));
  }
  return suite;
}

std::vector<AnalogyQuery> parse_queries_csv(std::string_view text) {
  const auto rows = io::parse_csv(text);
  if (rows.empty()) return {};
  const auto& header = rows.front();
  auto col = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw InvalidArgument("analogy query CSV lacks column '" + std::string(name) + "'");
  };
  const std::size_t ia = col("a"), ib = col("b"), ic = col("c"), ie = col("expected");
  std::vector<AnalogyQuery> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) throw InvalidArgument("analogy CSV row " + std::to_string(r + 1) + " has wrong column count");
    out.push_back({row[ia], row[ib], row[ic], row[ie]});
  }
  return out;
}

}  // namespace sleuth::analogy
