#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "oracles/oracles.hpp"
#include "sleuth/analogy.hpp"
#include "sleuth/errors.hpp"

using namespace sleuth;
using namespace sleuth::analogy;

namespace {

// 8 pieces in 3 dimensions; five words, two of them split into subtokens.
EmbeddingTable toy_table() {
  EmbeddingTable t;
  t.vocab_size = 8;
  t.dim = 3;
  t.values = {1.0f, 0.2f, 0.0f,   0.9f, 1.1f, 0.1f,  0.1f, 0.3f, 1.0f,   0.2f, 1.3f, 0.9f,
              0.5f, -0.4f, 0.3f,  -0.6f, 0.8f, 0.2f, 0.3f, 0.1f, -0.7f,  0.7f, 0.7f, 0.6f};
  t.encodings = {
      {"man", {0}, {0}, false},
      {"king", {1}, {1}, false},
      {"woman", {2}, {2}, false},
      {"queen", {4, 5}, {3}, false},
      {"prince", {6, 7, 7}, {6, 7}, true},
  };
  return t;
}

std::vector<oracle::Word> oracle_words(const EmbeddingTable& t, Mode mode) {
  std::vector<oracle::Word> out;
  for (const auto& e : t.encodings) {
    const auto& ids = mode == Mode::subtoken_avg ? e.subtoken_ids : e.wholeword_ids;
    std::vector<double> v(t.dim, 0.0);
    for (auto id : ids)
      for (std::size_t k = 0; k < t.dim; ++k) v[k] += t.values[id * t.dim + k];
    if (mode == Mode::subtoken_avg)
      for (auto& x : v) x /= static_cast<double>(ids.size());
    out.push_back({e.word, v});
  }
  return out;
}

std::vector<AnalogyQuery> all_queries(const EmbeddingTable& t) {
  std::vector<std::string> w;
  for (const auto& e : t.encodings) w.push_back(e.word);
  std::vector<AnalogyQuery> out;
  for (const auto& a : w)
    for (const auto& b : w)
      for (const auto& c : w)
        for (const auto& e : w) {
          const std::set<std::string> s = {a, b, c, e};
          if (s.size() == 4) out.push_back({a, b, c, e});
        }
  return out;
}

}  // namespace

TEST(Compose, Definitions) {
  const auto t = toy_table();
  const auto& man = t.encodings[0];
  EXPECT_EQ(compose_vector(man, t, Mode::subtoken_avg), compose_vector(man, t, Mode::wholeword_sum));
  const WordEncoding twice{"x", {3, 3}, {3}, false};
  EXPECT_TRUE(compose_vector(twice, t, Mode::subtoken_avg).isApprox(compose_vector(twice, t, Mode::wholeword_sum)));
  const WordEncoding split{"y", {3, 7}, {3, 7}, false};
  const Eigen::VectorXd u = Eigen::Vector3d(0.2, 1.3, 0.9), v = Eigen::Vector3d(0.7, 0.7, 0.6);
  EXPECT_LT((compose_vector(split, t, Mode::subtoken_avg) - (u + v) / 2).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LT((compose_vector(split, t, Mode::wholeword_sum) - (u + v)).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_THROW(compose_vector(WordEncoding{"z", {8}, {8}, false}, t, Mode::subtoken_avg), RangeError);
  EXPECT_THROW(compose_vector(WordEncoding{"z", {}, {1}, false}, t, Mode::subtoken_avg), CoverageError);
}

TEST(Rank, ExactTargetIsFirst) {
  EmbeddingTable t;
  t.vocab_size = 6;
  t.dim = 4;
  // b - a + c = e0 + e1 ; expected = e0 + e1 ; distractors orthogonal to it
  t.values = {0, 0, 1, 0,  1, 0, 1, 0,  0, 1, 0, 0,  1, 1, 0, 0,  0, 0, 0, 1,  1, -1, 0, 0};
  t.encodings = {{"a", {0}, {0}, false}, {"b", {1}, {1}, false}, {"c", {2}, {2}, false},
                 {"e", {3}, {3}, false}, {"f", {4}, {4}, false}, {"g", {5}, {5}, false}};
  EXPECT_EQ(analogy_rank({"a", "b", "c", "e"}, t, t.encodings, Mode::subtoken_avg), 1);
  // f and g both score 0; f wins the tie
  EXPECT_EQ(analogy_rank({"a", "b", "c", "g"}, t, t.encodings, Mode::subtoken_avg), 3);
  EXPECT_EQ(analogy_rank({"a", "b", "c", "f"}, t, t.encodings, Mode::subtoken_avg), 2);
}

TEST(Rank, TiesGoToSmallerWord) {
  EmbeddingTable t;
  t.vocab_size = 5;
  t.dim = 2;
  t.values = {0, 0, 1, 0, 0, 1, 1, 1, 1, 1};
  t.encodings = {{"a", {0}, {0}, false}, {"b", {1}, {1}, false}, {"c", {2}, {2}, false},
                 {"zeta", {3}, {3}, false}, {"alpha", {4}, {4}, false}};
  EXPECT_EQ(analogy_rank({"a", "b", "c", "zeta"}, t, t.encodings, Mode::subtoken_avg), 2);
  EXPECT_EQ(analogy_rank({"a", "b", "c", "alpha"}, t, t.encodings, Mode::subtoken_avg), 1);
}

TEST(Rank, MatchesBruteForceInBothModes) {
  const auto t = toy_table();
  for (Mode mode : {Mode::subtoken_avg, Mode::wholeword_sum}) {
    const auto words = oracle_words(t, mode);
    for (const auto& q : all_queries(t)) {
      EXPECT_EQ(analogy_rank(q, t, t.encodings, mode), oracle::brute_rank(words, q.a, q.b, q.c, q.expected))
          << q.a << ":" << q.b << "::" << q.c << ":" << q.expected;
    }
  }
}

TEST(Rank, InvariantUnderScaleAndRotation) {
  const auto t = toy_table();
  const auto Q = oracle::random_orthogonal(3, 9);
  auto rotated = t, scaled = t;
  for (std::size_t r = 0; r < t.vocab_size; ++r) {
    Eigen::Vector3d row(t.values[r * 3], t.values[r * 3 + 1], t.values[r * 3 + 2]);
    const Eigen::Vector3d x = Q.transpose() * row;
    for (int k = 0; k < 3; ++k) {
      rotated.values[r * 3 + static_cast<std::size_t>(k)] = static_cast<float>(x(k));
      scaled.values[r * 3 + static_cast<std::size_t>(k)] *= 4.0f;
    }
  }
  for (Mode mode : {Mode::subtoken_avg, Mode::wholeword_sum}) {
    for (const auto& q : all_queries(t)) {
      const int base = analogy_rank(q, t, t.encodings, mode);
      EXPECT_EQ(analogy_rank(q, rotated, rotated.encodings, mode), base);
      EXPECT_EQ(analogy_rank(q, scaled, scaled.encodings, mode), base);
    }
  }
}

TEST(Rank, InputWordsExcluded) {
  const auto t = toy_table();
  for (const auto& q : all_queries(t)) {
    const auto ranked = ranked_candidates(q, t, t.encodings, Mode::wholeword_sum);
    EXPECT_EQ(ranked.size(), 2u);
    for (const auto* w : {&q.a, &q.b, &q.c}) EXPECT_EQ(std::count(ranked.begin(), ranked.end(), *w), 0);
  }
}

TEST(Rank, Errors) {
  const auto t = toy_table();
  EXPECT_THROW(analogy_rank({"man", "king", "woman", "duke"}, t, t.encodings, Mode::subtoken_avg), CoverageError);
  EXPECT_THROW(analogy_rank({"duke", "king", "woman", "queen"}, t, t.encodings, Mode::subtoken_avg), CoverageError);
  EXPECT_THROW(analogy_rank({"man", "king", "woman", "man"}, t, t.encodings, Mode::subtoken_avg), InvalidArgument);
}

TEST(Suite, PairsMatchOracleAndRecordErrors) {
  const auto t = toy_table();
  auto queries = all_queries(t);
  queries.resize(20);
  queries.push_back({"man", "king", "woman", "duke"});
  const auto suite = run_analogy_suite(queries, t, t.encodings);
  ASSERT_EQ(suite.results.size(), 21u);
  EXPECT_EQ(suite.evaluated, 20u);
  EXPECT_EQ(suite.failed, 1u);
  const auto sub = oracle_words(t, Mode::subtoken_avg);
  const auto whole = oracle_words(t, Mode::wholeword_sum);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& r = suite.results[i];
    const auto& q = r.query;
    EXPECT_EQ(*r.rank_subtoken, oracle::brute_rank(sub, q.a, q.b, q.c, q.expected));
    EXPECT_EQ(*r.rank_wholeword, oracle::brute_rank(whole, q.a, q.b, q.c, q.expected));
    wins += *r.rank_wholeword < *r.rank_subtoken;
    const bool uses_prince = q.a == "prince" || q.b == "prince" || q.c == "prince" || q.expected == "prince";
    EXPECT_EQ(r.fallback, uses_prince);
  }
  EXPECT_EQ(suite.wholeword_wins, wins);
  EXPECT_FALSE(suite.results.back().rank_subtoken.has_value());
  EXPECT_TRUE(suite.results.back().error.has_value());
  EXPECT_THROW(run_analogy_suite(std::vector<AnalogyQuery>{}, t, t.encodings), InvalidArgument);
}

TEST(Suite, SingleTokenWordsGiveEqualModes) {
  auto t = toy_table();
  t.encodings[3] = {"queen", {3}, {3}, false};
  t.encodings[4] = {"prince", {6}, {6}, false};
  for (const auto& r : run_analogy_suite(all_queries(t), t, t.encodings).results) {
    EXPECT_EQ(r.rank_subtoken, r.rank_wholeword);
  }
}

TEST(QueriesCsv, Parses) {
  const auto q = parse_queries_csv("expected,a,b,c\nqueen,man,king,woman\n\n\"x,y\",p,q,r\n");
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].a, "man");
  EXPECT_EQ(q[0].expected, "queen");
  EXPECT_EQ(q[1].expected, "x,y");
  EXPECT_THROW(parse_queries_csv("a,b,c\nx,y,z\n"), InvalidArgument);
  EXPECT_THROW(parse_queries_csv("a,b,c,expected\nx,y\n"), InvalidArgument);
  EXPECT_TRUE(parse_queries_csv("").empty());
}
