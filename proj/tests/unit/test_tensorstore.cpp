#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <thread>

#include "oracles/oracles.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/tensorstore.hpp"

using namespace sleuth;
using namespace sleuth::store;

namespace {

std::span<const std::uint8_t> bytes_of(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

StoreHeader header(std::uint32_t L, std::uint64_t m, std::uint32_t d, std::string_view manifest = "manifest") {
  StoreHeader h;
  h.model_id = "gpt2";
  h.layer_count = L;
  h.example_count = m;
  h.hidden_dim = d;
  h.digest = sha256(bytes_of(manifest));
  return h;
}

std::vector<LayerMatrix> random_layers(std::uint32_t L, std::uint64_t m, std::uint32_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LayerMatrix> layers;
  for (std::uint32_t l = 0; l < L; ++l) {
    LayerMatrix x{static_cast<std::int32_t>(l), m, d, {}};
    x.values.resize(m * d);
    for (auto& v : x.values) v = static_cast<float>(rng.normal() * 10);
    layers.push_back(std::move(x));
  }
  return layers;
}

void truncate_to(const std::filesystem::path& p, std::uintmax_t size) { std::filesystem::resize_file(p, size); }

void flip_byte(const std::filesystem::path& p, std::uint64_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x5A);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
  }
  return true;
}

}  // namespace

TEST(Digest, Crc64XzCheckValue) {
  EXPECT_EQ(crc64(bytes_of("123456789")), 0x995DC9BBDF1939FAULL);
  EXPECT_EQ(crc64(bytes_of("")), 0u);
}

TEST(Digest, Crc64Incremental) {
  const std::string s = "the quick brown fox jumps over the lazy dog";
  const auto whole = crc64(bytes_of(s));
  for (std::size_t cut : {0ul, 1ul, 10ul, s.size()}) {
    const auto first = crc64(bytes_of(std::string_view(s).substr(0, cut)));
    EXPECT_EQ(crc64(bytes_of(std::string_view(s).substr(cut)), first), whole) << cut;
  }
}

TEST(Digest, Sha256KnownVector) {
  EXPECT_EQ(to_hex(sha256(bytes_of("abc"))), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, Sha256FileMatchesBytes) {
  oracle::TempDir dir;
  std::ofstream(dir / "f") << "hello world";
  EXPECT_EQ(sha256_file(dir / "f"), sha256(bytes_of("hello world")));
}

TEST(Store, ZerosRoundTripAndDeterministicSize) {
  oracle::TempDir dir;
  std::vector<LayerMatrix> layers = {{0, 3, 4, std::vector<float>(12, 0.0f)}, {1, 3, 4, std::vector<float>(12, 0.0f)}};
  write_store(dir / "a.store", header(2, 3, 4), layers);
  write_store(dir / "b.store", header(2, 3, 4), layers);
  // header 76 + 4 (model id), index 4 + 2 * 44 + 8, blocks 2 * 48
  EXPECT_EQ(std::filesystem::file_size(dir / "a.store"), 276u);
  EXPECT_EQ(sha256_file(dir / "a.store"), sha256_file(dir / "b.store"));
  for (int k = 0; k < 2; ++k) EXPECT_TRUE(bit_equal(read_layer(dir / "a.store", k).values, layers[k].values));
}

TEST(Store, RoundTripPreservesSpecialBitPatterns) {
  oracle::TempDir dir;
  LayerMatrix x{0, 2, 3, {-0.0f, 1e-45f, std::numeric_limits<float>::max(), std::numeric_limits<float>::lowest(),
                          std::numeric_limits<float>::min(), 0.1f}};
  write_store(dir / "s", header(1, 2, 3), std::span(&x, 1));
  EXPECT_TRUE(bit_equal(read_layer(dir / "s", 0).values, x.values));
}

TEST(Store, LayoutFields) {
  oracle::TempDir dir;
  const auto layers = random_layers(3, 5, 2, 1);
  write_store(dir / "s", header(3, 5, 2), layers);
  const auto layout = read_layout(dir / "s");
  EXPECT_EQ(layout.header.model_id, "gpt2");
  EXPECT_EQ(layout.header.layer_count, 3u);
  EXPECT_EQ(layout.header.example_count, 5u);
  EXPECT_EQ(layout.header.hidden_dim, 2u);
  ASSERT_EQ(layout.slots.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    ASSERT_NE(layout.find(k), nullptr);
    EXPECT_EQ(layout.find(k)->bytes, 40u);
  }
  EXPECT_EQ(layout.find(kEmbeddingSlot), nullptr);
}

TEST(Store, DimensionMismatchWritesNothing) {
  oracle::TempDir dir;
  auto layers = random_layers(2, 3, 4, 2);
  layers[1] = LayerMatrix{1, 2, 4, std::vector<float>(8, 1.0f)};
  EXPECT_THROW(write_store(dir / "s", header(2, 3, 4), layers), DimensionError);
  EXPECT_FALSE(std::filesystem::exists(dir / "s"));
  EXPECT_THROW(write_store(dir / "s", header(3, 3, 4), random_layers(2, 3, 4, 2)), DimensionError);
  EXPECT_FALSE(std::filesystem::exists(dir / "s"));
  EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(Store, NonFiniteRejected) {
  oracle::TempDir dir;
  auto layers = random_layers(1, 2, 2, 3);
  layers[0].values[1] = std::nanf("");
  EXPECT_THROW(write_store(dir / "s", header(1, 2, 2), layers), InvalidArgument);
  EXPECT_FALSE(std::filesystem::exists(dir / "s"));
}

TEST(Store, LayerIndexOutOfRange) {
  oracle::TempDir dir;
  write_store(dir / "s", header(2, 3, 4), random_layers(2, 3, 4, 4));
  EXPECT_THROW(read_layer(dir / "s", 2), RangeError);
  EXPECT_THROW(read_layer(dir / "s", -2), RangeError);
}

TEST(Store, TruncatedMidBlockIsIntegrityError) {
  oracle::TempDir dir;
  write_store(dir / "s", header(2, 3, 4), random_layers(2, 3, 4, 5));
  const auto layout = read_layout(dir / "s");
  const auto* last = layout.find(1);
  truncate_to(dir / "s", last->offset + last->bytes / 2);
  EXPECT_NO_THROW(read_layer(dir / "s", 0));
  EXPECT_THROW(read_layer(dir / "s", 1), IntegrityError);
  EXPECT_THROW(verify_store(dir / "s"), IntegrityError);
}

TEST(Store, TruncatedHeaderIsIntegrityError) {
  oracle::TempDir dir;
  write_store(dir / "s", header(1, 3, 4), random_layers(1, 3, 4, 6));
  truncate_to(dir / "s", 30);
  EXPECT_THROW(read_layout(dir / "s"), IntegrityError);
}

TEST(Store, CorruptBlockIsIntegrityError) {
  oracle::TempDir dir;
  write_store(dir / "s", header(2, 3, 4), random_layers(2, 3, 4, 7));
  const auto layout = read_layout(dir / "s");
  flip_byte(dir / "s", layout.find(0)->offset + 5);
  EXPECT_THROW(read_layer(dir / "s", 0), IntegrityError);
  EXPECT_NO_THROW(read_layer(dir / "s", 1));
}

TEST(Store, CorruptHeaderIsIntegrityError) {
  oracle::TempDir dir;
  write_store(dir / "s", header(1, 3, 4), random_layers(1, 3, 4, 8));
  flip_byte(dir / "s", 20);
  EXPECT_THROW(read_layout(dir / "s"), IntegrityError);
}

TEST(Store, WrongMagicIsFormatError) {
  oracle::TempDir dir;
  write_store(dir / "s", header(1, 3, 4), random_layers(1, 3, 4, 9));
  flip_byte(dir / "s", 0);
  EXPECT_THROW(read_layout(dir / "s"), FormatError);
  std::ofstream(dir / "t") << "not a store at all";
  EXPECT_THROW(validate_store(dir / "t", bytes_of("manifest")), FormatError);
}

TEST(Store, ValidateAgainstManifest) {
  oracle::TempDir dir;
  write_store(dir / "s", header(1, 3, 4, "M"), random_layers(1, 3, 4, 10));
  EXPECT_EQ(validate_store(dir / "s", bytes_of("M")).model_id, "gpt2");
  try {
    validate_store(dir / "s", bytes_of("M'"));
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("different dataset"), std::string::npos);
  }
  std::ofstream(dir / "manifest.jsonl", std::ios::binary) << "M";
  EXPECT_NO_THROW(validate_store(dir / "s", dir / "manifest.jsonl"));
}

TEST(Store, ReadRowsSubset) {
  oracle::TempDir dir;
  const auto layers = random_layers(1, 6, 3, 11);
  write_store(dir / "s", header(1, 6, 3), layers);
  const std::vector<std::size_t> rows = {4, 0, 4};
  const auto sub = read_layer_rows(dir / "s", 0, rows);
  ASSERT_EQ(sub.rows, 3u);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::uint64_t c = 0; c < 3; ++c) EXPECT_EQ(sub.at(i, c), layers[0].at(rows[i], c));
  const std::vector<std::size_t> bad = {6};
  EXPECT_THROW(read_layer_rows(dir / "s", 0, bad), RangeError);
}

TEST(Store, EmbeddingTableRoundTrip) {
  oracle::TempDir dir;
  EmbeddingTable t;
  t.vocab_size = 4;
  t.dim = 2;
  t.values = {1, 2, 3, 4, 5, 6, 7, 8};
  t.pieces = {{0, "king"}, {1, "qu"}, {2, "een"}, {3, "Ġman"}};
  t.encodings = {{"king", {0}, {0}, false}, {"queen", {1, 2}, {1, 2}, true}};
  write_store(dir / "s", header(1, 2, 2), random_layers(1, 2, 2, 12), t);
  ASSERT_TRUE(has_embeddings(dir / "s"));
  const auto back = read_embeddings(dir / "s");
  EXPECT_EQ(back.vocab_size, 4u);
  EXPECT_EQ(back.dim, 2u);
  EXPECT_TRUE(bit_equal(back.values, t.values));
  EXPECT_EQ(back.pieces, t.pieces);
  ASSERT_EQ(back.encodings.size(), 2u);
  EXPECT_EQ(back.encodings[1].word, "queen");
  EXPECT_EQ(back.encodings[1].subtoken_ids, (std::vector<std::uint32_t>{1, 2}));
  EXPECT_TRUE(back.encodings[1].wholeword_fallback);
  EXPECT_FALSE(back.encodings[0].wholeword_fallback);
  EXPECT_NO_THROW(verify_store(dir / "s"));
}

TEST(Store, EmbeddingsOnlyStore) {
  oracle::TempDir dir;
  EmbeddingTable t{2, 1, {1, 2}, {{0, "a"}, {1, "b"}}, {{"a", {0}, {0}, false}}};
  write_store(dir / "s", header(0, 1, 1), {}, t);
  EXPECT_EQ(read_embeddings(dir / "s").values, t.values);
  EXPECT_THROW(read_layer(dir / "s", 0), RangeError);
}

TEST(Store, EmbeddingIdOutOfRangeRejected) {
  oracle::TempDir dir;
  EmbeddingTable t{2, 1, {1, 2}, {}, {{"a", {5}, {0}, false}}};
  EXPECT_THROW(write_store(dir / "s", header(0, 1, 1), {}, t), DimensionError);
  EmbeddingTable u{2, 1, {1, 2}, {{7, "x"}}, {}};
  EXPECT_THROW(write_store(dir / "s", header(0, 1, 1), {}, u), DimensionError);
}

TEST(Store, NoEmbeddingTableIsRangeError) {
  oracle::TempDir dir;
  write_store(dir / "s", header(1, 1, 1), random_layers(1, 1, 1, 13));
  EXPECT_FALSE(has_embeddings(dir / "s"));
  EXPECT_THROW(read_embeddings(dir / "s"), RangeError);
}

TEST(Store, RewriteIsAtomic) {
  oracle::TempDir dir;
  write_store(dir / "s", header(1, 2, 2), random_layers(1, 2, 2, 14));
  const auto replacement = random_layers(1, 2, 2, 15);
  write_store(dir / "s", header(1, 2, 2), replacement);
  EXPECT_TRUE(bit_equal(read_layer(dir / "s", 0).values, replacement[0].values));
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    (void)e;
    ++n;
  }
  EXPECT_EQ(n, 1u);
}

TEST(Store, ConcurrentReaders) {
  oracle::TempDir dir;
  const auto layers = random_layers(4, 50, 8, 16);
  write_store(dir / "s", header(4, 50, 8), layers);
  std::atomic<int> mismatches{0};
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int rep = 0; rep < 10; ++rep) {
          const int k = (t + rep) % 4;
          if (!bit_equal(read_layer(dir / "s", k).values, layers[k].values)) ++mismatches;
        }
      });
    }
  }
  EXPECT_EQ(mismatches.load(), 0);
}
