#pragma once

// Binary container for per-layer activation matrices.
//
// Layout (all integers little-endian):
//
//   header
//     magic            8 bytes  "SLEUTHAS"
//     version          u32      (kFormatVersion)
//     model id         u32 length + UTF-8 bytes
//     layer count L    u32
//     example count m  u64
//     hidden dim d     u32
//     dtype            u32      (0 = f32)
//     alignment digest 32 bytes (SHA-256 of the dataset manifest)
//     header checksum  u64      (CRC-64/XZ of every header byte above)
//   offset index
//     entry count      u32
//     entries          { slot i32, rows u64, cols u64, offset u64, bytes u64, checksum u64 }
//     index checksum   u64
//   blocks             contiguous, in slot order
//
// Slots 0..L-1 hold layer matrices (slot 0 = embedding-layer output).
// Slot -1 holds the optional embedding table with its piece map and word
// encodings. Layer blocks are raw row-major f32. Every block carries its own
// CRC-64 so a single layer can be read and verified in isolation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sleuth::store {

inline constexpr std::array<char, 8> kMagic = {'S', 'L', 'E', 'U', 'T', 'H', 'A', 'S'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::int32_t kEmbeddingSlot = -1;

using Digest = std::array<std::uint8_t, 32>;

enum class DType : std::uint32_t { f32 = 0 };

struct StoreHeader {
  std::string model_id;
  std::uint32_t layer_count = 0;
  std::uint64_t example_count = 0;
  std::uint32_t hidden_dim = 0;
  DType dtype = DType::f32;
  Digest digest{};
};

struct LayerMatrix {
  std::int32_t layer = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<float> values;  // row-major

  float at(std::uint64_t r, std::uint64_t c) const { return values[r * cols + c]; }
  std::span<const float> row(std::uint64_t r) const { return {values.data() + r * cols, cols}; }
};

struct WordEncoding {
  std::string word;
  std::vector<std::uint32_t> subtoken_ids;
  std::vector<std::uint32_t> wholeword_ids;
  // Set when the word is not a single vocabulary piece and the whole-word
  // ids fall back to its minimal tokenization.
  bool wholeword_fallback = false;
};

struct EmbeddingTable {
  std::uint64_t vocab_size = 0;
  std::uint64_t dim = 0;
  std::vector<float> values;  // vocab_size x dim, row-major
  std::vector<std::pair<std::uint32_t, std::string>> pieces;  // token id -> string piece
  std::vector<WordEncoding> encodings;

  std::span<const float> row(std::uint64_t id) const { return {values.data() + id * dim, dim}; }
};

// One entry of the offset index.
struct SlotInfo {
  std::int32_t slot = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
  std::uint64_t checksum = 0;
};

// Writes atomically (temp file + rename). All shapes are checked before any
// byte is written; throws DimensionError on mismatch, InvalidArgument on
// NaN/Inf or an invalid header.
void write_store(const std::filesystem::path& path, const StoreHeader& header,
                 std::span<const LayerMatrix> layers,
                 const std::optional<EmbeddingTable>& embeddings = std::nullopt);

// Header and index only; no block is decoded. Verifies magic, version and
// header/index checksums.
struct StoreLayout {
  StoreHeader header;
  std::vector<SlotInfo> slots;
  std::uint64_t file_size = 0;

  const SlotInfo* find(std::int32_t slot) const;
};
StoreLayout read_layout(const std::filesystem::path& path);

// Reads one layer through the offset index. RangeError for an invalid
// index, IntegrityError for truncation or checksum mismatch.
LayerMatrix read_layer(const std::filesystem::path& path, std::int32_t layer);

// Reads a subset of rows of one layer (block is still verified in full).
LayerMatrix read_layer_rows(const std::filesystem::path& path, std::int32_t layer,
                            std::span<const std::size_t> rows);

bool has_embeddings(const std::filesystem::path& path);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

// Verifies magic, version, every block checksum and that the alignment
// digest equals SHA-256(manifest). AlignmentError on digest mismatch.
StoreHeader validate_store(const std::filesystem::path& path, std::span<const std::uint8_t> manifest_bytes);
StoreHeader validate_store(const std::filesystem::path& path, const std::filesystem::path& manifest_path);

// Same checks without the manifest comparison.
StoreHeader verify_store(const std::filesystem::path& path);

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256_file(const std::filesystem::path& path);
std::string to_hex(const Digest& digest);

// CRC-64/XZ (ECMA-182 polynomial, reflected).
std::uint64_t crc64(std::span<const std::uint8_t> bytes, std::uint64_t state = 0);

}  // namespace sleuth::store
