#include "sleuth/tensorstore.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sleuth/errors.hpp"

namespace sleuth::store {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

constexpr std::uint64_t kIndexEntryBytes = 4 + 8 * 5;
constexpr std::uint32_t kMaxModelIdBytes = 1 << 16;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(values.data(), values.size() * 4);
    } else {
      for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
    }
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  std::uint64_t u64() { return get(8); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IntegrityError(std::string("truncated ") + what_);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string string(std::size_t limit) {
    const auto n = u32();
    if (n > limit) throw IntegrityError(std::string("implausible string length in ") + what_);
    auto s = take(n);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }
  void floats(std::span<float> out) {
    auto src = take(out.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), src.data(), src.size());
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= std::uint32_t{src[4 * i + b]} << (8 * b);
        out[i] = std::bit_cast<float>(v);
      }
    }
  }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::uint64_t get(int n) {
    auto s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{s[i]} << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

std::vector<std::uint8_t> header_bytes(const StoreHeader& h) {
  ByteWriter w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kFormatVersion);
  w.string(h.model_id);
  w.u32(h.layer_count);
  w.u64(h.example_count);
  w.u32(h.hidden_dim);
  w.u32(static_cast<std::uint32_t>(h.dtype));
  w.raw(h.digest.data(), h.digest.size());
  const auto crc = crc64(w.bytes());
  w.u64(crc);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> embedding_bytes(const EmbeddingTable& t) {
  ByteWriter w;
  w.u64(t.vocab_size);
  w.u64(t.dim);
  w.floats(t.values);
  w.u32(static_cast<std::uint32_t>(t.pieces.size()));
  for (const auto& [id, piece] : t.pieces) {
    w.u32(id);
    w.string(piece);
  }
  w.u32(static_cast<std::uint32_t>(t.encodings.size()));
  for (const auto& e : t.encodings) {
    w.string(e.word);
    w.u32(static_cast<std::uint32_t>(e.subtoken_ids.size()));
    for (auto id : e.subtoken_ids) w.u32(id);
    w.u32(static_cast<std::uint32_t>(e.wholeword_ids.size()));
    for (auto id : e.wholeword_ids) w.u32(id);
    w.u8(e.wholeword_fallback ? 1 : 0);
  }
  return std::move(w.bytes());
}

EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "embedding block");
  EmbeddingTable t;
  t.vocab_size = r.u64();
  t.dim = r.u64();
  if (t.dim != 0 && t.vocab_size > bytes.size() / 4 / t.dim) throw IntegrityError("embedding table shape exceeds block");
  t.values.resize(t.vocab_size * t.dim);
  r.floats(t.values);
  const auto npieces = r.u32();
  for (std::uint32_t i = 0; i < npieces; ++i) {
    const auto id = r.u32();
    t.pieces.emplace_back(id, r.string(bytes.size()));
  }
  const auto nenc = r.u32();
  for (std::uint32_t i = 0; i < nenc; ++i) {
    WordEncoding e;
    e.word = r.string(bytes.size());
    auto ids = [&](std::vector<std::uint32_t>& out) {
      const auto n = r.u32();
      if (n > bytes.size() / 4) throw IntegrityError("implausible id count in embedding block");
      out.resize(n);
      for (auto& id : out) id = r.u32();
    };
    ids(e.subtoken_ids);
    ids(e.wholeword_ids);
    e.wholeword_fallback = r.u8() != 0;
    t.encodings.push_back(std::move(e));
  }
  if (!r.done()) throw IntegrityError("trailing bytes in embedding block");
  return t;
}

void check_finite(std::span<const float> values, const std::string& what) {
  for (float v : values) {
    if (!std::isfinite(v)) throw InvalidArgument(what + " contains NaN or Inf");
  }
}

void validate_embeddings(const EmbeddingTable& t) {
  if (t.vocab_size < 1 || t.dim < 1) throw DimensionError("embedding table needs V >= 1 and d >= 1");
  if (t.values.size() != t.vocab_size * t.dim) throw DimensionError("embedding values do not match V x d");
  check_finite(t.values, "embedding table");
  auto check_id = [&](std::uint32_t id) {
    if (id >= t.vocab_size) throw DimensionError("token id " + std::to_string(id) + " >= vocabulary size");
  };
  for (const auto& [id, piece] : t.pieces) check_id(id);
  for (const auto& e : t.encodings) {
    if (e.subtoken_ids.empty() || e.wholeword_ids.empty()) {
      throw DimensionError("word encoding for '" + e.word + "' has an empty id list");
    }
    for (auto id : e.subtoken_ids) check_id(id);
    for (auto id : e.wholeword_ids) check_id(id);
  }
}

std::filesystem::path temp_path_for(const std::filesystem::path& path) {
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  return tmp;
}

std::vector<std::uint8_t> read_range(std::ifstream& in, std::uint64_t offset, std::uint64_t n) {
  std::vector<std::uint8_t> buf(n);
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) throw IntegrityError("truncated store");
  return buf;
}

std::ifstream open_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open store: " + path.string());
  return in;
}

StoreLayout parse_layout(std::ifstream& in, std::uint64_t file_size) {
  // Fixed part of the header up to and including the model id length.
  constexpr std::uint64_t kPrefix = 8 + 4 + 4;
  if (file_size < 8) throw FormatError("file too small to be a store");
  auto prefix = read_range(in, 0, std::min<std::uint64_t>(kPrefix, file_size));
  if (std::memcmp(prefix.data(), kMagic.data(), kMagic.size()) != 0) throw FormatError("bad magic: not a SLEUTHAS store");
  if (prefix.size() < kPrefix) throw IntegrityError("truncated store header");
  ByteReader pr(prefix, "store header");
  pr.take(8);
  const auto version = pr.u32();
  if (version != kFormatVersion) throw FormatError("unsupported store version " + std::to_string(version));
  const auto id_len = pr.u32();
  if (id_len > kMaxModelIdBytes) throw IntegrityError("implausible model id length");

  const std::uint64_t header_size = kPrefix + id_len + 4 + 8 + 4 + 4 + 32 + 8;
  if (file_size < header_size + 4) throw IntegrityError("truncated store header");
  auto hbytes = read_range(in, 0, header_size + 4);
  ByteReader r(hbytes, "store header");
  r.take(8);
  r.u32();
  StoreLayout layout;
  layout.file_size = file_size;
  auto& h = layout.header;
  h.model_id = r.string(kMaxModelIdBytes);
  h.layer_count = r.u32();
  h.example_count = r.u64();
  h.hidden_dim = r.u32();
  const auto dtype = r.u32();
  auto digest = r.take(32);
  std::copy(digest.begin(), digest.end(), h.digest.begin());
  const auto stored_crc = r.u64();
  if (crc64(std::span(hbytes).first(header_size - 8)) != stored_crc) throw IntegrityError("store header checksum mismatch");
  if (dtype != static_cast<std::uint32_t>(DType::f32)) throw FormatError("unsupported dtype " + std::to_string(dtype));
  h.dtype = DType::f32;

  const auto count = r.u32();
  if (count > std::uint64_t{h.layer_count} + 1) throw IntegrityError("offset index larger than layer count allows");
  const std::uint64_t index_size = count * kIndexEntryBytes + 8;
  if (file_size < header_size + 4 + index_size) throw IntegrityError("truncated offset index");
  auto ibytes = read_range(in, header_size + 4, index_size);
  ByteReader ir(ibytes, "offset index");
  for (std::uint32_t i = 0; i < count; ++i) {
    SlotInfo s;
    s.slot = ir.i32();
    s.rows = ir.u64();
    s.cols = ir.u64();
    s.offset = ir.u64();
    s.bytes = ir.u64();
    s.checksum = ir.u64();
    layout.slots.push_back(s);
  }
  std::uint64_t crc = crc64(std::span(hbytes).last(4));
  crc = crc64(std::span(ibytes).first(index_size - 8), crc);
  if (ir.u64() != crc) throw IntegrityError("offset index checksum mismatch");
  return layout;
}

std::vector<std::uint8_t> read_block(std::ifstream& in, const StoreLayout& layout, const SlotInfo& s) {
  if (s.offset > layout.file_size || s.bytes > layout.file_size - s.offset) {
    throw IntegrityError("store truncated inside block for slot " + std::to_string(s.slot));
  }
  auto bytes = read_range(in, s.offset, s.bytes);
  if (crc64(bytes) != s.checksum) throw IntegrityError("checksum mismatch in block for slot " + std::to_string(s.slot));
  return bytes;
}

LayerMatrix decode_layer(const SlotInfo& s, std::span<const std::uint8_t> bytes) {
  if (s.bytes != s.rows * s.cols * 4) throw IntegrityError("layer block size does not match its shape");
  LayerMatrix m;
  m.layer = s.slot;
  m.rows = s.rows;
  m.cols = s.cols;
  m.values.resize(s.rows * s.cols);
  ByteReader r(bytes, "layer block");
  r.floats(m.values);
  return m;
}

}  // namespace

const SlotInfo* StoreLayout::find(std::int32_t slot) const {
  for (const auto& s : slots) {
    if (s.slot == slot) return &s;
  }
  return nullptr;
}

void write_store(const std::filesystem::path& path, const StoreHeader& header, std::span<const LayerMatrix> layers,
                 const std::optional<EmbeddingTable>& embeddings) {
  if (header.dtype != DType::f32) throw FormatError("only f32 stores are supported");
  if (header.layer_count == 0 && !embeddings) throw DimensionError("store needs L >= 1 or an embedding table");
  if (header.layer_count > 0 && (header.example_count < 1 || header.hidden_dim < 1)) {
    throw DimensionError("store needs m >= 1 and d >= 1");
  }
  if (layers.size() != header.layer_count) {
    throw DimensionError("header declares " + std::to_string(header.layer_count) + " layers, got " +
                         std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.layer != static_cast<std::int32_t>(i)) throw DimensionError("layer " + std::to_string(i) + " has index " + std::to_string(l.layer));
    if (l.rows != header.example_count || l.cols != header.hidden_dim ||
        l.values.size() != header.example_count * header.hidden_dim) {
      throw DimensionError("layer " + std::to_string(i) + " is " + std::to_string(l.rows) + "x" + std::to_string(l.cols) +
                           ", header says " + std::to_string(header.example_count) + "x" +
                           std::to_string(header.hidden_dim));
    }
    check_finite(l.values, "layer " + std::to_string(i));
  }
  std::vector<std::uint8_t> emb_bytes;
  if (embeddings) {
    validate_embeddings(*embeddings);
    emb_bytes = embedding_bytes(*embeddings);
  }

  const auto hbytes = header_bytes(header);
  const std::uint32_t count = header.layer_count + (embeddings ? 1 : 0);
  std::uint64_t offset = hbytes.size() + 4 + count * kIndexEntryBytes + 8;

  std::vector<SlotInfo> slots;
  for (const auto& l : layers) {
    SlotInfo s{l.layer, l.rows, l.cols, offset, l.rows * l.cols * 4, 0};
    if constexpr (std::endian::native == std::endian::little) {
      s.checksum = crc64({reinterpret_cast<const std::uint8_t*>(l.values.data()), s.bytes});
    } else {
      ByteWriter w;
      w.floats(l.values);
      s.checksum = crc64(w.bytes());
    }
    offset += s.bytes;
    slots.push_back(s);
  }
  if (embeddings) {
    slots.push_back({kEmbeddingSlot, embeddings->vocab_size, embeddings->dim, offset, emb_bytes.size(), crc64(emb_bytes)});
  }

  ByteWriter index;
  index.u32(count);
  for (const auto& s : slots) {
    index.i32(s.slot);
    index.u64(s.rows);
    index.u64(s.cols);
    index.u64(s.offset);
    index.u64(s.bytes);
    index.u64(s.checksum);
  }
  index.u64(crc64(index.bytes()));

  const auto tmp = temp_path_for(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(hbytes.data()), static_cast<std::streamsize>(hbytes.size()));
    out.write(reinterpret_cast<const char*>(index.bytes().data()), static_cast<std::streamsize>(index.bytes().size()));
    for (const auto& l : layers) {
      ByteWriter w;
      if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(l.values.data()), static_cast<std::streamsize>(l.values.size() * 4));
      } else {
        w.floats(l.values);
        out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
      }
    }
    out.write(reinterpret_cast<const char*>(emb_bytes.data()), static_cast<std::streamsize>(emb_bytes.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

StoreLayout read_layout(const std::filesystem::path& path) {
  auto in = open_store(path);
  return parse_layout(in, std::filesystem::file_size(path));
}

LayerMatrix read_layer(const std::filesystem::path& path, std::int32_t layer) {
  auto in = open_store(path);
  const auto layout = parse_layout(in, std::filesystem::file_size(path));
  if (layer < 0 || static_cast<std::uint32_t>(layer) >= layout.header.layer_count) {
    throw RangeError("layer index " + std::to_string(layer) + " out of range [0, " +
                     std::to_string(layout.header.layer_count) + ")");
  }
  const auto* slot = layout.find(layer);
  if (!slot) throw IntegrityError("offset index has no entry for layer " + std::to_string(layer));
  return decode_layer(*slot, read_block(in, layout, *slot));
}

LayerMatrix read_layer_rows(const std::filesystem::path& path, std::int32_t layer, std::span<const std::size_t> rows) {
  auto full = read_layer(path, layer);
  LayerMatrix out;
  out.layer = full.layer;
  out.rows = rows.size();
  out.cols = full.cols;
  out.values.reserve(rows.size() * full.cols);
  for (auto r : rows) {
    if (r >= full.rows) throw RangeError("row " + std::to_string(r) + " out of range");
    auto src = full.row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
  }
  return out;
}

bool has_embeddings(const std::filesystem::path& path) { return read_layout(path).find(kEmbeddingSlot) != nullptr; }

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  auto in = open_store(path);
  const auto layout = parse_layout(in, std::filesystem::file_size(path));
  const auto* slot = layout.find(kEmbeddingSlot);
  if (!slot) throw RangeError("store has no embedding table");
  auto table = decode_embeddings(read_block(in, layout, *slot));
  validate_embeddings(table);
  return table;
}

StoreHeader verify_store(const std::filesystem::path& path) {
  auto in = open_store(path);
  const auto layout = parse_layout(in, std::filesystem::file_size(path));
  const auto& h = layout.header;
  for (std::uint32_t l = 0; l < h.layer_count; ++l) {
    const auto* slot = layout.find(static_cast<std::int32_t>(l));
    if (!slot) throw IntegrityError("offset index has no entry for layer " + std::to_string(l));
    if (slot->rows != h.example_count || slot->cols != h.hidden_dim) {
      throw IntegrityError("layer " + std::to_string(l) + " shape disagrees with header");
    }
    auto bytes = read_block(in, layout, *slot);
    auto m = decode_layer(*slot, bytes);
    check_finite(m.values, "layer " + std::to_string(l));
  }
  if (const auto* slot = layout.find(kEmbeddingSlot)) validate_embeddings(decode_embeddings(read_block(in, layout, *slot)));
  return h;
}

StoreHeader validate_store(const std::filesystem::path& path, std::span<const std::uint8_t> manifest_bytes) {
  auto header = verify_store(path);
  if (header.digest != sha256(manifest_bytes)) {
    throw AlignmentError("activations were extracted against a different dataset (store digest " +
                         to_hex(header.digest) + ", manifest digest " + to_hex(sha256(manifest_bytes)) + ")");
  }
  return header;
}

StoreHeader validate_store(const std::filesystem::path& path, const std::filesystem::path& manifest_path) {
  auto header = verify_store(path);
  const auto digest = sha256_file(manifest_path);
  if (header.digest != digest) {
    throw AlignmentError("activations were extracted against a different dataset (store digest " +
                         to_hex(header.digest) + ", manifest digest " + to_hex(digest) + ")");
  }
  return header;
}

}  // namespace sleuth::store
