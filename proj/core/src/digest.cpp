#include <openssl/evp.h>

#include <boost/crc.hpp>
#include <fstream>
#include <memory>

#include "sleuth/errors.hpp"
#include "sleuth/tensorstore.hpp"

namespace sleuth::store {

namespace {
using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true>;

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

MdCtx new_sha256() {
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  return ctx;
}

Digest finish(EVP_MD_CTX* ctx) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) throw Error("SHA-256 final failed");
  return out;
}
}  // namespace

// `state` is a previous return value, allowing incremental updates.
std::uint64_t crc64(std::span<const std::uint8_t> bytes, std::uint64_t state) {
  // Boost reflects the initial remainder of a reflected CRC, so the
  // previous checksum (final xor undone) goes in bit-reversed.
  std::uint64_t init = 0;
  for (int i = 0; i < 64; ++i) init |= ((~state >> i) & 1ULL) << (63 - i);
  Crc64Xz crc(init);
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

Digest sha256(std::span<const std::uint8_t> bytes) {
  auto ctx = new_sha256();
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  return finish(ctx.get());
}

Digest sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  auto ctx = new_sha256();
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  return finish(ctx.get());
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

}  // namespace sleuth::store
