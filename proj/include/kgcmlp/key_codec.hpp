#pragma once

// Weight serialization and session-key extraction.
//
// Each active-layer weight becomes one byte: bit 7 is the sign (1 = negative),
// bits 0..6 hold |w|. Bytes are laid out row-major (unit, then input) and read
// MSB-first, so a k=3, n=32 network yields 768 bits = six 128-bit groups. A
// session key is the group selected by the receiver's index vector (iv).

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "kgcmlp/error.hpp"
#include "kgcmlp/tpm.hpp"

namespace kgcmlp {

using Block128 = std::array<std::uint8_t, 16>;

struct WeightByte {
  std::uint8_t bits = 0;
  friend bool operator==(const WeightByte&, const WeightByte&) = default;
};

inline WeightByte encode_weight(int w) {
  if (w < -127 || w > 127) throw RangeError("encode_weight: |w| > 127: " + std::to_string(w));
  const auto magnitude = static_cast<std::uint8_t>(w < 0 ? -w : w);
  return WeightByte{static_cast<std::uint8_t>((w < 0 ? 0x80 : 0x00) | magnitude)};
}

// 0x80 ("negative zero") decodes to 0; encode never produces it.
inline int decode_weight(WeightByte b) {
  const int magnitude = b.bits & 0x7F;
  return (b.bits & 0x80) ? -magnitude : magnitude;
}

class KeyMaterial {
 public:
  KeyMaterial() = default;
  explicit KeyMaterial(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::span<const std::uint8_t> bytes() const { return bytes_; }
  std::size_t bit_length() const { return bytes_.size() * 8; }
  std::size_t group_count() const { return bit_length() / 128; }

  // Bit `pos`, MSB-first within each byte.
  bool bit(std::size_t pos) const { return (bytes_.at(pos / 8) >> (7 - pos % 8)) & 1U; }

  friend bool operator==(const KeyMaterial&, const KeyMaterial&) = default;

 private:
  std::vector<std::uint8_t> bytes_;
};

inline KeyMaterial serialize_weights(const TpmNetwork& net) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(net.params().weights_per_layer());
  for (std::int8_t w : net.active()) bytes.push_back(encode_weight(w).bits);
  return KeyMaterial(std::move(bytes));
}

struct SessionKey {
  Block128 key{};
  std::uint8_t iv = 0;
  friend bool operator==(const SessionKey&, const SessionKey&) = default;
};

inline SessionKey extract_key(const KeyMaterial& material, std::size_t iv) {
  if (iv >= material.group_count())
    throw RangeError("extract_key: iv " + std::to_string(iv) + " out of range (groups: " +
                     std::to_string(material.group_count()) + ")");
  if (iv > 255) throw RangeError("extract_key: iv does not fit one byte");
  SessionKey key;
  key.iv = static_cast<std::uint8_t>(iv);
  auto src = material.bytes().subspan(iv * 16, 16);
  std::copy(src.begin(), src.end(), key.key.begin());
  return key;
}

// Hidden-output session key: bit i = 1 iff sigma_i = +1, in unit order.
inline std::vector<std::uint8_t> hidden_output_key(const Evaluation& ev) {
  std::vector<std::uint8_t> bits;
  bits.reserve(ev.sigmas.size());
  for (int s : ev.sigmas) bits.push_back(s > 0 ? 1 : 0);
  return bits;
}

inline std::string bit_string(std::span<const std::uint8_t> bits) {
  std::string out;
  for (auto b : bits) out.push_back(b ? '1' : '0');
  return out;
}

inline std::vector<std::uint8_t> otp_transform(std::span<const std::uint8_t> key,
                                               std::span<const std::uint8_t> block) {
  if (key.size() != block.size()) throw ParameterError("otp_transform: length mismatch");
  std::vector<std::uint8_t> out(block.size());
  for (std::size_t i = 0; i < block.size(); ++i) out[i] = key[i] ^ block[i];
  return out;
}

inline Block128 otp_transform(const Block128& key, const Block128& block) {
  Block128 out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = key[i] ^ block[i];
  return out;
}

// Symmetric 128-bit block transform used for E_k. One-time-pad by default;
// swap in another cipher by supplying both directions.
struct Cipher {
  using Fn = Block128 (*)(const Block128& key, const Block128& block);
  Fn encrypt = &otp_transform;
  Fn decrypt = &otp_transform;
};

// Key under which the sender encrypts ST for the synchronization test.
enum class SyncCheck {
  FirstBlock,  // first 128 serialized bits (first 16 weights only)
  Digest,      // SHA-256 of all serialized weights, truncated to 128 bits
};

inline Block128 first_block(const KeyMaterial& material) {
  if (material.bit_length() < 128) throw ParameterError("key material shorter than 128 bits");
  Block128 out{};
  std::copy_n(material.bytes().begin(), 16, out.begin());
  return out;
}

inline Block128 digest_block(const KeyMaterial& material) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(material.bytes().data(), material.bytes().size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1)
    throw Error("SHA-256 digest failed");
  Block128 out{};
  std::copy_n(md.begin(), 16, out.begin());
  return out;
}

inline Block128 sync_test_key(const TpmNetwork& net, SyncCheck mode) {
  const KeyMaterial material = serialize_weights(net);
  return mode == SyncCheck::Digest ? digest_block(material) : first_block(material);
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

inline std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw ParameterError("from_hex: odd number of digits");
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw ParameterError("from_hex: invalid digit");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

inline Block128 block_from_hex(std::string_view hex) {
  auto bytes = from_hex(hex);
  if (bytes.size() != 16) throw ParameterError("expected 32 hex digits for a 128-bit value");
  Block128 out{};
  std::copy(bytes.begin(), bytes.end(), out.begin());
  return out;
}

}  // namespace kgcmlp
