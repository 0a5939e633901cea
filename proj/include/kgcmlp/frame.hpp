#pragma once

// Wire format. Every frame is
//
//   byte 0       command code in the high nibble, low nibble zero
//   bytes 1..4   id, big-endian
//   payload      fixed width per command (below)
//   last 4       CRC-32 of all preceding bytes, big-endian
//
//   command      code  payload                              total
//   SYN          0000  seed[16] tau[1] ek_st[16]            42
//   FIN_SYN      0001  iv[1]                                10
//   ACK_SYN      0010  tau[1]                               10
//   NAK_SYN      0011  tau[1]                               10
//   AUTH         0100  ek_code[16]                          25
//   (reserved)   0101-1111
//
// tau is 0x01 for +1 and 0x00 for -1. CRC-32 is the reflected 0x04C11DB7
// polynomial with init and final xor 0xFFFFFFFF (zlib/Ethernet CRC).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kgcmlp/error.hpp"
#include "kgcmlp/key_codec.hpp"
#include "kgcmlp/rng.hpp"

namespace kgcmlp {

namespace detail {
inline constexpr std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int b = 0; b < 8; ++b) c = (c & 1U) ? 0xEDB88320U ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}
inline constexpr auto kCrcTable = make_crc_table();
}  // namespace detail

inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
  std::uint32_t c = 0xFFFFFFFFU;
  for (auto b : data) c = detail::kCrcTable[(c ^ b) & 0xFFU] ^ (c >> 8);
  return c ^ 0xFFFFFFFFU;
}

enum class Command : std::uint8_t {
  Syn = 0b0000,
  FinSyn = 0b0001,
  AckSyn = 0b0010,
  NakSyn = 0b0011,
  Auth = 0b0100,
};

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Syn: return "SYN";
    case Command::FinSyn: return "FIN_SYN";
    case Command::AckSyn: return "ACK_SYN";
    case Command::NakSyn: return "NAK_SYN";
    case Command::Auth: return "AUTH";
  }
  return "?";
}

struct SynPayload {
  Seed128 seed{};
  int tau = 1;
  Block128 ek_st{};
  friend bool operator==(const SynPayload&, const SynPayload&) = default;
};

struct FinSynPayload {
  std::uint8_t iv = 0;
  friend bool operator==(const FinSynPayload&, const FinSynPayload&) = default;
};

struct AckSynPayload {
  int tau = 1;
  friend bool operator==(const AckSynPayload&, const AckSynPayload&) = default;
};

struct NakSynPayload {
  int tau = 1;
  friend bool operator==(const NakSynPayload&, const NakSynPayload&) = default;
};

struct AuthPayload {
  Block128 ek_code{};
  friend bool operator==(const AuthPayload&, const AuthPayload&) = default;
};

// Alternative order follows the command codes, so index() == code.
using FramePayload = std::variant<SynPayload, FinSynPayload, AckSynPayload, NakSynPayload, AuthPayload>;

struct Frame {
  std::uint32_t id = 0;
  FramePayload payload;

  Command command() const { return static_cast<Command>(payload.index()); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::size_t kFrameCrcSize = 4;

inline std::size_t payload_size(Command c) {
  switch (c) {
    case Command::Syn: return 33;
    case Command::FinSyn:
    case Command::AckSyn:
    case Command::NakSyn: return 1;
    case Command::Auth: return 16;
  }
  return 0;
}

inline std::size_t encoded_size(Command c) {
  return kFrameHeaderSize + payload_size(c) + kFrameCrcSize;
}

namespace detail {
inline std::uint8_t tau_byte(int tau) {
  if (tau != 1 && tau != -1) throw ParameterError("tau must be +1 or -1");
  return tau == 1 ? 0x01 : 0x00;
}

inline int tau_from_byte(std::uint8_t b) {
  if (b == 0x01) return 1;
  if (b == 0x00) return -1;
  throw ProtocolError("invalid tau byte");
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in) {
  return std::uint32_t{in[0]} << 24 | std::uint32_t{in[1]} << 16 | std::uint32_t{in[2]} << 8 |
         std::uint32_t{in[3]};
}
}  // namespace detail

inline std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(frame.command()));
  out.push_back(static_cast<std::uint8_t>(static_cast<std::uint8_t>(frame.command()) << 4));
  detail::put_u32(out, frame.id);

  std::visit(
      [&out](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SynPayload>) {
          out.insert(out.end(), p.seed.begin(), p.seed.end());
          out.push_back(detail::tau_byte(p.tau));
          out.insert(out.end(), p.ek_st.begin(), p.ek_st.end());
        } else if constexpr (std::is_same_v<P, FinSynPayload>) {
          out.push_back(p.iv);
        } else if constexpr (std::is_same_v<P, AuthPayload>) {
          out.insert(out.end(), p.ek_code.begin(), p.ek_code.end());
        } else {
          out.push_back(detail::tau_byte(p.tau));
        }
      },
      frame.payload);

  detail::put_u32(out, crc32(out));
  return out;
}

// Checks, in order: minimum length (FramingError), CRC (IntegrityError),
// command and header validity (ProtocolError), exact length (FramingError).
inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize + kFrameCrcSize)
    throw FramingError("frame truncated: " + std::to_string(bytes.size()) + " bytes");

  const std::size_t body = bytes.size() - kFrameCrcSize;
  if (crc32(bytes.first(body)) != detail::get_u32(bytes.subspan(body)))
    throw IntegrityError("frame CRC mismatch");

  const std::uint8_t code = bytes[0] >> 4;
  if (code > static_cast<std::uint8_t>(Command::Auth))
    throw ProtocolError("reserved command code " + std::to_string(code));
  if ((bytes[0] & 0x0F) != 0) throw ProtocolError("nonzero low nibble in command byte");

  const auto command = static_cast<Command>(code);
  if (bytes.size() != encoded_size(command))
    throw FramingError(std::string("wrong length for ") + to_string(command));

  Frame frame;
  frame.id = detail::get_u32(bytes.subspan(1, 4));
  auto p = bytes.subspan(kFrameHeaderSize, payload_size(command));
  switch (command) {
    case Command::Syn: {
      SynPayload syn;
      std::copy_n(p.begin(), 16, syn.seed.begin());
      syn.tau = detail::tau_from_byte(p[16]);
      std::copy_n(p.begin() + 17, 16, syn.ek_st.begin());
      frame.payload = syn;
      break;
    }
    case Command::FinSyn: frame.payload = FinSynPayload{p[0]}; break;
    case Command::AckSyn: frame.payload = AckSynPayload{detail::tau_from_byte(p[0])}; break;
    case Command::NakSyn: frame.payload = NakSynPayload{detail::tau_from_byte(p[0])}; break;
    case Command::Auth: {
      AuthPayload auth;
      std::copy_n(p.begin(), 16, auth.ek_code.begin());
      frame.payload = auth;
      break;
    }
  }
  return frame;
}

// Strict monotone acceptance: covers replay, reordering and replication.
// Alteration is covered by the CRC at decode time.
inline bool integrity_check(const Frame& frame, std::uint32_t last_seen_id) {
  return frame.id > last_seen_id;
}

}  // namespace kgcmlp
