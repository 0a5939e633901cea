#pragma once

// Conformance vectors for the generator and the frame codec, one
// "name value" pair per line. tests/data/golden_vectors.txt holds the same
// lines computed by an independent reference.

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

#include "kgcmlp/frame.hpp"
#include "kgcmlp/rng.hpp"

namespace kgcmlp {

inline void write_golden_vectors(std::ostream& os) {
  auto word_hex = [](std::uint64_t w) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(w));
    return std::string(buf);
  };

  Seed128 ascending{};
  for (int i = 0; i < 16; ++i) ascending[i] = static_cast<std::uint8_t>(i);
  os << "seed " << to_hex(ascending) << '\n';
  RngState st = seed_from_bytes(ascending);
  for (int i = 0; i < 8; ++i) os << "word " << i << ' ' << word_hex(take_word(st)) << '\n';

  st = seed_from_bytes(Seed128{});
  for (int i = 0; i < 2; ++i) os << "zero_word " << i << ' ' << word_hex(take_word(st)) << '\n';

  const InputMatrix x = draw_inputs(seed_from_bytes(ascending), 3, 32).first;
  os << "inputs_k3_n32 ";
  for (auto v : x.values()) os << (v > 0 ? '+' : '-');
  os << '\n';

  Block128 a5{};
  a5.fill(0xA5);
  Block128 tail{};
  for (int i = 0; i < 16; ++i) tail[i] = static_cast<std::uint8_t>(0xF0 + i);
  os << "syn_id7_tau+1 " << to_hex(encode_frame(Frame{7, SynPayload{ascending, 1, a5}})) << '\n';
  os << "ack_id01020304_tau-1 " << to_hex(encode_frame(Frame{0x01020304, AckSynPayload{-1}})) << '\n';
  os << "fin_id9_iv5 " << to_hex(encode_frame(Frame{9, FinSynPayload{5}})) << '\n';
  os << "auth_id12 " << to_hex(encode_frame(Frame{12, AuthPayload{tail}})) << '\n';

  const std::string check = "123456789";
  char crc[9];
  std::snprintf(crc, sizeof crc, "%08x",
                crc32(std::span(reinterpret_cast<const std::uint8_t*>(check.data()), check.size())));
  os << "crc_check " << crc << '\n';
}

}  // namespace kgcmlp
