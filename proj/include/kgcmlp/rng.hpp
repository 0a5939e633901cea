#pragma once

// Deterministic input generator shared by both endpoints.
//
// Both sides of an exchange must derive bit-identical input matrices from a
// transmitted 128-bit seed, so the generator and the order in which bits are
// consumed are frozen here:
//
//   state      (s0, s1), two 64-bit words, never both zero
//   seeding    s0 = bytes[0..8) big-endian, s1 = bytes[8..16) big-endian;
//              an all-zero seed maps to kZeroSeedFallback
//   step       xorshift128+ (shift triple 23/17/26)
//   inputs     ceil(k*n/64) words, bits LSB-first, filling rows in order;
//              bit 1 -> +1, bit 0 -> -1

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kgcmlp/error.hpp"

namespace kgcmlp {

struct RngState {
  std::uint64_t s0 = 0;
  std::uint64_t s1 = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

// Replaces the forbidden (0, 0) state.
inline constexpr RngState kZeroSeedFallback{0x9E3779B97F4A7C15ULL, 0xD1B54A32D192ED03ULL};

using Seed128 = std::array<std::uint8_t, 16>;

inline RngState seed_from_bytes(std::span<const std::uint8_t, 16> seed) {
  RngState st;
  for (int i = 0; i < 8; ++i) st.s0 = (st.s0 << 8) | seed[i];
  for (int i = 8; i < 16; ++i) st.s1 = (st.s1 << 8) | seed[i];
  if (st.s0 == 0 && st.s1 == 0) return kZeroSeedFallback;
  return st;
}

inline Seed128 state_to_bytes(const RngState& st) {
  Seed128 out{};
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(st.s0 >> (56 - 8 * i));
    out[8 + i] = static_cast<std::uint8_t>(st.s1 >> (56 - 8 * i));
  }
  return out;
}

// One xorshift128+ step. Pure: the returned state is the only way to advance.
inline std::pair<std::uint64_t, RngState> next_word(RngState state) {
  std::uint64_t t = state.s0;
  const std::uint64_t s1 = state.s1;
  t ^= t << 23;
  t ^= t >> 17;
  t ^= s1;
  t ^= s1 >> 26;
  return {s1 + t, RngState{s1, t}};
}

// In-place convenience over next_word.
inline std::uint64_t take_word(RngState& state) {
  auto [word, next] = next_word(state);
  state = next;
  return word;
}

// Uniform integer in [0, bound) by rejection, so no modulo bias.
inline std::uint64_t uniform_below(RngState& state, std::uint64_t bound) {
  if (bound == 0) throw ParameterError("uniform_below: bound must be positive");
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
  for (;;) {
    std::uint64_t w = take_word(state);
    if (w <= limit) return w % bound;
  }
}

// Uniform double in [0, 1) from the top 53 bits of one word.
inline double uniform_unit(RngState& state) {
  return static_cast<double>(take_word(state) >> 11) * 0x1.0p-53;
}

inline Seed128 random_seed(RngState& state) {
  RngState draw{take_word(state), take_word(state)};
  return state_to_bytes(draw);
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Independent child stream `index` of `parent`, via splitmix64 mixing. Used to
// give each Monte-Carlo trial (and each role inside a trial) its own stream.
inline RngState derive_stream(const RngState& parent, std::uint64_t index) {
  const std::uint64_t a = detail::splitmix64(parent.s0 ^ detail::splitmix64(index));
  const std::uint64_t b = detail::splitmix64(parent.s1 ^ detail::splitmix64(~index));
  if (a == 0 && b == 0) return kZeroSeedFallback;
  return RngState{a, b};
}

// k x n matrix of +-1 entries, row-major (row = hidden unit).
class InputMatrix {
 public:
  InputMatrix() = default;
  InputMatrix(int k, int n) : k_(k), n_(n), values_(static_cast<std::size_t>(k) * n, -1) {
    if (k < 1 || n < 1) throw ParameterError("InputMatrix: k and n must be >= 1");
  }

  int k() const { return k_; }
  int n() const { return n_; }

  int operator()(int i, int j) const { return values_[index(i, j)]; }
  void set(int i, int j, int v) {
    if (v != 1 && v != -1) throw ParameterError("InputMatrix: entries must be +1 or -1");
    values_[index(i, j)] = static_cast<std::int8_t>(v);
  }

  std::span<const std::int8_t> row(int i) const {
    return std::span<const std::int8_t>(values_).subspan(static_cast<std::size_t>(i) * n_, n_);
  }
  std::span<const std::int8_t> values() const { return values_; }

  friend bool operator==(const InputMatrix&, const InputMatrix&) = default;

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

  int k_ = 0;
  int n_ = 0;
  std::vector<std::int8_t> values_;
};

inline std::pair<InputMatrix, RngState> draw_inputs(RngState state, int k, int n) {
  InputMatrix x(k, n);
  const std::size_t total = static_cast<std::size_t>(k) * n;
  std::uint64_t word = 0;
  for (std::size_t pos = 0; pos < total; ++pos) {
    if (pos % 64 == 0) word = take_word(state);
    const int bit = static_cast<int>((word >> (pos % 64)) & 1U);
    x.set(static_cast<int>(pos / n), static_cast<int>(pos % n), bit ? 1 : -1);
  }
  return {std::move(x), state};
}

}  // namespace kgcmlp
