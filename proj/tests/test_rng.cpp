#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "kgcmlp/rng.hpp"
#include "kgcmlp/vectors.hpp"

using namespace kgcmlp;

namespace {

std::map<std::string, std::string> load_reference() {
  std::ifstream in(std::string(KGCMLP_TEST_DATA) + "/golden_vectors.txt");
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto last = line.rfind(' ');
    out[line.substr(0, last)] = line.substr(last + 1);
  }
  return out;
}

Seed128 ascending() {
  Seed128 s{};
  for (int i = 0; i < 16; ++i) s[i] = static_cast<std::uint8_t>(i);
  return s;
}

}  // namespace

TEST(SeedFromBytes, ZeroSeedUsesFallback) {
  const RngState st = seed_from_bytes(Seed128{});
  EXPECT_EQ(st, kZeroSeedFallback);
  EXPECT_FALSE(st.s0 == 0 && st.s1 == 0);
}

TEST(SeedFromBytes, BigEndianLayout) {
  const RngState st = seed_from_bytes(ascending());
  EXPECT_EQ(st.s0, 0x0001020304050607ULL);
  EXPECT_EQ(st.s1, 0x08090A0B0C0D0E0FULL);
  EXPECT_EQ(seed_from_bytes(ascending()), st);
  EXPECT_EQ(state_to_bytes(st), ascending());
}

TEST(NextWord, MatchesReferenceVectors) {
  const auto ref = load_reference();
  ASSERT_FALSE(ref.empty()) << "missing golden_vectors.txt";
  RngState st = seed_from_bytes(ascending());
  for (int i = 0; i < 8; ++i) {
    auto [w, next] = next_word(st);
    st = next;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(w));
    EXPECT_EQ(buf, ref.at("word " + std::to_string(i))) << "word " << i;
  }
}

TEST(NextWord, IsPure) {
  const RngState st{0x1234, 0x5678};
  const auto a = next_word(st);
  const auto b = next_word(st);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(next_word(a.second).first, a.first);
}

TEST(NextWord, NoImmediateRepeatsOverMillionSteps) {
  RngState st = seed_from_bytes(ascending());
  std::uint64_t prev = take_word(st);
  for (int i = 0; i < 1'000'000; ++i) {
    const std::uint64_t w = take_word(st);
    ASSERT_NE(w, prev) << "step " << i;
    prev = w;
  }
}

TEST(GoldenVectors, WriterMatchesReferenceFile) {
  std::ifstream in(std::string(KGCMLP_TEST_DATA) + "/golden_vectors.txt");
  std::stringstream want;
  want << in.rdbuf();
  std::ostringstream got;
  write_golden_vectors(got);
  EXPECT_EQ(got.str(), want.str());
}

TEST(DrawInputs, SingleEntryFollowsLowestBit) {
  // Search a state whose first word has LSB 1, then 0.
  for (int want : {1, 0}) {
    RngState st{1, 2};
    for (;;) {
      if (static_cast<int>(next_word(st).first & 1U) == want) break;
      st = next_word(st).second;
    }
    const auto [x, after] = draw_inputs(st, 1, 1);
    EXPECT_EQ(x(0, 0), want ? 1 : -1);
    EXPECT_EQ(after, next_word(st).second);
  }
}

TEST(DrawInputs, ConsumesCeilKnOver64Words) {
  const RngState st{7, 9};
  auto advance = [&](int words) {
    RngState s = st;
    for (int i = 0; i < words; ++i) take_word(s);
    return s;
  };
  EXPECT_EQ(draw_inputs(st, 1, 64).second, advance(1));
  EXPECT_EQ(draw_inputs(st, 1, 65).second, advance(2));
  EXPECT_EQ(draw_inputs(st, 3, 32).second, advance(2));
  EXPECT_EQ(draw_inputs(st, 4, 100).second, advance(7));
}

TEST(DrawInputs, RowMajorLsbFirstMatchesReference) {
  const auto ref = load_reference();
  const auto [x, _] = draw_inputs(seed_from_bytes(ascending()), 3, 32);
  std::string signs;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 32; ++j) signs.push_back(x(i, j) > 0 ? '+' : '-');
  EXPECT_EQ(signs, ref.at("inputs_k3_n32"));
}

TEST(DrawInputs, IdenticalSeedsGiveIdenticalRounds) {
  RngState a = seed_from_bytes(ascending());
  RngState b = seed_from_bytes(ascending());
  for (int round = 0; round < 100; ++round) {
    auto [xa, na] = draw_inputs(a, 3, 32);
    auto [xb, nb] = draw_inputs(b, 3, 32);
    ASSERT_EQ(xa, xb);
    a = na;
    b = nb;
  }
}

TEST(DrawInputs, EntriesAreUnbiased) {
  RngState st{0xC0FFEE, 0xBEEF};
  constexpr int kDraws = 10'000;
  std::vector<int> plus(96, 0);
  for (int d = 0; d < kDraws; ++d) {
    auto [x, next] = draw_inputs(st, 3, 32);
    st = next;
    for (std::size_t p = 0; p < 96; ++p) plus[p] += x.values()[p] > 0;
  }
  for (std::size_t p = 0; p < 96; ++p) {
    const double freq = static_cast<double>(plus[p]) / kDraws;
    EXPECT_NEAR(freq, 0.5, 0.02) << "entry " << p;
  }
}

TEST(UniformBelow, StaysInRangeAndHitsEveryValue) {
  RngState st{3, 5};
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = uniform_below(st, 7);
    ASSERT_LT(v, 7U);
    ++seen[v];
  }
  for (int c : seen) EXPECT_GT(c, 800);
  EXPECT_THROW(uniform_below(st, 0), ParameterError);
}

TEST(DeriveStream, ChildrenDifferAndAreReproducible) {
  const RngState parent{0xA11CE, 0xB0B};
  EXPECT_EQ(derive_stream(parent, 3), derive_stream(parent, 3));
  EXPECT_NE(derive_stream(parent, 3), derive_stream(parent, 4));
  EXPECT_NE(derive_stream(parent, 0), parent);
}
