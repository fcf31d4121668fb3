#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "pocr/codec.hpp"

namespace pocr {
namespace {

TEST(Encode, LowBitFirst) {
  const auto a = encode_codeword(0x41);
  const std::array<double, 16> want{1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(a.bits, want);
  EXPECT_EQ(encode_codeword(0).bits, (std::array<double, 16>{}));
  for (double b : encode_codeword(0xFFFF).bits) EXPECT_EQ(b, 1.0);
}

TEST(Encode, OutOfRangeRejected) {
  EXPECT_THROW(encode_codeword(0x10000), InvalidArgument);
  EXPECT_THROW(encode_codeword(-1), InvalidArgument);
}

TEST(Decode, ExactCodewordScoresOne) {
  const Charset cs = Charset::from_ascii("AB");
  const auto b = encode_codeword('B');
  const Match m = decode_codeword(b.bits, cs);
  EXPECT_EQ(m.codepoint, 0x42u);
  EXPECT_EQ(m.score, 1.0);
  EXPECT_EQ(m.distance, 0.0);
}

TEST(Decode, NoisyOutputPicksNearest) {
  const Charset cs = Charset::from_ascii("AB");
  std::vector<double> out(16, 0.0);
  out[0] = 0.9;
  out[6] = 0.8;
  out[1] = 0.1;
  const Match m = decode_codeword(out, cs);
  EXPECT_EQ(m.codepoint, 0x41u);
  const double d = std::sqrt(0.01 + 0.04 + 0.01);
  EXPECT_NEAR(m.distance, d, 1e-15);
  EXPECT_NEAR(m.score, 1.0 - d / 4.0, 1e-15);
}

TEST(Decode, TieGoesToSmallerCodepoint) {
  // 0x41 and 0x42 differ in bits 0 and 1; halfway between them is equidistant.
  const auto w = encode_codeword(0x41);
  std::vector<double> out(w.bits.begin(), w.bits.end());
  out[0] = 0.5;
  out[1] = 0.5;
  EXPECT_EQ(decode_codeword(out, Charset({0x42, 0x41})).codepoint, 0x41u);
}

TEST(Decode, WrongLengthRejected) {
  const std::array<double, 17> buf{};
  EXPECT_THROW(decode_codeword(std::span(buf.data(), 15), default_charset()), InvalidArgument);
  EXPECT_THROW(decode_codeword(std::span(buf.data(), 17), default_charset()), InvalidArgument);
}

TEST(Charset, Validation) {
  EXPECT_THROW(Charset({}), InvalidArgument);
  EXPECT_THROW(Charset({1, 2, 1}), InvalidArgument);
  EXPECT_THROW(Charset({0x10000}), InvalidArgument);
  const Charset cs = default_charset();
  EXPECT_EQ(cs.size(), 90u);
  EXPECT_TRUE(cs.contains('~' - 2));
  EXPECT_FALSE(cs.contains(' '));
}

TEST(Decode, AgreesWithBruteForceOnRandomOutputs) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Charset cs = default_charset();
  const std::vector<std::uint32_t> members(cs.codepoints().begin(), cs.codepoints().end());
  for (int i = 0; i < 500; ++i) {
    std::vector<double> out(16);
    for (double& v : out) v = u(gen);
    ASSERT_EQ(decode_codeword(out, cs).codepoint, oracle::nearest_codepoint(out, members));
  }
}

TEST(Decode, ScoreInUnitIntervalAndMonotoneInDistance) {
  std::mt19937_64 gen(32);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  const Charset cs = Charset::from_ascii("xyz");
  for (int i = 0; i < 200; ++i) {
    std::vector<double> out(16);
    for (double& v : out) v = u(gen);
    const Match m = decode_codeword(out, cs);
    ASSERT_GE(m.score, 0.0);
    ASSERT_LE(m.score, 1.0);
    if (m.distance <= 4.0) {
      ASSERT_NEAR(m.score, 1.0 - m.distance / 4.0, 1e-15);
    }
  }
}

TEST(Utf8, Encodings) {
  std::string s;
  append_utf8(s, 'A');
  append_utf8(s, 0xE9);
  append_utf8(s, 0x20AC);
  EXPECT_EQ(s, "A\xC3\xA9\xE2\x82\xAC");
}

}  // namespace
}  // namespace pocr
