#pragma once

// 16-bit output codewords: one network output per bit of the character code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "pocr/error.hpp"

namespace pocr {

inline constexpr std::size_t kCodeBits = 16;
inline constexpr std::uint32_t kMaxCodepoint = 0xFFFF;

struct CodeWord {
  std::uint32_t codepoint = 0;
  std::array<double, kCodeBits> bits{};  // bits[i] = (codepoint >> i) & 1
};

inline CodeWord encode_codeword(std::int64_t codepoint) {
  if (codepoint < 0 || codepoint > kMaxCodepoint) {
    throw InvalidArgument("codepoint " + std::to_string(codepoint) + " outside [0, 65535]");
  }
  CodeWord w;
  w.codepoint = static_cast<std::uint32_t>(codepoint);
  for (std::size_t i = 0; i < kCodeBits; ++i) w.bits[i] = (w.codepoint >> i) & 1u ? 1.0 : 0.0;
  return w;
}

// Ordered set of distinct codepoints the recognizer distinguishes.
class Charset {
 public:
  explicit Charset(std::vector<std::uint32_t> codepoints) : codepoints_(std::move(codepoints)) {
    if (codepoints_.empty()) throw InvalidArgument("charset is empty");
    std::unordered_set<std::uint32_t> seen;
    for (auto c : codepoints_) {
      if (c > kMaxCodepoint) throw InvalidArgument("charset codepoint outside [0, 65535]");
      if (!seen.insert(c).second) throw InvalidArgument("charset has duplicate codepoint " + std::to_string(c));
    }
  }

  // Each character of an ASCII string becomes one member.
  static Charset from_ascii(std::string_view chars) {
    std::vector<std::uint32_t> cps;
    for (unsigned char ch : chars) cps.push_back(ch);
    return Charset(std::move(cps));
  }

  std::size_t size() const noexcept { return codepoints_.size(); }
  std::span<const std::uint32_t> codepoints() const noexcept { return codepoints_; }
  std::uint32_t operator[](std::size_t i) const { return codepoints_[i]; }

  bool contains(std::uint32_t c) const {
    return std::find(codepoints_.begin(), codepoints_.end(), c) != codepoints_.end();
  }

 private:
  std::vector<std::uint32_t> codepoints_;
};

// Digits, Latin letters in both cases, and 28 punctuation marks: 90 members.
inline Charset default_charset() {
  return Charset::from_ascii(
      "0123456789"
      "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
      "abcdefghijklmnopqrstuvwxyz"
      "!\"#$%&'()*+,-./:;<=>?@[]_{|}");
}

struct Match {
  std::uint32_t codepoint = 0;
  double score = 0.0;     // 1 - distance / 4
  double distance = 0.0;  // Euclidean distance to the winning codeword
};

// Nearest charset codeword; ties resolve to the smaller codepoint.
inline Match decode_codeword(std::span<const double> outputs, const Charset& charset) {
  if (outputs.size() != kCodeBits) {
    throw InvalidArgument("decode_codeword: expected 16 outputs, got " + std::to_string(outputs.size()));
  }
  bool first = true;
  double best_d2 = 0.0;
  std::uint32_t best = 0;
  for (auto cp : charset.codepoints()) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < kCodeBits; ++i) {
      const double e = outputs[i] - ((cp >> i) & 1u ? 1.0 : 0.0);
      d2 += e * e;
    }
    if (first || d2 < best_d2 || (d2 == best_d2 && cp < best)) {
      first = false;
      best_d2 = d2;
      best = cp;
    }
  }
  const double d = std::sqrt(best_d2);
  constexpr double kMaxDistance = 4.0;  // sqrt(16)
  return {best, std::clamp(1.0 - d / kMaxDistance, 0.0, 1.0), d};
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    // Lone surrogates are written as-is; the charset is whatever the model was trained on.
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace pocr
