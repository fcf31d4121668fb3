#pragma once

// Grayscale and binary rasters, PGM I/O, and thresholding.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pocr/error.hpp"

namespace pocr {

// 8-bit gray levels, row-major, 0 = black.
class GrayRaster {
 public:
  GrayRaster() = default;

  GrayRaster(std::size_t width, std::size_t height, std::uint8_t fill = 255)
      : GrayRaster(width, height, std::vector<std::uint8_t>(width * height, fill)) {}

  GrayRaster(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width_ == 0 || height_ == 0) {
      throw InvalidArgument("GrayRaster: zero dimension");
    }
    if (pixels_.size() != width_ * height_) {
      throw InvalidArgument("GrayRaster: pixel count does not match width*height");
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }
  void set(std::size_t row, std::size_t col, std::uint8_t v) { pixels_[row * width_ + col] = v; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  friend bool operator==(const GrayRaster&, const GrayRaster&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Binary raster: 0 = ink, 1 = background.
class BinRaster {
 public:
  static constexpr std::uint8_t kInk = 0;
  static constexpr std::uint8_t kPaper = 1;

  BinRaster() = default;

  BinRaster(std::size_t width, std::size_t height, std::uint8_t fill = kPaper)
      : width_(width), height_(height), bits_(width * height, fill) {
    if (fill > 1) throw InvalidArgument("BinRaster: bit values must be 0 or 1");
  }

  BinRaster(std::size_t width, std::size_t height, std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    if (bits_.size() != width_ * height_) {
      throw InvalidArgument("BinRaster: bit count does not match width*height");
    }
    if (std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b > 1; })) {
      throw InvalidArgument("BinRaster: bit values must be 0 or 1");
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  std::uint8_t at(std::size_t row, std::size_t col) const { return bits_[row * width_ + col]; }
  bool ink(std::size_t row, std::size_t col) const { return at(row, col) == kInk; }
  void set(std::size_t row, std::size_t col, std::uint8_t v) { bits_[row * width_ + col] = v ? kPaper : kInk; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const BinRaster&, const BinRaster&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Ink -> 0, background -> 255.
inline GrayRaster to_gray(const BinRaster& bin) {
  std::vector<std::uint8_t> px(bin.bits().size());
  std::transform(bin.bits().begin(), bin.bits().end(), px.begin(),
                 [](std::uint8_t b) -> std::uint8_t { return b ? 255 : 0; });
  return GrayRaster(bin.width(), bin.height(), std::move(px));
}

// ---------------------------------------------------------------------------
// PGM

namespace detail {

class PgmReader {
 public:
  explicit PgmReader(std::string_view bytes) : in_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ >= in_.size(); }

  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }

  void skip_space_and_comments() {
    while (pos_ < in_.size()) {
      char c = in_[pos_];
      if (is_space(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < in_.size() && in_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  // Unsigned decimal token.
  std::size_t integer(const char* what) {
    skip_space_and_comments();
    if (at_end()) throw ParseError(std::string("truncated: expected ") + what + " at byte " + std::to_string(pos_), pos_);
    std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < in_.size() && in_[pos_] >= '0' && in_[pos_] <= '9') {
      v = v * 10 + static_cast<std::size_t>(in_[pos_] - '0');
      if (v > (std::size_t{1} << 32)) throw ParseError(std::string(what) + " too large at byte " + std::to_string(start), start);
      ++pos_;
    }
    if (pos_ == start || (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '#')) {
      throw ParseError(std::string("malformed ") + what + " at byte " + std::to_string(start), start);
    }
    return v;
  }

  std::string_view rest() const { return in_.substr(std::min(pos_, in_.size())); }
  void advance(std::size_t n) { pos_ += n; }
  char peek() const { return in_[pos_]; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Parses a P2 or P5 graymap. Maxval below 255 is accepted; values are kept as-is.
inline GrayRaster load_pgm(std::string_view bytes) {
  if (bytes.size() < 2) throw ParseError("truncated header at byte 0", 0);
  if (bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw ParseError("unsupported magic at byte 0", 0);
  }
  const bool binary = bytes[1] == '5';
  detail::PgmReader rd(bytes);
  rd.advance(2);
  if (!rd.at_end() && !detail::PgmReader::is_space(rd.peek()) && rd.peek() != '#') {
    throw ParseError("unsupported magic at byte 0", 0);
  }

  rd.skip_space_and_comments();
  const std::size_t w_at = rd.pos();
  const std::size_t width = rd.integer("width");
  const std::size_t height = rd.integer("height");
  if (width == 0 || height == 0) throw ParseError("zero dimension at byte " + std::to_string(w_at), w_at);
  if (width > (1u << 16) || height > (1u << 16)) {
    throw ParseError("dimension too large at byte " + std::to_string(w_at), w_at);
  }
  rd.skip_space_and_comments();
  const std::size_t m_at = rd.pos();
  const std::size_t maxval = rd.integer("maxval");
  if (maxval == 0 || maxval > 255) {
    throw ParseError("maxval must be in [1,255] at byte " + std::to_string(m_at), m_at);
  }

  const std::size_t n = width * height;
  std::vector<std::uint8_t> px(n);
  if (binary) {
    // Exactly one whitespace byte separates the header from the payload.
    if (rd.at_end() || !detail::PgmReader::is_space(rd.peek())) {
      throw ParseError("truncated header at byte " + std::to_string(rd.pos()), rd.pos());
    }
    rd.advance(1);
    std::string_view body = rd.rest();
    if (body.size() < n) {
      throw ParseError("truncated payload at byte " + std::to_string(rd.pos() + body.size()),
                       rd.pos() + body.size());
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto v = static_cast<std::uint8_t>(body[i]);
      if (v > maxval) throw ParseError("pixel exceeds maxval at byte " + std::to_string(rd.pos() + i), rd.pos() + i);
      px[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      rd.skip_space_and_comments();
      if (rd.at_end()) throw ParseError("truncated payload at byte " + std::to_string(rd.pos()), rd.pos());
      const std::size_t at = rd.pos();
      std::size_t v = rd.integer("pixel");
      if (v > maxval) throw ParseError("pixel exceeds maxval at byte " + std::to_string(at), at);
      px[i] = static_cast<std::uint8_t>(v);
    }
  }
  return GrayRaster(width, height, std::move(px));
}

// P2 layout: "P2\n<w> <h>\n255\n", then one text row per raster row.
inline std::string save_pgm(const GrayRaster& raster, bool binary) {
  std::string out = binary ? "P5\n" : "P2\n";
  out += std::to_string(raster.width()) + ' ' + std::to_string(raster.height()) + "\n255\n";
  if (binary) {
    out.append(reinterpret_cast<const char*>(raster.pixels().data()), raster.pixels().size());
    return out;
  }
  for (std::size_t r = 0; r < raster.height(); ++r) {
    for (std::size_t c = 0; c < raster.width(); ++c) {
      if (c) out += ' ';
      out += std::to_string(raster.at(r, c));
    }
    out += '\n';
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path);
}

inline GrayRaster load_pgm_file(const std::string& path) { return load_pgm(read_file(path)); }

// ---------------------------------------------------------------------------
// Thresholding

struct ThresholdMethod {
  enum class Kind { kGlobalOtsu, kLocalMean };

  Kind kind = Kind::kGlobalOtsu;
  int window = 0;
  int offset = 0;

  static ThresholdMethod otsu() { return {}; }

  static ThresholdMethod local_mean(int window, int offset) {
    if (window < 3 || window % 2 == 0) {
      throw InvalidArgument("local-mean window must be odd and >= 3");
    }
    return {Kind::kLocalMean, window, offset};
  }
};

// Maximizes between-class variance over splits {<= t} vs {> t}, t in [0,254].
// Ties go to the smallest t. An image with a single gray level yields 254.
inline int otsu_threshold(const GrayRaster& raster) {
  if (raster.empty()) throw InvalidArgument("otsu_threshold: empty raster");
  std::array<std::uint64_t, 256> hist{};
  for (auto p : raster.pixels()) ++hist[p];

  const double total = static_cast<double>(raster.pixels().size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * static_cast<double>(hist[i]);

  int best_t = 254;
  double best_var = 0.0;
  double n0 = 0.0;
  double s0 = 0.0;
  for (int t = 0; t < 255; ++t) {
    n0 += static_cast<double>(hist[t]);
    s0 += static_cast<double>(t) * static_cast<double>(hist[t]);
    const double n1 = total - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (sum_all - s0) / n1;
    const double var = (n0 / total) * (n1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

namespace detail {

// Box sums over a window centered at each pixel with edge-replicated borders.
inline std::vector<std::int64_t> clamped_box_sums(const GrayRaster& g, int window) {
  const auto w = static_cast<std::ptrdiff_t>(g.width());
  const auto h = static_cast<std::ptrdiff_t>(g.height());
  const std::ptrdiff_t half = window / 2;
  auto clamp = [](std::ptrdiff_t v, std::ptrdiff_t hi) { return std::clamp<std::ptrdiff_t>(v, 0, hi - 1); };

  std::vector<std::int64_t> horiz(g.pixels().size());
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      std::int64_t s = 0;
      for (std::ptrdiff_t d = -half; d <= half; ++d) s += g.at(r, clamp(c + d, w));
      horiz[r * w + c] = s;
    }
  }
  std::vector<std::int64_t> sums(horiz.size());
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      std::int64_t s = 0;
      for (std::ptrdiff_t d = -half; d <= half; ++d) s += horiz[clamp(r + d, h) * w + c];
      sums[r * w + c] = s;
    }
  }
  return sums;
}

}  // namespace detail

inline BinRaster binarize(const GrayRaster& raster, const ThresholdMethod& method = ThresholdMethod::otsu()) {
  if (raster.empty()) throw InvalidArgument("binarize: empty raster");
  std::vector<std::uint8_t> bits(raster.pixels().size());
  if (method.kind == ThresholdMethod::Kind::kGlobalOtsu) {
    const int t = otsu_threshold(raster);
    std::transform(raster.pixels().begin(), raster.pixels().end(), bits.begin(),
                   [t](std::uint8_t p) -> std::uint8_t { return p > t ? 1 : 0; });
  } else {
    if (method.window < 3 || method.window % 2 == 0) {
      throw InvalidArgument("local-mean window must be odd and >= 3");
    }
    // pixel > sum/n - offset, compared in integers.
    const auto sums = detail::clamped_box_sums(raster, method.window);
    const std::int64_t n = static_cast<std::int64_t>(method.window) * method.window;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      bits[i] = raster.pixels()[i] * n > sums[i] - std::int64_t{method.offset} * n ? 1 : 0;
    }
  }
  return BinRaster(raster.width(), raster.height(), std::move(bits));
}

}  // namespace pocr
