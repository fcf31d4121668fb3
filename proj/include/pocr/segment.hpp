#pragma once

// Line and character boundary detection by projection profiles, plus glyph
// normalization to the fixed 30x20 matrix and feature extraction.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pocr/error.hpp"
#include "pocr/image.hpp"

namespace pocr {

struct LineBand {
  std::size_t top = 0;
  std::size_t bottom = 0;  // inclusive

  friend bool operator==(const LineBand&, const LineBand&) = default;
};

// All bounds inclusive.
struct CharBox {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  std::size_t height() const noexcept { return bottom - top + 1; }
  std::size_t width() const noexcept { return right - left + 1; }

  friend bool operator==(const CharBox&, const CharBox&) = default;
};

struct SegmentParams {
  std::size_t min_ink_rows = 1;
  std::size_t min_ink_cols = 1;
  std::size_t min_gap_cols = 1;

  void validate() const {
    if (min_ink_rows < 1 || min_ink_cols < 1 || min_gap_cols < 1) {
      throw InvalidArgument("segment thresholds must be >= 1");
    }
  }
};

class GlyphMatrix {
 public:
  static constexpr std::size_t kRows = 30;
  static constexpr std::size_t kCols = 20;
  static constexpr std::size_t kSize = kRows * kCols;

  GlyphMatrix() { bits_.fill(BinRaster::kPaper); }

  std::uint8_t at(std::size_t r, std::size_t c) const { return bits_[r * kCols + c]; }
  bool ink(std::size_t r, std::size_t c) const { return at(r, c) == BinRaster::kInk; }
  void set(std::size_t r, std::size_t c, std::uint8_t v) { bits_[r * kCols + c] = v ? 1 : 0; }
  void set_ink(std::size_t r, std::size_t c) { bits_[r * kCols + c] = BinRaster::kInk; }

  const std::array<std::uint8_t, kSize>& bits() const noexcept { return bits_; }

  std::size_t ink_count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b == BinRaster::kInk;
    return n;
  }

  BinRaster to_raster() const { return BinRaster(kCols, kRows, std::vector<std::uint8_t>(bits_.begin(), bits_.end())); }

  friend bool operator==(const GlyphMatrix&, const GlyphMatrix&) = default;

 private:
  std::array<std::uint8_t, kSize> bits_;
};

enum class FeatureGrid {
  k30x20,  // one input per glyph pixel (600)
  k15x12,  // area-weighted pooling to 180 inputs
};

constexpr std::size_t feature_count(FeatureGrid g) { return g == FeatureGrid::k30x20 ? 600 : 180; }

inline FeatureGrid parse_grid(std::string_view s) {
  if (s == "30x20") return FeatureGrid::k30x20;
  if (s == "15x12") return FeatureGrid::k15x12;
  throw InvalidArgument("unknown grid '" + std::string(s) + "' (expected 30x20 or 15x12)");
}

inline const char* grid_name(FeatureGrid g) { return g == FeatureGrid::k30x20 ? "30x20" : "15x12"; }

inline FeatureGrid grid_for_inputs(std::size_t n) {
  if (n == 600) return FeatureGrid::k30x20;
  if (n == 180) return FeatureGrid::k15x12;
  throw InvalidArgument("network input size " + std::to_string(n) + " matches no feature grid");
}

// ---------------------------------------------------------------------------

inline std::vector<std::size_t> row_ink_profile(const BinRaster& bin) {
  std::vector<std::size_t> profile(bin.height(), 0);
  for (std::size_t r = 0; r < bin.height(); ++r) {
    for (std::size_t c = 0; c < bin.width(); ++c) profile[r] += bin.ink(r, c);
  }
  return profile;
}

// Maximal runs of rows whose ink count reaches min_ink_rows.
inline std::vector<LineBand> detect_lines(const BinRaster& bin, const SegmentParams& params = {}) {
  params.validate();
  const auto profile = row_ink_profile(bin);
  std::vector<LineBand> bands;
  std::size_t r = 0;
  while (r < profile.size()) {
    if (profile[r] < params.min_ink_rows) {
      ++r;
      continue;
    }
    std::size_t start = r;
    while (r < profile.size() && profile[r] >= params.min_ink_rows) ++r;
    bands.push_back({start, r - 1});
  }
  return bands;
}

// Minimal bounding box of the ink inside `box`.
inline CharBox tighten_box(const BinRaster& bin, const CharBox& box) {
  if (box.top > box.bottom || box.left > box.right || box.bottom >= bin.height() || box.right >= bin.width()) {
    throw InvalidArgument("tighten_box: box outside raster");
  }
  CharBox out{box.bottom, box.top, box.right, box.left};
  bool any = false;
  for (std::size_t r = box.top; r <= box.bottom; ++r) {
    for (std::size_t c = box.left; c <= box.right; ++c) {
      if (!bin.ink(r, c)) continue;
      any = true;
      out.top = std::min(out.top, r);
      out.bottom = std::max(out.bottom, r);
      out.left = std::min(out.left, c);
      out.right = std::max(out.right, c);
    }
  }
  if (!any) throw InvalidArgument("empty box");
  return out;
}

// Column runs inside a band; runs separated by fewer than min_gap_cols blank
// columns are merged. Every box is tightened before it is returned.
inline std::vector<CharBox> detect_chars(const BinRaster& bin, const LineBand& band, const SegmentParams& params = {}) {
  params.validate();
  if (band.top > band.bottom || band.bottom >= bin.height()) {
    throw InvalidArgument("detect_chars: band outside raster");
  }
  std::vector<std::size_t> cols(bin.width(), 0);
  for (std::size_t r = band.top; r <= band.bottom; ++r) {
    for (std::size_t c = 0; c < bin.width(); ++c) cols[c] += bin.ink(r, c);
  }

  std::vector<CharBox> boxes;
  std::size_t c = 0;
  while (c < cols.size()) {
    if (cols[c] < params.min_ink_cols) {
      ++c;
      continue;
    }
    std::size_t start = c;
    while (c < cols.size() && cols[c] >= params.min_ink_cols) ++c;
    const std::size_t end = c - 1;
    if (!boxes.empty() && start - boxes.back().right - 1 < params.min_gap_cols) {
      boxes.back().right = end;
    } else {
      boxes.push_back({band.top, band.bottom, start, end});
    }
  }
  for (auto& b : boxes) b = tighten_box(bin, b);
  return boxes;
}

// Nearest-neighbor resampling with half-pixel centering.
inline GlyphMatrix normalize_glyph(const BinRaster& bin, const CharBox& box) {
  if (box.top > box.bottom || box.left > box.right || box.bottom >= bin.height() || box.right >= bin.width()) {
    throw InvalidArgument("normalize_glyph: box outside raster");
  }
  const std::size_t h = box.height();
  const std::size_t w = box.width();
  GlyphMatrix g;
  for (std::size_t r = 0; r < GlyphMatrix::kRows; ++r) {
    // floor((r + 0.5) * h / 30) == floor((2r + 1) * h / 60), exact in integers.
    const std::size_t sr = (2 * r + 1) * h / (2 * GlyphMatrix::kRows);
    for (std::size_t c = 0; c < GlyphMatrix::kCols; ++c) {
      const std::size_t sc = (2 * c + 1) * w / (2 * GlyphMatrix::kCols);
      g.set(r, c, bin.at(box.top + sr, box.left + sc));
    }
  }
  return g;
}

// Ink -> 1.0, background -> 0.0. The 15x12 grid pools 2 rows by 5/3 columns
// per cell; column overlaps are computed in thirds of a pixel so pooling is
// exact up to the final division.
inline std::vector<double> glyph_to_features(const GlyphMatrix& glyph, FeatureGrid grid = FeatureGrid::k30x20) {
  if (grid == FeatureGrid::k30x20) {
    std::vector<double> f(GlyphMatrix::kSize);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = glyph.bits()[i] == BinRaster::kInk ? 1.0 : 0.0;
    return f;
  }

  constexpr std::size_t kOutRows = 15;
  constexpr std::size_t kOutCols = 12;
  constexpr std::size_t kRowsPerCell = GlyphMatrix::kRows / kOutRows;  // 2
  // In thirds: pixel c spans [3c, 3c+3); cell j spans [5j, 5j+5).
  constexpr std::size_t kCellThirds = 5;
  constexpr double kCellAreaThirds = static_cast<double>(kRowsPerCell * kCellThirds);

  std::vector<double> f(kOutRows * kOutCols, 0.0);
  for (std::size_t i = 0; i < kOutRows; ++i) {
    for (std::size_t j = 0; j < kOutCols; ++j) {
      const std::size_t lo = kCellThirds * j;
      const std::size_t hi = lo + kCellThirds;
      std::size_t ink_thirds = 0;
      for (std::size_t r = i * kRowsPerCell; r < (i + 1) * kRowsPerCell; ++r) {
        for (std::size_t c = lo / 3; c * 3 < hi; ++c) {
          if (!glyph.ink(r, c)) continue;
          const std::size_t a = std::max(lo, 3 * c);
          const std::size_t b = std::min(hi, 3 * c + 3);
          ink_thirds += b - a;
        }
      }
      f[i * kOutCols + j] = static_cast<double>(ink_thirds) / kCellAreaThirds;
    }
  }
  return f;
}

}  // namespace pocr
