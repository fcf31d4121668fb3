#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pocr/segment.hpp"

namespace pocr {
namespace {

BinRaster from_rows(const std::vector<std::string>& rows) {
  BinRaster b(rows.front().size(), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) b.set(r, c, rows[r][c] == '#' ? 0 : 1);
  }
  return b;
}

TEST(RowProfile, Counts) {
  EXPECT_EQ(row_ink_profile(BinRaster(4, 4)), (std::vector<std::size_t>{0, 0, 0, 0}));
  BinRaster b(4, 4);
  for (std::size_t c = 0; c < 4; ++c) b.set(2, c, 0);
  EXPECT_EQ(row_ink_profile(b), (std::vector<std::size_t>{0, 0, 4, 0}));
}

TEST(RowProfile, MatchesRecountSeed3) {
  std::mt19937_64 gen(3);
  const BinRaster b = oracle::random_bin(16, 16, 0.3, gen);
  const auto prof = row_ink_profile(b);
  for (std::size_t r = 0; r < 16; ++r) {
    std::size_t n = 0;
    for (std::size_t c = 0; c < 16; ++c) n += b.at(r, c) == 0;
    EXPECT_EQ(prof[r], n);
  }
}

TEST(DetectLines, TwoBands) {
  const BinRaster b = from_rows({"....", ".#..", "##..", "....", "...#", ".#..", "#...", "...."});
  EXPECT_EQ(detect_lines(b), (std::vector<LineBand>{{1, 2}, {4, 6}}));
  EXPECT_EQ(detect_lines(b), oracle::lines(b, 1));
}

TEST(DetectLines, BlankAndFullPages) {
  EXPECT_TRUE(detect_lines(BinRaster(5, 7)).empty());
  EXPECT_EQ(detect_lines(BinRaster(5, 7, BinRaster::kInk)), (std::vector<LineBand>{{0, 6}}));
}

TEST(DetectLines, ThresholdsMustBePositive) {
  SegmentParams p;
  p.min_ink_rows = 0;
  EXPECT_THROW(detect_lines(BinRaster(2, 2), p), InvalidArgument);
}

TEST(DetectChars, TwoBlobs) {
  const BinRaster b = from_rows({"..........", ".###..###.", ".###..###.", ".........."});
  const auto boxes = detect_chars(b, {0, 3});
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes[0], (CharBox{1, 2, 1, 3}));
  EXPECT_EQ(boxes[1], (CharBox{1, 2, 6, 8}));
}

TEST(DetectChars, FullWidthBlock) {
  const BinRaster b(6, 3, BinRaster::kInk);
  EXPECT_EQ(detect_chars(b, {0, 2}), (std::vector<CharBox>{{0, 2, 0, 5}}));
}

TEST(DetectChars, GapShorterThanMinimumMerges) {
  const BinRaster b = from_rows({"#..#.....#"});
  SegmentParams p;
  p.min_gap_cols = 3;
  // Gap of 2 between columns 0 and 3 merges; gap of 5 before column 9 separates.
  EXPECT_EQ(detect_chars(b, {0, 0}, p), (std::vector<CharBox>{{0, 0, 0, 3}, {0, 0, 9, 9}}));
  EXPECT_EQ(detect_chars(b, {0, 0}, p), oracle::chars(b, {0, 0}, 1, 3));
}

TEST(DetectChars, BoxesAreTightened) {
  const BinRaster b = from_rows({"....", "...#", "....", ".#..", "...."});
  EXPECT_EQ(detect_chars(b, {0, 4}), (std::vector<CharBox>{{3, 3, 1, 1}, {1, 1, 3, 3}}));
}

TEST(TightenBox, SinglePixelAndIdentity) {
  BinRaster b(12, 12);
  b.set(5, 7, 0);
  EXPECT_EQ(tighten_box(b, {1, 10, 1, 10}), (CharBox{5, 5, 7, 7}));
  EXPECT_EQ(tighten_box(b, {5, 5, 7, 7}), (CharBox{5, 5, 7, 7}));
}

TEST(TightenBox, EmptyBoxIsAnError) {
  try {
    tighten_box(BinRaster(4, 4), {0, 3, 0, 3});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "empty box");
  }
}

TEST(TightenBox, RandomBlobSeed11) {
  std::mt19937_64 gen(11);
  const BinRaster b = oracle::random_bin(20, 20, 0.05, gen);
  EXPECT_EQ(tighten_box(b, {2, 17, 3, 18}), oracle::tight(b, 2, 17, 3, 18));
}

TEST(NormalizeGlyph, IdentityAt30x20) {
  std::mt19937_64 gen(1);
  const BinRaster b = oracle::random_bin(20, 30, 0.5, gen);
  const GlyphMatrix g = normalize_glyph(b, {0, 29, 0, 19});
  EXPECT_EQ(g.to_raster(), b);
  EXPECT_EQ(normalize_glyph(g.to_raster(), {0, 29, 0, 19}), g);
}

TEST(NormalizeGlyph, ConstantStaysConstant) {
  const GlyphMatrix g = normalize_glyph(BinRaster(40, 60, BinRaster::kInk), {0, 59, 0, 39});
  EXPECT_EQ(g.ink_count(), GlyphMatrix::kSize);
  const GlyphMatrix w = normalize_glyph(BinRaster(7, 3, BinRaster::kPaper), {0, 2, 0, 6});
  EXPECT_EQ(w.ink_count(), 0u);
}

TEST(NormalizeGlyph, CheckerboardFollowsSamplingFormula) {
  BinRaster b(10, 15);
  for (std::size_t r = 0; r < 15; ++r) {
    for (std::size_t c = 0; c < 10; ++c) b.set(r, c, (r + c) % 2);
  }
  EXPECT_EQ(normalize_glyph(b, {0, 14, 0, 9}), oracle::normalize(b, {0, 14, 0, 9}));
}

TEST(NormalizeGlyph, MatchesFormulaOnRandomBoxes) {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 50; ++i) {
    const BinRaster b = oracle::random_bin(70, 90, 0.4, gen);
    const std::size_t top = gen() % 90, left = gen() % 70;
    const CharBox box{top, top + gen() % (90 - top), left, left + gen() % (70 - left)};
    ASSERT_EQ(normalize_glyph(b, box), oracle::normalize(b, box));
  }
}

TEST(Features, PixelGrid) {
  GlyphMatrix g;
  EXPECT_EQ(glyph_to_features(g), std::vector<double>(600, 0.0));
  g.set_ink(0, 1);
  const auto f = glyph_to_features(g);
  EXPECT_EQ(f[1], 1.0);
  EXPECT_EQ(f[0], 0.0);
}

TEST(Features, PooledAllInk) {
  const GlyphMatrix ink = normalize_glyph(BinRaster(20, 30, BinRaster::kInk), {0, 29, 0, 19});
  const auto f = glyph_to_features(ink, FeatureGrid::k15x12);
  ASSERT_EQ(f.size(), 180u);
  for (double v : f) EXPECT_DOUBLE_EQ(v, 1.0);
}

// Cell area in source pixels: 2 rows x 5/3 columns.
constexpr double kPoolCellArea = 2.0 * 20.0 / 12.0;

TEST(Features, SinglePixelMassIsConserved) {
  for (std::size_t c = 0; c < 20; ++c) {
    GlyphMatrix g;
    g.set_ink(7, c);
    const auto f = glyph_to_features(g, FeatureGrid::k15x12);
    double mass = 0;
    std::size_t nonzero = 0;
    for (double v : f) {
      mass += v * kPoolCellArea;
      nonzero += v > 0;
    }
    EXPECT_NEAR(mass, 1.0, 1e-9) << "column " << c;
    // A pixel straddles at most two pooling columns, all in pooling row 3.
    EXPECT_GE(nonzero, 1u);
    EXPECT_LE(nonzero, 2u);
    for (std::size_t j = 0; j < 12; ++j) {
      const double lo = j * 20.0 / 12.0, hi = (j + 1) * 20.0 / 12.0;
      const double overlap = std::max(0.0, std::min<double>(hi, c + 1) - std::max<double>(lo, c));
      EXPECT_NEAR(f[3 * 12 + j], overlap / kPoolCellArea, 1e-12);
    }
  }
}

TEST(Features, PooledMassEqualsInkCountOnRandomGlyphs) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 100; ++i) {
    const GlyphMatrix g = normalize_glyph(oracle::random_bin(20, 30, 0.1 + 0.8 * (i / 100.0), gen), {0, 29, 0, 19});
    double mass = 0;
    for (double v : glyph_to_features(g, FeatureGrid::k15x12)) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      mass += v * kPoolCellArea;
    }
    ASSERT_NEAR(mass, double(g.ink_count()), 1e-9);
  }
}

TEST(Segment, FuzzedBoundsAndOracleEquivalence) {
  std::mt19937_64 gen(77);
  for (int i = 0; i < 200; ++i) {
    const BinRaster b = oracle::random_bin(1 + gen() % 30, 1 + gen() % 30, (gen() % 100) / 400.0, gen);
    SegmentParams p{1 + gen() % 3, 1 + gen() % 2, 1 + gen() % 3};
    const auto bands = detect_lines(b, p);
    ASSERT_EQ(bands, oracle::lines(b, p.min_ink_rows));
    const auto prof = row_ink_profile(b);
    for (std::size_t k = 0; k < bands.size(); ++k) {
      const auto& band = bands[k];
      ASSERT_LE(band.top, band.bottom);
      ASSERT_LT(band.bottom, b.height());
      if (k > 0) {
        ASSERT_GT(band.top, bands[k - 1].bottom + 1);
      }
      for (std::size_t r = band.top; r <= band.bottom; ++r) ASSERT_GE(prof[r], p.min_ink_rows);
      if (band.top > 0) {
        ASSERT_LT(prof[band.top - 1], p.min_ink_rows);
      }
      if (band.bottom + 1 < b.height()) {
        ASSERT_LT(prof[band.bottom + 1], p.min_ink_rows);
      }

      const auto boxes = detect_chars(b, band, p);
      ASSERT_EQ(boxes, oracle::chars(b, band, p.min_ink_cols, p.min_gap_cols));
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        const auto& box = boxes[j];
        ASSERT_LE(box.top, box.bottom);
        ASSERT_LE(box.left, box.right);
        ASSERT_GE(box.top, band.top);
        ASSERT_LE(box.bottom, band.bottom);
        ASSERT_LT(box.right, b.width());
        ASSERT_EQ(tighten_box(b, box), box);
        if (j > 0) {
          ASSERT_GT(box.left, boxes[j - 1].right);
        }
      }
    }
  }
}

}  // namespace
}  // namespace pocr
