#pragma once

// Datasets, synthetic glyphs, the page pipeline, evaluation and sweeps.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pocr/codec.hpp"
#include "pocr/error.hpp"
#include "pocr/image.hpp"
#include "pocr/mlp.hpp"
#include "pocr/segment.hpp"

namespace pocr {

// ---------------------------------------------------------------------------
// Manifest: "<path>\t<hex codepoint>" per line, '#' starts a comment line.

struct ManifestEntry {
  std::string path;
  std::uint32_t codepoint = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline std::vector<ManifestEntry> load_manifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#') continue;

    auto fail = [&](const std::string& why) -> ParseError {
      return ParseError("manifest line " + std::to_string(line_no) + ": " + why, line_no);
    };
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) throw fail("expected <path><TAB><hex codepoint>");
    std::string_view path = line.substr(0, tab);
    std::string_view hex = line.substr(tab + 1);
    if (hex.empty() || hex.size() > 4) throw fail("codepoint must be 1-4 hex digits");
    std::uint32_t cp = 0;
    for (char ch : hex) {
      int d;
      if (ch >= '0' && ch <= '9') d = ch - '0';
      else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
      else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
      else throw fail("codepoint must be 1-4 hex digits");
      cp = cp * 16 + static_cast<std::uint32_t>(d);
    }
    if (!seen.insert(std::string(path)).second) throw fail("duplicate path '" + std::string(path) + "'");
    out.push_back({std::string(path), cp});
  }
  return out;
}

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    char hex[8];
    std::snprintf(hex, sizeof hex, "%04X", e.codepoint);
    out += e.path + '\t' + hex + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic glyphs
//
// A glyph is a frame around a 4x4 cell grid. Cell (i, j) holds a block iff
// bit 4i+j of the codepoint is set, so glyphs of distinct 16-bit codes always
// differ. The variant id only changes style: it is hashed to a 16-bit word
// that picks a one-pixel block shift and an extra top inset. Thickness sets
// the frame width and grows each block by thickness-1 pixels.

struct GlyphStyle {
  int shift_rows = 0;  // -1, 0, +1
  int shift_cols = 0;  // -1, 0, +1
  int inset = 0;       // 0 or 1, rows trimmed from the top of each block
};

inline GlyphStyle glyph_style(std::uint32_t variant_id) {
  const std::uint64_t h = (2654435761ull * variant_id) % 65536ull;
  return {static_cast<int>(h % 3) - 1, static_cast<int>((h / 3) % 3) - 1, static_cast<int>((h / 9) % 2)};
}

inline GlyphMatrix render_synthetic_glyph(std::uint32_t codepoint, std::uint32_t variant_id, int thickness = 1) {
  if (codepoint > kMaxCodepoint) throw InvalidArgument("codepoint outside [0, 65535]");
  if (thickness < 1 || thickness > 4) throw InvalidArgument("thickness must be in [1, 4]");
  constexpr int kRows = static_cast<int>(GlyphMatrix::kRows);
  constexpr int kCols = static_cast<int>(GlyphMatrix::kCols);
  const int t = thickness;
  const GlyphStyle style = glyph_style(variant_id);

  GlyphMatrix g;
  auto fill = [&](int r0, int r1, int c0, int c1) {  // half-open, clipped to the matrix
    for (int r = std::max(r0, 0); r < std::min(r1, kRows); ++r) {
      for (int c = std::max(c0, 0); c < std::min(c1, kCols); ++c) g.set_ink(r, c);
    }
  };

  // Cell layout is fixed by a one-pixel frame; thicker strokes grow inward
  // (frame) or right and down (blocks) without moving the grid.
  constexpr int kInnerH = kRows - 2;
  constexpr int kInnerW = kCols - 2;
  const int grow = t - 1;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (!((codepoint >> (4 * i + j)) & 1u)) continue;
      // One blank pixel above, below and left of each block.
      const int r0 = 1 + i * kInnerH / 4 + 1 + style.inset + style.shift_rows;
      const int r1 = 1 + (i + 1) * kInnerH / 4 - 1 + grow + style.shift_rows;
      const int c0 = 1 + j * kInnerW / 4 + 1 + style.shift_cols;
      const int c1 = 1 + (j + 1) * kInnerW / 4 + grow + style.shift_cols;
      fill(std::max(r0, 1), std::min(r1, kRows - 1), std::max(c0, 1), std::min(c1, kCols - 1));
    }
  }
  fill(0, t, 0, kCols);
  fill(kRows - t, kRows, 0, kCols);
  fill(0, kRows, 0, t);
  fill(0, kRows, kCols - t, kCols);
  return g;
}

// Tight crop of all ink, resampled to 30x20. This is what the page pipeline
// does to every segmented character, so training data goes through it too.
inline GlyphMatrix glyph_from_raster(const BinRaster& bin) {
  const CharBox box = tighten_box(bin, {0, bin.height() - 1, 0, bin.width() - 1});
  return normalize_glyph(bin, box);
}

// ---------------------------------------------------------------------------
// Datasets

struct TrainingSample {
  std::vector<double> features;
  std::uint32_t codepoint = 0;
  std::string variant;
};

struct VariantSpec {
  std::uint32_t id = 0;
  int thickness = 1;

  std::string tag() const {
    std::string s = "v" + std::to_string(id);
    if (thickness != 1) s += "t" + std::to_string(thickness);
    return s;
  }
};

inline std::vector<TrainingSample> build_dataset(const Charset& charset, const std::vector<VariantSpec>& variants,
                                                 FeatureGrid grid = FeatureGrid::k30x20) {
  if (variants.empty()) throw InvalidArgument("build_dataset: no variants");
  std::vector<TrainingSample> out;
  out.reserve(charset.size() * variants.size());
  for (const auto& v : variants) {
    for (auto cp : charset.codepoints()) {
      const GlyphMatrix g = glyph_from_raster(render_synthetic_glyph(cp, v.id, v.thickness).to_raster());
      out.push_back({glyph_to_features(g, grid), cp, v.tag()});
    }
  }
  return out;
}

inline std::vector<TrainingSample> build_dataset(const Charset& charset, const std::vector<std::uint32_t>& variant_ids,
                                                 FeatureGrid grid = FeatureGrid::k30x20) {
  std::vector<VariantSpec> specs;
  for (auto id : variant_ids) specs.push_back({id, 1});
  return build_dataset(charset, specs, grid);
}

inline std::vector<Example> to_examples(const std::vector<TrainingSample>& samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto cw = encode_codeword(s.codepoint);
    out.push_back({s.features, std::vector<double>(cw.bits.begin(), cw.bits.end())});
  }
  return out;
}

// Reads every image named in a manifest. Relative paths resolve against the
// manifest's directory; the variant tag is the image's parent directory name.
inline std::vector<TrainingSample> load_manifest_samples(const std::string& manifest_path, FeatureGrid grid,
                                                         const ThresholdMethod& method = ThresholdMethod::otsu()) {
  namespace fs = std::filesystem;
  const auto entries = load_manifest(read_file(manifest_path));
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<TrainingSample> out;
  for (const auto& e : entries) {
    fs::path p(e.path);
    if (p.is_relative()) p = base / p;
    const BinRaster bin = binarize(load_pgm_file(p.string()), method);
    std::string variant = fs::path(e.path).parent_path().filename().string();
    if (variant.empty()) variant = "default";
    out.push_back({glyph_to_features(glyph_from_raster(bin), grid), e.codepoint, std::move(variant)});
  }
  return out;
}

inline Charset charset_of(const std::vector<TrainingSample>& samples) {
  std::vector<std::uint32_t> cps;
  std::set<std::uint32_t> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.codepoint).second) cps.push_back(s.codepoint);
  }
  return Charset(std::move(cps));
}

// ---------------------------------------------------------------------------
// Pages

struct PageLayout {
  std::size_t margin = 4;
  std::size_t col_gap = 3;
  std::size_t row_gap = 6;
  std::size_t scale = 1;  // integer upscaling of every glyph pixel
};

// Ink 0 on a 255 background; lines are laid out top to bottom.
inline GrayRaster render_page(const std::vector<std::vector<GlyphMatrix>>& lines, const PageLayout& layout = {}) {
  const std::size_t gh = GlyphMatrix::kRows * layout.scale;
  const std::size_t gw = GlyphMatrix::kCols * layout.scale;
  std::size_t widest = 0;
  for (const auto& l : lines) widest = std::max(widest, l.size());
  const std::size_t width = 2 * layout.margin + (widest == 0 ? 1 : widest * gw + (widest - 1) * layout.col_gap);
  const std::size_t height =
      2 * layout.margin + (lines.empty() ? 1 : lines.size() * gh + (lines.size() - 1) * layout.row_gap);
  GrayRaster page(width, height, 255);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t top = layout.margin + li * (gh + layout.row_gap);
    for (std::size_t ci = 0; ci < lines[li].size(); ++ci) {
      const std::size_t left = layout.margin + ci * (gw + layout.col_gap);
      const GlyphMatrix& g = lines[li][ci];
      for (std::size_t r = 0; r < gh; ++r) {
        for (std::size_t c = 0; c < gw; ++c) {
          if (g.ink(r / layout.scale, c / layout.scale)) page.set(top + r, left + c, 0);
        }
      }
    }
  }
  return page;
}

// Renders text (ASCII, '\n' separates lines) with synthetic glyphs. A space
// leaves an empty slot; segmentation does not turn it back into a character.
inline GrayRaster render_text_page(std::string_view text, std::uint32_t variant_id, int thickness = 1,
                                   const PageLayout& layout = {}) {
  std::vector<std::vector<GlyphMatrix>> lines(1);
  for (unsigned char ch : text) {
    if (ch == '\n') {
      lines.emplace_back();
    } else if (ch == ' ') {
      lines.back().emplace_back();
    } else {
      lines.back().push_back(render_synthetic_glyph(ch, variant_id, thickness));
    }
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return render_page(lines, layout);
}

struct RecognizedChar {
  std::uint32_t codepoint = 0;
  double score = 0.0;
  CharBox box;
};

struct RecognizedLine {
  LineBand band;
  std::vector<RecognizedChar> chars;
};

struct PageText {
  std::vector<RecognizedLine> lines;

  // UTF-8, one output line per detected line band.
  std::string text() const {
    std::string out;
    for (const auto& l : lines) {
      for (const auto& c : l.chars) append_utf8(out, c.codepoint);
      out += '\n';
    }
    return out;
  }
};

inline PageText recognize_page(const BinRaster& bin, const Mlp& net, const Charset& charset,
                               const SegmentParams& params = {}) {
  const FeatureGrid grid = grid_for_inputs(net.input_size());
  if (net.output_size() != kCodeBits) throw InvalidArgument("network must have 16 outputs");
  PageText page;
  for (const auto& band : detect_lines(bin, params)) {
    RecognizedLine line{band, {}};
    for (const auto& box : detect_chars(bin, band, params)) {
      const auto features = glyph_to_features(normalize_glyph(bin, box), grid);
      const auto m = decode_codeword(predict(net, features), charset);
      line.chars.push_back({m.codepoint, m.score, box});
    }
    page.lines.push_back(std::move(line));
  }
  return page;
}

// ---------------------------------------------------------------------------
// Evaluation

// Two decimals, round half up: 1/90 -> "1.11".
inline std::string format_pct(std::size_t errors, std::size_t tested) {
  if (tested == 0) throw InvalidArgument("format_pct: tested must be >= 1");
  const std::uint64_t hundredths = (20000ull * errors + tested) / (2ull * tested);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(hundredths / 100),
                static_cast<unsigned long long>(hundredths % 100));
  return buf;
}

struct EvalRow {
  std::string variant;
  std::size_t epochs = 0;
  std::size_t hidden = 0;
  std::size_t tested = 0;
  std::size_t errors = 0;

  double error_pct() const { return 100.0 * static_cast<double>(errors) / static_cast<double>(tested); }
};

struct EvalReport {
  std::vector<EvalRow> rows;

  const EvalRow* find(std::string_view variant, std::size_t epochs, std::size_t hidden) const {
    for (const auto& r : rows) {
      if (r.variant == variant && r.epochs == epochs && r.hidden == hidden) return &r;
    }
    return nullptr;
  }

  std::string to_csv() const {
    std::string out = "variant,epochs,hidden,tested,errors,error_pct\n";
    for (const auto& r : rows) {
      out += r.variant + ',' + std::to_string(r.epochs) + ',' + std::to_string(r.hidden) + ',' +
             std::to_string(r.tested) + ',' + std::to_string(r.errors) + ',' + format_pct(r.errors, r.tested) + '\n';
    }
    return out;
  }
};

inline constexpr std::string_view kOverallVariant = "all";

// One row per variant in order of first appearance, then an overall row.
inline EvalReport evaluate(const Mlp& net, const std::vector<TrainingSample>& test, const Charset& charset,
                           std::size_t epochs = 0) {
  if (test.empty()) throw InvalidArgument("evaluate: empty test set");
  const std::size_t hidden = net.layer_sizes().size() > 2 ? net.layer_sizes()[1] : 0;
  EvalReport report;
  std::map<std::string, std::size_t, std::less<>> index;
  EvalRow overall{std::string(kOverallVariant), epochs, hidden, 0, 0};
  for (const auto& s : test) {
    auto it = index.find(s.variant);
    if (it == index.end()) {
      it = index.emplace(s.variant, report.rows.size()).first;
      report.rows.push_back({s.variant, epochs, hidden, 0, 0});
    }
    const bool wrong = decode_codeword(predict(net, s.features), charset).codepoint != s.codepoint;
    auto& row = report.rows[it->second];
    ++row.tested;
    ++overall.tested;
    row.errors += wrong;
    overall.errors += wrong;
  }
  report.rows.push_back(overall);
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  std::vector<std::uint32_t> train_variants{0, 1, 2};
  // Held-out variant 3 plus thicker copies of the training variants.
  std::vector<VariantSpec> test_variants{{3, 1}, {0, 2}, {1, 2}, {2, 2}};
  std::vector<std::size_t> epochs_list{300, 600, 900};
  std::vector<std::size_t> hidden_list{256};
  FeatureGrid grid = FeatureGrid::k30x20;
  TrainConfig base;       // max_epochs is taken from epochs_list
  std::size_t jobs = 1;
};

// SplitMix64 finalizer; derives per-cell seeds from the base seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Trains one network per hidden width for max(epochs_list) epochs and
// evaluates the snapshot taken after each listed epoch count. Because
// training is deterministic, a snapshot equals a run stopped at that count.
// Rows are per test variant only, ordered by (variant, hidden, epochs).
inline EvalReport sweep(const Charset& charset, const SweepSpec& spec) {
  if (spec.epochs_list.empty() || spec.hidden_list.empty()) throw InvalidArgument("sweep: empty settings list");
  if (spec.train_variants.empty() || spec.test_variants.empty()) throw InvalidArgument("sweep: empty variant list");
  for (auto e : spec.epochs_list) {
    if (e == 0) throw InvalidArgument("sweep: epoch counts must be >= 1");
  }
  for (auto h : spec.hidden_list) {
    if (h == 0) throw InvalidArgument("sweep: hidden widths must be >= 1");
  }
  spec.base.validate();

  const auto train_set = to_examples(build_dataset(charset, spec.train_variants, spec.grid));
  const auto test_set = build_dataset(charset, spec.test_variants, spec.grid);
  const std::size_t max_epochs = *std::max_element(spec.epochs_list.begin(), spec.epochs_list.end());

  auto run_cell = [&](std::size_t hidden) {
    TrainConfig cfg = spec.base;
    cfg.max_epochs = max_epochs;
    std::map<std::size_t, Mlp> snaps;
    Mlp init = new_network({feature_count(spec.grid), hidden, kCodeBits}, mix_seed(spec.base.seed, hidden));
    auto result = train(std::move(init), train_set, cfg, [&](std::size_t epoch, const Metrics&, const Mlp& net) {
      if (std::find(spec.epochs_list.begin(), spec.epochs_list.end(), epoch) != spec.epochs_list.end()) {
        snaps.emplace(epoch, net);
      }
    });
    std::vector<EvalRow> rows;
    for (auto e : spec.epochs_list) {
      auto it = snaps.find(e);
      const Mlp& net = it != snaps.end() ? it->second : result.net;  // early stop: final model
      auto rep = evaluate(net, test_set, charset, e);
      for (auto& r : rep.rows) {
        if (r.variant != kOverallVariant) rows.push_back(std::move(r));
      }
    }
    return rows;
  };

  std::vector<std::vector<EvalRow>> cells(spec.hidden_list.size());
  if (spec.jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = run_cell(spec.hidden_list[i]);
  } else {
    for (std::size_t start = 0; start < cells.size(); start += spec.jobs) {
      std::vector<std::future<std::vector<EvalRow>>> pending;
      for (std::size_t i = start; i < std::min(cells.size(), start + spec.jobs); ++i) {
        pending.push_back(std::async(std::launch::async, run_cell, spec.hidden_list[i]));
      }
      for (std::size_t k = 0; k < pending.size(); ++k) cells[start + k] = pending[k].get();
    }
  }

  EvalReport report;
  for (const auto& v : spec.test_variants) {
    for (std::size_t hi = 0; hi < spec.hidden_list.size(); ++hi) {
      for (const auto& r : cells[hi]) {
        if (r.variant == v.tag()) report.rows.push_back(r);
      }
    }
  }
  return report;
}

}  // namespace pocr
