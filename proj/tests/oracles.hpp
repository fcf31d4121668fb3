#pragma once

// Independent reference computations for the test suites. Nothing here calls
// the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "pocr/pocr.hpp"

namespace pocr::oracle {

// Between-class variance straight from the pixel list, for every threshold.
inline int otsu_brute_force(const std::vector<std::uint8_t>& px) {
  int best = 254;
  double best_var = 0.0;
  for (int t = 0; t <= 254; ++t) {
    std::vector<double> lo, hi;
    for (auto p : px) (p <= t ? lo : hi).push_back(p);
    if (lo.empty() || hi.empty()) continue;
    double m0 = 0, m1 = 0;
    for (double v : lo) m0 += v;
    for (double v : hi) m1 += v;
    m0 /= lo.size();
    m1 /= hi.size();
    const double w0 = double(lo.size()) / px.size();
    const double w1 = double(hi.size()) / px.size();
    const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (var > best_var * (1 + 1e-12)) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

inline std::uint8_t local_mean_bit(const GrayRaster& g, std::size_t r, std::size_t c, int window, int offset) {
  const int half = window / 2;
  double sum = 0;
  for (int dr = -half; dr <= half; ++dr) {
    for (int dc = -half; dc <= half; ++dc) {
      const long rr = std::clamp<long>(long(r) + dr, 0, long(g.height()) - 1);
      const long cc = std::clamp<long>(long(c) + dc, 0, long(g.width()) - 1);
      sum += g.at(rr, cc);
    }
  }
  const double mean = sum / (window * window);
  return g.at(r, c) > mean - offset ? 1 : 0;
}

inline bool row_inked(const BinRaster& b, std::size_t r, std::size_t need) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < b.width(); ++c) n += b.at(r, c) == 0;
  return n >= need;
}

// Group inked rows: a row starts a band if it is inked and its predecessor is not.
inline std::vector<LineBand> lines(const BinRaster& b, std::size_t min_ink_rows) {
  std::vector<LineBand> out;
  for (std::size_t r = 0; r < b.height(); ++r) {
    const bool on = row_inked(b, r, min_ink_rows);
    const bool prev = r > 0 && row_inked(b, r - 1, min_ink_rows);
    if (on && !prev) out.push_back({r, r});
    if (on) out.back().bottom = r;
  }
  return out;
}

inline CharBox tight(const BinRaster& b, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
  std::size_t t = SIZE_MAX, bo = 0, l = SIZE_MAX, ri = 0;
  for (std::size_t r = top; r <= bottom; ++r) {
    for (std::size_t c = left; c <= right; ++c) {
      if (b.at(r, c) != 0) continue;
      t = std::min(t, r);
      bo = std::max(bo, r);
      l = std::min(l, c);
      ri = std::max(ri, c);
    }
  }
  return {t, bo, l, ri};
}

// Column runs within the band, then merge runs whose blank gap is short.
inline std::vector<CharBox> chars(const BinRaster& b, LineBand band, std::size_t min_ink_cols, std::size_t min_gap) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t c = 0; c < b.width(); ++c) {
    std::size_t n = 0;
    for (std::size_t r = band.top; r <= band.bottom; ++r) n += b.at(r, c) == 0;
    if (n < min_ink_cols) continue;
    if (!runs.empty() && runs.back().second + 1 == c) {
      runs.back().second = c;
    } else {
      runs.push_back({c, c});
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (auto run : runs) {
    if (!merged.empty() && run.first - merged.back().second - 1 < min_gap) {
      merged.back().second = run.second;
    } else {
      merged.push_back(run);
    }
  }
  std::vector<CharBox> out;
  for (auto [l, r] : merged) out.push_back(tight(b, band.top, band.bottom, l, r));
  return out;
}

inline GlyphMatrix normalize(const BinRaster& b, const CharBox& box) {
  GlyphMatrix g;
  const double h = double(box.bottom - box.top + 1);
  const double w = double(box.right - box.left + 1);
  for (std::size_t r = 0; r < 30; ++r) {
    for (std::size_t c = 0; c < 20; ++c) {
      const auto sr = std::size_t(std::floor((r + 0.5) * h / 30.0));
      const auto sc = std::size_t(std::floor((c + 0.5) * w / 20.0));
      g.set(r, c, b.at(box.top + sr, box.left + sc));
    }
  }
  return g;
}

// Kahan-compensated mean of f(e).
template <typename F>
double kahan_mean(const std::vector<double>& e, F f) {
  double sum = 0, comp = 0;
  for (double v : e) {
    const double y = f(v) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / e.size();
}

// Naive layer-by-layer evaluation with explicit exp.
inline std::vector<double> forward_by_hand(const Mlp& net, const std::vector<double>& input) {
  std::vector<double> a = input;
  for (const auto& layer : net.layers()) {
    std::vector<double> next(layer.outputs);
    for (std::size_t j = 0; j < layer.outputs; ++j) {
      long double z = layer.bias[j];
      for (std::size_t i = 0; i < layer.inputs; ++i) z += (long double)layer.weights[j * layer.inputs + i] * a[i];
      next[j] = double(1.0L / (1.0L + std::exp(-z)));
    }
    a = std::move(next);
  }
  return a;
}

inline double loss_by_hand(const Mlp& net, const std::vector<Example>& batch) {
  double total = 0;
  for (const auto& ex : batch) {
    const auto o = forward_by_hand(net, ex.input);
    for (std::size_t k = 0; k < o.size(); ++k) total += 0.5 * (ex.target[k] - o[k]) * (ex.target[k] - o[k]);
  }
  return total / batch.size();
}

// Central difference of the hand-written loss for one parameter.
inline double numeric_partial(Mlp net, const std::vector<Example>& batch, std::size_t layer, bool bias,
                              std::size_t index, double h) {
  double& p = bias ? net.layers()[layer].bias[index] : net.layers()[layer].weights[index];
  const double saved = p;
  p = saved + h;
  const double up = loss_by_hand(net, batch);
  p = saved - h;
  const double down = loss_by_hand(net, batch);
  return (up - down) / (2 * h);
}

inline std::uint32_t nearest_codepoint(const std::vector<double>& out, const std::vector<std::uint32_t>& charset) {
  std::uint32_t best = 0;
  double best_d = 1e300;
  for (auto cp : charset) {
    double d = 0;
    for (int i = 0; i < 16; ++i) {
      const double bit = (cp >> i) & 1u;
      d += (out[i] - bit) * (out[i] - bit);
    }
    if (d < best_d || (d == best_d && cp < best)) {
      best_d = d;
      best = cp;
    }
  }
  return best;
}

inline BinRaster random_bin(std::size_t w, std::size_t h, double ink, std::mt19937_64& gen) {
  std::bernoulli_distribution d(ink);
  std::vector<std::uint8_t> bits(w * h);
  for (auto& b : bits) b = d(gen) ? 0 : 1;
  return BinRaster(w, h, std::move(bits));
}

inline Mlp random_net(std::vector<std::size_t> sizes, std::mt19937_64& gen, double scale = 1.0) {
  Mlp net(sizes);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& l : net.layers()) {
    for (double& w : l.weights) w = u(gen);
    for (double& b : l.bias) b = u(gen);
  }
  return net;
}

}  // namespace pocr::oracle
