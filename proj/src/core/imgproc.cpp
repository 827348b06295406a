/* Copyright 2026 The imbaclass Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "imbaclass/imgproc.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <tuple>

#include "imbaclass/error.hpp"

namespace imbaclass {

void SegmentationConfig::validate() const {
  IMBACLASS_REQUIRE(expected_cell_diameter >= 1, "expected_cell_diameter must be >= 1");
  IMBACLASS_REQUIRE(std::isfinite(source_cell_diameter) && source_cell_diameter >= 0.0,
                    "source_cell_diameter must be >= 0");
  IMBACLASS_REQUIRE(source_cell_diameter == 0.0 || source_cell_diameter <= expected_cell_diameter,
                    "source_cell_diameter larger than expected_cell_diameter would downscale");
  IMBACLASS_REQUIRE(clahe_tile >= 1, "clahe_tile must be >= 1");
  IMBACLASS_REQUIRE(clahe_clip_limit > 0.0, "clahe_clip_limit must be > 0");
  IMBACLASS_REQUIRE(hough_min_radius > 0.0, "hough_min_radius must be > 0");
  IMBACLASS_REQUIRE(hough_min_radius < hough_max_radius,
                    "empty Hough radius range (min_radius must be < max_radius)");
  IMBACLASS_REQUIRE(hough_min_center_distance >= 0.0, "hough_min_center_distance must be >= 0");
  IMBACLASS_REQUIRE(hough_accumulator_threshold >= 0.0, "hough_accumulator_threshold must be >= 0");
  IMBACLASS_REQUIRE(hough_edge_threshold > 0.0, "hough_edge_threshold must be > 0");
}

// --- upscale -----------------------------------------------------------------

namespace {

// Keys cubic convolution kernel, a = -0.5.
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
  int count = 0;
};

std::vector<Taps> make_taps(int src, int dst, Interpolation interp) {
  std::vector<Taps> taps(static_cast<std::size_t>(dst));
  const double step = dst > 1 ? static_cast<double>(src - 1) / (dst - 1) : 0.0;
  for (int i = 0; i < dst; ++i) {
    const double pos = i * step;
    const int base = static_cast<int>(std::floor(pos));
    const double t = pos - base;
    Taps& tp = taps[static_cast<std::size_t>(i)];
    if (interp == Interpolation::kBilinear) {
      tp.count = 2;
      tp.index = {std::clamp(base, 0, src - 1), std::clamp(base + 1, 0, src - 1), 0, 0};
      tp.weight = {1.0 - t, t, 0.0, 0.0};
    } else {
      tp.count = 4;
      for (int k = 0; k < 4; ++k) {
        tp.index[k] = std::clamp(base - 1 + k, 0, src - 1);
        tp.weight[k] = cubic_weight(t - (k - 1));
      }
    }
  }
  return taps;
}

}  // namespace

Image upscale(const Image& img, double ratio, Interpolation interp) {
  IMBACLASS_REQUIRE(!img.empty(), "upscale of an empty image");
  IMBACLASS_REQUIRE(std::isfinite(ratio) && ratio >= 1.0, "upscale ratio must be finite and >= 1");
  const int w = static_cast<int>(std::lround(img.width() * ratio));
  const int h = static_cast<int>(std::lround(img.height() * ratio));
  const int ch = img.channels();
  const auto xt = make_taps(img.width(), w, interp);
  const auto yt = make_taps(img.height(), h, interp);

  // Separable: horizontal pass into a (src height x dst width) buffer.
  std::vector<double> rows(static_cast<std::size_t>(img.height()) * w * ch);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const Taps& t = xt[static_cast<std::size_t>(x)];
        double acc = 0.0;
        for (int k = 0; k < t.count; ++k) acc += t.weight[k] * img.at(t.index[k], y, c);
        rows[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }

  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    const Taps& t = yt[static_cast<std::size_t>(y)];
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < t.count; ++k)
          acc += t.weight[k] * rows[(static_cast<std::size_t>(t.index[k]) * w + x) * ch + c];
        out.at(x, y, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  }
  return out;
}

// --- grayscale ---------------------------------------------------------------

Image normalize_grayscale(const Image& img) {
  IMBACLASS_REQUIRE(!img.empty(), "normalize_grayscale of an empty image");
  Image gray(img.width(), img.height(), 1);
  auto src = img.pixels();
  auto dst = gray.pixels();
  if (img.channels() == 3) {
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] + 0.114f * src[3 * i + 2];
  } else {
    std::copy(src.begin(), src.end(), dst.begin());
  }
  const auto [lo, hi] = std::minmax_element(dst.begin(), dst.end());
  const float mn = *lo;
  const float range = *hi - mn;
  if (range <= 0.0f) return gray;
  for (float& v : dst) v = (v - mn) / range;
  return gray;
}

// --- CLAHE -------------------------------------------------------------------

namespace {

constexpr int kBins = 256;

int bin_of(float v) { return quantize(v); }

// Tile centers and, for each coordinate, the bracketing tile pair + weight.
struct Blend {
  int lo = 0;
  int hi = 0;
  double w_hi = 0.0;
};

std::vector<Blend> blend_axis(int extent, int tile) {
  const int tiles = (extent + tile - 1) / tile;
  std::vector<double> centers(static_cast<std::size_t>(tiles));
  for (int t = 0; t < tiles; ++t) {
    const int start = t * tile;
    const int len = std::min(tile, extent - start);
    centers[static_cast<std::size_t>(t)] = start + (len - 1) / 2.0;
  }
  std::vector<Blend> out(static_cast<std::size_t>(extent));
  for (int p = 0; p < extent; ++p) {
    Blend& b = out[static_cast<std::size_t>(p)];
    if (p <= centers.front()) {
      b = {0, 0, 0.0};
    } else if (p >= centers.back()) {
      b = {tiles - 1, tiles - 1, 0.0};
    } else {
      int t = p / tile;
      if (p < centers[static_cast<std::size_t>(t)]) --t;
      const double c0 = centers[static_cast<std::size_t>(t)];
      const double c1 = centers[static_cast<std::size_t>(t + 1)];
      b = {t, t + 1, (p - c0) / (c1 - c0)};
    }
  }
  return out;
}

}  // namespace

Image adaptive_hist_eq(const Image& img, int tile, double clip_limit) {
  IMBACLASS_REQUIRE(!img.empty(), "adaptive_hist_eq of an empty image");
  IMBACLASS_REQUIRE(img.channels() == 1, "adaptive_hist_eq requires a single-channel image");
  IMBACLASS_REQUIRE(tile >= 1, "CLAHE tile must be >= 1");
  IMBACLASS_REQUIRE(clip_limit > 0.0 && std::isfinite(clip_limit), "CLAHE clip_limit must be > 0");

  const int w = img.width();
  const int h = img.height();
  const int tiles_x = (w + tile - 1) / tile;
  const int tiles_y = (h + tile - 1) / tile;

  // One mapping per tile, as unit-interval output levels.
  std::vector<std::array<double, kBins>> luts(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      const int x0 = tx * tile, x1 = std::min(w, x0 + tile);
      const int y0 = ty * tile, y1 = std::min(h, y0 + tile);
      std::array<double, kBins> hist{};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) hist[static_cast<std::size_t>(bin_of(img.at(x, y)))] += 1.0;
      const double area = static_cast<double>((x1 - x0) * (y1 - y0));
      const double clip = clip_limit * area / kBins;
      double excess = 0.0;
      for (double& c : hist)
        if (c > clip) {
          excess += c - clip;
          c = clip;
        }
      const double share = excess / kBins;
      auto& lut = luts[static_cast<std::size_t>(ty) * tiles_x + tx];
      double below = 0.0;
      for (int b = 0; b < kBins; ++b) {
        const double mass = hist[static_cast<std::size_t>(b)] + share;
        // Mid-bin placement: a bin maps to the center of the output span it owns.
        lut[static_cast<std::size_t>(b)] = (below + 0.5 * mass) / area;
        below += mass;
      }
    }

  const auto bx = blend_axis(w, tile);
  const auto by = blend_axis(h, tile);
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    const Blend& vy = by[static_cast<std::size_t>(y)];
    for (int x = 0; x < w; ++x) {
      const Blend& vx = bx[static_cast<std::size_t>(x)];
      const auto b = static_cast<std::size_t>(bin_of(img.at(x, y)));
      auto lut = [&](int ty, int tx) {
        return luts[static_cast<std::size_t>(ty) * tiles_x + tx][b];
      };
      const double top = (1.0 - vx.w_hi) * lut(vy.lo, vx.lo) + vx.w_hi * lut(vy.lo, vx.hi);
      const double bot = (1.0 - vx.w_hi) * lut(vy.hi, vx.lo) + vx.w_hi * lut(vy.hi, vx.hi);
      out.at(x, y) = static_cast<float>(std::clamp((1.0 - vy.w_hi) * top + vy.w_hi * bot, 0.0, 1.0));
    }
  }
  return out;
}

// --- Hough -------------------------------------------------------------------

namespace {

struct EdgePixel {
  int x;
  int y;
  float ux;  // unit gradient
  float uy;
  float magnitude;
};

std::vector<EdgePixel> sobel_edges(const Image& img, double threshold) {
  const int w = img.width();
  const int h = img.height();
  std::vector<EdgePixel> edges;
  auto px = [&](int x, int y) {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float gx = (px(x + 1, y - 1) + 2.0f * px(x + 1, y) + px(x + 1, y + 1) -
                        px(x - 1, y - 1) - 2.0f * px(x - 1, y) - px(x - 1, y + 1)) / 8.0f;
      const float gy = (px(x - 1, y + 1) + 2.0f * px(x, y + 1) + px(x + 1, y + 1) -
                        px(x - 1, y - 1) - 2.0f * px(x, y - 1) - px(x + 1, y - 1)) / 8.0f;
      const float m = std::sqrt(gx * gx + gy * gy);
      if (m >= threshold) edges.push_back({x, y, gx / m, gy / m, m});
    }
  return edges;
}

// Magnitude-weighted mean distance of radially oriented edge pixels inside the
// densest distance window around (cx, cy).
double refine_radius(const std::vector<EdgePixel>& edges, double cx, double cy,
                     double rmin, double rmax, double fallback) {
  const int lo = static_cast<int>(std::floor(rmin));
  const int hi = static_cast<int>(std::ceil(rmax));
  const int nb = hi - lo + 1;
  std::vector<double> mass(static_cast<std::size_t>(nb), 0.0);
  std::vector<double> moment(static_cast<std::size_t>(nb), 0.0);
  for (const EdgePixel& e : edges) {
    const double dx = e.x - cx;
    const double dy = e.y - cy;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d < lo || d >= hi + 1 || d == 0.0) continue;
    const double cosang = std::abs((dx * e.ux + dy * e.uy) / d);
    if (cosang < 0.9) continue;
    const auto b = static_cast<std::size_t>(static_cast<int>(d) - lo);
    mass[b] += e.magnitude;
    moment[b] += e.magnitude * d;
  }
  const int window = std::max(5, static_cast<int>(std::lround(0.08 * fallback)));
  double best = 0.0;
  int best_start = -1;
  for (int s = 0; s + window <= nb; ++s) {
    double m = 0.0;
    for (int k = s; k < s + window; ++k) m += mass[static_cast<std::size_t>(k)];
    if (m > best) {
      best = m;
      best_start = s;
    }
  }
  if (best_start < 0 || best <= 0.0) return fallback;
  double mom = 0.0;
  for (int k = best_start; k < best_start + window; ++k) mom += moment[static_cast<std::size_t>(k)];
  return mom / best;
}

}  // namespace

namespace {
constexpr double kVoteAngle = 0.025;  // radians
}  // namespace

std::vector<CircleDetection> hough_circles(const Image& img, const SegmentationConfig& cfg) {
  IMBACLASS_REQUIRE(!img.empty(), "hough_circles of an empty image");
  IMBACLASS_REQUIRE(img.channels() == 1, "hough_circles requires a single-channel image");
  IMBACLASS_REQUIRE(cfg.hough_min_radius > 0.0 && cfg.hough_min_radius < cfg.hough_max_radius,
                    "empty Hough radius range (min_radius must be < max_radius)");
  IMBACLASS_REQUIRE(cfg.hough_edge_threshold > 0.0, "hough_edge_threshold must be > 0");

  const int w = img.width();
  const int h = img.height();
  const auto edges = sobel_edges(img, cfg.hough_edge_threshold);
  if (edges.empty()) return {};

  const std::size_t npix = static_cast<std::size_t>(w) * h;
  std::vector<std::int32_t> slice(npix, 0);
  std::vector<std::int32_t> rows(npix, 0);
  std::vector<float> best(npix, 0.0f);
  std::vector<float> best_r(npix, 0.0f);

  const int r_lo = static_cast<int>(std::ceil(cfg.hough_min_radius));
  const int r_hi = static_cast<int>(std::floor(cfg.hough_max_radius));
  for (int r = r_lo; r <= r_hi; ++r) {
    std::fill(slice.begin(), slice.end(), 0);
    int y_min = h, y_max = -1;
    for (const EdgePixel& e : edges) {
      for (float sign : {1.0f, -1.0f}) {
        const int cx = static_cast<int>(std::lround(e.x + sign * r * e.ux));
        const int cy = static_cast<int>(std::lround(e.y + sign * r * e.uy));
        if (cx < 0 || cy < 0 || cx >= w || cy >= h) continue;
        ++slice[static_cast<std::size_t>(cy) * w + cx];
        y_min = std::min(y_min, cy);
        y_max = std::max(y_max, cy);
      }
    }
    if (y_max < 0) continue;
    // Gradient-direction error displaces votes by about r * angle, so votes
    // are pooled over a (2k+1)^2 box that grows with the radius.
    const int k = std::max(1, static_cast<int>(std::lround(r * kVoteAngle)));
    const int y0 = std::max(0, y_min - k), y1 = std::min(h - 1, y_max + k);
    for (int y = std::max(0, y_min); y <= std::min(h - 1, y_max); ++y) {
      const std::int32_t* in = slice.data() + static_cast<std::size_t>(y) * w;
      std::int32_t* out = rows.data() + static_cast<std::size_t>(y) * w;
      std::int32_t run = 0;
      for (int x = 0; x < std::min(k, w); ++x) run += in[x];
      for (int x = 0; x < w; ++x) {
        if (x + k < w) run += in[x + k];
        if (x - k - 1 >= 0) run -= in[x - k - 1];
        out[x] = run;
      }
    }
    const float norm = static_cast<float>(2.0 * std::numbers::pi * r);
    for (int x = 0; x < w; ++x) {
      std::int32_t run = 0;
      auto row_at = [&](int y) {
        return y >= y_min && y <= y_max ? rows[static_cast<std::size_t>(y) * w + x] : 0;
      };
      for (int y = y0; y < std::min(y0 + k, h); ++y) run += row_at(y);
      for (int y = y0; y <= y1; ++y) {
        if (y + k < h) run += row_at(y + k);
        if (y - k - 1 >= 0) run -= row_at(y - k - 1);
        if (run == 0) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        const float score = static_cast<float>(run) / norm;
        if (score > best[idx]) {
          best[idx] = score;
          best_r[idx] = static_cast<float>(r);
        }
      }
    }
  }

  struct Peak {
    float score;
    int x;
    int y;
  };
  std::vector<Peak> peaks;
  const float threshold = static_cast<float>(cfg.hough_accumulator_threshold);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float s = best[static_cast<std::size_t>(y) * w + x];
      if (s <= 0.0f || s < threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if ((dx || dy) && xx >= 0 && yy >= 0 && xx < w && yy < h &&
              best[static_cast<std::size_t>(yy) * w + xx] > s) {
            is_max = false;
            break;
          }
        }
      if (is_max) peaks.push_back({s, x, y});
    }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return std::tie(b.score, a.y, a.x) < std::tie(a.score, b.y, b.x);
  });

  std::vector<CircleDetection> out;
  const double min_d2 = cfg.hough_min_center_distance * cfg.hough_min_center_distance;
  for (const Peak& p : peaks) {
    // Sub-pixel center from the 3x3 score centroid.
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = p.x + dx, yy = p.y + dy;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        const double v = best[static_cast<std::size_t>(yy) * w + xx];
        sw += v;
        sx += v * xx;
        sy += v * yy;
      }
    const double cx = sx / sw;
    const double cy = sy / sw;
    const bool crowded = std::any_of(out.begin(), out.end(), [&](const CircleDetection& d) {
      const double dx = d.center_x - cx, dy = d.center_y - cy;
      return dx * dx + dy * dy < min_d2;
    });
    if (crowded) continue;
    const double r0 = best_r[static_cast<std::size_t>(p.y) * w + p.x];
    double r = refine_radius(edges, cx, cy, cfg.hough_min_radius, cfg.hough_max_radius, r0);
    r = std::clamp(r, cfg.hough_min_radius, cfg.hough_max_radius);
    out.push_back({cx, cy, r, p.score});
  }
  return out;
}

// --- segmentation --------------------------------------------------------------

Image crop_and_pad(const Image& img, const CircleDetection& det, int diameter) {
  IMBACLASS_REQUIRE(diameter >= 1, "crop diameter must be >= 1");
  IMBACLASS_REQUIRE(det.radius > 0.0, "detection radius must be > 0");
  const int side = std::min<long>(diameter, 2 * std::lround(det.radius));
  const int pad = (diameter - side) / 2;
  const int x0 = static_cast<int>(std::lround(det.center_x)) - side / 2;
  const int y0 = static_cast<int>(std::lround(det.center_y)) - side / 2;
  Image out(diameter, diameter, img.channels(), 0.0f);
  for (int y = 0; y < side; ++y) {
    const int sy = y0 + y;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < side; ++x) {
      const int sx = x0 + x;
      if (sx < 0 || sx >= img.width()) continue;
      for (int c = 0; c < img.channels(); ++c) out.at(pad + x, pad + y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

std::vector<SegmentedCell> segment_cells(const Image& smear, const SegmentationConfig& cfg) {
  cfg.validate();
  IMBACLASS_REQUIRE(!smear.empty(), "segment_cells of an empty image");
  const double ratio =
      cfg.source_cell_diameter > 0.0 ? cfg.expected_cell_diameter / cfg.source_cell_diameter : 1.0;
  const Image up = upscale(smear, ratio, cfg.interpolation);
  const Image gray = normalize_grayscale(up);
  const Image contrast = adaptive_hist_eq(gray, cfg.clahe_tile, cfg.clahe_clip_limit);
  const auto detections = hough_circles(contrast, cfg);

  // Corner-aligned resampling: src = dst * (n_src - 1) / (n_dst - 1).
  auto back = [](int n_src, int n_dst) {
    return n_dst > 1 ? static_cast<double>(n_src - 1) / (n_dst - 1) : 1.0;
  };
  const double sx = back(smear.width(), up.width());
  const double sy = back(smear.height(), up.height());

  std::vector<SegmentedCell> cells;
  cells.reserve(detections.size());
  for (const CircleDetection& d : detections) {
    CircleDetection src{d.center_x * sx, d.center_y * sy, d.radius * 0.5 * (sx + sy),
                        d.accumulator_score};
    cells.push_back({crop_and_pad(up, d, cfg.expected_cell_diameter), src});
  }
  return cells;
}

}  // namespace imbaclass
