#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "myops/common.hpp"
#include "myops/preprocess.hpp"
#include "myops/rng.hpp"

namespace myops {

// Coarse 8x8 random displacement (pixels, entries in [-5,5]) plus its dense
// bilinear upsampling to the image size. Last axis of the coarse matrix is
// (dx, dy); draws are row-major over the 8x8 cells, dx before dy.
struct DisplacementField {
  GridF coarse_dx, coarse_dy;  // 8x8
  GridF dx, dy;                // H x W
};

namespace detail {

// Align-corners bilinear upsampling: coarse cell (i, j) sits at dense
// position (i*(H-1)/7, j*(W-1)/7).
inline GridF upsample_coarse(const GridF& coarse, int h, int w) {
  GridF out(h, w);
  const int cn = coarse.rows;  // 8
  const double sy = h > 1 ? static_cast<double>(cn - 1) / (h - 1) : 0.0;
  const double sx = w > 1 ? static_cast<double>(cn - 1) / (w - 1) : 0.0;
  for (int y = 0; y < h; ++y) {
    const double cy = y * sy;
    const int y0 = static_cast<int>(cy);
    const int y1 = std::min(y0 + 1, cn - 1);
    const double fy = cy - y0;
    for (int x = 0; x < w; ++x) {
      const double cx = x * sx;
      const int x0 = static_cast<int>(cx);
      const int x1 = std::min(x0 + 1, cn - 1);
      const double fx = cx - x0;
      const double top = coarse(y0, x0) + fx * (coarse(y0, x1) - coarse(y0, x0));
      const double bot = coarse(y1, x0) + fx * (coarse(y1, x1) - coarse(y1, x0));
      out(y, x) = top + fy * (bot - top);
    }
  }
  return out;
}

}  // namespace detail

inline DisplacementField field_from_coarse(GridF coarse_dx, GridF coarse_dy, int h, int w) {
  DisplacementField f;
  f.dx = detail::upsample_coarse(coarse_dx, h, w);
  f.dy = detail::upsample_coarse(coarse_dy, h, w);
  f.coarse_dx = std::move(coarse_dx);
  f.coarse_dy = std::move(coarse_dy);
  return f;
}

inline DisplacementField gen_field(Rng& rng, int h, int w) {
  require(h >= 8 && w >= 8, Err::DimMismatch, "field needs at least 8x8 target");
  GridF cdx(8, 8), cdy(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      cdx(y, x) = rng.uniform(-5.0, 5.0);
      cdy(y, x) = rng.uniform(-5.0, 5.0);
    }
  }
  return field_from_coarse(std::move(cdx), std::move(cdy), h, w);
}

enum class WarpMode { Image, Mask };

// Backward warping with bilinear sampling: out(y,x) = in(y + dy, x + dx),
// sampling coordinates clamped to the image bounds. Mask mode re-binarizes
// at 0.5 (ties to 1).
inline GridF warp(const GridF& g, const DisplacementField& f, WarpMode mode) {
  require(f.dx.same_shape(g) && f.dy.same_shape(g), Err::DimMismatch,
          "field dims do not match grid");
  const int h = g.rows, w = g.cols;
  GridF out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = x + f.dx(y, x);
      double sy = y + f.dy(y, x);
      sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
      sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      const double top = g(y0, x0) + fx * (g(y0, x1) - g(y0, x0));
      const double bot = g(y1, x0) + fx * (g(y1, x1) - g(y1, x0));
      double v = top + fy * (bot - top);
      if (mode == WarpMode::Mask) v = v >= 0.5 ? 1.0 : 0.0;
      out(y, x) = v;
    }
  }
  return out;
}

// Exact index permutation, square grids only. One quarter turn moves the
// top-left pixel to the top-right corner.
template <typename T>
Grid<T> rotate(const Grid<T>& g, int quarter_turns) {
  require(g.rows == g.cols, Err::NonSquare, "rotation needs a square grid");
  require(quarter_turns >= 1 && quarter_turns <= 3, Err::EmptyInput,
          "quarter turns must be 1, 2 or 3");
  const int n = g.rows;
  Grid<T> out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      switch (quarter_turns) {
        case 1: out(r, c) = g(n - 1 - c, r); break;
        case 2: out(r, c) = g(n - 1 - r, n - 1 - c); break;
        case 3: out(r, c) = g(c, n - 1 - r); break;
      }
    }
  }
  return out;
}

inline SliceSample warp_sample(const SliceSample& s, const DisplacementField& f) {
  SliceSample out = s;
  for (auto& img : out.images) img = warp(img, f, WarpMode::Image);
  for (auto& m : out.masks) m = warp(m, f, WarpMode::Mask);
  return out;
}

inline SliceSample rotate_sample(const SliceSample& s, int quarter_turns) {
  SliceSample out = s;
  for (auto& img : out.images) img = rotate(img, quarter_turns);
  for (auto& m : out.masks) m = rotate(m, quarter_turns);
  return out;
}

// Per input sample: warps_per_slice independently warped copies (one field
// per copy, shared across the three images and five masks), then one rotated
// copy of every warped sample with a quarter-turn count drawn from {1,2,3}.
// Output order is all warped copies followed by all rotated copies; the
// result holds exactly 2 * warps_per_slice * |input| samples.
inline std::vector<SliceSample> augment_dataset(const std::vector<SliceSample>& samples,
                                                Rng& rng, int warps_per_slice = 20) {
  require(warps_per_slice >= 1, Err::EmptyInput, "warps_per_slice must be >= 1");
  std::vector<SliceSample> out;
  out.reserve(samples.size() * static_cast<size_t>(warps_per_slice) * 2);
  for (const SliceSample& s : samples) {
    const int h = s.images[0].rows, w = s.images[0].cols;
    for (int k = 0; k < warps_per_slice; ++k) {
      const DisplacementField f = gen_field(rng, h, w);
      out.push_back(warp_sample(s, f));
    }
  }
  const size_t warped = out.size();
  for (size_t i = 0; i < warped; ++i) {
    const int turns = static_cast<int>(rng.below(3)) + 1;
    out.push_back(rotate_sample(out[i], turns));
  }
  return out;
}

}  // namespace myops
