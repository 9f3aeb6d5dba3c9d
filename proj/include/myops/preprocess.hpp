#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "myops/common.hpp"
#include "myops/volume.hpp"

namespace myops {

enum class Seq : int { bSSFP = 0, LGE = 1, T2 = 2 };

inline const char* seq_name(Seq s) {
  switch (s) {
    case Seq::bSSFP: return "bssfp";
    case Seq::LGE: return "lge";
    case Seq::T2: return "t2";
  }
  return "?";
}

inline Seq seq_from_name(const std::string& name) {
  for (Seq s : {Seq::bSSFP, Seq::LGE, Seq::T2})
    if (name == seq_name(s)) return s;
  fail(Err::MissingSequence, "unknown sequence " + name);
}

// Mask channel order: LVBP, RVBP, LVNM, LVME, LVMS.
enum MaskChannel { LVBP = 0, RVBP = 1, LVNM = 2, LVME = 3, LVMS = 4 };

inline const std::array<int32_t, 5>& channel_codes() {
  static const std::array<int32_t, 5> codes = {500, 600, 200, 1220, 2221};
  return codes;
}

inline const char* channel_name(int ch) {
  static const char* names[5] = {"LVBP", "RVBP", "LVNM", "LVME", "LVMS"};
  return names[ch];
}

// One training unit: the three sequence slices plus five disjoint binary masks.
struct SliceSample {
  std::array<GridF, 3> images;  // indexed by Seq
  std::array<GridF, 5> masks;   // indexed by MaskChannel, values in {0,1}
  std::string case_id;
  int slice_index = 0;
};

struct NormalizationParams {
  double i05 = 0.0;
  double i95 = 0.0;
  bool degenerate = false;
};

// Centered window when shrinking, symmetric zero padding when growing
// (the extra pixel goes to the high side). No interpolation either way.
template <typename T>
Grid<T> center_crop(const Grid<T>& g, int size) {
  require(size > 0, Err::EmptyInput, "crop size must be positive");
  Grid<T> out(size, size, T{});
  const int row_start = g.rows >= size ? (g.rows - size) / 2 : 0;
  const int col_start = g.cols >= size ? (g.cols - size) / 2 : 0;
  const int row_pad = g.rows >= size ? 0 : (size - g.rows) / 2;
  const int col_pad = g.cols >= size ? 0 : (size - g.cols) / 2;
  const int rows = std::min(g.rows, size);
  const int cols = std::min(g.cols, size);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r + row_pad, c + col_pad) = g(r + row_start, c + col_start);
  return out;
}

// Inverse placement of center_crop for a size x size grid back into
// (rows, cols); pixels outside the window become background.
template <typename T>
Grid<T> uncrop(const Grid<T>& g, int rows, int cols) {
  require(g.rows == g.cols, Err::NonSquare, "uncrop expects a square grid");
  const int size = g.rows;
  Grid<T> out(rows, cols, T{});
  const int row_start = rows >= size ? (rows - size) / 2 : 0;
  const int col_start = cols >= size ? (cols - size) / 2 : 0;
  const int row_pad = rows >= size ? 0 : (size - rows) / 2;
  const int col_pad = cols >= size ? 0 : (size - cols) / 2;
  const int r_count = std::min(rows, size);
  const int c_count = std::min(cols, size);
  for (int r = 0; r < r_count; ++r)
    for (int c = 0; c < c_count; ++c) out(r + row_start, c + col_start) = g(r + row_pad, c + col_pad);
  return out;
}

// Percentile by linear interpolation over the sorted values: rank q*(n-1),
// interpolating between the neighbouring order statistics.
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double r = q * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(std::floor(r));
  const size_t hi = static_cast<size_t>(std::ceil(r));
  const double frac = r - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// (I - i05) / (i95 - i05), unclamped. A flat slice maps to all zeros with
// the degenerate flag set instead of failing.
inline std::pair<GridF, NormalizationParams> normalize_percentile(const GridF& g) {
  require(g.size() > 0, Err::EmptyInput, "empty grid");
  std::vector<double> sorted(g.v);
  std::sort(sorted.begin(), sorted.end());
  NormalizationParams p;
  p.i05 = percentile_sorted(sorted, 0.05);
  p.i95 = percentile_sorted(sorted, 0.95);
  GridF out(g.rows, g.cols);
  if (p.i95 == p.i05) {
    p.degenerate = true;
    return {out, p};
  }
  const double scale = 1.0 / (p.i95 - p.i05);
  for (size_t i = 0; i < g.v.size(); ++i) out.v[i] = (g.v[i] - p.i05) * scale;
  return {out, p};
}

inline std::array<GridF, 5> labels_to_masks(const GridI& labels) {
  std::array<GridF, 5> masks;
  for (auto& m : masks) m = GridF(labels.rows, labels.cols, 0.0);
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      const int32_t code = labels(r, c);
      if (code == 0) continue;
      int ch = -1;
      for (int k = 0; k < 5; ++k)
        if (channel_codes()[k] == code) ch = k;
      if (ch < 0)
        fail(Err::InvalidLabelCode, "code " + std::to_string(code) + " at (" +
                                        std::to_string(r) + "," + std::to_string(c) + ")");
      masks[ch](r, c) = 1.0;
    }
  }
  return masks;
}

inline GridI label_slice_of(const Volume& v, int z) {
  GridI g(v.ny, v.nx);
  for (int y = 0; y < v.ny; ++y)
    for (int x = 0; x < v.nx; ++x) g(y, x) = static_cast<int32_t>(v.at(x, y, z));
  return g;
}

// One sample per z slice: images are cropped then percentile-normalized,
// labels are cropped without interpolation and expanded to channel masks.
inline std::vector<SliceSample> extract_slices(const std::array<Volume, 3>& sequences,
                                               const Volume& labels, int crop_size,
                                               const std::string& case_id) {
  for (const Volume& v : sequences)
    require(v.same_dims(labels), Err::DimMismatch, "sequence dims differ from labels");
  std::vector<SliceSample> out;
  out.reserve(static_cast<size_t>(labels.nz));
  for (int z = 0; z < labels.nz; ++z) {
    SliceSample s;
    s.case_id = case_id;
    s.slice_index = z;
    for (int q = 0; q < 3; ++q) {
      const GridF cropped = center_crop(slice_of(sequences[q], z), crop_size);
      s.images[q] = normalize_percentile(cropped).first;
    }
    s.masks = labels_to_masks(center_crop(label_slice_of(labels, z), crop_size));
    out.push_back(std::move(s));
  }
  return out;
}

// Test-time variant: no labels available.
inline std::vector<std::array<GridF, 3>> extract_inference_slices(
    const std::array<Volume, 3>& sequences, int crop_size) {
  const Volume& first = sequences[0];
  for (const Volume& v : sequences)
    require(v.same_dims(first), Err::DimMismatch, "sequence dims differ");
  std::vector<std::array<GridF, 3>> out;
  out.reserve(static_cast<size_t>(first.nz));
  for (int z = 0; z < first.nz; ++z) {
    std::array<GridF, 3> imgs;
    for (int q = 0; q < 3; ++q)
      imgs[q] = normalize_percentile(center_crop(slice_of(sequences[q], z), crop_size)).first;
    out.push_back(std::move(imgs));
  }
  return out;
}

}  // namespace myops
