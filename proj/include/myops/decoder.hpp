#pragma once

#include <array>

#include "myops/common.hpp"
#include "myops/preprocess.hpp"

namespace myops {

// Hard threshold at 0.5, ties count as 1.
inline double step_half(double x) { return x >= 0.5 ? 1.0 : 0.0; }

// Maps the five block probabilities (lv blood pool, rv blood pool,
// epicardium, scar+edema, scar) to the five mask channels:
//   P0 = s(B0)                       lv blood pool
//   P1 = s(B1)                       rv blood pool
//   P2 = s(B2 - B0 - B3)             normal myocardium
//   P3 = s(B2 - B0) * s(B3 - B4)     edema
//   P4 = s(B2 - B0) * s(B4)          scar
// with s the hard threshold above. Subtractions happen on the raw
// probabilities, before any thresholding.
inline std::array<double, 5> decode_pixel(const std::array<double, 5>& b) {
  std::array<double, 5> p;
  p[MaskChannel::LVBP] = step_half(b[0]);
  p[MaskChannel::RVBP] = step_half(b[1]);
  p[MaskChannel::LVNM] = step_half(b[2] - b[0] - b[3]);
  const double myo = step_half(b[2] - b[0]);
  p[MaskChannel::LVME] = myo * step_half(b[3] - b[4]);
  p[MaskChannel::LVMS] = myo * step_half(b[4]);
  return p;
}

inline std::array<GridF, 5> decode(const std::array<GridF, 5>& blocks) {
  for (int i = 1; i < 5; ++i)
    require(blocks[static_cast<size_t>(i)].same_shape(blocks[0]), Err::DimMismatch,
            "block maps disagree on dims");
  std::array<GridF, 5> out;
  for (auto& g : out) g = GridF(blocks[0].rows, blocks[0].cols);
  for (size_t i = 0; i < blocks[0].v.size(); ++i) {
    const std::array<double, 5> b = {blocks[0].v[i], blocks[1].v[i], blocks[2].v[i],
                                     blocks[3].v[i], blocks[4].v[i]};
    const std::array<double, 5> p = decode_pixel(b);
    for (int c = 0; c < 5; ++c) out[static_cast<size_t>(c)].v[i] = p[static_cast<size_t>(c)];
  }
  return out;
}

// Collapses the five channel masks into one labeled slice. Where channels
// overlap, the more specific tissue wins: scar over edema over normal
// myocardium over rv blood over lv blood.
inline GridI reassemble_labels(const std::array<GridF, 5>& masks) {
  for (int i = 1; i < 5; ++i)
    require(masks[static_cast<size_t>(i)].same_shape(masks[0]), Err::DimMismatch,
            "mask channels disagree on dims");
  static constexpr int order[5] = {MaskChannel::LVMS, MaskChannel::LVME, MaskChannel::LVNM,
                                   MaskChannel::RVBP, MaskChannel::LVBP};
  const std::array<int32_t, 5> codes = channel_codes();
  GridI out(masks[0].rows, masks[0].cols);
  for (size_t i = 0; i < out.v.size(); ++i) {
    out.v[i] = 0;
    for (int ch : order) {
      if (masks[static_cast<size_t>(ch)].v[i] != 0.0) {
        out.v[i] = codes[static_cast<size_t>(ch)];
        break;
      }
    }
  }
  return out;
}

}  // namespace myops
