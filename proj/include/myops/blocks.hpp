#pragma once

#include <array>
#include <string>
#include <vector>

#include "myops/common.hpp"
#include "myops/preprocess.hpp"

namespace myops {

constexpr int kNumBlocks = 5;

// One binary segmentation problem: a single input sequence paired with the
// union of a set of mask channels. Block targets, in channel-index terms:
//   0: bSSFP  -> {LVBP}
//   1: bSSFP  -> {RVBP}
//   2: bSSFP  -> {LVBP, LVNM, LVME, LVMS}   (epicardium region)
//   3: LGE    -> {LVME, LVMS}
//   4: T2     -> {LVMS}
struct BlockSpec {
  Seq input;
  std::vector<int> channels;
};

inline std::array<BlockSpec, kNumBlocks> default_blocks() {
  return {{
      {Seq::bSSFP, {MaskChannel::LVBP}},
      {Seq::bSSFP, {MaskChannel::RVBP}},
      {Seq::bSSFP, {MaskChannel::LVBP, MaskChannel::LVNM, MaskChannel::LVME, MaskChannel::LVMS}},
      {Seq::LGE, {MaskChannel::LVME, MaskChannel::LVMS}},
      {Seq::T2, {MaskChannel::LVMS}},
  }};
}

inline std::string block_name(int block) {
  static const char* names[kNumBlocks] = {"lv_blood_pool", "rv_blood_pool", "lv_epicardium",
                                          "scar_edema", "scar"};
  require(block >= 0 && block < kNumBlocks, Err::ConfigError, "block index out of range");
  return names[block];
}

// Pixelwise union of the listed mask channels.
inline GridF union_mask(const std::array<GridF, 5>& masks, const std::vector<int>& channels) {
  require(!channels.empty(), Err::EmptyInput, "block has no mask channels");
  GridF out(masks[0].rows, masks[0].cols);
  for (int ch : channels) {
    require(ch >= 0 && ch < 5, Err::ConfigError, "mask channel out of range");
    const GridF& m = masks[static_cast<size_t>(ch)];
    require(m.same_shape(out), Err::DimMismatch, "mask shapes differ");
    for (size_t i = 0; i < out.v.size(); ++i)
      if (m.v[i] != 0.0) out.v[i] = 1.0;
  }
  return out;
}

struct BlockPair {
  GridF image;
  GridF target;
};

// Training view of one block: (input image, union target) per slice sample.
inline std::vector<BlockPair> encode(const std::vector<SliceSample>& samples,
                                     const BlockSpec& spec) {
  std::vector<BlockPair> out;
  out.reserve(samples.size());
  for (const SliceSample& s : samples) {
    BlockPair p;
    p.image = s.images[static_cast<size_t>(spec.input)];
    p.target = union_mask(s.masks, spec.channels);
    out.push_back(std::move(p));
  }
  return out;
}

// Inference view: just the block's input sequence per slice.
inline std::vector<GridF> encode_inference(const std::vector<std::array<GridF, 3>>& slices,
                                           const BlockSpec& spec) {
  std::vector<GridF> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.push_back(s[static_cast<size_t>(spec.input)]);
  return out;
}

}  // namespace myops
