#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "myops/blocks.hpp"
#include "myops/common.hpp"
#include "myops/decoder.hpp"
#include "myops/morphology.hpp"
#include "myops/nn.hpp"

namespace myops {

inline GridF predict_slice(Network& net, const GridF& input) {
  Tape tape;
  VarP out = net.forward(tape, grid_to_tensor(input));
  tape.clear();
  return tensor_plane_to_grid(out->val, 0, 0);
}

// Arithmetic mean of per-pixel member values. Values are sorted before
// accumulating and summed in extended precision, so the result is bitwise
// independent of member order and a set of identical members averages to
// exactly the member value.
inline GridF ensemble_mean(const std::vector<GridF>& members) {
  require(!members.empty(), Err::MissingModel, "ensemble has no members");
  for (const GridF& m : members)
    require(m.same_shape(members[0]), Err::ShapeMismatch, "ensemble member dims differ");
  if (members.size() == 1) return members[0];
  GridF out(members[0].rows, members[0].cols);
  std::vector<double> vals(members.size());
  for (size_t i = 0; i < out.v.size(); ++i) {
    for (size_t k = 0; k < members.size(); ++k) vals[k] = members[k].v[i];
    std::sort(vals.begin(), vals.end());
    long double acc = 0.0L;
    for (double v : vals) acc += v;
    out.v[i] = static_cast<double>(acc / static_cast<long double>(vals.size()));
  }
  return out;
}

// One probability grid per block per slice; blocks with several models carry
// the ensemble mean.
struct RawPredictions {
  std::array<std::vector<GridF>, kNumBlocks> blocks;
};

inline RawPredictions predict_blocks(std::array<std::vector<Network>, kNumBlocks>& models,
                                     const std::vector<std::array<GridF, 3>>& slices,
                                     const std::array<BlockSpec, kNumBlocks>& specs) {
  RawPredictions raw;
  for (int b = 0; b < kNumBlocks; ++b) {
    require(!models[static_cast<size_t>(b)].empty(), Err::MissingModel,
            "no model for block " + std::to_string(b));
    const std::vector<GridF> inputs = encode_inference(slices, specs[static_cast<size_t>(b)]);
    raw.blocks[static_cast<size_t>(b)].reserve(inputs.size());
    for (const GridF& in : inputs) {
      std::vector<GridF> outs;
      outs.reserve(models[static_cast<size_t>(b)].size());
      for (Network& net : models[static_cast<size_t>(b)])
        outs.push_back(predict_slice(net, in));
      raw.blocks[static_cast<size_t>(b)].push_back(ensemble_mean(outs));
    }
  }
  return raw;
}

// Binarizes every block; the lv blood pool and epicardium maps additionally
// keep only their largest component and get interior holes filled.
inline GridF postprocess_grid(const GridF& raw, int block) {
  GridF g = binarize(raw);
  if (block == 0 || block == 2) g = fill_holes(largest_component(g));
  return g;
}

inline RawPredictions postprocess(const RawPredictions& raw) {
  RawPredictions post;
  for (int b = 0; b < kNumBlocks; ++b) {
    post.blocks[static_cast<size_t>(b)].reserve(raw.blocks[static_cast<size_t>(b)].size());
    for (const GridF& g : raw.blocks[static_cast<size_t>(b)])
      post.blocks[static_cast<size_t>(b)].push_back(postprocess_grid(g, b));
  }
  return post;
}

// Post-processed block maps for slice z, decoded and collapsed to labels.
inline GridI decode_slice_labels(const RawPredictions& post, size_t z) {
  std::array<GridF, 5> maps;
  for (int b = 0; b < kNumBlocks; ++b) {
    require(z < post.blocks[static_cast<size_t>(b)].size(), Err::DimMismatch,
            "slice index out of range");
    maps[static_cast<size_t>(b)] = post.blocks[static_cast<size_t>(b)][z];
  }
  return reassemble_labels(decode(maps));
}

}  // namespace myops
