#include "catch_amalgamated.hpp"

#include <algorithm>
#include <vector>

#include "decoder_table.hpp"
#include "myops/decoder.hpp"

using namespace myops;

TEST_CASE("the step function thresholds at 0.5 with ties high") {
  REQUIRE(step_half(0.5) == 1.0);
  REQUIRE(step_half(0.4999999) == 0.0);
  REQUIRE(step_half(-2.0) == 0.0);
  REQUIRE(step_half(1.0) == 1.0);
}

TEST_CASE("pixel decoding matches the frozen binary truth table") {
  for (int i = 0; i < 32; ++i) {
    std::array<double, 5> b;
    for (int k = 0; k < 5; ++k) b[static_cast<size_t>(k)] = (i >> k) & 1;
    const std::array<double, 5> p = decode_pixel(b);
    for (int c = 0; c < 5; ++c) {
      INFO("input row " << i << " channel " << c);
      REQUIRE(p[static_cast<size_t>(c)] ==
              static_cast<double>(fixtures::decoder_table[i][c]));
    }
  }
}

TEST_CASE("decoding subtracts probabilities before thresholding") {
  // epicardium 0.9 minus blood pool 0.6 is 0.3, below threshold: pixels that
  // look myocardial only after thresholding must not decode as myocardium
  const std::array<double, 5> soft = {0.6, 0.0, 0.9, 0.0, 0.0};
  const std::array<double, 5> p = decode_pixel(soft);
  REQUIRE(p[MaskChannel::LVBP] == 1.0);
  REQUIRE(p[MaskChannel::LVNM] == 0.0);

  // epicardium 0.9 minus blood pool 0.2 clears the myocardium gate; the
  // scar+edema mass 0.6 pushes normal myocardium below threshold and the
  // scar 0.7 outvotes edema
  const std::array<double, 5> scar = {0.2, 0.0, 0.9, 0.6, 0.7};
  const std::array<double, 5> q = decode_pixel(scar);
  REQUIRE(q[MaskChannel::LVNM] == 0.0);  // 0.9 - 0.2 - 0.6 = 0.1
  REQUIRE(q[MaskChannel::LVMS] == 1.0);  // gate 0.7, scar 0.7
  REQUIRE(q[MaskChannel::LVME] == 0.0);  // 0.6 - 0.7 < 0.5
}

TEST_CASE("two inputs leave normal myocardium and scar both on") {
  // the five equations do not guarantee pairwise-disjoint channels: with
  // epicardium and scar certain but scar+edema silent, both the myocardium
  // and the scar conditions hold
  for (int b1 : {0, 1}) {
    const std::array<double, 5> in = {0.0, static_cast<double>(b1), 1.0, 0.0, 1.0};
    const std::array<double, 5> p = decode_pixel(in);
    REQUIRE(p[MaskChannel::LVNM] == 1.0);
    REQUIRE(p[MaskChannel::LVMS] == 1.0);
  }
  // among the three myocardial tissue channels these are the only two binary
  // inputs with an overlap, and the pair is always (normal, scar)
  std::vector<int> overlap_rows;
  for (int i = 0; i < 32; ++i) {
    const int nm = fixtures::decoder_table[i][MaskChannel::LVNM];
    const int me = fixtures::decoder_table[i][MaskChannel::LVME];
    const int ms = fixtures::decoder_table[i][MaskChannel::LVMS];
    REQUIRE((nm && me) == 0);
    REQUIRE((me && ms) == 0);
    if (nm && ms) overlap_rows.push_back(i);
  }
  REQUIRE(overlap_rows == std::vector<int>{20, 22});
}

TEST_CASE("grid decoding applies the pixel rule everywhere") {
  std::array<GridF, 5> blocks;
  for (auto& g : blocks) g = GridF(1, 3, 0.0);
  // pixel 0: pure blood pool; pixel 1: edema; pixel 2: background
  blocks[0](0, 0) = 0.9;
  blocks[2](0, 0) = 0.95;
  blocks[2](0, 1) = 1.0;
  blocks[3](0, 1) = 1.0;

  const std::array<GridF, 5> p = decode(blocks);
  REQUIRE(p[MaskChannel::LVBP].v == std::vector<double>{1, 0, 0});
  REQUIRE(p[MaskChannel::LVME].v == std::vector<double>{0, 1, 0});
  REQUIRE(p[MaskChannel::LVNM].v == std::vector<double>{0, 0, 0});
  REQUIRE(p[MaskChannel::LVMS].v == std::vector<double>{0, 0, 0});

  blocks[4] = GridF(2, 2, 0.0);
  REQUIRE_THROWS_AS(decode(blocks), Error);
}

TEST_CASE("label reassembly lets specific tissue beat general tissue") {
  std::array<GridF, 5> masks;
  for (auto& m : masks) m = GridF(1, 6, 0.0);
  masks[MaskChannel::LVBP](0, 0) = 1.0;
  masks[MaskChannel::RVBP](0, 1) = 1.0;
  masks[MaskChannel::LVNM](0, 2) = 1.0;
  masks[MaskChannel::LVME](0, 3) = 1.0;
  masks[MaskChannel::LVMS](0, 4) = 1.0;
  // pixel 5: everything at once; scar must win
  for (auto& m : masks) m(0, 5) = 1.0;

  const GridI labels = reassemble_labels(masks);
  REQUIRE(labels.v == std::vector<int32_t>{500, 600, 200, 1220, 2221, 2221});

  // edema beats normal myocardium, which beats the blood pools
  std::array<GridF, 5> pair;
  for (auto& m : pair) m = GridF(1, 1, 0.0);
  pair[MaskChannel::LVNM](0, 0) = 1.0;
  pair[MaskChannel::LVME](0, 0) = 1.0;
  REQUIRE(reassemble_labels(pair)(0, 0) == 1220);
  pair[MaskChannel::LVME](0, 0) = 0.0;
  pair[MaskChannel::RVBP](0, 0) = 1.0;
  REQUIRE(reassemble_labels(pair)(0, 0) == 200);

  masks[2] = GridF(3, 3, 0.0);
  REQUIRE_THROWS_AS(reassemble_labels(masks), Error);
}

TEST_CASE("decoding binary maps is idempotent away from the overlap rows") {
  // feed the decoder its own output mapped back to block space:
  // blocks = (P0, P1, P0|P2|P3|P4, P3|P4, P4)
  for (int i = 0; i < 32; ++i) {
    std::array<double, 5> b;
    for (int k = 0; k < 5; ++k) b[static_cast<size_t>(k)] = (i >> k) & 1;
    const std::array<double, 5> p = decode_pixel(b);
    const std::array<double, 5> fed = {
        p[MaskChannel::LVBP],
        p[MaskChannel::RVBP],
        std::max({p[MaskChannel::LVBP], p[MaskChannel::LVNM], p[MaskChannel::LVME],
                  p[MaskChannel::LVMS]}),
        std::max(p[MaskChannel::LVME], p[MaskChannel::LVMS]),
        p[MaskChannel::LVMS]};
    const std::array<double, 5> again = decode_pixel(fed);
    const bool overlap_row = (i == 20 || i == 22);  // inputs (0,*,1,0,1)
    if (overlap_row) {
      // the scar channel survives the round trip, normal myocardium flips off
      REQUIRE(again[MaskChannel::LVMS] == 1.0);
      REQUIRE(again[MaskChannel::LVNM] == 0.0);
    } else {
      REQUIRE(again == p);
    }
  }
}
