#include "catch_amalgamated.hpp"

#include "myops/blocks.hpp"

using namespace myops;

TEST_CASE("the five block definitions are frozen") {
  const auto blocks = default_blocks();
  REQUIRE(blocks.size() == 5);

  REQUIRE(blocks[0].input == Seq::bSSFP);
  REQUIRE(blocks[0].channels == std::vector<int>{MaskChannel::LVBP});

  REQUIRE(blocks[1].input == Seq::bSSFP);
  REQUIRE(blocks[1].channels == std::vector<int>{MaskChannel::RVBP});

  REQUIRE(blocks[2].input == Seq::bSSFP);
  REQUIRE(blocks[2].channels == std::vector<int>{MaskChannel::LVBP, MaskChannel::LVNM,
                                                 MaskChannel::LVME, MaskChannel::LVMS});

  REQUIRE(blocks[3].input == Seq::LGE);
  REQUIRE(blocks[3].channels == std::vector<int>{MaskChannel::LVME, MaskChannel::LVMS});

  REQUIRE(blocks[4].input == Seq::T2);
  REQUIRE(blocks[4].channels == std::vector<int>{MaskChannel::LVMS});

  REQUIRE(block_name(0) == "lv_blood_pool");
  REQUIRE(block_name(2) == "lv_epicardium");
  REQUIRE(block_name(4) == "scar");
  REQUIRE_THROWS_AS(block_name(5), Error);
}

TEST_CASE("union target is the pixelwise OR of the selected channels") {
  std::array<GridF, 5> masks;
  for (auto& m : masks) m = GridF(2, 2, 0.0);
  masks[MaskChannel::LVBP](0, 0) = 1.0;
  masks[MaskChannel::LVNM](0, 1) = 1.0;
  masks[MaskChannel::LVMS](0, 0) = 1.0;  // overlaps LVBP
  masks[MaskChannel::RVBP](1, 1) = 1.0;  // not selected below

  const GridF u = union_mask(masks, {MaskChannel::LVBP, MaskChannel::LVNM, MaskChannel::LVME,
                                     MaskChannel::LVMS});
  REQUIRE(u.v == std::vector<double>{1, 1, 0, 0});

  const GridF single = union_mask(masks, {MaskChannel::RVBP});
  REQUIRE(single.v == std::vector<double>{0, 0, 0, 1});

  REQUIRE_THROWS_AS(union_mask(masks, {}), Error);
  REQUIRE_THROWS_AS(union_mask(masks, {5}), Error);
}

TEST_CASE("encoding picks the block's sequence and builds its target") {
  SliceSample s;
  s.case_id = "c";
  for (int q = 0; q < 3; ++q) s.images[q] = GridF(2, 2, static_cast<double>(q));
  for (auto& m : s.masks) m = GridF(2, 2, 0.0);
  s.masks[MaskChannel::LVME](0, 0) = 1.0;
  s.masks[MaskChannel::LVMS](1, 1) = 1.0;

  const auto blocks = default_blocks();
  const std::vector<BlockPair> scar_edema = encode({s}, blocks[3]);
  REQUIRE(scar_edema.size() == 1);
  REQUIRE(scar_edema[0].image == s.images[static_cast<size_t>(Seq::LGE)]);
  REQUIRE(scar_edema[0].target.v == std::vector<double>{1, 0, 0, 1});

  const std::vector<BlockPair> scar = encode({s}, blocks[4]);
  REQUIRE(scar[0].image == s.images[static_cast<size_t>(Seq::T2)]);
  REQUIRE(scar[0].target.v == std::vector<double>{0, 0, 0, 1});
}

TEST_CASE("inference encoding keeps slice order and selects one sequence") {
  std::vector<std::array<GridF, 3>> slices(3);
  for (int i = 0; i < 3; ++i)
    for (int q = 0; q < 3; ++q) slices[static_cast<size_t>(i)][static_cast<size_t>(q)] =
        GridF(2, 2, 10.0 * i + q);

  const std::vector<GridF> lge = encode_inference(slices, default_blocks()[3]);
  REQUIRE(lge.size() == 3);
  REQUIRE(lge[0](0, 0) == 1.0);
  REQUIRE(lge[1](0, 0) == 11.0);
  REQUIRE(lge[2](0, 0) == 21.0);
}
