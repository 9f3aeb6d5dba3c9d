#include "catch_amalgamated.hpp"

#include <numeric>

#include "myops/preprocess.hpp"
#include "myops/volume.hpp"

using namespace myops;

TEST_CASE("percentile rule: rank q*(n-1) with linear interpolation") {
  const std::vector<double> four = {1.0, 2.0, 3.0, 4.0};
  REQUIRE(percentile_sorted(four, 0.0) == 1.0);
  REQUIRE(percentile_sorted(four, 1.0) == 4.0);
  REQUIRE(percentile_sorted(four, 0.5) == 2.5);
  REQUIRE(percentile_sorted(four, 0.05) == Catch::Approx(1.15).epsilon(1e-12));
  REQUIRE(percentile_sorted(four, 0.95) == Catch::Approx(3.85).epsilon(1e-12));

  std::vector<double> single = {7.0};
  REQUIRE(percentile_sorted(single, 0.05) == 7.0);
}

TEST_CASE("ramp image anchors map to exactly 0 and 1") {
  // 101 pixels valued 0..100: the 5th and 95th percentiles are exact ranks
  GridF g(101, 1);
  for (int i = 0; i <= 100; ++i) g(i, 0) = static_cast<double>(i);
  const auto [out, params] = normalize_percentile(g);
  REQUIRE(params.i05 == 5.0);
  REQUIRE(params.i95 == 95.0);
  REQUIRE_FALSE(params.degenerate);
  REQUIRE(out(5, 0) == 0.0);
  REQUIRE(out(95, 0) == 1.0);
  // normalization is not clamped
  REQUIRE(out(0, 0) < 0.0);
  REQUIRE(out(100, 0) > 1.0);
}

TEST_CASE("constant image takes the degenerate path") {
  GridF g(4, 4, 3.0);
  const auto [out, params] = normalize_percentile(g);
  REQUIRE(params.degenerate);
  for (double v : out.v) REQUIRE(v == 0.0);
}

TEST_CASE("center crop shrinks from the middle and grows with zero padding") {
  GridF g(6, 6);
  std::iota(g.v.begin(), g.v.end(), 0.0);

  const GridF small = center_crop(g, 4);
  REQUIRE(small.rows == 4);
  // window offset (6-4)/2 = 1 in both axes
  REQUIRE(small(0, 0) == g(1, 1));
  REQUIRE(small(3, 3) == g(4, 4));

  const GridF big = center_crop(g, 8);
  REQUIRE(big.rows == 8);
  // pad (8-6)/2 = 1 on the low side
  REQUIRE(big(0, 0) == 0.0);
  REQUIRE(big(1, 1) == g(0, 0));
  REQUIRE(big(6, 6) == g(5, 5));
  REQUIRE(big(7, 7) == 0.0);

  // odd difference: extra pixel goes to the high side
  const GridF odd = center_crop(g, 7);
  REQUIRE(odd(0, 0) == g(0, 0));
  REQUIRE(odd(6, 6) == 0.0);

  REQUIRE(center_crop(g, 6) == g);
}

TEST_CASE("uncrop inverts a shrinking crop back into place") {
  GridF g(6, 6);
  std::iota(g.v.begin(), g.v.end(), 0.0);
  const GridF small = center_crop(g, 4);
  const GridF back = uncrop(small, 6, 6);
  REQUIRE(back.rows == 6);
  for (int r = 1; r <= 4; ++r)
    for (int c = 1; c <= 4; ++c) REQUIRE(back(r, c) == g(r, c));
  REQUIRE(back(0, 0) == 0.0);
  REQUIRE(back(5, 5) == 0.0);
}

TEST_CASE("label slices expand into five disjoint channels") {
  GridI labels(2, 3);
  labels.v = {0, 200, 500, 600, 1220, 2221};
  const std::array<GridF, 5> masks = labels_to_masks(labels);
  REQUIRE(masks[MaskChannel::LVBP].v == std::vector<double>{0, 0, 1, 0, 0, 0});
  REQUIRE(masks[MaskChannel::RVBP].v == std::vector<double>{0, 0, 0, 1, 0, 0});
  REQUIRE(masks[MaskChannel::LVNM].v == std::vector<double>{0, 1, 0, 0, 0, 0});
  REQUIRE(masks[MaskChannel::LVME].v == std::vector<double>{0, 0, 0, 0, 1, 0});
  REQUIRE(masks[MaskChannel::LVMS].v == std::vector<double>{0, 0, 0, 0, 0, 1});
}

TEST_CASE("unknown label codes are rejected with value and position") {
  GridI labels(1, 2);
  labels.v = {0, 999};
  try {
    labels_to_masks(labels);
    FAIL("expected InvalidLabelCode");
  } catch (const Error& e) {
    REQUIRE(e.code() == Err::InvalidLabelCode);
    REQUIRE(std::string(e.what()).find("999") != std::string::npos);
  }
}

TEST_CASE("slice extraction crops, normalizes and keeps all z planes") {
  std::array<Volume, 3> imgs;
  for (Volume& v : imgs) v = Volume(8, 8, 2);
  Volume labels(8, 8, 2);
  labels.label_flag = true;
  // give each sequence a gradient so normalization has spread
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        for (int s = 0; s < 3; ++s)
          imgs[static_cast<size_t>(s)].at(x, y, z) = 10.0 * (s + 1) * (x + y + z);
        labels.at(x, y, z) = (x < 4) ? 500.0 : 0.0;
      }

  const std::vector<SliceSample> samples = extract_slices(imgs, labels, 4, "caseA");
  REQUIRE(samples.size() == 2);
  REQUIRE(samples[0].case_id == "caseA");
  REQUIRE(samples[0].slice_index == 0);
  REQUIRE(samples[1].slice_index == 1);
  for (const SliceSample& s : samples) {
    for (const GridF& img : s.images) REQUIRE(img.rows == 4);
    for (const GridF& m : s.masks) REQUIRE(m.rows == 4);
    // crop starts at (8-4)/2 = 2, so columns 2..5 of the label slice: x<4 half
    REQUIRE(s.masks[MaskChannel::LVBP](0, 0) == 1.0);
    REQUIRE(s.masks[MaskChannel::LVBP](0, 3) == 0.0);
  }

  const std::vector<std::array<GridF, 3>> inf = extract_inference_slices(imgs, 4);
  REQUIRE(inf.size() == 2);
  REQUIRE(inf[0][0].rows == 4);
  // inference slices see the same normalization as training slices
  REQUIRE(inf[0][0] == samples[0].images[0]);
}

TEST_CASE("mismatched sequence dims are rejected") {
  std::array<Volume, 3> imgs = {Volume(8, 8, 2), Volume(8, 8, 2), Volume(8, 8, 1)};
  Volume labels(8, 8, 2);
  labels.label_flag = true;
  REQUIRE_THROWS_AS(extract_slices(imgs, labels, 4, "x"), Error);
}

TEST_CASE("sequence names round-trip") {
  REQUIRE(seq_from_name(seq_name(Seq::bSSFP)) == Seq::bSSFP);
  REQUIRE(seq_from_name(seq_name(Seq::LGE)) == Seq::LGE);
  REQUIRE(seq_from_name(seq_name(Seq::T2)) == Seq::T2);
  REQUIRE_THROWS_AS(seq_from_name("t1"), Error);
}
