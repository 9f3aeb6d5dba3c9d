#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "myops/trainer.hpp"

using namespace myops;

namespace {

// distinguishable samples: image pixels carry the sample index
std::vector<BlockPair> tagged_dataset(size_t n, int size) {
  std::vector<BlockPair> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i].image = GridF(size, size, static_cast<double>(i));
    out[i].target = GridF(size, size, 0.0);
    out[i].target(0, 0) = 1.0;
  }
  return out;
}

std::vector<BlockPair> blob_dataset(size_t n, int size, uint64_t seed) {
  Rng rng(seed);
  std::vector<BlockPair> out(n);
  for (size_t k = 0; k < n; ++k) {
    GridF img(size, size, 0.0);
    GridF tgt(size, size, 0.0);
    const int cy = 4 + static_cast<int>(rng.below(static_cast<uint64_t>(size - 8)));
    const int cx = 4 + static_cast<int>(rng.below(static_cast<uint64_t>(size - 8)));
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        if (d2 <= 9.0) {
          img(y, x) = 1.0;
          tgt(y, x) = 1.0;
        } else {
          img(y, x) = 0.1 * rng.uniform();
        }
      }
    out[k].image = img;
    out[k].target = tgt;
  }
  return out;
}

}  // namespace

TEST_CASE("the split shuffles, rounds and keeps both parts non-empty") {
  const std::vector<BlockPair> data = tagged_dataset(10, 4);
  const auto [train, val] = split(data, 0.2, 7);
  REQUIRE(train.size() == 8);  // round(0.8 * 10)
  REQUIRE(val.size() == 2);

  // every sample appears exactly once across the two parts
  std::multiset<double> seen;
  for (const BlockPair& p : train) seen.insert(p.image(0, 0));
  for (const BlockPair& p : val) seen.insert(p.image(0, 0));
  std::multiset<double> expect;
  for (size_t i = 0; i < 10; ++i) expect.insert(static_cast<double>(i));
  REQUIRE(seen == expect);

  // deterministic in the seed, and genuinely shuffled for this one
  const auto [train2, val2] = split(data, 0.2, 7);
  for (size_t i = 0; i < train.size(); ++i)
    REQUIRE(train[i].image(0, 0) == train2[i].image(0, 0));
  bool reordered = false;
  for (size_t i = 0; i < train.size(); ++i)
    if (train[i].image(0, 0) != static_cast<double>(i)) reordered = true;
  REQUIRE(reordered);

  const auto [t3, v3] = split(data, 0.2, 8);
  bool differs = v3.size() != val.size();
  for (size_t i = 0; !differs && i < val.size(); ++i)
    differs = val[i].image(0, 0) != v3[i].image(0, 0);
  REQUIRE(differs);
}

TEST_CASE("split sizes use round-half-away at the boundary") {
  // 4080 samples at 20% validation: 3264 train / 816 val
  const auto [train, val] = split(tagged_dataset(4080, 1), 0.2, 1);
  REQUIRE(train.size() == 3264);
  REQUIRE(val.size() == 816);

  // 0.5 fraction of 5: round(2.5) away from zero -> 3 train
  const auto [t5, v5] = split(tagged_dataset(5, 1), 0.5, 1);
  REQUIRE(t5.size() == 3);
  REQUIRE(v5.size() == 2);
}

TEST_CASE("degenerate splits are rejected") {
  REQUIRE_THROWS_AS(split(tagged_dataset(1, 2), 0.2, 0), Error);
  REQUIRE_THROWS_AS(split(tagged_dataset(10, 2), 0.0, 0), Error);
  REQUIRE_THROWS_AS(split(tagged_dataset(10, 2), 1.0, 0), Error);
  // 2 samples at 10%: round(1.8) = 2 leaves validation empty
  REQUIRE_THROWS_AS(split(tagged_dataset(2, 2), 0.1, 0), Error);
}

TEST_CASE("hard dice thresholds at 0.5 with ties foreground") {
  GridF p(1, 4);
  p.v = {0.5, 0.49, 0.9, 0.1};
  GridF t(1, 4);
  t.v = {1.0, 1.0, 0.0, 0.0};
  // predicted {0,2}, true {0,1}: inter 1, sizes 2 and 2
  REQUIRE(hard_dice(p, t) == 0.5);

  GridF zero(1, 4, 0.0);
  REQUIRE(hard_dice(zero, zero) == 1.0);
  REQUIRE(hard_dice(p, zero) == 0.0);
  GridF wrong(2, 2, 0.0);
  REQUIRE_THROWS_AS(hard_dice(p, wrong), Error);
}

TEST_CASE("training is reproducible and returns the best validation epoch") {
  const std::vector<BlockPair> data = blob_dataset(12, 16, 5);
  const auto [train, val] = split(data, 0.25, 3);

  TrainConfig cfg;
  cfg.arch = Arch::UNet;
  cfg.depth = 1;
  cfg.base_channels = 4;
  cfg.epochs = 12;
  cfg.lr = 5e-3;
  cfg.batch_size = 4;
  cfg.seed = 17;

  auto [net1, rep1] = train_block(train, val, cfg);
  auto [net2, rep2] = train_block(train, val, cfg);

  REQUIRE(rep1.epochs.size() == 12);
  for (size_t i = 0; i < 12; ++i) {
    REQUIRE(rep1.epochs[i].train_loss == rep2.epochs[i].train_loss);
    REQUIRE(rep1.epochs[i].val_dice == rep2.epochs[i].val_dice);
    REQUIRE(rep1.epochs[i].train_loss >= -1.0);
    REQUIRE(rep1.epochs[i].train_loss < 0.0);
  }
  REQUIRE(rep1.best_epoch == rep2.best_epoch);

  // the reported best is the max over epochs, first strict improvement wins
  double best = -1.0;
  int best_epoch = -1;
  for (const EpochStats& s : rep1.epochs)
    if (best_epoch < 0 || s.val_dice > best) {
      best = s.val_dice;
      best_epoch = s.epoch;
    }
  REQUIRE(rep1.best_epoch == best_epoch);
  REQUIRE(rep1.best_val_dice == best);

  // returned parameters are the best epoch's: re-scoring them reproduces it
  REQUIRE(validation_dice(net1, val) == rep1.best_val_dice);
  for (size_t i = 0; i < net1.layers.size(); ++i)
    REQUIRE(net1.layers[i].weight.value.data == net2.layers[i].weight.value.data);

  // on this separable toy problem training should actually work
  REQUIRE(rep1.best_val_dice > 0.5);
}

TEST_CASE("zero learning rate leaves the loss frozen across epochs") {
  // identical samples so reshuffling cannot change any floating-point sum
  std::vector<BlockPair> data(8, blob_dataset(1, 16, 11)[0]);
  const auto [train, val] = split(data, 0.25, 1);
  TrainConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  cfg.epochs = 3;
  cfg.lr = 0.0;
  cfg.batch_size = 100;  // one batch per epoch
  cfg.seed = 4;
  const auto [net, rep] = train_block(train, val, cfg);
  REQUIRE(rep.epochs[0].train_loss == rep.epochs[1].train_loss);
  REQUIRE(rep.epochs[1].train_loss == rep.epochs[2].train_loss);
  REQUIRE(rep.epochs[0].val_dice == rep.epochs[2].val_dice);
}

TEST_CASE("non-finite training data is caught as divergence") {
  std::vector<BlockPair> data = blob_dataset(8, 16, 2);
  // poison every target: the split must not be able to hide the bad sample
  for (BlockPair& p : data) p.target(3, 3) = std::numeric_limits<double>::quiet_NaN();
  const auto [train, val] = split(data, 0.25, 1);
  TrainConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  cfg.epochs = 1;
  cfg.batch_size = 100;
  try {
    train_block(train, val, cfg);
    FAIL("expected DivergenceDetected");
  } catch (const Error& e) {
    REQUIRE(e.code() == Err::DivergenceDetected);
  }
}

TEST_CASE("trainer validates its configuration") {
  const std::vector<BlockPair> data = blob_dataset(8, 16, 2);
  const auto [train, val] = split(data, 0.25, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  REQUIRE_THROWS_AS(train_block(train, val, cfg), Error);
  cfg.epochs = 1;
  cfg.batch_size = 0;
  REQUIRE_THROWS_AS(train_block(train, val, cfg), Error);
  REQUIRE_THROWS_AS(train_block({}, val, cfg), Error);
}
