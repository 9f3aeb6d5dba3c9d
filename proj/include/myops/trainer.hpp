#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "myops/blocks.hpp"
#include "myops/common.hpp"
#include "myops/nn.hpp"
#include "myops/optimizer.hpp"
#include "myops/rng.hpp"

namespace myops {

struct TrainConfig {
  int block_id = 0;
  Arch arch = Arch::UNet;
  int depth = 2;
  int base_channels = 32;
  int epochs = 500;
  double lr = 1e-5;
  int batch_size = 8;
  double val_fraction = 0.2;
  uint64_t seed = 0;
  bool per_sample_loss = false;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_dice = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_dice = 0.0;
};

// Seeded shuffle, then the first round((1-val_fraction)*n) samples train and
// the rest validate.
inline std::pair<std::vector<BlockPair>, std::vector<BlockPair>> split(
    const std::vector<BlockPair>& dataset, double val_fraction, uint64_t seed) {
  require(dataset.size() >= 2, Err::TooFewSamples, "need at least 2 samples to split");
  require(val_fraction > 0.0 && val_fraction < 1.0, Err::ConfigError,
          "val_fraction must be in (0,1)");
  std::vector<size_t> idx(dataset.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  const size_t n_train = static_cast<size_t>(
      std::llround((1.0 - val_fraction) * static_cast<double>(dataset.size())));
  require(n_train >= 1 && n_train < dataset.size(), Err::TooFewSamples,
          "split leaves an empty partition");
  std::pair<std::vector<BlockPair>, std::vector<BlockPair>> out;
  out.first.reserve(n_train);
  out.second.reserve(dataset.size() - n_train);
  for (size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(dataset[idx[i]]);
  return out;
}

// Hard dice at threshold 0.5 (ties foreground). Empty against empty counts
// as 1, one-sided empty as 0.
inline double hard_dice(const GridF& prob, const GridF& target) {
  require(prob.same_shape(target), Err::ShapeMismatch, "dice operands disagree on dims");
  uint64_t inter = 0, pa = 0, ma = 0;
  for (size_t i = 0; i < prob.v.size(); ++i) {
    const bool p = prob.v[i] >= 0.5;
    const bool m = target.v[i] != 0.0;
    inter += p && m;
    pa += p;
    ma += m;
  }
  if (pa == 0 && ma == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(pa + ma);
}

namespace detail {

inline Tensor batch_tensor(const std::vector<BlockPair>& data, const std::vector<size_t>& idx,
                           size_t lo, size_t hi, bool target) {
  const GridF& first = target ? data[idx[lo]].target : data[idx[lo]].image;
  Tensor t(static_cast<int>(hi - lo), 1, first.rows, first.cols);
  for (size_t i = lo; i < hi; ++i) {
    const GridF& g = target ? data[idx[i]].target : data[idx[i]].image;
    require(g.rows == first.rows && g.cols == first.cols, Err::DimMismatch,
            "batch samples disagree on dims");
    std::copy(g.v.begin(), g.v.end(), t.plane(static_cast<int>(i - lo), 0));
  }
  return t;
}

struct Snapshot {
  std::vector<Tensor> values, ms, vs;
  int64_t step = 0;
};

inline Snapshot take_snapshot(const Network& net) {
  Snapshot s;
  s.step = net.step;
  for (const ConvLayer& l : net.layers) {
    s.values.push_back(l.weight.value);
    s.values.push_back(l.bias.value);
    s.ms.push_back(l.weight.m);
    s.ms.push_back(l.bias.m);
    s.vs.push_back(l.weight.v);
    s.vs.push_back(l.bias.v);
  }
  return s;
}

inline void restore_snapshot(Network& net, const Snapshot& s) {
  net.step = s.step;
  size_t k = 0;
  for (ConvLayer& l : net.layers) {
    l.weight.value = s.values[k];
    l.weight.m = s.ms[k];
    l.weight.v = s.vs[k];
    ++k;
    l.bias.value = s.values[k];
    l.bias.m = s.ms[k];
    l.bias.v = s.vs[k];
    ++k;
  }
}

}  // namespace detail

inline double validation_dice(Network& net, const std::vector<BlockPair>& val) {
  double acc = 0.0;
  for (const BlockPair& p : val) {
    Tape tape;
    VarP out = net.forward(tape, grid_to_tensor(p.image));
    tape.clear();
    acc += hard_dice(tensor_plane_to_grid(out->val, 0, 0), p.target);
  }
  return acc / static_cast<double>(val.size());
}

// Epoch loop with seeded batch shuffling. The parameters scoring the best
// validation dice so far are kept (strict improvement) and restored at the
// end, so the returned network is the best epoch, not the last.
inline std::pair<Network, TrainReport> train_block(const std::vector<BlockPair>& train,
                                                   const std::vector<BlockPair>& val,
                                                   const TrainConfig& cfg) {
  require(!train.empty() && !val.empty(), Err::TooFewSamples, "empty train or val set");
  require(cfg.batch_size >= 1, Err::ConfigError, "batch_size must be >= 1");
  require(cfg.epochs >= 1, Err::ConfigError, "epochs must be >= 1");

  Rng root(cfg.seed);
  Rng init_rng = root.child(1);
  Rng shuffle_rng = root.child(2);

  NetConfig nc{cfg.arch, cfg.depth, cfg.base_channels};
  Network net(nc, init_rng);
  AdamConfig adam;
  adam.lr = cfg.lr;

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainReport report;
  detail::Snapshot best;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(cfg.batch_size)) {
      const size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch_size));
      Tensor input = detail::batch_tensor(train, order, lo, hi, false);
      Tensor target = detail::batch_tensor(train, order, lo, hi, true);
      Tape tape;
      VarP out = net.forward(tape, input);
      const double loss = soft_dice_loss(tape, out, target, cfg.per_sample_loss);
      require(std::isfinite(loss), Err::DivergenceDetected,
              "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                  std::to_string(batches));
      net.zero_grad();
      tape.backward();
      adam_update(net, adam);
      loss_sum += loss;
      ++batches;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.val_dice = validation_dice(net, val);
    report.epochs.push_back(stats);

    if (report.best_epoch < 0 || stats.val_dice > report.best_val_dice) {
      report.best_epoch = epoch;
      report.best_val_dice = stats.val_dice;
      best = detail::take_snapshot(net);
    }
  }
  detail::restore_snapshot(net, best);
  return {std::move(net), std::move(report)};
}

}  // namespace myops
