#include "catch_amalgamated.hpp"

#include <cstdio>
#include <filesystem>

#include "myops/gradcheck.hpp"
#include "myops/nn.hpp"
#include "myops/optimizer.hpp"

using namespace myops;

namespace {

Tensor random_input(int n, int h, int w, uint64_t seed) {
  Tensor t(n, 1, h, w);
  Rng rng(seed);
  for (double& x : t.data) x = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("per-op analytic gradients match finite differences") {
  for (const GradCheckResult& r : gradcheck_ops(1234)) {
    INFO(r.name << " rel err " << r.max_rel_err << " over " << r.checked << " elements");
    REQUIRE(r.checked > 0);
    REQUIRE(r.max_rel_err < 1e-6);
  }
}

TEST_CASE("whole-network gradients match finite differences") {
  for (Arch arch : {Arch::UNet, Arch::UNetPP}) {
    for (const GradCheckResult& r : gradcheck_network(77, arch)) {
      INFO(r.name << " rel err " << r.max_rel_err);
      REQUIRE(r.max_rel_err < 1e-5);
    }
  }
}

TEST_CASE("negative soft dice on hand-sized examples") {
  Tape tape;

  // one sample, two pixels: p = (0.5, 0.5), g = (1, 0)
  Tensor p(1, 1, 1, 2);
  p.data = {0.5, 0.5};
  Tensor g(1, 1, 1, 2);
  g.data = {1.0, 0.0};
  VarP pv = make_var(p);
  REQUIRE(soft_dice_loss(tape, pv, g) == Catch::Approx(-2.0 / 3.0).epsilon(1e-15));

  // perfect binary agreement saturates at -1
  Tensor ones(1, 1, 2, 2);
  ones.fill(1.0);
  REQUIRE(soft_dice_loss(tape, make_var(ones), ones) == -1.0);

  // empty prediction and empty target also score -1 through the smoothing
  Tensor zeros(1, 1, 2, 2);
  REQUIRE(soft_dice_loss(tape, make_var(zeros), zeros) == -1.0);

  tape.clear();
}

TEST_CASE("whole-batch and per-sample dice pool differently") {
  // sample 0 agrees perfectly, sample 1 is fully wrong
  Tensor p(2, 1, 1, 2);
  p.data = {1.0, 0.0, 1.0, 0.0};
  Tensor g(2, 1, 1, 2);
  g.data = {1.0, 0.0, 0.0, 1.0};

  Tape tape;
  const double batch = soft_dice_loss(tape, make_var(p), g, false);
  const double per = soft_dice_loss(tape, make_var(p), g, true);
  tape.clear();

  // batch: -(2*1+1)/(4+1); per sample: mean of -1 and -(0+1)/(2+1)
  REQUIRE(batch == Catch::Approx(-3.0 / 5.0).epsilon(1e-15));
  REQUIRE(per == Catch::Approx(-2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("loss stays within [-1, 0) on random probabilities") {
  Rng rng(5);
  Tensor p(2, 1, 8, 8);
  for (double& x : p.data) x = rng.uniform();
  Tensor g(2, 1, 8, 8);
  for (double& x : g.data) x = rng.uniform() < 0.5 ? 1.0 : 0.0;
  Tape tape;
  const double loss = soft_dice_loss(tape, make_var(p), g);
  tape.clear();
  REQUIRE(loss >= -1.0);
  REQUIRE(loss < 0.0);
}

TEST_CASE("initialization is seed-deterministic with zero biases") {
  Rng a(9), b(9);
  NetConfig nc{Arch::UNet, 2, 4};
  Network na(nc, a), nb(nc, b);
  REQUIRE(na.layers.size() == nb.layers.size());
  for (size_t i = 0; i < na.layers.size(); ++i) {
    REQUIRE(na.layers[i].weight.value.data == nb.layers[i].weight.value.data);
    const ConvLayer& l = na.layers[i];
    const double bound =
        std::sqrt(6.0 / (static_cast<double>(l.weight.value.c) * l.k * l.k));
    for (double wv : l.weight.value.data) REQUIRE(std::abs(wv) <= bound);
    for (double bv : l.bias.value.data) REQUIRE(bv == 0.0);
  }

  const Tensor in = random_input(1, 16, 16, 3);
  Tape ta, tb;
  REQUIRE(na.forward(ta, in)->val.data == nb.forward(tb, in)->val.data);
  ta.clear();
  tb.clear();
}

TEST_CASE("layer counts follow the construction recipe") {
  Rng rng(1);
  // plain: 2 per encoder level, 2 bottleneck, 3 per decoder level, 1 head
  REQUIRE(Network({Arch::UNet, 1, 2}, rng).layers.size() == 8);
  REQUIRE(Network({Arch::UNet, 2, 2}, rng).layers.size() == 13);
  // nested: 2 per backbone row, 3 per interior node, 1 head
  REQUIRE(Network({Arch::UNetPP, 1, 2}, rng).layers.size() == 8);
  REQUIRE(Network({Arch::UNetPP, 2, 2}, rng).layers.size() == 16);
}

TEST_CASE("forward treats batch samples independently") {
  Rng rng(21);
  Network net({Arch::UNetPP, 2, 4}, rng);

  const Tensor a = random_input(1, 16, 16, 100);
  const Tensor b = random_input(1, 16, 16, 200);
  Tensor ab(2, 1, 16, 16), ba(2, 1, 16, 16);
  std::copy(a.data.begin(), a.data.end(), ab.data.begin());
  std::copy(b.data.begin(), b.data.end(), ab.data.begin() + 256);
  std::copy(b.data.begin(), b.data.end(), ba.data.begin());
  std::copy(a.data.begin(), a.data.end(), ba.data.begin() + 256);

  Tape t1, t2;
  const Tensor out_ab = net.forward(t1, ab)->val;
  const Tensor out_ba = net.forward(t2, ba)->val;
  t1.clear();
  t2.clear();
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      REQUIRE(out_ab.at(0, 0, y, x) == out_ba.at(1, 0, y, x));
      REQUIRE(out_ab.at(1, 0, y, x) == out_ba.at(0, 0, y, x));
    }

  // sigmoid head keeps outputs in (0, 1)
  for (double v : out_ab.data) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("shape and config errors are rejected up front") {
  Rng rng(2);
  Network net({Arch::UNet, 2, 2}, rng);
  Tape tape;
  Tensor two_channel(1, 2, 16, 16);
  REQUIRE_THROWS_AS(net.forward(tape, two_channel), Error);
  Tensor indivisible(1, 1, 18, 18);
  try {
    net.forward(tape, indivisible);
    FAIL("expected IndivisibleDims");
  } catch (const Error& e) {
    REQUIRE(e.code() == Err::IndivisibleDims);
  }

  Tensor odd(1, 1, 5, 6);
  try {
    maxpool2(tape, make_var(odd));
    FAIL("expected OddSpatialDims");
  } catch (const Error& e) {
    REQUIRE(e.code() == Err::OddSpatialDims);
  }
  tape.clear();

  REQUIRE_THROWS_AS(Network({Arch::UNet, 5, 2}, rng), Error);
  REQUIRE_THROWS_AS(Network({Arch::UNet, 2, 0}, rng), Error);
  REQUIRE_THROWS_AS(arch_from_name("resnet"), Error);
  REQUIRE(arch_from_name("unet") == Arch::UNet);
  REQUIRE(arch_from_name("unetpp") == Arch::UNetPP);
}

TEST_CASE("checkpoints restore weights, moments and step bit-exactly") {
  Rng rng(31);
  Network net({Arch::UNetPP, 2, 3}, rng);

  // run two optimizer steps so the moment buffers are nonzero
  const Tensor in = random_input(2, 16, 16, 8);
  Tensor target(2, 1, 16, 16);
  Rng trng(9);
  for (double& x : target.data) x = trng.uniform() < 0.3 ? 1.0 : 0.0;
  AdamConfig ac;
  ac.lr = 1e-3;
  for (int it = 0; it < 2; ++it) {
    Tape tape;
    VarP out = net.forward(tape, in);
    net.zero_grad();
    soft_dice_loss(tape, out, target);
    tape.backward();
    adam_update(net, ac);
  }
  REQUIRE(net.step == 2);

  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "nn_roundtrip.ckpt";
  save_network(net, path.string());
  Network back = load_network(path.string());
  std::remove(path.string().c_str());

  REQUIRE(back.cfg.arch == net.cfg.arch);
  REQUIRE(back.cfg.depth == net.cfg.depth);
  REQUIRE(back.cfg.base_channels == net.cfg.base_channels);
  REQUIRE(back.step == 2);
  REQUIRE(back.layers.size() == net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    REQUIRE(back.layers[i].weight.value.data == net.layers[i].weight.value.data);
    REQUIRE(back.layers[i].weight.m.data == net.layers[i].weight.m.data);
    REQUIRE(back.layers[i].weight.v.data == net.layers[i].weight.v.data);
    REQUIRE(back.layers[i].bias.value.data == net.layers[i].bias.value.data);
    REQUIRE(back.layers[i].bias.m.data == net.layers[i].bias.m.data);
    REQUIRE(back.layers[i].bias.v.data == net.layers[i].bias.v.data);
  }

  Tape t1, t2;
  REQUIRE(net.forward(t1, in)->val.data == back.forward(t2, in)->val.data);
  t1.clear();
  t2.clear();
}

TEST_CASE("adam takes the textbook first step") {
  // single parameter x = 0 with gradient 1: after one update with bias
  // correction the step is exactly -lr, independent of the moment decay rates
  Param p(Tensor(1, 1, 1, 1));
  p.value.data[0] = 0.0;
  p.grad.data[0] = 1.0;
  AdamConfig ac;
  ac.lr = 0.01;
  adam_step(p, ac, 1);
  const double m_hat = 1.0;  // m = (1-b1)*1, corrected by (1-b1)
  const double v_hat = 1.0;
  const double expect = -ac.lr * m_hat / (std::sqrt(v_hat) + ac.eps);
  REQUIRE(p.value.data[0] == Catch::Approx(expect).epsilon(1e-12));
}
