#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "myops/nn.hpp"
#include "myops/rng.hpp"

namespace myops {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  size_t checked = 0;
};

namespace detail {

inline double rel_err(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

// Scalar functional of a tensor: fixed pseudo-random projection, so every
// output element influences the loss with a distinct weight.
inline double project(const Tensor& t, const std::vector<double>& w) {
  double s = 0.0;
  for (size_t i = 0; i < t.size(); ++i) s += t.data[i] * w[i];
  return s;
}

inline std::vector<double> projection_weights(size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace detail

// Central finite differences on every element of `probe`, compared against
// the analytic gradient accumulated there by `run`. `run` must rebuild the
// graph from current values, seed the output grad with the projection
// weights, and run the tape backward; `probe` points at the storage being
// perturbed (an input tensor or a parameter value).
template <typename RunFn>
GradCheckResult check_gradient(const std::string& name, Tensor& probe, Tensor& grad_slot,
                               RunFn run, double fd_eps = 1e-6) {
  GradCheckResult res;
  res.name = name;

  grad_slot.fill(0.0);
  run(true);
  const Tensor analytic = grad_slot;

  for (size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe.data[i];
    probe.data[i] = orig + fd_eps;
    const double hi = run(false);
    probe.data[i] = orig - fd_eps;
    const double lo = run(false);
    probe.data[i] = orig;
    const double numeric = (hi - lo) / (2.0 * fd_eps);
    res.max_rel_err = std::max(res.max_rel_err, detail::rel_err(analytic.data[i], numeric));
    ++res.checked;
  }
  return res;
}

// Per-op checks on small random tensors. `run(true)` does the backward pass
// and returns the projected output; `run(false)` only evaluates.
inline std::vector<GradCheckResult> gradcheck_ops(uint64_t seed) {
  std::vector<GradCheckResult> results;
  Rng rng(seed);

  auto check_unary = [&](const std::string& name, auto make_op, int c, int h, int w) {
    Tensor in(2, c, h, w);
    for (double& x : in.data) x = rng.normal();
    VarP iv = make_var(in);
    std::vector<double> pw;
    auto run = [&](bool backward) {
      Tape tape;
      iv = make_var(in);
      VarP out = make_op(tape, iv);
      if (pw.empty()) pw = detail::projection_weights(out->val.size(), rng);
      const double loss = detail::project(out->val, pw);
      if (backward) {
        for (size_t i = 0; i < out->grad.size(); ++i) out->grad.data[i] = pw[i];
        tape.backward();
      }
      return loss;
    };
    // grad lands on the freshly made Var; copy it out through a thunk
    Tensor grad_slot(in.n, in.c, in.h, in.w);
    auto run2 = [&](bool backward) {
      const double loss = run(backward);
      if (backward) grad_slot = iv->grad;
      return loss;
    };
    results.push_back(check_gradient(name, in, grad_slot, run2));
  };

  check_unary("relu", [](Tape& t, VarP x) { return relu(t, x); }, 3, 4, 6);
  check_unary("sigmoid", [](Tape& t, VarP x) { return sigmoid(t, x); }, 2, 4, 4);
  check_unary("maxpool2", [](Tape& t, VarP x) { return maxpool2(t, x); }, 2, 6, 4);
  check_unary("upsample2", [](Tape& t, VarP x) { return upsample2(t, x); }, 2, 3, 5);

  // conv: check input, weight and bias gradients
  for (int k : {1, 3}) {
    Tensor in(2, 3, 5, 6);
    for (double& x : in.data) x = rng.normal();
    Param weight(Tensor(4, 3, k, k));
    for (double& x : weight.value.data) x = rng.normal() * 0.3;
    Param bias(Tensor(4, 1, 1, 1));
    for (double& x : bias.value.data) x = rng.normal() * 0.1;

    VarP iv;
    std::vector<double> pw;
    auto run = [&](bool backward) {
      Tape tape;
      iv = make_var(in);
      VarP out = conv2d(tape, iv, weight, bias, k);
      if (pw.empty()) pw = detail::projection_weights(out->val.size(), rng);
      const double loss = detail::project(out->val, pw);
      if (backward) {
        weight.zero_grad();
        bias.zero_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) out->grad.data[i] = pw[i];
        tape.backward();
      }
      return loss;
    };
    const std::string tag = "conv" + std::to_string(k) + "x" + std::to_string(k);
    {
      Tensor grad_slot(in.n, in.c, in.h, in.w);
      auto run2 = [&](bool backward) {
        const double loss = run(backward);
        if (backward) grad_slot = iv->grad;
        return loss;
      };
      results.push_back(check_gradient(tag + ".input", in, grad_slot, run2));
    }
    results.push_back(check_gradient(tag + ".weight", weight.value, weight.grad, run));
    results.push_back(check_gradient(tag + ".bias", bias.value, bias.grad, run));
  }

  // concat: both inputs
  {
    Tensor a(2, 2, 4, 4), b(2, 3, 4, 4);
    for (double& x : a.data) x = rng.normal();
    for (double& x : b.data) x = rng.normal();
    VarP av, bv;
    std::vector<double> pw;
    auto run = [&](bool backward) {
      Tape tape;
      av = make_var(a);
      bv = make_var(b);
      VarP out = concat(tape, {av, bv});
      if (pw.empty()) pw = detail::projection_weights(out->val.size(), rng);
      const double loss = detail::project(out->val, pw);
      if (backward) {
        for (size_t i = 0; i < out->grad.size(); ++i) out->grad.data[i] = pw[i];
        tape.backward();
      }
      return loss;
    };
    Tensor ga(a.n, a.c, a.h, a.w), gb(b.n, b.c, b.h, b.w);
    auto run_a = [&](bool backward) {
      const double loss = run(backward);
      if (backward) ga = av->grad;
      return loss;
    };
    auto run_b = [&](bool backward) {
      const double loss = run(backward);
      if (backward) gb = bv->grad;
      return loss;
    };
    results.push_back(check_gradient("concat.first", a, ga, run_a));
    results.push_back(check_gradient("concat.second", b, gb, run_b));
  }

  // dice loss straight on probabilities
  {
    Tensor p(2, 1, 4, 4);
    for (double& x : p.data) x = 0.2 + 0.6 * rng.uniform();
    Tensor g(2, 1, 4, 4);
    for (double& x : g.data) x = rng.uniform() < 0.4 ? 1.0 : 0.0;
    for (bool per_sample : {false, true}) {
      VarP pv;
      auto run = [&](bool backward) {
        Tape tape;
        pv = make_var(p);
        const double loss = soft_dice_loss(tape, pv, g, per_sample);
        if (backward) tape.backward();
        return loss;
      };
      Tensor gp(p.n, p.c, p.h, p.w);
      auto run2 = [&](bool backward) {
        const double loss = run(backward);
        if (backward) gp = pv->grad;
        return loss;
      };
      results.push_back(check_gradient(per_sample ? "dice.per_sample" : "dice.batch", p, gp, run2));
    }
  }

  return results;
}

// Whole-model check: tiny net, a couple of parameters probed per layer would
// still be slow, so perturb every parameter of a very small configuration on
// a small input and compare against the analytic gradient of the dice loss.
inline std::vector<GradCheckResult> gradcheck_network(uint64_t seed, Arch arch) {
  Rng rng(seed);
  NetConfig nc;
  nc.arch = arch;
  nc.depth = 1;
  nc.base_channels = 4;
  Network net(nc, rng);

  Tensor input(1, 1, 16, 16);
  for (double& x : input.data) x = rng.normal();
  Tensor target(1, 1, 16, 16);
  for (double& x : target.data) x = rng.uniform() < 0.3 ? 1.0 : 0.0;

  auto run = [&](bool backward) {
    Tape tape;
    VarP out = net.forward(tape, input);
    const double loss = soft_dice_loss(tape, out, target);
    if (backward) {
      net.zero_grad();
      tape.backward();
    }
    return loss;
  };

  std::vector<GradCheckResult> results;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const std::string base = arch_name(arch) + ".layer" + std::to_string(i);
    results.push_back(check_gradient(base + ".weight", net.layers[i].weight.value,
                                     net.layers[i].weight.grad, run));
    results.push_back(check_gradient(base + ".bias", net.layers[i].bias.value,
                                     net.layers[i].bias.grad, run));
  }
  return results;
}

}  // namespace myops
