#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "myops/common.hpp"
#include "myops/container.hpp"
#include "myops/rng.hpp"
#include "myops/tensor.hpp"

#include "json.hpp"

namespace myops {

// A value in the computation graph together with its gradient accumulator.
struct Var {
  Tensor val;
  Tensor grad;
  explicit Var(Tensor t) : val(std::move(t)), grad(val.n, val.c, val.h, val.w) {}
};
using VarP = std::shared_ptr<Var>;

inline VarP make_var(Tensor t) { return std::make_shared<Var>(std::move(t)); }

// Reverse-mode tape: forward ops push their backward closure, backward()
// runs them last to first. Closures own shared_ptrs to every Var they touch.
class Tape {
 public:
  void record(std::function<void()> f) { ops_.push_back(std::move(f)); }
  void backward() {
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
  }
  void clear() { ops_.clear(); }
  size_t size() const { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
};

struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
  explicit Param(Tensor t)
      : value(std::move(t)),
        grad(value.n, value.c, value.h, value.w),
        m(value.n, value.c, value.h, value.w),
        v(value.n, value.c, value.h, value.w) {}
  size_t size() const { return value.size(); }
  void zero_grad() { grad.fill(0.0); }
};

namespace ops {

// 3x3 or 1x1 convolution, stride 1, zero padding k/2 so spatial dims are
// preserved. Kernel layout: weight(cout, cin, k, k), bias(cout, 1, 1, 1).
inline void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, int k,
                           Tensor& out) {
  const int pad = k / 2;
  const int h = in.h, wd = in.w;
  for (int n = 0; n < in.n; ++n) {
    for (int co = 0; co < out.c; ++co) {
      double* op = out.plane(n, co);
      const double bias = b.data[static_cast<size_t>(co)];
      std::fill(op, op + out.plane_size(), bias);
      for (int ci = 0; ci < in.c; ++ci) {
        const double* ip = in.plane(n, ci);
        const double* wp = w.plane(co, ci);
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const double wv = wp[ky * k + kx];
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
            for (int y = y0; y < y1; ++y) {
              double* orow = op + static_cast<size_t>(y) * wd;
              const double* irow = ip + static_cast<size_t>(y + dy) * wd + dx;
              for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
}

inline void conv2d_backward(const Tensor& in, const Tensor& w, int k, const Tensor& gout,
                            Tensor& gin, Tensor& gw, Tensor& gb) {
  const int pad = k / 2;
  const int h = in.h, wd = in.w;
  for (int n = 0; n < in.n; ++n) {
    for (int co = 0; co < gout.c; ++co) {
      const double* gp = gout.plane(n, co);
      double bsum = 0.0;
      for (size_t i = 0; i < gout.plane_size(); ++i) bsum += gp[i];
      gb.data[static_cast<size_t>(co)] += bsum;
      for (int ci = 0; ci < in.c; ++ci) {
        const double* ip = in.plane(n, ci);
        double* gip = gin.plane(n, ci);
        const double* wp = w.plane(co, ci);
        double* gwp = gw.plane(co, ci);
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const double wv = wp[ky * k + kx];
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
            double wsum = 0.0;
            for (int y = y0; y < y1; ++y) {
              const double* grow = gp + static_cast<size_t>(y) * wd;
              const double* irow = ip + static_cast<size_t>(y + dy) * wd + dx;
              double* girow = gip + static_cast<size_t>(y + dy) * wd + dx;
              for (int x = x0; x < x1; ++x) {
                wsum += grow[x] * irow[x];
                girow[x] += wv * grow[x];
              }
            }
            gwp[ky * k + kx] += wsum;
          }
        }
      }
    }
  }
}

}  // namespace ops

inline VarP conv2d(Tape& tape, const VarP& in, Param& weight, Param& bias, int k) {
  require(k == 1 || k == 3, Err::ConfigError, "kernel size must be 1 or 3");
  require(weight.value.c == in->val.c, Err::DimMismatch, "conv input channels mismatch");
  VarP out = make_var(Tensor(in->val.n, weight.value.n, in->val.h, in->val.w));
  ops::conv2d_forward(in->val, weight.value, bias.value, k, out->val);
  Param* wp = &weight;
  Param* bp = &bias;
  tape.record([in, out, wp, bp, k]() {
    ops::conv2d_backward(in->val, wp->value, k, out->grad, in->grad, wp->grad, bp->grad);
  });
  return out;
}

inline VarP relu(Tape& tape, const VarP& in) {
  VarP out = make_var(zeros_like(in->val));
  for (size_t i = 0; i < in->val.size(); ++i)
    out->val.data[i] = in->val.data[i] > 0.0 ? in->val.data[i] : 0.0;
  tape.record([in, out]() {
    for (size_t i = 0; i < in->val.size(); ++i)
      if (in->val.data[i] > 0.0) in->grad.data[i] += out->grad.data[i];
  });
  return out;
}

inline VarP sigmoid(Tape& tape, const VarP& in) {
  VarP out = make_var(zeros_like(in->val));
  for (size_t i = 0; i < in->val.size(); ++i)
    out->val.data[i] = 1.0 / (1.0 + std::exp(-in->val.data[i]));
  tape.record([in, out]() {
    for (size_t i = 0; i < in->val.size(); ++i) {
      const double s = out->val.data[i];
      in->grad.data[i] += out->grad.data[i] * s * (1.0 - s);
    }
  });
  return out;
}

// 2x2 max pooling, stride 2. Even spatial dims required. Ties go to the
// first window element in (top-left, top-right, bottom-left, bottom-right)
// order, and backward routes the gradient there alone.
inline VarP maxpool2(Tape& tape, const VarP& in) {
  require(in->val.h % 2 == 0 && in->val.w % 2 == 0, Err::OddSpatialDims,
          "pooling needs even spatial dims");
  const int oh = in->val.h / 2, ow = in->val.w / 2;
  VarP out = make_var(Tensor(in->val.n, in->val.c, oh, ow));
  auto argmax = std::make_shared<std::vector<uint32_t>>(out->val.size());
  for (int n = 0; n < in->val.n; ++n) {
    for (int c = 0; c < in->val.c; ++c) {
      const double* ip = in->val.plane(n, c);
      double* op = out->val.plane(n, c);
      uint32_t* ap = argmax->data() +
                     (static_cast<size_t>(n) * in->val.c + c) * out->val.plane_size();
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const size_t base = static_cast<size_t>(2 * y) * in->val.w + 2 * x;
          const size_t cand[4] = {base, base + 1, base + in->val.w, base + in->val.w + 1};
          size_t best = cand[0];
          for (int t = 1; t < 4; ++t)
            if (ip[cand[t]] > ip[best]) best = cand[t];
          op[static_cast<size_t>(y) * ow + x] = ip[best];
          ap[static_cast<size_t>(y) * ow + x] = static_cast<uint32_t>(best);
        }
      }
    }
  }
  tape.record([in, out, argmax]() {
    const size_t psz = out->val.plane_size();
    for (int n = 0; n < in->val.n; ++n) {
      for (int c = 0; c < in->val.c; ++c) {
        double* gip = in->grad.plane(n, c);
        const double* gop = out->grad.plane(n, c);
        const uint32_t* ap =
            argmax->data() + (static_cast<size_t>(n) * in->val.c + c) * psz;
        for (size_t i = 0; i < psz; ++i) gip[ap[i]] += gop[i];
      }
    }
  });
  return out;
}

// Nearest-neighbour 2x upsampling.
inline VarP upsample2(Tape& tape, const VarP& in) {
  const int oh = in->val.h * 2, ow = in->val.w * 2;
  VarP out = make_var(Tensor(in->val.n, in->val.c, oh, ow));
  for (int n = 0; n < in->val.n; ++n) {
    for (int c = 0; c < in->val.c; ++c) {
      const double* ip = in->val.plane(n, c);
      double* op = out->val.plane(n, c);
      for (int y = 0; y < oh; ++y) {
        const double* irow = ip + static_cast<size_t>(y / 2) * in->val.w;
        double* orow = op + static_cast<size_t>(y) * ow;
        for (int x = 0; x < ow; ++x) orow[x] = irow[x / 2];
      }
    }
  }
  tape.record([in, out]() {
    const int ow2 = out->val.w;
    for (int n = 0; n < in->val.n; ++n) {
      for (int c = 0; c < in->val.c; ++c) {
        double* gip = in->grad.plane(n, c);
        const double* gop = out->grad.plane(n, c);
        for (int y = 0; y < out->val.h; ++y) {
          double* girow = gip + static_cast<size_t>(y / 2) * in->val.w;
          const double* gorow = gop + static_cast<size_t>(y) * ow2;
          for (int x = 0; x < ow2; ++x) girow[x / 2] += gorow[x];
        }
      }
    }
  });
  return out;
}

// Channel concatenation, first argument's channels first.
inline VarP concat(Tape& tape, const std::vector<VarP>& parts) {
  require(!parts.empty(), Err::EmptyInput, "concat needs at least one input");
  int ctot = 0;
  for (const VarP& p : parts) {
    require(p->val.n == parts[0]->val.n && p->val.h == parts[0]->val.h &&
                p->val.w == parts[0]->val.w,
            Err::DimMismatch, "concat inputs disagree on dims");
    ctot += p->val.c;
  }
  VarP out = make_var(Tensor(parts[0]->val.n, ctot, parts[0]->val.h, parts[0]->val.w));
  for (int n = 0; n < out->val.n; ++n) {
    int co = 0;
    for (const VarP& p : parts) {
      for (int c = 0; c < p->val.c; ++c, ++co) {
        const double* ip = p->val.plane(n, c);
        std::copy(ip, ip + p->val.plane_size(), out->val.plane(n, co));
      }
    }
  }
  tape.record([parts, out]() {
    for (int n = 0; n < out->val.n; ++n) {
      int co = 0;
      for (const VarP& p : parts) {
        for (int c = 0; c < p->val.c; ++c, ++co) {
          double* gip = p->grad.plane(n, c);
          const double* gop = out->grad.plane(n, co);
          for (size_t i = 0; i < p->val.plane_size(); ++i) gip[i] += gop[i];
        }
      }
    }
  });
  return out;
}

constexpr double kDiceEps = 1.0;

namespace detail {
inline double dice_term(const double* p, const double* g, size_t len, double* gp,
                        bool accumulate_grad) {
  double inter = 0.0, total = 0.0;
  for (size_t i = 0; i < len; ++i) {
    inter += p[i] * g[i];
    total += p[i] + g[i];
  }
  const double num = 2.0 * inter + kDiceEps;
  const double den = total + kDiceEps;
  if (accumulate_grad) {
    // d(-num/den)/dp_i = (num - 2*g_i*den) / den^2
    const double inv2 = 1.0 / (den * den);
    for (size_t i = 0; i < len; ++i) gp[i] += (num - 2.0 * g[i] * den) * inv2;
  }
  return -num / den;
}
}  // namespace detail

// Negative soft Dice between a sigmoid output and a binary target, smoothed
// by 1 in numerator and denominator. per_sample averages one Dice term per
// batch element instead of pooling the whole batch into one term.
inline double soft_dice_loss(Tape& tape, const VarP& pred, const Tensor& target,
                             bool per_sample = false) {
  require(pred->val.same_shape(target), Err::DimMismatch, "loss target shape mismatch");
  const Tensor* tgt = &target;
  double loss;
  if (per_sample) {
    const size_t per = pred->val.size() / static_cast<size_t>(pred->val.n);
    double acc = 0.0;
    for (int n = 0; n < pred->val.n; ++n)
      acc += detail::dice_term(pred->val.data.data() + per * n, tgt->data.data() + per * n,
                               per, nullptr, false);
    loss = acc / pred->val.n;
  } else {
    loss = detail::dice_term(pred->val.data.data(), tgt->data.data(), pred->val.size(),
                             nullptr, false);
  }
  Tensor target_copy = target;
  tape.record([pred, target_copy = std::move(target_copy), per_sample]() {
    if (per_sample) {
      const size_t per = pred->val.size() / static_cast<size_t>(pred->val.n);
      Tensor tmp(1, 1, 1, static_cast<int>(per));
      for (int n = 0; n < pred->val.n; ++n) {
        tmp.fill(0.0);
        detail::dice_term(pred->val.data.data() + per * n, target_copy.data.data() + per * n,
                          per, tmp.data.data(), true);
        for (size_t i = 0; i < per; ++i)
          pred->grad.data[per * n + i] += tmp.data[i] / pred->val.n;
      }
    } else {
      detail::dice_term(pred->val.data.data(), target_copy.data.data(), pred->val.size(),
                        pred->grad.data.data(), true);
    }
  });
  return loss;
}

enum class Arch { UNet, UNetPP };

inline std::string arch_name(Arch a) { return a == Arch::UNet ? "unet" : "unetpp"; }
inline Arch arch_from_name(const std::string& s) {
  if (s == "unet") return Arch::UNet;
  if (s == "unetpp") return Arch::UNetPP;
  fail(Err::ConfigError, "unknown architecture: " + s);
}

struct NetConfig {
  Arch arch = Arch::UNet;
  int depth = 2;
  int base_channels = 32;
};

struct ConvLayer {
  Param weight;
  Param bias;
  int k;
  ConvLayer(Tensor w, Tensor b, int kk) : weight(std::move(w)), bias(std::move(b)), k(kk) {}
};

// Encoder/decoder segmentation net over single-channel input, sigmoid head.
// Layers are created in a fixed order so the Adam state and the checkpoint
// records line up by index. Weights start He-uniform (bound sqrt(6/fan_in)),
// biases at zero.
class Network {
 public:
  NetConfig cfg;
  std::vector<ConvLayer> layers;
  int64_t step = 0;

  Network(NetConfig config, Rng& rng) : cfg(config) {
    require(cfg.depth >= 1 && cfg.depth <= 4, Err::ConfigError, "depth must be in [1,4]");
    require(cfg.base_channels >= 1, Err::ConfigError, "base_channels must be >= 1");
    if (cfg.arch == Arch::UNet)
      build_unet(rng);
    else
      build_unetpp(rng);
  }

  VarP forward(Tape& tape, const Tensor& input) {
    require(input.c == 1, Err::DimMismatch, "network expects single-channel input");
    require(input.h % (1 << cfg.depth) == 0 && input.w % (1 << cfg.depth) == 0,
            Err::IndivisibleDims, "spatial dims must divide by 2^depth");
    VarP x = make_var(input);
    return cfg.arch == Arch::UNet ? forward_unet(tape, x) : forward_unetpp(tape, x);
  }

  void zero_grad() {
    for (ConvLayer& l : layers) {
      l.weight.zero_grad();
      l.bias.zero_grad();
    }
  }

  size_t param_count() const {
    size_t total = 0;
    for (const ConvLayer& l : layers) total += l.weight.size() + l.bias.size();
    return total;
  }

 private:
  int ch(int level) const { return cfg.base_channels << level; }

  void add_conv(Rng& rng, int cin, int cout, int k) {
    Tensor w(cout, cin, k, k);
    const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * k * k));
    for (double& x : w.data) x = rng.uniform(-bound, bound);
    layers.emplace_back(std::move(w), Tensor(cout, 1, 1, 1), k);
  }

  VarP block(Tape& tape, VarP x, int& li) {
    x = relu(tape, conv2d(tape, x, layers[li].weight, layers[li].bias, layers[li].k));
    ++li;
    x = relu(tape, conv2d(tape, x, layers[li].weight, layers[li].bias, layers[li].k));
    ++li;
    return x;
  }

  VarP upconv(Tape& tape, VarP x, int& li) {
    x = upsample2(tape, x);
    x = relu(tape, conv2d(tape, x, layers[li].weight, layers[li].bias, layers[li].k));
    ++li;
    return x;
  }

  VarP head(Tape& tape, VarP x, int& li) {
    x = conv2d(tape, x, layers[li].weight, layers[li].bias, layers[li].k);
    ++li;
    return sigmoid(tape, x);
  }

  // Layer order: encoder blocks top to bottom, bottleneck, then per decoder
  // level one upconv plus one block, finally the 1x1 head.
  void build_unet(Rng& rng) {
    int cin = 1;
    for (int i = 0; i < cfg.depth; ++i) {
      add_conv(rng, cin, ch(i), 3);
      add_conv(rng, ch(i), ch(i), 3);
      cin = ch(i);
    }
    add_conv(rng, cin, ch(cfg.depth), 3);
    add_conv(rng, ch(cfg.depth), ch(cfg.depth), 3);
    for (int i = cfg.depth - 1; i >= 0; --i) {
      add_conv(rng, ch(i + 1), ch(i), 3);      // upconv
      add_conv(rng, 2 * ch(i), ch(i), 3);      // after skip concat
      add_conv(rng, ch(i), ch(i), 3);
    }
    add_conv(rng, ch(0), 1, 1);
  }

  VarP forward_unet(Tape& tape, VarP x) {
    int li = 0;
    std::vector<VarP> skips;
    for (int i = 0; i < cfg.depth; ++i) {
      x = block(tape, x, li);
      skips.push_back(x);
      x = maxpool2(tape, x);
    }
    x = block(tape, x, li);
    for (int i = cfg.depth - 1; i >= 0; --i) {
      x = upconv(tape, x, li);
      x = concat(tape, {skips[static_cast<size_t>(i)], x});
      x = block(tape, x, li);
    }
    return head(tape, x, li);
  }

  // Nested variant: grid of nodes X[i][j] (row i, column j, i+j <= depth).
  // Column 0 is the plain encoder backbone. A node in column j >= 1 takes
  // every earlier node of its row plus an upconv of its lower-left
  // neighbour. Creation order: backbone top to bottom, then columns left to
  // right, rows top to bottom inside a column.
  void build_unetpp(Rng& rng) {
    int cin = 1;
    for (int i = 0; i <= cfg.depth; ++i) {
      add_conv(rng, cin, ch(i), 3);
      add_conv(rng, ch(i), ch(i), 3);
      cin = ch(i);
    }
    for (int j = 1; j <= cfg.depth; ++j) {
      for (int i = 0; i + j <= cfg.depth; ++i) {
        add_conv(rng, ch(i + 1), ch(i), 3);            // upconv edge
        add_conv(rng, (j + 1) * ch(i), ch(i), 3);
        add_conv(rng, ch(i), ch(i), 3);
      }
    }
    add_conv(rng, ch(0), 1, 1);
  }

  VarP forward_unetpp(Tape& tape, VarP x) {
    int li = 0;
    const int d = cfg.depth;
    std::vector<std::vector<VarP>> node(static_cast<size_t>(d) + 1);
    for (int i = 0; i <= d; ++i) {
      if (i > 0) x = maxpool2(tape, x);
      x = block(tape, x, li);
      node[static_cast<size_t>(i)].push_back(x);
    }
    for (int j = 1; j <= d; ++j) {
      for (int i = 0; i + j <= d; ++i) {
        VarP up = upconv(tape, node[static_cast<size_t>(i) + 1][static_cast<size_t>(j) - 1], li);
        std::vector<VarP> parts(node[static_cast<size_t>(i)].begin(),
                                node[static_cast<size_t>(i)].end());
        parts.push_back(up);
        VarP y = block(tape, concat(tape, parts), li);
        node[static_cast<size_t>(i)].push_back(y);
      }
    }
    return head(tape, node[0][static_cast<size_t>(d)], li);
  }
};

inline Tensor tensor_from_record(const Record& r) {
  require(r.dims.size() == 4, Err::DimMismatch, "checkpoint tensor must be rank 4");
  Tensor t(static_cast<int>(r.dims[0]), static_cast<int>(r.dims[1]),
           static_cast<int>(r.dims[2]), static_cast<int>(r.dims[3]));
  std::vector<double> vals = record_as_f64(r);
  require(vals.size() == t.size(), Err::DimMismatch, "checkpoint tensor size mismatch");
  t.data = std::move(vals);
  return t;
}

inline Record tensor_to_record(const std::string& name, const Tensor& t) {
  return make_record_f64(name,
                         {static_cast<uint64_t>(t.n), static_cast<uint64_t>(t.c),
                          static_cast<uint64_t>(t.h), static_cast<uint64_t>(t.w)},
                         t.data);
}

inline void save_network(const Network& net, const std::string& path) {
  std::vector<Record> recs;
  nlohmann::json cfg = {{"arch", arch_name(net.cfg.arch)},
                        {"depth", net.cfg.depth},
                        {"base_channels", net.cfg.base_channels}};
  const std::string cfg_text = cfg.dump();
  recs.push_back(make_record_u8("config", {cfg_text.size()},
                                std::vector<uint8_t>(cfg_text.begin(), cfg_text.end())));
  recs.push_back(make_record_i64("step", net.step));
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const ConvLayer& l = net.layers[i];
    const std::string base = "layer" + std::to_string(i);
    recs.push_back(tensor_to_record(base + ".weight", l.weight.value));
    recs.push_back(tensor_to_record(base + ".weight.m", l.weight.m));
    recs.push_back(tensor_to_record(base + ".weight.v", l.weight.v));
    recs.push_back(tensor_to_record(base + ".bias", l.bias.value));
    recs.push_back(tensor_to_record(base + ".bias.m", l.bias.m));
    recs.push_back(tensor_to_record(base + ".bias.v", l.bias.v));
  }
  write_bytes(path, write_container(recs));
}

inline Network load_network(const std::string& path) {
  const std::vector<Record> recs = read_container(read_bytes(path));
  const Record& cr = get_record(recs, "config");
  const nlohmann::json cfg =
      nlohmann::json::parse(std::string(cr.payload.begin(), cr.payload.end()));
  NetConfig nc;
  nc.arch = arch_from_name(cfg.at("arch").get<std::string>());
  nc.depth = cfg.at("depth").get<int>();
  nc.base_channels = cfg.at("base_channels").get<int>();
  Rng dummy(0);
  Network net(nc, dummy);
  net.step = record_as_i64(get_record(recs, "step"));
  auto load_param = [&recs](Param& p, const std::string& base) {
    Tensor v = tensor_from_record(get_record(recs, base));
    require(v.same_shape(p.value), Err::DimMismatch, "checkpoint shape mismatch at " + base);
    p.value = std::move(v);
    p.m = tensor_from_record(get_record(recs, base + ".m"));
    p.v = tensor_from_record(get_record(recs, base + ".v"));
    require(p.m.same_shape(p.value) && p.v.same_shape(p.value), Err::DimMismatch,
            "checkpoint moment shape mismatch at " + base);
  };
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const std::string base = "layer" + std::to_string(i);
    load_param(net.layers[i].weight, base + ".weight");
    load_param(net.layers[i].bias, base + ".bias");
  }
  return net;
}

}  // namespace myops
