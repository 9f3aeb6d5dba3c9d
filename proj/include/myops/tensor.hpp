#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "myops/common.hpp"

namespace myops {

// Dense (batch, channel, height, width) array of f64, row-major, w fastest.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

  size_t size() const { return data.size(); }
  size_t plane_size() const { return static_cast<size_t>(h) * w; }

  double* plane(int ni, int ci) {
    return data.data() + (static_cast<size_t>(ni) * c + ci) * plane_size();
  }
  const double* plane(int ni, int ci) const {
    return data.data() + (static_cast<size_t>(ni) * c + ci) * plane_size();
  }

  double& at(int ni, int ci, int y, int x) {
    return data[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x];
  }
  double at(int ni, int ci, int y, int x) const {
    return data[((static_cast<size_t>(ni) * c + ci) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void fill(double v) { data.assign(data.size(), v); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.n, t.c, t.h, t.w); }

inline Tensor grid_to_tensor(const GridF& g) {
  Tensor t(1, 1, g.rows, g.cols);
  t.data = g.v;
  return t;
}

inline GridF tensor_plane_to_grid(const Tensor& t, int ni, int ci) {
  GridF g(t.h, t.w);
  const double* p = t.plane(ni, ci);
  for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = p[i];
  return g;
}

}  // namespace myops
