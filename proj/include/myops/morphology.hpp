#pragma once

#include <vector>

#include "myops/common.hpp"

namespace myops {

inline GridF binarize(const GridF& g, double thresh = 0.5) {
  GridF out(g.rows, g.cols);
  for (size_t i = 0; i < g.v.size(); ++i) out.v[i] = g.v[i] >= thresh ? 1.0 : 0.0;
  return out;
}

namespace detail {

// 4-connected flood fill over cells where pred(index) holds, starting from
// every seed; marks visited cells in `seen`.
template <typename Pred>
void flood(const GridF& g, std::vector<int>& seen, std::vector<size_t>& stack, int mark,
           Pred pred) {
  const int h = g.rows, w = g.cols;
  while (!stack.empty()) {
    const size_t i = stack.back();
    stack.pop_back();
    const int y = static_cast<int>(i) / w;
    const int x = static_cast<int>(i) % w;
    const int ny[4] = {y - 1, y + 1, y, y};
    const int nx[4] = {x, x, x - 1, x + 1};
    for (int t = 0; t < 4; ++t) {
      if (ny[t] < 0 || ny[t] >= h || nx[t] < 0 || nx[t] >= w) continue;
      const size_t j = static_cast<size_t>(ny[t]) * w + nx[t];
      if (seen[j] == 0 && pred(j)) {
        seen[j] = mark;
        stack.push_back(j);
      }
    }
  }
}

}  // namespace detail

// Keeps only the largest 4-connected foreground component. Ties break toward
// the component discovered first in row-major order. All-background input
// passes through unchanged.
inline GridF largest_component(const GridF& g) {
  const int h = g.rows, w = g.cols;
  std::vector<int> comp(g.v.size(), 0);
  std::vector<size_t> stack;
  int next = 0;
  int best = 0;
  size_t best_size = 0;
  for (size_t i = 0; i < g.v.size(); ++i) {
    if (g.v[i] == 0.0 || comp[i] != 0) continue;
    ++next;
    comp[i] = next;
    stack.assign(1, i);
    size_t count = 1;
    while (!stack.empty()) {
      const size_t cur = stack.back();
      stack.pop_back();
      const int y = static_cast<int>(cur) / w;
      const int x = static_cast<int>(cur) % w;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int t = 0; t < 4; ++t) {
        if (ny[t] < 0 || ny[t] >= h || nx[t] < 0 || nx[t] >= w) continue;
        const size_t j = static_cast<size_t>(ny[t]) * w + nx[t];
        if (comp[j] == 0 && g.v[j] != 0.0) {
          comp[j] = next;
          stack.push_back(j);
          ++count;
        }
      }
    }
    if (count > best_size) {  // strict: earlier component wins ties
      best_size = count;
      best = next;
    }
  }
  GridF out(h, w);
  if (best == 0) return out;
  for (size_t i = 0; i < g.v.size(); ++i) out.v[i] = comp[i] == best ? 1.0 : 0.0;
  return out;
}

// Fills holes: background regions not reachable from the border become
// foreground.
inline GridF fill_holes(const GridF& g) {
  const int h = g.rows, w = g.cols;
  std::vector<int> outside(g.v.size(), 0);
  std::vector<size_t> stack;
  auto seed = [&](int y, int x) {
    const size_t i = static_cast<size_t>(y) * w + x;
    if (g.v[i] == 0.0 && outside[i] == 0) {
      outside[i] = 1;
      stack.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(0, x);
    seed(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    seed(y, 0);
    seed(y, w - 1);
  }
  detail::flood(g, outside, stack, 1, [&](size_t j) { return g.v[j] == 0.0; });
  GridF out(h, w);
  for (size_t i = 0; i < g.v.size(); ++i) out.v[i] = (g.v[i] != 0.0 || outside[i] == 0) ? 1.0 : 0.0;
  return out;
}

}  // namespace myops
