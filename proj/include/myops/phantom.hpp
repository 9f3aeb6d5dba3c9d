#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "myops/common.hpp"
#include "myops/preprocess.hpp"
#include "myops/rng.hpp"
#include "myops/volume.hpp"

namespace myops {

struct CaseData {
  std::array<Volume, 3> images;  // indexed by Seq
  Volume labels;
};

namespace detail {

inline bool angle_in(double a, double start, double width) {
  const double tau = 2.0 * M_PI;
  double d = std::fmod(a - start, tau);
  if (d < 0) d += tau;
  return d < width;
}

struct SliceGeometry {
  double cx, cy;
  double r_lv, r_epi;
  double me_start, me_width;
  double ms_start, ms_width;
  double rv_cx, rv_cy, r_rv;
};

inline SliceGeometry draw_geometry(Rng& rng, int size) {
  SliceGeometry g;
  const double s = static_cast<double>(size);
  g.cx = s / 2.0 + rng.uniform(-3.0, 3.0);
  g.cy = s / 2.0 + rng.uniform(-3.0, 3.0);
  g.r_lv = rng.uniform(0.12 * s, 0.17 * s);
  g.r_epi = g.r_lv + rng.uniform(0.06 * s, 0.09 * s);
  g.me_start = rng.uniform(0.0, 2.0 * M_PI);
  g.me_width = rng.uniform(M_PI / 3.0, 2.0 * M_PI / 3.0);
  g.ms_start = g.me_start + g.me_width / 4.0;
  g.ms_width = g.me_width / 2.0;
  g.r_rv = rng.uniform(0.11 * s, 0.14 * s);
  g.rv_cx = g.cx - (g.r_epi + 0.5 * g.r_rv);
  g.rv_cy = g.cy;
  return g;
}

inline int32_t classify(const SliceGeometry& g, int x, int y) {
  const double dx = x - g.cx, dy = y - g.cy;
  const double d = std::sqrt(dx * dx + dy * dy);
  if (d <= g.r_lv) return 500;
  if (d <= g.r_epi) {
    const double a = std::atan2(dy, dx);
    if (angle_in(a, g.ms_start, g.ms_width)) return 2221;
    if (angle_in(a, g.me_start, g.me_width)) return 1220;
    return 200;
  }
  const double rdx = x - g.rv_cx, rdy = y - g.rv_cy;
  if (std::sqrt(rdx * rdx + rdy * rdy) <= g.r_rv) return 600;
  return 0;
}

// Mean intensity per tissue, one row per sequence. Blood pools are bright on
// the cine-like sequence; scar and edema light up on the other two.
inline double tissue_level(Seq seq, int32_t code) {
  switch (seq) {
    case Seq::bSSFP:
      switch (code) {
        case 500: return 0.95;
        case 600: return 0.85;
        case 200:
        case 1220:
        case 2221: return 0.40;
        default: return 0.10;
      }
    case Seq::LGE:
      switch (code) {
        case 500:
        case 600: return 0.60;
        case 200: return 0.25;
        case 1220: return 0.75;
        case 2221: return 0.90;
        default: return 0.05;
      }
    case Seq::T2:
      switch (code) {
        case 500:
        case 600: return 0.70;
        case 200: return 0.35;
        case 1220: return 0.55;
        case 2221: return 0.95;
        default: return 0.05;
      }
  }
  return 0.0;
}

}  // namespace detail

// One synthetic case: lv blood pool disc, myocardial annulus with an edema
// wedge and a scar sub-wedge, rv crescent. Geometry jitters per slice; the
// three pseudo-sequences share geometry but use different contrast plus
// seeded noise. Intensities live on a 0..100-ish scale so normalization has
// something to do.
inline CaseData make_phantom_case(Rng& rng, int size, int slices) {
  require(size >= 32, Err::ConfigError, "phantom size must be >= 32");
  require(slices >= 1, Err::ConfigError, "phantom needs at least one slice");
  CaseData c;
  for (Volume& v : c.images) v = Volume(size, size, slices);
  c.labels = Volume(size, size, slices);
  c.labels.label_flag = true;
  for (int z = 0; z < slices; ++z) {
    const detail::SliceGeometry g = detail::draw_geometry(rng, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        c.labels.at(x, y, z) = static_cast<double>(detail::classify(g, x, y));
    for (int s = 0; s < 3; ++s) {
      Volume& img = c.images[static_cast<size_t>(s)];
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const int32_t code = static_cast<int32_t>(c.labels.at(x, y, z));
          const double base = detail::tissue_level(static_cast<Seq>(s), code);
          img.at(x, y, z) = (base + 0.02 * rng.normal()) * 100.0;
        }
      }
    }
  }
  return c;
}

inline std::vector<CaseData> make_phantom_dataset(int n_cases, int size, int slices,
                                                  uint64_t seed) {
  require(n_cases >= 1, Err::ConfigError, "need at least one case");
  std::vector<CaseData> out;
  out.reserve(static_cast<size_t>(n_cases));
  for (int i = 0; i < n_cases; ++i) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(i) + 1));
    out.push_back(make_phantom_case(rng, size, slices));
  }
  return out;
}

}  // namespace myops
