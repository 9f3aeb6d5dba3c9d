#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "myops/common.hpp"
#include "myops/volume.hpp"

namespace myops {

struct OverlapCounts {
  uint64_t inter = 0;
  uint64_t auto_size = 0;
  uint64_t manual_size = 0;
};

// Convention for degenerate cases: both sets empty scores 1, exactly one
// empty scores 0. `empty_empty_is_one` can turn the first rule off, which
// then scores empty-vs-empty as 0 as well.
inline double dice_from_counts(const OverlapCounts& c, bool empty_empty_is_one = true) {
  if (c.auto_size == 0 && c.manual_size == 0) return empty_empty_is_one ? 1.0 : 0.0;
  return 2.0 * static_cast<double>(c.inter) /
         (static_cast<double>(c.auto_size) + static_cast<double>(c.manual_size));
}

inline double jaccard_from_counts(const OverlapCounts& c, bool empty_empty_is_one = true) {
  if (c.auto_size == 0 && c.manual_size == 0) return empty_empty_is_one ? 1.0 : 0.0;
  const uint64_t uni = c.auto_size + c.manual_size - c.inter;
  return static_cast<double>(c.inter) / static_cast<double>(uni);
}

// Voxel counts for one label code over whole volumes.
inline OverlapCounts count_overlap(const Volume& automatic, const Volume& manual,
                                   int32_t code) {
  require(automatic.same_dims(manual), Err::DimMismatch, "volumes disagree on dims");
  OverlapCounts c;
  for (size_t i = 0; i < automatic.voxels.size(); ++i) {
    const bool a = static_cast<int32_t>(automatic.voxels[i]) == code;
    const bool m = static_cast<int32_t>(manual.voxels[i]) == code;
    c.inter += a && m;
    c.auto_size += a;
    c.manual_size += m;
  }
  return c;
}

// Same, for a set of codes treated as one region.
inline OverlapCounts count_overlap(const Volume& automatic, const Volume& manual,
                                   const std::vector<int32_t>& codes) {
  require(automatic.same_dims(manual), Err::DimMismatch, "volumes disagree on dims");
  auto in_set = [&codes](double v) {
    const int32_t x = static_cast<int32_t>(v);
    for (int32_t c : codes)
      if (c == x) return true;
    return false;
  };
  OverlapCounts c;
  for (size_t i = 0; i < automatic.voxels.size(); ++i) {
    const bool a = in_set(automatic.voxels[i]);
    const bool m = in_set(manual.voxels[i]);
    c.inter += a && m;
    c.auto_size += a;
    c.manual_size += m;
  }
  return c;
}

inline double dice(const Volume& automatic, const Volume& manual, int32_t code,
                   bool empty_empty_is_one = true) {
  return dice_from_counts(count_overlap(automatic, manual, code), empty_empty_is_one);
}

inline double jaccard(const Volume& automatic, const Volume& manual, int32_t code,
                      bool empty_empty_is_one = true) {
  return jaccard_from_counts(count_overlap(automatic, manual, code), empty_empty_is_one);
}

struct Stat {
  double mean = 0.0;
  double stdev = 0.0;  // population
};

inline Stat mean_std(const std::vector<double>& xs) {
  require(!xs.empty(), Err::EmptyInput, "no values to aggregate");
  Stat s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += (x - s.mean) * (x - s.mean);
  s.stdev = std::sqrt(acc / static_cast<double>(xs.size()));
  return s;
}

}  // namespace myops
