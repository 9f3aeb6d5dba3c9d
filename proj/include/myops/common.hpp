#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace myops {

enum class Err {
  BadMagic,
  UnsupportedDatatype,
  TruncatedPayload,
  UnsupportedDims,
  LabelCodeOverflow,
  DuplicateName,
  VersionMismatch,
  DimMismatch,
  InvalidLabelCode,
  NonSquare,
  ShapeMismatch,
  OddSpatialDims,
  IndivisibleDims,
  MissingSequence,
  MissingModel,
  TooFewSamples,
  DivergenceDetected,
  EmptyInput,
  ConfigError,
  StageFailure,
  UnknownCommand,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::BadMagic: return "BadMagic";
    case Err::UnsupportedDatatype: return "UnsupportedDatatype";
    case Err::TruncatedPayload: return "TruncatedPayload";
    case Err::UnsupportedDims: return "UnsupportedDims";
    case Err::LabelCodeOverflow: return "LabelCodeOverflow";
    case Err::DuplicateName: return "DuplicateName";
    case Err::VersionMismatch: return "VersionMismatch";
    case Err::DimMismatch: return "DimMismatch";
    case Err::InvalidLabelCode: return "InvalidLabelCode";
    case Err::NonSquare: return "NonSquare";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::OddSpatialDims: return "OddSpatialDims";
    case Err::IndivisibleDims: return "IndivisibleDims";
    case Err::MissingSequence: return "MissingSequence";
    case Err::MissingModel: return "MissingModel";
    case Err::TooFewSamples: return "TooFewSamples";
    case Err::DivergenceDetected: return "DivergenceDetected";
    case Err::EmptyInput: return "EmptyInput";
    case Err::ConfigError: return "ConfigError";
    case Err::StageFailure: return "StageFailure";
    case Err::UnknownCommand: return "UnknownCommand";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Err code, const std::string& what) {
  if (!cond) fail(code, what);
}

// Row-major 2D grid. (r, c) indexes row r (y), column c (x).
template <typename T>
struct Grid {
  int rows = 0, cols = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int r, int c, T fill = T{}) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }
  bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using GridF = Grid<double>;
using GridI = Grid<int32_t>;

// FNV-1a, used for content-addressing stage outputs.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace myops
