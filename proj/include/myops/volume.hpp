#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "myops/common.hpp"

namespace myops {

// 3D scalar grid, voxels stored x-fastest. label_flag marks integer label volumes.
struct Volume {
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> voxels;
  bool label_flag = false;

  Volume() = default;
  Volume(int nx_, int ny_, int nz_)
      : nx(nx_), ny(ny_), nz(nz_), voxels(static_cast<size_t>(nx_) * ny_ * nz_, 0.0) {}

  size_t size() const { return voxels.size(); }

  double& at(int x, int y, int z) {
    return voxels[static_cast<size_t>(z) * ny * nx + static_cast<size_t>(y) * nx + x];
  }
  double at(int x, int y, int z) const {
    return voxels[static_cast<size_t>(z) * ny * nx + static_cast<size_t>(y) * nx + x];
  }

  bool same_dims(const Volume& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }

  friend bool operator==(const Volume&, const Volume&) = default;
};

inline GridF slice_of(const Volume& v, int z) {
  GridF g(v.ny, v.nx);
  for (int y = 0; y < v.ny; ++y)
    for (int x = 0; x < v.nx; ++x) g(y, x) = v.at(x, y, z);
  return g;
}

inline void set_slice(Volume& v, int z, const GridF& g) {
  require(g.rows == v.ny && g.cols == v.nx, Err::DimMismatch, "slice dims do not match volume");
  for (int y = 0; y < v.ny; ++y)
    for (int x = 0; x < v.nx; ++x) v.at(x, y, z) = g(y, x);
}

inline const std::array<int32_t, 6>& label_codes() {
  static const std::array<int32_t, 6> codes = {0, 200, 500, 600, 1220, 2221};
  return codes;
}

inline bool is_label_code(double v) {
  for (int32_t c : label_codes())
    if (v == static_cast<double>(c)) return true;
  return false;
}

// Validates voxel values against the known label codes and flags the volume.
inline Volume as_labels(Volume v) {
  for (size_t i = 0; i < v.voxels.size(); ++i) {
    const double val = v.voxels[i];
    if (!is_label_code(val))
      fail(Err::InvalidLabelCode,
           "voxel " + std::to_string(i) + " holds " + std::to_string(val));
  }
  v.label_flag = true;
  return v;
}

namespace detail {

inline void put_bytes(std::vector<uint8_t>& out, const void* p, size_t len) {
  const auto* b = static_cast<const uint8_t*>(p);
  out.insert(out.end(), b, b + len);
}

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#endif
  put_bytes(out, buf, sizeof(T));
}

template <typename T>
T get_swappable(const uint8_t* p, bool swap) {
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (swap)
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
#endif
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

// Supported NIfTI-1 datatype codes.
enum class NiftiType : int16_t { U8 = 2, I16 = 4, I32 = 8, F32 = 16, F64 = 64 };

struct NiftiHeaderSubset {
  int32_t sizeof_hdr = 348;
  int16_t datatype_code = 0;
  int16_t bitpix = 0;
  std::array<int16_t, 8> dim = {0, 0, 0, 0, 0, 0, 0, 0};
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::array<char, 4> magic = {'n', '+', '1', '\0'};
};

// Header field offsets follow the published NIfTI-1 layout.
inline NiftiHeaderSubset parse_nifti_header(const std::vector<uint8_t>& bytes, bool& swapped) {
  require(bytes.size() >= 352, Err::TruncatedPayload,
          "need at least 352 bytes, got " + std::to_string(bytes.size()));
  const uint8_t* p = bytes.data();

  int32_t hdr = detail::get_swappable<int32_t>(p, false);
  if (hdr == 348) {
    swapped = false;
  } else if (detail::get_swappable<int32_t>(p, true) == 348) {
    swapped = true;
  } else {
    fail(Err::BadMagic, "sizeof_hdr is not 348 under either byte order");
  }

  NiftiHeaderSubset h;
  h.sizeof_hdr = 348;
  for (int i = 0; i < 8; ++i)
    h.dim[i] = detail::get_swappable<int16_t>(p + 40 + 2 * i, swapped);
  h.datatype_code = detail::get_swappable<int16_t>(p + 70, swapped);
  h.bitpix = detail::get_swappable<int16_t>(p + 72, swapped);
  h.vox_offset = detail::get_swappable<float>(p + 108, swapped);
  h.scl_slope = detail::get_swappable<float>(p + 112, swapped);
  h.scl_inter = detail::get_swappable<float>(p + 116, swapped);
  std::memcpy(h.magic.data(), p + 344, 4);

  const bool magic_ok = std::memcmp(h.magic.data(), "n+1\0", 4) == 0 ||
                        std::memcmp(h.magic.data(), "ni1\0", 4) == 0;
  require(magic_ok, Err::BadMagic, "magic is neither n+1 nor ni1");
  return h;
}

inline size_t nifti_type_size(int16_t code) {
  switch (static_cast<NiftiType>(code)) {
    case NiftiType::U8: return 1;
    case NiftiType::I16: return 2;
    case NiftiType::I32: return 4;
    case NiftiType::F32: return 4;
    case NiftiType::F64: return 8;
  }
  fail(Err::UnsupportedDatatype, "datatype code " + std::to_string(code));
}

inline Volume parse_nifti(const std::vector<uint8_t>& bytes) {
  bool swapped = false;
  const NiftiHeaderSubset h = parse_nifti_header(bytes, swapped);
  const size_t elem = nifti_type_size(h.datatype_code);

  const int rank = h.dim[0];
  require(rank >= 1 && rank <= 7, Err::UnsupportedDims, "dim[0] = " + std::to_string(rank));
  int dims[3] = {1, 1, 1};
  for (int i = 1; i <= rank; ++i) {
    const int d = h.dim[i];
    require(d >= 1, Err::UnsupportedDims, "axis " + std::to_string(i) + " has size " + std::to_string(d));
    if (i <= 3) {
      dims[i - 1] = d;
    } else {
      require(d == 1, Err::UnsupportedDims,
              "axis " + std::to_string(i) + " has size " + std::to_string(d));
    }
  }

  Volume v(dims[0], dims[1], dims[2]);
  const size_t nvox = v.size();
  // ni1 pairs put voxels in a separate .img; a single buffer starts them at 352.
  size_t offset = static_cast<size_t>(h.vox_offset);
  if (offset < 352) offset = 352;
  require(bytes.size() >= offset + nvox * elem, Err::TruncatedPayload,
          "payload needs " + std::to_string(offset + nvox * elem) + " bytes, file has " +
              std::to_string(bytes.size()));

  const uint8_t* p = bytes.data() + offset;
  for (size_t i = 0; i < nvox; ++i) {
    double val = 0.0;
    switch (static_cast<NiftiType>(h.datatype_code)) {
      case NiftiType::U8: val = p[i]; break;
      case NiftiType::I16: val = detail::get_swappable<int16_t>(p + 2 * i, swapped); break;
      case NiftiType::I32: val = detail::get_swappable<int32_t>(p + 4 * i, swapped); break;
      case NiftiType::F32: val = detail::get_swappable<float>(p + 4 * i, swapped); break;
      case NiftiType::F64: val = detail::get_swappable<double>(p + 8 * i, swapped); break;
    }
    v.voxels[i] = val;
  }

  // Slope 0 means unset, slope 1 is the identity; anything else rescales.
  if (h.scl_slope != 0.0f && h.scl_slope != 1.0f) {
    const double s = h.scl_slope, b = h.scl_inter;
    for (double& x : v.voxels) x = s * x + b;
  }
  return v;
}

// Emits a single-file NIfTI-1 (magic n+1, vox_offset 352), always little-endian.
// Images are stored as f64; label volumes as u8 or i16, whichever fits.
inline std::vector<uint8_t> write_nifti(const Volume& v) {
  require(v.nx > 0 && v.ny > 0 && v.nz > 0, Err::UnsupportedDims, "dims must be positive");

  NiftiType dtype = NiftiType::F64;
  if (v.label_flag) {
    double max_code = 0.0;
    for (double x : v.voxels) {
      if (x < 0.0 || x != std::floor(x))
        fail(Err::InvalidLabelCode, "label voxel holds " + std::to_string(x));
      if (x > max_code) max_code = x;
    }
    if (max_code <= 255.0)
      dtype = NiftiType::U8;
    else if (max_code <= 32767.0)
      dtype = NiftiType::I16;
    else
      fail(Err::LabelCodeOverflow, "label code " + std::to_string(max_code) + " exceeds i16");
  }
  const size_t elem = nifti_type_size(static_cast<int16_t>(dtype));

  std::vector<uint8_t> out;
  out.reserve(352 + v.size() * elem);

  detail::put_le<int32_t>(out, 348);                       // sizeof_hdr
  out.resize(40, 0);                                       // data_type..hkey_un0
  detail::put_le<int16_t>(out, 3);                         // dim[0]
  detail::put_le<int16_t>(out, static_cast<int16_t>(v.nx));
  detail::put_le<int16_t>(out, static_cast<int16_t>(v.ny));
  detail::put_le<int16_t>(out, static_cast<int16_t>(v.nz));
  for (int i = 4; i < 8; ++i) detail::put_le<int16_t>(out, 1);
  out.resize(70, 0);                                       // intent fields
  detail::put_le<int16_t>(out, static_cast<int16_t>(dtype));
  detail::put_le<int16_t>(out, static_cast<int16_t>(elem * 8));  // bitpix
  out.resize(76, 0);                                       // slice_start
  for (int i = 0; i < 8; ++i) detail::put_le<float>(out, 1.0f);  // pixdim
  detail::put_le<float>(out, 352.0f);                      // vox_offset
  detail::put_le<float>(out, 1.0f);                        // scl_slope
  detail::put_le<float>(out, 0.0f);                        // scl_inter
  out.resize(344, 0);
  detail::put_bytes(out, "n+1\0", 4);
  out.resize(352, 0);                                      // extension flag: none

  for (double x : v.voxels) {
    switch (dtype) {
      case NiftiType::U8: out.push_back(static_cast<uint8_t>(x)); break;
      case NiftiType::I16: detail::put_le<int16_t>(out, static_cast<int16_t>(x)); break;
      case NiftiType::F64: detail::put_le<double>(out, x); break;
      default: fail(Err::UnsupportedDatatype, "writer does not emit this type");
    }
  }
  return out;
}

inline std::vector<uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Err::StageFailure, "cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(f), {});
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), Err::StageFailure, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), Err::StageFailure, "short write to " + path.string());
}

inline Volume load_nifti(const std::filesystem::path& path) { return parse_nifti(read_bytes(path)); }

inline void save_nifti(const std::filesystem::path& path, const Volume& v) {
  write_bytes(path, write_nifti(v));
}

}  // namespace myops
