#pragma once

#include <cstdint>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "myops/common.hpp"
#include "myops/volume.hpp"

namespace myops {

// MYOT: named-tensor container used for augmented datasets and checkpoints.
// Layout: magic "MYOT" | version u32 | count u32 | records. Each record:
// name length u16 | name | dtype u8 | rank u8 | dims u64 x rank | payload.
// All integers little-endian; payloads round-trip bit-exact.

enum class DType : uint8_t { F64 = 1, F32 = 2, U8 = 3, I16 = 4, I32 = 5, I64 = 6 };

inline size_t dtype_size(DType t) {
  switch (t) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::I16: return 2;
    case DType::I32: return 4;
    case DType::I64: return 8;
  }
  fail(Err::UnsupportedDatatype, "dtype " + std::to_string(static_cast<int>(t)));
}

struct Record {
  std::string name;
  DType dtype = DType::F64;
  std::vector<uint64_t> dims;
  std::vector<uint8_t> payload;

  uint64_t count() const {
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    return n;
  }
};

inline Record make_record_f64(std::string name, std::vector<uint64_t> dims,
                              const std::vector<double>& data) {
  Record r{std::move(name), DType::F64, std::move(dims), {}};
  require(r.count() == data.size(), Err::ShapeMismatch, "dims do not match data length");
  r.payload.clear();
  r.payload.reserve(data.size() * 8);
  for (double v : data) detail::put_le<double>(r.payload, v);
  return r;
}

inline Record make_record_u8(std::string name, std::vector<uint64_t> dims,
                             const std::vector<uint8_t>& data) {
  Record r{std::move(name), DType::U8, std::move(dims), data};
  require(r.count() == data.size(), Err::ShapeMismatch, "dims do not match data length");
  return r;
}

inline Record make_record_i64(std::string name, int64_t value) {
  Record r{std::move(name), DType::I64, {1}, {}};
  detail::put_le<int64_t>(r.payload, value);
  return r;
}

inline std::vector<double> record_as_f64(const Record& r) {
  require(r.dtype == DType::F64, Err::UnsupportedDatatype, r.name + " is not f64");
  std::vector<double> out(r.count());
  for (uint64_t i = 0; i < out.size(); ++i)
    out[i] = detail::get_swappable<double>(r.payload.data() + 8 * i, false);
  return out;
}

inline int64_t record_as_i64(const Record& r) {
  require(r.dtype == DType::I64 && r.count() == 1, Err::UnsupportedDatatype,
          r.name + " is not a scalar i64");
  return detail::get_swappable<int64_t>(r.payload.data(), false);
}

inline std::vector<uint8_t> write_container(const std::vector<Record>& records) {
  std::set<std::string> seen;
  for (const auto& r : records)
    require(seen.insert(r.name).second, Err::DuplicateName, r.name);

  std::vector<uint8_t> out;
  detail::put_bytes(out, "MYOT", 4);
  detail::put_le<uint32_t>(out, 1);  // format version
  detail::put_le<uint32_t>(out, static_cast<uint32_t>(records.size()));
  for (const auto& r : records) {
    require(r.payload.size() == r.count() * dtype_size(r.dtype), Err::ShapeMismatch,
            r.name + ": payload length does not match dims");
    detail::put_le<uint16_t>(out, static_cast<uint16_t>(r.name.size()));
    detail::put_bytes(out, r.name.data(), r.name.size());
    out.push_back(static_cast<uint8_t>(r.dtype));
    out.push_back(static_cast<uint8_t>(r.dims.size()));
    for (uint64_t d : r.dims) detail::put_le<uint64_t>(out, d);
    detail::put_bytes(out, r.payload.data(), r.payload.size());
  }
  return out;
}

inline std::vector<Record> read_container(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  auto need = [&](size_t n, const char* what) {
    require(bytes.size() - pos >= n, Err::TruncatedPayload, what);
  };

  need(12, "container header");
  require(std::memcmp(bytes.data(), "MYOT", 4) == 0, Err::BadMagic, "not a MYOT container");
  pos = 4;
  const uint32_t version = detail::get_swappable<uint32_t>(bytes.data() + pos, false);
  pos += 4;
  require(version == 1, Err::VersionMismatch, "container version " + std::to_string(version));
  const uint32_t count = detail::get_swappable<uint32_t>(bytes.data() + pos, false);
  pos += 4;

  std::vector<Record> records;
  records.reserve(count);
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    need(2, "record name length");
    const uint16_t nlen = detail::get_swappable<uint16_t>(bytes.data() + pos, false);
    pos += 2;
    need(nlen, "record name");
    Record r;
    r.name.assign(reinterpret_cast<const char*>(bytes.data() + pos), nlen);
    pos += nlen;
    require(seen.insert(r.name).second, Err::DuplicateName, r.name);
    need(2, "record dtype/rank");
    const uint8_t dt = bytes[pos++];
    require(dt >= 1 && dt <= 6, Err::UnsupportedDatatype, "dtype " + std::to_string(dt));
    r.dtype = static_cast<DType>(dt);
    const uint8_t rank = bytes[pos++];
    need(8ULL * rank, "record dims");
    r.dims.resize(rank);
    for (uint8_t d = 0; d < rank; ++d) {
      r.dims[d] = detail::get_swappable<uint64_t>(bytes.data() + pos, false);
      pos += 8;
    }
    const size_t plen = r.count() * dtype_size(r.dtype);
    need(plen, "record payload");
    r.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + plen));
    pos += plen;
    records.push_back(std::move(r));
  }
  return records;
}

inline const Record* find_record(const std::vector<Record>& records, const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

inline const Record& get_record(const std::vector<Record>& records, const std::string& name) {
  const Record* r = find_record(records, name);
  require(r != nullptr, Err::StageFailure, "missing record " + name);
  return *r;
}

}  // namespace myops
