#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mpstomo/mps.hpp"

namespace mpstomo {

// Binary MPS container, little-endian throughout:
//
//   bytes 0..3   magic "MPSQ"
//   u32          format version (1)
//   u64          n
//   u64 x (n+1)  bond dimensions, boundaries included
//   per site i   tensor (chi_i, 2, chi_{i+1}) in row-major order,
//                each entry as two f64 (real, imag)
//
// The canonical center is not stored; a loaded state carries none.
inline constexpr std::uint32_t kMpsFormatVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "MPS I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("MPS file truncated");
  return v;
}

}  // namespace detail

inline void write_mps(std::ostream& out, const MPSState& mps) {
  out.write("MPSQ", 4);
  detail::put<std::uint32_t>(out, kMpsFormatVersion);
  detail::put<std::uint64_t>(out, mps.size());
  for (auto b : mps.bond_dims()) detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(b));
  for (std::size_t i = 0; i < mps.size(); ++i) {
    const auto& s = mps[i];
    for (Eigen::Index l = 0; l < s.left(); ++l)
      for (int p = 0; p < 2; ++p)
        for (Eigen::Index r = 0; r < s.right(); ++r) {
          detail::put<double>(out, s.m[p](l, r).real());
          detail::put<double>(out, s.m[p](l, r).imag());
        }
  }
  if (!out) throw FormatError("failed writing MPS stream");
}

inline MPSState read_mps(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MPSQ", 4) != 0) throw FormatError("not an MPS file (bad magic)");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kMpsFormatVersion) throw FormatError("unsupported MPS format version " + std::to_string(version));
  const auto n = detail::get<std::uint64_t>(in);
  if (n == 0 || n > (1u << 20)) throw FormatError("MPS file has implausible size");
  std::vector<Eigen::Index> bonds(n + 1);
  for (auto& b : bonds) {
    const auto v = detail::get<std::uint64_t>(in);
    if (v == 0 || v > (1u << 16)) throw FormatError("MPS file has implausible bond dimension");
    b = static_cast<Eigen::Index>(v);
  }
  Tensors t(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& m : t[i].m) m.resize(bonds[i], bonds[i + 1]);
    for (Eigen::Index l = 0; l < bonds[i]; ++l)
      for (int p = 0; p < 2; ++p)
        for (Eigen::Index r = 0; r < bonds[i + 1]; ++r) {
          const double re = detail::get<double>(in);
          const double im = detail::get<double>(in);
          t[i].m[p](l, r) = cplx(re, im);
        }
  }
  try {
    return MPSState(std::move(t));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("MPS file is inconsistent: ") + e.what());
  }
}

inline std::string serialize_mps(const MPSState& mps) {
  std::ostringstream out(std::ios::binary);
  write_mps(out, mps);
  return out.str();
}

inline MPSState deserialize_mps(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_mps(in);
}

inline void save_mps(const std::string& path, const MPSState& mps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_mps(out, mps);
}

inline MPSState load_mps(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_mps(in);
}

// Fingerprint of the serialized tensors, used in dataset provenance.
inline std::string state_hash(const MPSState& mps) { return hex64(fnv1a(serialize_mps(mps))); }

}  // namespace mpstomo
