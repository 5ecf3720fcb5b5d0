#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mpstomo/errors.hpp"

namespace mpstomo {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RowVector = Eigen::RowVectorXcd;
using Vector = Eigen::VectorXcd;
using Matrix2 = Eigen::Matrix2cd;

// Dense operator on a few qubits. Qubit order follows Kronecker order: the
// first listed qubit is the most significant bit of the row/column index.
using DenseOperator = Eigen::MatrixXcd;

// Measurement axis of one qubit. Y is reserved for a future Pauli ensemble.
enum class Axis : std::uint8_t { X, Z };

inline char axis_char(Axis a) { return a == Axis::X ? 'X' : 'Z'; }

// Per-qubit measurement axes, e.g. "XZZX".
class BasisString {
 public:
  BasisString() = default;
  explicit BasisString(std::vector<Axis> axes) : axes_(std::move(axes)) {}
  BasisString(std::size_t n, Axis a) : axes_(n, a) {}

  static BasisString parse(std::string_view text) {
    std::vector<Axis> axes;
    axes.reserve(text.size());
    for (char c : text) {
      if (c == 'X' || c == 'x') {
        axes.push_back(Axis::X);
      } else if (c == 'Z' || c == 'z') {
        axes.push_back(Axis::Z);
      } else {
        throw InvalidArgument(std::string("basis string has invalid axis '") + c + "'");
      }
    }
    return BasisString(std::move(axes));
  }

  std::string str() const {
    std::string s(axes_.size(), 'Z');
    for (std::size_t i = 0; i < axes_.size(); ++i) s[i] = axis_char(axes_[i]);
    return s;
  }

  std::size_t size() const { return axes_.size(); }
  Axis operator[](std::size_t i) const { return axes_[i]; }
  Axis& operator[](std::size_t i) { return axes_[i]; }
  const std::vector<Axis>& axes() const { return axes_; }

  bool uniform(Axis a) const {
    for (Axis x : axes_)
      if (x != a) return false;
    return true;
  }

  friend bool operator==(const BasisString&, const BasisString&) = default;

 private:
  std::vector<Axis> axes_;
};

// Measurement outcome, one entry (0 or 1) per qubit.
using Bits = std::vector<std::uint8_t>;

inline Bits parse_bits(std::string_view text) {
  Bits b;
  b.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') throw InvalidArgument(std::string("bit string has invalid character '") + c + "'");
    b.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return b;
}

inline std::string format_bits(const Bits& b) {
  std::string s(b.size(), '0');
  for (std::size_t i = 0; i < b.size(); ++i) s[i] = b[i] ? '1' : '0';
  return s;
}

// Big-endian: bit of qubit 0 is the most significant.
inline std::uint64_t bits_to_index(const Bits& b) {
  std::uint64_t idx = 0;
  for (auto v : b) idx = (idx << 1) | v;
  return idx;
}

inline Bits index_to_bits(std::uint64_t idx, std::size_t n) {
  Bits b(n);
  for (std::size_t i = 0; i < n; ++i) b[n - 1 - i] = static_cast<std::uint8_t>((idx >> i) & 1u);
  return b;
}

// 64-bit FNV-1a, used for provenance fingerprints of files and states.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

}  // namespace mpstomo
