#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpstomo/types.hpp"

namespace mpstomo {

enum class Pauli : std::uint8_t { I, X, Y, Z };

inline char pauli_char(Pauli p) { return "IXYZ"[static_cast<int>(p)]; }

inline Pauli pauli_from_char(char c) {
  switch (std::toupper(static_cast<unsigned char>(c))) {
    case 'I': return Pauli::I;
    case 'X': return Pauli::X;
    case 'Y': return Pauli::Y;
    case 'Z': return Pauli::Z;
    default: throw InvalidArgument(std::string("invalid Pauli letter '") + c + "'");
  }
}

inline Matrix2 pauli_matrix(Pauli p) {
  Matrix2 m;
  const cplx i(0, 1);
  switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Y: m << 0, -i, i, 0; break;
    case Pauli::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

// Sparse Pauli string: coefficient times a tensor product of single-site
// Paulis on the listed sites (0-based), identity elsewhere.
//
// With `hs_normalized` set, the operator is additionally scaled by
// 2^{-n/2} on an n-qubit space so that tr(P P^dagger) = 1.
class PauliString {
 public:
  using Term = std::pair<std::size_t, Pauli>;

  PauliString() = default;

  explicit PauliString(std::vector<Term> support, cplx coefficient = 1.0, bool hs_normalized = false)
      : coefficient_(coefficient), hs_normalized_(hs_normalized) {
    if (coefficient == cplx(0)) throw InvalidArgument("Pauli string coefficient must be nonzero");
    std::sort(support.begin(), support.end());
    for (const auto& [site, p] : support) {
      if (p == Pauli::I) continue;
      if (!support_.empty() && support_.back().first == site)
        throw InvalidArgument("Pauli string lists site " + std::to_string(site + 1) + " twice");
      support_.emplace_back(site, p);
    }
  }

  // Product of a single Pauli type over a site list.
  static PauliString uniform(Pauli p, const std::vector<std::size_t>& sites, cplx coefficient = 1.0) {
    std::vector<Term> t;
    t.reserve(sites.size());
    for (auto s : sites) t.emplace_back(s, p);
    return PauliString(std::move(t), coefficient);
  }

  // Accepts either a dense string over {I,X,Y,Z} ("XIZZ") or a sparse,
  // whitespace-separated list with 1-based sites ("X1 Z3"). Either form may
  // carry a leading sign or real coefficient: "-X1 Z2", "0.5*ZZI".
  static PauliString parse(std::string_view text) {
    std::string s(text);
    auto trim = [](std::string& x) {
      const auto b = x.find_first_not_of(" \t");
      const auto e = x.find_last_not_of(" \t");
      x = (b == std::string::npos) ? std::string() : x.substr(b, e - b + 1);
    };
    trim(s);
    double coef = 1.0;
    if (auto star = s.find('*'); star != std::string::npos) {
      try {
        coef = std::stod(s.substr(0, star));
      } catch (const std::exception&) {
        throw InvalidArgument("invalid Pauli coefficient in '" + std::string(text) + "'");
      }
      s = s.substr(star + 1);
      trim(s);
    } else if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
      coef = s[0] == '-' ? -1.0 : 1.0;
      s = s.substr(1);
      trim(s);
    }
    std::vector<Term> terms;
    const bool sparse = std::any_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (!sparse) {
      for (std::size_t i = 0; i < s.size(); ++i) terms.emplace_back(i, pauli_from_char(s[i]));
    } else {
      std::istringstream in(s);
      std::string tok;
      while (in >> tok) {
        if (tok.size() < 2) throw InvalidArgument("invalid Pauli token '" + tok + "'");
        const Pauli p = pauli_from_char(tok[0]);
        std::size_t site = 0;
        try {
          site = std::stoul(tok.substr(1));
        } catch (const std::exception&) {
          throw InvalidArgument("invalid Pauli token '" + tok + "'");
        }
        if (site == 0) throw InvalidArgument("Pauli sites are 1-based: '" + tok + "'");
        terms.emplace_back(site - 1, p);
      }
    }
    return PauliString(std::move(terms), coef);
  }

  // Sparse text form with 1-based sites; identity prints as "I".
  std::string str() const {
    std::ostringstream out;
    if (coefficient_ == cplx(-1.0)) {
      out << '-';
    } else if (coefficient_ != cplx(1.0)) {
      out << coefficient_.real() << '*';
    }
    if (support_.empty()) out << 'I';
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (i) out << ' ';
      out << pauli_char(support_[i].second) << support_[i].first + 1;
    }
    return out.str();
  }

  const std::vector<Term>& support() const { return support_; }
  cplx coefficient() const { return coefficient_; }
  bool hs_normalized() const { return hs_normalized_; }
  std::size_t locality() const { return support_.size(); }

  bool has_y() const {
    return std::any_of(support_.begin(), support_.end(), [](const Term& t) { return t.second == Pauli::Y; });
  }

  bool hermitian() const { return std::abs(coefficient_.imag()) == 0.0; }

  std::size_t max_site() const { return support_.empty() ? 0 : support_.back().first; }

  Pauli at(std::size_t site) const {
    for (const auto& [s, p] : support_)
      if (s == site) return p;
    return Pauli::I;
  }

  // Overall scalar on an n-qubit space, including HS normalization.
  cplx scale(std::size_t n) const {
    return hs_normalized_ ? coefficient_ * std::pow(2.0, -0.5 * static_cast<double>(n)) : coefficient_;
  }

  void check_within(std::size_t n) const {
    if (!support_.empty() && support_.back().first >= n)
      throw InvalidArgument("Pauli string support site " + std::to_string(support_.back().first + 1) +
                            " exceeds system size " + std::to_string(n));
  }

  // Two Pauli strings commute iff they anticommute on an even number of sites.
  bool commutes_with(const PauliString& other) const {
    int anti = 0;
    for (const auto& [s, p] : support_) {
      const Pauli q = other.at(s);
      if (q != Pauli::I && q != p) ++anti;
    }
    return anti % 2 == 0;
  }

  friend bool operator==(const PauliString&, const PauliString&) = default;

 private:
  std::vector<Term> support_;
  cplx coefficient_ = 1.0;
  bool hs_normalized_ = false;
};

// Kronecker product a (x) b; a acts on the more significant qubits.
inline DenseOperator kron(const DenseOperator& a, const DenseOperator& b) {
  DenseOperator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

// Dense 2^n x 2^n matrix of the string (test and small-system utility).
inline DenseOperator dense_pauli(const PauliString& p, std::size_t n) {
  p.check_within(n);
  if (n > 14) throw ResourceLimit("dense Pauli matrix limited to 14 qubits");
  DenseOperator m = DenseOperator::Identity(1, 1);
  for (std::size_t i = 0; i < n; ++i) m = kron(m, pauli_matrix(p.at(i)));
  return p.scale(n) * m;
}

}  // namespace mpstomo
