#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

#include "mpstomo/mps.hpp"
#include "mpstomo/pauli.hpp"

namespace mpstomo {

// One MPO site. w[2*s + t](a, b) is the (bra s, ket t) matrix element of the
// operator sitting between left bond state a and right bond state b.
struct MPOSite {
  std::array<Matrix, 4> w;

  Eigen::Index left() const { return w[0].rows(); }
  Eigen::Index right() const { return w[0].cols(); }
  Matrix& at(int s, int t) { return w[2 * s + t]; }
  const Matrix& at(int s, int t) const { return w[2 * s + t]; }

  static MPOSite zeros(Eigen::Index l, Eigen::Index r) {
    MPOSite x;
    for (auto& m : x.w) m = Matrix::Zero(l, r);
    return x;
  }
};

class MPO {
 public:
  MPO() = default;

  explicit MPO(std::vector<MPOSite> sites) : sites_(std::move(sites)) {
    if (sites_.empty()) throw InvalidArgument("MPO must have at least one site");
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      for (const auto& m : sites_[i].w)
        if (m.rows() != sites_[i].left() || m.cols() != sites_[i].right())
          throw InvalidArgument("MPO site " + std::to_string(i) + " has ragged slices");
      if (i + 1 < sites_.size() && sites_[i].right() != sites_[i + 1].left())
        throw InvalidArgument("MPO bond mismatch after site " + std::to_string(i));
    }
    if (sites_.front().left() != 1 || sites_.back().right() != 1) throw InvalidArgument("MPO boundary bonds must be 1");
  }

  std::size_t size() const { return sites_.size(); }
  const MPOSite& operator[](std::size_t i) const { return sites_[i]; }
  std::span<const MPOSite> sites() const { return sites_; }

  std::vector<Eigen::Index> bond_dims() const {
    std::vector<Eigen::Index> b{1};
    for (const auto& s : sites_) b.push_back(s.right());
    return b;
  }

  Eigen::Index max_bond() const {
    Eigen::Index m = 1;
    for (const auto& s : sites_) m = std::max(m, s.right());
    return m;
  }

 private:
  std::vector<MPOSite> sites_;
};

// Sum of Pauli strings with real coefficients on n qubits. An empty support
// stands for a multiple of the identity.
struct PauliSum {
  std::size_t n = 0;
  std::vector<PauliString> terms;

  void add(const PauliString& p) {
    p.check_within(n);
    if (!p.hermitian()) throw InvalidArgument("Hamiltonian terms must have real coefficients");
    terms.push_back(p);
  }

  // Merge repeated strings and drop those whose coefficients cancel.
  PauliSum simplified(double tol = 1e-15) const {
    std::map<std::vector<PauliString::Term>, double> acc;
    for (const auto& t : terms) acc[t.support()] += t.scale(n).real();
    PauliSum out{n, {}};
    for (const auto& [support, c] : acc)
      if (std::abs(c) > tol) out.terms.emplace_back(support, c);
    return out;
  }
};

namespace detail {

inline Matrix mpo_stack_rows(const MPOSite& s) {
  Matrix out(4 * s.left(), s.right());
  for (int k = 0; k < 4; ++k) out.middleRows(k * s.left(), s.left()) = s.w[k];
  return out;
}

inline Matrix mpo_stack_cols(const MPOSite& s) {
  Matrix out(s.left(), 4 * s.right());
  for (int k = 0; k < 4; ++k) out.middleCols(k * s.right(), s.right()) = s.w[k];
  return out;
}

}  // namespace detail

// Two sweeps of bond truncation: QR left to right, then SVD right to left,
// keeping singular values above `cutoff` relative to the largest on a bond.
inline MPO compress_mpo(const MPO& mpo, double cutoff = 1e-13) {
  std::vector<MPOSite> t(mpo.sites().begin(), mpo.sites().end());
  const std::size_t n = t.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Matrix m = detail::mpo_stack_rows(t[i]);
    Matrix q, r;
    detail::thin_qr(m, q, r);
    const Eigen::Index l = t[i].left();
    for (int k = 0; k < 4; ++k) t[i].w[k] = q.middleRows(k * l, l);
    for (auto& w : t[i + 1].w) w = (r * w).eval();
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    Eigen::BDCSVD<Matrix> svd(detail::mpo_stack_cols(t[i]), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::Index k = 0;
    while (k < s.size() && s(k) > cutoff * s(0)) ++k;
    k = std::max<Eigen::Index>(k, 1);
    const Matrix vt = svd.matrixV().leftCols(k).adjoint();
    const Eigen::Index r = t[i].right();
    for (int c = 0; c < 4; ++c) t[i].w[c] = vt.middleCols(c * r, r);
    const Matrix carry = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
    for (auto& w : t[i - 1].w) w = (w * carry).eval();
  }
  return MPO(std::move(t));
}

// Finite-state-machine MPO of a Pauli sum. Bond state 0 means "no term
// started yet", state 1 means "a term has been completed"; every multi-site
// term crossing a bond keeps its own channel there.
inline MPO mpo_from_pauli_sum(const PauliSum& sum, bool compress = true) {
  const std::size_t n = sum.n;
  if (n == 0) throw InvalidArgument("Pauli sum has no qubits");
  const PauliSum h = sum.simplified();

  // Channel ids per bond; bond b sits between sites b-1 and b.
  std::vector<std::vector<std::size_t>> channels(n + 1);
  for (std::size_t k = 0; k < h.terms.size(); ++k) {
    const auto& sup = h.terms[k].support();
    if (sup.size() < 2) continue;
    for (std::size_t b = sup.front().first + 1; b <= sup.back().first; ++b) channels[b].push_back(k);
  }
  auto index_of = [&](std::size_t b, std::size_t term) -> Eigen::Index {
    const auto& c = channels[b];
    const auto it = std::lower_bound(c.begin(), c.end(), term);
    return 2 + static_cast<Eigen::Index>(it - c.begin());
  };
  auto dim = [&](std::size_t b) { return 2 + static_cast<Eigen::Index>(channels[b].size()); };

  auto add_op = [](MPOSite& s, Eigen::Index a, Eigen::Index b, const Matrix2& op) {
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) s.at(x, y)(a, b) += op(x, y);
  };
  const Matrix2 id = Matrix2::Identity();

  std::vector<MPOSite> sites;
  sites.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    MPOSite s = MPOSite::zeros(dim(i), dim(i + 1));
    add_op(s, 0, 0, id);
    add_op(s, 1, 1, id);
    for (std::size_t k = 0; k < h.terms.size(); ++k) {
      const auto& term = h.terms[k];
      const auto& sup = term.support();
      const double c = term.coefficient().real();
      if (sup.empty()) {
        if (i == 0) add_op(s, 0, 1, c * id);
        continue;
      }
      const std::size_t first = sup.front().first, last = sup.back().first;
      if (i < first || i > last) continue;
      const Matrix2 p = pauli_matrix(term.at(i));
      if (first == last) {
        add_op(s, 0, 1, c * p);
      } else if (i == first) {
        add_op(s, 0, index_of(i + 1, k), c * p);
      } else if (i == last) {
        add_op(s, index_of(i, k), 1, p);
      } else {
        add_op(s, index_of(i, k), index_of(i + 1, k), p);
      }
    }
    sites.push_back(std::move(s));
  }
  // Pin the boundaries: enter in state 0, leave in state 1.
  for (auto& w : sites.front().w) w = w.row(0).eval();
  for (auto& w : sites.back().w) w = w.col(1).eval();
  MPO out(std::move(sites));
  return compress ? compress_mpo(out) : out;
}

inline constexpr std::size_t kMaxDenseHamiltonianQubits = 12;

// Dense 2^n x 2^n matrix of the MPO, built from left- and right-half
// contractions so that only one full-size matrix is ever allocated.
inline DenseOperator dense_hamiltonian(const MPO& mpo) {
  const std::size_t n = mpo.size();
  if (n > kMaxDenseHamiltonianQubits)
    throw ResourceLimit("dense_hamiltonian limited to " + std::to_string(kMaxDenseHamiltonianQubits) + " qubits");
  const std::size_t cut = n / 2;
  auto site_op = [&](std::size_t i, Eigen::Index a, Eigen::Index b) {
    Matrix2 m;
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t) m(s, t) = mpo[i].at(s, t)(a, b);
    return m;
  };

  std::vector<DenseOperator> left{DenseOperator::Identity(1, 1)};
  for (std::size_t i = 0; i < cut; ++i) {
    const auto dim = left[0].rows() * 2;
    std::vector<DenseOperator> next(mpo[i].right(), DenseOperator::Zero(dim, dim));
    for (Eigen::Index a = 0; a < mpo[i].left(); ++a)
      for (Eigen::Index b = 0; b < mpo[i].right(); ++b) next[b] += kron(left[a], site_op(i, a, b));
    left = std::move(next);
  }
  std::vector<DenseOperator> right{DenseOperator::Identity(1, 1)};
  for (std::size_t i = n; i-- > cut;) {
    const auto dim = right[0].rows() * 2;
    std::vector<DenseOperator> next(mpo[i].left(), DenseOperator::Zero(dim, dim));
    for (Eigen::Index a = 0; a < mpo[i].left(); ++a)
      for (Eigen::Index b = 0; b < mpo[i].right(); ++b) next[a] += kron(site_op(i, a, b), right[b]);
    right = std::move(next);
  }
  const Eigen::Index dl = left[0].rows(), dr = right[0].rows();
  DenseOperator h = DenseOperator::Zero(dl * dr, dl * dr);
  for (std::size_t w = 0; w < left.size(); ++w)
    for (Eigen::Index r = 0; r < dl; ++r)
      for (Eigen::Index c = 0; c < dl; ++c)
        if (left[w](r, c) != cplx(0)) h.block(r * dr, c * dr, dr, dr) += left[w](r, c) * right[w];
  return h;
}

// Largest |H_ij - conj(H_ji)| of the dense matrix.
inline double hermiticity_residual(const DenseOperator& h) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < h.rows(); ++r)
    for (Eigen::Index c = r; c < h.cols(); ++c) worst = std::max(worst, std::abs(h(r, c) - std::conj(h(c, r))));
  return worst;
}

// <psi|H|psi> / <psi|psi>.
inline double mpo_expectation(const MPSState& mps, const MPO& mpo) {
  if (mps.size() != mpo.size()) throw InvalidArgument("MPS and MPO sizes differ");
  std::vector<Matrix> env{Matrix::Ones(1, 1)};
  for (std::size_t i = 0; i < mps.size(); ++i) {
    const auto& a = mps[i].m;
    const auto& w = mpo[i];
    std::vector<Matrix> next(w.right(), Matrix::Zero(a[0].cols(), a[0].cols()));
    for (Eigen::Index l = 0; l < w.left(); ++l)
      for (int s = 0; s < 2; ++s) {
        const Matrix bra = a[s].adjoint() * env[l];
        for (int t = 0; t < 2; ++t) {
          const Matrix x = bra * a[t];
          for (Eigen::Index r = 0; r < w.right(); ++r) {
            const cplx c = w.at(s, t)(l, r);
            if (c != cplx(0)) next[r] += c * x;
          }
        }
      }
    env = std::move(next);
  }
  return env[0](0, 0).real() / norm_squared(mps);
}

}  // namespace mpstomo
