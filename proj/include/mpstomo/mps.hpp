#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mpstomo/pauli.hpp"
#include "mpstomo/rng.hpp"
#include "mpstomo/types.hpp"

namespace mpstomo {

// One MPS site: m[s] is the (left bond) x (right bond) matrix for physical
// index s. The rank-3 tensor A_{l s r} is m[s](l, r).
struct SiteTensor {
  std::array<Matrix, 2> m;

  Eigen::Index left() const { return m[0].rows(); }
  Eigen::Index right() const { return m[0].cols(); }
  Eigen::Index size() const { return 2 * m[0].size(); }
};

using Tensors = std::vector<SiteTensor>;

inline void validate_chain(std::span<const SiteTensor> t) {
  if (t.empty()) throw InvalidArgument("MPS must have at least one site");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& s = t[i];
    if (s.m[0].rows() != s.m[1].rows() || s.m[0].cols() != s.m[1].cols())
      throw InvalidArgument("site " + std::to_string(i) + " has mismatched physical slices");
    if (s.left() < 1 || s.right() < 1) throw InvalidArgument("site " + std::to_string(i) + " has an empty bond");
    if (i + 1 < t.size() && s.right() != t[i + 1].left())
      throw InvalidArgument("bond mismatch between sites " + std::to_string(i) + " and " + std::to_string(i + 1));
  }
  if (t.front().left() != 1 || t.back().right() != 1) throw InvalidArgument("MPS boundary bonds must be 1");
}

// Open-boundary qubit MPS. Immutable once built; every transformation
// returns a new state.
class MPSState {
 public:
  MPSState() = default;

  explicit MPSState(Tensors tensors, std::optional<std::size_t> center = std::nullopt)
      : tensors_(std::move(tensors)), center_(center) {
    validate_chain(tensors_);
    if (center_ && *center_ >= tensors_.size()) throw InvalidArgument("canonical center out of range");
  }

  std::size_t size() const { return tensors_.size(); }
  const SiteTensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::span<const SiteTensor> tensors() const { return tensors_; }
  std::optional<std::size_t> center() const { return center_; }

  // n + 1 entries including the two trivial boundary bonds.
  std::vector<Eigen::Index> bond_dims() const {
    std::vector<Eigen::Index> b;
    b.reserve(tensors_.size() + 1);
    b.push_back(tensors_.front().left());
    for (const auto& s : tensors_) b.push_back(s.right());
    return b;
  }

  Eigen::Index max_bond() const {
    const auto b = bond_dims();
    return *std::max_element(b.begin(), b.end());
  }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& s : tensors_) c += static_cast<std::size_t>(s.size());
    return c;
  }

 private:
  Tensors tensors_;
  std::optional<std::size_t> center_;
};

// Largest useful bond between the first `left_sites` sites and the rest.
inline Eigen::Index bond_cap(std::size_t n, std::size_t left_sites, Eigen::Index chi) {
  const std::size_t k = std::min(left_sites, n - left_sites);
  if (k >= 31) return chi;
  return std::min<Eigen::Index>(chi, Eigen::Index{1} << k);
}

enum class Entries { Complex, Real };

inline double norm_squared(std::span<const SiteTensor> t) {
  Matrix env = Matrix::Ones(1, 1);
  for (const auto& s : t) env = s.m[0].adjoint() * env * s.m[0] + s.m[1].adjoint() * env * s.m[1];
  return env(0, 0).real();
}

inline double norm_squared(const MPSState& mps) { return norm_squared(mps.tensors()); }

inline Tensors scaled(std::span<const SiteTensor> t, double factor) {
  Tensors out(t.begin(), t.end());
  const double per_site = std::pow(factor, 1.0 / static_cast<double>(t.size()));
  for (auto& s : out) {
    s.m[0] *= per_site;
    s.m[1] *= per_site;
  }
  return out;
}

// Random state with i.i.d. Gaussian entries (complex or real), bond profile
// min(2^i, 2^{n-i}, chi), rescaled to unit norm evenly across sites.
inline MPSState new_random_mps(std::size_t n, Eigen::Index chi, std::uint64_t seed, Entries entries = Entries::Complex) {
  if (n == 0) throw InvalidArgument("new_random_mps: n must be >= 1");
  if (chi < 1) throw InvalidArgument("new_random_mps: chi must be >= 1");
  Philox4x32 rng(seed, 0x6d7073ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensors t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index l = (i == 0) ? 1 : bond_cap(n, i, chi);
    const Eigen::Index r = (i + 1 == n) ? 1 : bond_cap(n, i + 1, chi);
    for (auto& m : t[i].m) {
      m.resize(l, r);
      for (Eigen::Index a = 0; a < l; ++a)
        for (Eigen::Index b = 0; b < r; ++b) {
          const double re = gauss(rng);
          const double im = entries == Entries::Complex ? gauss(rng) : 0.0;
          m(a, b) = cplx(re, im);
        }
    }
  }
  const double nrm = norm_squared(t);
  return MPSState(scaled(t, 1.0 / std::sqrt(nrm)));
}

// Computational basis product state.
inline MPSState product_state(const Bits& bits) {
  Tensors t(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    t[i].m[0] = Matrix::Zero(1, 1);
    t[i].m[1] = Matrix::Zero(1, 1);
    t[i].m[bits[i] ? 1 : 0](0, 0) = 1.0;
  }
  return MPSState(std::move(t));
}

namespace detail {

// Thin QR of a tall-or-wide matrix: m = q * r with q having orthonormal
// columns and min(rows, cols) of them.
inline void thin_qr(const Matrix& m, Matrix& q, Matrix& r) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Matrix> qr(m);
  q = qr.householderQ() * Matrix::Identity(m.rows(), k);
  r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

// Stack [m0; m1] into a (2 l) x r matrix.
inline Matrix stack_rows(const SiteTensor& s) {
  Matrix out(2 * s.left(), s.right());
  out << s.m[0], s.m[1];
  return out;
}

// Place [m0, m1] side by side: l x (2 r).
inline Matrix stack_cols(const SiteTensor& s) {
  Matrix out(s.left(), 2 * s.right());
  out << s.m[0], s.m[1];
  return out;
}

inline SiteTensor unstack_rows(const Matrix& m) {
  const Eigen::Index l = m.rows() / 2;
  return SiteTensor{{m.topRows(l), m.bottomRows(l)}};
}

inline SiteTensor unstack_cols(const Matrix& m) {
  const Eigen::Index r = m.cols() / 2;
  return SiteTensor{{m.leftCols(r), m.rightCols(r)}};
}

}  // namespace detail

// Mixed canonical form around `center`: sites left of it are left
// isometries (sum_s A^dag A = 1), sites right of it right isometries
// (sum_s A A^dag = 1). QR only; the norm ends up in the center tensor.
inline MPSState canonicalize(const MPSState& mps, std::size_t center) {
  const std::size_t n = mps.size();
  if (center >= n) throw InvalidArgument("canonicalize: center " + std::to_string(center) + " out of range");
  Tensors t(mps.tensors().begin(), mps.tensors().end());
  Matrix q, r;
  for (std::size_t i = 0; i < center; ++i) {
    detail::thin_qr(detail::stack_rows(t[i]), q, r);
    t[i] = detail::unstack_rows(q);
    for (auto& m : t[i + 1].m) m = (r * m).eval();
  }
  for (std::size_t i = n - 1; i > center; --i) {
    detail::thin_qr(detail::stack_cols(t[i]).adjoint(), q, r);
    t[i] = detail::unstack_cols(q.adjoint());
    const Matrix carry = r.adjoint();
    for (auto& m : t[i - 1].m) m = (m * carry).eval();
  }
  return MPSState(std::move(t), center);
}

// Canonical form at site 0 with unit norm.
inline MPSState normalize(const MPSState& mps) {
  MPSState c = canonicalize(mps, 0);
  Tensors t(c.tensors().begin(), c.tensors().end());
  const double nrm = std::sqrt(t[0].m[0].squaredNorm() + t[0].m[1].squaredNorm());
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw InvalidState("cannot normalize a zero-norm state");
  t[0].m[0] /= nrm;
  t[0].m[1] /= nrm;
  return MPSState(std::move(t), 0);
}

inline double left_isometry_residual(const SiteTensor& s) {
  const Matrix g = s.m[0].adjoint() * s.m[0] + s.m[1].adjoint() * s.m[1];
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

inline double right_isometry_residual(const SiteTensor& s) {
  const Matrix g = s.m[0] * s.m[0].adjoint() + s.m[1] * s.m[1].adjoint();
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

// Largest isometry violation around the declared canonical center.
inline double canonical_residual(const MPSState& mps) {
  if (!mps.center()) throw InvalidArgument("state has no canonical center");
  double worst = 0.0;
  for (std::size_t i = 0; i < mps.size(); ++i) {
    if (i < *mps.center()) worst = std::max(worst, left_isometry_residual(mps[i]));
    if (i > *mps.center()) worst = std::max(worst, right_isometry_residual(mps[i]));
  }
  return worst;
}

// Weights w_s = <b|U|s> of the single-qubit rotation for the given axis:
// identity for Z, the Hadamard for X.
inline std::array<double, 2> rotation_weights(Axis axis, std::uint8_t bit) {
  if (axis == Axis::Z) return bit ? std::array<double, 2>{0.0, 1.0} : std::array<double, 2>{1.0, 0.0};
  constexpr double h = 0.70710678118654752440;
  return bit ? std::array<double, 2>{h, -h} : std::array<double, 2>{h, h};
}

inline Matrix rotated_slice(const SiteTensor& s, Axis axis, std::uint8_t bit) {
  if (axis == Axis::Z) return s.m[bit ? 1 : 0];
  const auto w = rotation_weights(axis, bit);
  return w[0] * s.m[0] + w[1] * s.m[1];
}

// <b|U|psi> with U rotating each qubit onto its requested axis.
inline cplx amplitude(const MPSState& mps, const BasisString& basis, const Bits& bits) {
  if (basis.size() != mps.size() || bits.size() != mps.size())
    throw InvalidArgument("amplitude: basis/bit-string length does not match system size");
  RowVector v = RowVector::Ones(1);
  for (std::size_t i = 0; i < mps.size(); ++i) v = v * rotated_slice(mps[i], basis[i], bits[i]);
  return v(0);
}

// <a|b>.
inline cplx inner_product(const MPSState& a, const MPSState& b) {
  if (a.size() != b.size()) throw InvalidArgument("inner_product: states have different sizes");
  Matrix env = Matrix::Ones(1, 1);
  for (std::size_t i = 0; i < a.size(); ++i)
    env = a[i].m[0].adjoint() * env * b[i].m[0] + a[i].m[1].adjoint() * env * b[i].m[1];
  return env(0, 0);
}

// |<a|b>| for the normalized states.
inline double fidelity(const MPSState& a, const MPSState& b) {
  const double na = norm_squared(a);
  const double nb = norm_squared(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidState("fidelity: zero-norm state");
  return std::min(1.0, std::abs(inner_product(a, b)) / std::sqrt(na * nb));
}

inline double local_fidelity(double fid, std::size_t n) { return std::pow(fid, 1.0 / static_cast<double>(n)); }

inline double local_fidelity(const MPSState& a, const MPSState& b) { return local_fidelity(fidelity(a, b), a.size()); }

// Exact sampling of measurement outcomes. The state is brought into right
// canonical form once, after which each qubit's conditional marginal only
// needs the already-drawn prefix.
class Sampler {
 public:
  explicit Sampler(const MPSState& mps) : state_(normalize(mps)) {}

  template <class Rng>
  Bits sample(const BasisString& basis, Rng& rng) const {
    const std::size_t n = state_.size();
    if (basis.size() != n) throw InvalidArgument("sample: basis length does not match system size");
    Bits bits(n);
    RowVector v = RowVector::Ones(1);
    RowVector w0, w1;
    for (std::size_t i = 0; i < n; ++i) {
      w0.noalias() = v * rotated_slice(state_[i], basis[i], 0);
      w1.noalias() = v * rotated_slice(state_[i], basis[i], 1);
      const double p0 = w0.squaredNorm();
      const double p1 = w1.squaredNorm();
      const double u = uniform01(rng) * (p0 + p1);
      if (u < p0) {
        bits[i] = 0;
        v = w0 / std::sqrt(p0);
      } else {
        bits[i] = 1;
        v = w1 / std::sqrt(p1);
      }
    }
    return bits;
  }

  const MPSState& state() const { return state_; }

 private:
  MPSState state_;
};

template <class Rng>
Bits sample_bitstring(const MPSState& mps, const BasisString& basis, Rng& rng) {
  return Sampler(mps).sample(basis, rng);
}

// Per-site single-qubit operators; nullopt means identity.
using SiteOps = std::vector<std::optional<Matrix2>>;

inline SiteOps site_ops(const PauliString& p, std::size_t n) {
  p.check_within(n);
  SiteOps ops(n);
  for (const auto& [site, pauli] : p.support()) ops[site] = pauli_matrix(pauli);
  return ops;
}

struct OperatorGradient {
  cplx value;        // <psi|O|psi>, unnormalized
  Tensors gradient;  // d value / d conj(A), same shapes as the state
};

// Value of <psi|O|psi> for a product operator, via left transfer matrices.
inline cplx product_operator_value(std::span<const SiteTensor> t, const SiteOps& ops) {
  Matrix env = Matrix::Ones(1, 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& a = t[i].m;
    if (!ops[i]) {
      env = a[0].adjoint() * env * a[0] + a[1].adjoint() * env * a[1];
      continue;
    }
    const Matrix2& o = *ops[i];
    Matrix next = Matrix::Zero(a[0].cols(), a[0].cols());
    for (int s = 0; s < 2; ++s) {
      Matrix ket = o(s, 0) * a[0] + o(s, 1) * a[1];
      next.noalias() += a[s].adjoint() * env * ket;
    }
    env = std::move(next);
  }
  return env(0, 0);
}

// <psi|O|psi> and its conjugate (Wirtinger) gradient for a product operator.
inline OperatorGradient product_operator_gradient(std::span<const SiteTensor> t, const SiteOps& ops) {
  const std::size_t n = t.size();
  // O|site> mixes physical slices: ket_s = sum_{s'} O_{s s'} A[s'].
  auto ket = [&](std::size_t i, int s) -> Matrix {
    if (!ops[i]) return t[i].m[s];
    const Matrix2& o = *ops[i];
    return o(s, 0) * t[i].m[0] + o(s, 1) * t[i].m[1];
  };
  std::vector<Matrix> left(n + 1), right(n + 1);
  left[0] = Matrix::Ones(1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    left[i + 1] = Matrix::Zero(t[i].right(), t[i].right());
    for (int s = 0; s < 2; ++s) left[i + 1].noalias() += t[i].m[s].adjoint() * left[i] * ket(i, s);
  }
  right[n] = Matrix::Ones(1, 1);
  for (std::size_t i = n; i-- > 0;) {
    right[i] = Matrix::Zero(t[i].left(), t[i].left());
    for (int s = 0; s < 2; ++s) right[i].noalias() += ket(i, s) * right[i + 1] * t[i].m[s].adjoint();
  }
  OperatorGradient out{left[n](0, 0), Tensors(n)};
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < 2; ++s) out.gradient[i].m[s] = left[i] * ket(i, s) * right[i + 1];
  return out;
}

// Real expectation <psi|P|psi> / <psi|psi> of a Hermitian Pauli string.
inline double pauli_expectation(const MPSState& mps, const PauliString& p) {
  p.check_within(mps.size());
  if (!p.hermitian()) throw InvalidArgument("pauli_expectation: coefficient must be real");
  const double z = norm_squared(mps);
  if (!(z > 0.0)) throw InvalidState("pauli_expectation: zero-norm state");
  const cplx v = product_operator_value(mps.tensors(), site_ops(p, mps.size())) / z;
  return (p.scale(mps.size()) * v).real();
}

// Schmidt coefficients across the bond after the first `cut` sites, in
// descending order, normalized so their squares sum to one.
inline Eigen::VectorXd schmidt_values(const MPSState& mps, std::size_t cut) {
  if (cut < 1 || cut >= mps.size())
    throw InvalidArgument("schmidt_values: cut " + std::to_string(cut) + " out of range [1, n-1]");
  const MPSState c = canonicalize(mps, cut - 1);
  Eigen::BDCSVD<Matrix> svd(detail::stack_rows(c[cut - 1]));
  Eigen::VectorXd s = svd.singularValues();
  const double nrm = s.norm();
  if (!(nrm > 0.0)) throw InvalidState("schmidt_values: zero-norm state");
  return s / nrm;
}

inline double entropy_from_schmidt(const Eigen::VectorXd& lambda) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double p = lambda(i) * lambda(i);
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

// Von Neumann entropy (natural log) of the first `cut` sites.
inline double entanglement_entropy(const MPSState& mps, std::size_t cut) {
  return entropy_from_schmidt(schmidt_values(mps, cut));
}

inline constexpr std::size_t kMaxRdmSites = 10;

// Reduced density matrix on an arbitrary site set. Rows/columns use
// Kronecker order over the sites sorted ascending.
inline DenseOperator reduced_density_matrix(const MPSState& mps, std::vector<std::size_t> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  if (sites.size() > kMaxRdmSites)
    throw ResourceLimit("reduced_density_matrix: at most " + std::to_string(kMaxRdmSites) + " sites");
  if (!sites.empty() && sites.back() >= mps.size()) throw InvalidArgument("reduced_density_matrix: site out of range");
  // env[ket * dim + bra] holds the (bra bond) x (ket bond) transfer block.
  std::vector<Matrix> env{Matrix::Ones(1, 1)};
  std::size_t dim = 1;
  std::size_t next = 0;
  for (std::size_t i = 0; i < mps.size(); ++i) {
    const auto& a = mps[i].m;
    if (next < sites.size() && sites[next] == i) {
      const std::size_t nd = 2 * dim;
      std::vector<Matrix> grown(nd * nd);
      for (std::size_t ket = 0; ket < dim; ++ket)
        for (std::size_t bra = 0; bra < dim; ++bra) {
          const Matrix& e = env[ket * dim + bra];
          for (int s = 0; s < 2; ++s) {
            const Matrix ea = e * a[s];
            for (int u = 0; u < 2; ++u) grown[(2 * ket + s) * nd + (2 * bra + u)] = a[u].adjoint() * ea;
          }
        }
      env = std::move(grown);
      dim = nd;
      ++next;
    } else {
      for (auto& e : env) e = (a[0].adjoint() * e * a[0] + a[1].adjoint() * e * a[1]).eval();
    }
  }
  DenseOperator rho(dim, dim);
  for (std::size_t ket = 0; ket < dim; ++ket)
    for (std::size_t bra = 0; bra < dim; ++bra)
      rho(static_cast<Eigen::Index>(ket), static_cast<Eigen::Index>(bra)) = env[ket * dim + bra](0, 0);
  const cplx tr = rho.trace();
  if (!(std::abs(tr) > 0.0)) throw InvalidState("reduced_density_matrix: zero-norm state");
  return rho / tr.real();
}

inline constexpr std::size_t kMaxDenseQubits = 24;

// Full amplitude vector, big-endian over sites.
inline Vector to_statevector(const MPSState& mps) {
  if (mps.size() > kMaxDenseQubits) throw ResourceLimit("to_statevector: too many qubits");
  Matrix psi = Matrix::Ones(1, 1);  // rows: prefix bit-strings, cols: bond
  for (std::size_t i = 0; i < mps.size(); ++i) {
    Matrix next(psi.rows() * 2, mps[i].right());
    for (Eigen::Index r = 0; r < psi.rows(); ++r)
      for (int s = 0; s < 2; ++s) next.row(2 * r + s) = psi.row(r) * mps[i].m[s];
    psi = std::move(next);
  }
  return psi.col(0);
}

// Exact MPS of a dense state by successive SVDs; singular values below
// cutoff * (largest) are dropped and bonds are capped at chi_max.
inline MPSState from_statevector(const Vector& v, Eigen::Index chi_max = 1 << 20, double cutoff = 1e-14) {
  const auto dim = static_cast<std::uint64_t>(v.size());
  if (dim < 2 || (dim & (dim - 1)) != 0) throw InvalidArgument("from_statevector: length must be a power of two >= 2");
  std::size_t n = 0;
  while ((std::uint64_t{1} << n) < dim) ++n;
  Tensors t(n);
  Matrix carry = v.transpose();  // (left bond) x (remaining bits)
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Eigen::Index l = carry.rows();
    const Eigen::Index rest = carry.cols() / 2;
    Matrix m(2 * l, rest);
    m.topRows(l) = carry.leftCols(rest);
    m.bottomRows(l) = carry.rightCols(rest);
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::Index k = 0;
    while (k < s.size() && k < chi_max && s(k) > cutoff * s(0)) ++k;
    k = std::max<Eigen::Index>(k, 1);
    t[i] = detail::unstack_rows(svd.matrixU().leftCols(k));
    carry = s.head(k).asDiagonal() * svd.matrixV().leftCols(k).adjoint();
  }
  const Eigen::Index l = carry.rows();
  t[n - 1].m[0] = carry.col(0).reshaped(l, 1);
  t[n - 1].m[1] = carry.col(1).reshaped(l, 1);
  return MPSState(std::move(t));
}

// a_coef |a> + b_coef |b> as a direct-sum MPS (bond dims add).
inline MPSState superpose(const MPSState& a, cplx a_coef, const MPSState& b, cplx b_coef) {
  if (a.size() != b.size()) throw InvalidArgument("superpose: states have different sizes");
  const std::size_t n = a.size();
  Tensors t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index la = a[i].left(), ra = a[i].right(), lb = b[i].left(), rb = b[i].right();
    for (int s = 0; s < 2; ++s) {
      if (n == 1) {
        t[i].m[s] = a_coef * a[i].m[s] + b_coef * b[i].m[s];
      } else if (i == 0) {
        Matrix m(1, ra + rb);
        m << a_coef * a[i].m[s], b_coef * b[i].m[s];
        t[i].m[s] = m;
      } else if (i + 1 == n) {
        Matrix m(la + lb, 1);
        m << a[i].m[s], b[i].m[s];
        t[i].m[s] = m;
      } else {
        Matrix m = Matrix::Zero(la + lb, ra + rb);
        m.topLeftCorner(la, ra) = a[i].m[s];
        m.bottomRightCorner(lb, rb) = b[i].m[s];
        t[i].m[s] = m;
      }
    }
  }
  return MPSState(std::move(t));
}

// SVD truncation sweep; returns the compressed state (center 0) and the
// total discarded weight relative to the state norm.
struct Compressed {
  MPSState state;
  double discarded_weight = 0.0;
};

inline Compressed compress(const MPSState& mps, Eigen::Index chi_max, double cutoff = 1e-14) {
  const std::size_t n = mps.size();
  MPSState c = canonicalize(mps, n - 1);
  Tensors t(c.tensors().begin(), c.tensors().end());
  const double total = t[n - 1].m[0].squaredNorm() + t[n - 1].m[1].squaredNorm();
  double discarded = 0.0;
  for (std::size_t i = n - 1; i > 0; --i) {
    Eigen::BDCSVD<Matrix> svd(detail::stack_cols(t[i]), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::Index k = 0;
    while (k < s.size() && k < chi_max && s(k) > cutoff * s(0)) ++k;
    k = std::max<Eigen::Index>(k, 1);
    discarded += s.tail(s.size() - k).squaredNorm();
    t[i] = detail::unstack_cols(svd.matrixV().leftCols(k).adjoint());
    const Matrix carry = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
    for (auto& m : t[i - 1].m) m = (m * carry).eval();
  }
  return {MPSState(std::move(t), 0), total > 0.0 ? discarded / total : 0.0};
}

}  // namespace mpstomo
