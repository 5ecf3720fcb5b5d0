#pragma once

// Brute-force reference implementations used only by the tests. They work on
// dense state vectors and matrices, share no code paths with the library
// beyond its data types, and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpstomo/mps.hpp"

namespace oracle {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

inline Mat single(char p) {
  Mat m(2, 2);
  switch (p) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    case 'H': m << M_SQRT1_2, M_SQRT1_2, M_SQRT1_2, -M_SQRT1_2; break;
    default: throw std::invalid_argument("oracle::single");
  }
  return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Dense operator from a string over {I,X,Y,Z,H}; character 0 is the most
// significant qubit.
inline Mat dense(const std::string& s) {
  Mat m = Mat::Identity(1, 1);
  for (char c : s) m = kron(m, single(c));
  return m;
}

// Amplitude <x|psi> by multiplying the matrices along the chain for every
// basis index x (bit of qubit 0 is the most significant).
inline Vec statevector(const mpstomo::MPSState& mps) {
  const std::size_t n = mps.size();
  Vec v(Eigen::Index(1) << n);
  for (std::uint64_t x = 0; x < (std::uint64_t(1) << n); ++x) {
    Mat acc = Mat::Identity(1, 1);
    for (std::size_t i = 0; i < n; ++i) acc = acc * mps[i].m[(x >> (n - 1 - i)) & 1];
    v(static_cast<Eigen::Index>(x)) = acc(0, 0);
  }
  return v;
}

inline std::string basis_rotation(const std::string& axes) {
  std::string s;
  for (char a : axes) s += a == 'X' ? 'H' : 'I';
  return s;
}

// |<bits| U |psi>|^2 with U = H on the X-axis qubits.
inline std::vector<double> probabilities(const Vec& psi, const std::string& axes) {
  const Vec rotated = dense(basis_rotation(axes)) * psi;
  std::vector<double> p(static_cast<std::size_t>(rotated.size()));
  for (Eigen::Index i = 0; i < rotated.size(); ++i) p[static_cast<std::size_t>(i)] = std::norm(rotated(i));
  return p;
}

inline double expectation(const Vec& psi, const Mat& op) { return (psi.adjoint() * op * psi)(0, 0).real() / psi.squaredNorm(); }

// Partial trace onto `sites` (any order; the output keeps the given order,
// first listed site most significant).
inline Mat partial_trace(const Vec& psi_in, std::size_t n, const std::vector<std::size_t>& sites) {
  const Vec psi = psi_in / psi_in.norm();
  const std::size_t k = sites.size();
  Mat rho = Mat::Zero(Eigen::Index(1) << k, Eigen::Index(1) << k);
  auto bit = [&](std::uint64_t x, std::size_t q) { return (x >> (n - 1 - q)) & 1; };
  for (std::uint64_t x = 0; x < (std::uint64_t(1) << n); ++x)
    for (std::uint64_t y = 0; y < (std::uint64_t(1) << n); ++y) {
      bool same_env = true;
      for (std::size_t q = 0; q < n && same_env; ++q) {
        bool kept = false;
        for (auto s : sites) kept = kept || s == q;
        if (!kept && bit(x, q) != bit(y, q)) same_env = false;
      }
      if (!same_env) continue;
      std::uint64_t a = 0, b = 0;
      for (auto s : sites) {
        a = (a << 1) | bit(x, s);
        b = (b << 1) | bit(y, s);
      }
      rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += psi(static_cast<Eigen::Index>(x)) * std::conj(psi(static_cast<Eigen::Index>(y)));
    }
  return rho;
}

// Singular values of psi reshaped as (2^cut x 2^(n-cut)), descending.
inline Eigen::VectorXd schmidt(const Vec& psi_in, std::size_t n, std::size_t cut) {
  const Vec psi = psi_in / psi_in.norm();
  Mat m(Eigen::Index(1) << cut, Eigen::Index(1) << (n - cut));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = psi(r * m.cols() + c);
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues();
}

inline double entropy(const Eigen::VectorXd& lambda) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double p = lambda(i) * lambda(i);
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

inline double lowest_eigenvalue(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Upper regularized incomplete gamma Q(a, x) by series / continued fraction,
// for chi-square p-values.
inline double gamma_q(double a, double x) {
  if (x <= 0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double sum = 1.0 / a, del = sum, ap = a;
    for (int i = 0; i < 10000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1.0 / 1e-300, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

// Pearson chi-square p-value of observed counts against expected
// probabilities. Cells with expectation below 5 are pooled.
inline double chi_square_p(const std::vector<std::size_t>& counts, const std::vector<double>& probs) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  double stat = 0.0, pooled_o = 0.0, pooled_e = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * total;
    if (e < 5.0) {
      pooled_o += static_cast<double>(counts[i]);
      pooled_e += e;
      continue;
    }
    stat += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
    ++cells;
  }
  if (pooled_e >= 5.0) {
    stat += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++cells;
  }
  return gamma_q(0.5 * (cells - 1), 0.5 * stat);
}

// Column x of the Rydberg-atom Hamiltonian
//   H = 1/2 sum_l X_l - delta sum_l n_l - h_bd sum_{l in boundary} n_l + v sum_{pairs} n_a n_b
// assembled from atom positions (n_l = 1 on bit 0). Pairs are atoms whose
// distance, minimized over translations by `period` along y, is at most `radius`.
struct RubyOracle {
  std::vector<std::pair<double, double>> xy;
  std::vector<std::size_t> boundary;
  double period = 0.0, radius = 2.0, delta = 0.0, h_bd = 0.0, v = 47.0;

  std::vector<std::pair<std::size_t, std::size_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < xy.size(); ++a)
      for (std::size_t b = a + 1; b < xy.size(); ++b) {
        double best = 1e300;
        for (int shift = -1; shift <= 1; ++shift)
          best = std::min(best, std::hypot(xy[a].first - xy[b].first, xy[a].second - xy[b].second + shift * period));
        if (best <= radius + 1e-9) out.emplace_back(a, b);
      }
    return out;
  }

  Vec column(std::uint64_t x, const std::vector<std::pair<std::size_t, std::size_t>>& pr) const {
    const std::size_t n = xy.size();
    auto occ = [&](std::size_t l) { return ((x >> (n - 1 - l)) & 1) == 0 ? 1.0 : 0.0; };
    double diag = 0.0;
    for (std::size_t l = 0; l < n; ++l) diag -= delta * occ(l);
    for (auto b : boundary) diag -= h_bd * occ(b);
    for (const auto& [a, b] : pr) diag += v * occ(a) * occ(b);
    Vec col = Vec::Zero(Eigen::Index(1) << n);
    col(static_cast<Eigen::Index>(x)) = diag;
    for (std::size_t l = 0; l < n; ++l) col(static_cast<Eigen::Index>(x ^ (std::uint64_t(1) << (n - 1 - l)))) += 0.5;
    return col;
  }
};

}  // namespace oracle
