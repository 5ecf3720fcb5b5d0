#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mpstomo/mpo.hpp"
#include "mpstomo/mps.hpp"

namespace mpstomo {

struct DmrgConfig {
  Eigen::Index chi_max = 10;
  std::size_t n_sweeps = 20;
  double energy_tolerance = 1e-10;
  std::size_t lanczos_iterations = 40;
  double svd_cutoff = 1e-12;
  std::uint64_t seed = 1;

  void validate() const {
    if (chi_max < 1) throw InvalidArgument("DMRG chi_max must be >= 1");
    if (!(energy_tolerance > 0.0)) throw InvalidArgument("DMRG energy tolerance must be > 0");
    if (n_sweeps < 1) throw InvalidArgument("DMRG needs at least one sweep");
    if (lanczos_iterations < 2) throw InvalidArgument("DMRG needs at least two Lanczos iterations");
  }
};

struct DmrgResult {
  MPSState state;                // normalized, canonical center 0
  std::vector<double> energies;  // one entry per full (right and back) sweep
  double energy = 0.0;
  bool converged = false;
  double max_discarded_weight = 0.0;
};

struct LanczosResult {
  double value = 0.0;
  Vector vector;
};

// Lowest eigenpair of a Hermitian map by Lanczos with full
// reorthogonalization, started from `start`.
inline LanczosResult lanczos_ground(const std::function<Vector(const Vector&)>& apply, const Vector& start,
                                    std::size_t max_iter, double tol = 1e-13) {
  const Eigen::Index dim = start.size();
  const auto m_max = static_cast<Eigen::Index>(std::min<std::size_t>(max_iter, static_cast<std::size_t>(dim)));
  Matrix basis(dim, m_max);
  std::vector<double> alpha, beta;
  Vector v = start;
  if (v.norm() < 1e-300) v = Vector::Ones(dim);
  v.normalize();
  double previous = std::numeric_limits<double>::infinity();
  LanczosResult best;
  for (Eigen::Index k = 0; k < m_max; ++k) {
    basis.col(k) = v;
    Vector w = apply(v);
    alpha.push_back(v.dot(w).real());
    for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
    const double b = w.norm();

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i <= k; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i > 0) t(i, i - 1) = t(i - 1, i) = beta[static_cast<std::size_t>(i - 1)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double value = es.eigenvalues()(0);
    const bool done = b < 1e-12 || std::abs(value - previous) < tol || k + 1 == m_max;
    if (done) {
      best.value = value;
      best.vector = basis.leftCols(k + 1) * es.eigenvectors().col(0).cast<cplx>();
      best.vector.normalize();
      return best;
    }
    previous = value;
    beta.push_back(b);
    v = w / b;
  }
  return best;
}

namespace detail {

using Env = std::vector<Matrix>;  // one (bra x ket) or (ket x bra) block per MPO bond state

inline Env grow_left(const Env& left, const SiteTensor& a, const MPOSite& w) {
  Env out(w.right(), Matrix::Zero(a.right(), a.right()));
  for (Eigen::Index l = 0; l < w.left(); ++l)
    for (int s = 0; s < 2; ++s) {
      const Matrix bra = a.m[s].adjoint() * left[l];
      for (int t = 0; t < 2; ++t) {
        bool any = false;
        for (Eigen::Index r = 0; r < w.right() && !any; ++r) any = w.at(s, t)(l, r) != cplx(0);
        if (!any) continue;
        const Matrix x = bra * a.m[t];
        for (Eigen::Index r = 0; r < w.right(); ++r)
          if (w.at(s, t)(l, r) != cplx(0)) out[r] += w.at(s, t)(l, r) * x;
      }
    }
  return out;
}

inline Env grow_right(const Env& right, const SiteTensor& a, const MPOSite& w) {
  Env out(w.left(), Matrix::Zero(a.left(), a.left()));
  for (Eigen::Index r = 0; r < w.right(); ++r)
    for (int t = 0; t < 2; ++t) {
      const Matrix ket = a.m[t] * right[r];
      for (int s = 0; s < 2; ++s) {
        bool any = false;
        for (Eigen::Index l = 0; l < w.left() && !any; ++l) any = w.at(s, t)(l, r) != cplx(0);
        if (!any) continue;
        const Matrix x = ket * a.m[s].adjoint();
        for (Eigen::Index l = 0; l < w.left(); ++l)
          if (w.at(s, t)(l, r) != cplx(0)) out[l] += w.at(s, t)(l, r) * x;
      }
    }
  return out;
}

// Two-site wavefunction theta[2*s1 + s2] of shape (chi_l x chi_r), flattened
// slice by slice in column-major order.
struct TwoSite {
  Eigen::Index chi_l = 0, chi_r = 0;

  Vector flatten(const std::array<Matrix, 4>& th) const {
    Vector v(4 * chi_l * chi_r);
    for (int k = 0; k < 4; ++k) v.segment(k * chi_l * chi_r, chi_l * chi_r) = th[k].reshaped();
    return v;
  }
  std::array<Matrix, 4> unflatten(const Vector& v) const {
    std::array<Matrix, 4> th;
    for (int k = 0; k < 4; ++k) th[k] = v.segment(k * chi_l * chi_r, chi_l * chi_r).reshaped(chi_l, chi_r);
    return th;
  }
};

inline std::array<Matrix, 4> apply_two_site(const Env& left, const Env& right, const MPOSite& w1, const MPOSite& w2,
                                            const std::array<Matrix, 4>& th) {
  const Eigen::Index cl = th[0].rows(), cr = th[0].cols();
  // y[b][2*s1 + t2] = sum_{a, t1} W1_{s1 t1}(a, b) L[a] theta[t1 t2]
  std::vector<std::array<Matrix, 4>> y(w1.right());
  for (auto& arr : y)
    for (auto& m : arr) m = Matrix::Zero(cl, cr);
  for (Eigen::Index a = 0; a < w1.left(); ++a)
    for (int t1 = 0; t1 < 2; ++t1)
      for (int t2 = 0; t2 < 2; ++t2) {
        const Matrix lt = left[a] * th[2 * t1 + t2];
        for (int s1 = 0; s1 < 2; ++s1)
          for (Eigen::Index b = 0; b < w1.right(); ++b) {
            const cplx c = w1.at(s1, t1)(a, b);
            if (c != cplx(0)) y[b][2 * s1 + t2] += c * lt;
          }
      }
  std::array<Matrix, 4> out;
  for (auto& m : out) m = Matrix::Zero(cl, cr);
  for (Eigen::Index c = 0; c < w2.right(); ++c)
    for (Eigen::Index b = 0; b < w2.left(); ++b)
      for (int t2 = 0; t2 < 2; ++t2)
        for (int s2 = 0; s2 < 2; ++s2) {
          const cplx coef = w2.at(s2, t2)(b, c);
          if (coef == cplx(0)) continue;
          for (int s1 = 0; s1 < 2; ++s1) out[2 * s1 + s2].noalias() += coef * (y[b][2 * s1 + t2] * right[c]);
        }
  return out;
}

}  // namespace detail

// Two-site DMRG ground-state search.
inline DmrgResult dmrg_solve(const MPO& mpo, const DmrgConfig& config = {}) {
  config.validate();
  const std::size_t n = mpo.size();
  DmrgResult result;

  if (n == 1) {
    Matrix2 h;
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t) h(s, t) = mpo[0].at(s, t)(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix2> es(h);
    Tensors t(1);
    t[0].m = {Matrix::Constant(1, 1, es.eigenvectors()(0, 0)), Matrix::Constant(1, 1, es.eigenvectors()(1, 0))};
    result.state = MPSState(std::move(t), 0);
    result.energy = es.eigenvalues()(0);
    result.energies = {result.energy};
    result.converged = true;
    return result;
  }

  MPSState init = canonicalize(new_random_mps(n, config.chi_max, config.seed, Entries::Real), 0);
  Tensors a(init.tensors().begin(), init.tensors().end());
  {
    const double z = std::sqrt(norm_squared(a));
    for (auto& m : a[0].m) m /= z;
  }

  std::vector<detail::Env> left(n + 1), right(n + 1);
  left[0] = {Matrix::Ones(1, 1)};
  right[n] = {Matrix::Ones(1, 1)};
  for (std::size_t i = n; i-- > 1;) right[i] = detail::grow_right(right[i + 1], a[i], mpo[i]);

  auto optimize = [&](std::size_t i, bool moving_right) {
    detail::TwoSite shape{a[i].left(), a[i + 1].right()};
    std::array<Matrix, 4> th;
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2) th[2 * s1 + s2] = a[i].m[s1] * a[i + 1].m[s2];
    auto apply = [&](const Vector& v) {
      return shape.flatten(detail::apply_two_site(left[i], right[i + 2], mpo[i], mpo[i + 1], shape.unflatten(v)));
    };
    const LanczosResult eig = lanczos_ground(apply, shape.flatten(th), config.lanczos_iterations);
    th = shape.unflatten(eig.vector);

    Matrix big(2 * shape.chi_l, 2 * shape.chi_r);
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2)
        big.block(s1 * shape.chi_l, s2 * shape.chi_r, shape.chi_l, shape.chi_r) = th[2 * s1 + s2];
    Eigen::BDCSVD<Matrix> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::Index k = 0;
    while (k < sv.size() && k < config.chi_max && sv(k) > config.svd_cutoff * sv(0)) ++k;
    k = std::max<Eigen::Index>(k, 1);
    const double total = sv.squaredNorm();
    result.max_discarded_weight =
        std::max(result.max_discarded_weight, total > 0 ? sv.tail(sv.size() - k).squaredNorm() / total : 0.0);
    const Eigen::VectorXd kept = sv.head(k) / sv.head(k).norm();

    Matrix u = svd.matrixU().leftCols(k);
    Matrix vt = svd.matrixV().leftCols(k).adjoint();
    if (moving_right) {
      vt = kept.cast<cplx>().asDiagonal() * vt;
    } else {
      u = u * kept.cast<cplx>().asDiagonal();
    }
    for (int s = 0; s < 2; ++s) {
      a[i].m[s] = u.middleRows(s * shape.chi_l, shape.chi_l);
      a[i + 1].m[s] = vt.middleCols(s * shape.chi_r, shape.chi_r);
    }
    return eig.value;
  };

  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t sweep = 0; sweep < config.n_sweeps; ++sweep) {
    double energy = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      energy = optimize(i, true);
      left[i + 1] = detail::grow_left(left[i], a[i], mpo[i]);
    }
    for (std::size_t i = n - 1; i-- > 0;) {
      energy = optimize(i, false);
      right[i + 1] = detail::grow_right(right[i + 2], a[i + 1], mpo[i + 1]);
    }
    result.energies.push_back(energy);
    if (std::abs(energy - previous) < config.energy_tolerance) {
      result.converged = true;
      break;
    }
    previous = energy;
  }
  result.energy = result.energies.back();
  result.state = MPSState(std::move(a), 0);
  return result;
}

}  // namespace mpstomo
