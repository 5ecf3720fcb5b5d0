#pragma once

#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpstomo/measurement.hpp"
#include "mpstomo/pauli.hpp"

namespace mpstomo {

// Single-shot variance proxy: 2^k for a Y-free string of locality k,
// infinity when Y appears (the observable is invisible to XZ measurements).
inline double shadow_norm(const PauliString& p) {
  if (p.has_y()) return std::numeric_limits<double>::infinity();
  return std::ldexp(1.0, static_cast<int>(p.locality()));
}

// Inverted single-qubit snapshot 2 U^dagger |b><b| U - I/2.
inline Matrix2 shadow_factor(Axis axis, std::uint8_t bit) {
  const auto w = rotation_weights(axis, bit);  // U^dagger |b> has real entries w
  Matrix2 f;
  f << 2 * w[0] * w[0] - 0.5, 2 * w[0] * w[1], 2 * w[1] * w[0], 2 * w[1] * w[1] - 0.5;
  return f;
}

inline std::vector<Matrix2> single_shot_shadow(const MeasurementRecord& r) {
  std::vector<Matrix2> out(r.basis.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = shadow_factor(r.basis[i], r.bits[i]);
  return out;
}

namespace detail {

inline std::size_t qubits_of(const DenseOperator& op) {
  std::size_t n = 0;
  while ((Eigen::Index{1} << n) < op.rows()) ++n;
  if (op.rows() != op.cols() || (Eigen::Index{1} << n) != op.rows())
    throw InvalidArgument("operator is not a square 2^n x 2^n matrix");
  return n;
}

// Apply a single-qubit superoperator to every qubit of a dense operator.
inline DenseOperator apply_sitewise(const DenseOperator& op, const std::function<Matrix2(const Matrix2&)>& f) {
  const std::size_t n = qubits_of(op);
  DenseOperator out = op;
  const Eigen::Index dim = op.rows();
  for (std::size_t q = 0; q < n; ++q) {
    const Eigen::Index bit = Eigen::Index{1} << (n - 1 - q);
    for (Eigen::Index r = 0; r < dim; ++r) {
      if (r & bit) continue;
      for (Eigen::Index c = 0; c < dim; ++c) {
        if (c & bit) continue;
        Matrix2 b;
        b << out(r, c), out(r, c | bit), out(r | bit, c), out(r | bit, c | bit);
        const Matrix2 m = f(b);
        out(r, c) = m(0, 0);
        out(r, c | bit) = m(0, 1);
        out(r | bit, c) = m(1, 0);
        out(r | bit, c | bit) = m(1, 1);
      }
    }
  }
  return out;
}

inline cplx tr_x(const Matrix2& b) { return b(0, 1) + b(1, 0); }
inline cplx tr_z(const Matrix2& b) { return b(0, 0) - b(1, 1); }

}  // namespace detail

inline constexpr std::size_t kMaxChannelQubits = 8;

// Expected snapshot map of random-XZ measurements, qubit by qubit:
// B -> (tr(BX) X + tr(BZ) Z)/4 + tr(B) I/2.
inline DenseOperator measurement_channel_apply(const DenseOperator& op) {
  if (detail::qubits_of(op) > kMaxChannelQubits) throw ResourceLimit("measurement channel limited to 8 qubits");
  return detail::apply_sitewise(op, [](const Matrix2& b) {
    Matrix2 x, z;
    x << 0, 1, 1, 0;
    z << 1, 0, 0, -1;
    return Matrix2(0.25 * (detail::tr_x(b) * x + detail::tr_z(b) * z) + 0.5 * b.trace() * Matrix2::Identity());
  });
}

// Moore-Penrose pseudoinverse of the channel: B -> tr(BX) X + tr(BZ) Z + tr(B) I/2.
inline DenseOperator measurement_channel_pinv(const DenseOperator& op) {
  if (detail::qubits_of(op) > kMaxChannelQubits) throw ResourceLimit("measurement channel limited to 8 qubits");
  return detail::apply_sitewise(op, [](const Matrix2& b) {
    Matrix2 x, z;
    x << 0, 1, 1, 0;
    z << 1, 0, 0, -1;
    return Matrix2(detail::tr_x(b) * x + detail::tr_z(b) * z + 0.5 * b.trace() * Matrix2::Identity());
  });
}

// Orthogonal projection onto the span of {I, X, Z} strings.
inline DenseOperator visible_projection(const DenseOperator& op) {
  return detail::apply_sitewise(op, [](const Matrix2& b) {
    Matrix2 x, z;
    x << 0, 1, 1, 0;
    z << 1, 0, 0, -1;
    return Matrix2(0.5 * (detail::tr_x(b) * x + detail::tr_z(b) * z + b.trace() * Matrix2::Identity()));
  });
}

// ---- Pauli estimation -----------------------------------------------------

struct PauliEstimate {
  PauliString observable;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t shots_used = 0;  // shots whose bases can see the observable
  double shadow_norm = 0.0;
};

// Running sums for a fixed list of Pauli observables. Accumulators built on
// disjoint shards of one dataset can be merged in any order.
class ShadowAccumulator {
 public:
  ShadowAccumulator(std::size_t n, Ensemble ensemble, std::vector<PauliString> observables)
      : n_(n), ensemble_(ensemble), obs_(std::move(observables)), sum_(obs_.size(), 0.0), sum_sq_(obs_.size(), 0.0),
        compatible_(obs_.size(), 0) {
    for (const auto& p : obs_) {
      p.check_within(n_);
      if (!p.hermitian()) throw InvalidArgument("estimated observables need real coefficients");
      if (p.has_y())
        throw InvisibleObservable("observable " + p.str() + " contains Y and is invisible to XZ measurements");
      if (ensemble_ == Ensemble::GlobalXZ && !pure_axis(p))
        throw InvisibleObservable("observable " + p.str() + " mixes X and Z and cannot be read from global-xz data");
    }
  }

  void add(const MeasurementRecord& r) {
    if (r.basis.size() != n_ || r.bits.size() != n_) throw InvalidArgument("record length does not match accumulator");
    ++count_;
    for (std::size_t k = 0; k < obs_.size(); ++k) {
      const auto& p = obs_[k];
      bool visible = true;
      int parity = 0;
      for (const auto& [site, pauli] : p.support()) {
        const Axis need = pauli == Pauli::X ? Axis::X : Axis::Z;
        if (r.basis[site] != need) {
          visible = false;
          break;
        }
        parity ^= r.bits[site];
      }
      if (!visible) continue;
      ++compatible_[k];
      const double sign = parity ? -1.0 : 1.0;
      // Random-XZ: unbiased single-shot value 2^k (-1)^parity on compatible
      // shots, 0 otherwise. Global-XZ: plain outcome parity over compatible shots.
      const double v = ensemble_ == Ensemble::RandomXZ ? std::ldexp(sign, static_cast<int>(p.locality())) : sign;
      sum_[k] += v;
      sum_sq_[k] += v * v;
    }
  }

  void add(const Dataset& ds) {
    for (const auto& r : ds.records) add(r);
  }

  void merge(const ShadowAccumulator& other) {
    if (other.n_ != n_ || other.ensemble_ != ensemble_ || other.obs_ != obs_)
      throw InvalidArgument("cannot merge accumulators over different observables");
    count_ += other.count_;
    for (std::size_t k = 0; k < obs_.size(); ++k) {
      sum_[k] += other.sum_[k];
      sum_sq_[k] += other.sum_sq_[k];
      compatible_[k] += other.compatible_[k];
    }
  }

  std::size_t count() const { return count_; }
  const std::vector<PauliString>& observables() const { return obs_; }

  PauliEstimate estimate(std::size_t k) const {
    const auto& p = obs_.at(k);
    const double c = p.scale(n_).real();
    PauliEstimate e{p, 0.0, 0.0, compatible_[k], shadow_norm(p)};
    // Shots averaged over: all of them for random-XZ, the compatible ones for global-XZ.
    const std::size_t m = ensemble_ == Ensemble::RandomXZ ? count_ : compatible_[k];
    if (m == 0) throw InvalidArgument("no usable shots for observable " + p.str());
    const double mean = sum_[k] / static_cast<double>(m);
    const double var = m > 1 ? std::max(0.0, (sum_sq_[k] - m * mean * mean) / static_cast<double>(m - 1)) : 0.0;
    e.estimate = c * mean;
    e.std_error = std::abs(c) * std::sqrt(var / static_cast<double>(m));
    return e;
  }

  std::vector<PauliEstimate> estimates() const {
    std::vector<PauliEstimate> out;
    for (std::size_t k = 0; k < obs_.size(); ++k) out.push_back(estimate(k));
    return out;
  }

  // Sums exposed for exact merge checks.
  const std::vector<double>& sums() const { return sum_; }
  const std::vector<double>& sums_of_squares() const { return sum_sq_; }

 private:
  static bool pure_axis(const PauliString& p) {
    bool has_x = false, has_z = false;
    for (const auto& [s, q] : p.support()) (q == Pauli::X ? has_x : has_z) = true;
    return !(has_x && has_z);
  }

  std::size_t n_;
  Ensemble ensemble_;
  std::vector<PauliString> obs_;
  std::size_t count_ = 0;
  std::vector<double> sum_, sum_sq_;
  std::vector<std::size_t> compatible_;
};

inline PauliEstimate estimate_pauli(const Dataset& ds, const PauliString& p) {
  if (ds.empty()) throw InvalidArgument("estimate_pauli: empty dataset");
  ShadowAccumulator acc(ds.n, ds.provenance.ensemble, {p});
  acc.add(ds);
  return acc.estimate(0);
}

inline std::vector<PauliEstimate> estimate_paulis(const Dataset& ds, const std::vector<PauliString>& ps) {
  if (ds.empty()) throw InvalidArgument("estimate_paulis: empty dataset");
  ShadowAccumulator acc(ds.n, ds.provenance.ensemble, ps);
  acc.add(ds);
  return acc.estimates();
}

inline nlohmann::json estimate_to_json(const PauliEstimate& e) {
  return {{"observable", e.observable.str()},
          {"estimate", e.estimate},
          {"stderr", e.std_error},
          {"shots_used", e.shots_used},
          {"shadow_norm", std::isinf(e.shadow_norm) ? nlohmann::json("inf") : nlohmann::json(e.shadow_norm)}};
}

inline PauliEstimate estimate_from_json(const nlohmann::json& j) {
  PauliEstimate e;
  e.observable = PauliString::parse(j.at("observable").get<std::string>());
  e.estimate = j.at("estimate").get<double>();
  e.std_error = j.value("stderr", 0.0);
  e.shots_used = j.value("shots_used", std::size_t{0});
  e.shadow_norm = shadow_norm(e.observable);
  return e;
}

// ---- subsystem density matrices --------------------------------------------

// Mean over shots of the tensor product of single-shot factors on `sites`
// (Kronecker order over the sites as given). Shots are grouped by their
// restricted (basis, bits) pattern so each distinct product is built once.
inline DenseOperator estimate_subsystem_rdm_projected(const Dataset& ds, const std::vector<std::size_t>& sites) {
  if (sites.size() > kMaxChannelQubits) throw ResourceLimit("subsystem RDM estimate limited to 8 sites");
  if (ds.empty()) throw InvalidArgument("estimate_subsystem_rdm_projected: empty dataset");
  for (auto s : sites)
    if (s >= ds.n) throw InvalidArgument("subsystem site out of range");
  std::map<std::uint32_t, std::size_t> patterns;
  for (const auto& r : ds.records) {
    std::uint32_t key = 0;
    for (auto s : sites) key = (key << 2) | (r.basis[s] == Axis::X ? 2u : 0u) | r.bits[s];
    ++patterns[key];
  }
  const Eigen::Index dim = Eigen::Index{1} << sites.size();
  DenseOperator rho = DenseOperator::Zero(dim, dim);
  for (const auto& [key, count] : patterns) {
    DenseOperator prod = DenseOperator::Identity(1, 1);
    for (std::size_t j = 0; j < sites.size(); ++j) {
      const std::uint32_t code = (key >> (2 * (sites.size() - 1 - j))) & 3u;
      prod = kron(prod, shadow_factor(code & 2u ? Axis::X : Axis::Z, static_cast<std::uint8_t>(code & 1u)));
    }
    rho += static_cast<double>(count) * prod;
  }
  return rho / static_cast<double>(ds.size());
}

// ---- reconstruction of real pure states from XZ statistics -----------------

using ProbabilityOracle = std::function<double(const BasisString&, const Bits&)>;

inline constexpr std::size_t kMaxReconstructionQubits = 8;

// Inductive sign recovery. Amplitude moduli come from the all-Z
// distribution. Moving from the last qubit to the first, the blocks of
// strings that share a prefix and differ in qubit k are glued together: pick
// the nonzero pair (b0, b1) across the two halves with the fewest differing
// bits, and read the relative sign off the expectation of
//   O = |+><+| on k, X on the other differing bits, |b0_j><b0_j| elsewhere,
// which is measurable with X on the differing bits and Z everywhere else.
inline Eigen::VectorXd reconstruct_real_pure_state(const ProbabilityOracle& oracle, std::size_t n) {
  if (n == 0 || n > kMaxReconstructionQubits) throw ResourceLimit("reconstruction supports 1..8 qubits");
  const std::size_t dim = std::size_t{1} << n;
  const BasisString all_z(n, Axis::Z);

  auto probe = [&](const BasisString& b, const Bits& bits) {
    const double p = oracle(b, bits);
    if (!std::isfinite(p) || p < -1e-12 || p > 1.0 + 1e-12)
      throw InvalidOracle("oracle returned probability " + std::to_string(p) + " for " + b.str() + "/" + format_bits(bits));
    return std::clamp(p, 0.0, 1.0);
  };

  Eigen::VectorXd c(dim);
  double total = 0.0;
  for (std::size_t x = 0; x < dim; ++x) {
    const double p = probe(all_z, index_to_bits(x, n));
    c(static_cast<Eigen::Index>(x)) = std::sqrt(p);
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidOracle("Z-basis probabilities sum to " + std::to_string(total));
  const double support_tol = 1e-12;

  auto bit_of = [n](std::size_t x, std::size_t q) { return (x >> (n - 1 - q)) & 1u; };

  for (std::size_t k = n; k-- > 0;) {
    const std::size_t suffix_bits = n - 1 - k;  // bits after qubit k
    const std::size_t half = std::size_t{1} << suffix_bits;
    for (std::size_t prefix = 0; prefix < (std::size_t{1} << k); ++prefix) {
      const std::size_t base0 = (prefix << (suffix_bits + 1));
      const std::size_t base1 = base0 | half;
      // Closest nonzero pair across the two halves.
      std::size_t best0 = 0, best1 = 0;
      int best_d = std::numeric_limits<int>::max();
      for (std::size_t u = 0; u < half; ++u) {
        if (c(static_cast<Eigen::Index>(base0 + u)) <= support_tol) continue;
        for (std::size_t v = 0; v < half; ++v) {
          if (c(static_cast<Eigen::Index>(base1 + v)) <= support_tol) continue;
          const int d = std::popcount(u ^ v);
          if (d < best_d) {
            best_d = d;
            best0 = base0 + u;
            best1 = base1 + v;
          }
        }
      }
      if (best_d == std::numeric_limits<int>::max()) continue;  // one half is empty: nothing to glue

      const std::size_t mask = best0 ^ best1;  // includes qubit k
      const std::size_t dmask = mask & ~(std::size_t{1} << suffix_bits);
      BasisString basis(n, Axis::Z);
      std::vector<std::size_t> flip;
      for (std::size_t q = 0; q < n; ++q)
        if (bit_of(mask, q)) {
          basis[q] = Axis::X;
          flip.push_back(q);
        }

      // Measured <O>: outcome indicator (bit k reads +) times parity of the
      // other X outcomes, restricted to Z outcomes matching b0.
      double measured = 0.0;
      const Bits b0 = index_to_bits(best0, n);
      for (std::size_t pattern = 0; pattern < (std::size_t{1} << flip.size()); ++pattern) {
        Bits bits = b0;
        int parity = 0;
        bool plus_on_k = true;
        for (std::size_t j = 0; j < flip.size(); ++j) {
          const auto v = static_cast<std::uint8_t>((pattern >> j) & 1u);
          bits[flip[j]] = v;
          if (flip[j] == k) {
            plus_on_k = v == 0;
          } else {
            parity ^= v;
          }
        }
        if (!plus_on_k) continue;
        measured += (parity ? -1.0 : 1.0) * probe(basis, bits);
      }

      // Part of <O> already fixed by the signs inside each half:
      // (1/2) sum over the subspace of c_x c_{x xor dmask}.
      double known = 0.0;
      for (std::size_t pattern = 0; pattern < (std::size_t{1} << flip.size()); ++pattern) {
        std::size_t x = best0 & ~mask;
        for (std::size_t j = 0; j < flip.size(); ++j)
          if ((pattern >> j) & 1u) x |= std::size_t{1} << (n - 1 - flip[j]);
        known += 0.5 * c(static_cast<Eigen::Index>(x)) * c(static_cast<Eigen::Index>(x ^ dmask));
      }
      // The cross part equals c_b0 c_b1; no other cross pair in the subspace
      // is nonzero because (b0, b1) is the closest one.
      const double cross = measured - known;
      const double magnitude = std::abs(c(static_cast<Eigen::Index>(best0)) * c(static_cast<Eigen::Index>(best1)));
      if (std::abs(std::abs(cross) - magnitude) > 1e-6 + 1e-6 * magnitude)
        throw InvalidOracle("XZ probabilities are inconsistent with a real pure state");
      const double current = c(static_cast<Eigen::Index>(best0)) * c(static_cast<Eigen::Index>(best1));
      if ((cross < 0) != (current < 0)) c.segment(static_cast<Eigen::Index>(base1), static_cast<Eigen::Index>(half)) *= -1.0;
    }
  }
  return c / c.norm();
}

}  // namespace mpstomo
