#include <gtest/gtest.h>

#include "mpstomo/hamiltonians.hpp"
#include "mpstomo/shadows.hpp"
#include "oracles.hpp"

using namespace mpstomo;

namespace {

// U^dagger |b><b| U for the axis string, built from the dense Hadamard.
oracle::Mat projector(const std::string& axes, std::uint64_t b) {
  const std::size_t n = axes.size();
  oracle::Mat ket = oracle::Mat::Zero(Eigen::Index(1) << n, Eigen::Index(1) << n);
  ket(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) = 1.0;
  const oracle::Mat u = oracle::dense(oracle::basis_rotation(axes));
  return u.adjoint() * ket * u;
}

std::string axes_of(std::uint32_t code, std::size_t n) {
  std::string s;
  for (std::size_t k = 0; k < n; ++k) s += ((code >> (n - 1 - k)) & 1) ? 'X' : 'Z';
  return s;
}

// Average over all random-XZ bases and outcomes of tr(P_{U,b} O) P_{U,b}.
oracle::Mat channel_by_enumeration(const oracle::Mat& op, std::size_t n) {
  oracle::Mat out = oracle::Mat::Zero(op.rows(), op.cols());
  for (std::uint32_t code = 0; code < (1u << n); ++code)
    for (std::uint64_t b = 0; b < (std::uint64_t(1) << n); ++b) {
      const oracle::Mat p = projector(axes_of(code, n), b);
      out += (p * op).trace() * p;
    }
  return out / static_cast<double>(1u << n);
}

Dataset one_record(const std::string& axes, std::uint64_t bits, Ensemble e = Ensemble::RandomXZ) {
  Dataset ds;
  ds.n = axes.size();
  ds.provenance.ensemble = e;
  ds.records.push_back({BasisString::parse(axes), index_to_bits(bits, axes.size())});
  return ds;
}

}  // namespace

TEST(ShadowNorm, Examples) {
  EXPECT_EQ(shadow_norm(PauliString::parse("XII")), 2.0);
  EXPECT_EQ(shadow_norm(PauliString::parse("XZ")), 4.0);
  EXPECT_TRUE(std::isinf(shadow_norm(PauliString::parse("YY"))));
  EXPECT_EQ(shadow_norm(PauliString::parse("III")), 1.0);
}

TEST(ShadowFactor, HermitianTraceOneSpectrum) {
  for (Axis a : {Axis::X, Axis::Z})
    for (std::uint8_t b : {0, 1}) {
      const Matrix2 f = shadow_factor(a, b);
      EXPECT_LT((f - f.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_NEAR(f.trace().real(), 1.0, 1e-15);
      Eigen::SelfAdjointEigenSolver<Matrix2> es(f);
      EXPECT_NEAR(es.eigenvalues()(0), -0.5, 1e-14);
      EXPECT_NEAR(es.eigenvalues()(1), 1.5, 1e-14);
      // 2 P - I/2 with P the measured projector
      const oracle::Mat want = 2.0 * projector(a == Axis::X ? "X" : "Z", b) - 0.5 * oracle::Mat::Identity(2, 2);
      EXPECT_LT((oracle::Mat(f) - want).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Channel, PauliEigenvalues) {
  const oracle::Mat id = oracle::dense("II") / 2.0;
  EXPECT_LT((measurement_channel_apply(id) - id).cwiseAbs().maxCoeff(), 1e-14);
  const oracle::Mat xz = oracle::dense("XZ") / 2.0;
  EXPECT_LT((measurement_channel_apply(xz) - 0.25 * xz).cwiseAbs().maxCoeff(), 1e-14);
  const oracle::Mat yi = oracle::dense("YI") / 2.0;
  EXPECT_LT(measurement_channel_apply(yi).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Channel, MatchesEnumerationOverBasesAndOutcomes) {
  for (std::size_t n : {1u, 2u, 3u}) {
    const oracle::Mat op = oracle::Mat::Random(Eigen::Index(1) << n, Eigen::Index(1) << n);
    EXPECT_LT((measurement_channel_apply(op) - channel_by_enumeration(op, n)).cwiseAbs().maxCoeff(), 1e-12) << n;
  }
}

TEST(Channel, PseudoinverseOnVisibleSpace) {
  for (std::size_t n : {1u, 2u, 3u, 4u}) {
    const oracle::Mat op = oracle::Mat::Random(Eigen::Index(1) << n, Eigen::Index(1) << n);
    const auto vis = visible_projection(op);
    EXPECT_LT((measurement_channel_pinv(measurement_channel_apply(op)) - vis).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((measurement_channel_apply(measurement_channel_pinv(vis)) - vis).cwiseAbs().maxCoeff(), 1e-12);
    std::string y(n, 'I');
    y[0] = 'Y';
    EXPECT_LT(measurement_channel_pinv(measurement_channel_apply(oracle::dense(y))).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_THROW(measurement_channel_apply(oracle::Mat::Zero(3, 3)), InvalidArgument);
}

TEST(EstimatePauli, SingleQubitExamples) {
  const auto zero = generate_dataset(product_state({0}), EnsembleSpec{Ensemble::RandomXZ, 1}, 10000, 1);
  EXPECT_NEAR(estimate_pauli(zero, PauliString::parse("Z")).estimate, 1.0, 0.05);

  Tensors plus(1);
  plus[0].m = {Matrix::Constant(1, 1, M_SQRT1_2), Matrix::Constant(1, 1, M_SQRT1_2)};
  const auto ds = generate_dataset(MPSState(plus), EnsembleSpec{Ensemble::RandomXZ, 1}, 10000, 2);
  EXPECT_NEAR(estimate_pauli(ds, PauliString::parse("Z")).estimate, 0.0, 0.05);
  EXPECT_NEAR(estimate_pauli(ds, PauliString::parse("X")).estimate, 1.0, 0.05);
}

TEST(EstimatePauli, GhzTwoPointWithinThreeSigma) {
  const std::size_t count = 100000;
  const auto ds = generate_dataset(ghz_state(3), EnsembleSpec{Ensemble::RandomXZ, 3}, count, 3);
  const auto e = estimate_pauli(ds, PauliString::parse("Z1 Z2"));
  EXPECT_NEAR(e.estimate, 1.0, 3.0 * std::sqrt(4.0 / count));
  EXPECT_EQ(e.shadow_norm, 4.0);
  EXPECT_NEAR(static_cast<double>(e.shots_used) / count, 0.25, 0.01);
  EXPECT_GT(e.std_error, 0.0);
}

TEST(EstimatePauli, UnbiasedOverExactRecordDistribution) {
  const std::size_t n = 3;
  const MPSState target = normalize(new_random_mps(n, 2, 31));
  const auto psi = oracle::statevector(target);
  for (const char* label_text : {"ZII", "IXI", "XZX", "ZZZ", "XXI", "III"}) {
    const auto p = PauliString::parse(label_text);
    double expected_estimate = 0.0;
    for (std::uint32_t code = 0; code < (1u << n); ++code) {
      const auto axes = axes_of(code, n);
      const auto probs = oracle::probabilities(psi, axes);
      for (std::uint64_t b = 0; b < (1u << n); ++b)
        if (probs[b] > 0) expected_estimate += probs[b] / (1u << n) * estimate_pauli(one_record(axes, b), p).estimate;
    }
    EXPECT_NEAR(expected_estimate, oracle::expectation(psi, oracle::dense(label_text)), 1e-12) << label_text;
  }
}

TEST(EstimatePauli, SingleShotValueIsTraceAgainstShadow) {
  const std::size_t n = 3;
  for (std::uint32_t code = 0; code < 8; ++code)
    for (std::uint64_t b = 0; b < 8; ++b) {
      const auto ds = one_record(axes_of(code, n), b);
      oracle::Mat snap = oracle::Mat::Identity(1, 1);
      for (const auto& f : single_shot_shadow(ds.records[0])) snap = oracle::kron(snap, oracle::Mat(f));
      for (const char* l : {"XZI", "ZIZ", "XXX", "IZI"}) {
        const double want = (oracle::dense(l) * snap).trace().real();
        EXPECT_NEAR(estimate_pauli(ds, PauliString::parse(l)).estimate, want, 1e-12);
      }
    }
}

TEST(EstimatePauli, SecondMomentBoundedByShadowNorm) {
  // exact single-shot second moment from the record distribution
  const std::size_t n = 3;
  const auto psi = oracle::statevector(normalize(new_random_mps(n, 2, 5)));
  for (const char* l : {"ZII", "XZI", "XZX", "IIX"}) {
    const auto p = PauliString::parse(l);
    double second = 0.0;
    for (std::uint32_t code = 0; code < (1u << n); ++code) {
      const auto probs = oracle::probabilities(psi, axes_of(code, n));
      for (std::uint64_t b = 0; b < (1u << n); ++b) {
        const double v = estimate_pauli(one_record(axes_of(code, n), b), p).estimate;
        second += probs[b] / (1u << n) * v * v;
      }
    }
    EXPECT_LE(second, shadow_norm(p) + 1e-12) << l;
  }

  // sampled: the empirical second moment fluctuates around its mean, which
  // is bounded by the shadow norm; allow four binomial standard deviations
  const std::size_t count = 20000;
  const MPSState target = normalize(new_random_mps(4, 3, 5));
  const auto ds = generate_dataset(target, EnsembleSpec{Ensemble::RandomXZ, 4}, count, 6);
  std::vector<PauliString> obs;
  for (const char* l : {"ZIII", "XZII", "XZXZ", "IIXX", "ZZZI"}) obs.push_back(PauliString::parse(l));
  ShadowAccumulator acc(4, Ensemble::RandomXZ, obs);
  acc.add(ds);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double norm = shadow_norm(obs[k]);
    const double q = 1.0 / norm;
    const double slack = 4.0 * norm * norm * std::sqrt(q * (1 - q) / count);
    EXPECT_LE(acc.sums_of_squares()[k] / count, norm + slack);
    const auto e = acc.estimate(k);
    EXPECT_LE(e.std_error * e.std_error * count, norm + slack);
  }
}

TEST(EstimatePauli, GlobalXZReadsPureStringsDirectly) {
  const MPSState target = normalize(new_random_mps(3, 2, 9));
  const auto psi = oracle::statevector(target);
  const auto ds = generate_dataset(target, EnsembleSpec{Ensemble::GlobalXZ, 3}, 40000, 10);
  const auto zz = estimate_pauli(ds, PauliString::parse("ZZI"));
  EXPECT_NEAR(zz.estimate, oracle::expectation(psi, oracle::dense("ZZI")), 4 * zz.std_error + 1e-3);
  EXPECT_NEAR(static_cast<double>(zz.shots_used) / 40000, 0.5, 0.02);
  const auto xx = estimate_pauli(ds, PauliString::parse("XIX"));
  EXPECT_NEAR(xx.estimate, oracle::expectation(psi, oracle::dense("XIX")), 4 * xx.std_error + 1e-3);
  EXPECT_THROW(estimate_pauli(ds, PauliString::parse("XZI")), InvisibleObservable);
}

TEST(EstimatePauli, Errors) {
  const auto ds = generate_dataset(ghz_state(2), EnsembleSpec{Ensemble::RandomXZ, 2}, 10, 1);
  EXPECT_THROW(estimate_pauli(ds, PauliString::parse("YI")), InvisibleObservable);
  EXPECT_THROW(estimate_pauli(ds.slice(0, 0), PauliString::parse("ZI")), InvalidArgument);
  EXPECT_THROW(estimate_pauli(ds, PauliString::parse("Z3")), InvalidArgument);
}

TEST(ShadowAccumulator, MergeIsAssociative) {
  const auto ds = generate_dataset(normalize(new_random_mps(4, 2, 2)), EnsembleSpec{Ensemble::RandomXZ, 4}, 3000, 4);
  const std::vector<PauliString> obs{PauliString::parse("ZZII"), PauliString::parse("XIXI"), PauliString::parse("0.3*ZIIX")};
  auto part = [&](std::size_t a, std::size_t b) {
    ShadowAccumulator acc(4, Ensemble::RandomXZ, obs);
    acc.add(ds.slice(a, b));
    return acc;
  };
  ShadowAccumulator left = part(0, 1000);
  left.merge(part(1000, 2000));
  left.merge(part(2000, 3000));
  ShadowAccumulator bc = part(1000, 2000);
  bc.merge(part(2000, 3000));
  ShadowAccumulator right = part(0, 1000);
  right.merge(bc);
  ShadowAccumulator whole = part(0, 3000);
  EXPECT_EQ(left.count(), right.count());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    EXPECT_NEAR(left.sums()[k], right.sums()[k], 1e-12);
    EXPECT_NEAR(left.sums_of_squares()[k], right.sums_of_squares()[k], 1e-12);
    EXPECT_EQ(left.estimate(k).shots_used, whole.estimate(k).shots_used);
    EXPECT_NEAR(left.estimate(k).estimate, whole.estimate(k).estimate, 1e-12);
  }
  ShadowAccumulator other(4, Ensemble::RandomXZ, {PauliString::parse("ZIII")});
  EXPECT_THROW(left.merge(other), InvalidArgument);
}

TEST(EstimateToJson, RoundTrip) {
  const auto ds = generate_dataset(ghz_state(3), EnsembleSpec{Ensemble::RandomXZ, 3}, 500, 1);
  const auto e = estimate_pauli(ds, PauliString::parse("X1 X2 X3"));
  const auto j = estimate_to_json(e);
  EXPECT_EQ(j["observable"], "X1 X2 X3");
  EXPECT_EQ(j["shadow_norm"], 8.0);
  const auto back = estimate_from_json(j);
  EXPECT_EQ(back.observable, e.observable);
  EXPECT_EQ(back.estimate, e.estimate);
  EXPECT_EQ(back.shots_used, e.shots_used);
}

TEST(SubsystemRdm, ZeroStateSingleSite) {
  const auto ds = generate_dataset(product_state(Bits(3, 0)), EnsembleSpec{Ensemble::RandomXZ, 3}, 100000, 5);
  const auto rho = estimate_subsystem_rdm_projected(ds, {1});
  EXPECT_NEAR(rho(0, 0).real(), 1.0, 0.02);
  EXPECT_NEAR(rho(1, 1).real(), 0.0, 0.02);
  EXPECT_NEAR(std::abs(rho(0, 1)), 0.0, 0.02);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
}

TEST(SubsystemRdm, GhzYYComponentIsProjectedAway) {
  const auto ds = generate_dataset(ghz_state(2), EnsembleSpec{Ensemble::RandomXZ, 2}, 20000, 6);
  const auto rho = estimate_subsystem_rdm_projected(ds, {0, 1});
  const auto psi = oracle::statevector(ghz_state(2));
  const auto rho_true = oracle::partial_trace(psi, 2, {0, 1});
  EXPECT_NEAR((rho_true * oracle::dense("YY")).trace().real() / 2.0, -0.5, 1e-12);
  EXPECT_NEAR((rho * oracle::dense("YY")).trace().real() / 2.0, 0.0, 1e-12);
  EXPECT_LT((rho - rho.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
}

TEST(SubsystemRdm, ConvergesToVisibleProjection) {
  const std::size_t n = 5;
  const MPSState target = normalize(new_random_mps(n, 3, 12));
  const auto psi = oracle::statevector(target);
  const auto ds = generate_dataset(target, EnsembleSpec{Ensemble::RandomXZ, n}, 200000, 13);
  const std::vector<std::size_t> sites{3, 1};
  const auto rho = estimate_subsystem_rdm_projected(ds, sites);
  const auto rho_true = oracle::partial_trace(psi, n, sites);
  // visible projection by explicit Pauli expansion over {I, X, Z}^2
  oracle::Mat vis = oracle::Mat::Zero(4, 4);
  for (char a : std::string("IXZ"))
    for (char b : std::string("IXZ")) {
      const oracle::Mat p = oracle::dense(std::string{a, b});
      vis += (rho_true * p).trace() * p / 4.0;
    }
  EXPECT_LT((rho - vis).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
  EXPECT_THROW(estimate_subsystem_rdm_projected(ds, {0, 1, 2, 3, 4, 5, 6, 7, 8}), ResourceLimit);
  EXPECT_THROW(estimate_subsystem_rdm_projected(ds, {7}), InvalidArgument);
}

namespace {

ProbabilityOracle exact_oracle(const oracle::Vec& psi) {
  return [psi](const BasisString& basis, const Bits& bits) {
    return oracle::probabilities(psi, basis.str())[bits_to_index(bits)];
  };
}

double overlap_squared(const Eigen::VectorXd& a, const oracle::Vec& b) {
  return std::norm(a.cast<std::complex<double>>().dot(b)) / b.squaredNorm();
}

}  // namespace

TEST(Reconstruction, ProductAndGhzSigns) {
  oracle::Vec zero = oracle::Vec::Zero(8);
  zero(0) = 1.0;
  EXPECT_NEAR(overlap_squared(reconstruct_real_pure_state(exact_oracle(zero), 3), zero), 1.0, 1e-12);

  oracle::Vec plus = oracle::Vec::Zero(8), minus = oracle::Vec::Zero(8);
  plus(0) = plus(7) = M_SQRT1_2;
  minus(0) = M_SQRT1_2;
  minus(7) = -M_SQRT1_2;
  const auto rp = reconstruct_real_pure_state(exact_oracle(plus), 3);
  const auto rm = reconstruct_real_pure_state(exact_oracle(minus), 3);
  EXPECT_NEAR(overlap_squared(rp, plus), 1.0, 1e-12);
  EXPECT_NEAR(overlap_squared(rm, minus), 1.0, 1e-12);
  EXPECT_NEAR(overlap_squared(rp, minus), 0.0, 1e-12);
  EXPECT_NEAR(rp.norm(), 1.0, 1e-12);
}

TEST(Reconstruction, RandomRealStates) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const std::size_t n = 6;
    const auto psi = oracle::statevector(normalize(new_random_mps(n, 4, seed, Entries::Real)));
    EXPECT_NEAR(overlap_squared(reconstruct_real_pure_state(exact_oracle(psi), n), psi), 1.0, 1e-10) << seed;
  }
  // sparse support exercises the minimal-Hamming-distance pairing
  oracle::Vec sparse = oracle::Vec::Zero(16);
  sparse(0b0011) = 0.6;
  sparse(0b1100) = -0.48;
  sparse(0b1010) = 0.64;
  EXPECT_NEAR(overlap_squared(reconstruct_real_pure_state(exact_oracle(sparse), 4), sparse), 1.0, 1e-10);
}

TEST(Reconstruction, RejectsInconsistentOracles) {
  EXPECT_THROW(reconstruct_real_pure_state([](const BasisString&, const Bits&) { return -0.1; }, 2), InvalidOracle);
  EXPECT_THROW(reconstruct_real_pure_state([](const BasisString&, const Bits&) { return 0.5; }, 2), InvalidOracle);
  EXPECT_THROW(reconstruct_real_pure_state(exact_oracle(oracle::Vec::Ones(2)), 0), ResourceLimit);
}
