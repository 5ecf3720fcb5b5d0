#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpstomo/evaluation.hpp"
#include "mpstomo/hamiltonians.hpp"
#include "oracles.hpp"

using namespace mpstomo;

TEST(Statistics, QuantilesAndPoints) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(median(v), 3.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.75), 3.25);
  EXPECT_TRUE(std::isnan(median({})));

  const ScalingPoint p = make_point(100, {0.1, 0.9, 0.2, 0.3}, {true, false, true, true});
  EXPECT_EQ(p.excluded, 1u);
  EXPECT_EQ(p.infidelities.size(), 3u);
  EXPECT_DOUBLE_EQ(p.median, 0.2);
  EXPECT_NEAR(p.mean, 0.2, 1e-15);
  EXPECT_THROW(make_point(100, {0.1, 0.2}, {true}), InvalidArgument);
}

TEST(FitPowerLaw, ExactSyntheticData) {
  std::vector<double> N{100, 300, 1000, 3000, 10000}, y1, y2;
  for (double x : N) {
    y1.push_back(10.0 / x);
    y2.push_back(3.0 / std::sqrt(x));
  }
  const auto f1 = fit_power_law(N, y1);
  EXPECT_NEAR(f1.alpha, 1.0, 1e-10);
  EXPECT_NEAR(f1.c, 10.0, 1e-10);
  EXPECT_NEAR(f1.r2, 1.0, 1e-10);
  const auto f2 = fit_power_law(N, y2);
  EXPECT_NEAR(f2.alpha, 0.5, 1e-10);
  EXPECT_NEAR(f2.c, 3.0, 1e-10);
  EXPECT_TRUE(f2.warnings.empty());
}

TEST(FitPowerLaw, ZeroPointsAreExcludedWithWarning) {
  const auto f = fit_power_law({10, 100, 1000, 10000}, {0.5, 0.05, 0.0, 0.0005});
  EXPECT_EQ(f.points_used, 3u);
  ASSERT_EQ(f.warnings.size(), 1u);
  EXPECT_NEAR(f.alpha, 1.0, 1e-10);
  EXPECT_THROW(fit_power_law({10, 100, 1000}, {0.1, 0.0, 0.01}), InvalidArgument);
  EXPECT_THROW(fit_power_law({10, 100}, {0.1, 0.01}), InvalidArgument);
}

TEST(FitPowerLaw, CurveUsesMediansAndValidates) {
  ScalingCurve c;
  c.n = 9;
  for (double N : {100.0, 1000.0, 10000.0}) c.points.push_back(make_point(std::size_t(N), {1 / N, 2 / N, 4 / N}));
  const auto f = fit_power_law(c);
  EXPECT_NEAR(f.alpha, 1.0, 1e-10);
  EXPECT_NEAR(f.c, 2.0, 1e-10);

  ScalingCurve bad = c;
  std::swap(bad.points[0], bad.points[1]);
  EXPECT_THROW(fit_power_law(bad), InvalidArgument);
  bad = c;
  bad.points[0].infidelities.push_back(1.5);
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Threshold, AlgebraicExamples) {
  PowerLawFit f;
  f.c = 1.0;
  f.alpha = 1.0;
  const auto r = samples_to_threshold(f, 9, 0.99);
  EXPECT_EQ(r.n_star, std::ceil(1.0 / (1.0 - std::pow(0.99, 9))));
  EXPECT_EQ(r.n_star, 12.0);
  EXPECT_FALSE(r.unreachable);

  const auto never = samples_to_threshold(f, 9, 1.0);
  EXPECT_TRUE(never.unreachable);
  EXPECT_TRUE(std::isinf(never.n_star));

  const auto outside = samples_to_threshold(f, 9, 0.99, 100, 1000);
  EXPECT_TRUE(outside.extrapolated);
  EXPECT_THROW(samples_to_threshold(f, 9, 0.0), InvalidArgument);
}

TEST(Threshold, PerCurveUsesMeasuredRange) {
  ScalingCurve c;
  c.n = 2;
  for (double N : {10.0, 100.0, 1000.0}) c.points.push_back(make_point(std::size_t(N), {1.0 / N}));
  const auto r = samples_to_threshold(std::vector<ScalingCurve>{c}, 0.99);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].n_star, std::ceil(1.0 / (1.0 - 0.99 * 0.99) * (1 - 1e-12)));
  EXPECT_FALSE(r[0].extrapolated);
}

TEST(ScalingCsv, Format) {
  ScalingCurve c;
  c.n = 9;
  c.points.push_back(make_point(100, {0.1, 0.2, 0.3}));
  std::ostringstream out;
  write_scaling_csv(out, c);
  EXPECT_EQ(out.str(), "n,N,median_infidelity,q25,q75\n9,100,0.2,0.15,0.25\n");
  const auto j = fit_to_json(fit_power_law({1, 2, 4}, {1, 0.5, 0.25}));
  EXPECT_NEAR(j["alpha"].get<double>(), 1.0, 1e-12);
}

TEST(StringRatio, Conventions) {
  const MPSState zero = product_state(Bits(4, 0));
  const PauliString id({}, 1.0);
  EXPECT_NEAR(string_ratio(zero, id, id), 1.0, 1e-14);
  EXPECT_NEAR(string_ratio(zero, PauliString::parse("Z1 Z2"), PauliString::parse("Z1 Z2 Z3 Z4")), 1.0, 1e-14);
  EXPECT_THROW(string_ratio(zero, id, PauliString::parse("X1 X2")), DegenerateDiagnostic);
  EXPECT_THROW(string_ratio(product_state({0, 1}), id, PauliString::parse("Z2")), DegenerateDiagnostic);

  // open / sqrt(closed) against the dense state for a state with <X1 X2 X3> > 0
  const MPSState psi = normalize(superpose(ghz_state(3), 1.0, normalize(new_random_mps(3, 2, 4, Entries::Real)), 0.3));
  const auto v = oracle::statevector(psi);
  const double closed = oracle::expectation(v, oracle::dense("XXX"));
  ASSERT_GT(closed, 0.1);
  const double open = oracle::expectation(v, oracle::dense("ZZI"));
  EXPECT_NEAR(string_ratio(psi, PauliString::parse("Z1 Z2"), PauliString::parse("X1 X2 X3")), open / std::sqrt(closed), 1e-12);
}

TEST(Report, IdenticalAndOrthogonalStates) {
  const MPSState t = normalize(new_random_mps(5, 3, 1));
  ReportRequest req{{PauliString::parse("Z1 Z2"), PauliString::parse("X3")}, {}};
  const auto same = evaluate_report(t, t, req);
  EXPECT_NEAR(same["fidelity"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(same["infidelity"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(same["local_fidelity"].get<double>(), 1.0, 1e-12);
  for (const auto& o : same["observables"]) EXPECT_NEAR(o["abs_error"].get<double>(), 0.0, 1e-12);
  EXPECT_EQ(same["entanglement"].size(), 4u);

  const auto ortho = evaluate_report(product_state(Bits(3, 0)), product_state(Bits(3, 1)), {});
  EXPECT_NEAR(ortho["fidelity"].get<double>(), 0.0, 1e-15);
  EXPECT_THROW(evaluate_report(t, product_state(Bits(3, 0))), InvalidArgument);
  EXPECT_THROW(evaluate_report(t, t, ReportRequest{{}, {5}}), InvalidArgument);
}

TEST(Report, EntanglementMatchesDenseOracle) {
  const std::size_t n = 8;
  const MPSState model = normalize(new_random_mps(n, 4, 2));
  const MPSState target = normalize(new_random_mps(n, 3, 3));
  const auto rep = evaluate_report(model, target, ReportRequest{{PauliString::parse("X2 Z5")}, {1, 4, 7}});
  const auto vm = oracle::statevector(model), vt = oracle::statevector(target);
  EXPECT_NEAR(rep["fidelity"].get<double>(), std::abs(vm.dot(vt)), 1e-10);
  for (const auto& e : rep["entanglement"]) {
    const auto cut = e["cut"].get<std::size_t>();
    EXPECT_NEAR(e["model_entropy"].get<double>(), oracle::entropy(oracle::schmidt(vm, n, cut)), 1e-8);
    EXPECT_NEAR(e["target_entropy"].get<double>(), oracle::entropy(oracle::schmidt(vt, n, cut)), 1e-8);
    const auto lam = e["model_schmidt"].get<std::vector<double>>();
    const auto dense = oracle::schmidt(vm, n, cut);
    for (std::size_t k = 0; k < lam.size(); ++k) EXPECT_NEAR(lam[k], dense(static_cast<Eigen::Index>(k)), 1e-8);
  }
  const auto& o = rep["observables"][0];
  EXPECT_NEAR(o["model"].get<double>(), oracle::expectation(vm, oracle::dense("IXIIZIII")), 1e-10);
  EXPECT_NEAR(o["target"].get<double>(), oracle::expectation(vt, oracle::dense("IXIIZIII")), 1e-10);
}

TEST(BoundCheck, CalibrationAndExceedance) {
  const std::size_t n = 4;
  const double chi = 2, delta = 0.1;
  std::vector<BoundSample> runs;
  for (std::size_t N : {100u, 1000u})
    for (int k = 1; k <= 10; ++k) runs.push_back({N, 0.1 * k * bound_scale(n, chi, double(N), delta)});
  // ratios 0.1 .. 1.0 twice; the 0.9 quantile is 0.91 - 0.01 * 0.9 * ... computed directly
  std::vector<double> ratios;
  for (int rep = 0; rep < 2; ++rep)
    for (int k = 1; k <= 10; ++k) ratios.push_back(0.1 * k);
  const double c = quantile(ratios, 0.9);

  auto with_bucket = runs;
  for (int k = 0; k < 10; ++k) with_bucket.push_back({10000, 0.5 * bound_scale(n, chi, 10000, delta)});
  const auto ok = check_generalization_bound(with_bucket, n, chi, delta);
  EXPECT_NEAR(ok.constant, c, 1e-12);
  EXPECT_EQ(ok.largest_N, 10000u);
  EXPECT_EQ(ok.runs_in_bucket, 10u);
  EXPECT_EQ(ok.exceedance, 0.0);
  EXPECT_TRUE(ok.consistent);

  auto heavy = runs;
  for (int k = 0; k < 10; ++k) heavy.push_back({10000, (k < 5 ? 2.0 : 0.1) * bound_scale(n, chi, 10000, delta)});
  const auto bad = check_generalization_bound(heavy, n, chi, delta);
  EXPECT_DOUBLE_EQ(bad.exceedance, 0.5);
  EXPECT_FALSE(bad.consistent);

  EXPECT_NEAR(bound_scale(4, 2, 100, 0.1), std::sqrt(4.0 * 4.0 / 10.0), 1e-15);
  EXPECT_THROW(check_generalization_bound({{100, 0.1}}, n, chi), InvalidArgument);
}

TEST(HistoryCsv, RoundTrip) {
  TrainHistory h;
  h.entries.push_back({0, "init", 2.5, 0.0, 2.5, std::numeric_limits<double>::quiet_NaN()});
  h.entries.push_back({1, "sgd", 1.25, 0.5, 3.75, 0.875});
  std::stringstream buf;
  write_history_csv(buf, h);
  const auto back = read_history_csv(buf);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[1].stage, "sgd");
  EXPECT_EQ(back.entries[1].total, 3.75);
  EXPECT_EQ(back.entries[1].fidelity, 0.875);
  EXPECT_TRUE(std::isnan(back.entries[0].fidelity));
  std::stringstream bad("nope\n");
  EXPECT_THROW(read_history_csv(bad), FormatError);
}

TEST(RunDirectories, CollectAndAggregate) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "mpstomo_eval_runs";
  fs::remove_all(root);
  const MPSState target = normalize(new_random_mps(4, 2, 7));
  auto write_run = [&](const std::string& name, std::size_t N, std::uint64_t seed, bool converged, const MPSState& model) {
    const fs::path dir = root / name;
    fs::create_directories(dir);
    nlohmann::json m{{"command", "train"},
                     {"config", {{"ensemble", "random-xz"}}},
                     {"seeds", {{"train", seed}}},
                     {"outputs", {{"N", N}, {"converged", converged}}}};
    std::ofstream(dir / "manifest.json") << m.dump(2);
    save_mps((dir / "model.mps").string(), model);
  };
  const MPSState near = normalize(superpose(target, 1.0, normalize(new_random_mps(4, 2, 8)), 0.05));
  write_run("N100_s0", 100, 0, true, near);
  write_run("N100_s1", 100, 1, false, normalize(new_random_mps(4, 2, 9)));
  write_run("N1000_s0", 1000, 0, true, target);
  fs::create_directories(root / "unrelated");
  std::ofstream(root / "unrelated" / "manifest.json") << R"({"command":"sample"})";

  const auto runs = collect_runs(root);
  ASSERT_EQ(runs.size(), 3u);
  const ScalingCurve curve = scaling_from_runs(runs, target);
  EXPECT_EQ(curve.ensemble, "random-xz");
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_EQ(curve.points[0].N, 100u);
  EXPECT_EQ(curve.points[0].excluded, 1u);
  ASSERT_EQ(curve.points[0].infidelities.size(), 1u);
  EXPECT_NEAR(curve.points[0].infidelities[0], 1.0 - fidelity(near, target), 1e-14);
  EXPECT_NEAR(curve.points[1].median, 0.0, 1e-12);

  const ScalingCurve all = scaling_from_runs(runs, target, false);
  EXPECT_EQ(all.points[0].infidelities.size(), 2u);

  std::ofstream(root / "N100_s0" / "manifest.json") << "{ broken";
  EXPECT_THROW(collect_runs(root), FormatError);
  fs::remove_all(root);
}
