#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpstomo/errors.hpp"
#include "mpstomo/mps.hpp"
#include "mpstomo/mps_io.hpp"
#include "mpstomo/pauli.hpp"
#include "mpstomo/training.hpp"

namespace mpstomo {

// ---- scaling curves ------------------------------------------------------

struct ScalingPoint {
  std::size_t N = 0;
  std::vector<double> infidelities;  // runs that enter the statistics
  std::size_t excluded = 0;          // runs dropped because the trainer flagged them
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double mean = 0.0;
};

struct ScalingCurve {
  std::string system;
  std::string ensemble;
  double beta = 0.0;
  std::size_t n = 0;
  std::vector<ScalingPoint> points;

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0 && points[i].N <= points[i - 1].N) throw InvalidArgument("scaling curve: N must be strictly increasing");
      for (double v : points[i].infidelities)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("scaling curve: infidelity outside [0, 1]");
    }
  }
};

// Linear-interpolated quantile of an unsorted sample (type 7).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

// Summarizes one N. `converged[i] == false` removes run i from the statistics
// but it is still counted in `excluded`.
inline ScalingPoint make_point(std::size_t N, const std::vector<double>& infidelities,
                               const std::vector<bool>& converged = {}) {
  if (!converged.empty() && converged.size() != infidelities.size())
    throw InvalidArgument("make_point: one convergence flag per run is required");
  ScalingPoint p;
  p.N = N;
  for (std::size_t i = 0; i < infidelities.size(); ++i) {
    if (!converged.empty() && !converged[i]) {
      ++p.excluded;
      continue;
    }
    p.infidelities.push_back(infidelities[i]);
  }
  if (!p.infidelities.empty()) {
    p.median = median(p.infidelities);
    p.q25 = quantile(p.infidelities, 0.25);
    p.q75 = quantile(p.infidelities, 0.75);
    double s = 0.0;
    for (double v : p.infidelities) s += v;
    p.mean = s / static_cast<double>(p.infidelities.size());
  }
  return p;
}

struct PowerLawFit {
  double c = 0.0;
  double alpha = 0.0;
  double r2 = 0.0;
  std::size_t points_used = 0;
  std::vector<std::string> warnings;
};

// Unweighted least squares of log y = log c - alpha log N. Points with
// y <= 0 are dropped with a warning.
inline PowerLawFit fit_power_law(const std::vector<double>& N, const std::vector<double>& y) {
  if (N.size() != y.size()) throw InvalidArgument("fit_power_law: N and y differ in length");
  PowerLawFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
      std::ostringstream msg;
      msg << "point N=" << N[i] << " has infidelity " << y[i] << " and was excluded from the fit";
      fit.warnings.push_back(msg.str());
      continue;
    }
    lx.push_back(std::log(N[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 3) throw InvalidArgument("fit_power_law needs at least 3 points with positive infidelity");
  const auto m = static_cast<double>(lx.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit_power_law needs at least two distinct N");
  const double slope = sxy / sxx;
  fit.alpha = -slope;
  fit.c = std::exp(my - slope * mx);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (my + slope * (lx[i] - mx));
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.points_used = lx.size();
  return fit;
}

// Fits the per-N medians.
inline PowerLawFit fit_power_law(const ScalingCurve& curve) {
  curve.validate();
  std::vector<double> N, y;
  for (const auto& p : curve.points) {
    if (p.infidelities.empty()) continue;
    N.push_back(static_cast<double>(p.N));
    y.push_back(p.median);
  }
  return fit_power_law(N, y);
}

struct ThresholdResult {
  std::size_t n = 0;
  double epsilon = 0.0;  // infidelity budget 1 - F_local^n
  double n_star = std::numeric_limits<double>::infinity();
  bool unreachable = false;
  bool extrapolated = false;
};

// Smallest N with c / N^alpha <= 1 - threshold_local^n on the fitted law.
inline ThresholdResult samples_to_threshold(const PowerLawFit& fit, std::size_t n, double threshold_local,
                                            double n_min = 0.0, double n_max = std::numeric_limits<double>::infinity()) {
  if (!(threshold_local > 0.0 && threshold_local <= 1.0)) throw InvalidArgument("local fidelity threshold must lie in (0, 1]");
  ThresholdResult r;
  r.n = n;
  r.epsilon = 1.0 - std::pow(threshold_local, static_cast<double>(n));
  if (!(r.epsilon > 0.0) || !(fit.alpha > 0.0) || !(fit.c > 0.0)) {
    r.unreachable = true;
    r.extrapolated = true;
    return r;
  }
  // Small relative slack so exact algebraic cases do not round up by one.
  const double raw = std::pow(fit.c / r.epsilon, 1.0 / fit.alpha);
  r.n_star = std::max(1.0, std::ceil(raw * (1.0 - 1e-12)));
  r.extrapolated = r.n_star < n_min || r.n_star > n_max;
  return r;
}

inline std::vector<ThresholdResult> samples_to_threshold(const std::vector<ScalingCurve>& curves, double threshold_local) {
  std::vector<ThresholdResult> out;
  for (const auto& c : curves) {
    const PowerLawFit fit = fit_power_law(c);
    const double lo = c.points.empty() ? 0.0 : static_cast<double>(c.points.front().N);
    const double hi = c.points.empty() ? 0.0 : static_cast<double>(c.points.back().N);
    out.push_back(samples_to_threshold(fit, c.n, threshold_local, lo, hi));
  }
  return out;
}

inline void write_scaling_csv(std::ostream& out, const ScalingCurve& curve, bool header = true) {
  if (header) out << "n,N,median_infidelity,q25,q75\n";
  out.precision(10);
  for (const auto& p : curve.points)
    out << curve.n << ',' << p.N << ',' << p.median << ',' << p.q25 << ',' << p.q75 << '\n';
}

inline nlohmann::json fit_to_json(const PowerLawFit& f) {
  return {{"c", f.c}, {"alpha", f.alpha}, {"r2", f.r2}, {"points_used", f.points_used}, {"warnings", f.warnings}};
}

// ---- diagnostics -------------------------------------------------------------

inline constexpr double kDegenerateDenominator = 1e-8;

// <open> / sqrt(<closed>).
inline double string_ratio(const MPSState& mps, const PauliString& open_string, const PauliString& closed_loop) {
  const double closed = pauli_expectation(mps, closed_loop);
  if (!(closed > kDegenerateDenominator))
    throw DegenerateDiagnostic("closed-loop expectation " + std::to_string(closed) +
                               " is too small to normalize the open string");
  return pauli_expectation(mps, open_string) / std::sqrt(closed);
}

struct ReportRequest {
  std::vector<PauliString> observables;
  std::vector<std::size_t> cuts;  // bond positions 1..n-1; empty means every bond
};

inline nlohmann::json evaluate_report(const MPSState& model, const MPSState& target, const ReportRequest& req = {}) {
  if (model.size() != target.size()) throw InvalidArgument("evaluate_report: model and target sizes differ");
  const std::size_t n = model.size();
  const MPSState m = normalize(model);
  const MPSState t = normalize(target);
  const double f = fidelity(m, t);
  nlohmann::json rep;
  rep["n"] = n;
  rep["fidelity"] = f;
  rep["infidelity"] = 1.0 - f;
  rep["local_fidelity"] = local_fidelity(f, n);
  rep["model_bond_dims"] = m.bond_dims();
  rep["target_bond_dims"] = t.bond_dims();

  nlohmann::json obs = nlohmann::json::array();
  for (const auto& p : req.observables) {
    const double a = pauli_expectation(m, p), b = pauli_expectation(t, p);
    obs.push_back({{"observable", p.str()}, {"model", a}, {"target", b}, {"abs_error", std::abs(a - b)}});
  }
  rep["observables"] = obs;

  std::vector<std::size_t> cuts = req.cuts;
  if (cuts.empty())
    for (std::size_t c = 1; c < n; ++c) cuts.push_back(c);
  nlohmann::json ent = nlohmann::json::array();
  for (std::size_t c : cuts) {
    if (c == 0 || c >= n) throw InvalidArgument("cut " + std::to_string(c) + " is not an inner bond");
    const Eigen::VectorXd lm = schmidt_values(m, c), lt = schmidt_values(t, c);
    ent.push_back({{"cut", c},
                   {"model_entropy", entropy_from_schmidt(lm)},
                   {"target_entropy", entropy_from_schmidt(lt)},
                   {"model_schmidt", std::vector<double>(lm.data(), lm.data() + lm.size())},
                   {"target_schmidt", std::vector<double>(lt.data(), lt.data() + lt.size())}});
  }
  rep["entanglement"] = ent;
  return rep;
}

// ---- generalization-bound check --------------------------------------------

// One training run on a random target.
struct BoundSample {
  std::size_t N = 0;
  double infidelity = 0.0;
};

struct BoundCheck {
  double delta = 0.1;
  double constant = 0.0;       // C, calibrated on every N except the largest
  std::size_t largest_N = 0;
  double exceedance = 0.0;     // fraction of largest-N runs above C * scale(N)
  std::size_t runs_in_bucket = 0;
  bool consistent = false;     // exceedance <= delta
};

// sqrt(n chi^2 / (N delta)).
inline double bound_scale(std::size_t n, double chi, double N, double delta) {
  return std::sqrt(static_cast<double>(n) * chi * chi / (N * delta));
}

// C is the (1 - delta) quantile of infidelity / scale over the calibration
// buckets, so by construction at most a delta fraction of calibration runs
// exceed the bound. The check is whether the largest-N bucket, which was not
// used to fit C, stays within the same exceedance rate.
inline BoundCheck check_generalization_bound(const std::vector<BoundSample>& runs, std::size_t n, double chi,
                                             double delta = 0.1) {
  if (runs.empty()) throw InvalidArgument("bound check needs runs");
  BoundCheck out;
  out.delta = delta;
  for (const auto& r : runs) out.largest_N = std::max(out.largest_N, r.N);
  std::vector<double> ratios;
  for (const auto& r : runs)
    if (r.N != out.largest_N) ratios.push_back(r.infidelity / bound_scale(n, chi, static_cast<double>(r.N), delta));
  if (ratios.empty()) throw InvalidArgument("bound check needs at least two sample sizes");
  out.constant = quantile(ratios, 1.0 - delta);
  std::size_t above = 0;
  for (const auto& r : runs) {
    if (r.N != out.largest_N) continue;
    ++out.runs_in_bucket;
    if (r.infidelity > out.constant * bound_scale(n, chi, static_cast<double>(r.N), delta)) ++above;
  }
  out.exceedance = static_cast<double>(above) / static_cast<double>(out.runs_in_bucket);
  out.consistent = out.exceedance <= delta;
  return out;
}

// ---- run directories ---------------------------------------------------------

inline TrainHistory read_history_csv(std::istream& in) {
  TrainHistory h;
  std::string line;
  if (!std::getline(in, line) || line.rfind("iteration,", 0) != 0) throw FormatError("history CSV lacks its header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() == 5) f.emplace_back();
    if (f.size() != 6) throw FormatError("history CSV row has " + std::to_string(f.size()) + " fields");
    HistoryEntry e;
    try {
      e.iteration = std::stoul(f[0]);
      e.stage = f[1];
      e.nll = std::stod(f[2]);
      e.reg = std::stod(f[3]);
      e.total = std::stod(f[4]);
      if (!f[5].empty()) e.fidelity = std::stod(f[5]);
    } catch (const std::exception&) {
      throw FormatError("history CSV row is not numeric: " + line);
    }
    h.entries.push_back(e);
  }
  return h;
}

// A finished training run as found on disk: <dir>/manifest.json and
// <dir>/model.mps.
struct RunRecord {
  std::filesystem::path dir;
  nlohmann::json manifest;
  MPSState model;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  bool converged = true;
};

inline std::optional<RunRecord> load_run(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const auto model_path = dir / "model.mps";
  if (!std::filesystem::exists(manifest_path) || !std::filesystem::exists(model_path)) return std::nullopt;
  RunRecord r;
  r.dir = dir;
  std::ifstream in(manifest_path);
  try {
    r.manifest = nlohmann::json::parse(in);
    if (r.manifest.value("command", "") != "train") return std::nullopt;
    r.N = r.manifest.at("outputs").at("N").get<std::size_t>();
    r.seed = r.manifest.at("seeds").at("train").get<std::uint64_t>();
    r.converged = r.manifest.at("outputs").value("converged", true);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  r.model = load_mps(model_path.string());
  return r;
}

// Every training run below `root`, in path order.
inline std::vector<RunRecord> collect_runs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::exists(root / "manifest.json")) dirs.push_back(root);
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunRecord> out;
  for (const auto& d : dirs)
    if (auto r = load_run(d)) out.push_back(std::move(*r));
  return out;
}

// Groups runs by N and scores each model against `target`.
inline ScalingCurve scaling_from_runs(const std::vector<RunRecord>& runs, const MPSState& target,
                                      bool exclude_unconverged = true) {
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<bool>>> by_n;
  ScalingCurve curve;
  curve.n = target.size();
  for (const auto& r : runs) {
    if (r.model.size() != target.size()) throw InvalidArgument("run " + r.dir.string() + " has the wrong system size");
    auto& [inf, conv] = by_n[r.N];
    inf.push_back(1.0 - fidelity(r.model, target));
    conv.push_back(!exclude_unconverged || r.converged);
    if (curve.ensemble.empty()) curve.ensemble = r.manifest.value(nlohmann::json::json_pointer("/config/ensemble"), std::string{});
  }
  for (const auto& [N, v] : by_n) curve.points.push_back(make_point(N, v.first, v.second));
  return curve;
}

}  // namespace mpstomo
