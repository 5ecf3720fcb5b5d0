#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpstomo/lbfgs.hpp"
#include "mpstomo/measurement.hpp"
#include "mpstomo/mps.hpp"
#include "mpstomo/shadows.hpp"

namespace mpstomo {

inline constexpr double kProbabilityFloor = 1e-12;

// ---- flat real parametrization ---------------------------------------------

// Interleaved (Re, Im) of every tensor entry, site by site, slice by slice,
// column-major within a slice.
inline Eigen::VectorXd flatten_real(std::span<const SiteTensor> t) {
  Eigen::Index size = 0;
  for (const auto& s : t) size += 2 * s.size();
  Eigen::VectorXd x(size);
  Eigen::Index k = 0;
  for (const auto& s : t)
    for (const auto& m : s.m)
      for (Eigen::Index j = 0; j < m.size(); ++j) {
        x(k++) = m.data()[j].real();
        x(k++) = m.data()[j].imag();
      }
  return x;
}

// Writes x back into tensors that already have the right shapes.
inline void unflatten_real(const Eigen::VectorXd& x, Tensors& t) {
  Eigen::Index k = 0;
  for (auto& s : t)
    for (auto& m : s.m)
      for (Eigen::Index j = 0; j < m.size(); ++j, k += 2) m.data()[j] = cplx(x(k), x(k + 1));
  if (k != x.size()) throw InvalidArgument("parameter vector does not match tensor shapes");
}

// Gradient of a real function with respect to the flat vector, from its
// conjugate derivative g = df/dconj(A): df/dRe = 2 Re g, df/dIm = 2 Im g.
inline Eigen::VectorXd real_gradient(std::span<const SiteTensor> conj_grad) { return 2.0 * flatten_real(conj_grad); }

inline Tensors zeros_like(std::span<const SiteTensor> t) {
  Tensors z(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    for (int s = 0; s < 2; ++s) z[i].m[s] = Matrix::Zero(t[i].left(), t[i].right());
  return z;
}

inline void axpy(cplx a, std::span<const SiteTensor> x, Tensors& y) {
  for (std::size_t i = 0; i < y.size(); ++i)
    for (int s = 0; s < 2; ++s) y[i].m[s] += a * x[i].m[s];
}

// ---- negative log-likelihood -------------------------------------------------

struct LossAndGradient {
  double value = 0.0;
  Tensors gradient;  // conjugate derivative, same shapes as the model
  std::size_t clamped = 0;
};

// Mean of -log(|<b|U|psi>|^2 / <psi|psi>) over records [records), with the
// probability clamped below at kProbabilityFloor. Clamped records contribute
// a constant and therefore no gradient.
inline LossAndGradient nll_value_and_gradient(std::span<const SiteTensor> t, std::span<const MeasurementRecord> records,
                                              bool with_gradient = true) {
  if (records.empty()) throw InvalidArgument("NLL needs at least one record");
  const std::size_t n = t.size();
  LossAndGradient out;

  // Rotated slices: rot[i][2*axis + bit], axis 0 = Z, 1 = X.
  std::vector<std::array<Matrix, 4>> rot(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int ax = 0; ax < 2; ++ax)
      for (std::uint8_t b = 0; b < 2; ++b) rot[i][2 * ax + b] = rotated_slice(t[i], ax ? Axis::X : Axis::Z, b);
  auto slot = [](Axis a, std::uint8_t b) { return 2 * (a == Axis::X ? 1 : 0) + b; };

  const OperatorGradient norm = with_gradient ? product_operator_gradient(t, SiteOps(n))
                                              : OperatorGradient{product_operator_value(t, SiteOps(n)), {}};
  const double z = norm.value.real();
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidState("model has zero or non-finite norm");

  // Accumulated conjugate partials per site and rotated slot.
  std::vector<std::array<Matrix, 4>> acc;
  if (with_gradient) {
    acc.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (auto& m : acc[i]) m = Matrix::Zero(t[i].left(), t[i].right());
  }

  std::vector<RowVector> left(n + 1);
  std::vector<Vector> right(n + 1);
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& r : records) {
    left[0] = RowVector::Ones(1);
    for (std::size_t i = 0; i < n; ++i) left[i + 1].noalias() = left[i] * rot[i][slot(r.basis[i], r.bits[i])];
    const cplx a = left[n](0);
    const double p = std::norm(a) / z;
    if (!(p > kProbabilityFloor)) {
      sum -= std::log(kProbabilityFloor);
      ++out.clamped;
      continue;
    }
    sum -= std::log(p);
    ++used;
    if (!with_gradient) continue;
    right[n] = Vector::Ones(1);
    for (std::size_t i = n; i-- > 0;) right[i].noalias() = rot[i][slot(r.basis[i], r.bits[i])] * right[i + 1];
    const cplx inv_a = 1.0 / a;
    for (std::size_t i = 0; i < n; ++i)
      acc[i][slot(r.basis[i], r.bits[i])].noalias() += (left[i].transpose() * right[i + 1].transpose() * inv_a).conjugate();
  }
  const double count = static_cast<double>(records.size());
  out.value = sum / count;
  if (!with_gradient) return out;

  // d/dconj(A[s]) of log|a|^2 is sum over slots of w_s(slot) * acc[slot].
  out.gradient = zeros_like(t);
  for (std::size_t i = 0; i < n; ++i)
    for (int ax = 0; ax < 2; ++ax)
      for (std::uint8_t b = 0; b < 2; ++b) {
        const auto w = rotation_weights(ax ? Axis::X : Axis::Z, b);
        for (int s = 0; s < 2; ++s)
          if (w[s] != 0.0) out.gradient[i].m[s] -= (w[s] / count) * acc[i][2 * ax + b];
      }
  axpy(static_cast<double>(used) / count / z, norm.gradient, out.gradient);
  return out;
}

inline double nll_loss(const MPSState& mps, const Dataset& ds) {
  return nll_value_and_gradient(mps.tensors(), ds.records, false).value;
}

inline Tensors nll_gradient(const MPSState& mps, std::span<const MeasurementRecord> batch) {
  return nll_value_and_gradient(mps.tensors(), batch, true).gradient;
}

// ---- regularizers -------------------------------------------------------

struct RegularizerValue {
  double value = 0.0;
  Tensors gradient;
};

// <O>/<psi|psi> for a Hermitian Pauli string, with its conjugate gradient
// (g_O - <O> g_Z)/Z.
struct ExpectationGradient {
  double value = 0.0;
  Tensors gradient;
};

inline ExpectationGradient normalized_expectation(std::span<const SiteTensor> t, const OperatorGradient& norm,
                                                  const PauliString& p) {
  const std::size_t n = t.size();
  const double z = norm.value.real();
  const double c = p.scale(n).real();
  OperatorGradient og = product_operator_gradient(t, site_ops(p, n));
  ExpectationGradient out;
  out.value = c * og.value.real() / z;
  out.gradient = std::move(og.gradient);
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < 2; ++s) out.gradient[i].m[s] = (c * out.gradient[i].m[s] - out.value * norm.gradient[i].m[s]) / z;
  return out;
}

// R = sum_S (e_S - <S>)^2 over supplied estimates e_S.
inline RegularizerValue stabilizer_regularizer(std::span<const SiteTensor> t, const std::vector<PauliEstimate>& targets) {
  const std::size_t n = t.size();
  RegularizerValue out{0.0, zeros_like(t)};
  if (targets.empty()) return out;
  const OperatorGradient norm = product_operator_gradient(t, SiteOps(n));
  for (const auto& e : targets) {
    if (!e.observable.hermitian()) throw InvalidArgument("stabilizer estimates need Hermitian observables");
    const ExpectationGradient x = normalized_expectation(t, norm, e.observable);
    const double diff = e.estimate - x.value;
    out.value += diff * diff;
    axpy(-2.0 * diff, x.gradient, out.gradient);
  }
  return out;
}

inline RegularizerValue stabilizer_regularizer(const MPSState& mps, const std::vector<PauliEstimate>& targets) {
  return stabilizer_regularizer(mps.tensors(), targets);
}

// Shadow estimate of a subsystem density matrix on `sites` (Kronecker order
// over the sites as listed).
struct SubsystemTarget {
  std::vector<std::size_t> sites;
  DenseOperator rho;
};

namespace detail {

// Every {I, X, Z} string on `sites` other than the identity.
inline std::vector<PauliString> visible_strings(const std::vector<std::size_t>& sites) {
  std::vector<PauliString> out;
  std::size_t total = 1;
  for (std::size_t j = 0; j < sites.size(); ++j) total *= 3;
  for (std::size_t code = 1; code < total; ++code) {
    std::vector<PauliString::Term> terms;
    std::size_t c = code;
    for (auto site : sites) {
      const std::size_t d = c % 3;
      c /= 3;
      if (d == 1) terms.emplace_back(site, Pauli::X);
      if (d == 2) terms.emplace_back(site, Pauli::Z);
    }
    out.emplace_back(std::move(terms));
  }
  return out;
}

// tr(P rho) for a Pauli string on `sites`, rho in Kronecker order over `sites`.
inline double pauli_trace(const DenseOperator& rho, const std::vector<std::size_t>& sites, const PauliString& p) {
  DenseOperator m = DenseOperator::Identity(1, 1);
  for (auto s : sites) m = kron(m, pauli_matrix(p.at(s)));
  return (m * rho).trace().real();
}

}  // namespace detail

// R = sum over cells of the Frobenius distance between the shadow estimate
// and the model RDM projected onto the {I, X, Z} span. Both live in that span,
// so each distance is sqrt(sum_P (c_P - <P>)^2 / 2^k).
inline RegularizerValue rdm_regularizer(std::span<const SiteTensor> t, const std::vector<SubsystemTarget>& cells) {
  const std::size_t n = t.size();
  RegularizerValue out{0.0, zeros_like(t)};
  if (cells.empty()) return out;
  const OperatorGradient norm = product_operator_gradient(t, SiteOps(n));
  for (const auto& cell : cells) {
    if (cell.sites.empty() || cell.sites.size() > kMaxChannelQubits)
      throw InvalidArgument("regularizer cells need 1..8 sites");
    for (auto s : cell.sites)
      if (s >= n) throw InvalidArgument("regularizer cell site out of range");
    const Eigen::Index dim = Eigen::Index{1} << cell.sites.size();
    if (cell.rho.rows() != dim || cell.rho.cols() != dim) throw InvalidArgument("regularizer cell RDM has the wrong size");
    const double scale = std::ldexp(1.0, -static_cast<int>(cell.sites.size()));
    double sq = 0.0;
    Tensors g = zeros_like(t);
    for (const auto& p : detail::visible_strings(cell.sites)) {
      const ExpectationGradient x = normalized_expectation(t, norm, p);
      const double diff = detail::pauli_trace(cell.rho, cell.sites, p) - x.value;
      sq += diff * diff * scale;
      axpy(-diff * scale, x.gradient, g);
    }
    const double dist = std::sqrt(sq);
    out.value += dist;
    if (dist > 0.0) axpy(1.0 / dist, g, out.gradient);
  }
  return out;
}

inline RegularizerValue rdm_regularizer(const MPSState& mps, const std::vector<SubsystemTarget>& cells) {
  return rdm_regularizer(mps.tensors(), cells);
}

// ---- configuration -----------------------------------------------------------

enum class RegularizerKind { None, Stabilizers, ProjectedRDM };

inline std::string regularizer_name(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::Stabilizers: return "stabilizers";
    case RegularizerKind::ProjectedRDM: return "projected-rdm";
  }
  return "none";
}

inline RegularizerKind parse_regularizer(const std::string& s) {
  if (s == "none") return RegularizerKind::None;
  if (s == "stabilizers") return RegularizerKind::Stabilizers;
  if (s == "projected-rdm" || s == "rdm") return RegularizerKind::ProjectedRDM;
  throw InvalidArgument("unknown regularizer '" + s + "' (expected none, stabilizers or projected-rdm)");
}

struct SgdConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  double decay = 0.0;  // learning rate at epoch e is lr / (1 + decay * e)
};

struct TrainConfig {
  Eigen::Index chi = 2;
  double beta = 0.0;
  RegularizerKind regularizer = RegularizerKind::None;
  std::vector<PauliEstimate> stabilizers;  // used with RegularizerKind::Stabilizers
  std::vector<SubsystemTarget> cells;      // used with RegularizerKind::ProjectedRDM
  SgdConfig sgd;
  LbfgsOptions lbfgs;
  std::uint64_t seed = 1;
  std::size_t n_restarts = 10;

  void validate() const {
    if (chi < 1) throw InvalidArgument("chi must be >= 1");
    if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
    if (!(sgd.learning_rate > 0.0)) throw InvalidArgument("SGD learning rate must be > 0");
    if (sgd.batch_size == 0) throw InvalidArgument("SGD batch size must be >= 1");
    if (n_restarts == 0) throw InvalidArgument("need at least one restart");
    if (lbfgs.memory == 0) throw InvalidArgument("L-BFGS memory must be >= 1");
  }
};

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"chi", c.chi},
          {"beta", c.beta},
          {"regularizer", regularizer_name(c.regularizer)},
          {"sgd", {{"learning_rate", c.sgd.learning_rate}, {"batch_size", c.sgd.batch_size}, {"epochs", c.sgd.epochs}, {"decay", c.sgd.decay}}},
          {"lbfgs",
           {{"memory", c.lbfgs.memory},
            {"max_iterations", c.lbfgs.max_iterations},
            {"gradient_tolerance", c.lbfgs.gradient_tolerance},
            {"relative_tolerance", c.lbfgs.relative_tolerance}}},
          {"seed", c.seed},
          {"n_restarts", c.n_restarts}};
}

// Reads the keys written by config_to_json; absent keys keep their defaults
// and unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  static const std::vector<std::string> known{"chi", "beta", "regularizer", "sgd", "lbfgs", "seed", "n_restarts"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw InvalidArgument("unknown config key '" + key + "'");
  try {
    if (j.contains("chi")) c.chi = j["chi"].get<Eigen::Index>();
    if (j.contains("beta")) c.beta = j["beta"].get<double>();
    if (j.contains("regularizer")) c.regularizer = parse_regularizer(j["regularizer"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("n_restarts")) c.n_restarts = j["n_restarts"].get<std::size_t>();
    if (j.contains("sgd")) {
      const auto& s = j["sgd"];
      c.sgd.learning_rate = s.value("learning_rate", c.sgd.learning_rate);
      c.sgd.batch_size = s.value("batch_size", c.sgd.batch_size);
      c.sgd.epochs = s.value("epochs", c.sgd.epochs);
      c.sgd.decay = s.value("decay", c.sgd.decay);
    }
    if (j.contains("lbfgs")) {
      const auto& s = j["lbfgs"];
      c.lbfgs.memory = s.value("memory", c.lbfgs.memory);
      c.lbfgs.max_iterations = s.value("max_iterations", c.lbfgs.max_iterations);
      c.lbfgs.gradient_tolerance = s.value("gradient_tolerance", c.lbfgs.gradient_tolerance);
      c.lbfgs.relative_tolerance = s.value("relative_tolerance", c.lbfgs.relative_tolerance);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- objective ---------------------------------------------------------------

// Total loss NLL + beta R on a set of records.
inline LossAndGradient total_loss(std::span<const SiteTensor> t, std::span<const MeasurementRecord> records,
                                  const TrainConfig& cfg, double* reg_out = nullptr) {
  LossAndGradient l = nll_value_and_gradient(t, records, true);
  double reg = 0.0;
  if (cfg.beta > 0.0 && cfg.regularizer != RegularizerKind::None) {
    const RegularizerValue r = cfg.regularizer == RegularizerKind::Stabilizers ? stabilizer_regularizer(t, cfg.stabilizers)
                                                                               : rdm_regularizer(t, cfg.cells);
    reg = r.value;
    l.value += cfg.beta * r.value;
    axpy(cfg.beta, r.gradient, l.gradient);
  }
  if (reg_out) *reg_out = reg;
  return l;
}

// ---- history -------------------------------------------------------------

struct HistoryEntry {
  std::size_t iteration = 0;
  std::string stage;  // "init", "sgd" or "lbfgs"
  double nll = 0.0;
  double reg = 0.0;
  double total = 0.0;
  double fidelity = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<HistoryEntry> entries;
  bool converged = false;
  std::string stage_reached;
  std::string stop_reason;
  std::size_t restart = 0;

  double final_loss() const {
    return entries.empty() ? std::numeric_limits<double>::infinity() : entries.back().total;
  }
  double final_nll() const { return entries.empty() ? std::numeric_limits<double>::infinity() : entries.back().nll; }
};

inline void write_history_csv(std::ostream& out, const TrainHistory& h) {
  out << "iteration,stage,nll,reg,total,fidelity\n";
  out.precision(17);
  for (const auto& e : h.entries) {
    out << e.iteration << ',' << e.stage << ',' << e.nll << ',' << e.reg << ',' << e.total << ',';
    if (!std::isnan(e.fidelity)) out << e.fidelity;
    out << '\n';
  }
}

class TrainingFailed : public std::runtime_error {
 public:
  TrainingFailed(const std::string& what, std::vector<TrainHistory> histories)
      : std::runtime_error(what), histories_(std::move(histories)) {}
  const std::vector<TrainHistory>& histories() const { return histories_; }

 private:
  std::vector<TrainHistory> histories_;
};

struct TrainResult {
  MPSState model;
  TrainHistory history;                 // of the selected restart
  std::vector<TrainHistory> histories;  // every restart, in order
  std::vector<MPSState> models;         // final model of every restart
  std::size_t best_restart = 0;
};

struct TrainOptions {
  std::optional<MPSState> target;  // enables the fidelity column
  bool keep_all_models = false;
};

// ---- optimization --------------------------------------------------------

// One restart: minibatch SGD (A' = A - lr dL/dconj(A)) followed by full-batch
// L-BFGS on the flat real vector. In the flat picture the SGD step is
// x' = x - (lr / 2) grad_x, i.e. the factor 2 of the Wirtinger convention is
// absorbed into the learning rate.
inline std::pair<MPSState, TrainHistory> train_single(const TrainConfig& cfg, const Dataset& ds, std::uint64_t seed,
                                                      const TrainOptions& opt = {}) {
  if (ds.empty()) throw InvalidArgument("training needs a non-empty dataset");
  const std::size_t n = ds.n;
  TrainHistory hist;
  const MPSState init = normalize(new_random_mps(n, cfg.chi, derive_seed(seed, 1), Entries::Complex));
  Tensors t(init.tensors().begin(), init.tensors().end());
  const std::span<const MeasurementRecord> all(ds.records);

  std::size_t iteration = 0;
  // `known_total` lets the L-BFGS callback reuse the objective it already has.
  auto record = [&](const std::string& stage, std::span<const SiteTensor> model,
                    std::optional<double> known_total = std::nullopt) {
    double reg = 0.0;
    HistoryEntry e;
    e.iteration = iteration++;
    e.stage = stage;
    if (cfg.beta > 0.0 && cfg.regularizer != RegularizerKind::None) {
      reg = cfg.regularizer == RegularizerKind::Stabilizers ? stabilizer_regularizer(model, cfg.stabilizers).value
                                                            : rdm_regularizer(model, cfg.cells).value;
    }
    e.nll = known_total ? *known_total - cfg.beta * reg : nll_value_and_gradient(model, all, false).value;
    e.reg = reg;
    e.total = e.nll + cfg.beta * reg;
    if (opt.target) e.fidelity = fidelity(MPSState(Tensors(model.begin(), model.end())), *opt.target);
    hist.entries.push_back(e);
    return std::isfinite(e.total);
  };
  record("init", t);

  // Stage 1: minibatch SGD over a seeded shuffle per epoch. The model is
  // renormalized (and its gauge refreshed) after every epoch; the loss does
  // not depend on either.
  Philox4x32 rng(seed, 0x736764ULL);
  std::vector<std::size_t> order(ds.size());
  std::vector<MeasurementRecord> batch;
  for (std::size_t epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i-- > 1;) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    const double lr = cfg.sgd.learning_rate / (1.0 + cfg.sgd.decay * static_cast<double>(epoch));
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.sgd.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.sgd.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(ds.records[order[k]]);
      const LossAndGradient l = total_loss(t, batch, cfg);
      axpy(-lr, l.gradient, t);
    }
    const MPSState renormed = normalize(MPSState(std::move(t)));
    t.assign(renormed.tensors().begin(), renormed.tensors().end());
    if (!record("sgd", t)) {
      hist.stage_reached = "sgd";
      hist.stop_reason = "non-finite loss";
      return {MPSState(std::move(t)), hist};
    }
  }

  // Stage 2: full-batch L-BFGS on the flat real vector.
  hist.stage_reached = "lbfgs";
  Tensors work = t;
  const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    unflatten_real(x, work);
    try {
      const LossAndGradient l = total_loss(work, all, cfg);
      grad = real_gradient(l.gradient);
      return l.value;
    } catch (const InvalidState&) {
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
  };
  const IterationCallback cb = [&](std::size_t, const Eigen::VectorXd& x, double fx) {
    unflatten_real(x, work);
    return record("lbfgs", work, fx);
  };
  const LbfgsResult res = lbfgs_minimize(f, flatten_real(t), cfg.lbfgs, cb);
  unflatten_real(res.x, t);
  hist.converged = res.converged;
  hist.stop_reason = res.reason;
  return {normalize(MPSState(std::move(t))), hist};
}

// Runs cfg.n_restarts independent restarts and keeps the one with the lowest
// final training loss.
inline TrainResult train(const TrainConfig& cfg, const Dataset& ds, const TrainOptions& opt = {}) {
  cfg.validate();
  if (ds.empty()) throw InvalidArgument("training needs a non-empty dataset");
  TrainResult out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.n_restarts; ++r) {
    auto [model, hist] = train_single(cfg, ds, derive_seed(cfg.seed, r), opt);
    hist.restart = r;
    const double loss = hist.final_loss();
    if (std::isfinite(loss) && loss < best) {
      best = loss;
      out.best_restart = r;
      out.model = model;
      out.history = hist;
    }
    out.histories.push_back(hist);
    if (opt.keep_all_models) out.models.push_back(std::move(model));
  }
  if (!std::isfinite(best)) throw TrainingFailed("every restart ended with a non-finite loss", out.histories);
  return out;
}

// ---- model selection -------------------------------------------------------

struct CandidateScore {
  std::size_t index = 0;
  double train_nll = 0.0;
  double test_nll = 0.0;
};

// Ranks candidates by test NLL (ascending, ties keep input order). The
// training NLL comes from the candidate's history.
inline std::vector<CandidateScore> select_model(const std::vector<std::pair<MPSState, TrainHistory>>& candidates,
                                                const Dataset& test) {
  if (candidates.empty()) throw InvalidArgument("select_model needs at least one candidate");
  if (test.empty()) throw InvalidArgument("select_model needs a non-empty test set");
  std::vector<CandidateScore> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    out.push_back({i, candidates[i].second.final_nll(), nll_loss(candidates[i].first, test)});
  std::stable_sort(out.begin(), out.end(), [](const CandidateScore& a, const CandidateScore& b) { return a.test_nll < b.test_nll; });
  return out;
}

inline nlohmann::json selection_to_json(const std::vector<CandidateScore>& ranked) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : ranked) j.push_back({{"candidate", c.index}, {"train_nll", c.train_nll}, {"test_nll", c.test_nll}});
  return j;
}

}  // namespace mpstomo
