// mpstomo command-line front end.
//
//   mpstomo generate-state  target states (DMRG ground states and analytic states)
//   mpstomo sample          randomized XZ measurement datasets
//   mpstomo train           MLE training of an MPS model
//   mpstomo evaluate        fidelity reports and shadow estimates
//   mpstomo scaling         (N, seed) run matrices and their aggregation
//
// Every command writes into a run directory <run-root>/<name>/ and leaves a
// manifest.json there. Options can also come from a TOML/INI file given with
// --config; command-line flags take precedence over the file.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mpstomo/mpstomo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpstomo;

namespace {

constexpr const char* kArtifactVersion = "mpstomo-1.0.0";
constexpr const char* kRunRootEnv = "MPSTOMO_RUN_ROOT";

// Errors in user-supplied flags; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return hex64(fnv1a(s.str()));
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw FormatError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

struct Manifest {
  std::string command;
  json config = json::object();
  json seeds = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::string started = now_utc();

  void input(const std::string& role, const fs::path& p) { inputs[role] = {{"path", p.string()}, {"hash", file_hash(p)}}; }

  void write(const fs::path& dir, const std::vector<std::string>& files) {
    json hashes = json::object();
    for (const auto& f : files) hashes[f] = file_hash(dir / f);
    outputs["files"] = hashes;
    write_json(dir / "manifest.json", {{"command", command},
                                       {"artifact_version", kArtifactVersion},
                                       {"config", config},
                                       {"seeds", seeds},
                                       {"inputs", inputs},
                                       {"outputs", outputs},
                                       {"timestamps", {{"started", started}, {"finished", now_utc()}}}});
  }
};

// Where a command writes: --dir if given, else <run-root>/<name>.
struct RunLocation {
  std::string root = "runs";
  std::string name;
  std::string dir;

  fs::path resolve() const {
    const fs::path d = dir.empty() ? fs::path(root) / name : fs::path(dir);
    fs::create_directories(d);
    return d;
  }
};

void add_location(CLI::App* cmd, RunLocation& loc, const std::string& default_name) {
  loc.name = default_name;
  cmd->add_option("--name", loc.name, "run name below the run root")->capture_default_str();
  cmd->add_option("--dir", loc.dir, "explicit output directory (overrides --run-root/--name)");
}

// Site groups such as "1,2,3;4,5,6" (1-based) for the projected-RDM regularizer.
std::vector<std::vector<std::size_t>> parse_cells(const std::string& text) {
  std::vector<std::vector<std::size_t>> out;
  std::stringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    std::vector<std::size_t> sites;
    std::stringstream items(group);
    std::string item;
    while (std::getline(items, item, ',')) {
      try {
        const long v = std::stol(item);
        if (v < 1) throw UsageError("--cells: sites are 1-based");
        sites.push_back(static_cast<std::size_t>(v - 1));
      } catch (const std::logic_error&) {
        throw UsageError("--cells: cannot parse '" + item + "'");
      }
    }
    if (!sites.empty()) out.push_back(std::move(sites));
  }
  if (out.empty()) throw UsageError("--cells: no site groups given");
  return out;
}

std::vector<SubsystemTarget> estimate_cells(const Dataset& ds, const std::vector<std::vector<std::size_t>>& cells) {
  std::vector<SubsystemTarget> out;
  for (const auto& c : cells) out.push_back({c, estimate_subsystem_rdm_projected(ds, c)});
  return out;
}

json estimates_to_json(const std::vector<PauliEstimate>& est) {
  json arr = json::array();
  for (const auto& e : est) arr.push_back(estimate_to_json(e));
  return {{"estimates", arr}};
}

std::vector<PauliEstimate> load_estimates(const fs::path& p) {
  const json j = read_json(p);
  std::vector<PauliEstimate> out;
  try {
    for (const auto& e : j.at("estimates")) out.push_back(estimate_from_json(e));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  return out;
}

// ---- training flags shared by `train` and `scaling` ---------------------------

struct TrainFlags {
  TrainConfig cfg;
  std::string regularizer = "none";
  std::string stabilizers_file;
  std::string cells;
  int lx = 0, ly = 0;  // surface-code stabilizers estimated from each dataset

  void add(CLI::App* cmd) {
    cmd->add_option("--chi", cfg.chi, "model bond dimension")->capture_default_str();
    cmd->add_option("--beta", cfg.beta, "regularization weight")->capture_default_str();
    cmd->add_option("--regularizer", regularizer, "none | stabilizers | rdm")
        ->check(CLI::IsMember({"none", "stabilizers", "rdm"}))
        ->capture_default_str();
    cmd->add_option("--stabilizers", stabilizers_file, "stabilizer estimates from `evaluate --estimate-stabilizers`");
    cmd->add_option("--lx", lx, "surface-code width for stabilizers estimated from the dataset");
    cmd->add_option("--ly", ly, "surface-code height for stabilizers estimated from the dataset");
    cmd->add_option("--cells", cells, "RDM regularizer cells, 1-based sites, e.g. \"1,2,3;4,5,6\"");
    cmd->add_option("--lr", cfg.sgd.learning_rate, "SGD learning rate")->capture_default_str();
    cmd->add_option("--batch-size", cfg.sgd.batch_size, "SGD minibatch size")->capture_default_str();
    cmd->add_option("--epochs", cfg.sgd.epochs, "SGD epochs")->capture_default_str();
    cmd->add_option("--lr-decay", cfg.sgd.decay, "SGD learning-rate decay")->capture_default_str();
    cmd->add_option("--lbfgs-iterations", cfg.lbfgs.max_iterations, "L-BFGS iteration cap")->capture_default_str();
    cmd->add_option("--lbfgs-rtol", cfg.lbfgs.relative_tolerance, "L-BFGS relative loss tolerance")->capture_default_str();
    cmd->add_option("--lbfgs-gtol", cfg.lbfgs.gradient_tolerance, "L-BFGS gradient tolerance")->capture_default_str();
    cmd->add_option("--restarts", cfg.n_restarts, "independent random restarts")->capture_default_str();
  }

  // Fills the regularizer targets for one dataset.
  TrainConfig resolve(const Dataset& ds) const {
    TrainConfig c = cfg;
    c.regularizer = parse_regularizer(regularizer);
    if (c.regularizer == RegularizerKind::Stabilizers) {
      if (!stabilizers_file.empty()) {
        c.stabilizers = load_estimates(stabilizers_file);
      } else if (lx > 0 && ly > 0) {
        c.stabilizers = estimate_paulis(ds, surface_code_stabilizers(lx, ly));
      } else {
        throw UsageError("--regularizer stabilizers needs --stabilizers FILE or --lx/--ly");
      }
      for (const auto& e : c.stabilizers) e.observable.check_within(ds.n);
    }
    if (c.regularizer == RegularizerKind::ProjectedRDM) {
      if (cells.empty()) throw UsageError("--regularizer rdm needs --cells");
      c.cells = estimate_cells(ds, parse_cells(cells));
    }
    c.validate();
    return c;
  }

  json describe(const TrainConfig& c) const {
    json j = config_to_json(c);
    if (!stabilizers_file.empty()) j["stabilizers_file"] = stabilizers_file;
    if (lx > 0) j["surface_code"] = {lx, ly};
    if (!cells.empty()) j["cells"] = cells;
    return j;
  }
};

struct TrainOutcome {
  TrainResult result;
  TrainConfig cfg;
};

TrainOutcome run_training(const TrainFlags& flags, const Dataset& ds, std::uint64_t seed,
                          const std::optional<MPSState>& target) {
  TrainConfig cfg = flags.resolve(ds);
  cfg.seed = seed;
  TrainOptions opt;
  opt.target = target;
  return {train(cfg, ds, opt), cfg};
}

void write_training_outputs(const fs::path& dir, const TrainOutcome& t) {
  save_mps((dir / "model.mps").string(), t.result.model);
  std::ofstream h(dir / "history.csv");
  write_history_csv(h, t.result.history);
}

// ---- generate-state ----------------------------------------------------------

struct GenerateArgs {
  RunLocation loc;
  std::string system = "surface-code";
  int lx = 3, ly = 3;
  double hz = 0.0, delta = 1.7, h_bd = kDefaultBoundaryField;
  std::size_t n = 0;
  double x = 0.0;
  Eigen::Index chi = 10;
  std::uint64_t seed = 1;
  std::size_t sweeps = 20;
  bool real = false;
  std::string bits;
};

int cmd_generate_state(const GenerateArgs& a) {
  Manifest m{"generate-state"};
  m.config = {{"system", a.system}};
  m.seeds = {{"state", a.seed}};
  json sidecar;
  MPSState state;
  auto check_lattice = [&](int min_lx, int min_ly) {
    if (a.lx < min_lx) throw UsageError("--lx must be >= " + std::to_string(min_lx) + " for " + a.system);
    if (a.ly < min_ly) throw UsageError("--ly must be >= " + std::to_string(min_ly) + " for " + a.system);
  };
  auto run_dmrg = [&](const MPO& mpo) {
    DmrgConfig d;
    d.chi_max = a.chi;
    d.n_sweeps = a.sweeps;
    d.seed = a.seed;
    const DmrgResult r = dmrg_solve(mpo, d);
    sidecar = {{"energy", r.energy},
               {"sweeps", r.energies.size()},
               {"energies", r.energies},
               {"converged", r.converged},
               {"discarded_weight", r.max_discarded_weight},
               {"config", {{"chi_max", d.chi_max}, {"n_sweeps", d.n_sweeps}, {"energy_tolerance", d.energy_tolerance}, {"seed", d.seed}}}};
    return r.state;
  };

  if (a.system == "surface-code") {
    check_lattice(2, 2);
    m.config.update({{"lx", a.lx}, {"ly", a.ly}, {"hz", a.hz}, {"chi", a.chi}});
    state = run_dmrg(surface_code_mpo(a.lx, a.ly, a.hz));
  } else if (a.system == "ruby") {
    check_lattice(1, 2);
    if (a.ly % 2 != 0) throw UsageError("--ly must be even for the ruby cylinder");
    m.config.update({{"lx", a.lx}, {"ly", a.ly}, {"delta", a.delta}, {"h_bd", a.h_bd}, {"chi", a.chi}});
    state = run_dmrg(ruby_rydberg_mpo(a.lx, a.ly, a.delta, a.h_bd));
  } else if (a.system == "ghz") {
    if (a.n < 1) throw UsageError("--n must be >= 1 for ghz");
    m.config["n"] = a.n;
    state = ghz_state(a.n);
  } else if (a.system == "interpolated") {
    if (!(a.x >= 0.0 && a.x <= 1.0)) throw UsageError("--x must lie in [0, 1]");
    m.config["x"] = a.x;
    state = interpolated_state(a.x, a.seed);
  } else if (a.system == "random") {
    if (a.n < 1) throw UsageError("--n must be >= 1 for random");
    if (a.chi < 1) throw UsageError("--chi must be >= 1");
    m.config.update({{"n", a.n}, {"chi", a.chi}, {"real", a.real}});
    state = normalize(new_random_mps(a.n, a.chi, a.seed, a.real ? Entries::Real : Entries::Complex));
  } else if (a.system == "product") {
    Bits b;
    try {
      b = parse_bits(a.bits);
    } catch (const std::exception&) {
      throw UsageError("--bits must be a string of 0/1");
    }
    if (b.empty()) throw UsageError("--bits must be a non-empty string of 0/1");
    m.config["bits"] = a.bits;
    state = product_state(b);
  }

  const fs::path dir = a.loc.resolve();
  save_mps((dir / "state.mps").string(), state);
  sidecar["n"] = state.size();
  sidecar["state_hash"] = state_hash(state);
  if (!sidecar.contains("config")) sidecar["config"] = m.config;
  write_json(dir / "state.json", sidecar);
  m.outputs = {{"n", state.size()}, {"state_hash", state_hash(state)}};
  if (sidecar.contains("energy")) m.outputs["energy"] = sidecar["energy"];
  m.write(dir, {"state.mps", "state.json"});
  std::cout << (dir / "state.mps").string() << '\n';
  return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  RunLocation loc;
  std::string state;
  std::string ensemble = "random-xz";
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  double train_fraction = 0.0;
};

int cmd_sample(const SampleArgs& a) {
  const MPSState target = load_mps(a.state);
  const Ensemble e = parse_ensemble(a.ensemble);
  if (a.count == 0) throw UsageError("--n-samples must be >= 1");
  const Dataset ds = generate_dataset(target, EnsembleSpec{e, target.size()}, a.count, a.seed, std::max<std::size_t>(a.jobs, 1));
  const fs::path dir = a.loc.resolve();
  save_dataset((dir / "dataset.jsonl").string(), ds);
  std::vector<std::string> files{"dataset.jsonl"};
  Manifest m{"sample"};
  m.config = {{"ensemble", a.ensemble}, {"n_samples", a.count}, {"n", target.size()}};
  m.seeds = {{"sample", a.seed}};
  m.input("state", a.state);
  if (a.train_fraction > 0.0) {
    const auto [tr, te] = split_dataset(ds, a.train_fraction, derive_seed(a.seed, 1));
    save_dataset((dir / "train.jsonl").string(), tr);
    save_dataset((dir / "test.jsonl").string(), te);
    files.insert(files.end(), {"train.jsonl", "test.jsonl"});
    m.config["train_fraction"] = a.train_fraction;
    m.seeds["split"] = derive_seed(a.seed, 1);
  }
  m.outputs = {{"N", ds.size()}, {"state_hash", ds.provenance.state_hash}};
  m.write(dir, files);
  std::cout << (dir / "dataset.jsonl").string() << '\n';
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  RunLocation loc;
  TrainFlags flags;
  std::string dataset;
  std::string target;
  std::uint64_t seed = 1;
};

int cmd_train(const TrainArgs& a) {
  const Dataset ds = load_dataset(a.dataset);
  std::optional<MPSState> target;
  if (!a.target.empty()) target = load_mps(a.target);
  const TrainOutcome t = run_training(a.flags, ds, a.seed, target);
  const fs::path dir = a.loc.resolve();
  write_training_outputs(dir, t);
  Manifest m{"train"};
  m.config = a.flags.describe(t.cfg);
  m.config["ensemble"] = ensemble_name(ds.provenance.ensemble);
  m.seeds = {{"train", a.seed}, {"dataset", ds.provenance.seed}};
  m.input("dataset", a.dataset);
  if (!a.target.empty()) m.input("target", a.target);
  if (!a.flags.stabilizers_file.empty()) m.input("stabilizers", a.flags.stabilizers_file);
  m.outputs = {{"N", ds.size()},
               {"converged", t.result.history.converged},
               {"best_restart", t.result.best_restart},
               {"final_loss", t.result.history.final_loss()},
               {"stop_reason", t.result.history.stop_reason}};
  if (target) m.outputs["fidelity"] = fidelity(t.result.model, *target);
  m.write(dir, {"model.mps", "history.csv"});
  std::cout << (dir / "model.mps").string() << '\n';
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  RunLocation loc;
  std::string model, target, dataset;
  std::vector<std::string> observables;
  std::vector<std::size_t> cuts;
  bool estimate_stabilizers = false;
  int lx = 0, ly = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const bool report = !a.model.empty() || !a.target.empty();
  if (!report && !a.estimate_stabilizers) throw UsageError("evaluate needs --model and --target, or --estimate-stabilizers");
  std::vector<PauliString> obs;
  for (const auto& s : a.observables) {
    try {
      obs.push_back(PauliString::parse(s));
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("--observable: ") + e.what());
    }
  }
  const fs::path dir = a.loc.resolve();
  Manifest m{"evaluate"};
  std::vector<std::string> files;

  if (report) {
    if (a.model.empty() || a.target.empty()) throw UsageError("a report needs both --model and --target");
    const MPSState model = load_mps(a.model), target = load_mps(a.target);
    const json r = evaluate_report(model, target, ReportRequest{obs, a.cuts});
    write_json(dir / "report.json", r);
    files.push_back("report.json");
    m.input("model", a.model);
    m.input("target", a.target);
    m.outputs["fidelity"] = r["fidelity"];
    std::cout << "fidelity " << r["fidelity"].get<double>() << '\n';
  }

  if (a.estimate_stabilizers) {
    if (a.dataset.empty()) throw UsageError("--estimate-stabilizers needs --dataset");
    const Dataset ds = load_dataset(a.dataset);
    std::vector<PauliString> targets;
    if (a.lx > 0 || a.ly > 0) {
      if (a.lx < 2) throw UsageError("--lx must be >= 2");
      if (a.ly < 2) throw UsageError("--ly must be >= 2");
      targets = surface_code_stabilizers(a.lx, a.ly);
    }
    targets.insert(targets.end(), obs.begin(), obs.end());
    if (targets.empty()) throw UsageError("--estimate-stabilizers needs --lx/--ly or --observable");
    write_json(dir / "stabilizers.json", estimates_to_json(estimate_paulis(ds, targets)));
    files.push_back("stabilizers.json");
    m.input("dataset", a.dataset);
    m.outputs["estimated"] = targets.size();
  }
  m.config = {{"observables", a.observables}, {"cuts", a.cuts}, {"estimate_stabilizers", a.estimate_stabilizers}};
  m.write(dir, files);
  return 0;
}

// ---- scaling ----------------------------------------------------------------

struct ScalingArgs {
  RunLocation loc;
  TrainFlags flags;
  std::string target;
  std::string runs;  // aggregate existing runs instead of running a matrix
  std::string ensemble = "random-xz";
  std::vector<std::size_t> grid;
  std::size_t seeds = 10;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  bool keep_unconverged = false;
  double threshold = 0.0;
};

json aggregate(const fs::path& runs_root, const MPSState& target, const ScalingArgs& a, const fs::path& out) {
  const auto runs = collect_runs(runs_root);
  if (runs.empty()) throw InvalidArgument("no training runs found below " + runs_root.string());
  ScalingCurve curve = scaling_from_runs(runs, target, !a.keep_unconverged);
  curve.validate();
  std::ofstream csv(out / "scaling.csv");
  write_scaling_csv(csv, curve);
  json summary{{"n", curve.n}, {"ensemble", curve.ensemble}, {"runs", runs.size()}, {"points", json::array()}};
  for (const auto& p : curve.points)
    summary["points"].push_back({{"N", p.N}, {"median", p.median}, {"q25", p.q25}, {"q75", p.q75}, {"used", p.infidelities.size()}, {"excluded", p.excluded}});
  try {
    const PowerLawFit fit = fit_power_law(curve);
    summary["fit"] = fit_to_json(fit);
    if (a.threshold > 0.0) {
      const auto r = samples_to_threshold({curve}, a.threshold).front();
      summary["threshold"] = {{"local_fidelity", a.threshold},
                              {"epsilon", r.epsilon},
                              {"n_star", std::isinf(r.n_star) ? json("inf") : json(r.n_star)},
                              {"unreachable", r.unreachable},
                              {"extrapolated", r.extrapolated}};
    }
  } catch (const InvalidArgument& e) {
    summary["fit_error"] = e.what();
  }
  write_json(out / "scaling.json", summary);
  return summary;
}

int cmd_scaling(const ScalingArgs& a) {
  if (a.target.empty()) throw UsageError("scaling needs --target");
  const MPSState target = load_mps(a.target);
  const fs::path dir = a.loc.resolve();
  Manifest m{"scaling"};
  m.input("target", a.target);
  fs::path runs_root = dir / "cells";

  if (!a.runs.empty()) {
    runs_root = a.runs;
    m.config = {{"runs", a.runs}};
  } else {
    if (a.grid.empty()) throw UsageError("scaling needs --n-grid (or --runs to aggregate)");
    if (a.seeds == 0) throw UsageError("--seeds must be >= 1");
    const Ensemble ens = parse_ensemble(a.ensemble);
    struct Cell {
      std::size_t N, s;
    };
    std::vector<Cell> cells;
    for (auto N : a.grid)
      for (std::size_t s = 0; s < a.seeds; ++s) cells.push_back({N, s});
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          const auto [N, s] = cells[i];
          const std::uint64_t data_seed = derive_seed(derive_seed(a.seed, N), 2 * s);
          const std::uint64_t train_seed = derive_seed(derive_seed(a.seed, N), 2 * s + 1);
          const fs::path cell = runs_root / ("N" + std::to_string(N) + "_s" + std::to_string(s));
          fs::create_directories(cell);
          const Dataset ds = generate_dataset(target, EnsembleSpec{ens, target.size()}, N, data_seed);
          save_dataset((cell / "dataset.jsonl").string(), ds);
          const TrainOutcome t = run_training(a.flags, ds, train_seed, std::nullopt);
          write_training_outputs(cell, t);
          Manifest cm{"train"};
          cm.config = a.flags.describe(t.cfg);
          cm.config["ensemble"] = a.ensemble;
          cm.seeds = {{"train", train_seed}, {"dataset", data_seed}};
          cm.input("target", a.target);
          cm.outputs = {{"N", N}, {"converged", t.result.history.converged}, {"final_loss", t.result.history.final_loss()}};
          cm.write(cell, {"dataset.jsonl", "model.mps", "history.csv"});
          std::lock_guard lock(log_mutex);
          std::cerr << "cell N=" << N << " seed=" << s << " 1-F=" << 1.0 - fidelity(t.result.model, target) << '\n';
        } catch (...) {
          std::lock_guard lock(log_mutex);
          if (!failure) failure = std::current_exception();
          next = cells.size();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < std::max<std::size_t>(a.jobs, 1); ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    m.config = a.flags.describe(a.flags.cfg);
    m.config.update({{"ensemble", a.ensemble}, {"n_grid", a.grid}, {"seeds", a.seeds}, {"jobs", a.jobs}});
    m.seeds = {{"matrix", a.seed}};
  }

  const json summary = aggregate(runs_root, target, a, dir);
  m.outputs = summary;
  m.write(dir, {"scaling.csv", "scaling.json"});
  std::cout << (dir / "scaling.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn matrix-product states from randomized XZ measurements"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  std::string run_root = "runs";
  app.add_option("--run-root", run_root, "directory holding run directories")->envname(kRunRootEnv)->capture_default_str();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-state", "write a target state (DMRG ground state or analytic state)");
  add_location(g, gen.loc, "state");
  g->add_option("--system", gen.system, "surface-code | ruby | ghz | interpolated | random | product")
      ->check(CLI::IsMember({"surface-code", "ruby", "ghz", "interpolated", "random", "product"}))
      ->capture_default_str();
  g->add_option("--lx", gen.lx, "lattice width")->capture_default_str();
  g->add_option("--ly", gen.ly, "lattice height (ruby: even)")->capture_default_str();
  g->add_option("--hz", gen.hz, "surface-code Z field")->capture_default_str();
  g->add_option("--delta", gen.delta, "ruby detuning")->capture_default_str();
  g->add_option("--h-bd", gen.h_bd, "ruby boundary field")->capture_default_str();
  g->add_option("--n", gen.n, "number of qubits (ghz, random)");
  g->add_option("--x", gen.x, "GHZ/random mixing weight (interpolated)")->capture_default_str();
  g->add_option("--chi", gen.chi, "DMRG bond cap, or bond dimension of a random state")->capture_default_str();
  g->add_option("--sweeps", gen.sweeps, "DMRG sweep cap")->capture_default_str();
  g->add_option("--seed", gen.seed, "seed")->capture_default_str();
  g->add_flag("--real", gen.real, "real entries for random states");
  g->add_option("--bits", gen.bits, "computational basis string (product)");

  SampleArgs smp;
  auto* s = app.add_subcommand("sample", "draw a measurement dataset from a state");
  add_location(s, smp.loc, "sample");
  s->add_option("--state", smp.state, "MPS file")->required()->check(CLI::ExistingFile);
  s->add_option("--ensemble", smp.ensemble, "random-xz | global-xz")
      ->check(CLI::IsMember({"random-xz", "global-xz"}))
      ->capture_default_str();
  s->add_option("--n-samples", smp.count, "number of shots")->capture_default_str();
  s->add_option("--seed", smp.seed, "sampling seed")->capture_default_str();
  s->add_option("--jobs", smp.jobs, "sampling threads (output does not depend on it)")->capture_default_str();
  s->add_option("--train-fraction", smp.train_fraction, "also write train/test splits with this fraction");

  TrainArgs trn;
  auto* t = app.add_subcommand("train", "fit an MPS model to a dataset");
  add_location(t, trn.loc, "train");
  t->add_option("--dataset", trn.dataset, "dataset file")->required()->check(CLI::ExistingFile);
  t->add_option("--target", trn.target, "target MPS, enables the fidelity column")->check(CLI::ExistingFile);
  t->add_option("--seed", trn.seed, "training seed")->capture_default_str();
  trn.flags.add(t);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "score a model against a target, or estimate stabilizers from data");
  add_location(e, ev.loc, "evaluate");
  e->add_option("--model", ev.model, "model MPS")->check(CLI::ExistingFile);
  e->add_option("--target", ev.target, "target MPS")->check(CLI::ExistingFile);
  e->add_option("--observable", ev.observables, "Pauli string such as \"Z1 Z2\" (repeatable)");
  e->add_option("--cut", ev.cuts, "entanglement cut 1..n-1 (repeatable; default all)");
  e->add_flag("--estimate-stabilizers", ev.estimate_stabilizers, "write shadow estimates to stabilizers.json");
  e->add_option("--dataset", ev.dataset, "dataset for --estimate-stabilizers")->check(CLI::ExistingFile);
  e->add_option("--lx", ev.lx, "surface-code width of the stabilizers to estimate");
  e->add_option("--ly", ev.ly, "surface-code height of the stabilizers to estimate");

  ScalingArgs sc;
  auto* c = app.add_subcommand("scaling", "run an (N, seed) matrix and fit infidelity vs N");
  add_location(c, sc.loc, "scaling");
  c->add_option("--target", sc.target, "target MPS")->check(CLI::ExistingFile);
  c->add_option("--runs", sc.runs, "aggregate existing training runs below this directory")->check(CLI::ExistingDirectory);
  c->add_option("--ensemble", sc.ensemble, "random-xz | global-xz")
      ->check(CLI::IsMember({"random-xz", "global-xz"}))
      ->capture_default_str();
  c->add_option("--n-grid", sc.grid, "sample sizes")->delimiter(',');
  c->add_option("--seeds", sc.seeds, "seeds per sample size")->capture_default_str();
  c->add_option("--seed", sc.seed, "base seed of the matrix")->capture_default_str();
  c->add_option("--jobs", sc.jobs, "cells trained in parallel")->capture_default_str();
  c->add_flag("--keep-unconverged", sc.keep_unconverged, "include runs the trainer flagged as unconverged");
  c->add_option("--threshold", sc.threshold, "local-fidelity threshold for the sample-size estimate");
  sc.flags.add(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  for (RunLocation* loc : {&gen.loc, &smp.loc, &trn.loc, &ev.loc, &sc.loc}) loc->root = run_root;
  try {
    if (*g) return cmd_generate_state(gen);
    if (*s) return cmd_sample(smp);
    if (*t) return cmd_train(trn);
    if (*e) return cmd_evaluate(ev);
    if (*c) return cmd_scaling(sc);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const InvalidArgument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const FormatError& err) {
    std::cerr << "format error: " << err.what() << '\n';
    return 3;
  } catch (const ResourceLimit& err) {
    std::cerr << "resource limit: " << err.what() << '\n';
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
