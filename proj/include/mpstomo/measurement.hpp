#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpstomo/mps.hpp"
#include "mpstomo/mps_io.hpp"
#include "mpstomo/rng.hpp"

namespace mpstomo {

enum class Ensemble { GlobalXZ, RandomXZ };

inline std::string ensemble_name(Ensemble e) { return e == Ensemble::GlobalXZ ? "global-xz" : "random-xz"; }

inline Ensemble parse_ensemble(const std::string& s) {
  if (s == "global-xz" || s == "GlobalXZ") return Ensemble::GlobalXZ;
  if (s == "random-xz" || s == "RandomXZ") return Ensemble::RandomXZ;
  throw InvalidArgument("unknown ensemble '" + s + "' (expected global-xz or random-xz)");
}

struct EnsembleSpec {
  Ensemble kind = Ensemble::RandomXZ;
  std::size_t n = 0;
};

// GlobalXZ: X...X or Z...Z with probability 1/2 each.
// RandomXZ: every qubit independently X or Z with probability 1/2.
template <class Rng>
BasisString draw_basis(const EnsembleSpec& spec, Rng& rng) {
  if (spec.kind == Ensemble::GlobalXZ) return BasisString(spec.n, rng.coin() ? Axis::X : Axis::Z);
  BasisString b(spec.n, Axis::Z);
  for (std::size_t i = 0; i < spec.n; ++i) b[i] = rng.coin() ? Axis::X : Axis::Z;
  return b;
}

struct MeasurementRecord {
  BasisString basis;
  Bits bits;

  friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

struct Provenance {
  std::string state_hash;
  Ensemble ensemble = Ensemble::RandomXZ;
  std::uint64_t seed = 0;
  std::size_t total = 0;  // N of the dataset this one was drawn or split from
  std::string split;      // "", "train" or "test"
};

struct Dataset {
  std::size_t n = 0;
  Provenance provenance;
  std::vector<MeasurementRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  void validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.basis.size() != n || r.bits.size() != n)
        throw InvalidArgument("record " + std::to_string(i + 1) + " does not have length " + std::to_string(n));
      if (provenance.ensemble == Ensemble::GlobalXZ && !r.basis.uniform(Axis::X) && !r.basis.uniform(Axis::Z))
        throw InvalidArgument("record " + std::to_string(i + 1) + " has a mixed basis in a global-xz dataset");
    }
  }

  // Records [begin, end) as a dataset sharing this provenance.
  Dataset slice(std::size_t begin, std::size_t end) const {
    Dataset d{n, provenance, {}};
    d.records.assign(records.begin() + static_cast<std::ptrdiff_t>(begin),
                     records.begin() + static_cast<std::ptrdiff_t>(std::min(end, records.size())));
    return d;
  }
};

// Record i is drawn from Philox stream i of `seed`, so the dataset does not
// depend on how records are distributed over `jobs` threads.
inline Dataset generate_dataset(const MPSState& target, const EnsembleSpec& spec, std::size_t count, std::uint64_t seed,
                                unsigned jobs = 1) {
  if (count == 0) throw InvalidArgument("generate_dataset: N must be positive");
  if (spec.n != target.size()) throw InvalidArgument("generate_dataset: ensemble size does not match the state");
  const Sampler sampler(target);
  Dataset ds{spec.n, {state_hash(target), spec.kind, seed, count, ""}, std::vector<MeasurementRecord>(count)};
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Philox4x32 rng(seed, i);
      auto& r = ds.records[i];
      r.basis = draw_basis(spec, rng);
      r.bits = sampler.sample(r.basis, rng);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::min<std::size_t>(count, 256))));
  if (jobs == 1) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j * chunk, std::min(count, (j + 1) * chunk));
    for (auto& t : pool) t.join();
  }
  return ds;
}

// Seeded partition into sizes ceil(f N) and N - ceil(f N). Each side keeps
// the original record order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train fraction must lie in (0, 1)");
  const std::size_t total = ds.size();
  const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(total) - 1e-9));
  if (n_train == 0 || n_train >= total) throw InvalidArgument("split leaves one side empty");
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  Philox4x32 rng(seed, 0x73706c6974ULL);
  for (std::size_t i = total; i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto take = [&](const std::vector<std::size_t>& idx, const char* tag) {
    Dataset d{ds.n, ds.provenance, {}};
    d.provenance.split = tag;
    d.records.reserve(idx.size());
    for (auto i : idx) d.records.push_back(ds.records[i]);
    return d;
  };
  return {take(a, "train"), take(b, "test")};
}

// ---- JSON-lines persistence ---------------------------------------------

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  nlohmann::json header{{"format", "mpstomo-dataset"},
                        {"version", 1},
                        {"n", ds.n},
                        {"N", ds.size()},
                        {"ensemble", ensemble_name(ds.provenance.ensemble)},
                        {"seed", ds.provenance.seed},
                        {"source_N", ds.provenance.total},
                        {"state_hash", ds.provenance.state_hash},
                        {"split", ds.provenance.split}};
  out << header.dump() << '\n';
  std::string line;
  for (const auto& r : ds.records) {
    line.clear();
    line += R"({"basis":")";
    line += r.basis.str();
    line += R"(","bits":")";
    line += format_bits(r.bits);
    line += "\"}\n";
    out << line;
  }
  if (!out) throw FormatError("failed writing dataset");
}

inline Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset file is empty");
  Dataset ds;
  std::size_t expected = 0;
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.value("format", "") != "mpstomo-dataset") throw FormatError("dataset header has the wrong format tag");
    ds.n = h.at("n").get<std::size_t>();
    expected = h.at("N").get<std::size_t>();
    ds.provenance.ensemble = parse_ensemble(h.at("ensemble").get<std::string>());
    ds.provenance.seed = h.value("seed", std::uint64_t{0});
    ds.provenance.total = h.value("source_N", expected);
    ds.provenance.state_hash = h.value("state_hash", "");
    ds.provenance.split = h.value("split", "");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad dataset header: ") + e.what());
  }
  ds.records.reserve(expected);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MeasurementRecord r{BasisString::parse(j.at("basis").get<std::string>()), parse_bits(j.at("bits").get<std::string>())};
      if (r.basis.size() != ds.n || r.bits.size() != ds.n)
        throw FormatError("line " + std::to_string(lineno) + ": record length does not match n=" + std::to_string(ds.n));
      ds.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (ds.records.size() != expected)
    throw FormatError("dataset header announces " + std::to_string(expected) + " records, file has " +
                      std::to_string(ds.records.size()));
  try {
    ds.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_dataset(out, ds);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_dataset(in);
}

}  // namespace mpstomo
