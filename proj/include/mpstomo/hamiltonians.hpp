#pragma once

#include <cmath>
#include <vector>

#include "mpstomo/lattice.hpp"
#include "mpstomo/mpo.hpp"
#include "mpstomo/mps.hpp"

namespace mpstomo {

// ---- surface code -------------------------------------------------------

// Stabilizers of the rotated surface code on an lx x ly qubit grid, in MPS
// site indices. Faces (x, y) with corner qubits (x..x+1, y..y+1) are Z-type
// for even x+y and X-type otherwise. Two-qubit faces hanging off the grid
// are kept as X-type on the bottom/top edges and Z-type on the left/right
// edges, which yields n-1 independent stabilizers.
inline std::vector<PauliString> surface_code_stabilizers(int lx, int ly) {
  if (lx < 2 || ly < 2) throw InvalidArgument("surface code needs Lx, Ly >= 2");
  auto type_of = [](int x, int y) { return ((x + y) % 2 + 2) % 2 == 0 ? Pauli::Z : Pauli::X; };
  std::vector<PauliString> out;
  auto face = [&](int x, int y, Pauli want_on_boundary, bool boundary) {
    const Pauli p = type_of(x, y);
    if (boundary && p != want_on_boundary) return;
    std::vector<std::size_t> sites;
    for (int dx = 0; dx < 2; ++dx)
      for (int dy = 0; dy < 2; ++dy) {
        const int qx = x + dx, qy = y + dy;
        if (qx >= 0 && qx < lx && qy >= 0 && qy < ly) sites.push_back(surface_code_site(lx, ly, qx, qy));
      }
    out.push_back(PauliString::uniform(p, sites));
  };
  for (int x = 0; x + 1 < lx; ++x)
    for (int y = 0; y + 1 < ly; ++y) face(x, y, Pauli::I, false);
  for (int x = 0; x + 1 < lx; ++x) {
    face(x, -1, Pauli::X, true);
    face(x, ly - 1, Pauli::X, true);
  }
  for (int y = 0; y + 1 < ly; ++y) {
    face(-1, y, Pauli::Z, true);
    face(lx - 1, y, Pauli::Z, true);
  }
  return out;
}

// H = -sum_S S - h_z sum_i Z_i.
inline PauliSum surface_code_hamiltonian(int lx, int ly, double h_z) {
  PauliSum h{static_cast<std::size_t>(lx * ly), {}};
  for (const auto& s : surface_code_stabilizers(lx, ly)) h.add(PauliString(s.support(), -1.0));
  if (h_z != 0.0)
    for (std::size_t i = 0; i < h.n; ++i) h.add(PauliString({{i, Pauli::Z}}, -h_z));
  return h;
}

inline MPO surface_code_mpo(int lx, int ly, double h_z) { return mpo_from_pauli_sum(surface_code_hamiltonian(lx, ly, h_z)); }

// ---- Rydberg atoms on the ruby lattice ------------------------------------

inline constexpr double kRydbergBlockadeV = 47.0;
inline constexpr double kDefaultBoundaryField = -0.6;

// Rydberg Hamiltonian in units of the Rabi frequency, with n_l = (1 + Z_l)/2:
//
//   H = 1/2 sum X_l - delta sum n_l + V sum_{pairs within 2a} n_l n_l'
//       - h_bd sum_{l on boundary} n_l
inline PauliSum ruby_rydberg_hamiltonian(const LatticeSpec& lat, double delta, double h_bd = kDefaultBoundaryField) {
  PauliSum h{lat.size(), {}};
  auto add_n = [&](std::size_t l, double c) {
    h.add(PauliString({}, 0.5 * c));
    h.add(PauliString({{l, Pauli::Z}}, 0.5 * c));
  };
  for (std::size_t l = 0; l < lat.size(); ++l) {
    h.add(PauliString({{l, Pauli::X}}, 0.5));
    add_n(l, -delta);
  }
  for (auto b : lat.boundary) add_n(b, -h_bd);
  const double q = kRydbergBlockadeV / 4.0;
  for (const auto& [a, b] : lat.neighbors) {
    h.add(PauliString({}, q));
    h.add(PauliString({{a, Pauli::Z}}, q));
    h.add(PauliString({{b, Pauli::Z}}, q));
    h.add(PauliString({{a, Pauli::Z}, {b, Pauli::Z}}, q));
  }
  return h;
}

inline MPO ruby_rydberg_mpo(int lx, int ly, double delta, double h_bd = kDefaultBoundaryField) {
  return mpo_from_pauli_sum(ruby_rydberg_hamiltonian(ruby_lattice(lx, ly), delta, h_bd));
}

// ---- reference states ---------------------------------------------------

// (|0...0> + |1...1>)/sqrt 2 with bond dimension 2.
inline MPSState ghz_state(std::size_t n) {
  if (n == 0) throw InvalidArgument("GHZ state needs at least one qubit");
  Tensors t(n);
  if (n == 1) {
    t[0].m = {Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Index l = i == 0 ? 1 : 2, r = i + 1 == n ? 1 : 2;
      for (int s = 0; s < 2; ++s) {
        t[i].m[s] = Matrix::Zero(l, r);
        t[i].m[s](l == 1 ? 0 : s, r == 1 ? 0 : s) = 1.0;
      }
    }
  }
  return MPSState(scaled(t, std::sqrt(0.5)), std::nullopt);
}

inline constexpr std::size_t kInterpolationQubits = 3;

// Normalized real bond-dimension-2 state used as the random end point.
inline MPSState interpolation_random_state(std::uint64_t seed) {
  return normalize(new_random_mps(kInterpolationQubits, 2, seed, Entries::Real));
}

// sqrt(1-x)|GHZ> + sqrt(x)|psi_random>, renormalized and recompressed.
inline MPSState interpolated_state(double x, std::uint64_t seed) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("mixing weight x must lie in [0, 1]");
  const MPSState sum =
      superpose(ghz_state(kInterpolationQubits), std::sqrt(1.0 - x), interpolation_random_state(seed), std::sqrt(x));
  return normalize(compress(sum, 4, 1e-14).state);
}

}  // namespace mpstomo
