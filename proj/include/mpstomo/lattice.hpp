#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpstomo/errors.hpp"

namespace mpstomo {

enum class Geometry { SurfaceCode, RubyCylinder };

inline std::string geometry_name(Geometry g) { return g == Geometry::SurfaceCode ? "surface-code" : "ruby-cylinder"; }

struct LatticeSite {
  double x = 0.0;
  double y = 0.0;
  int sublattice = 0;  // basis atom within the unit cell (0 for the surface code)
  int cell_x = 0;
  int cell_y = 0;
};

// Sites are listed in snake order: sites[k] is MPS site k.
struct LatticeSpec {
  Geometry geometry = Geometry::SurfaceCode;
  int lx = 0;
  int ly = 0;
  std::vector<LatticeSite> sites;
  std::vector<std::array<std::size_t, 2>> neighbors;  // i < j, snake indices
  std::vector<std::size_t> boundary;                  // sites receiving the boundary field

  std::size_t size() const { return sites.size(); }
};

// Rotated surface code with qubits on an lx x ly grid. The snake runs up
// column 0, down column 1, and so on.
inline std::size_t surface_code_site(int lx, int ly, int x, int y) {
  (void)lx;
  return static_cast<std::size_t>(x * ly + (x % 2 == 0 ? y : ly - 1 - y));
}

inline LatticeSpec surface_code_lattice(int lx, int ly) {
  if (lx < 2 || ly < 2) throw InvalidArgument("surface code needs Lx, Ly >= 2");
  LatticeSpec spec{Geometry::SurfaceCode, lx, ly, {}, {}, {}};
  spec.sites.resize(static_cast<std::size_t>(lx * ly));
  for (int x = 0; x < lx; ++x)
    for (int y = 0; y < ly; ++y) spec.sites[surface_code_site(lx, ly, x, y)] = {double(x), double(y), 0, x, y};
  for (int x = 0; x < lx; ++x)
    for (int y = 0; y < ly; ++y) {
      const auto a = surface_code_site(lx, ly, x, y);
      if (x + 1 < lx) spec.neighbors.push_back({std::min(a, surface_code_site(lx, ly, x + 1, y)), std::max(a, surface_code_site(lx, ly, x + 1, y))});
      if (y + 1 < ly) spec.neighbors.push_back({std::min(a, surface_code_site(lx, ly, x, y + 1)), std::max(a, surface_code_site(lx, ly, x, y + 1))});
    }
  std::sort(spec.neighbors.begin(), spec.neighbors.end());
  return spec;
}

// Ruby lattice: atoms on the bond midpoints of a kagome lattice whose bond
// length is 2a (a = 1 here). Distances between atoms are a, sqrt(3) a, 2a,
// ... and the rectangle spanned by the first- and second-neighbor
// directions has aspect ratio sqrt(3).
//
// Kagome Bravais vectors are a1 = (4, 0), a2 = (2, 2 sqrt 3). Rows of cells
// alternate their x offset so that the strip is rectangular; the y period is
// 2 sqrt(3) ly, which is a lattice translation only for even ly.
inline constexpr double kRubyNeighborRadius = 2.0;

namespace detail {

inline const std::array<std::array<double, 2>, 6>& ruby_basis() {
  static const double r3 = std::sqrt(3.0);
  static const std::array<std::array<double, 2>, 6> b{{
      {1.0, 0.0},               // up triangle, bottom edge
      {0.5, 0.5 * r3},          // up triangle, left edge
      {1.5, 0.5 * r3},          // up triangle, right edge
      {3.0, 0.0},               // horizontal bond to the next cell
      {1.5, 1.5 * r3},          // down triangle above, right edge
      {0.5, 1.5 * r3},          // down triangle above, left edge
  }};
  return b;
}

}  // namespace detail

inline double ruby_period_y(int ly) { return 2.0 * std::sqrt(3.0) * ly; }

// Minimum-image distance on the cylinder (periodic in y).
inline double ruby_distance(const LatticeSite& a, const LatticeSite& b, int ly) {
  const double period = ruby_period_y(ly);
  double dy = std::fmod(std::abs(a.y - b.y), period);
  dy = std::min(dy, period - dy);
  return std::hypot(a.x - b.x, dy);
}

inline LatticeSpec ruby_lattice(int lx, int ly) {
  if (lx < 1 || ly < 1) throw InvalidArgument("ruby lattice needs Lx, Ly >= 1");
  if (ly % 2 != 0) throw InvalidArgument("ruby cylinder needs an even Ly so that the y period is a lattice translation");
  const double r3 = std::sqrt(3.0);
  std::vector<LatticeSite> atoms;
  for (int i = 0; i < lx; ++i)
    for (int j = 0; j < ly; ++j) {
      const double ox = 4.0 * i + (j % 2 ? 2.0 : 0.0);
      const double oy = 2.0 * r3 * j;
      for (int s = 0; s < 6; ++s) {
        const auto& b = detail::ruby_basis()[static_cast<std::size_t>(s)];
        atoms.push_back({ox + b[0], oy + b[1], s, i, j});
      }
    }

  // Snake: columns of equal x from left to right, alternating direction in y.
  auto key = [](double v) { return std::llround(v * 1e6); };
  std::sort(atoms.begin(), atoms.end(), [&](const LatticeSite& a, const LatticeSite& b) {
    if (key(a.x) != key(b.x)) return a.x < b.x;
    return a.y < b.y;
  });
  for (std::size_t begin = 0, col = 0; begin < atoms.size(); ++col) {
    std::size_t end = begin;
    while (end < atoms.size() && key(atoms[end].x) == key(atoms[begin].x)) ++end;
    if (col % 2 == 1) std::reverse(atoms.begin() + static_cast<std::ptrdiff_t>(begin), atoms.begin() + static_cast<std::ptrdiff_t>(end));
    begin = end;
  }

  LatticeSpec spec{Geometry::RubyCylinder, lx, ly, std::move(atoms), {}, {}};
  const std::size_t n = spec.sites.size();
  std::vector<int> coordination(n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (ruby_distance(spec.sites[a], spec.sites[b], ly) <= kRubyNeighborRadius + 1e-9) {
        spec.neighbors.push_back({a, b});
        ++coordination[a];
        ++coordination[b];
      }
  // A bulk atom has six partners within 2a; the open edges have fewer.
  for (std::size_t a = 0; a < n; ++a)
    if (coordination[a] < 6) spec.boundary.push_back(a);
  return spec;
}

inline nlohmann::json lattice_to_json(const LatticeSpec& spec) {
  nlohmann::json j;
  j["format"] = "mpstomo-lattice";
  j["version"] = 1;
  j["geometry"] = geometry_name(spec.geometry);
  j["Lx"] = spec.lx;
  j["Ly"] = spec.ly;
  j["n"] = spec.size();
  auto& sites = j["sites"] = nlohmann::json::array();
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto& s = spec.sites[k];
    sites.push_back({{"site", k + 1}, {"x", s.x}, {"y", s.y}, {"sublattice", s.sublattice}, {"cell", {s.cell_x, s.cell_y}}});
  }
  auto& nb = j["neighbors"] = nlohmann::json::array();
  for (const auto& p : spec.neighbors) nb.push_back({p[0] + 1, p[1] + 1});
  auto& bd = j["boundary"] = nlohmann::json::array();
  for (auto b : spec.boundary) bd.push_back(b + 1);
  return j;
}

}  // namespace mpstomo
