#pragma once

// Purely random tree generators tracked along the path to a query point:
// uniform and centered split sequences, and the Mondrian process
// restricted to the cell containing the query (the restriction of a
// Mondrian to the subtree around a point is itself a Mondrian on the
// sub-cell, so the path view is an exact simulation of the cell law).

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "locreg/geometry.hpp"
#include "locreg/rng.hpp"

namespace locreg {

/// One recorded split: coordinate D in {1..d}, fraction S in (0,1), and
/// the realized length reduction S_bar (S if the query point fell left
/// of the cut, 1-S otherwise; boundary points are assigned left).
struct SplitStep {
  int D = 1;
  double S = 0.5;
  double S_bar = 0.5;
};

using SplitSequence = std::vector<SplitStep>;

enum class TreeKind { uniform, centered };

inline TreeKind tree_kind_from_string(const std::string& s) {
  if (s == "uniform") return TreeKind::uniform;
  if (s == "centered") return TreeKind::centered;
  throw std::invalid_argument("unknown tree kind '" + s + "'");
}

/// A grown path: the cell around the query point, the recorded splits,
/// and the cell's side lengths tracked multiplicatively.
///
/// The tracked sides exist because the absolute cell coordinates cannot
/// carry deep-path widths: after ~50 uniform splits a side is ~e^-50,
/// and upper - lower at a position of order one is dominated by the
/// position's rounding granularity.  Multiplicative tracking keeps each
/// side accurate to a few ulps per split, which is what the volume
/// invariance check and the shape statistics are computed from.
struct PathResult {
  HyperRectangle cell;
  SplitSequence splits;
  std::vector<double> sides;

  /// The cell's shape re-anchored at the origin from the tracked sides;
  /// geometry ops on it (volume, diameter, side extremes) are free of
  /// coordinate cancellation.
  HyperRectangle side_box() const {
    return HyperRectangle(std::vector<double>(sides.size(), 0.0), sides);
  }
};

namespace detail {

inline void check_in_cube(std::span<const double> x) {
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("query point outside [0,1]^d");
}

/// Applies one split to the cell around x and records the step.
inline void apply_split(PathResult& path, std::span<const double> x, int D, double S) {
  const size_t k = static_cast<size_t>(D - 1);
  const double a = path.cell.lower[k];
  const double c = a + path.sides[k] * S;
  SplitStep step{D, S, S};
  if (x[k] <= c) {
    path.cell.upper[k] = c;
    path.sides[k] *= S;
  } else {
    path.cell.lower[k] = c;
    path.sides[k] *= (1.0 - S);
    step.S_bar = 1.0 - S;
  }
  path.splits.push_back(step);
}

inline PathResult unit_cube_path(int d) {
  PathResult r;
  r.cell = HyperRectangle(std::vector<double>(static_cast<size_t>(d), 0.0),
                          std::vector<double>(static_cast<size_t>(d), 1.0));
  r.sides.assign(static_cast<size_t>(d), 1.0);
  return r;
}

}  // namespace detail

/// Replays an explicit split sequence around x, starting from [0,1]^d.
/// The input steps carry (D, S); the realized S_bar values are recorded
/// in the returned sequence.
inline PathResult grow_from_sequence(std::span<const double> x, int d,
                                     const std::vector<std::pair<int, double>>& steps) {
  if (d < 1) throw std::invalid_argument("grow_from_sequence: d must be >= 1");
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("grow_from_sequence: bad x");
  detail::check_in_cube(x);
  PathResult r = detail::unit_cube_path(d);
  for (const auto& [D, S] : steps) {
    if (D < 1 || D > d) throw std::invalid_argument("grow_from_sequence: coordinate out of range");
    if (!(S > 0.0 && S < 1.0)) throw std::invalid_argument("grow_from_sequence: S must be in (0,1)");
    detail::apply_split(r, x, D, S);
  }
  return r;
}

/// Grows N purely random splits around x: D_i uniform on {1..d}, S_i
/// Uniform(0,1) for the uniform kind or 1/2 for the centered kind.
inline PathResult grow_path(TreeKind kind, std::span<const double> x, int d, int N,
                            std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("grow_path: d must be >= 1");
  if (N < 0) throw std::invalid_argument("grow_path: N must be >= 0");
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("grow_path: bad x");
  detail::check_in_cube(x);
  PathResult r = detail::unit_cube_path(d);
  r.splits.reserve(static_cast<size_t>(N));
  Rng rng(seed);
  for (int i = 0; i < N; ++i) {
    const int D = 1 + rng.uniform_int(d);
    const double S = kind == TreeKind::uniform ? rng.uniform_open01() : 0.5;
    detail::apply_split(r, x, D, S);
  }
  return r;
}

/// Volume invariance: the product of the cell's side lengths equals the
/// product of the recorded length reductions, checked to 1e-12 relative.
/// The factorizations differ (grouped per coordinate versus interleaved
/// in split order), so the comparison is the per-step bookkeeping check,
/// not a tautology.
inline bool volume_invariance_check(const HyperRectangle& cell, const SplitSequence& seq) {
  double prod = 1.0;
  for (const auto& s : seq) prod *= s.S_bar;
  const double vol = volume(cell);
  const double scale = std::max({std::abs(vol), std::abs(prod), 1e-300});
  return std::abs(vol - prod) <= 1e-12 * scale;
}

inline bool volume_invariance_check(const PathResult& path) {
  return volume_invariance_check(path.side_box(), path.splits);
}

struct MondrianParams {
  double lifetime = 1.0;
  int d = 1;

  MondrianParams() = default;
  MondrianParams(double lifetime_, int d_) : lifetime(lifetime_), d(d_) {
    if (!(lifetime > 0.0)) throw std::invalid_argument("MondrianParams: lifetime must be > 0");
    if (d < 1) throw std::invalid_argument("MondrianParams: d must be >= 1");
  }
};

/// Simulates the Mondrian process with the given lifetime restricted to
/// the cell containing x.  Waiting times are exponential with rate equal
/// to the cell's linear dimension sum_k h_k, the split coordinate is
/// chosen with probability proportional to h_k, and the cut is uniform
/// along that side.
inline PathResult mondrian_path(const MondrianParams& params, std::span<const double> x,
                                std::uint64_t seed) {
  if (static_cast<int>(x.size()) != params.d)
    throw std::invalid_argument("mondrian_path: bad x");
  detail::check_in_cube(x);
  PathResult r = detail::unit_cube_path(params.d);
  Rng rng(seed);
  double t = 0.0;
  while (true) {
    double linear = 0.0;
    for (double h : r.sides) linear += h;
    if (!(linear > 0.0)) break;
    t += rng.exponential(linear);
    if (t > params.lifetime) break;
    // Coordinate proportional to side length.
    const double pick = rng.uniform01() * linear;
    int D = params.d;
    double acc = 0.0;
    for (int k = 0; k < params.d; ++k) {
      acc += r.sides[static_cast<size_t>(k)];
      if (pick < acc) {
        D = k + 1;
        break;
      }
    }
    const double S = rng.uniform_open01();
    detail::apply_split(r, x, D, S);
  }
  return r;
}

inline HyperRectangle mondrian_cell(const MondrianParams& params, std::span<const double> x,
                                    std::uint64_t seed) {
  return mondrian_path(params, x, seed).cell;
}

/// h_+ / h_- of the cell.
inline double shape_ratio(const HyperRectangle& cell) {
  const SideExtremes e = side_extremes(cell);
  if (!(e.h_minus > 0.0)) throw std::invalid_argument("shape_ratio: degenerate cell");
  return e.h_plus / e.h_minus;
}

// JSON round-trip for reproducibility dumps: a list of
// {step, D, S, S_bar} records, step counted from 1.
inline nlohmann::json split_sequence_to_json(const SplitSequence& seq) {
  nlohmann::json arr = nlohmann::json::array();
  for (size_t i = 0; i < seq.size(); ++i) {
    arr.push_back({{"step", i + 1}, {"D", seq[i].D}, {"S", seq[i].S}, {"S_bar", seq[i].S_bar}});
  }
  return arr;
}

inline SplitSequence split_sequence_from_json(const nlohmann::json& arr) {
  SplitSequence seq;
  for (const auto& j : arr) {
    SplitStep s;
    s.D = j.at("D").get<int>();
    s.S = j.at("S").get<double>();
    s.S_bar = j.at("S_bar").get<double>();
    seq.push_back(s);
  }
  return seq;
}

}  // namespace locreg
