#pragma once

// Shattering coefficients, Sauer bound, brute-force VC dimension on small
// finite classes, and numeric evaluators for every explicit deviation
// bound used by the verification harness.  All formulas involving
// (n+1)^v or (2n+1)^v are evaluated in log space: with v = 2d and
// n = 1e5 the linear-space values overflow double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "locreg/geometry.hpp"

namespace locreg {

// ---------------------------------------------------------------------------
// Finite set classes and combinatorial quantities
// ---------------------------------------------------------------------------

/// A finite, deterministically enumerated family of membership predicates
/// over points in R^d.  Small enough instances admit exact shattering
/// counts and brute-force VC dimension.
struct FiniteSetClass {
  std::string name;
  int d = 1;
  std::vector<std::function<bool(std::span<const double>)>> sets;

  int size() const { return static_cast<int>(sets.size()); }
};

/// All half-open intervals (s, t], s < t on the given grid, plus the
/// empty set.
inline FiniteSetClass interval_class(const std::vector<double>& grid) {
  FiniteSetClass c;
  c.name = "intervals";
  c.d = 1;
  c.sets.push_back([](std::span<const double>) { return false; });
  for (size_t i = 0; i < grid.size(); ++i)
    for (size_t j = i + 1; j < grid.size(); ++j) {
      const double s = grid[i], t = grid[j];
      c.sets.push_back([s, t](std::span<const double> x) { return x[0] > s && x[0] <= t; });
    }
  return c;
}

/// All axis-aligned rectangles prod_k (s_k, t_k] with corners on the grid
/// (same grid per axis), plus the empty set.
inline FiniteSetClass rectangle_class(int d, const std::vector<double>& grid) {
  if (d < 1) throw std::invalid_argument("rectangle_class: d must be >= 1");
  FiniteSetClass c;
  c.name = "rectangles";
  c.d = d;
  c.sets.push_back([](std::span<const double>) { return false; });
  // Enumerate index pairs per axis, odometer order.
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i < grid.size(); ++i)
    for (size_t j = i + 1; j < grid.size(); ++j) pairs.emplace_back(i, j);
  std::vector<size_t> idx(static_cast<size_t>(d), 0);
  while (true) {
    std::vector<double> lo(static_cast<size_t>(d)), hi(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
      lo[static_cast<size_t>(k)] = grid[pairs[idx[static_cast<size_t>(k)]].first];
      hi[static_cast<size_t>(k)] = grid[pairs[idx[static_cast<size_t>(k)]].second];
    }
    c.sets.push_back([lo, hi, d](std::span<const double> x) {
      for (int k = 0; k < d; ++k) {
        const size_t uk = static_cast<size_t>(k);
        if (!(x[uk] > lo[uk] && x[uk] <= hi[uk])) return false;
      }
      return true;
    });
    int k = 0;
    for (; k < d; ++k) {
      if (++idx[static_cast<size_t>(k)] < pairs.size()) break;
      idx[static_cast<size_t>(k)] = 0;
    }
    if (k == d) break;
  }
  return c;
}

/// Closed balls with centers on the given per-axis grid and radii from
/// the radius grid (radius 0 realizes the empty pattern on any point set
/// disjoint from the centers).
inline FiniteSetClass ball_class(int d, const std::vector<double>& center_grid,
                                 const std::vector<double>& radii) {
  if (d < 1) throw std::invalid_argument("ball_class: d must be >= 1");
  FiniteSetClass c;
  c.name = "balls";
  c.d = d;
  std::vector<size_t> idx(static_cast<size_t>(d), 0);
  while (true) {
    std::vector<double> center(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) center[static_cast<size_t>(k)] = center_grid[idx[static_cast<size_t>(k)]];
    for (double r : radii) {
      c.sets.push_back([center, r, d](std::span<const double> x) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
          const double t = x[static_cast<size_t>(k)] - center[static_cast<size_t>(k)];
          s += t * t;
        }
        return s <= r * r;
      });
    }
    int k = 0;
    for (; k < d; ++k) {
      if (++idx[static_cast<size_t>(k)] < center_grid.size()) break;
      idx[static_cast<size_t>(k)] = 0;
    }
    if (k == d) break;
  }
  return c;
}

/// Sauer bound S(n) <= (n+1)^v in linear space.
inline double sauer_bound(int n, int v) {
  if (n < 1 || v < 1) throw std::invalid_argument("sauer_bound: n, v must be >= 1");
  return std::pow(static_cast<double>(n) + 1.0, v);
}

/// log of the Sauer bound, v * log(n+1).
inline double log_sauer(int n, int v) {
  if (n < 1 || v < 1) throw std::invalid_argument("log_sauer: n, v must be >= 1");
  return v * std::log(static_cast<double>(n) + 1.0);
}

/// Number of distinct binary membership patterns the class realizes on
/// the given (distinct) points.
inline long long shatter_count(const FiniteSetClass& cls,
                               const std::vector<std::vector<double>>& points) {
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t j = i + 1; j < points.size(); ++j)
      if (points[i] == points[j])
        throw std::invalid_argument("shatter_count: duplicate points");
  std::unordered_set<std::string> patterns;
  std::string pat(points.size(), '0');
  for (const auto& set : cls.sets) {
    for (size_t i = 0; i < points.size(); ++i)
      pat[i] = set(points[i]) ? '1' : '0';
    patterns.insert(pat);
  }
  return static_cast<long long>(patterns.size());
}

namespace detail {

inline bool subset_shattered(const FiniteSetClass& cls,
                             const std::vector<std::vector<double>>& pool,
                             const std::vector<int>& subset) {
  const size_t n = subset.size();
  std::vector<bool> seen(static_cast<size_t>(1) << n, false);
  size_t found = 0;
  for (const auto& set : cls.sets) {
    size_t mask = 0;
    for (size_t i = 0; i < n; ++i)
      if (set(pool[static_cast<size_t>(subset[i])])) mask |= (static_cast<size_t>(1) << i);
    if (!seen[mask]) {
      seen[mask] = true;
      if (++found == seen.size()) return true;
    }
  }
  return false;
}

template <typename Fn>
inline bool any_subset(int pool_size, int k, Fn&& check) {
  std::vector<int> subset(static_cast<size_t>(k));
  std::function<bool(int, int)> rec = [&](int start, int depth) {
    if (depth == k) return check(subset);
    for (int i = start; i <= pool_size - (k - depth); ++i) {
      subset[static_cast<size_t>(depth)] = i;
      if (rec(i + 1, depth + 1)) return true;
    }
    return false;
  };
  return rec(0, 0);
}

}  // namespace detail

/// Largest n <= max_n such that some n-subset of the candidate pool is
/// shattered by the class; 0 if no single point is.  Exponential search,
/// intended for the d <= 3 sanity instances only.
inline int vc_dim_bruteforce(const FiniteSetClass& cls,
                             const std::vector<std::vector<double>>& candidates,
                             int max_n) {
  max_n = std::min<int>(max_n, static_cast<int>(candidates.size()));
  max_n = std::min(max_n, 8);
  int vc = 0;
  for (int k = 1; k <= max_n; ++k) {
    const bool found = detail::any_subset(
        static_cast<int>(candidates.size()), k,
        [&](const std::vector<int>& subset) { return detail::subset_shattered(cls, candidates, subset); });
    if (!found) break;
    vc = k;
  }
  return vc;
}

// ---------------------------------------------------------------------------
// Bound evaluators
// ---------------------------------------------------------------------------

/// Constants entering the deviation bounds.
struct BoundSpec {
  int n = 1;                // sample size
  double delta = 0.05;      // confidence level in (0, 1)
  int v = 1;                // VC dimension
  double sigma2 = 1.0;      // sub-Gaussian noise parameter
  double kappa = 1.0;       // minimal mass constant
  double density_floor = 1.0;
  double lipschitz = 0.0;
  int m_or_k = 1;           // leaf/neighbor count

  void validate() const {
    if (n < 1) throw std::invalid_argument("BoundSpec: n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("BoundSpec: delta must be in (0,1)");
    if (v < 1) throw std::invalid_argument("BoundSpec: v must be >= 1");
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("BoundSpec: sigma2 must be >= 0");
  }
};

/// Variance envelope sqrt(2 sigma^2 log((n+1)^v / delta) / local_count),
/// evaluated in log space.
inline double variance_term(const BoundSpec& spec, long long local_count) {
  spec.validate();
  if (local_count == 0) throw std::invalid_argument("variance_term: empty cell");
  if (local_count < 0) throw std::invalid_argument("variance_term: negative count");
  const double log_term = log_sauer(spec.n, spec.v) - std::log(spec.delta);
  return std::sqrt(2.0 * spec.sigma2 * log_term / static_cast<double>(local_count));
}

/// Pointwise error envelope: variance term at the realized local count
/// plus L(V) * diam(V).
inline double pointwise_error_bound(const BoundSpec& spec, long long local_count,
                                    double local_lipschitz, double cell_diameter) {
  return variance_term(spec, local_count) + local_lipschitz * cell_diameter;
}

/// Mass threshold 8 * log(4 (2n+1)^v / delta): a local map is
/// (delta, n)-large when n * max(P_n, P)(V(x)) reaches this value.
inline double large_sample_threshold(int n, int v, double delta) {
  if (n < 1 || v < 1) throw std::invalid_argument("large_sample_threshold: n, v must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("large_sample_threshold: delta must be in (0,1)");
  const double log_term = std::log(4.0) + v * std::log(2.0 * n + 1.0) - std::log(delta);
  return 8.0 * log_term;
}

/// Leaf-count threshold 4 * log(4 (2n+1)^{2d} / delta) for the
/// shape-regular tree deviation bound.
inline double cart_mass_threshold(int n, int d, double delta) {
  if (n < 1 || d < 1) throw std::invalid_argument("cart_mass_threshold: n, d must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("cart_mass_threshold: delta must be in (0,1)");
  const double log_term = std::log(4.0) + 2.0 * d * std::log(2.0 * n + 1.0) - std::log(delta);
  return 4.0 * log_term;
}

/// Lower/upper envelopes for the empirical mass of a set of true mass p.
/// vapnik_lower follows the normalized Vapnik inequality with
/// shatter_log = log S(2n); the Chernoff pair uses the multiplicative
/// bound with constants 2 (lower) and 3 (upper).  Lower envelopes are
/// clamped at 0 where the inequalities turn vacuous.
struct MassBounds {
  double vapnik_lower = 0.0;
  double chernoff_lower = 0.0;
  double chernoff_upper = 1.0;
};

inline MassBounds empirical_mass_bounds(int n, double p, double delta, double shatter_log) {
  if (n < 1) throw std::invalid_argument("empirical_mass_bounds: n must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("empirical_mass_bounds: p must be in (0,1]");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("empirical_mass_bounds: delta must be in (0,1)");
  MassBounds b;
  const double np = n * p;
  b.vapnik_lower = std::max(0.0, p * (1.0 - std::sqrt(4.0 * (shatter_log + std::log(4.0 / delta)) / np)));
  b.chernoff_lower = std::max(0.0, p * (1.0 - std::sqrt(2.0 * std::log(1.0 / delta) / np)));
  b.chernoff_upper = p * (1.0 + std::sqrt(3.0 * std::log(1.0 / delta) / np));
  return b;
}

/// Envelope for the normalized empirical-process supremum over a class
/// realizing `patterns` membership patterns: sqrt(2 sigma^2 log(patterns/delta)).
inline double normalized_sup_envelope(double sigma2, double patterns, double delta) {
  if (!(patterns >= 1.0)) throw std::invalid_argument("normalized_sup_envelope: patterns must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("normalized_sup_envelope: delta must be in (0,1)");
  return std::sqrt(2.0 * sigma2 * (std::log(patterns) - std::log(delta)));
}

/// k-NN pointwise deviation bound:
/// sqrt(2 sigma^2 log((n+1)^{d+1}/delta) / k) + 2 (2k/(n kappa f))^{1/d} L.
inline double knn_error_bound(int n, int d, double delta, double sigma2, int k,
                              double kappa, double f_x, double lipschitz) {
  if (k < 1 || k > n) throw std::invalid_argument("knn_error_bound: need 1 <= k <= n");
  const double log_term = (d + 1) * std::log(n + 1.0) - std::log(delta);
  const double var = std::sqrt(2.0 * sigma2 * log_term / k);
  const double bias = 2.0 * std::pow(2.0 * k / (n * kappa * f_x), 1.0 / d) * lipschitz;
  return var + bias;
}

/// Shape-regular tree pointwise deviation bound:
/// sqrt(2 sigma^2 log((n+1)^{2d}/delta) / m) + L beta sqrt(d) (5m/(n f kappa))^{1/d}.
inline double cart_error_bound(int n, int d, double delta, double sigma2, int m,
                               double beta, double kappa, double f_x, double lipschitz) {
  if (m < 1 || m > n) throw std::invalid_argument("cart_error_bound: need 1 <= m <= n");
  const double log_term = 2.0 * d * std::log(n + 1.0) - std::log(delta);
  const double var = std::sqrt(2.0 * sigma2 * log_term / m);
  const double bias =
      lipschitz * beta * std::sqrt(static_cast<double>(d)) * std::pow(5.0 * m / (n * f_x * kappa), 1.0 / d);
  return var + bias;
}

// Deviation bounds for purely random tree cells.  The harness reports
// these next to the Monte Carlo frequencies; they live here so that no
// experiment inlines its own copy.

/// P(diam >= sqrt(d) e^{-N/d + N beta}) <= d e^{-N d beta^2 / 4}, beta >= 0.
inline double uniform_diam_upper_bound(int d, int N, double beta) {
  if (d < 1 || N < 1) throw std::invalid_argument("uniform_diam_upper_bound: d, N must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("uniform_diam_upper_bound: beta must be >= 0");
  return d * std::exp(-static_cast<double>(N) * d * beta * beta / 4.0);
}

/// P(diam <= sqrt(d) e^{-N/d - N beta}) <= d e^{-N d beta^2 / 8}, beta in (0, 2/d).
inline double uniform_diam_lower_bound(int d, int N, double beta) {
  if (d < 1 || N < 1) throw std::invalid_argument("uniform_diam_lower_bound: d, N must be >= 1");
  if (!(beta > 0.0 && beta < 2.0 / d))
    throw std::invalid_argument("uniform_diam_lower_bound: beta must be in (0, 2/d)");
  return d * std::exp(-static_cast<double>(N) * d * beta * beta / 8.0);
}

/// P(vol <= e^{-alpha N}) for alpha > 1, and P(vol >= e^{-alpha N}) for
/// alpha in (0,1), are both bounded by (alpha e^{1-alpha})^N.
inline double uniform_volume_bound(int N, double alpha) {
  if (N < 1) throw std::invalid_argument("uniform_volume_bound: N must be >= 1");
  if (!(alpha > 0.0) || alpha == 1.0)
    throw std::invalid_argument("uniform_volume_bound: alpha must be > 0 and != 1");
  return std::pow(alpha * std::exp(1.0 - alpha), N);
}

/// Centered-tree diameter deviation bound
/// d (1 - (1-b)/d)^N b^{-alpha N} with b = (d-1) alpha / (1-alpha);
/// valid for the upper event when alpha in (0, 1/d) and for the lower
/// event when alpha in (1/d, 1).  Requires d >= 2.
inline double centered_diam_bound(int d, int N, double alpha) {
  if (d < 2) throw std::invalid_argument("centered_diam_bound: d must be >= 2");
  if (N < 1) throw std::invalid_argument("centered_diam_bound: N must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0) || alpha == 1.0 / d)
    throw std::invalid_argument("centered_diam_bound: alpha must be in (0,1) \\ {1/d}");
  const double b = (d - 1) * alpha / (1.0 - alpha);
  const double log_bound =
      std::log(static_cast<double>(d)) + N * std::log(1.0 - (1.0 - b) / d) - alpha * N * std::log(b);
  return std::exp(log_bound);
}

/// Probability floors of the non-shape-regularity events.
inline double uniform_non_sr_floor() { return 1.0 / 11.0; }
inline double centered_non_sr_floor() { return 1.0 / 14.0; }

/// Maximum delta for which the Mondrian shape bound applies.
inline double mondrian_delta_max(int d) {
  if (d < 1) throw std::invalid_argument("mondrian_delta_max: d must be >= 1");
  return 1.0 - std::pow(1.0 - std::exp(-1.0), d);
}

/// Shape-ratio level 5 d log(delta/d) / log(1-delta); with probability at
/// least 1 - 2 delta the Mondrian cell ratio stays below it.
inline double mondrian_ratio_bound(int d, double delta) {
  if (d < 1) throw std::invalid_argument("mondrian_ratio_bound: d must be >= 1");
  if (!(delta > 0.0 && delta <= mondrian_delta_max(d)))
    throw std::invalid_argument("mondrian_ratio_bound: delta must be in (0, 1-(1-1/e)^d]");
  return 5.0 * d * std::log(delta / d) / std::log(1.0 - delta);
}

}  // namespace locreg
