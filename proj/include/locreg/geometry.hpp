#pragma once

// Axis-aligned cell geometry: diameters, volumes, side lengths and the
// two shape-regularity predicates for hyper-rectangles and balls.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace locreg {

/// Relative tolerance used by the shape-regularity predicates, so that
/// boundary cases (ratio exactly beta, diam^d exactly gamma*volume) are
/// classified as regular instead of depending on rounding.
inline constexpr double kShapeTol = 1e-9;

/// Axis-aligned box {x : lower[k] <= x[k] <= upper[k]}.  Degenerate
/// (zero-width) boxes are representable; the SR predicates reject them.
struct HyperRectangle {
  std::vector<double> lower;
  std::vector<double> upper;

  HyperRectangle() = default;
  HyperRectangle(std::vector<double> lo, std::vector<double> up)
      : lower(std::move(lo)), upper(std::move(up)) {
    validate();
  }

  int dim() const { return static_cast<int>(lower.size()); }
  double side(int k) const { return upper[static_cast<size_t>(k)] - lower[static_cast<size_t>(k)]; }

  void validate() const {
    if (lower.empty() || lower.size() != upper.size())
      throw std::invalid_argument("HyperRectangle: lower/upper must be non-empty and same length");
    for (size_t k = 0; k < lower.size(); ++k) {
      if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]))
        throw std::invalid_argument("HyperRectangle: bounds must be finite");
      if (lower[k] > upper[k])
        throw std::invalid_argument("HyperRectangle: lower[k] > upper[k]");
    }
  }
};

struct Ball {
  std::vector<double> center;
  double radius = 0.0;

  Ball() = default;
  Ball(std::vector<double> c, double r) : center(std::move(c)), radius(r) {
    if (center.empty()) throw std::invalid_argument("Ball: empty center");
    if (!(radius >= 0.0)) throw std::invalid_argument("Ball: radius must be >= 0");
  }

  int dim() const { return static_cast<int>(center.size()); }
};

/// Shape-regularity parameters for a dimension-d problem.
struct ShapeParams {
  double beta = 1.0;   // side-length ratio bound, >= 1
  double gamma = 1.0;  // diam^d / volume bound, > 0
  int d = 1;

  ShapeParams() = default;
  ShapeParams(double beta_, double gamma_, int d_) : beta(beta_), gamma(gamma_), d(d_) {
    if (!(beta >= 1.0)) throw std::invalid_argument("ShapeParams: beta must be >= 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("ShapeParams: gamma must be > 0");
    if (d < 1) throw std::invalid_argument("ShapeParams: d must be >= 1");
  }
};

/// Euclidean diameter of the box, sqrt(sum_k h_k^2).
inline double diameter(const HyperRectangle& cell) {
  double s = 0.0;
  for (int k = 0; k < cell.dim(); ++k) {
    const double h = cell.side(k);
    s += h * h;
  }
  return std::sqrt(s);
}

/// Lebesgue volume of the box, prod_k h_k.
inline double volume(const HyperRectangle& cell) {
  double v = 1.0;
  for (int k = 0; k < cell.dim(); ++k) v *= cell.side(k);
  return v;
}

struct SideExtremes {
  double h_minus = 0.0;
  double h_plus = 0.0;
};

/// Smallest and largest side length of the box.
inline SideExtremes side_extremes(const HyperRectangle& cell) {
  SideExtremes e{cell.side(0), cell.side(0)};
  for (int k = 1; k < cell.dim(); ++k) {
    const double h = cell.side(k);
    e.h_minus = std::min(e.h_minus, h);
    e.h_plus = std::max(e.h_plus, h);
  }
  return e;
}

/// h_+ <= beta * h_-, up to kShapeTol relative slack.
/// Zero-width cells are rejected as degenerate.
inline bool is_beta_sr(const HyperRectangle& cell, double beta) {
  if (!(beta >= 1.0)) throw std::invalid_argument("is_beta_sr: beta must be >= 1");
  const SideExtremes e = side_extremes(cell);
  if (e.h_minus <= 0.0) throw std::invalid_argument("is_beta_sr: degenerate cell");
  return e.h_plus <= beta * e.h_minus * (1.0 + kShapeTol);
}

/// diam^d <= gamma * volume, up to kShapeTol relative slack.
/// Works on raw diameter/volume so it applies to balls as well as boxes.
inline bool is_gamma_sr(double set_diameter, double set_volume, int d, double gamma) {
  if (d < 1) throw std::invalid_argument("is_gamma_sr: d must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("is_gamma_sr: gamma must be > 0");
  if (!(set_diameter >= 0.0)) throw std::invalid_argument("is_gamma_sr: diameter must be >= 0");
  if (!(set_volume > 0.0)) throw std::invalid_argument("is_gamma_sr: degenerate set");
  return std::pow(set_diameter, d) <= gamma * set_volume * (1.0 + kShapeTol);
}

/// A beta-SR rectangle is gamma-SR with gamma = beta^d * d^(d/2).
inline double beta_to_gamma(double beta, int d) {
  if (!(beta >= 1.0)) throw std::invalid_argument("beta_to_gamma: beta must be >= 1");
  if (d < 1) throw std::invalid_argument("beta_to_gamma: d must be >= 1");
  return std::pow(beta, d) * std::pow(static_cast<double>(d), 0.5 * d);
}

/// A gamma-SR rectangle is beta-SR with beta = gamma.
inline double gamma_to_beta(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma_to_beta: gamma must be > 0");
  return gamma;
}

inline double ball_diameter(const Ball& b) { return 2.0 * b.radius; }

/// Volume of a d-ball, pi^{d/2} / Gamma(d/2 + 1) * r^d.
inline double ball_volume(const Ball& b) {
  const int d = b.dim();
  const double pi = 3.14159265358979323846;
  const double unit = std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
  return unit * std::pow(b.radius, d);
}

}  // namespace locreg
