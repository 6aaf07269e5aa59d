#pragma once

// Regression samples: synthetic generation with sub-Gaussian noise,
// built-in regression functions with known Lipschitz constants, and
// CSV persistence (header x1,...,xd,y, 17 significant digits).

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "locreg/geometry.hpp"
#include "locreg/rng.hpp"

namespace locreg {

/// A regression sample (X_i, Y_i), i = 0..n-1, X row-major n x d.
/// true_g (optional) holds g(X_i) for synthetic data.
struct Dataset {
  int d = 0;
  std::vector<double> xs;      // n*d, row-major
  std::vector<double> y;
  std::vector<double> true_g;  // empty unless synthetic

  int n() const { return static_cast<int>(y.size()); }

  std::span<const double> x(int i) const {
    return {xs.data() + static_cast<size_t>(i) * d, static_cast<size_t>(d)};
  }

  void validate() const {
    if (d < 1) throw std::invalid_argument("Dataset: d must be >= 1");
    if (y.empty()) throw std::invalid_argument("Dataset: n >= 1 required");
    if (xs.size() != y.size() * static_cast<size_t>(d))
      throw std::invalid_argument("Dataset: X/Y size mismatch");
    for (double v : xs)
      if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite covariate");
    for (double v : y)
      if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite response");
  }
};

/// Regression function with its global Lipschitz constant and an optional
/// per-cell local Lipschitz evaluator (null means "use the global one").
struct RegressionFunction {
  std::string name;
  int d = 1;
  double lipschitz = 0.0;
  std::function<double(std::span<const double>)> eval;
  std::function<double(const HyperRectangle&)> local_lipschitz;  // may be null

  double local_l(const HyperRectangle& cell) const {
    return local_lipschitz ? local_lipschitz(cell) : lipschitz;
  }
};

/// Built-in regression functions: sum_coords, constant_c, sine_product.
/// sum_coords has L = L(V) = sqrt(d); constant_c has L = 0; sine_product
/// g(x) = prod_k sin(pi x_k) has |d_k g| <= pi, hence L = pi*sqrt(d).
inline RegressionFunction builtin_g(const std::string& name, int d, double c = 0.0) {
  if (d < 1) throw std::invalid_argument("builtin_g: d must be >= 1");
  RegressionFunction g;
  g.name = name;
  g.d = d;
  if (name == "sum_coords") {
    g.lipschitz = std::sqrt(static_cast<double>(d));
    g.eval = [](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v;
      return s;
    };
    const double l = g.lipschitz;
    g.local_lipschitz = [l](const HyperRectangle&) { return l; };
  } else if (name == "constant_c") {
    g.lipschitz = 0.0;
    g.eval = [c](std::span<const double>) { return c; };
    g.local_lipschitz = [](const HyperRectangle&) { return 0.0; };
  } else if (name == "sine_product") {
    const double pi = 3.14159265358979323846;
    g.lipschitz = pi * std::sqrt(static_cast<double>(d));
    g.eval = [pi](std::span<const double> x) {
      double p = 1.0;
      for (double v : x) p *= std::sin(pi * v);
      return p;
    };
  } else {
    throw std::invalid_argument("builtin_g: unknown name '" + name + "'");
  }
  return g;
}

/// Noise models; every kind is sub-Gaussian with parameter sigma2
/// conditionally on X.  The heteroscedastic kind uses the conditional
/// scale s(x) = sigma * (0.5 + 0.5*x_1), whose square stays below sigma2
/// on [0,1]^d.
struct NoiseModel {
  enum class Kind { gaussian, bounded_uniform, heteroscedastic_gaussian };
  Kind kind = Kind::gaussian;
  double sigma2 = 1.0;

  static NoiseModel make(const std::string& kind_name, double sigma2) {
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("NoiseModel: sigma2 must be >= 0");
    NoiseModel m;
    m.sigma2 = sigma2;
    if (kind_name == "gaussian") m.kind = Kind::gaussian;
    else if (kind_name == "bounded-uniform") m.kind = Kind::bounded_uniform;
    else if (kind_name == "heteroscedastic-gaussian") m.kind = Kind::heteroscedastic_gaussian;
    else throw std::invalid_argument("NoiseModel: unknown kind '" + kind_name + "'");
    return m;
  }

  double sample(Rng& rng, std::span<const double> x) const {
    const double sigma = std::sqrt(sigma2);
    switch (kind) {
      case Kind::gaussian:
        return rng.normal(sigma);
      case Kind::bounded_uniform:
        // Uniform on [-sigma, sigma]: sub-Gaussian with parameter sigma^2
        // by Hoeffding's lemma.
        return rng.uniform(-sigma, sigma);
      case Kind::heteroscedastic_gaussian:
        return rng.normal(sigma * (0.5 + 0.5 * x[0]));
    }
    return 0.0;
  }
};

/// Covariate laws on S_X = [0,1]^d.
///
/// uniform-cube: f_X = 1 and P(V) = lambda(V) for rectangles, so the
/// minimal mass assumption holds with kappa = 1.
///
/// density-floor: f_X(x) = b + 2(1-b) x_1, a tilt of the uniform with
/// values in [b, 2-b]; since f_X >= b pointwise, P(V) >= b * lambda(V)
/// for every cell, i.e. kappa = 1 paired with the floor b.
///
/// For ball-shaped maps on the cube the documented constants are
/// kappa = 2^{-d} and T_0 = 1 (an orthant fraction of any small enough
/// ball around x stays inside the cube).
struct CovariateLaw {
  enum class Kind { uniform_cube, density_floor };
  Kind kind = Kind::uniform_cube;
  double floor_b = 1.0;

  static CovariateLaw uniform_cube() { return CovariateLaw{}; }

  static CovariateLaw density_floor(double b) {
    if (!(b > 0.0 && b <= 1.0))
      throw std::invalid_argument("CovariateLaw: density floor b must be in (0, 1]");
    CovariateLaw law;
    law.kind = Kind::density_floor;
    law.floor_b = b;
    return law;
  }

  double density(std::span<const double> x) const {
    if (kind == Kind::uniform_cube) return 1.0;
    return floor_b + 2.0 * (1.0 - floor_b) * x[0];
  }

  void sample(Rng& rng, int d, double* out) const {
    for (int k = 0; k < d; ++k) out[k] = rng.uniform01();
    if (kind == Kind::density_floor) {
      // Mixture: with prob b uniform, else x_1 from density 2*x_1.
      if (rng.uniform01() >= floor_b) out[0] = std::sqrt(rng.uniform01());
    }
  }
};

/// Draws an i.i.d. sample X_i ~ law, Y_i = g(X_i) + eps_i.
/// Deterministic given (seed, n).
inline Dataset generate(const CovariateLaw& law, const RegressionFunction& g,
                        const NoiseModel& noise, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  Dataset ds;
  ds.d = g.d;
  ds.xs.resize(static_cast<size_t>(n) * g.d);
  ds.y.resize(n);
  ds.true_g.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double* row = ds.xs.data() + static_cast<size_t>(i) * g.d;
    law.sample(rng, g.d, row);
    const std::span<const double> xi{row, static_cast<size_t>(g.d)};
    const double gi = g.eval(xi);
    ds.true_g[i] = gi;
    ds.y[i] = gi + noise.sample(rng, xi);
  }
  ds.validate();
  return ds;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& tok, int line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw std::runtime_error("csv: malformed number at line " + std::to_string(line_no));
  if (!std::isfinite(v))
    throw std::runtime_error("csv: non-finite value at line " + std::to_string(line_no));
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Writes the sample as CSV with header x1,...,xd,y and full double
/// precision, so that load_csv(save_csv(ds)) is bitwise identical.
inline void save_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "'");
  for (int k = 0; k < ds.d; ++k) out << "x" << (k + 1) << ",";
  out << "y\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int k = 0; k < ds.d; ++k)
      out << detail::format_double(ds.x(i)[static_cast<size_t>(k)]) << ",";
    out << detail::format_double(ds.y[i]) << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed for '" + path + "'");
}

inline Dataset load_csv(const std::string& path, int d) {
  if (d < 1) throw std::invalid_argument("load_csv: d must be >= 1");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: n >= 1 required (empty file)");
  const auto header = detail::split_csv_line(line);
  if (static_cast<int>(header.size()) != d + 1)
    throw std::runtime_error("load_csv: dimension mismatch (declared d=" + std::to_string(d) +
                             ", file has " + std::to_string(header.size()) + " columns)");
  for (int k = 0; k < d; ++k)
    if (header[static_cast<size_t>(k)] != "x" + std::to_string(k + 1))
      throw std::runtime_error("load_csv: bad header column '" + header[static_cast<size_t>(k)] + "'");
  if (header.back() != "y") throw std::runtime_error("load_csv: last header column must be 'y'");

  Dataset ds;
  ds.d = d;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto toks = detail::split_csv_line(line);
    if (static_cast<int>(toks.size()) != d + 1)
      throw std::runtime_error("load_csv: malformed row at line " + std::to_string(line_no));
    for (int k = 0; k < d; ++k)
      ds.xs.push_back(detail::parse_double(toks[static_cast<size_t>(k)], line_no));
    ds.y.push_back(detail::parse_double(toks.back(), line_no));
  }
  if (ds.y.empty()) throw std::runtime_error("load_csv: n >= 1 required");
  ds.validate();
  return ds;
}

}  // namespace locreg
