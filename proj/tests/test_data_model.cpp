#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "locreg/data_model.hpp"
#include "locreg/rng.hpp"

using namespace locreg;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("locreg_test_") + name;
}

}  // namespace

TEST_CASE("built-in regression functions") {
  const auto sum2 = builtin_g("sum_coords", 2);
  CHECK(sum2.eval(std::vector<double>{0.5, 0.5}) == 1.0);
  CHECK(sum2.eval(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(sum2.lipschitz == doctest::Approx(std::sqrt(2.0)));
  const auto c3 = builtin_g("constant_c", 3, 3.0);
  CHECK(c3.eval(std::vector<double>{0.1, 0.9, 0.4}) == 3.0);
  CHECK(c3.lipschitz == 0.0);
  const auto sp = builtin_g("sine_product", 2);
  CHECK(sp.eval(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(builtin_g("nope", 2), std::invalid_argument);
}

TEST_CASE("noiseless generation reproduces g exactly") {
  const auto g = builtin_g("sum_coords", 2);
  const auto ds = generate(CovariateLaw::uniform_cube(), g, NoiseModel::make("gaussian", 0.0),
                           500, 99);
  for (int i = 0; i < ds.n(); ++i) {
    CHECK(ds.y[static_cast<size_t>(i)] == g.eval(ds.x(i)));
    CHECK(ds.true_g[static_cast<size_t>(i)] == ds.y[static_cast<size_t>(i)]);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const auto g = builtin_g("sum_coords", 2);
  const auto noise = NoiseModel::make("gaussian", 1.0);
  const auto a = generate(CovariateLaw::uniform_cube(), g, noise, 200, 4242);
  const auto b = generate(CovariateLaw::uniform_cube(), g, noise, 200, 4242);
  CHECK(a.xs == b.xs);
  CHECK(a.y == b.y);
  const auto c = generate(CovariateLaw::uniform_cube(), g, noise, 200, 4243);
  CHECK(a.y != c.y);
}

TEST_CASE("sample mean of pure noise concentrates") {
  const auto g = builtin_g("constant_c", 1, 0.0);
  const int n = 100000;
  const double sigma = 1.0;
  const auto ds = generate(CovariateLaw::uniform_cube(), g,
                           NoiseModel::make("gaussian", sigma * sigma), n, 31337);
  double mean = 0.0;
  for (double v : ds.y) mean += v;
  mean /= n;
  CHECK(std::abs(mean) <= 4.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform cube law puts the right mass in the lower-left quadrant") {
  const int d = 2, n = 100000;
  const auto ds = generate(CovariateLaw::uniform_cube(), builtin_g("constant_c", d),
                           NoiseModel::make("gaussian", 0.0), n, 555);
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    bool in = true;
    for (int k = 0; k < d; ++k)
      if (ds.x(i)[static_cast<size_t>(k)] > 0.5) in = false;
    if (in) ++hits;
  }
  const double p = std::pow(0.5, d);
  const double freq = static_cast<double>(hits) / n;
  const double se = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(freq - p) <= 3 * se);
}

TEST_CASE("density-floor law tilts the first coordinate as declared") {
  const double b = 0.4;
  const int n = 100000;
  const auto ds = generate(CovariateLaw::density_floor(b), builtin_g("constant_c", 2),
                           NoiseModel::make("gaussian", 0.0), n, 777);
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (ds.x(i)[0] <= 0.5) ++hits;
  // P(x1 <= 1/2) = b/2 + (1-b)/4 under the tilt.
  const double p = b / 2 + (1 - b) / 4;
  const double freq = static_cast<double>(hits) / n;
  const double se = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(freq - p) <= 3 * se);
}

TEST_CASE("every noise model satisfies the sub-Gaussian MGF envelope") {
  const int n = 100000;
  const double sigma2 = 0.64;
  for (const char* kind : {"gaussian", "bounded-uniform", "heteroscedastic-gaussian"}) {
    const auto noise = NoiseModel::make(kind, sigma2);
    Rng rng(fnv1a64(kind));
    const std::vector<double> x{0.7, 0.2};
    for (double lambda : {-2.0, -1.0, 1.0, 2.0}) {
      double sum = 0.0, sum2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = std::exp(lambda * noise.sample(rng, x));
        sum += e;
        sum2 += e * e;
      }
      const double mean = sum / n;
      const double sd = std::sqrt(std::max(0.0, sum2 / n - mean * mean));
      const double se = sd / std::sqrt(static_cast<double>(n));
      const double envelope = std::exp(lambda * lambda * sigma2 / 2.0);
      CHECK(mean <= envelope + 5 * se);
    }
  }
}

TEST_CASE("Lipschitz audit of the built-in functions") {
  Rng rng(2024);
  for (const char* name : {"sum_coords", "constant_c", "sine_product"}) {
    for (int d : {1, 2, 4}) {
      const auto g = builtin_g(name, d, 1.5);
      for (int trial = 0; trial < 10000 / (d * 3); ++trial) {
        std::vector<double> x(static_cast<size_t>(d)), y(static_cast<size_t>(d));
        double dist2 = 0.0;
        for (int k = 0; k < d; ++k) {
          x[static_cast<size_t>(k)] = rng.uniform01();
          y[static_cast<size_t>(k)] = rng.uniform01();
          const double t = x[static_cast<size_t>(k)] - y[static_cast<size_t>(k)];
          dist2 += t * t;
        }
        CHECK(std::abs(g.eval(x) - g.eval(y)) <= g.lipschitz * std::sqrt(dist2) + 1e-12);
      }
    }
  }
}

TEST_CASE("csv round trip is bitwise exact") {
  Rng rng(31415);
  Dataset ds;
  ds.d = 3;
  const int n = 137;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) ds.xs.push_back(rng.uniform(-10.0, 10.0));
    ds.y.push_back(rng.normal(3.0));
  }
  ds.xs[0] = 1e-300;            // subnormal-adjacent extreme
  ds.xs[1] = -0.0;
  ds.y[0] = 0.1 + 0.2;          // classic non-representable decimal
  const std::string path = temp_path("roundtrip.csv");
  save_csv(ds, path);
  const Dataset back = load_csv(path, 3);
  REQUIRE(back.n() == ds.n());
  CHECK(back.xs == ds.xs);
  CHECK(back.y == ds.y);
  std::remove(path.c_str());
}

TEST_CASE("csv loader rejects malformed inputs") {
  const std::string path = temp_path("bad.csv");

  {
    std::ofstream out(path);
    out << "x1,x2,x3,y\n0.1,0.2,0.3,1\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path, 1), doctest::Contains("dimension mismatch"),
                       std::runtime_error);

  {
    std::ofstream out(path);
    out << "";
  }
  CHECK_THROWS_WITH_AS(load_csv(path, 1), doctest::Contains("n >= 1"), std::runtime_error);

  {
    std::ofstream out(path);
    out << "x1,y\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path, 1), doctest::Contains("n >= 1"), std::runtime_error);

  {
    std::ofstream out(path);
    out << "x1,y\n0.5\n";
  }
  CHECK_THROWS_AS(load_csv(path, 1), std::runtime_error);

  {
    std::ofstream out(path);
    out << "x1,y\n0.5,nan\n";
  }
  CHECK_THROWS_AS(load_csv(path, 1), std::runtime_error);

  {
    std::ofstream out(path);
    out << "x1,y\n0.5,abc\n";
  }
  CHECK_THROWS_AS(load_csv(path, 1), std::runtime_error);

  std::remove(path.c_str());
}
