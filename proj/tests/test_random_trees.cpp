#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "locreg/random_trees.hpp"
#include "locreg/rng.hpp"

using namespace locreg;

namespace {

// One-sample Kolmogorov-Smirnov distance against a CDF.
template <typename Cdf>
double ks_one_sample(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs((i + 1) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("zero splits leave the unit cube") {
  const auto r = grow_path(TreeKind::uniform, std::vector<double>{0.3, 0.7}, 2, 0, 1);
  CHECK(r.splits.empty());
  CHECK(volume(r.cell) == 1.0);
  CHECK(r.cell.lower == std::vector<double>{0.0, 0.0});
  CHECK(r.cell.upper == std::vector<double>{1.0, 1.0});
}

TEST_CASE("centered tree volume is exactly 2^-N") {
  Rng seeds(100);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + seeds.uniform_int(3);
    const int N = 1 + seeds.uniform_int(30);
    std::vector<double> x(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = seeds.uniform01();
    const auto r = grow_path(TreeKind::centered, x, d, N, seeds.next_u64());
    CHECK(volume(r.cell) == std::ldexp(1.0, -N));
  }
}

TEST_CASE("at the origin the kept fraction is the raw split fraction") {
  const int d = 1, N = 25;
  const auto r = grow_path(TreeKind::uniform, std::vector<double>{0.0}, d, N, 99);
  double prod = 1.0;
  for (const auto& s : r.splits) {
    CHECK(s.S_bar == s.S);  // the origin always lands in the left piece
    prod *= s.S;
  }
  CHECK(r.cell.lower[0] == 0.0);
  CHECK(r.cell.upper[0] == prod);  // left-to-right product, bitwise
}

TEST_CASE("split boundary queries are assigned left") {
  const auto r = grow_from_sequence(std::vector<double>{0.5}, 1, {{1, 0.5}});
  CHECK(r.cell.lower[0] == 0.0);
  CHECK(r.cell.upper[0] == 0.5);
  CHECK(r.splits[0].S_bar == 0.5);
}

TEST_CASE("volume invariance holds on every generated path") {
  Rng seeds(314);
  for (int d : {1, 2, 5}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const int N = 1 + seeds.uniform_int(50);
      std::vector<double> x(static_cast<size_t>(d));
      for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = seeds.uniform01();
      const TreeKind kind = trial % 2 == 0 ? TreeKind::uniform : TreeKind::centered;
      const auto r = grow_path(kind, x, d, N, seeds.next_u64());
      CHECK(volume_invariance_check(r));
    }
  }
  // empty sequence: volume 1 equals the empty product
  const auto r0 = grow_path(TreeKind::uniform, std::vector<double>{0.5}, 1, 0, 5);
  CHECK(volume_invariance_check(r0));
  // centered, three splits: exactly 1/8
  const auto r3 = grow_path(TreeKind::centered, std::vector<double>{0.2, 0.8}, 2, 3, 6);
  CHECK(volume(r3.side_box()) == 0.125);
  CHECK(volume_invariance_check(r3));
}

TEST_CASE("volume invariance also holds along Mondrian paths") {
  Rng seeds(271828);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + seeds.uniform_int(3);
    std::vector<double> x(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = seeds.uniform01();
    const auto r = mondrian_path(MondrianParams(4.0, d), x, seeds.next_u64());
    CHECK(volume_invariance_check(r));
  }
}

TEST_CASE("uniform-tree side lengths factor over the recorded sequence") {
  const int d = 3, N = 40;
  const auto r =
      grow_path(TreeKind::uniform, std::vector<double>{0.1, 0.6, 0.9}, d, N, 2024);
  for (int k = 1; k <= d; ++k) {
    double log_h = 0.0;
    for (const auto& s : r.splits)
      if (s.D == k) log_h += std::log(s.S_bar);
    CHECK(r.sides[static_cast<size_t>(k - 1)] ==
          doctest::Approx(std::exp(log_h)).epsilon(1e-10));
  }
}

TEST_CASE("shape ratio") {
  CHECK(shape_ratio(HyperRectangle({0, 0}, {1, 1})) == 1.0);
  // centered splits with direction counts (3, 1): sides 2^-3 and 2^-1
  const auto r = grow_from_sequence(std::vector<double>{0.0, 0.0}, 2,
                                    {{1, 0.5}, {1, 0.5}, {1, 0.5}, {2, 0.5}});
  CHECK(shape_ratio(r.cell) == 4.0);
  // in dimension one the ratio is identically 1
  Rng seeds(55);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = grow_path(TreeKind::uniform, std::vector<double>{0.4}, 1,
                             1 + seeds.uniform_int(30), seeds.next_u64());
    CHECK(shape_ratio(p.cell) == 1.0);
  }
  CHECK_THROWS_AS(shape_ratio(HyperRectangle({0, 0}, {1, 0})), std::invalid_argument);
}

TEST_CASE("volume of a corner cell matches the independent product law") {
  // Two-sample KS between uniform-tree volumes at the origin and the
  // product of N independent uniforms.
  const int N = 20, R = 10000;
  const int d = 2;
  std::vector<double> volumes, oracle;
  Rng org(8888);
  const std::vector<double> x0(static_cast<size_t>(d), 0.0);
  for (int r = 0; r < R; ++r) {
    volumes.push_back(
        volume(grow_path(TreeKind::uniform, x0, d, N, derive_seed(4242, "vol", r)).cell));
    double prod = 1.0;
    for (int i = 0; i < N; ++i) prod *= org.uniform_open01();
    oracle.push_back(prod);
  }
  CHECK(ks_two_sample(volumes, oracle) < 0.03);
}

TEST_CASE("mondrian with a tiny lifetime rarely splits") {
  const double lifetime = 0.01;
  const int d = 2, R = 10000;
  const MondrianParams params(lifetime, d);
  const std::vector<double> x(static_cast<size_t>(d), 0.5);
  int untouched = 0;
  for (int r = 0; r < R; ++r) {
    const auto path = mondrian_path(params, x, derive_seed(17, "tiny", r));
    if (path.splits.empty()) ++untouched;
  }
  const double p = std::exp(-lifetime * d);  // exponential clock at rate sum h_k = d
  const double freq = static_cast<double>(untouched) / R;
  const double se = std::sqrt(p * (1 - p) / R);
  CHECK(std::abs(freq - p) <= 3 * se);
}

TEST_CASE("mondrian mean side length decreases with the lifetime") {
  const int d = 2, R = 10000;
  const std::vector<double> x(static_cast<size_t>(d), 0.5);
  double prev = 2.0;
  for (double lifetime : {1.0, 2.0, 4.0}) {
    double mean = 0.0;
    for (int r = 0; r < R; ++r) {
      const auto cell =
          mondrian_cell(MondrianParams(lifetime, d), x, derive_seed(23, "mono", r));
      mean += cell.side(0);
    }
    mean /= R;
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("mondrian side lengths follow the Gamma(2, lifetime) law at large lifetimes") {
  // At the cube center with a large lifetime, a side is the sum of two
  // independent Exp(lifetime) arms (truncation at the boundary is
  // negligible), i.e. Gamma(2, lifetime).
  const double lifetime = 20.0;
  const int d = 2, R = 10000;
  const std::vector<double> x(static_cast<size_t>(d), 0.5);
  std::vector<double> sides;
  sides.reserve(R);
  for (int r = 0; r < R; ++r)
    sides.push_back(
        mondrian_cell(MondrianParams(lifetime, d), x, derive_seed(29, "ks", r)).side(0));

  SUBCASE("two-sample against sampled Gamma(2, lifetime) truncated at 1") {
    Rng org(606);
    std::vector<double> oracle;
    for (int i = 0; i < 100000; ++i)
      oracle.push_back(
          std::min(1.0, org.exponential(lifetime) + org.exponential(lifetime)));
    CHECK(ks_two_sample(sides, oracle) < 0.02);
  }
  SUBCASE("one-sample against the closed-form CDF") {
    const double ks = ks_one_sample(sides, [lifetime](double t) {
      return t >= 1.0 ? 1.0 : 1.0 - std::exp(-lifetime * t) * (1.0 + lifetime * t);
    });
    CHECK(ks < 0.02);
  }
}

TEST_CASE("split sequence json round trip") {
  const auto r = grow_path(TreeKind::uniform, std::vector<double>{0.3, 0.6}, 2, 12, 77);
  const auto j = split_sequence_to_json(r.splits);
  CHECK(j.size() == 12);
  CHECK(j[0].contains("step"));
  const SplitSequence back = split_sequence_from_json(j);
  REQUIRE(back.size() == r.splits.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].D == r.splits[i].D);
    CHECK(back[i].S == r.splits[i].S);
    CHECK(back[i].S_bar == r.splits[i].S_bar);
  }
}

TEST_CASE("generators are deterministic in the seed") {
  const std::vector<double> x{0.25, 0.75};
  const auto a = grow_path(TreeKind::uniform, x, 2, 20, 31337);
  const auto b = grow_path(TreeKind::uniform, x, 2, 20, 31337);
  CHECK(a.cell.lower == b.cell.lower);
  CHECK(a.cell.upper == b.cell.upper);
  const auto c = grow_path(TreeKind::uniform, x, 2, 20, 31338);
  CHECK(a.cell.upper != c.cell.upper);
  const auto m1 = mondrian_cell(MondrianParams(5.0, 2), x, fnv1a64("m"));
  const auto m2 = mondrian_cell(MondrianParams(5.0, 2), x, fnv1a64("m"));
  CHECK(m1.lower == m2.lower);
  CHECK(m1.upper == m2.upper);
}

TEST_CASE("queries outside the cube are rejected") {
  CHECK_THROWS_AS(grow_path(TreeKind::uniform, std::vector<double>{1.5}, 1, 3, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(mondrian_cell(MondrianParams(1.0, 1), std::vector<double>{-0.1}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(MondrianParams(0.0, 1), std::invalid_argument);
}
