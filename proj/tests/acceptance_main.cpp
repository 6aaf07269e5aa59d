// Acceptance suite: runs every statistical and structural check at its
// full scale and tolerance and prints one PASS/FAIL line per criterion.
// Usage: acceptance_tests [path-to-locreg-cli] [--quick]
//
// The CLI path is needed by the determinism criterion, which compares
// report files produced by separate processes at different thread
// counts.  --quick shrinks the heavy Monte Carlo sizes for local
// iteration; the official run uses the defaults.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "locreg/data_model.hpp"
#include "locreg/estimators.hpp"
#include "locreg/experiments.hpp"
#include "locreg/geometry.hpp"
#include "locreg/random_trees.hpp"
#include "locreg/rng.hpp"
#include "locreg/vc_bounds.hpp"

namespace {

using namespace locreg;

int g_failures = 0;
bool g_quick = false;
std::string g_cli_path;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int criterion, const std::string& label, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %-38s %s (%.1f s)\n", pass ? "PASS" : "FAIL", criterion,
              label.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

int threads() { return 4; }

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// --- criterion 1: volume invariance --------------------------------------

void criterion_volume_invariance() {
  Timer timer;
  const int total = g_quick ? 1200 : 10000;
  Rng seeds(101);
  bool pass = true;
  double max_rel = 0.0;
  int done = 0;
  for (const TreeKind kind : {TreeKind::uniform, TreeKind::centered}) {
    for (const int d : {1, 2, 5}) {
      const int count = total / 6;
      for (int t = 0; t < count; ++t, ++done) {
        const int N = 1 + seeds.uniform_int(50);
        std::vector<double> x(static_cast<size_t>(d));
        for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = seeds.uniform01();
        const auto r = grow_path(kind, x, d, N, seeds.next_u64());
        double prod = 1.0;
        for (const auto& s : r.splits) prod *= s.S_bar;
        const double vol = volume(r.cell);
        const double rel = std::abs(vol - prod) / std::max({vol, prod, 1e-300});
        max_rel = std::max(max_rel, rel);
        if (!volume_invariance_check(r.cell, r.splits)) pass = false;
      }
    }
  }
  report(1, "volume invariance", pass,
         fmt("%d paths, max relative gap %.2e (limit 1e-12)", done, max_rel), timer.seconds());
}

// --- criterion 2: centered volume is exactly 2^-N ------------------------

void criterion_centered_volume() {
  Timer timer;
  Rng seeds(202);
  bool pass = true;
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + seeds.uniform_int(4);
    const int N = 1 + seeds.uniform_int(30);
    std::vector<double> x(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = seeds.uniform01();
    const auto r = grow_path(TreeKind::centered, x, d, N, seeds.next_u64());
    if (volume(r.cell) != std::ldexp(1.0, -N)) pass = false;
  }
  report(2, "centered-tree volume 2^-N exact", pass, "100 seeds, N <= 30, equality bitwise",
         timer.seconds());
}

// --- helpers for experiment-driven criteria -------------------------------

ExperimentReport run_default(const std::string& id, int R) {
  ExperimentConfig cfg = default_config(id);
  cfg.seed = 20250810;
  cfg.replicates = R;
  cfg.threads = threads();
  return run_experiment(cfg);
}

std::string row_summary(const ExperimentReport& rep) {
  std::ostringstream os;
  for (const auto& r : rep.rows) {
    os << r.name << "=" << r.value;
    if (!r.pass) os << "(FAIL)";
    os << " ";
  }
  return os.str();
}

// --- criteria 3-6, 8: frequency experiments at full scale ----------------

void criterion_deviation_envelopes() {
  Timer timer;
  const int R = g_quick ? 1000 : 10000;
  bool pass = true;
  std::ostringstream detail;
  for (const char* id : {"prop6_2_diam_upper", "prop6_2_diam_lower", "prop6_3_vol_lower",
                         "prop6_3_vol_upper", "prop6_5_diam_upper", "prop6_5_diam_lower"}) {
    const auto rep = run_default(id, R);
    for (const auto& row : rep.rows) {
      if (!row.pass) pass = false;
      detail << row.name << ": " << row.value << " <= " << row.reference << (row.pass ? "; " : " FAIL; ");
    }
  }
  report(3, "tree deviation envelopes", pass, fmt("6 events at d=2, N=50, R=%d", R),
         timer.seconds());
}

void criterion_non_sr_floors() {
  Timer timer;
  const int R = g_quick ? 1000 : 10000;
  const auto uni = run_default("prop6_4", R);
  const auto cen = run_default("prop6_6", R);
  const bool pass = uni.all_pass() && cen.all_pass();
  report(4, "non-shape-regularity floors", pass,
         fmt("uniform %.4f >= 1/11 - 3SE, centered %.4f >= 1/14 - 3SE", uni.rows[0].value,
             cen.rows[0].value),
         timer.seconds());
}

void criterion_mondrian() {
  Timer timer;
  const int R = g_quick ? 1000 : 10000;
  const auto rep = run_default("prop6_7", R);
  report(5, "Mondrian shape bound", rep.all_pass(),
         fmt("ratio <= %.1f with frequency %.4f (floor %.2f - 3SE)",
             rep.rows[0].extra.at("ratio_bound").get<double>(), rep.rows[0].value,
             rep.rows[0].reference),
         timer.seconds());
}

void criterion_thm31() {
  Timer timer;
  const int R = g_quick ? 1000 : 10000;
  const auto rep = run_default("thm3_1", R);
  report(6, "normalized supremum envelope", rep.all_pass(),
         fmt("exceedance %.4f <= delta=%.2f + 3SE over R=%d", rep.rows[0].value,
             rep.rows[0].reference, R),
         timer.seconds());
}

void criterion_lower_bound() {
  Timer timer;
  const int R = g_quick ? 1000 : 10000;
  const auto rep = run_default("prop4_2", R);
  report(8, "elongated-cell sub-optimality", rep.all_pass(), row_summary(rep), timer.seconds());
}

// --- criterion 7: rate exponents ------------------------------------------

void criterion_rates() {
  Timer timer;
  bool pass = true;
  std::ostringstream detail;
  struct Cfg {
    const char* est;
    int d;
  };
  const std::vector<Cfg> cases = {{"knn", 1}, {"cart", 1}, {"grid", 1}, {"knn", 2}, {"cart", 2}};
  for (const auto& c : cases) {
    ExperimentConfig cfg = default_config("rates");
    cfg.estimator = c.est;
    cfg.d = c.d;
    cfg.seed = 20250810;
    cfg.threads = threads();
    if (g_quick) {
      cfg.replicates = 10;
      cfg.n_grid = {1000, 3000, 10000, 30000};
    }
    const auto rep = run_experiment(cfg);
    const auto& row = rep.rows[0];
    if (!row.pass) pass = false;
    detail << c.est << "/d" << c.d << " slope " << fmt("%.3f", row.value)
           << (row.pass ? "; " : " FAIL; ");
  }
  report(7, "rate exponents (-1/(d+2) band 0.15)", pass, detail.str(), timer.seconds());
}

// --- criterion 9: oracle equivalences -------------------------------------

KnnResult brute_knn(const Dataset& ds, std::span<const double> x, int k) {
  std::vector<std::pair<double, int>> all;
  for (int i = 0; i < ds.n(); ++i) {
    double d2 = 0.0;
    for (int kk = 0; kk < ds.d; ++kk) {
      const double t = x[static_cast<size_t>(kk)] - ds.x(i)[static_cast<size_t>(kk)];
      d2 += t * t;
    }
    all.emplace_back(d2, i);
  }
  std::sort(all.begin(), all.end());
  KnnResult r;
  for (int i = 0; i < k; ++i) r.indices.push_back(all[static_cast<size_t>(i)].second);
  r.radius = std::sqrt(all[static_cast<size_t>(k) - 1].first);
  return r;
}

// Exhaustive first-split oracle: enumerates the candidate fractions
// (midpoints between consecutive distinct values per coordinate plus
// 1/2), keeps those whose two children are beta-SR boxes holding at
// least m points under threshold routing, and minimizes cart_cost with
// ties broken by (p, u).
std::optional<SplitSpec> oracle_first_split(const Dataset& ds, int m, double beta) {
  const HyperRectangle root(std::vector<double>(static_cast<size_t>(ds.d), 0.0),
                            std::vector<double>(static_cast<size_t>(ds.d), 1.0));
  std::optional<SplitSpec> best;
  double best_cost = 0.0;
  for (int p = 1; p <= ds.d; ++p) {
    std::vector<double> values;
    for (int i = 0; i < ds.n(); ++i) values.push_back(ds.x(i)[static_cast<size_t>(p - 1)]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> us;
    for (size_t t = 0; t + 1 < values.size(); ++t)
      us.push_back(0.5 * (values[t] + values[t + 1]));
    us.push_back(0.5);
    std::sort(us.begin(), us.end());
    us.erase(std::unique(us.begin(), us.end()), us.end());
    for (const double u : us) {
      if (!(u > 0.0 && u < 1.0)) continue;
      const SplitSpec s{p, u};
      const double c = u;  // root side is [0,1]
      long long left = 0;
      for (int i = 0; i < ds.n(); ++i)
        if (ds.x(i)[static_cast<size_t>(p - 1)] <= c) ++left;
      if (left < m || ds.n() - left < m) continue;
      HyperRectangle lo = root, hi = root;
      lo.upper[static_cast<size_t>(p - 1)] = c;
      hi.lower[static_cast<size_t>(p - 1)] = c;
      if (!is_beta_sr(lo, beta) || !is_beta_sr(hi, beta)) continue;
      const double cost = cart_cost(s, root, ds);
      if (!best || cost < best_cost) {
        best = s;
        best_cost = cost;
      }
    }
  }
  return best;
}

void criterion_oracles() {
  Timer timer;
  bool knn_ok = true;
  Rng rng(909);
  int queries = 0;
  for (int dataset = 0; dataset < 20; ++dataset) {
    const int d = 1 + rng.uniform_int(3);
    const int n = 50 + rng.uniform_int(350);
    const auto g = builtin_g("sum_coords", d);
    const Dataset ds = generate(CovariateLaw::uniform_cube(), g, NoiseModel::make("gaussian", 1.0),
                                n, rng.next_u64());
    const KdTree tree(ds);
    for (int q = 0; q < 200; ++q, ++queries) {
      std::vector<double> x(static_cast<size_t>(d));
      for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = rng.uniform01();
      const int k = 1 + rng.uniform_int(n);
      const KnnResult got = tree.query(x, k);
      const KnnResult want = brute_knn(ds, x, k);
      double got_pred = 0.0, want_pred = 0.0;
      for (int i : got.indices) got_pred += ds.y[static_cast<size_t>(i)];
      for (int i : want.indices) want_pred += ds.y[static_cast<size_t>(i)];
      if (got.indices != want.indices || got.radius != want.radius ||
          got_pred / k != want_pred / k)
        knn_ok = false;
    }
  }

  bool cart_ok = true;
  for (int dataset = 0; dataset < 20; ++dataset) {
    const int d = 1 + rng.uniform_int(2);
    const int n = 10 + rng.uniform_int(41);  // n <= 50
    const int m = 2 + rng.uniform_int(4);
    const auto g = builtin_g("sum_coords", d);
    const Dataset ds = generate(CovariateLaw::uniform_cube(), g, NoiseModel::make("gaussian", 1.0),
                                n, rng.next_u64());
    const PartitionTree tree = cart_build(ds, m, 2.0);
    const auto want = oracle_first_split(ds, m, 2.0);
    if (want.has_value() != !tree.root().is_leaf()) {
      cart_ok = false;
      continue;
    }
    if (want && (tree.root().split.p != want->p || tree.root().split.u != want->u))
      cart_ok = false;
  }
  report(9, "estimator oracle equivalences", knn_ok && cart_ok,
         fmt("knn %s over %d queries; first-split %s over 20 datasets",
             knn_ok ? "exact" : "MISMATCH", queries, cart_ok ? "exact" : "MISMATCH"),
         timer.seconds());
}

// --- criterion 10: structural invariants ----------------------------------

void criterion_structure() {
  Timer timer;
  Rng rng(4040);
  bool pass = true;
  std::string why = "ok";
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + rng.uniform_int(3);
    const int n = 200 + rng.uniform_int(600);
    const int m = 5 + rng.uniform_int(20);
    const double beta = 2.0 + rng.uniform01();
    const auto g = builtin_g("sum_coords", d);
    const Dataset ds = generate(CovariateLaw::uniform_cube(), g,
                                NoiseModel::make("gaussian", 0.25), n, rng.next_u64());
    const PartitionTree tree = cart_build(ds, m, beta);
    for (const auto& node : tree.nodes())
      if (!is_beta_sr(node.cell, beta)) {
        pass = false;
        why = "a cell violates beta-SR";
      }
    const bool any_split = !tree.root().is_leaf();
    double vol = 0.0;
    for (int id : tree.leaf_ids()) {
      const auto& leaf = tree.nodes()[static_cast<size_t>(id)];
      vol += volume(leaf.cell);
      if (any_split && leaf.leaf_indices.size() < static_cast<size_t>(m)) {
        pass = false;
        why = "leaf below m";
      }
    }
    if (std::abs(vol - 1.0) > 1e-12) {
      pass = false;
      why = "leaf volumes do not tile";
    }
    for (int q = 0; q < 100; ++q) {
      std::vector<double> x(static_cast<size_t>(d));
      for (int k = 0; k < d; ++k) x[static_cast<size_t>(k)] = rng.uniform01();
      int containing = 0;
      for (int id : tree.leaf_ids())
        if (cell_contains(tree.nodes()[static_cast<size_t>(id)].cell, x)) ++containing;
      if (containing != 1) {
        pass = false;
        why = "query not in exactly one leaf";
      }
    }
  }
  report(10, "tree structural invariants", pass, why, timer.seconds());
}

// --- criterion 11: VC sanity ----------------------------------------------

void criterion_vc() {
  Timer timer;
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);

  const FiniteSetClass intervals = interval_class(grid);
  std::vector<std::vector<double>> pool1;
  for (int i = 1; i <= 6; ++i) pool1.push_back({i / 7.0});
  const int vc1 = vc_dim_bruteforce(intervals, pool1, 6);

  const FiniteSetClass rects = rectangle_class(2, grid);
  const std::vector<std::vector<double>> pool2 = {
      {0.5, 0.1}, {0.1, 0.5}, {0.9, 0.5}, {0.5, 0.9}, {0.3, 0.3}, {0.7, 0.7}, {0.2, 0.8}};
  const int vc2 = vc_dim_bruteforce(rects, pool2, 7);

  std::vector<double> centers;
  for (int i = 0; i <= 10; ++i) centers.push_back(i / 10.0);
  std::vector<double> radii;
  for (int i = 0; i <= 12; ++i) radii.push_back(0.05 * i);
  const FiniteSetClass balls = ball_class(2, centers, radii);
  const std::vector<std::vector<double>> pool3 = {
      {0.5, 0.3}, {0.3, 0.7}, {0.7, 0.7}, {0.5, 0.55}, {0.5, 0.8}, {0.4, 0.4}};
  const int vc3 = vc_dim_bruteforce(balls, pool3, 6);

  const bool pass = vc1 == 2 && vc2 == 4 && vc3 == 3;
  report(11, "brute-force VC dimensions", pass,
         fmt("intervals=%d (want 2), rectangles=%d (want 4), balls=%d (want 3)", vc1, vc2, vc3),
         timer.seconds());
}

// --- criterion 12: CLI determinism across thread counts -------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void criterion_determinism() {
  Timer timer;
  if (g_cli_path.empty()) {
    report(12, "report determinism across threads", false, "no CLI path given", timer.seconds());
    return;
  }
  const std::string base = " verify --experiment all --R 400 --seed 20250810 ";
  const std::string f1 = "acc_det_t1.json", f8 = "acc_det_t8.json", f1b = "acc_det_t1b.json";
  const int rc1 = std::system((g_cli_path + base + "--threads 1 --out " + f1 + " 2>/dev/null").c_str());
  const int rc8 = std::system((g_cli_path + base + "--threads 8 --out " + f8 + " 2>/dev/null").c_str());
  const int rc1b = std::system((g_cli_path + base + "--threads 1 --out " + f1b + " 2>/dev/null").c_str());
  const std::string a = slurp(f1), b = slurp(f8), c = slurp(f1b);
  const bool ran = rc1 != -1 && rc8 != -1 && rc1b != -1 && !a.empty();
  const bool pass = ran && a == b && a == c;
  std::remove(f1.c_str());
  std::remove(f8.c_str());
  std::remove(f1b.c_str());
  report(12, "report determinism across threads", pass,
         pass ? fmt("3 runs, %zu-byte reports identical", a.size()) : "reports differ or CLI failed",
         timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--quick")
      g_quick = true;
    else
      g_cli_path = arg;
  }
  const Timer total;
  criterion_volume_invariance();
  criterion_centered_volume();
  criterion_deviation_envelopes();
  criterion_non_sr_floors();
  criterion_mondrian();
  criterion_thm31();
  criterion_rates();
  criterion_lower_bound();
  criterion_oracles();
  criterion_structure();
  criterion_vc();
  criterion_determinism();
  std::printf("SUMMARY: %d/12 criteria passed (%.1f s total)\n", 12 - g_failures,
              total.seconds());
  return g_failures;
}
