// locreg command-line tool: estimator fitting and prediction, random
// tree simulation, shape-regularity audits, bound calculators, and the
// Monte Carlo verification harness.
//
// Exit codes: 0 success, 1 statistical verdict FAIL, 2 usage/file error.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "locreg/data_model.hpp"
#include "locreg/estimators.hpp"
#include "locreg/experiments.hpp"
#include "locreg/geometry.hpp"
#include "locreg/random_trees.hpp"
#include "locreg/vc_bounds.hpp"

namespace {

using nlohmann::json;

constexpr int kModelSchemaVersion = 1;

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_double_list(s)) out.push_back(static_cast<int>(std::llround(v)));
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

json dataset_to_json(const locreg::Dataset& ds) {
  return json{{"d", ds.d}, {"x", ds.xs}, {"y", ds.y}};
}

locreg::Dataset dataset_from_json(const json& j) {
  locreg::Dataset ds;
  ds.d = j.at("d").get<int>();
  ds.xs = j.at("x").get<std::vector<double>>();
  ds.y = j.at("y").get<std::vector<double>>();
  ds.validate();
  return ds;
}

/// Query CSV: header x1,...,xd with an optional trailing y column
/// (ignored when present).
std::vector<std::vector<double>> load_queries(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("query file is empty");
  const auto header = locreg::detail::split_csv_line(line);
  const bool has_y = static_cast<int>(header.size()) == d + 1 && header.back() == "y";
  if (static_cast<int>(header.size()) != d && !has_y)
    throw std::runtime_error("query file must have columns x1..x" + std::to_string(d) +
                             " (optionally followed by y)");
  std::vector<std::vector<double>> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto toks = locreg::detail::split_csv_line(line);
    if (static_cast<int>(toks.size()) != static_cast<int>(header.size()))
      throw std::runtime_error("malformed query row at line " + std::to_string(line_no));
    std::vector<double> x(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k)
      x[static_cast<size_t>(k)] = locreg::detail::parse_double(toks[static_cast<size_t>(k)], line_no);
    out.push_back(std::move(x));
  }
  if (out.empty()) throw std::runtime_error("query file has no rows");
  return out;
}

// ---------------------------------------------------------------------------
// fit / predict
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string input, out, estimator = "knn";
  int d = 1;
  int k = 0, m = 0, cells = 0;
  double beta = 2.0;
};

int run_fit(const FitArgs& a) {
  const locreg::Dataset ds = locreg::load_csv(a.input, a.d);
  json model;
  model["schema_version"] = kModelSchemaVersion;
  model["type"] = a.estimator;
  model["d"] = ds.d;
  model["dataset"] = dataset_to_json(ds);
  if (a.estimator == "knn") {
    const int k = a.k > 0 ? a.k : locreg::detail::knn_k_for(ds.n(), ds.d);
    if (k > ds.n()) throw std::runtime_error("fit: k exceeds sample size");
    model["params"] = {{"k", k}};
  } else if (a.estimator == "cart") {
    const int m = a.m > 0 ? a.m : locreg::detail::cart_m_for(ds.n(), ds.d);
    const locreg::PartitionTree tree = locreg::cart_build(ds, m, a.beta);
    model["params"] = {{"m", m}, {"beta", a.beta}};
    model["tree"] = locreg::tree_to_json(tree);
  } else if (a.estimator == "grid") {
    const int cells = a.cells > 0 ? a.cells : locreg::detail::grid_cells_for(ds.n(), ds.d);
    const locreg::FixedGrid grid = locreg::uniform_grid(ds.d, cells);
    model["params"] = {{"cells", cells}};
    model["cuts"] = grid.cuts();
  } else {
    throw std::runtime_error("fit: estimator must be knn, cart or grid");
  }
  write_text(a.out, model.dump(2) + "\n");
  return 0;
}

struct PredictArgs {
  std::string model, queries, out;
};

int run_predict(const PredictArgs& a) {
  const json model = load_json_file(a.model);
  if (model.at("schema_version").get<int>() != kModelSchemaVersion)
    throw std::runtime_error("predict: unsupported model schema version");
  const std::string type = model.at("type").get<std::string>();
  const locreg::Dataset ds = dataset_from_json(model.at("dataset"));
  const auto queries = load_queries(a.queries, ds.d);

  std::vector<double> yhat;
  yhat.reserve(queries.size());
  if (type == "knn") {
    const int k = model.at("params").at("k").get<int>();
    const locreg::KdTree tree(ds);
    for (const auto& x : queries) yhat.push_back(locreg::knn_predict(ds, tree, x, k));
  } else if (type == "cart") {
    const locreg::PartitionTree tree = locreg::tree_from_json(model.at("tree"));
    for (const auto& x : queries) yhat.push_back(locreg::tree_predict(tree, ds, x));
  } else if (type == "grid") {
    const locreg::FixedGrid grid(model.at("cuts").get<std::vector<std::vector<double>>>());
    const locreg::GridModel gm = locreg::fit_grid(ds, grid);
    for (const auto& x : queries) yhat.push_back(gm.predict(x));
  } else {
    throw std::runtime_error("predict: unknown model type '" + type + "'");
  }

  std::ostringstream out;
  for (int k = 0; k < ds.d; ++k) out << "x" << (k + 1) << ",";
  out << "yhat\n";
  for (size_t i = 0; i < queries.size(); ++i) {
    for (double v : queries[i]) out << locreg::detail::format_double(v) << ",";
    out << locreg::detail::format_double(yhat[i]) << "\n";
  }
  write_text(a.out, out.str());
  return 0;
}

// ---------------------------------------------------------------------------
// simulate-tree / shapecheck
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string kind = "uniform", x_str, out;
  int d = 2, N = 10;
  double lifetime = 1.0;
  std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
  std::vector<double> x = a.x_str.empty() ? std::vector<double>(static_cast<size_t>(a.d), 0.5)
                                          : parse_double_list(a.x_str);
  if (static_cast<int>(x.size()) != a.d)
    throw std::runtime_error("simulate-tree: --x must have d coordinates");
  locreg::PathResult path;
  json j;
  j["kind"] = a.kind;
  j["d"] = a.d;
  j["x"] = x;
  j["seed"] = a.seed;
  if (a.kind == "mondrian") {
    path = locreg::mondrian_path(locreg::MondrianParams(a.lifetime, a.d), x, a.seed);
    j["lifetime"] = a.lifetime;
  } else {
    path = locreg::grow_path(locreg::tree_kind_from_string(a.kind), x, a.d, a.N, a.seed);
    j["N"] = a.N;
  }
  const auto ext = locreg::side_extremes(path.cell);
  j["cell"] = {{"lower", path.cell.lower}, {"upper", path.cell.upper}};
  j["stats"] = {{"volume", locreg::volume(path.cell)},
                {"diameter", locreg::diameter(path.cell)},
                {"h_minus", ext.h_minus},
                {"h_plus", ext.h_plus},
                {"shape_ratio", locreg::shape_ratio(path.cell)},
                {"splits", path.splits.size()},
                {"volume_invariance", locreg::volume_invariance_check(path.cell, path.splits)}};
  j["split_sequence"] = locreg::split_sequence_to_json(path.splits);
  write_text(a.out, j.dump(2) + "\n");
  return 0;
}

struct ShapecheckArgs {
  std::string tree, out;
  double beta = 0.0, gamma = 0.0;  // 0 = not requested
};

int run_shapecheck(const ShapecheckArgs& a) {
  json j = load_json_file(a.tree);
  if (j.contains("tree")) j = j["tree"];  // accept fitted cart models too
  const locreg::PartitionTree tree = locreg::tree_from_json(j);
  const int d = tree.dim();

  double min_ratio = 0.0, max_ratio = 0.0, sum_ratio = 0.0;
  double min_gamma = 0.0, max_gamma = 0.0, sum_gamma = 0.0;
  bool all_beta = true, all_gamma = true;
  const auto leaves = tree.leaf_ids();
  for (size_t i = 0; i < leaves.size(); ++i) {
    const auto& cell = tree.nodes()[static_cast<size_t>(leaves[i])].cell;
    const double ratio = locreg::shape_ratio(cell);
    const double gam = std::pow(locreg::diameter(cell), d) / locreg::volume(cell);
    if (i == 0) {
      min_ratio = max_ratio = ratio;
      min_gamma = max_gamma = gam;
    }
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
    sum_ratio += ratio;
    min_gamma = std::min(min_gamma, gam);
    max_gamma = std::max(max_gamma, gam);
    sum_gamma += gam;
    if (a.beta > 0.0 && !locreg::is_beta_sr(cell, a.beta)) all_beta = false;
    if (a.gamma > 0.0 &&
        !locreg::is_gamma_sr(locreg::diameter(cell), locreg::volume(cell), d, a.gamma))
      all_gamma = false;
  }

  json out;
  out["d"] = d;
  out["n_leaves"] = leaves.size();
  out["beta_profile"] = {{"min", min_ratio},
                         {"max", max_ratio},
                         {"mean", sum_ratio / static_cast<double>(leaves.size())}};
  out["gamma_profile"] = {{"min", min_gamma},
                          {"max", max_gamma},
                          {"mean", sum_gamma / static_cast<double>(leaves.size())}};
  bool pass = true;
  if (a.beta > 0.0) {
    out["beta_checked"] = a.beta;
    out["all_beta_sr"] = all_beta;
    pass = pass && all_beta;
  }
  if (a.gamma > 0.0) {
    out["gamma_checked"] = a.gamma;
    out["all_gamma_sr"] = all_gamma;
    pass = pass && all_gamma;
  }
  out["verdict"] = pass ? "PASS" : "FAIL";
  write_text(a.out, out.dump(2) + "\n");
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

struct BoundsArgs {
  std::string formula;
  int n = 1, v = 1, d = 1, count = 1, k = 1, m = 1, N = 1;
  double delta = 0.05, sigma2 = 1.0, p = 0.5, shatter_log = 0.0, kappa = 1.0, f = 1.0,
         lipschitz = 1.0, beta = 2.0, event_param = 0.3, patterns = 1.0;
};

int run_bounds(const BoundsArgs& a) {
  double value = 0.0;
  locreg::BoundSpec spec;
  spec.n = a.n;
  spec.v = a.v;
  spec.delta = a.delta;
  spec.sigma2 = a.sigma2;
  if (a.formula == "sauer") {
    value = locreg::sauer_bound(a.n, a.v);
  } else if (a.formula == "log_sauer") {
    value = locreg::log_sauer(a.n, a.v);
  } else if (a.formula == "variance") {
    value = locreg::variance_term(spec, a.count);
  } else if (a.formula == "pointwise") {
    value = locreg::pointwise_error_bound(spec, a.count, a.lipschitz, a.event_param);
  } else if (a.formula == "large_sample") {
    value = locreg::large_sample_threshold(a.n, a.v, a.delta);
  } else if (a.formula == "cart_mass") {
    value = locreg::cart_mass_threshold(a.n, a.d, a.delta);
  } else if (a.formula == "vapnik_lower") {
    value = locreg::empirical_mass_bounds(a.n, a.p, a.delta, a.shatter_log).vapnik_lower;
  } else if (a.formula == "chernoff_lower") {
    value = locreg::empirical_mass_bounds(a.n, a.p, a.delta, a.shatter_log).chernoff_lower;
  } else if (a.formula == "chernoff_upper") {
    value = locreg::empirical_mass_bounds(a.n, a.p, a.delta, a.shatter_log).chernoff_upper;
  } else if (a.formula == "sup_envelope") {
    value = locreg::normalized_sup_envelope(a.sigma2, a.patterns, a.delta);
  } else if (a.formula == "knn_error") {
    value = locreg::knn_error_bound(a.n, a.d, a.delta, a.sigma2, a.k, a.kappa, a.f, a.lipschitz);
  } else if (a.formula == "cart_error") {
    value = locreg::cart_error_bound(a.n, a.d, a.delta, a.sigma2, a.m, a.beta, a.kappa, a.f,
                                     a.lipschitz);
  } else if (a.formula == "uniform_diam_upper") {
    value = locreg::uniform_diam_upper_bound(a.d, a.N, a.event_param);
  } else if (a.formula == "uniform_diam_lower") {
    value = locreg::uniform_diam_lower_bound(a.d, a.N, a.event_param);
  } else if (a.formula == "uniform_volume") {
    value = locreg::uniform_volume_bound(a.N, a.event_param);
  } else if (a.formula == "centered_diam") {
    value = locreg::centered_diam_bound(a.d, a.N, a.event_param);
  } else if (a.formula == "mondrian_ratio") {
    value = locreg::mondrian_ratio_bound(a.d, a.delta);
  } else if (a.formula == "beta_to_gamma") {
    value = locreg::beta_to_gamma(a.beta, a.d);
  } else {
    throw std::runtime_error("bounds: unknown formula '" + a.formula + "'");
  }
  std::printf("%.17g\n", value);
  return 0;
}

// ---------------------------------------------------------------------------
// rates / verify
// ---------------------------------------------------------------------------

struct HarnessArgs {
  std::string experiment = "all", config_file, out, raw;
  std::string estimator = "knn", g_name = "sum_coords", n_grid_str, gamma_bars_str;
  int d = -1, N = -1, R = -1, n = -1, class_size = -1;
  double delta = -1.0, sigma2 = -1.0, lifetime = -1.0, event_param =
      std::numeric_limits<double>::quiet_NaN(), beta = -1.0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
};

locreg::ExperimentConfig build_config(const HarnessArgs& a, bool is_rates) {
  locreg::ExperimentConfig cfg = locreg::default_config(is_rates ? "rates" : a.experiment);
  bool config_has_seed = false;
  if (!a.config_file.empty()) {
    const json j = load_json_file(a.config_file);
    locreg::config_from_json(j, cfg);
    config_has_seed = j.contains("seed");
    if (is_rates) cfg.experiment = "rates";
  }
  // Flags win over the config file.
  if (a.d >= 0) cfg.d = a.d;
  if (a.N >= 0) cfg.N = a.N;
  if (a.R >= 0) cfg.replicates = a.R;
  if (a.n >= 0) cfg.n = a.n;
  if (a.class_size >= 0) cfg.class_size = a.class_size;
  if (a.delta >= 0.0) cfg.delta = a.delta;
  if (a.sigma2 >= 0.0) cfg.sigma2 = a.sigma2;
  if (a.lifetime >= 0.0) cfg.lifetime = a.lifetime;
  if (!std::isnan(a.event_param)) cfg.event_param = a.event_param;
  if (a.beta >= 0.0) cfg.beta = a.beta;
  if (is_rates) {
    cfg.estimator = a.estimator;
    cfg.g_name = a.g_name;
    if (!a.n_grid_str.empty()) cfg.n_grid = parse_int_list(a.n_grid_str);
  }
  if (!a.gamma_bars_str.empty()) cfg.gamma_bars = parse_double_list(a.gamma_bars_str);
  if (a.seed_given) cfg.seed = a.seed;
  if (!a.seed_given && !config_has_seed)
    throw std::runtime_error("a seed is required (--seed or \"seed\" in the config file); "
                             "wall-clock seeding is not supported");
  cfg.threads = std::max(1, a.threads);
  return cfg;
}

int run_harness(HarnessArgs& a, bool is_rates) {
  a.seed_given = a.seed_opt != nullptr && a.seed_opt->count() > 0;
  const locreg::ExperimentConfig cfg = build_config(a, is_rates);
  const auto t0 = std::chrono::steady_clock::now();
  locreg::ExperimentReport rep = locreg::run_experiment(cfg);
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(a.out, locreg::report_to_json(rep).dump(2) + "\n");
  if (!a.raw.empty()) locreg::write_raw_csv(rep, a.raw);
  std::fprintf(stderr, "completed %zu check(s) in %.2f s\n", rep.rows.size(), rep.runtime_seconds);
  return rep.all_pass() ? 0 : 1;
}

void add_harness_flags(CLI::App* sub, HarnessArgs& a, bool is_rates) {
  sub->add_option("--config", a.config_file, "JSON config file; explicit flags take precedence");
  sub->add_option("--d", a.d, "covariate dimension");
  sub->add_option("--R", a.R, "Monte Carlo replicates");
  sub->add_option("--sigma2", a.sigma2, "noise sub-Gaussian parameter sigma^2");
  sub->add_option("--delta", a.delta, "confidence parameter delta");
  sub->add_option("--threads", a.threads, "worker threads (output does not depend on this)");
  sub->add_option("--out", a.out, "report JSON path (default: stdout)");
  sub->add_option("--raw", a.raw, "also dump per-replicate statistics as CSV");
  a.seed_opt = sub->add_option("--seed", a.seed, "master seed (required)");
  if (is_rates) {
    sub->add_option("--estimator", a.estimator, "knn | cart | grid");
    sub->add_option("--g", a.g_name, "regression function (sum_coords, constant_c, sine_product)");
    sub->add_option("--n-grid", a.n_grid_str, "comma-separated sample sizes (>= 4, increasing)");
    sub->add_option("--beta", a.beta, "shape parameter for the cart estimator");
  } else {
    sub->add_option("--experiment", a.experiment,
                    "experiment id (see --help-experiments), a group id, or 'all'");
    sub->add_option("--N", a.N, "number of random splits");
    sub->add_option("--n", a.n, "sample size for envelope/lower-bound experiments");
    sub->add_option("--class-size", a.class_size, "finite rectangle class size");
    sub->add_option("--lifetime", a.lifetime, "Mondrian lifetime");
    sub->add_option("--event-param", a.event_param,
                    "event parameter (the proposition's alpha or beta)");
    sub->add_option("--gamma-bars", a.gamma_bars_str,
                    "comma-separated diam^d/volume levels for the elongated-cell probe");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "locreg: local regression map estimators (k-NN, shape-regular CART-like trees, fixed "
      "grids, purely random trees) and a seeded Monte Carlo harness checking their "
      "deviation bounds, shape-regularity properties and convergence-rate exponents"};
  app.require_subcommand(1);
  int exit_code = 0;

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand(
      "fit", "train a local regression estimator (k-NN ball map, shape-regular cost-minimizing "
             "tree, or fixed grid partition) on a CSV sample and write a model JSON");
  fit_cmd->add_option("--input", fit.input, "training CSV with header x1,...,xd,y")->required();
  fit_cmd->add_option("--d", fit.d, "covariate dimension")->required();
  fit_cmd->add_option("--estimator", fit.estimator, "knn | cart | grid");
  fit_cmd->add_option("--k", fit.k, "neighbor count (default n^{2/(d+2)} log(n)^{d/(d+2)})");
  fit_cmd->add_option("--m", fit.m, "minimal leaf count (default n^{2/(d+2)})");
  fit_cmd->add_option("--beta", fit.beta, "side-length ratio bound for tree splits (>= 2)");
  fit_cmd->add_option("--cells", fit.cells, "grid cells per axis (default n^{1/(d+2)})");
  fit_cmd->add_option("--out", fit.out, "model JSON path (default: stdout)");
  fit_cmd->callback([&]() { exit_code = run_fit(fit); });

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand(
      "predict", "evaluate a fitted model (the local mean over the cell/ball of each query "
                 "point, with the empty-cell value 0) on a query CSV");
  pred_cmd->add_option("--model", pred.model, "model JSON from 'fit'")->required();
  pred_cmd->add_option("--queries", pred.queries, "CSV with columns x1..xd (y optional, ignored)")
      ->required();
  pred_cmd->add_option("--out", pred.out, "prediction CSV path (default: stdout)");
  pred_cmd->callback([&]() { exit_code = run_predict(pred); });

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand(
      "simulate-tree", "grow a purely random tree path (uniform or centered splits, or a "
                       "Mondrian process with a lifetime) around a query point and dump the "
                       "split sequence, cell, volume-invariance check and shape statistics");
  sim_cmd->add_option("--kind", sim.kind, "uniform | centered | mondrian");
  sim_cmd->add_option("--d", sim.d, "dimension");
  sim_cmd->add_option("--N", sim.N, "number of splits (uniform/centered)");
  sim_cmd->add_option("--lifetime", sim.lifetime, "Mondrian lifetime");
  sim_cmd->add_option("--x", sim.x_str, "query point, comma-separated (default: cube center)");
  sim_cmd->add_option("--seed", sim.seed, "seed (required)")->required();
  sim_cmd->add_option("--out", sim.out, "output JSON path (default: stdout)");
  sim_cmd->callback([&]() { exit_code = run_simulate(sim); });

  ShapecheckArgs shape;
  auto* shape_cmd = app.add_subcommand(
      "shapecheck", "audit the shape regularity of a serialized partition tree: per-leaf "
                    "h_+/h_- and diam^d/volume profiles, with optional beta-SR/gamma-SR checks");
  shape_cmd->add_option("--tree", shape.tree, "partition tree JSON (or a fitted cart model)")
      ->required();
  shape_cmd->add_option("--beta", shape.beta, "check every leaf satisfies h_+ <= beta h_-");
  shape_cmd->add_option("--gamma", shape.gamma, "check every leaf satisfies diam^d <= gamma vol");
  shape_cmd->add_option("--out", shape.out, "output JSON path (default: stdout)");
  shape_cmd->callback([&]() { exit_code = run_shapecheck(shape); });

  BoundsArgs bounds;
  auto* bounds_cmd = app.add_subcommand(
      "bounds", "print any bound formula: Sauer bound, variance envelope, (delta,n)-large "
                "threshold, normalized Vapnik / multiplicative Chernoff mass envelopes, "
                "k-NN and tree error bounds, random-tree deviation bounds, Mondrian ratio");
  bounds_cmd->add_option("--formula", bounds.formula,
                         "sauer | log_sauer | variance | pointwise | large_sample | cart_mass | "
                         "vapnik_lower | chernoff_lower | chernoff_upper | sup_envelope | "
                         "knn_error | cart_error | uniform_diam_upper | uniform_diam_lower | "
                         "uniform_volume | centered_diam | mondrian_ratio | beta_to_gamma")
      ->required();
  bounds_cmd->add_option("--n", bounds.n, "sample size");
  bounds_cmd->add_option("--v", bounds.v, "VC dimension");
  bounds_cmd->add_option("--d", bounds.d, "dimension");
  bounds_cmd->add_option("--delta", bounds.delta, "confidence parameter");
  bounds_cmd->add_option("--sigma2", bounds.sigma2, "noise parameter sigma^2");
  bounds_cmd->add_option("--count", bounds.count, "local sample count n P_n(V(x))");
  bounds_cmd->add_option("--p", bounds.p, "true set mass P(A)");
  bounds_cmd->add_option("--shatter-log", bounds.shatter_log, "log shattering coefficient at 2n");
  bounds_cmd->add_option("--patterns", bounds.patterns, "realized pattern count");
  bounds_cmd->add_option("--k", bounds.k, "neighbor count");
  bounds_cmd->add_option("--m", bounds.m, "leaf count");
  bounds_cmd->add_option("--beta", bounds.beta, "shape parameter");
  bounds_cmd->add_option("--kappa", bounds.kappa, "minimal mass constant");
  bounds_cmd->add_option("--f", bounds.f, "density value f_X(x)");
  bounds_cmd->add_option("--lipschitz", bounds.lipschitz, "Lipschitz constant");
  bounds_cmd->add_option("--N", bounds.N, "number of splits");
  bounds_cmd->add_option("--event-param", bounds.event_param,
                         "event parameter (alpha/beta of the deviation event; for 'pointwise', "
                         "the cell diameter)");
  bounds_cmd->callback([&]() { exit_code = run_bounds(bounds); });

  HarnessArgs rates;
  auto* rates_cmd = app.add_subcommand(
      "rates", "fit log-log convergence-rate slopes of the sup-norm error against the "
               "optimal exponent -1/(d+2) for k-NN, shape-regular trees and fixed grids");
  add_harness_flags(rates_cmd, rates, true);
  rates_cmd->callback([&]() { exit_code = run_harness(rates, true); });

  HarnessArgs verify;
  auto* verify_cmd = app.add_subcommand(
      "verify", "run a Monte Carlo verification experiment: deviation envelopes for "
                "uniform/centered tree cells, non-shape-regularity floors, the Mondrian "
                "shape bound, normalized-supremum and pointwise error envelopes, and the "
                "elongated-cell sub-optimality probe; exit 1 if any verdict fails");
  add_harness_flags(verify_cmd, verify, false);
  verify_cmd->callback([&]() { exit_code = run_harness(verify, false); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
