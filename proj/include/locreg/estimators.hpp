#pragma once

// Local regression map estimators: the local-mean evaluator with the
// 0/0 = 0 convention, k-NN with index tie-breaking, fixed grid
// partitions, and the shape-regular recursive tree with a pluggable
// split cost.
//
// Membership convention for partition cells: half-open (lower, upper]
// per coordinate, with the side closed at a lower bound of 0 so the
// whole of [0,1]^d is covered.  A query on a split boundary goes to the
// left child.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "locreg/data_model.hpp"
#include "locreg/geometry.hpp"

namespace locreg {

inline bool cell_contains(const HyperRectangle& cell, std::span<const double> x) {
  for (int k = 0; k < cell.dim(); ++k) {
    const size_t uk = static_cast<size_t>(k);
    const double v = x[uk];
    if (v > cell.upper[uk]) return false;
    if (v <= cell.lower[uk] && !(cell.lower[uk] == 0.0 && v == 0.0)) return false;
  }
  return true;
}

inline bool ball_contains(const Ball& b, std::span<const double> x) {
  double s = 0.0;
  for (int k = 0; k < b.dim(); ++k) {
    const double t = x[static_cast<size_t>(k)] - b.center[static_cast<size_t>(k)];
    s += t * t;
  }
  return s <= b.radius * b.radius;
}

namespace detail {

template <typename Contains>
double local_mean_impl(const Dataset& ds, Contains&& contains) {
  double sum = 0.0;
  long long count = 0;
  for (int i = 0; i < ds.n(); ++i) {
    if (contains(ds.x(i))) {
      sum += ds.y[static_cast<size_t>(i)];
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace detail

/// Mean response over the sample points falling in the cell; 0 when the
/// cell is empty (the 0/0 = 0 convention).  The query x must lie in the
/// cell.
inline double local_mean(const Dataset& ds, const HyperRectangle& cell, std::span<const double> x) {
  if (!cell_contains(cell, x)) throw std::invalid_argument("local_mean: x not in cell");
  return detail::local_mean_impl(ds, [&cell](std::span<const double> p) { return cell_contains(cell, p); });
}

inline double local_mean(const Dataset& ds, const Ball& ball, std::span<const double> x) {
  if (!ball_contains(ball, x)) throw std::invalid_argument("local_mean: x not in ball");
  return detail::local_mean_impl(ds, [&ball](std::span<const double> p) { return ball_contains(ball, p); });
}

// ---------------------------------------------------------------------------
// k-nearest neighbors
// ---------------------------------------------------------------------------

struct KnnResult {
  double radius = 0.0;
  std::vector<int> indices;  // ordered by (distance, sample index)
};

/// k-d tree over the covariates of a Dataset.  Ties in distance are
/// broken by ascending sample index, so queries return exactly the same
/// index set as a full sort of (distance, index) pairs.
class KdTree {
 public:
  explicit KdTree(const Dataset& ds) : ds_(&ds), d_(ds.d) {
    idx_.resize(static_cast<size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) idx_[static_cast<size_t>(i)] = i;
    nodes_.reserve(static_cast<size_t>(2 * ds.n() / kLeafSize + 2));
    root_ = build(0, ds.n());
  }

  KnnResult query(std::span<const double> x, int k) const {
    if (k < 1 || k > ds_->n()) throw std::invalid_argument("knn: need 1 <= k <= n");
    Search s{x, k, {}};
    s.heap.reserve(static_cast<size_t>(k));
    search(root_, s);
    std::sort(s.heap.begin(), s.heap.end());
    KnnResult res;
    res.indices.reserve(static_cast<size_t>(k));
    for (const auto& c : s.heap) res.indices.push_back(c.second);
    res.radius = std::sqrt(s.heap.back().first);
    return res;
  }

 private:
  static constexpr int kLeafSize = 32;
  using Cand = std::pair<double, int>;  // (squared distance, index)

  struct Node {
    int lo = 0, hi = 0;         // leaf range into idx_
    int axis = -1;              // -1 for leaf
    double split = 0.0;
    int left = -1, right = -1;
  };

  struct Search {
    std::span<const double> x;
    int k;
    std::vector<Cand> heap;  // max-heap on (d2, index)
  };

  int build(int lo, int hi) {
    Node node;
    node.lo = lo;
    node.hi = hi;
    if (hi - lo <= kLeafSize) {
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    // Split the widest coordinate at the median point.
    int axis = 0;
    double best_spread = -1.0;
    for (int k = 0; k < d_; ++k) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (int i = lo; i < hi; ++i) {
        const double v = coord(idx_[static_cast<size_t>(i)], k);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      if (mx - mn > best_spread) {
        best_spread = mx - mn;
        axis = k;
      }
    }
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [this, axis](int a, int b) {
                       const double va = coord(a, axis), vb = coord(b, axis);
                       return va < vb || (va == vb && a < b);
                     });
    node.axis = axis;
    node.split = coord(idx_[static_cast<size_t>(mid)], axis);
    nodes_.push_back(node);
    const int me = static_cast<int>(nodes_.size()) - 1;
    const int left = build(lo, mid);
    const int right = build(mid, hi);
    nodes_[static_cast<size_t>(me)].left = left;
    nodes_[static_cast<size_t>(me)].right = right;
    return me;
  }

  double coord(int i, int k) const {
    return ds_->xs[static_cast<size_t>(i) * d_ + static_cast<size_t>(k)];
  }

  double dist2(std::span<const double> x, int i) const {
    double s = 0.0;
    for (int k = 0; k < d_; ++k) {
      const double t = x[static_cast<size_t>(k)] - coord(i, k);
      s += t * t;
    }
    return s;
  }

  static bool closer(const Cand& a, const Cand& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  }

  void offer(Search& s, int i) const {
    const Cand c{dist2(s.x, i), i};
    if (static_cast<int>(s.heap.size()) < s.k) {
      s.heap.push_back(c);
      std::push_heap(s.heap.begin(), s.heap.end());
    } else if (closer(c, s.heap.front())) {
      std::pop_heap(s.heap.begin(), s.heap.end());
      s.heap.back() = c;
      std::push_heap(s.heap.begin(), s.heap.end());
    }
  }

  void search(int node_id, Search& s) const {
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    if (node.axis < 0) {
      for (int i = node.lo; i < node.hi; ++i) offer(s, idx_[static_cast<size_t>(i)]);
      return;
    }
    const double dx = s.x[static_cast<size_t>(node.axis)] - node.split;
    const int near = dx < 0.0 ? node.left : node.right;
    const int far = dx < 0.0 ? node.right : node.left;
    search(near, s);
    // Visit the far side unless it is strictly outside the current worst
    // distance; equal distances must be explored for index tie-breaking.
    if (static_cast<int>(s.heap.size()) < s.k || dx * dx <= s.heap.front().first) search(far, s);
  }

  const Dataset* ds_;
  int d_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

/// Distance to the k-th nearest sample point and the tie-broken index
/// set, so that the local map B(x, radius) carries empirical mass k/n.
inline KnnResult knn_radius(const Dataset& ds, std::span<const double> x, int k) {
  return KdTree(ds).query(x, k);
}

/// Average response among the k nearest neighbors of x.
inline double knn_predict(const Dataset& ds, std::span<const double> x, int k) {
  const KnnResult r = knn_radius(ds, x, k);
  double sum = 0.0;
  for (int i : r.indices) sum += ds.y[static_cast<size_t>(i)];
  return sum / static_cast<double>(k);
}

inline double knn_predict(const Dataset& ds, const KdTree& tree, std::span<const double> x, int k) {
  const KnnResult r = tree.query(x, k);
  double sum = 0.0;
  for (int i : r.indices) sum += ds.y[static_cast<size_t>(i)];
  return sum / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Fixed grid partitions
// ---------------------------------------------------------------------------

/// Fixed hyper-rectangle partition of [0,1]^d given per-coordinate cut
/// sequences 0 = u_0 < ... < u_{N_k} = 1.
class FixedGrid {
 public:
  explicit FixedGrid(std::vector<std::vector<double>> cuts) : cuts_(std::move(cuts)) {
    if (cuts_.empty()) throw std::invalid_argument("FixedGrid: need at least one coordinate");
    for (const auto& c : cuts_) {
      if (c.size() < 2 || c.front() != 0.0 || c.back() != 1.0)
        throw std::invalid_argument("FixedGrid: cuts must run from 0 to 1");
      for (size_t i = 1; i < c.size(); ++i)
        if (!(c[i - 1] < c[i])) throw std::invalid_argument("FixedGrid: cuts must be strictly increasing");
    }
  }

  int dim() const { return static_cast<int>(cuts_.size()); }

  long long num_cells() const {
    long long m = 1;
    for (const auto& c : cuts_) m *= static_cast<long long>(c.size()) - 1;
    return m;
  }

  /// Per-coordinate cell index of x; boundary points belong to the lower
  /// cell, coordinate 0 to the first one.
  int coord_index(int k, double v) const {
    const auto& c = cuts_[static_cast<size_t>(k)];
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("FixedGrid: x outside [0,1]^d");
    const auto it = std::lower_bound(c.begin(), c.end(), v);
    int idx = static_cast<int>(it - c.begin()) - 1;
    if (idx < 0) idx = 0;
    if (idx > static_cast<int>(c.size()) - 2) idx = static_cast<int>(c.size()) - 2;
    return idx;
  }

  long long cell_index(std::span<const double> x) const {
    long long idx = 0;
    for (int k = 0; k < dim(); ++k)
      idx = idx * (static_cast<long long>(cuts_[static_cast<size_t>(k)].size()) - 1) +
            coord_index(k, x[static_cast<size_t>(k)]);
    return idx;
  }

  HyperRectangle locate(std::span<const double> x) const {
    std::vector<double> lo(static_cast<size_t>(dim())), hi(static_cast<size_t>(dim()));
    for (int k = 0; k < dim(); ++k) {
      const int i = coord_index(k, x[static_cast<size_t>(k)]);
      lo[static_cast<size_t>(k)] = cuts_[static_cast<size_t>(k)][static_cast<size_t>(i)];
      hi[static_cast<size_t>(k)] = cuts_[static_cast<size_t>(k)][static_cast<size_t>(i) + 1];
    }
    return HyperRectangle(std::move(lo), std::move(hi));
  }

  const std::vector<std::vector<double>>& cuts() const { return cuts_; }

 private:
  std::vector<std::vector<double>> cuts_;
};

inline FixedGrid fixed_grid_map(std::vector<std::vector<double>> cuts) {
  return FixedGrid(std::move(cuts));
}

/// Equispaced grid with `cells` cells per coordinate.
inline FixedGrid uniform_grid(int d, int cells) {
  if (d < 1 || cells < 1) throw std::invalid_argument("uniform_grid: d, cells must be >= 1");
  std::vector<double> cut(static_cast<size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) cut[static_cast<size_t>(i)] = static_cast<double>(i) / cells;
  cut.front() = 0.0;
  cut.back() = 1.0;
  return FixedGrid(std::vector<std::vector<double>>(static_cast<size_t>(d), cut));
}

/// Fixed grid estimator with precomputed cell means (0 for empty cells).
struct GridModel {
  FixedGrid grid;
  std::vector<double> cell_mean;
  std::vector<long long> cell_count;

  double predict(std::span<const double> x) const {
    return cell_mean[static_cast<size_t>(grid.cell_index(x))];
  }
};

inline GridModel fit_grid(const Dataset& ds, FixedGrid grid) {
  if (grid.dim() != ds.d) throw std::invalid_argument("fit_grid: dimension mismatch");
  GridModel m{std::move(grid), {}, {}};
  const size_t cells = static_cast<size_t>(m.grid.num_cells());
  std::vector<double> sum(cells, 0.0);
  m.cell_count.assign(cells, 0);
  for (int i = 0; i < ds.n(); ++i) {
    const size_t c = static_cast<size_t>(m.grid.cell_index(ds.x(i)));
    sum[c] += ds.y[static_cast<size_t>(i)];
    ++m.cell_count[c];
  }
  m.cell_mean.assign(cells, 0.0);
  for (size_t c = 0; c < cells; ++c)
    if (m.cell_count[c] > 0) m.cell_mean[c] = sum[c] / static_cast<double>(m.cell_count[c]);
  return m;
}

// ---------------------------------------------------------------------------
// Shape-regular recursive trees
// ---------------------------------------------------------------------------

/// A split of a cell: coordinate p in {1..d} (1-based, as serialized)
/// and fraction u in (0,1) of the side length.
struct SplitSpec {
  int p = 1;
  double u = 0.5;
};

/// Split cost evaluated on the dataset restricted to the cell.
/// `cell_indices` lists the sample indices inside `cell`.
using CostFunction = std::function<double(const SplitSpec&, const HyperRectangle&, const Dataset&,
                                          const std::vector<int>&)>;

namespace detail {

inline double split_threshold(const HyperRectangle& cell, const SplitSpec& s) {
  const size_t k = static_cast<size_t>(s.p - 1);
  return cell.lower[k] + (cell.upper[k] - cell.lower[k]) * s.u;
}

struct ChildStats {
  long long left_count = 0, right_count = 0;
  double cost = 0.0;
};

}  // namespace detail

/// Sum over the two children of the within-child mean squared residual:
/// sum_{i in left}(Y_i - mean_left)^2 / n_left + (same on the right).
/// Both children must contain at least one sample point.
inline double cart_cost(const SplitSpec& split, const HyperRectangle& cell, const Dataset& ds) {
  if (split.p < 1 || split.p > cell.dim()) throw std::invalid_argument("cart_cost: bad coordinate");
  if (!(split.u > 0.0 && split.u < 1.0)) throw std::invalid_argument("cart_cost: u must be in (0,1)");
  const double c = detail::split_threshold(cell, split);
  const size_t k = static_cast<size_t>(split.p - 1);
  double sum_l = 0.0, sum_r = 0.0;
  long long n_l = 0, n_r = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const auto xi = ds.x(i);
    if (!cell_contains(cell, xi)) continue;
    if (xi[k] <= c) {
      sum_l += ds.y[static_cast<size_t>(i)];
      ++n_l;
    } else {
      sum_r += ds.y[static_cast<size_t>(i)];
      ++n_r;
    }
  }
  if (n_l == 0 || n_r == 0) throw std::invalid_argument("cart_cost: empty child");
  const double mean_l = sum_l / static_cast<double>(n_l);
  const double mean_r = sum_r / static_cast<double>(n_r);
  double ss_l = 0.0, ss_r = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    const auto xi = ds.x(i);
    if (!cell_contains(cell, xi)) continue;
    const double yi = ds.y[static_cast<size_t>(i)];
    if (xi[k] <= c) {
      ss_l += (yi - mean_l) * (yi - mean_l);
    } else {
      ss_r += (yi - mean_r) * (yi - mean_r);
    }
  }
  return ss_l / static_cast<double>(n_l) + ss_r / static_cast<double>(n_r);
}

struct CartOptions {
  /// When true, a cell with enough points but no shape-regular balanced
  /// split is force-split at the middle of its largest side, which can
  /// create children with fewer than m points.  The default refuses such
  /// splits and keeps the cell as a leaf, preserving the >= m leaf-count
  /// guarantee.
  bool literal_fallback = false;
  int max_depth = 60;
};

class PartitionTree {
 public:
  struct Node {
    HyperRectangle cell;
    int left = -1, right = -1;  // -1 on leaves
    SplitSpec split{};
    std::vector<int> leaf_indices;
    double leaf_mean = 0.0;
    int depth = 0;

    bool is_leaf() const { return left < 0; }
  };

  int dim() const { return d_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }

  int locate_node(std::span<const double> x) const {
    if (!cell_contains(nodes_.front().cell, x))
      throw std::invalid_argument("tree_locate: x outside root cell");
    int id = 0;
    while (!nodes_[static_cast<size_t>(id)].is_leaf()) {
      const Node& node = nodes_[static_cast<size_t>(id)];
      const double c = detail::split_threshold(node.cell, node.split);
      id = x[static_cast<size_t>(node.split.p - 1)] <= c ? node.left : node.right;
    }
    return id;
  }

  const HyperRectangle& locate(std::span<const double> x) const {
    return nodes_[static_cast<size_t>(locate_node(x))].cell;
  }

  double predict(std::span<const double> x) const {
    return nodes_[static_cast<size_t>(locate_node(x))].leaf_mean;
  }

  std::vector<int> leaf_ids() const {
    std::vector<int> ids;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
      if (nodes_[static_cast<size_t>(i)].is_leaf()) ids.push_back(i);
    return ids;
  }

  friend PartitionTree cart_build(const Dataset&, int, double, const CostFunction&, const CartOptions&);
  friend PartitionTree tree_from_json(const nlohmann::json&);

 private:
  int d_ = 0;
  std::vector<Node> nodes_;
};

namespace detail {

struct CandidateEval {
  bool feasible_m = false;
  bool feasible_beta = false;
  double cost = std::numeric_limits<double>::infinity();
  long long n_left = 0, n_right = 0;
};

// Child shape test: the split replaces side p by widths (c - a) and
// (b - c); both children must satisfy h_+ <= beta h_-.
inline bool children_beta_sr(const HyperRectangle& cell, int p1, double c, double beta) {
  const size_t p = static_cast<size_t>(p1 - 1);
  double other_min = std::numeric_limits<double>::infinity();
  double other_max = 0.0;
  for (int k = 0; k < cell.dim(); ++k) {
    if (static_cast<size_t>(k) == p) continue;
    const double h = cell.side(k);
    other_min = std::min(other_min, h);
    other_max = std::max(other_max, h);
  }
  const double tol = 1.0 + kShapeTol;
  for (const double w : {c - cell.lower[p], cell.upper[p] - c}) {
    if (w <= 0.0) return false;
    const double h_minus = cell.dim() == 1 ? w : std::min(w, other_min);
    const double h_plus = cell.dim() == 1 ? w : std::max(w, other_max);
    if (h_plus > beta * h_minus * tol) return false;
  }
  return true;
}

}  // namespace detail

/// Grows a shape-regular tree on [0,1]^d breadth-first.  Each cell whose
/// feasible split set (both children beta-SR and both children holding
/// at least m points) is non-empty is split at the feasible candidate of
/// minimal cost; candidates per coordinate are the midpoints between
/// consecutive distinct sample values inside the cell plus u = 1/2.
/// Cost ties are broken by smallest coordinate, then smallest u.
inline PartitionTree cart_build(const Dataset& ds, int m, double beta,
                                const CostFunction& cost = {},
                                const CartOptions& opts = {}) {
  ds.validate();
  if (m < 1 || m > ds.n()) throw std::invalid_argument("cart_build: need 1 <= m <= n");
  if (!(beta >= 2.0)) throw std::invalid_argument("cart_build: beta must be >= 2");

  PartitionTree tree;
  tree.d_ = ds.d;
  PartitionTree::Node root;
  root.cell = HyperRectangle(std::vector<double>(static_cast<size_t>(ds.d), 0.0),
                             std::vector<double>(static_cast<size_t>(ds.d), 1.0));
  root.leaf_indices.resize(static_cast<size_t>(ds.n()));
  for (int i = 0; i < ds.n(); ++i) root.leaf_indices[static_cast<size_t>(i)] = i;
  tree.nodes_.push_back(std::move(root));

  std::vector<int> queue{0};
  std::vector<double> values;  // sorted sample values along one coordinate
  std::vector<double> prefix_y, prefix_y2;

  for (size_t q = 0; q < queue.size(); ++q) {
    const int id = queue[q];
    // Copy out what we need: nodes_ may reallocate when children are added.
    const HyperRectangle cell = tree.nodes_[static_cast<size_t>(id)].cell;
    const std::vector<int> indices = tree.nodes_[static_cast<size_t>(id)].leaf_indices;
    const int depth = tree.nodes_[static_cast<size_t>(id)].depth;
    const long long count = static_cast<long long>(indices.size());

    bool has_best = false;
    SplitSpec best{};
    double best_cost = std::numeric_limits<double>::infinity();

    if (count >= 2 * m && depth < opts.max_depth) {
      for (int p = 1; p <= ds.d; ++p) {
        const size_t pk = static_cast<size_t>(p - 1);
        const double a = cell.lower[pk], b = cell.upper[pk];
        if (!(b - a > 0.0)) continue;

        // Sort indices by coordinate value; ties by index for determinism.
        std::vector<int> order = indices;
        std::sort(order.begin(), order.end(), [&](int i, int j) {
          const double vi = ds.x(i)[pk], vj = ds.x(j)[pk];
          return vi < vj || (vi == vj && i < j);
        });
        values.resize(order.size());
        prefix_y.assign(order.size() + 1, 0.0);
        prefix_y2.assign(order.size() + 1, 0.0);
        for (size_t t = 0; t < order.size(); ++t) {
          values[t] = ds.x(order[t])[pk];
          const double yv = ds.y[static_cast<size_t>(order[t])];
          prefix_y[t + 1] = prefix_y[t] + yv;
          prefix_y2[t + 1] = prefix_y2[t] + yv * yv;
        }

        // Candidate fractions: midpoints of consecutive distinct values
        // rescaled to the cell, plus 1/2, deduplicated.
        std::vector<double> us;
        for (size_t t = 0; t + 1 < values.size(); ++t) {
          if (values[t] < values[t + 1]) {
            const double u = (0.5 * (values[t] + values[t + 1]) - a) / (b - a);
            if (u > 0.0 && u < 1.0) us.push_back(u);
          }
        }
        us.push_back(0.5);
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end()), us.end());

        for (const double u : us) {
          const SplitSpec s{p, u};
          const double c = detail::split_threshold(cell, s);
          // Exact routing count: points with value <= c go left.
          const long long n_l =
              std::upper_bound(values.begin(), values.end(), c) - values.begin();
          const long long n_r = count - n_l;
          if (n_l < m || n_r < m) continue;
          if (!detail::children_beta_sr(cell, p, c, beta)) continue;
          double cand_cost;
          if (cost) {
            cand_cost = cost(s, cell, ds, indices);
          } else {
            const size_t ul = static_cast<size_t>(n_l);
            const double mean_l = prefix_y[ul] / static_cast<double>(n_l);
            const double mean_r = (prefix_y.back() - prefix_y[ul]) / static_cast<double>(n_r);
            const double ss_l = prefix_y2[ul] - static_cast<double>(n_l) * mean_l * mean_l;
            const double ss_r =
                (prefix_y2.back() - prefix_y2[ul]) - static_cast<double>(n_r) * mean_r * mean_r;
            cand_cost = ss_l / static_cast<double>(n_l) + ss_r / static_cast<double>(n_r);
          }
          if (!has_best || cand_cost < best_cost) {
            has_best = true;
            best_cost = cand_cost;
            best = s;
          }
        }
      }

      if (!has_best && opts.literal_fallback) {
        // Literal fallback: a cell with a non-empty balanced split set
        // but no shape-regular balanced split is halved on its largest
        // side, even if that starves a child below m points.
        bool s_m_nonempty = false;
        for (int p = 1; p <= ds.d && !s_m_nonempty; ++p) {
          const size_t pk = static_cast<size_t>(p - 1);
          std::vector<double> vals;
          vals.reserve(indices.size());
          for (int i : indices) vals.push_back(ds.x(i)[pk]);
          std::sort(vals.begin(), vals.end());
          // A cut between sorted positions t and t+1 leaves t+1 points on
          // the left; it is balanced when both sides hold >= m.
          for (size_t t = static_cast<size_t>(m) - 1; t + static_cast<size_t>(m) < vals.size(); ++t) {
            if (vals[t] < vals[t + 1]) {
              s_m_nonempty = true;
              break;
            }
          }
        }
        if (s_m_nonempty) {
          int p = 1;
          double widest = cell.side(0);
          for (int k = 1; k < ds.d; ++k)
            if (cell.side(k) > widest) {
              widest = cell.side(k);
              p = k + 1;
            }
          if (widest > 1e-12) {
            best = SplitSpec{p, 0.5};
            has_best = true;
          }
        }
      }
    }

    if (!has_best) {
      // Leaf: freeze the local mean (ascending-index sum, matching
      // local_mean over the leaf cell).
      double sum = 0.0;
      for (int i : indices) sum += ds.y[static_cast<size_t>(i)];
      tree.nodes_[static_cast<size_t>(id)].leaf_mean =
          indices.empty() ? 0.0 : sum / static_cast<double>(count);
      continue;
    }

    const double c = detail::split_threshold(cell, best);
    const size_t pk = static_cast<size_t>(best.p - 1);
    PartitionTree::Node left, right;
    left.cell = cell;
    left.cell.upper[pk] = c;
    right.cell = cell;
    right.cell.lower[pk] = c;
    left.depth = right.depth = depth + 1;
    for (int i : indices) {
      if (ds.x(i)[pk] <= c)
        left.leaf_indices.push_back(i);
      else
        right.leaf_indices.push_back(i);
    }
    const int left_id = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back(std::move(left));
    const int right_id = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back(std::move(right));
    auto& me = tree.nodes_[static_cast<size_t>(id)];
    me.split = best;
    me.left = left_id;
    me.right = right_id;
    me.leaf_indices.clear();
    queue.push_back(left_id);
    queue.push_back(right_id);
  }
  return tree;
}

inline const HyperRectangle& tree_locate(const PartitionTree& tree, std::span<const double> x) {
  return tree.locate(x);
}

/// Local mean of the given sample over the located leaf (ascending-index
/// sum, identical to local_mean over the leaf cell).
inline double tree_predict(const PartitionTree& tree, const Dataset& ds, std::span<const double> x) {
  const auto& node = tree.nodes()[static_cast<size_t>(tree.locate_node(x))];
  if (node.leaf_indices.empty()) return 0.0;
  double sum = 0.0;
  for (int i : node.leaf_indices) sum += ds.y[static_cast<size_t>(i)];
  return sum / static_cast<double>(node.leaf_indices.size());
}

// ---------------------------------------------------------------------------
// Tree serialization
// ---------------------------------------------------------------------------

inline constexpr int kTreeSchemaVersion = 1;

namespace detail {

inline nlohmann::json node_to_json(const PartitionTree& tree, int id) {
  const auto& node = tree.nodes()[static_cast<size_t>(id)];
  nlohmann::json j;
  j["lower"] = node.cell.lower;
  j["upper"] = node.cell.upper;
  if (node.is_leaf()) {
    j["split"] = nullptr;
    j["children"] = nlohmann::json::array();
    j["leaf_indices"] = node.leaf_indices;
  } else {
    j["split"] = {{"p", node.split.p}, {"u", node.split.u}};
    j["children"] = {node_to_json(tree, node.left), node_to_json(tree, node.right)};
    j["leaf_indices"] = nlohmann::json::array();
  }
  return j;
}

inline int node_from_json(const nlohmann::json& j, PartitionTree& tree, int depth,
                          std::vector<PartitionTree::Node>& nodes);

}  // namespace detail

inline nlohmann::json tree_to_json(const PartitionTree& tree) {
  nlohmann::json j;
  j["schema_version"] = kTreeSchemaVersion;
  j["d"] = tree.dim();
  j["root"] = detail::node_to_json(tree, 0);
  return j;
}

inline PartitionTree tree_from_json(const nlohmann::json& j) {
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kTreeSchemaVersion)
    throw std::runtime_error("tree_from_json: unsupported schema version");
  PartitionTree tree;
  tree.d_ = j.at("d").get<int>();
  std::function<int(const nlohmann::json&, int)> rec = [&](const nlohmann::json& nj, int depth) -> int {
    PartitionTree::Node node;
    node.cell = HyperRectangle(nj.at("lower").get<std::vector<double>>(),
                               nj.at("upper").get<std::vector<double>>());
    node.depth = depth;
    const int id = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back(node);
    if (!nj.at("split").is_null()) {
      SplitSpec s;
      s.p = nj.at("split").at("p").get<int>();
      s.u = nj.at("split").at("u").get<double>();
      const int left = rec(nj.at("children").at(0), depth + 1);
      const int right = rec(nj.at("children").at(1), depth + 1);
      tree.nodes_[static_cast<size_t>(id)].split = s;
      tree.nodes_[static_cast<size_t>(id)].left = left;
      tree.nodes_[static_cast<size_t>(id)].right = right;
    } else {
      tree.nodes_[static_cast<size_t>(id)].leaf_indices =
          nj.at("leaf_indices").get<std::vector<int>>();
    }
    return id;
  };
  rec(j.at("root"), 0);
  return tree;
}

/// Recomputes leaf means from a dataset (used after deserializing, where
/// the tree alone carries no responses).
inline void refresh_leaf_means(PartitionTree& tree, const Dataset& ds) {
  auto& nodes = const_cast<std::vector<PartitionTree::Node>&>(tree.nodes());
  for (auto& node : nodes) {
    if (!node.is_leaf()) continue;
    double sum = 0.0;
    for (int i : node.leaf_indices) {
      if (i < 0 || i >= ds.n()) throw std::runtime_error("refresh_leaf_means: index out of range");
      sum += ds.y[static_cast<size_t>(i)];
    }
    node.leaf_mean = node.leaf_indices.empty()
                         ? 0.0
                         : sum / static_cast<double>(node.leaf_indices.size());
  }
}

}  // namespace locreg
