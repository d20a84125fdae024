#include "lapsekit/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lapsekit/error.hpp"
#include "lapsekit/random.hpp"

namespace lapsekit::cart {
namespace {

double impurity(double positives, double n) { return n > 0 ? positives * (n - positives) / n : 0.0; }

// Misclassified count if the node were a leaf; ties predict class 0.
long long leaf_errors(const Node& node) {
  const auto n = static_cast<long long>(node.n_obs);
  const auto pos = std::llround(node.proportion * static_cast<double>(node.n_obs));
  return 2 * pos > n ? n - pos : pos;
}

Node make_node(std::span<const int> y, std::span<const std::size_t> rows) {
  Node node;
  std::size_t pos = 0;
  for (auto r : rows) pos += y[r] != 0;
  node.n_obs = rows.size();
  node.proportion = rows.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(rows.size());
  node.predicted_class = 2 * pos > rows.size() ? 1 : 0;
  return node;
}

}  // namespace

double gini_impurity(std::span<const int> labels) {
  if (labels.empty()) throw InputError("gini_impurity: empty node");
  const auto pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; }));
  const auto n = static_cast<double>(labels.size());
  const double p = pos / n;
  return n * p * (1.0 - p);
}

std::optional<Split> best_split(const Matrix& x, std::span<const int> y,
                                std::span<const std::size_t> rows, std::size_t min_node_size,
                                bool allow_zero_gain) {
  const std::size_t n = rows.size();
  min_node_size = std::max<std::size_t>(min_node_size, 1);
  if (n < 2 * min_node_size) return std::nullopt;

  double total_pos = 0.0;
  for (auto r : rows) total_pos += y[r] != 0;
  const double parent = impurity(total_pos, static_cast<double>(n));
  if (parent <= 0.0) return std::nullopt;

  std::optional<Split> best;
  std::vector<std::pair<double, int>> col(n);
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t i = 0; i < n; ++i) col[i] = {x(rows[i], f), y[rows[i]] != 0};
    std::sort(col.begin(), col.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_pos = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      left_pos += col[i - 1].second;
      if (!(col[i - 1].first < col[i].first)) continue;
      if (i < min_node_size || n - i < min_node_size) continue;
      const auto nl = static_cast<double>(i);
      const auto nr = static_cast<double>(n - i);
      double gain = parent - impurity(left_pos, nl) - impurity(total_pos - left_pos, nr);
      if (gain < 0.0 && gain > -1e-9 * parent) gain = 0.0;
      const bool admissible = allow_zero_gain ? gain >= 0.0 : gain > 0.0;
      if (!admissible) continue;
      if (!best || gain > best->gain) {
        double threshold = 0.5 * (col[i - 1].first + col[i].first);
        if (!(threshold < col[i].first)) threshold = col[i - 1].first;
        best = Split{f, threshold, gain};
      }
    }
  }
  return best;
}

std::vector<Node> grow_saturated(const Matrix& x, std::span<const int> y,
                                 std::span<const std::size_t> rows, std::size_t min_node_size) {
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
  };
  std::vector<Node> nodes;
  nodes.push_back(make_node(y, rows));
  std::vector<Pending> stack;
  stack.push_back({0, std::vector<std::size_t>(rows.begin(), rows.end())});
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const auto split = best_split(x, y, cur.rows, min_node_size, /*allow_zero_gain=*/true);
    if (!split) continue;
    std::vector<std::size_t> left, right;
    for (auto r : cur.rows) (x(r, split->feature) <= split->threshold ? left : right).push_back(r);
    const int li = static_cast<int>(nodes.size());
    nodes.push_back(make_node(y, left));
    const int ri = static_cast<int>(nodes.size());
    nodes.push_back(make_node(y, right));
    Node& parent = nodes[static_cast<std::size_t>(cur.node)];
    parent.feature = static_cast<int>(split->feature);
    parent.threshold = split->threshold;
    parent.left = li;
    parent.right = ri;
    // right pushed first so the left subtree is expanded first
    stack.push_back({ri, std::move(right)});
    stack.push_back({li, std::move(left)});
  }
  return nodes;
}

PruningPath pruning_path(const std::vector<Node>& nodes) {
  const double inf = std::numeric_limits<double>::infinity();
  PruningPath path;
  path.collapse_alpha.assign(nodes.size(), inf);
  std::vector<char> collapsed(nodes.size(), 0);
  std::vector<long long> subtree_err(nodes.size());
  std::vector<std::size_t> subtree_leaves(nodes.size());
  std::vector<double> link(nodes.size(), inf);

  // Post-order refresh of subtree errors, leaf counts and weakest-link values.
  // Children always have larger indices than their parent.
  const auto refresh = [&] {
    for (std::size_t i = nodes.size(); i-- > 0;) {
      const Node& n = nodes[i];
      if (n.is_leaf() || collapsed[i]) {
        subtree_err[i] = leaf_errors(n);
        subtree_leaves[i] = 1;
        link[i] = inf;
      } else {
        const auto l = static_cast<std::size_t>(n.left), r = static_cast<std::size_t>(n.right);
        subtree_err[i] = subtree_err[l] + subtree_err[r];
        subtree_leaves[i] = subtree_leaves[l] + subtree_leaves[r];
        link[i] = static_cast<double>(leaf_errors(n) - subtree_err[i]) /
                  static_cast<double>(subtree_leaves[i] - 1);
      }
    }
  };
  // Nodes below a collapsed ancestor are unreachable and never chosen.
  const auto reachable_min = [&] {
    double best = inf;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      if (nodes[i].is_leaf() || collapsed[i]) continue;
      best = std::min(best, link[i]);
      stack.push_back(static_cast<std::size_t>(nodes[i].left));
      stack.push_back(static_cast<std::size_t>(nodes[i].right));
    }
    return best;
  };
  const auto collapse_upto = [&](double alpha) {
    bool any = true;
    while (any) {
      any = false;
      refresh();
      std::vector<std::size_t> stack{0};
      while (!stack.empty()) {
        const auto i = stack.back();
        stack.pop_back();
        if (nodes[i].is_leaf() || collapsed[i]) continue;
        if (link[i] <= alpha + 1e-12 * std::max(1.0, std::abs(alpha))) {
          collapsed[i] = 1;
          path.collapse_alpha[i] = alpha;
          any = true;
          continue;
        }
        stack.push_back(static_cast<std::size_t>(nodes[i].left));
        stack.push_back(static_cast<std::size_t>(nodes[i].right));
      }
    }
    refresh();
  };

  collapse_upto(0.0);
  path.alphas.push_back(0.0);
  path.leaves.push_back(subtree_leaves[0]);
  while (subtree_leaves[0] > 1) {
    const double alpha = std::max(reachable_min(), path.alphas.back());
    collapse_upto(alpha);
    path.alphas.push_back(alpha);
    path.leaves.push_back(subtree_leaves[0]);
  }
  return path;
}

int predict_pruned(const std::vector<Node>& nodes, const std::vector<double>& collapse_alpha,
                   double alpha, std::span<const double> x) {
  std::size_t i = 0;
  while (!nodes[i].is_leaf() && collapse_alpha[i] > alpha) {
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                     ? nodes[i].left
                                     : nodes[i].right);
  }
  return nodes[i].predicted_class;
}

namespace {

std::vector<Node> materialize(const std::vector<Node>& nodes, const std::vector<double>& collapse_alpha,
                              double alpha) {
  std::vector<Node> out;
  struct Item {
    std::size_t src;
    std::size_t dst;
  };
  out.push_back(nodes[0]);
  std::vector<Item> stack{{0, 0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const Node& src = nodes[it.src];
    if (src.is_leaf() || collapse_alpha[it.src] <= alpha) {
      out[it.dst].feature = -1;
      out[it.dst].threshold = 0.0;
      out[it.dst].left = out[it.dst].right = -1;
      continue;
    }
    const auto li = out.size();
    out.push_back(nodes[static_cast<std::size_t>(src.left)]);
    const auto ri = out.size();
    out.push_back(nodes[static_cast<std::size_t>(src.right)]);
    out[it.dst].left = static_cast<int>(li);
    out[it.dst].right = static_cast<int>(ri);
    stack.push_back({static_cast<std::size_t>(src.right), ri});
    stack.push_back({static_cast<std::size_t>(src.left), li});
  }
  return out;
}

}  // namespace

Model::Model(std::vector<Node> nodes, std::size_t width, std::vector<PruningStep> trace)
    : nodes_(std::move(nodes)), width_(width), trace_(std::move(trace)) {
  if (nodes_.empty()) throw InputError("cart model needs at least one node");
  n_leaves_ = static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

int Model::predict_one(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const Node& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].predicted_class;
}

std::vector<int> Model::predict(const Matrix& x) const {
  require_width(x, width_, "cart::predict");
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_one(x.row(i));
  return out;
}

Model fit(const Matrix& x, std::span<const int> y, const Params& params) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw ShapeError("cart::fit: labels and features differ in length");
  if (n == 0) throw InputError("cart::fit: empty training set");
  const bool cross_validate = params.cv_folds >= 2;
  if (cross_validate && n < params.cv_folds) {
    throw InputError("cart::fit: need at least cv_folds = " + std::to_string(params.cv_folds) + " rows");
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  auto nodes = grow_saturated(x, y, all, params.min_node_size);

  const bool pure = nodes.size() == 1 && (nodes[0].proportion == 0.0 || nodes[0].proportion == 1.0);
  if (pure) return Model(std::move(nodes), x.cols(), {PruningStep{1, 0.0, 0.0}});
  if (!cross_validate) return Model(std::move(nodes), x.cols(), {});

  const PruningPath path = pruning_path(nodes);
  const std::size_t steps = path.alphas.size();
  std::vector<double> probe(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    probe[k] = k + 1 < steps ? std::sqrt(path.alphas[k] * path.alphas[k + 1])
                             : std::numeric_limits<double>::infinity();
  }

  std::vector<std::size_t> fold(n);
  {
    Rng rng(params.seed);
    const auto perm = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % params.cv_folds;
  }
  std::vector<long long> errors(steps, 0);
  for (std::size_t v = 0; v < params.cv_folds; ++v) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == v ? held : train).push_back(i);
    const auto fold_nodes = grow_saturated(x, y, train, params.min_node_size);
    const auto fold_path = pruning_path(fold_nodes);
    for (std::size_t k = 0; k < steps; ++k) {
      for (auto i : held) {
        errors[k] += predict_pruned(fold_nodes, fold_path.collapse_alpha, probe[k], x.row(i)) != y[i];
      }
    }
  }

  std::size_t chosen = 0;
  for (std::size_t k = 1; k < steps; ++k) {
    if (errors[k] <= errors[chosen]) chosen = k;
  }
  std::vector<PruningStep> trace;
  for (std::size_t k = 0; k < steps; ++k) {
    trace.push_back({path.leaves[k], path.alphas[k], static_cast<double>(errors[k]) / static_cast<double>(n)});
  }
  return Model(materialize(nodes, path.collapse_alpha, path.alphas[chosen]), x.cols(), std::move(trace));
}

}  // namespace lapsekit::cart
