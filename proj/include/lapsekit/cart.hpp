#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lapsekit/matrix.hpp"

namespace lapsekit::cart {

/// Gini impurity of a node, N_l * p_l * (1 - p_l). Throws InputError if empty.
double gini_impurity(std::span<const int> labels);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;  // rows with x <= threshold go left
  double gain = 0.0;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Exhaustive search over features and midpoints between consecutive
/// distinct sorted values. Each child must keep at least min_node_size rows.
/// Equal gains resolve to the lowest feature index, then the lowest threshold.
/// Returns nothing unless some split has gain > 0 (>= 0 with allow_zero_gain).
std::optional<Split> best_split(const Matrix& x, std::span<const int> y,
                                std::span<const std::size_t> rows, std::size_t min_node_size = 1,
                                bool allow_zero_gain = false);

struct Node {
  // internal
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // every node carries its class statistics; they are the leaf payload
  int predicted_class = 0;
  double proportion = 0.0;
  std::size_t n_obs = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const Node&, const Node&) = default;
};

struct PruningStep {
  std::size_t n_leaves = 0;
  double alpha = 0.0;     // complexity parameter at which this subtree is optimal
  double cv_error = 0.0;  // cross-validated misclassification rate

  friend bool operator==(const PruningStep&, const PruningStep&) = default;
};

struct Params {
  std::size_t min_node_size = 5;
  /// Folds used to choose the subtree size. 0 or 1 keeps the saturated tree.
  std::size_t cv_folds = 10;
  std::uint64_t seed = 0;

  friend bool operator==(const Params&, const Params&) = default;
};

class Model {
 public:
  Model() = default;
  Model(std::vector<Node> nodes, std::size_t width, std::vector<PruningStep> trace);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  std::size_t n_leaves() const noexcept { return n_leaves_; }
  std::size_t width() const noexcept { return width_; }
  const std::vector<PruningStep>& pruning_trace() const noexcept { return trace_; }

  int predict_one(std::span<const double> x) const;
  std::vector<int> predict(const Matrix& x) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  std::vector<Node> nodes_;
  std::size_t width_ = 0;
  std::size_t n_leaves_ = 0;
  std::vector<PruningStep> trace_;
};

/// Saturated tree: splits every impure node that can host two children of
/// min_node_size rows, including zero-gain splits.
std::vector<Node> grow_saturated(const Matrix& x, std::span<const int> y,
                                 std::span<const std::size_t> rows, std::size_t min_node_size);

/// Weakest-link pruning sequence. collapse_alpha[i] is the complexity at
/// which internal node i becomes a leaf; leaves get +inf. The returned steps
/// list (alpha_k, leaves_k) with alpha increasing, ending at the root.
struct PruningPath {
  std::vector<double> collapse_alpha;
  std::vector<double> alphas;
  std::vector<std::size_t> leaves;
};
PruningPath pruning_path(const std::vector<Node>& nodes);

/// Routes a row through the tree pruned at complexity alpha.
int predict_pruned(const std::vector<Node>& nodes, const std::vector<double>& collapse_alpha,
                   double alpha, std::span<const double> x);

/// Grows the saturated tree, then picks the pruned size with the lowest
/// cross-validated misclassification rate (ties toward the smaller tree).
Model fit(const Matrix& x, std::span<const int> y, const Params& params);

}  // namespace lapsekit::cart
