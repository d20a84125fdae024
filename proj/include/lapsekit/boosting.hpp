#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lapsekit/matrix.hpp"

namespace lapsekit::boost {

enum class Loss { Logistic, SquaredError };

std::string_view to_string(Loss loss);
Loss parse_loss(std::string_view name);

struct Params {
  std::size_t nrounds = 100;        // M
  double eta = 0.1;                 // shrinkage
  double gamma_reg = 0.0;           // minimum split gain (per added leaf)
  std::size_t max_depth = 6;
  std::size_t min_child_weight = 1; // minimum observations per child
  double subsample = 1.0;           // row fraction per tree
  double colsample_bytree = 1.0;    // column fraction per tree
  Loss loss = Loss::Logistic;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const Params&, const Params&) = default;
};

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already multiplied by eta

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  std::size_t n_leaves() const;
  std::size_t depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

class Model {
 public:
  Model() = default;
  Model(double f0, Loss loss, std::size_t width) : f0_(f0), loss_(loss), width_(width) {}
  Model(double f0, Loss loss, std::size_t width, std::vector<Tree> trees, std::vector<double> curve)
      : f0_(f0), loss_(loss), width_(width), trees_(std::move(trees)), curve_(std::move(curve)) {}

  double f0() const noexcept { return f0_; }
  Loss loss() const noexcept { return loss_; }
  std::size_t width() const noexcept { return width_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  const std::vector<double>& training_curve() const noexcept { return curve_; }

  /// f0 plus the sum of every tree's (shrunk) leaf value.
  double score_one(std::span<const double> x) const;
  std::vector<double> predict_score(const Matrix& x) const;
  /// Logistic: 1 iff sigmoid(score) > 0.5. SquaredError: 1 iff score > 0.
  std::vector<int> predict_class(const Matrix& x) const;

  void append(Tree tree, double loss_after) {
    trees_.push_back(std::move(tree));
    curve_.push_back(loss_after);
  }

  friend bool operator==(const Model&, const Model&) = default;

 private:
  double f0_ = 0.0;
  Loss loss_ = Loss::Logistic;
  std::size_t width_ = 0;
  std::vector<Tree> trees_;
  std::vector<double> curve_;
};

double sigmoid(double x);

/// Constant minimizing the loss: log-odds of the positive rate or the mean.
/// A positive rate of 0 or 1 is clamped to [1/N, 1 - 1/N] with a warning.
double initial_score(std::span<const double> targets, Loss loss);

/// Negative gradient of the loss in the score. Squared error drops the
/// uniform 2/N factor; leaf values are means so the scale is irrelevant.
std::vector<double> pseudo_residuals(std::span<const double> targets, std::span<const double> scores,
                                     Loss loss);

/// sum_i y ln(1 + e^-s) + (1 - y) ln(1 + e^s), overflow-safe.
double logistic_loss(std::span<const double> labels, std::span<const double> scores);
/// (1/N) sum_i (z - s)^2
double squared_error_loss(std::span<const double> targets, std::span<const double> scores);
double training_loss(std::span<const double> targets, std::span<const double> scores, Loss loss);
/// Share of rows with y != round(prob), round(p) = 1 iff p > 0.5.
double error_metric(std::span<const int> labels, std::span<const double> probs);

/// Training state between rounds: model so far, current scores on every
/// training row, and per-feature presorted row orders.
class State {
 public:
  State(const Matrix& x, std::span<const double> targets, const Params& params);

  const Model& model() const noexcept { return model_; }
  Model& model() noexcept { return model_; }
  const std::vector<double>& scores() const noexcept { return scores_; }
  std::size_t rounds() const noexcept { return model_.trees().size(); }

 private:
  friend void fit_round(State& state, const Params& params);

  const Matrix* x_;
  std::vector<double> targets_;
  std::vector<std::vector<std::uint32_t>> order_;
  Model model_;
  std::vector<double> scores_;
};

/// One boosting round: subsample rows and columns, fit a regression tree on
/// pseudo-residuals, set leaf values, update every training score.
void fit_round(State& state, const Params& params);

Model fit(const Matrix& x, std::span<const double> targets, const Params& params);
Model fit(const Matrix& x, std::span<const int> labels, const Params& params);

}  // namespace lapsekit::boost
