#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lapsekit/boosting.hpp"
#include "lapsekit/cart.hpp"
#include "lapsekit/economics.hpp"
#include "lapsekit/linear.hpp"
#include "lapsekit/portfolio.hpp"
#include "lapsekit/svm.hpp"

namespace lapsekit::eval {

// ---------------------------------------------------------------------------
// Model families
// ---------------------------------------------------------------------------

using ModelSpec = std::variant<linear::Params, cart::Params, svm::Params, boost::Params>;
using AnyModel = std::variant<linear::Model, cart::Model, svm::Model, boost::Model>;

/// "logit", "cart", "svm", "boost" (or "boost-profit" for squared-error boosting).
std::string family_tag(const ModelSpec& spec);

/// Fits the family on labels. seed overrides the seed inside stochastic params.
AnyModel fit_model(const ModelSpec& spec, const Matrix& x, std::span<const int> labels,
                   std::uint64_t seed);
std::vector<int> predict_classes(const AnyModel& model, const Matrix& x);

// ---------------------------------------------------------------------------
// Cross-validation protocol
// ---------------------------------------------------------------------------

/// TrainOnOne fits on a single fold and tests on the other nine;
/// Conventional is ordinary k-fold (train on nine, test on one).
enum class Orientation { TrainOnOne, Conventional };

std::string_view to_string(Orientation o);
Orientation parse_orientation(std::string_view name);

struct SplitPlan {
  std::vector<std::size_t> fold;  // fold id per observation, 0-based
  std::size_t n_folds = 10;
  std::uint64_t seed = 0;

  /// Seeded shuffle, then round-robin: fold sizes differ by at most one.
  static SplitPlan make(std::size_t n, std::size_t n_folds, std::uint64_t seed);
  std::vector<std::size_t> members(std::size_t k) const;
  std::vector<std::size_t> complement(std::size_t k) const;
};

double accuracy(const ConfusionMatrix& cm);

struct NamedEconomics {
  std::string name;
  EconomicParams params;
};

struct FoldResult {
  std::size_t fold = 0;
  bool failed = false;
  std::string error;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ConfusionMatrix cm;
  double accuracy = 0.0;
  std::vector<double> retention_gain;  // one per strategy, in report order

  friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1); NaN with fewer than two folds
  std::size_t n = 0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

Summary summarize(const std::vector<double>& values);

struct EvaluationReport {
  std::string model;             // family tag
  std::string target_strategy;   // profit runs only
  std::vector<std::string> strategies;
  std::string params_json;       // compact parameter record
  Orientation orientation = Orientation::TrainOnOne;
  std::uint64_t seed = 0;
  std::size_t n_observations = 0;
  std::vector<FoldResult> folds;
  Summary accuracy;
  std::vector<Summary> retention_gain;
  /// Per observation: how often it was trained on / tested on.
  std::vector<std::uint32_t> train_count;
  std::vector<std::uint32_t> test_count;
  std::string sd_convention = "sample (n-1)";

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

struct ProtocolOptions {
  Orientation orientation = Orientation::TrainOnOne;
  std::size_t n_folds = 10;
  std::size_t jobs = 1;
};

EvaluationReport run_protocol(const Dataset& data, const ModelSpec& spec,
                              const std::vector<NamedEconomics>& strategies, std::uint64_t seed,
                              const ProtocolOptions& options = {});

/// Squared-error boosting on profit targets built from `target`, classified
/// by sign of the predicted gain, scored on the same folds and metrics.
EvaluationReport run_profit_protocol(const Dataset& data, const boost::Params& params,
                                     const NamedEconomics& target,
                                     const std::vector<NamedEconomics>& strategies,
                                     std::uint64_t seed, const ProtocolOptions& options = {});

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

struct BoostGrid {
  std::vector<double> eta;
  std::vector<double> gamma;
  std::vector<std::size_t> max_depth;
  std::vector<std::size_t> min_child_weight;
  std::vector<double> subsample;
  std::vector<double> colsample_bytree;
  std::size_t grid_folds = 2;
  std::size_t nrounds_folds = 5;
  std::size_t nrounds_max = 200;

  std::size_t size() const;
  /// Combination k in lexicographic order (eta slowest, colsample fastest).
  boost::Params at(std::size_t k) const;
  static BoostGrid paper_9_1();
};

struct SvmGrid {
  std::vector<double> cost;
  std::vector<double> kernel_gamma;
  std::size_t folds = 2;
  svm::Params base;

  std::size_t size() const { return cost.size() * kernel_gamma.size(); }
  svm::Params at(std::size_t k) const;
  static SvmGrid paper_9_2();
};

struct ProfitTuning {
  boost::Params fixed;  // nrounds ignored
  std::size_t folds = 5;
  std::size_t nrounds_max = 1000;

  static ProfitTuning paper_9_3();
};

struct TuneOptions {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

/// Grid search by CV misclassification, then nrounds by a second CV.
/// Ties go to the first combination / smallest nrounds.
boost::Params tune_boost_classification(const Dataset& data, const BoostGrid& grid,
                                        const TuneOptions& options);
svm::Params tune_svm(const Dataset& data, const SvmGrid& grid, const TuneOptions& options);
/// data.targets must hold profit targets.
boost::Params tune_boost_profit(const Dataset& data, const ProfitTuning& tuning,
                                const TuneOptions& options);

/// Validation curve helper: error (Logistic) or MSE (SquaredError) after
/// each of the model's rounds, summed over rows (not averaged).
std::vector<double> staged_loss_sums(const boost::Model& model, const Matrix& x,
                                     std::span<const double> targets);

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

std::string report_json(const EvaluationReport& report);
EvaluationReport parse_report_json(const std::string& text);
/// One row per fold per metric.
std::string report_csv(const EvaluationReport& report);
/// Base file name: report_<model>_<strategy>_seed<seed>
std::string report_basename(const EvaluationReport& report);

}  // namespace lapsekit::eval
