#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lapsekit/matrix.hpp"

namespace lapsekit::svm {

struct Params {
  double cost = 1.0;          // C
  double kernel_gamma = 0.5;  // RBF width
  double tolerance = 1e-3;    // maximal KKT violation at convergence
  /// Iteration budget in units of N pair updates.
  std::size_t max_passes = 100;
  std::uint64_t seed = 0;     // consumed by tuning fold splits, not by SMO
  /// Lifts the 50,000-row guard.
  bool allow_large = false;

  void validate() const;
  friend bool operator==(const Params&, const Params&) = default;
};

inline constexpr std::size_t kMaxRowsWithoutOverride = 50000;

/// exp(-gamma * ||a - b||^2). Throws ShapeError on width mismatch.
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// Dual solution on the full training set, labels in {-1, +1}.
struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double objective = 0.0;  // 1/2 a'Qa - e'a
  bool converged = false;
  std::size_t iterations = 0;
  double max_violation = 0.0;
};

/// Sequential minimal optimization. Each step takes the maximal violating
/// pair: among feasible directions it maximizes |E_i - E_j|.
DualSolution solve_dual(const Matrix& x, std::span<const int> signs, const Params& params);

/// 1/2 a'Qa - e'a for any alpha; used by tests and diagnostics.
double dual_objective(const Matrix& x, std::span<const int> signs, std::span<const double> alpha,
                      double gamma);

class Model {
 public:
  Model() = default;
  Model(Matrix support_vectors, std::vector<double> coef, double bias, double gamma, bool converged)
      : sv_(std::move(support_vectors)),
        coef_(std::move(coef)),
        bias_(bias),
        gamma_(gamma),
        converged_(converged) {}

  const Matrix& support_vectors() const noexcept { return sv_; }
  /// alpha_i * y_i for each stored support vector.
  const std::vector<double>& coefficients() const noexcept { return coef_; }
  double bias() const noexcept { return bias_; }
  double kernel_gamma() const noexcept { return gamma_; }
  bool converged() const noexcept { return converged_; }
  std::size_t width() const noexcept { return sv_.cols(); }

  double decision(std::span<const double> x) const;
  std::vector<double> decision(const Matrix& x) const;
  /// 1 iff decision > 0.
  std::vector<int> predict(const Matrix& x) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  Matrix sv_;
  std::vector<double> coef_;
  double bias_ = 0.0;
  double gamma_ = 1.0;
  bool converged_ = true;
};

/// labels in {0, 1}; mapped to {-1, +1} internally.
Model fit(const Matrix& x, std::span<const int> labels, const Params& params);

}  // namespace lapsekit::svm
