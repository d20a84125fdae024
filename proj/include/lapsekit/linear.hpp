#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lapsekit/matrix.hpp"

namespace lapsekit::linear {

struct Params {
  std::size_t max_iter = 100;
  double grad_tol = 1e-8;  // on the gradient of the mean log-likelihood

  friend bool operator==(const Params&, const Params&) = default;
};

struct Model {
  double intercept = 0.0;
  std::vector<double> coefficients;
  bool converged = false;
  std::size_t n_iterations = 0;
  bool separation_detected = false;
  bool ridge_jitter_used = false;

  std::size_t width() const noexcept { return coefficients.size(); }
  double linear_predictor(std::span<const double> x) const;
  std::vector<double> predict_prob(const Matrix& x) const;
  /// 1 iff probability > 0.5.
  std::vector<int> predict_class(const Matrix& x) const;

  friend bool operator==(const Model&, const Model&) = default;
};

/// Bernoulli log-likelihood at (intercept, coefficients).
double log_likelihood(const Matrix& x, std::span<const int> y, double intercept,
                      std::span<const double> coefficients);

/// Gradient of the log-likelihood; element 0 is the intercept.
std::vector<double> log_likelihood_gradient(const Matrix& x, std::span<const int> y, double intercept,
                                            std::span<const double> coefficients);

/// Newton / IRLS with step halving. Singular normal equations get a 1e-8
/// ridge with a warning; separable data stops early with converged = false.
Model fit(const Matrix& x, std::span<const int> y, const Params& params = {});

}  // namespace lapsekit::linear
