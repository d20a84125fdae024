#include "lapsekit/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lapsekit/error.hpp"
#include "lapsekit/log.hpp"

namespace lapsekit::svm {

void Params::validate() const {
  if (!(cost > 0.0)) throw ConfigError("svm: cost must be positive");
  if (!(kernel_gamma > 0.0)) throw ConfigError("svm: kernel gamma must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("svm: tolerance must be positive");
  if (max_passes == 0) throw ConfigError("svm: max_passes must be positive");
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw ShapeError("rbf_kernel: width mismatch");
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace {

void kernel_row(const Matrix& x, std::size_t i, double gamma, std::vector<double>& out) {
  const auto xi = x.row(i);
  for (std::size_t t = 0; t < x.rows(); ++t) out[t] = rbf_kernel(xi, x.row(t), gamma);
}

}  // namespace

double dual_objective(const Matrix& x, std::span<const int> signs, std::span<const double> alpha,
                      double gamma) {
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    lin += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      if (alpha[j] == 0.0) continue;
      quad += alpha[i] * alpha[j] * signs[i] * signs[j] * rbf_kernel(x.row(i), x.row(j), gamma);
    }
  }
  return 0.5 * quad - lin;
}

DualSolution solve_dual(const Matrix& x, std::span<const int> signs, const Params& params) {
  params.validate();
  const std::size_t n = x.rows();
  const double c = params.cost;
  constexpr double kTau = 1e-12;

  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q alpha - e
  std::vector<double> qi(n), qj(n);
  auto& a = sol.alpha;
  const auto y = [&](std::size_t t) { return static_cast<double>(signs[t]); };
  const auto in_up = [&](std::size_t t) { return signs[t] > 0 ? a[t] < c : a[t] > 0.0; };
  const auto in_low = [&](std::size_t t) { return signs[t] > 0 ? a[t] > 0.0 : a[t] < c; };

  const std::size_t budget = params.max_passes * std::max<std::size_t>(n, 1);
  std::size_t iter = 0;
  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y(t) * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    sol.max_violation = (i < n && j < n) ? gmax - gmin : 0.0;
    if (i == n || j == n || gmax - gmin < params.tolerance) {
      sol.converged = true;
      break;
    }
    if (iter >= budget) break;
    ++iter;

    kernel_row(x, i, params.kernel_gamma, qi);
    kernel_row(x, j, params.kernel_gamma, qj);
    const double kii = qi[i], kjj = qj[j], kij = qi[j];
    const double old_ai = a[i], old_aj = a[j];
    if (signs[i] != signs[j]) {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) {
          a[j] = 0;
          a[i] = diff;
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = -diff;
      }
      if (diff > 0) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = c - diff;
        }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = sum - c;
        }
      } else if (a[j] < 0) {
        a[j] = 0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) {
          a[j] = c;
          a[i] = sum - c;
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = sum;
      }
    }
    const double dai = a[i] - old_ai, daj = a[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y(t) * (y(i) * qi[t] * dai + y(j) * qj[t] * daj);
    }
  }
  sol.iterations = iter;

  // b from free support vectors; midpoint of the feasible interval otherwise.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y(t) * grad[t];
    if (a[t] >= c) {
      if (signs[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (signs[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double r = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  sol.bias = -r;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += a[t] * (grad[t] - 1.0);
  sol.objective = 0.5 * obj;
  return sol;
}

double Model::decision(std::span<const double> x) const {
  double f = bias_;
  for (std::size_t s = 0; s < sv_.rows(); ++s) f += coef_[s] * rbf_kernel(sv_.row(s), x, gamma_);
  return f;
}

std::vector<double> Model::decision(const Matrix& x) const {
  require_width(x, width(), "svm::decision");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = decision(x.row(i));
  return out;
}

std::vector<int> Model::predict(const Matrix& x) const {
  const auto f = decision(x);
  std::vector<int> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] > 0.0;
  return out;
}

Model fit(const Matrix& x, std::span<const int> labels, const Params& params) {
  params.validate();
  const std::size_t n = x.rows();
  if (labels.size() != n) throw ShapeError("svm::fit: labels and features differ in length");
  if (n < 2) throw InputError("svm::fit: need at least two rows");
  if (n > kMaxRowsWithoutOverride && !params.allow_large) {
    throw ConfigError("svm::fit: " + std::to_string(n) + " rows exceeds the " +
                      std::to_string(kMaxRowsWithoutOverride) + "-row guard (set allow_large)");
  }
  std::vector<int> signs(n);
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    signs[i] = labels[i] != 0 ? 1 : -1;
    (signs[i] > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw InputError("svm::fit: both classes must be present");

  const auto sol = solve_dual(x, signs, params);
  if (!sol.converged) {
    warn("svm::fit: SMO stopped after " + std::to_string(sol.iterations) +
         " iterations with KKT violation " + std::to_string(sol.max_violation));
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.alpha[i] > 0.0) keep.push_back(i);
  }
  std::vector<double> coef;
  coef.reserve(keep.size());
  for (auto i : keep) coef.push_back(sol.alpha[i] * signs[i]);
  return Model(x.select_rows(keep), std::move(coef), sol.bias, params.kernel_gamma, sol.converged);
}

}  // namespace lapsekit::svm
