#include "lapsekit/linear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lapsekit/error.hpp"
#include "lapsekit/log.hpp"

namespace lapsekit::linear {
namespace {

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// log(1 + e^v) without overflow
double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double eta_at(const Matrix& x, std::size_t i, double b0, std::span<const double> b) {
  double eta = b0;
  const auto row = x.row(i);
  for (std::size_t k = 0; k < b.size(); ++k) eta += row[k] * b[k];
  return eta;
}

constexpr double kJitter = 1e-8;
constexpr double kSaturation = 35.0;

}  // namespace

double Model::linear_predictor(std::span<const double> x) const {
  double eta = intercept;
  for (std::size_t k = 0; k < coefficients.size(); ++k) eta += x[k] * coefficients[k];
  return eta;
}

std::vector<double> Model::predict_prob(const Matrix& x) const {
  require_width(x, width(), "linear::predict_prob");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = sigmoid(linear_predictor(x.row(i)));
  return out;
}

std::vector<int> Model::predict_class(const Matrix& x) const {
  const auto p = predict_prob(x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.5;
  return out;
}

double log_likelihood(const Matrix& x, std::span<const int> y, double intercept,
                      std::span<const double> coefficients) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double eta = eta_at(x, i, intercept, coefficients);
    ll -= y[i] ? softplus(-eta) : softplus(eta);
  }
  return ll;
}

std::vector<double> log_likelihood_gradient(const Matrix& x, std::span<const int> y, double intercept,
                                            std::span<const double> coefficients) {
  std::vector<double> g(x.cols() + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double r = (y[i] ? 1.0 : 0.0) - sigmoid(eta_at(x, i, intercept, coefficients));
    g[0] += r;
    const auto row = x.row(i);
    for (std::size_t k = 0; k < x.cols(); ++k) g[k + 1] += r * row[k];
  }
  return g;
}

Model fit(const Matrix& x, std::span<const int> y, const Params& params) {
  const std::size_t n = x.rows(), p = x.cols() + 1;
  if (y.size() != n) throw ShapeError("linear::fit: labels and features differ in length");
  const auto pos = std::count_if(y.begin(), y.end(), [](int v) { return v != 0; });
  if (pos == 0 || static_cast<std::size_t>(pos) == n) {
    throw InputError("linear::fit: both classes must be present");
  }

  Model m;
  m.coefficients.assign(x.cols(), 0.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  const auto unpack = [&](const Eigen::VectorXd& b) {
    m.intercept = b[0];
    for (std::size_t k = 1; k < p; ++k) m.coefficients[k - 1] = b[static_cast<Eigen::Index>(k)];
  };
  double ll = log_likelihood(x, y, 0.0, m.coefficients);

  for (m.n_iterations = 0; m.n_iterations < params.max_iter; ++m.n_iterations) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    double max_abs_eta = 0.0;
    bool all_separated = true;
    Eigen::VectorXd row(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
      row[0] = 1.0;
      for (std::size_t k = 1; k < p; ++k) row[static_cast<Eigen::Index>(k)] = x(i, k - 1);
      const double eta = row.dot(beta);
      const double prob = sigmoid(eta);
      const double w = prob * (1.0 - prob);
      grad += ((y[i] ? 1.0 : 0.0) - prob) * row;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(row, w);
      max_abs_eta = std::max(max_abs_eta, std::abs(eta));
      all_separated = all_separated && (y[i] ? eta > 0 : eta < 0);
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    if (grad.cwiseAbs().maxCoeff() <= params.grad_tol * static_cast<double>(n)) {
      m.converged = true;
      break;
    }
    if (all_separated && max_abs_eta > kSaturation) {
      m.separation_detected = true;
      warn("linear::fit: data appear separable; coefficients diverge, returning unconverged fit");
      break;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12)) {
      if (!m.ridge_jitter_used) warn("linear::fit: singular normal equations; adding 1e-8 ridge");
      m.ridge_jitter_used = true;
      hess.diagonal().array() += kJitter;
      ldlt.compute(hess);
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    // Newton decrement below the rounding floor of the log-likelihood: no
    // later step can be measured, so take this one and stop.
    const bool at_floor =
        0.5 * grad.dot(step) <= 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ll));

    double t = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = beta + t * step;
      unpack(trial);
      const double trial_ll = log_likelihood(x, y, m.intercept, m.coefficients);
      if (trial_ll >= ll) {
        beta = trial;
        ll = trial_ll;
        improved = true;
        break;
      }
    }
    unpack(beta);
    if (at_floor) {
      ++m.n_iterations;
      const auto g = log_likelihood_gradient(x, y, m.intercept, m.coefficients);
      double worst = 0.0;
      for (double v : g) worst = std::max(worst, std::abs(v));
      m.converged = worst <= params.grad_tol * static_cast<double>(n);
      break;
    }
    if (!improved) break;
  }
  unpack(beta);
  if (!m.converged && !m.separation_detected) {
    warn("linear::fit: stopped after " + std::to_string(m.n_iterations) +
         " iterations without reaching the gradient tolerance");
  }
  return m;
}

}  // namespace lapsekit::linear
