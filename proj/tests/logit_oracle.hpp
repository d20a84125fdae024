#pragma once

// Derivative-free maximiser of the Bernoulli log-likelihood: compass search
// over a refining grid, one coordinate at a time, both directions.

#include <cmath>
#include <vector>

namespace oracle {

inline double logit_ll(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                       const std::vector<double>& beta) {
  double ll = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double eta = beta[0];
    for (std::size_t k = 0; k < x[i].size(); ++k) eta += beta[k + 1] * x[i][k];
    const double soft = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
    ll += y[i] ? eta - soft : -soft;
  }
  return ll;
}

inline std::vector<double> grid_refine_logit(const std::vector<std::vector<double>>& x,
                                             const std::vector<int>& y, std::size_t dim) {
  std::vector<double> beta(dim + 1, 0.0);
  double best = logit_ll(x, y, beta);
  for (double step = 1.0; step > 1e-11; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t k = 0; k <= dim; ++k) {
        for (double dir : {1.0, -1.0}) {
          auto trial = beta;
          trial[k] += dir * step;
          const double v = logit_ll(x, y, trial);
          if (v > best) {
            best = v;
            beta = trial;
            moved = true;
          }
        }
      }
    }
  }
  return beta;
}

}  // namespace oracle
