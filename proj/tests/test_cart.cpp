#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "lapsekit/cart.hpp"
#include "lapsekit/error.hpp"
#include "lapsekit/random.hpp"

using namespace lapsekit;
using namespace lapsekit::cart;

namespace {

double gini(const std::vector<int>& y) {
  if (y.empty()) return 0.0;
  double pos = 0;
  for (int v : y) pos += v;
  const double n = static_cast<double>(y.size()), p = pos / n;
  return n * p * (1 - p);
}

// Every feature, every midpoint, straight from the definition.
std::optional<Split> brute_force_split(const Matrix& x, const std::vector<int>& y, std::size_t min_node) {
  std::optional<Split> best;
  const double parent = gini(y);
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::set<double> values;
    for (std::size_t i = 0; i < x.rows(); ++i) values.insert(x(i, f));
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double t = 0.5 * (v[k] + v[k + 1]);
      std::vector<int> l, r;
      for (std::size_t i = 0; i < x.rows(); ++i) (x(i, f) <= t ? l : r).push_back(y[i]);
      if (l.size() < min_node || r.size() < min_node) continue;
      const double gain = parent - gini(l) - gini(r);
      if (!best || gain > best->gain + 1e-12) best = Split{f, t, gain};
    }
  }
  if (best && !(best->gain > 1e-12)) return std::nullopt;
  return best;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

Matrix random_grid(Rng& rng, std::size_t n, std::size_t d, int levels) {
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = static_cast<double>(rng.index(levels));
  }
  return x;
}

std::size_t training_errors(const Model& m, const Matrix& x, const std::vector<int>& y) {
  const auto p = m.predict(x);
  std::size_t e = 0;
  for (std::size_t i = 0; i < y.size(); ++i) e += p[i] != y[i];
  return e;
}

// Two clusters split on feature 0; feature 1 is noise.
void two_clusters(std::size_t n, Matrix& x, std::vector<int>& y, std::uint64_t seed) {
  Rng rng(seed);
  x = Matrix(n, 2);
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 2;
    x(i, 0) = (y[i] ? 3.0 : -3.0) + rng.normal() * 0.5;
    x(i, 1) = rng.normal();
  }
}

}  // namespace

TEST_CASE("gini impurity") {
  CHECK(gini_impurity(std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}) == doctest::Approx(2.5));
  CHECK(gini_impurity(std::vector<int>{0, 0, 0}) == 0.0);
  CHECK(gini_impurity(std::vector<int>{1, 1}) == 0.0);
  CHECK(gini_impurity(std::vector<int>{1, 1, 0, 0, 0, 0, 0, 0}) == doctest::Approx(1.5));
  CHECK_THROWS_AS(gini_impurity(std::vector<int>{}), InputError);
}

TEST_CASE("single candidate split on duplicated two-point data") {
  Matrix x(10, 1);
  std::vector<int> y(10);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i % 2);
    y[i] = static_cast<int>(i % 2);
  }
  const auto s = best_split(x, y, all_rows(10));
  REQUIRE(s.has_value());
  CHECK(s->feature == 0);
  CHECK(s->threshold == 0.5);
  CHECK(s->gain == doctest::Approx(2.5));
}

TEST_CASE("no split on constant features or a pure node") {
  Matrix x(6, 2, 1.0);
  std::vector<int> y{0, 1, 0, 1, 0, 1};
  CHECK_FALSE(best_split(x, y, all_rows(6)).has_value());
  Matrix z(6, 1);
  for (std::size_t i = 0; i < 6; ++i) z(i, 0) = static_cast<double>(i);
  CHECK_FALSE(best_split(z, std::vector<int>(6, 1), all_rows(6)).has_value());
}

TEST_CASE("best_split agrees with brute force on random nodes") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(30), d = 1 + rng.index(4);
    const std::size_t min_node = 1 + rng.index(3);
    const Matrix x = random_grid(rng, n, d, 2 + static_cast<int>(rng.index(6)));
    std::vector<int> y(n);
    for (auto& v : y) v = rng.bernoulli(0.4);
    const auto got = best_split(x, y, all_rows(n), min_node);
    const auto want = brute_force_split(x, y, min_node);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->gain == doctest::Approx(want->gain).epsilon(1e-12));
      CHECK(got->feature == want->feature);
      CHECK(got->threshold == want->threshold);
      CHECK(got->gain >= 0.0);
    }
  }
}

TEST_CASE("separated clusters give a two-leaf tree with zero training error") {
  Matrix x;
  std::vector<int> y;
  two_clusters(60, x, y, 5);
  const auto m = fit(x, y, Params{5, 10, 1});
  CHECK(m.n_leaves() == 2);
  CHECK(m.root().feature == 0);
  CHECK(training_errors(m, x, y) == 0);
}

TEST_CASE("identical labels give a single leaf with zero cv error") {
  Matrix x(20, 2);
  for (std::size_t i = 0; i < 20; ++i) x(i, 0) = static_cast<double>(i);
  const auto m = fit(x, std::vector<int>(20, 1), Params{});
  CHECK(m.n_leaves() == 1);
  CHECK(m.root().is_leaf());
  CHECK(m.root().predicted_class == 1);
  REQUIRE(m.pruning_trace().size() == 1);
  CHECK(m.pruning_trace()[0].cv_error == 0.0);
}

TEST_CASE("xor is fitted exactly by the saturated tree") {
  const Matrix x(4, 2, {0, 0, 0, 1, 1, 0, 1, 1});
  const std::vector<int> y{0, 1, 1, 0};
  const auto m = fit(x, y, Params{1, 1, 0});
  CHECK(m.n_leaves() >= 3);
  CHECK(training_errors(m, x, y) == 0);
}

TEST_CASE("routing: left, right and equal-to-threshold") {
  std::vector<Node> nodes(3);
  nodes[0].feature = 0;
  nodes[0].threshold = 1.5;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].predicted_class = 0;
  nodes[2].predicted_class = 1;
  const Model m(nodes, 1, {});
  CHECK(m.predict_one(std::vector<double>{0.0}) == 0);
  CHECK(m.predict_one(std::vector<double>{2.0}) == 1);
  CHECK(m.predict_one(std::vector<double>{1.5}) == 0);
  CHECK(m.n_leaves() == 2);
  CHECK_THROWS_AS(m.predict(Matrix(1, 2)), ShapeError);
}

TEST_CASE("leaf ties predict class 0") {
  const Matrix x(2, 1, {1.0, 1.0});
  const auto m = fit(x, std::vector<int>{0, 1}, Params{1, 1, 0});
  CHECK(m.n_leaves() == 1);
  CHECK(m.root().proportion == 0.5);
  CHECK(m.root().predicted_class == 0);
}

TEST_CASE("saturated tree on conflict-free data: pure leaves, zero error") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = 40 + rng.index(80);
    Matrix x(n, 3);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
      y[i] = rng.bernoulli(0.5);
    }
    const auto nodes = grow_saturated(x, y, all_rows(n), 1);
    std::size_t reached = 0;
    for (const auto& node : nodes) {
      if (!node.is_leaf()) continue;
      reached += node.n_obs;
      CHECK((node.proportion == 0.0 || node.proportion == 1.0));
    }
    CHECK(reached == n);
    const auto m = fit(x, y, Params{1, 1, 0});
    CHECK(training_errors(m, x, y) == 0);
  }
}

TEST_CASE("node invariants: two children, consistent proportions, leaf count") {
  Rng rng(3);
  const std::size_t n = 300;
  Matrix x(n, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = rng.normal();
    y[i] = (x(i, 0) + 0.5 * x(i, 1) + 0.5 * rng.normal()) > 0;
  }
  const auto m = fit(x, y, Params{5, 10, 2});
  std::size_t leaves = 0, leaf_obs = 0;
  for (std::size_t i = 0; i < m.nodes().size(); ++i) {
    const auto& node = m.nodes()[i];
    if (node.is_leaf()) {
      ++leaves;
      leaf_obs += node.n_obs;
      CHECK(node.n_obs > 0);
      CHECK(node.predicted_class == (node.proportion > 0.5 ? 1 : 0));
      continue;
    }
    REQUIRE(node.left > static_cast<int>(i));
    REQUIRE(node.right > static_cast<int>(i));
    const auto& l = m.nodes()[static_cast<std::size_t>(node.left)];
    const auto& r = m.nodes()[static_cast<std::size_t>(node.right)];
    CHECK(l.n_obs + r.n_obs == node.n_obs);
    const double pos = l.proportion * static_cast<double>(l.n_obs) + r.proportion * static_cast<double>(r.n_obs);
    CHECK(pos == doctest::Approx(node.proportion * static_cast<double>(node.n_obs)));
  }
  CHECK(leaves == m.n_leaves());
  CHECK(leaf_obs == n);
}

TEST_CASE("training error is non-increasing in subtree size along the pruning path") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 200;
    Matrix x(n, 3);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
      y[i] = (x(i, 0) * x(i, 1) + 0.7 * rng.normal()) > 0;
    }
    const auto nodes = grow_saturated(x, y, all_rows(n), 1);
    const auto path = pruning_path(nodes);
    REQUIRE(path.alphas.size() == path.leaves.size());
    std::size_t previous_errors = 0;
    for (std::size_t k = 0; k < path.alphas.size(); ++k) {
      std::size_t e = 0;
      for (std::size_t i = 0; i < n; ++i) e += predict_pruned(nodes, path.collapse_alpha, path.alphas[k], x.row(i)) != y[i];
      if (k > 0) {
        CHECK(path.leaves[k] < path.leaves[k - 1]);
        CHECK(path.alphas[k] >= path.alphas[k - 1]);
        CHECK(e >= previous_errors);
      }
      previous_errors = e;
    }
    CHECK(path.leaves.back() == 1);
  }
}

TEST_CASE("fit is deterministic and the chosen size minimises cv error") {
  Rng rng(8);
  const std::size_t n = 250;
  Matrix x(n, 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = (x(i, 0) > 0.3) != (rng.uniform() < 0.15);
  }
  const auto a = fit(x, y, Params{5, 10, 4});
  const auto b = fit(x, y, Params{5, 10, 4});
  CHECK(a == b);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_leaves = 0;
  for (const auto& step : a.pruning_trace()) {
    if (step.cv_error < best || (step.cv_error == best && step.n_leaves < best_leaves)) {
      best = step.cv_error;
      best_leaves = step.n_leaves;
    }
  }
  CHECK(a.n_leaves() == best_leaves);
}

TEST_CASE("fit rejects too few rows for the fold count") {
  CHECK_THROWS_AS(fit(Matrix(5, 1), std::vector<int>{0, 1, 0, 1, 0}, Params{}), InputError);
}
