#include "lapsekit/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lapsekit/error.hpp"
#include "lapsekit/log.hpp"
#include "lapsekit/random.hpp"

namespace lapsekit::boost {

std::string_view to_string(Loss loss) {
  return loss == Loss::Logistic ? "logistic" : "squared_error";
}

Loss parse_loss(std::string_view name) {
  if (name == "logistic") return Loss::Logistic;
  if (name == "squared_error") return Loss::SquaredError;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

void Params::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (!(gamma_reg >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (max_depth == 0) throw ConfigError("max_depth must be positive");
  if (min_child_weight == 0) throw ConfigError("min_child_weight must be positive");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must lie in (0, 1]");
  if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0)) {
    throw ConfigError("colsample_bytree must lie in (0, 1]");
  }
}

double Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

std::size_t Tree::n_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double Model::score_one(std::span<const double> x) const {
  double s = f0_;
  for (const auto& t : trees_) s += t.predict(x);
  return s;
}

std::vector<double> Model::predict_score(const Matrix& x) const {
  require_width(x, width_, "boost::predict_score");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = score_one(x.row(i));
  return out;
}

std::vector<int> Model::predict_class(const Matrix& x) const {
  const auto scores = predict_score(x);
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = loss_ == Loss::Logistic ? sigmoid(scores[i]) > 0.5 : scores[i] > 0.0;
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

constexpr double kProbFloor = 1e-12;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

void require_same_length(std::size_t a, std::size_t b, const char* who) {
  if (a != b) throw ShapeError(std::string(who) + ": length mismatch");
}

}  // namespace

double initial_score(std::span<const double> targets, Loss loss) {
  if (targets.empty()) throw InputError("initial_score: empty targets");
  const auto n = static_cast<double>(targets.size());
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  if (loss == Loss::SquaredError) return mean;
  double p = mean;
  if (p <= 0.0 || p >= 1.0) {
    warn("initial_score: positive rate is " + std::to_string(p) + "; clamped to [1/N, 1 - 1/N]");
    p = std::clamp(p, 1.0 / n, 1.0 - 1.0 / n);
    if (targets.size() == 1) p = 0.5;
  }
  return std::log(p / (1.0 - p));
}

std::vector<double> pseudo_residuals(std::span<const double> targets, std::span<const double> scores,
                                     Loss loss) {
  require_same_length(targets.size(), scores.size(), "pseudo_residuals");
  std::vector<double> r(targets.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = loss == Loss::Logistic ? targets[i] - sigmoid(scores[i]) : targets[i] - scores[i];
  }
  return r;
}

double logistic_loss(std::span<const double> labels, std::span<const double> scores) {
  require_same_length(labels.size(), scores.size(), "logistic_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += labels[i] * softplus(-scores[i]) + (1.0 - labels[i]) * softplus(scores[i]);
  }
  return total;
}

double squared_error_loss(std::span<const double> targets, std::span<const double> scores) {
  require_same_length(targets.size(), scores.size(), "squared_error_loss");
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - scores[i];
    total += d * d;
  }
  return total / static_cast<double>(targets.size());
}

double training_loss(std::span<const double> targets, std::span<const double> scores, Loss loss) {
  return loss == Loss::Logistic ? logistic_loss(targets, scores) : squared_error_loss(targets, scores);
}

double error_metric(std::span<const int> labels, std::span<const double> probs) {
  require_same_length(labels.size(), probs.size(), "error_metric");
  if (labels.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += (labels[i] != 0) != (probs[i] > 0.5);
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

State::State(const Matrix& x, std::span<const double> targets, const Params& params)
    : x_(&x), targets_(targets.begin(), targets.end()) {
  params.validate();
  require_same_length(x.rows(), targets.size(), "boost::fit");
  if (targets.empty()) throw InputError("boost::fit: empty training set");
  if (params.loss == Loss::Logistic) {
    for (double y : targets_) {
      if (y != 0.0 && y != 1.0) throw InputError("boost::fit: logistic loss needs 0/1 labels");
    }
  }
  const double f0 = initial_score(targets_, params.loss);
  model_ = Model(f0, params.loss, x.cols());
  scores_.assign(targets_.size(), f0);
  order_.resize(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& ord = order_[f];
    ord.resize(x.rows());
    std::iota(ord.begin(), ord.end(), 0u);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }
}

void fit_round(State& st, const Params& params) {
  const Matrix& x = *st.x_;
  const std::size_t n = x.rows();
  const auto round = st.rounds();
  Rng rng(fork_seed(params.seed, round));

  const auto n_rows = static_cast<std::size_t>(std::ceil(params.subsample * static_cast<double>(n)));
  if (n_rows == 0) throw ConfigError("boost: empty row subsample");
  const auto n_cols = static_cast<std::size_t>(std::ceil(params.colsample_bytree * static_cast<double>(x.cols())));
  std::vector<std::size_t> rows = n_rows == n ? std::vector<std::size_t>{} : rng.sample_without_replacement(n, n_rows);
  std::vector<std::size_t> cols = n_cols == x.cols() ? std::vector<std::size_t>{} : rng.sample_without_replacement(x.cols(), n_cols);
  if (n_rows == n) {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (n_cols == x.cols()) {
    cols.resize(x.cols());
    std::iota(cols.begin(), cols.end(), 0);
  }
  std::sort(rows.begin(), rows.end());
  std::sort(cols.begin(), cols.end());

  const auto residual = pseudo_residuals(st.targets_, st.scores_, params.loss);
  std::vector<double> hess(n, 1.0);
  if (params.loss == Loss::Logistic) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = clamp_prob(sigmoid(st.scores_[i]));
      hess[i] = p * (1.0 - p);
    }
  }

  struct Stats {
    double g = 0.0, h = 0.0;
    std::size_t count = 0;
  };
  struct Candidate {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
  };
  struct Scan {
    double g = 0.0;
    std::size_t count = 0;
    double last = 0.0;
  };

  Tree tree;
  tree.nodes.emplace_back();
  std::vector<Stats> stats(1);
  std::vector<int> node_of(n, -1);
  for (auto r : rows) {
    node_of[r] = 0;
    stats[0].g += residual[r];
    stats[0].h += hess[r];
    ++stats[0].count;
  }

  const auto mcw = params.min_child_weight;
  const auto split_gain = [](double gl, double nl, double g, double nn) {
    const double gr = g - gl, nr = nn - nl;
    return gl * gl / nl + gr * gr / nr - g * g / nn;
  };

  std::vector<int> active{0};
  for (std::size_t depth = 0; depth < params.max_depth && !active.empty(); ++depth) {
    std::vector<Candidate> best(tree.nodes.size());
    std::vector<char> is_active(tree.nodes.size(), 0);
    for (int a : active) is_active[static_cast<std::size_t>(a)] = stats[static_cast<std::size_t>(a)].count >= 2 * mcw;
    std::vector<Scan> scan(tree.nodes.size());
    for (auto f : cols) {
      for (int a : active) scan[static_cast<std::size_t>(a)] = Scan{};
      for (auto r : st.order_[f]) {
        const int nid = node_of[r];
        if (nid < 0 || !is_active[static_cast<std::size_t>(nid)]) continue;
        const auto id = static_cast<std::size_t>(nid);
        Scan& s = scan[id];
        const double v = x(r, f);
        if (s.count > 0 && s.last < v && s.count >= mcw && stats[id].count - s.count >= mcw) {
          const double gain = split_gain(s.g, static_cast<double>(s.count), stats[id].g,
                                         static_cast<double>(stats[id].count));
          if (gain > best[id].gain) {
            double thr = 0.5 * (s.last + v);
            if (!(thr < v)) thr = s.last;
            best[id] = Candidate{gain, static_cast<int>(f), thr};
          }
        }
        s.g += residual[r];
        ++s.count;
        s.last = v;
      }
    }

    std::vector<int> next;
    std::vector<int> left_child(tree.nodes.size(), -1);
    for (int a : active) {
      const auto id = static_cast<std::size_t>(a);
      const Candidate& c = best[id];
      if (!is_active[id] || c.feature < 0 || !(c.gain > params.gamma_reg) || !(c.gain > 0.0)) continue;
      const int li = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stats.resize(tree.nodes.size());
      tree.nodes[id].feature = c.feature;
      tree.nodes[id].threshold = c.threshold;
      tree.nodes[id].left = li;
      tree.nodes[id].right = li + 1;
      left_child.resize(tree.nodes.size(), -1);
      left_child[id] = li;
      next.push_back(li);
      next.push_back(li + 1);
    }
    if (next.empty()) break;
    for (auto r : rows) {
      const int nid = node_of[r];
      if (nid < 0) continue;
      const auto id = static_cast<std::size_t>(nid);
      if (id >= left_child.size() || left_child[id] < 0) continue;
      const TreeNode& node = tree.nodes[id];
      const int child = x(r, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
      node_of[r] = child;
      Stats& cs = stats[static_cast<std::size_t>(child)];
      cs.g += residual[r];
      cs.h += hess[r];
      ++cs.count;
    }
    active = std::move(next);
  }

  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    TreeNode& node = tree.nodes[i];
    if (!node.is_leaf()) continue;
    const Stats& s = stats[i];
    double value = 0.0;
    if (s.count > 0) {
      value = params.loss == Loss::SquaredError ? s.g / static_cast<double>(s.count) : s.g / s.h;
    }
    node.value = params.eta * value;
  }

  for (std::size_t i = 0; i < n; ++i) st.scores_[i] += tree.predict(x.row(i));
  const double loss = training_loss(st.targets_, st.scores_, params.loss);
  st.model_.append(std::move(tree), loss);
}

Model fit(const Matrix& x, std::span<const double> targets, const Params& params) {
  State st(x, targets, params);
  for (std::size_t m = 0; m < params.nrounds; ++m) fit_round(st, params);
  return st.model();
}

Model fit(const Matrix& x, std::span<const int> labels, const Params& params) {
  std::vector<double> y(labels.begin(), labels.end());
  return fit(x, y, params);
}

}  // namespace lapsekit::boost
