#include "lapsekit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <functional>
#include <numeric>

#include "lapsekit/error.hpp"
#include "lapsekit/log.hpp"
#include "lapsekit/random.hpp"
#include "lapsekit/serialization.hpp"
#include "parallel.hpp"

namespace lapsekit::eval {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

std::string family_tag(const ModelSpec& spec) {
  return std::visit(overloaded{[](const linear::Params&) { return std::string("logit"); },
                               [](const cart::Params&) { return std::string("cart"); },
                               [](const svm::Params&) { return std::string("svm"); },
                               [](const boost::Params& p) {
                                 return std::string(p.loss == boost::Loss::Logistic ? "boost" : "boost-profit");
                               }},
                    spec);
}

AnyModel fit_model(const ModelSpec& spec, const Matrix& x, std::span<const int> labels,
                   std::uint64_t seed) {
  return std::visit(
      overloaded{[&](const linear::Params& p) -> AnyModel { return linear::fit(x, labels, p); },
                 [&](cart::Params p) -> AnyModel {
                   p.seed = seed;
                   return cart::fit(x, labels, p);
                 },
                 [&](svm::Params p) -> AnyModel {
                   p.seed = seed;
                   return svm::fit(x, labels, p);
                 },
                 [&](boost::Params p) -> AnyModel {
                   p.seed = seed;
                   p.loss = boost::Loss::Logistic;
                   return boost::fit(x, labels, p);
                 }},
      spec);
}

std::vector<int> predict_classes(const AnyModel& model, const Matrix& x) {
  return std::visit(
      overloaded{[&](const linear::Model& m) { return m.predict_class(x); },
                 [&](const cart::Model& m) { return m.predict(x); },
                 [&](const svm::Model& m) { return m.predict(x); },
                 [&](const boost::Model& m) { return m.predict_class(x); }},
      model);
}

std::string_view to_string(Orientation o) {
  return o == Orientation::TrainOnOne ? "train-on-one" : "conventional";
}

Orientation parse_orientation(std::string_view name) {
  if (name == "train-on-one") return Orientation::TrainOnOne;
  if (name == "conventional") return Orientation::Conventional;
  throw ConfigError("unknown orientation '" + std::string(name) + "' (train-on-one | conventional)");
}

SplitPlan SplitPlan::make(std::size_t n, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("need at least two folds");
  if (n < n_folds) {
    throw InputError("need at least " + std::to_string(n_folds) + " observations for " +
                     std::to_string(n_folds) + " folds, got " + std::to_string(n));
  }
  SplitPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.fold.resize(n);
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  for (std::size_t i = 0; i < n; ++i) plan.fold[perm[i]] = i % n_folds;
  return plan;
}

std::vector<std::size_t> SplitPlan::members(std::size_t k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == k) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SplitPlan::complement(std::size_t k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != k) out.push_back(i);
  }
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n <= 0) throw InputError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) / static_cast<double>(n);
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

namespace {

struct FoldWork {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

FoldWork fold_rows(const SplitPlan& plan, std::size_t k, Orientation o) {
  return o == Orientation::TrainOnOne ? FoldWork{plan.members(k), plan.complement(k)}
                                      : FoldWork{plan.complement(k), plan.members(k)};
}

using Predictor = std::function<std::vector<int>(const Dataset& train, const Matrix& test, std::size_t fold)>;

EvaluationReport run_folds(const Dataset& data, const std::vector<NamedEconomics>& strategies,
                           std::uint64_t seed, const ProtocolOptions& options, const Predictor& predictor) {
  if (data.labels.size() != data.size() || data.face_amounts.size() != data.size()) {
    throw ShapeError("protocol: dataset needs labels and face amounts for every row");
  }
  const auto plan = SplitPlan::make(data.size(), options.n_folds, fork_seed(seed, 0));
  EvaluationReport report;
  report.orientation = options.orientation;
  report.seed = seed;
  report.n_observations = data.size();
  for (const auto& s : strategies) report.strategies.push_back(s.name);
  report.folds.resize(options.n_folds);
  report.train_count.assign(data.size(), 0);
  report.test_count.assign(data.size(), 0);

  std::vector<FoldWork> work(options.n_folds);
  for (std::size_t k = 0; k < options.n_folds; ++k) {
    work[k] = fold_rows(plan, k, options.orientation);
    for (auto i : work[k].train) ++report.train_count[i];
    for (auto i : work[k].test) ++report.test_count[i];
  }

  detail::parallel_for(options.n_folds, options.jobs, [&](std::size_t k) {
    FoldResult& r = report.folds[k];
    r.fold = k;
    r.n_train = work[k].train.size();
    r.n_test = work[k].test.size();
    try {
      const Dataset train = data.subset(work[k].train);
      const Dataset test = data.subset(work[k].test);
      const auto pred = predictor(train, test.features, k);
      r.cm = confusion(test.labels, pred, test.face_amounts);
      r.accuracy = accuracy(r.cm);
      for (const auto& s : strategies) r.retention_gain.push_back(retention_gain(r.cm, s.params));
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
  });

  std::vector<double> acc;
  std::vector<std::vector<double>> rg(strategies.size());
  for (const auto& r : report.folds) {
    if (r.failed) {
      warn("fold " + std::to_string(r.fold) + " failed and is excluded: " + r.error);
      continue;
    }
    acc.push_back(r.accuracy);
    for (std::size_t s = 0; s < strategies.size(); ++s) rg[s].push_back(r.retention_gain[s]);
  }
  report.accuracy = summarize(acc);
  for (const auto& v : rg) report.retention_gain.push_back(summarize(v));
  return report;
}

bool single_class(std::span<const int> y) {
  return std::all_of(y.begin(), y.end(), [&](int v) { return (v != 0) == (y.front() != 0); });
}

}  // namespace

EvaluationReport run_protocol(const Dataset& data, const ModelSpec& spec,
                              const std::vector<NamedEconomics>& strategies, std::uint64_t seed,
                              const ProtocolOptions& options) {
  const bool needs_two_classes =
      std::holds_alternative<linear::Params>(spec) || std::holds_alternative<svm::Params>(spec);
  auto report = run_folds(data, strategies, seed, options,
                          [&](const Dataset& train, const Matrix& test, std::size_t k) {
                            if (needs_two_classes && !train.labels.empty() && single_class(train.labels)) {
                              warn("fold " + std::to_string(k) +
                                   ": single-class training fold, predicting that class");
                              return std::vector<int>(test.rows(), train.labels.front() != 0);
                            }
                            const auto model = fit_model(spec, train.features, train.labels,
                                                         fork_seed(seed, 100 + k));
                            return predict_classes(model, test);
                          });
  report.model = family_tag(spec);
  report.params_json = spec_to_json(spec).dump();
  return report;
}

EvaluationReport run_profit_protocol(const Dataset& data, const boost::Params& params,
                                     const NamedEconomics& target,
                                     const std::vector<NamedEconomics>& strategies,
                                     std::uint64_t seed, const ProtocolOptions& options) {
  target.params.validate();
  boost::Params p = params;
  p.loss = boost::Loss::SquaredError;
  p.validate();
  auto report = run_folds(data, strategies, seed, options,
                          [&](const Dataset& train, const Matrix& test, std::size_t k) {
                            const auto z = profit_targets(train.face_amounts, train.labels, target.params);
                            boost::Params fold_params = p;
                            fold_params.seed = fork_seed(seed, 100 + k);
                            return boost::fit(train.features, z, fold_params).predict_class(test);
                          });
  report.model = "boost-profit";
  report.target_strategy = target.name;
  report.params_json = json(p).dump();
  return report;
}

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

std::size_t BoostGrid::size() const {
  return eta.size() * gamma.size() * max_depth.size() * min_child_weight.size() * subsample.size() *
         colsample_bytree.size();
}

boost::Params BoostGrid::at(std::size_t k) const {
  boost::Params p;
  p.colsample_bytree = colsample_bytree[k % colsample_bytree.size()];
  k /= colsample_bytree.size();
  p.subsample = subsample[k % subsample.size()];
  k /= subsample.size();
  p.min_child_weight = min_child_weight[k % min_child_weight.size()];
  k /= min_child_weight.size();
  p.max_depth = max_depth[k % max_depth.size()];
  k /= max_depth.size();
  p.gamma_reg = gamma[k % gamma.size()];
  k /= gamma.size();
  p.eta = eta[k];
  p.nrounds = nrounds_max;
  return p;
}

BoostGrid BoostGrid::paper_9_1() {
  BoostGrid g;
  g.eta = {0.05, 0.1, 0.15};
  g.gamma = {0, 5, 10};
  g.max_depth = {10, 15, 20, 25, 30};
  g.min_child_weight = {15, 20, 25};
  g.subsample = {1};
  g.colsample_bytree = {0.4, 0.5, 0.6};
  g.grid_folds = 2;
  g.nrounds_folds = 5;
  g.nrounds_max = 200;
  return g;
}

svm::Params SvmGrid::at(std::size_t k) const {
  svm::Params p = base;
  p.cost = cost[k / kernel_gamma.size()];
  p.kernel_gamma = kernel_gamma[k % kernel_gamma.size()];
  return p;
}

SvmGrid SvmGrid::paper_9_2() {
  SvmGrid g;
  g.cost = {0.5, 1, 2, 5, 10};
  g.kernel_gamma = {0.25, 0.5, 0.75, 1, 1.25};
  g.folds = 2;
  return g;
}

ProfitTuning ProfitTuning::paper_9_3() {
  ProfitTuning t;
  t.fixed.eta = 0.005;
  t.fixed.gamma_reg = 1;
  t.fixed.max_depth = 15;
  t.fixed.min_child_weight = 15;
  t.fixed.subsample = 0.7;
  t.fixed.colsample_bytree = 0.8;
  t.fixed.loss = boost::Loss::SquaredError;
  t.folds = 5;
  t.nrounds_max = 1000;
  return t;
}

std::vector<double> staged_loss_sums(const boost::Model& model, const Matrix& x,
                                     std::span<const double> targets) {
  require_width(x, model.width(), "staged_loss_sums");
  std::vector<double> scores(x.rows(), model.f0());
  std::vector<double> out;
  out.reserve(model.trees().size());
  for (const auto& tree : model.trees()) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      scores[i] += tree.predict(x.row(i));
      if (model.loss() == boost::Loss::Logistic) {
        total += (targets[i] != 0.0) != (boost::sigmoid(scores[i]) > 0.5);
      } else {
        const double d = targets[i] - scores[i];
        total += d * d;
      }
    }
    out.push_back(total);
  }
  return out;
}

namespace {

void require_tunable(const Dataset& data, std::size_t folds) {
  if (data.size() < 10) {
    throw InputError("tuning needs at least 10 observations, got " + std::to_string(data.size()));
  }
  if (data.size() < 2 * folds) {
    throw InputError("tuning: " + std::to_string(data.size()) + " observations cannot fill " +
                     std::to_string(folds) + " folds with two rows each");
  }
}

// Summed staged validation loss over a conventional k-fold split.
std::vector<double> cv_curve(const Matrix& x, std::span<const double> y, const boost::Params& params,
                             std::size_t folds, std::uint64_t seed) {
  const auto plan = SplitPlan::make(x.rows(), folds, seed);
  std::vector<double> total(params.nrounds, 0.0);
  const std::vector<double> yv(y.begin(), y.end());
  for (std::size_t k = 0; k < folds; ++k) {
    const auto train = plan.complement(k);
    const auto val = plan.members(k);
    const Matrix xt = x.select_rows(train);
    const auto yt = select(yv, train);
    boost::Params p = params;
    p.seed = fork_seed(seed, 1000 + k);
    const auto model = boost::fit(xt, yt, p);
    const auto curve = staged_loss_sums(model, x.select_rows(val), select(yv, val));
    for (std::size_t m = 0; m < curve.size(); ++m) total[m] += curve[m];
  }
  return total;
}

std::size_t argmin_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

}  // namespace

boost::Params tune_boost_classification(const Dataset& data, const BoostGrid& grid,
                                        const TuneOptions& options) {
  require_tunable(data, std::max(grid.grid_folds, grid.nrounds_folds));
  if (grid.size() == 0 || grid.nrounds_max == 0) throw ConfigError("empty boosting grid");
  const std::vector<double> y(data.labels.begin(), data.labels.end());
  std::vector<double> score(grid.size());
  detail::parallel_for(grid.size(), options.jobs, [&](std::size_t k) {
    boost::Params p = grid.at(k);
    p.loss = boost::Loss::Logistic;
    const auto curve = cv_curve(data.features, y, p, grid.grid_folds, fork_seed(options.seed, 1));
    score[k] = *std::min_element(curve.begin(), curve.end());
  });
  boost::Params best = grid.at(argmin_first(score));
  best.loss = boost::Loss::Logistic;
  best.nrounds = grid.nrounds_max;
  const auto curve = cv_curve(data.features, y, best, grid.nrounds_folds, fork_seed(options.seed, 2));
  best.nrounds = argmin_first(curve) + 1;
  best.seed = options.seed;
  return best;
}

svm::Params tune_svm(const Dataset& data, const SvmGrid& grid, const TuneOptions& options) {
  require_tunable(data, grid.folds);
  if (grid.size() == 0) throw ConfigError("empty svm grid");
  const auto plan = SplitPlan::make(data.size(), grid.folds, fork_seed(options.seed, 1));
  std::vector<double> errors(grid.size(), 0.0);
  detail::parallel_for(grid.size(), options.jobs, [&](std::size_t k) {
    const svm::Params p = grid.at(k);
    double wrong = 0.0;
    for (std::size_t f = 0; f < grid.folds; ++f) {
      const Dataset train = data.subset(plan.complement(f));
      const Dataset val = data.subset(plan.members(f));
      const auto pred = svm::fit(train.features, train.labels, p).predict(val.features);
      for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != val.labels[i];
    }
    errors[k] = wrong;
  });
  svm::Params best = grid.at(argmin_first(errors));
  best.seed = options.seed;
  return best;
}

boost::Params tune_boost_profit(const Dataset& data, const ProfitTuning& tuning,
                                const TuneOptions& options) {
  if (data.targets.size() != data.size()) throw InputError("tune_boost_profit: dataset has no profit targets");
  require_tunable(data, tuning.folds);
  if (tuning.nrounds_max == 0) throw ConfigError("nrounds_max must be positive");
  boost::Params p = tuning.fixed;
  p.loss = boost::Loss::SquaredError;
  p.nrounds = tuning.nrounds_max;
  const auto curve = cv_curve(data.features, data.targets, p, tuning.folds, fork_seed(options.seed, 3));
  p.nrounds = argmin_first(curve) + 1;
  p.seed = options.seed;
  return p;
}

}  // namespace lapsekit::eval

namespace lapsekit::eval {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json summary_json(const Summary& s) {
  return json{{"mean", number_or_null(s.mean)}, {"sd", number_or_null(s.sd)}, {"n", s.n}};
}

Summary summary_from(const json& j) {
  return Summary{number_from(j.at("mean")), number_from(j.at("sd")), j.at("n").get<std::size_t>()};
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string report_json(const EvaluationReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    json rg = json::array();
    for (double v : f.retention_gain) rg.push_back(number_or_null(v));
    folds.push_back({{"fold", f.fold},
                     {"failed", f.failed},
                     {"error", f.error},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"confusion", f.cm},
                     {"accuracy", number_or_null(f.accuracy)},
                     {"retention_gain", rg}});
  }
  json rg = json::array();
  for (const auto& s : r.retention_gain) rg.push_back(summary_json(s));
  json j{{"format", "lapsekit-report"},
         {"version", 1},
         {"model", r.model},
         {"target_strategy", r.target_strategy},
         {"strategies", r.strategies},
         {"params", json::parse(r.params_json.empty() ? "{}" : r.params_json)},
         {"orientation", std::string(to_string(r.orientation))},
         {"seed", r.seed},
         {"n_observations", r.n_observations},
         {"sd_convention", r.sd_convention},
         {"accuracy", summary_json(r.accuracy)},
         {"retention_gain", rg},
         {"folds", folds},
         {"train_count", r.train_count},
         {"test_count", r.test_count}};
  return j.dump(2) + "\n";
}

EvaluationReport parse_report_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("report is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "lapsekit-report") throw InputError("not a lapsekit report");
  try {
    EvaluationReport r;
    r.model = j.at("model").get<std::string>();
    r.target_strategy = j.at("target_strategy").get<std::string>();
    r.strategies = j.at("strategies").get<std::vector<std::string>>();
    r.params_json = j.at("params").dump();
    r.orientation = parse_orientation(j.at("orientation").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_observations = j.at("n_observations").get<std::size_t>();
    r.sd_convention = j.at("sd_convention").get<std::string>();
    r.accuracy = summary_from(j.at("accuracy"));
    for (const auto& s : j.at("retention_gain")) r.retention_gain.push_back(summary_from(s));
    for (const auto& f : j.at("folds")) {
      FoldResult fr;
      fr.fold = f.at("fold").get<std::size_t>();
      fr.failed = f.at("failed").get<bool>();
      fr.error = f.at("error").get<std::string>();
      fr.n_train = f.at("n_train").get<std::size_t>();
      fr.n_test = f.at("n_test").get<std::size_t>();
      fr.cm = f.at("confusion").get<ConfusionMatrix>();
      fr.accuracy = number_from(f.at("accuracy"));
      for (const auto& v : f.at("retention_gain")) fr.retention_gain.push_back(number_from(v));
      r.folds.push_back(std::move(fr));
    }
    r.train_count = j.at("train_count").get<std::vector<std::uint32_t>>();
    r.test_count = j.at("test_count").get<std::vector<std::uint32_t>>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

std::string report_csv(const EvaluationReport& r) {
  std::string out = "model,target_strategy,seed,fold,metric,value\n";
  const auto prefix = r.model + "," + r.target_strategy + "," + std::to_string(r.seed) + ",";
  auto row = [&](const std::string& fold, const std::string& metric, const std::string& value) {
    out += prefix + fold + "," + metric + "," + value + "\n";
  };
  for (const auto& f : r.folds) {
    const auto k = std::to_string(f.fold);
    if (f.failed) {
      row(k, "failed", "1");
      continue;
    }
    row(k, "n_train", std::to_string(f.n_train));
    row(k, "n_test", std::to_string(f.n_test));
    row(k, "tn", std::to_string(f.cm.counts[0][0]));
    row(k, "fp", std::to_string(f.cm.counts[0][1]));
    row(k, "fn", std::to_string(f.cm.counts[1][0]));
    row(k, "tp", std::to_string(f.cm.counts[1][1]));
    row(k, "accuracy", fixed(f.accuracy, 6));
    for (std::size_t s = 0; s < r.strategies.size() && s < f.retention_gain.size(); ++s) {
      row(k, "retention_gain_" + r.strategies[s], fixed(f.retention_gain[s], 2));
    }
  }
  row("mean", "accuracy", fixed(r.accuracy.mean, 6));
  row("sd", "accuracy", fixed(r.accuracy.sd, 6));
  for (std::size_t s = 0; s < r.strategies.size() && s < r.retention_gain.size(); ++s) {
    row("mean", "retention_gain_" + r.strategies[s], fixed(r.retention_gain[s].mean, 2));
    row("sd", "retention_gain_" + r.strategies[s], fixed(r.retention_gain[s].sd, 2));
  }
  return out;
}

std::string report_basename(const EvaluationReport& r) {
  const std::string strategy = r.target_strategy.empty() ? "all" : r.target_strategy;
  return "report_" + r.model + "_" + strategy + "_seed" + std::to_string(r.seed);
}

}  // namespace lapsekit::eval
