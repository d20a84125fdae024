#include <doctest.h>

#include <cmath>
#include <set>

#include "lapsekit/error.hpp"
#include "lapsekit/evaluation.hpp"
#include "lapsekit/log.hpp"

using namespace lapsekit;
using namespace lapsekit::eval;

namespace {

struct CaptureWarnings {
  std::vector<std::string> seen;
  WarningSink previous;
  CaptureWarnings() {
    previous = set_warning_sink([this](std::string_view m) { seen.emplace_back(m); });
  }
  ~CaptureWarnings() { set_warning_sink(previous); }
};

Dataset portfolio(std::size_t n, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n_policies = n;
  cfg.seed = seed;
  return encode(generate(cfg));
}

std::vector<NamedEconomics> presets() {
  return {{"aggressive", load_paper_presets(Strategy::Aggressive)},
          {"moderate", load_paper_presets(Strategy::Moderate)}};
}

ConfusionMatrix counts(long long tn, long long fp, long long fn, long long tp) {
  ConfusionMatrix cm;
  cm.counts = {{{tn, fp}, {fn, tp}}};
  return cm;
}

boost::Params quick_boost() {
  boost::Params p;
  p.nrounds = 20;
  p.max_depth = 3;
  return p;
}

}  // namespace

TEST_CASE("accuracy on published confusion matrices") {
  CHECK(std::abs(100 * accuracy(counts(309111, 38450, 81177, 137660)) - 78.88) <= 0.01);
  CHECK(std::abs(100 * accuracy(counts(310258, 37303, 88339, 130498)) - 77.82) <= 0.01);
  CHECK(std::abs(100 * accuracy(counts(296320, 51241, 78209, 140628)) - 77.15) <= 0.01);
  CHECK(std::abs(100 * accuracy(counts(304025, 43537, 88775, 130062)) - 76.64) <= 0.01);
  CHECK(accuracy(counts(5, 0, 0, 7)) == 1.0);
  CHECK_THROWS_AS(accuracy(ConfusionMatrix{}), InputError);
  const auto cm = counts(17, 4, 9, 11);
  CHECK(accuracy(cm) + static_cast<double>(cm.counts[0][1] + cm.counts[1][0]) / 41.0 == 1.0);
}

TEST_CASE("split plan: balanced folds, deterministic in the seed") {
  for (std::size_t n : {10u, 11u, 99u, 1003u}) {
    const auto plan = SplitPlan::make(n, 10, 7);
    std::size_t lo = n, hi = 0;
    for (std::size_t k = 0; k < 10; ++k) {
      lo = std::min(lo, plan.members(k).size());
      hi = std::max(hi, plan.members(k).size());
      CHECK(plan.members(k).size() + plan.complement(k).size() == n);
    }
    CHECK(hi - lo <= 1);
    CHECK(plan.fold == SplitPlan::make(n, 10, 7).fold);
  }
  CHECK_FALSE(SplitPlan::make(100, 10, 1).fold == SplitPlan::make(100, 10, 2).fold);
  CHECK_THROWS_AS(SplitPlan::make(9, 10, 1), InputError);
}

TEST_CASE("fold ledger: each row trains once and tests nine times") {
  const auto data = portfolio(400, 1);
  CaptureWarnings quiet;
  const auto r = run_protocol(data, linear::Params{}, presets(), 3);
  REQUIRE(r.train_count.size() == 400);
  for (std::size_t i = 0; i < 400; ++i) {
    CHECK(r.train_count[i] == 1);
    CHECK(r.test_count[i] == 9);
  }
  for (const auto& f : r.folds) {
    CHECK(f.n_train + f.n_test == 400);
    CHECK(f.n_train == 40);
    CHECK(f.cm.total() == static_cast<long long>(f.n_test));
  }
}

TEST_CASE("conventional orientation flips the ledger") {
  const auto data = portfolio(200, 2);
  ProtocolOptions opt;
  opt.orientation = Orientation::Conventional;
  const auto r = run_protocol(data, cart::Params{}, presets(), 4, opt);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(r.train_count[i] == 9);
    CHECK(r.test_count[i] == 1);
  }
  CHECK(r.orientation == Orientation::Conventional);
}

TEST_CASE("same seed gives the same report, byte for byte") {
  const auto data = portfolio(500, 3);
  CaptureWarnings quiet;
  for (const ModelSpec& spec : std::vector<ModelSpec>{linear::Params{}, cart::Params{}, svm::Params{}, quick_boost()}) {
    const auto a = run_protocol(data, spec, presets(), 9);
    const auto b = run_protocol(data, spec, presets(), 9);
    CHECK(a == b);
    CHECK(report_json(a) == report_json(b));
    CHECK(report_csv(a) == report_csv(b));
  }
}

TEST_CASE("parallel folds reproduce the serial report") {
  const auto data = portfolio(600, 4);
  ProtocolOptions serial, parallel;
  parallel.jobs = 4;
  CHECK(report_json(run_protocol(data, quick_boost(), presets(), 5, serial)) ==
        report_json(run_protocol(data, quick_boost(), presets(), 5, parallel)));
}

TEST_CASE("report aggregates recompute from the folds") {
  const auto data = portfolio(500, 5);
  const auto r = run_protocol(data, quick_boost(), presets(), 6);
  std::vector<double> acc;
  for (const auto& f : r.folds) acc.push_back(f.accuracy);
  double mean = 0;
  for (double v : acc) mean += v;
  mean /= static_cast<double>(acc.size());
  double ss = 0;
  for (double v : acc) ss += (v - mean) * (v - mean);
  CHECK(std::abs(r.accuracy.mean - mean) <= 1e-12);
  CHECK(std::abs(r.accuracy.sd - std::sqrt(ss / 9.0)) <= 1e-12);
  for (std::size_t s = 0; s < 2; ++s) {
    double m = 0;
    for (const auto& f : r.folds) m += f.retention_gain[s];
    m /= 10.0;
    CHECK(std::abs(r.retention_gain[s].mean - m) <= 1e-12 * std::max(1.0, std::abs(m)));
    CHECK(r.retention_gain[s].n == 10);
  }
  CHECK(r.sd_convention == "sample (n-1)");
  for (const auto& f : r.folds) CHECK(f.retention_gain[0] == doctest::Approx(retention_gain(f.cm, presets()[0].params)));
}

TEST_CASE("constant labels give the base rate in every fold, for every family") {
  auto data = portfolio(300, 6);
  std::fill(data.labels.begin(), data.labels.end(), 0);
  CaptureWarnings quiet;
  for (const ModelSpec& spec : std::vector<ModelSpec>{linear::Params{}, cart::Params{}, svm::Params{}, quick_boost()}) {
    const auto r = run_protocol(data, spec, presets(), 1);
    for (const auto& f : r.folds) {
      CHECK_FALSE(f.failed);
      CHECK(f.accuracy == 1.0);
    }
  }
}

TEST_CASE("failed folds are excluded with a warning") {
  // CART needs ten rows per training fold; with 95 rows half the folds have nine
  const auto data = portfolio(95, 7);
  CaptureWarnings w;
  const auto r = run_protocol(data, cart::Params{}, presets(), 2);
  std::size_t failed = 0;
  for (const auto& f : r.folds) failed += f.failed;
  CHECK(failed == 5);
  CHECK(r.accuracy.n == 5);
  CHECK(w.seen.size() == 5);
  double m = 0;
  for (const auto& f : r.folds) {
    if (!f.failed) m += f.accuracy;
  }
  CHECK(r.accuracy.mean == doctest::Approx(m / 5));
}

TEST_CASE("protocol preconditions") {
  const auto data = portfolio(9, 1);
  CHECK_THROWS_AS(run_protocol(data, linear::Params{}, presets(), 1), InputError);
}

TEST_CASE("profit protocol: no profitable contact means no gain") {
  const auto data = portfolio(400, 8);
  auto ep = load_paper_presets(Strategy::Aggressive);
  ep.acceptance = 0;
  ep.incentive.assign(13, 0.0);
  const NamedEconomics target{"never", ep};
  const auto r = run_profit_protocol(data, quick_boost(), target, {target}, 2);
  for (const auto& f : r.folds) {
    CHECK(f.cm.counts[0][1] + f.cm.counts[1][1] == 0);
    CHECK(f.retention_gain[0] == 0.0);
  }
  CHECK(r.model == "boost-profit");
  CHECK(r.target_strategy == "never");
}

TEST_CASE("profit protocol is deterministic and scores both strategies") {
  const auto data = portfolio(400, 9);
  const auto st = presets();
  const auto a = run_profit_protocol(data, quick_boost(), st[0], st, 4);
  CHECK(report_json(a) == report_json(run_profit_protocol(data, quick_boost(), st[0], st, 4)));
  CHECK(a.retention_gain.size() == 2);
  CHECK(report_basename(a) == "report_boost-profit_aggressive_seed4");
}

TEST_CASE("published grids") {
  const auto g = BoostGrid::paper_9_1();
  CHECK(g.size() == 405);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.at(k).subsample == 1.0);
  CHECK(g.at(0).eta == 0.05);
  CHECK(g.at(0).colsample_bytree == 0.4);
  CHECK(g.at(1).colsample_bytree == 0.5);
  CHECK(g.at(404).eta == 0.15);
  CHECK(g.at(404).max_depth == 30);
  std::set<std::tuple<double, double, std::size_t, std::size_t, double>> seen;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto p = g.at(k);
    seen.insert({p.eta, p.gamma_reg, p.max_depth, p.min_child_weight, p.colsample_bytree});
  }
  CHECK(seen.size() == 405);
  CHECK(g.nrounds_max == 200);
  CHECK(g.grid_folds == 2);
  CHECK(g.nrounds_folds == 5);

  const auto s = SvmGrid::paper_9_2();
  CHECK(s.size() == 25);
  CHECK(s.at(0).cost == 0.5);
  CHECK(s.at(0).kernel_gamma == 0.25);
  CHECK(s.at(24).cost == 10);
  CHECK(s.at(24).kernel_gamma == 1.25);

  const auto t = ProfitTuning::paper_9_3();
  CHECK(t.fixed.eta == 0.005);
  CHECK(t.fixed.gamma_reg == 1);
  CHECK(t.fixed.max_depth == 15);
  CHECK(t.fixed.min_child_weight == 15);
  CHECK(t.fixed.subsample == 0.7);
  CHECK(t.fixed.colsample_bytree == 0.8);
  CHECK(t.nrounds_max == 1000);
  CHECK(t.folds == 5);
}

TEST_CASE("staged loss sums follow the model round by round") {
  const auto data = portfolio(300, 10);
  const std::vector<double> y(data.labels.begin(), data.labels.end());
  const auto m = boost::fit(data.features, data.labels, quick_boost());
  const auto curve = staged_loss_sums(m, data.features, y);
  REQUIRE(curve.size() == 20);
  // the last entry is the misclassification count of the full model
  const auto pred = m.predict_class(data.features);
  double wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != data.labels[i];
  CHECK(curve.back() == wrong);
}

TEST_CASE("tiny-grid tuning is deterministic and picks from the grid") {
  const auto data = portfolio(300, 11);
  BoostGrid g;
  g.eta = {0.1, 0.3};
  g.gamma = {0};
  g.max_depth = {2, 3};
  g.min_child_weight = {5};
  g.subsample = {1};
  g.colsample_bytree = {1};
  g.nrounds_max = 15;
  const auto a = tune_boost_classification(data, g, {3, 1});
  CHECK(a == tune_boost_classification(data, g, {3, 2}));
  CHECK(a.nrounds >= 1);
  CHECK(a.nrounds <= 15);
  CHECK((a.eta == 0.1 || a.eta == 0.3));

  SvmGrid s;
  s.cost = {0.5, 1};
  s.kernel_gamma = {0.5};
  const auto sp = tune_svm(data, s, {3, 1});
  CHECK(sp == tune_svm(data, s, {3, 1}));

  auto profit = data;
  profit.targets = profit_targets(data.face_amounts, data.labels, load_paper_presets(Strategy::Aggressive));
  ProfitTuning t = ProfitTuning::paper_9_3();
  t.nrounds_max = 30;
  const auto pp = tune_boost_profit(profit, t, {3, 1});
  CHECK(pp.eta == 0.005);
  CHECK(pp.loss == boost::Loss::SquaredError);
  CHECK(pp.nrounds >= 1);
  CHECK(pp.nrounds <= 30);
  CHECK(pp == tune_boost_profit(profit, t, {3, 1}));
}

TEST_CASE("svm tuning breaks exact ties toward the first combination") {
  // identical settings score identically; the first must win
  const auto data = portfolio(120, 12);
  SvmGrid s;
  s.cost = {1, 1, 1};
  s.kernel_gamma = {0.5, 0.5};
  auto first = s.at(0);
  first.seed = 1;
  CHECK(tune_svm(data, s, {1, 1}) == first);
}

TEST_CASE("tuning rejects data too small to fill its folds") {
  const auto data = portfolio(8, 13);
  CHECK_THROWS_AS(tune_boost_classification(data, BoostGrid::paper_9_1(), {}), InputError);
  CHECK_THROWS_AS(tune_svm(data, SvmGrid::paper_9_2(), {}), InputError);
}

TEST_CASE("report json round trip and csv layout") {
  const auto data = portfolio(300, 14);
  const auto r = run_protocol(data, quick_boost(), presets(), 8);
  CHECK(parse_report_json(report_json(r)) == r);
  CHECK(report_basename(r) == "report_boost_all_seed8");
  const auto csv = report_csv(r);
  CHECK(csv.rfind("model,target_strategy,seed,fold,metric,value\n", 0) == 0);
  CHECK(csv.find("boost,,8,0,accuracy,") != std::string::npos);
  CHECK(csv.find("boost,,8,mean,retention_gain_aggressive,") != std::string::npos);
  // currency fields carry two decimals
  const auto pos = csv.find("retention_gain_moderate,", csv.find("boost,,8,3,"));
  const auto line = csv.substr(pos, csv.find('\n', pos) - pos);
  CHECK(line.size() - line.find('.') - 1 == 2);
  CHECK_THROWS_AS(parse_report_json("{}"), InputError);
  CHECK_THROWS_AS(parse_report_json("not json"), InputError);
}
