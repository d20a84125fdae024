#include <doctest.h>

#include <cmath>

#include "economics_oracle.hpp"
#include "lapsekit/economics.hpp"
#include "lapsekit/error.hpp"

using namespace lapsekit;

namespace {

ConfusionMatrix from_book(const std::vector<oracle::PolicyCell>& book) {
  std::vector<int> y, yhat;
  std::vector<double> f;
  for (const auto& c : book) {
    y.push_back(c.actual);
    yhat.push_back(c.predicted);
    f.push_back(c.face);
  }
  return confusion(y, yhat, f);
}

ConfusionMatrix cell(int actual, int predicted, long long n, double face) {
  ConfusionMatrix cm;
  cm.counts[actual][predicted] = n;
  cm.face[actual][predicted] = face;
  return cm;
}

}  // namespace

TEST_CASE("confusion matrix counts and face sums") {
  const std::vector<int> y{0, 0, 1, 1, 1}, perfect = y, stay{0, 0, 0, 0, 0};
  const std::vector<double> f{1, 2, 3, 4, 5};
  const auto a = confusion(y, perfect, f);
  CHECK(a.counts[0][1] == 0);
  CHECK(a.counts[1][0] == 0);
  CHECK(a.face[1][1] == 12.0);
  const auto b = confusion(y, stay, f);
  CHECK(b.counts[0][1] + b.counts[1][1] == 0);
  CHECK(b.face[0][1] + b.face[1][1] == 0.0);
  CHECK(b.total() == 5);
  CHECK(b.total_face() == 15.0);
  CHECK_THROWS_AS(confusion(y, std::vector<int>{0}, f), ShapeError);

  ConfusionMatrix published;
  published.counts = {{{309111, 38450}, {81177, 137660}}};
  CHECK(published.total() == 566398);
}

TEST_CASE("clv") {
  CHECK(clv(std::vector<double>(3, 0.01), 100, std::vector<double>(3, 1.0), 0.0) == doctest::Approx(3.0));
  CHECK(clv(std::vector<double>(3, 0.005), 10000, std::vector<double>(3, 1.0), 0.02) ==
        doctest::Approx(50 * (1 + 1 / 1.02 + 1 / (1.02 * 1.02))));
  CHECK(clv(std::vector<double>(3, 0.005), 10000, std::vector<double>(3, 1.0), 0.02) ==
        doctest::Approx(147.0781).epsilon(1e-6));
  CHECK(clv(std::vector<double>(3, 0.005), 10000, std::vector<double>(3, 0.0), 0.02) == 0.0);
  CHECK_THROWS_AS(clv(std::vector<double>(3, 0.005), 1, std::vector<double>(2, 1.0), 0.0), ShapeError);
  // undiscounted, always retained: p * F * (T + 1)
  for (int t = 0; t < 30; ++t) {
    const std::size_t len = static_cast<std::size_t>(t) + 1;
    CHECK(clv(std::vector<double>(len, 0.005), 12345.0, std::vector<double>(len, 1.0), 0.0) ==
          doctest::Approx(0.005 * 12345.0 * static_cast<double>(len)).epsilon(1e-14));
  }
}

TEST_CASE("reference portfolio value") {
  auto ep = load_paper_presets(Strategy::Aggressive);
  CHECK(reference_portfolio_value(ConfusionMatrix{}, ep) == 0.0);
  ep.discount = 0.0;
  auto cm = cell(0, 0, 3, 30000.0);
  cm.counts[0][1] = 2;
  cm.face[0][1] = 20000.0;
  CHECK(reference_portfolio_value(cm, ep) == doctest::Approx(0.005 * 50000.0 * 13));
}

TEST_CASE("portfolio values match the per-policy simulation") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ep = oracle::random_params(rng);
    const auto book = oracle::random_book(rng, 1 + rng.index(1000));
    const auto cm = from_book(book);
    const auto sim = oracle::simulate(book, ep);
    CHECK(oracle::relative_gap(reference_portfolio_value(cm, ep), sim.rpv) <= 1e-9);
    CHECK(oracle::relative_gap(lapse_managed_portfolio_value(cm, ep), sim.lmpv) <= 1e-9);
    CHECK(oracle::relative_gap(retention_gain(cm, ep), sim.lmpv - sim.rpv) <= 1e-9);
  }
}

TEST_CASE("a do-nothing strategy is value-neutral") {
  auto ep = load_paper_presets(Strategy::Aggressive);
  ep.acceptance = 0;
  ep.incentive.assign(13, 0.0);
  ep.contact_cost = 0;
  Rng rng(2);
  const auto cm = oracle::random_confusion(rng);
  CHECK(lapse_managed_portfolio_value(cm, ep) == doctest::Approx(reference_portfolio_value(cm, ep)));
}

TEST_CASE("retention gain edge cells") {
  const auto ep = load_paper_presets(Strategy::Aggressive);
  CHECK(retention_gain(cell(0, 0, 100, 1e6), ep) == doctest::Approx(0.0).scale(1));
  CHECK(retention_gain(cell(1, 0, 100, 1e6), ep) == doctest::Approx(0.0).scale(1));
  auto flat = ep;
  flat.incentive.assign(13, 0.0);
  CHECK(retention_gain(cell(0, 1, 37, 5e5), flat) == doctest::Approx(-10.0 * 37));
}

TEST_CASE("full and simplified retention gain agree on random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ep = oracle::random_params(rng);
    const auto cm = oracle::random_confusion(rng);
    const double full = lapse_managed_portfolio_value(cm, ep) - reference_portfolio_value(cm, ep);
    CHECK(oracle::relative_gap(full, retention_gain_simplified(cm, ep)) <= 1e-9);
    CHECK_NOTHROW(retention_gain(cm, ep));
  }
}

TEST_CASE("retention gain falls with contact cost and rises with acceptance") {
  Rng rng(4);
  for (const auto s : {Strategy::Aggressive, Strategy::Moderate}) {
    const auto base = load_paper_presets(s);
    for (int trial = 0; trial < 50; ++trial) {
      const auto cm = oracle::random_confusion(rng);
      double previous = retention_gain(cm, base);
      for (double c = 11; c <= 50; c += 3) {
        auto ep = base;
        ep.contact_cost = c;
        const double rg = retention_gain(cm, ep);
        CHECK(rg <= previous);
        previous = rg;
      }
      // bracket: CLV(p - delta, F11, r_stay) - CLV(p, F11, r_lapse)
      std::vector<double> net(13);
      for (std::size_t t = 0; t < 13; ++t) net[t] = base.profitability - base.incentive[t];
      const double bracket = clv(net, cm.face[1][1], base.r_stay, base.discount) -
                             clv(base.profitability_vector(), cm.face[1][1], base.r_lapse, base.discount);
      if (!(bracket > 0)) continue;
      previous = -INFINITY;
      for (double g = 0; g <= 1.0; g += 0.1) {
        auto ep = base;
        ep.acceptance = g;
        const double rg = retention_gain(cm, ep);
        CHECK(rg >= previous);
        previous = rg;
      }
    }
  }
}

TEST_CASE("profit target examples") {
  auto ep = load_paper_presets(Strategy::Aggressive);
  auto flat = ep;
  flat.incentive.assign(13, 0.0);
  CHECK(profit_target(10000, 0, flat) == doctest::Approx(-10.0));
  auto never = ep;
  never.acceptance = 0;
  CHECK(profit_target(10000, 1, never) == doctest::Approx(-10.0));

  // direct per-term sum for a lapser with F = 10,000
  double gain = 0;
  for (int t = 0; t <= 12; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const double disc = std::pow(1.02, t);
    gain += (0.005 - ep.incentive[k]) * 10000 * 1.0 / disc - 0.005 * 10000 * ep.r_lapse[k] / disc;
  }
  CHECK(profit_target(10000, 1, ep) == doctest::Approx(0.20 * gain - 10).epsilon(1e-12));
}

TEST_CASE("summing targets over contacted policies reproduces the retention gain") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ep = oracle::random_params(rng);
    const auto book = oracle::random_book(rng, 1 + rng.index(500));
    std::vector<int> y;
    std::vector<double> f;
    for (const auto& c : book) {
      y.push_back(c.actual);
      f.push_back(c.face);
    }
    const auto z = profit_targets(f, y, ep);
    double sum = 0;
    for (std::size_t i = 0; i < book.size(); ++i) {
      if (book[i].predicted) sum += z[i];
    }
    CHECK(oracle::relative_gap(sum, retention_gain(from_book(book), ep)) <= 1e-9);
  }
}

TEST_CASE("published presets") {
  const auto a = load_paper_presets(Strategy::Aggressive);
  const auto m = load_paper_presets(Strategy::Moderate);
  const std::vector<double> r{0.96, 0.87, 0.67, 0.37, 0.27, 0.21, 0.15, 0.12, 0.10, 0.08, 0.06, 0.05, 0.04};
  for (const auto* ep : {&a, &m}) {
    CHECK(ep->horizon == 12);
    CHECK(ep->profitability == 0.005);
    CHECK(ep->discount == 0.02);
    CHECK(ep->contact_cost == 10.0);
    CHECK(ep->r_lapse == r);
    CHECK(ep->r_stay == std::vector<double>(13, 1.0));
    CHECK(ep->incentive[0] == 0.0);
    CHECK(ep->incentive[1] == 0.0);
  }
  CHECK(a.r_lapse[3] == 0.37);
  CHECK(m.incentive[12] == 0.0006);
  CHECK(a.incentive[12] == 0.0018);
  CHECK(a.acceptance == 0.20);
  CHECK(m.acceptance == 0.10);
  CHECK(parse_strategy("moderate") == Strategy::Moderate);
  CHECK_THROWS_AS(parse_strategy("bold"), ConfigError);
}

TEST_CASE("invalid economic parameters are rejected") {
  auto ep = load_paper_presets(Strategy::Aggressive);
  ep.r_lapse.pop_back();
  CHECK_THROWS_AS(ep.validate(), ConfigError);
  ep = load_paper_presets(Strategy::Aggressive);
  ep.r_stay[4] = 0.9;
  CHECK_THROWS_AS(ep.validate(), ConfigError);
  ep = load_paper_presets(Strategy::Aggressive);
  ep.r_lapse[5] = 0.5;
  CHECK_THROWS_AS(ep.validate(), ConfigError);
  ep = load_paper_presets(Strategy::Aggressive);
  ep.acceptance = 1.2;
  CHECK_THROWS_AS(ep.validate(), ConfigError);
}
