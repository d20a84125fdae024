#include "lapsekit/economics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lapsekit/error.hpp"

namespace lapsekit {

void EconomicParams::validate() const {
  if (horizon < 0) throw ConfigError("horizon must be non-negative");
  const auto len = static_cast<std::size_t>(horizon) + 1;
  if (r_lapse.size() != len || r_stay.size() != len || incentive.size() != len) {
    throw ConfigError("r_lapse, r_stay and incentive must all have length T + 1 = " +
                      std::to_string(len));
  }
  for (std::size_t t = 0; t < len; ++t) {
    if (!(r_lapse[t] >= 0.0 && r_lapse[t] <= 1.0)) throw ConfigError("r_lapse outside [0, 1]");
    if (r_stay[t] != 1.0) throw ConfigError("r_stay must be all ones");
    if (!(incentive[t] >= 0.0)) throw ConfigError("incentive must be non-negative");
    if (t > 0 && r_lapse[t] > r_lapse[t - 1]) throw ConfigError("r_lapse must be non-increasing");
  }
  if (!(acceptance >= 0.0 && acceptance <= 1.0)) throw ConfigError("acceptance outside [0, 1]");
  if (!(contact_cost >= 0.0)) throw ConfigError("contact cost must be non-negative");
  if (!(discount > -1.0)) throw ConfigError("discount rate must exceed -1");
}

std::vector<double> EconomicParams::profitability_vector() const {
  return std::vector<double>(static_cast<std::size_t>(horizon) + 1, profitability);
}

std::string_view to_string(Strategy s) {
  return s == Strategy::Aggressive ? "aggressive" : "moderate";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "aggressive") return Strategy::Aggressive;
  if (name == "moderate") return Strategy::Moderate;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (aggressive | moderate)");
}

EconomicParams load_paper_presets(Strategy strategy) {
  EconomicParams ep;
  ep.horizon = 12;
  ep.profitability = 0.005;
  ep.discount = 0.02;
  ep.contact_cost = 10.0;
  ep.r_lapse = {0.96, 0.87, 0.67, 0.37, 0.27, 0.21, 0.15, 0.12, 0.10, 0.08, 0.06, 0.05, 0.04};
  ep.r_stay.assign(13, 1.0);
  if (strategy == Strategy::Aggressive) {
    ep.incentive = {0.0,    0.0,    0.0003, 0.0003, 0.0006, 0.0006, 0.0009,
                    0.0009, 0.0012, 0.0012, 0.0015, 0.0015, 0.0018};
    ep.acceptance = 0.20;
  } else {
    ep.incentive = {0.0,    0.0,    0.00015, 0.00015, 0.0003, 0.0003, 0.00045,
                    0.00045, 0.0006, 0.0006,  0.0006,  0.0006, 0.0006};
    ep.acceptance = 0.10;
  }
  if (ep.incentive[0] != 0.0 || ep.incentive[1] != 0.0) {
    throw ConsistencyError("preset incentives must start with two zero years");
  }
  ep.validate();
  return ep;
}

long long ConfusionMatrix::total() const noexcept {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double ConfusionMatrix::total_face() const noexcept {
  return face[0][0] + face[0][1] + face[1][0] + face[1][1];
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          std::span<const double> face_amounts) {
  if (labels.size() != predictions.size() || labels.size() != face_amounts.size()) {
    throw ShapeError("confusion: labels, predictions and face amounts differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int j = labels[i] != 0;
    const int k = predictions[i] != 0;
    ++cm.counts[j][k];
    cm.face[j][k] += face_amounts[i];
  }
  return cm;
}

double clv(std::span<const double> profitability, double face, std::span<const double> retention,
           double discount) {
  if (profitability.size() != retention.size()) {
    throw ShapeError("clv: profitability and retention vectors differ in length");
  }
  double value = 0.0;
  double factor = 1.0;  // (1 + d)^-t
  for (std::size_t t = 0; t < profitability.size(); ++t) {
    value += profitability[t] * face * retention[t] * factor;
    factor /= 1.0 + discount;
  }
  return value;
}

namespace {

std::vector<double> minus(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) out[t] = a[t] - b[t];
  return out;
}

}  // namespace

double reference_portfolio_value(const ConfusionMatrix& cm, const EconomicParams& ep) {
  const auto p = ep.profitability_vector();
  return clv(p, cm.face[0][0] + cm.face[0][1], ep.r_stay, ep.discount) +
         clv(p, cm.face[1][0] + cm.face[1][1], ep.r_lapse, ep.discount);
}

double lapse_managed_portfolio_value(const ConfusionMatrix& cm, const EconomicParams& ep) {
  const auto p = ep.profitability_vector();
  const auto net = minus(p, ep.incentive);
  const double g = ep.acceptance;
  const auto contacted = static_cast<double>(cm.counts[0][1] + cm.counts[1][1]);
  return clv(p, cm.face[0][0], ep.r_stay, ep.discount) +
         clv(p, cm.face[1][0] + (1.0 - g) * cm.face[1][1], ep.r_lapse, ep.discount) +
         clv(net, cm.face[0][1] + g * cm.face[1][1], ep.r_stay, ep.discount) -
         ep.contact_cost * contacted;
}

double retention_gain_simplified(const ConfusionMatrix& cm, const EconomicParams& ep) {
  const auto p = ep.profitability_vector();
  const auto net = minus(p, ep.incentive);
  const auto contacted = static_cast<double>(cm.counts[0][1] + cm.counts[1][1]);
  return ep.acceptance * (clv(net, cm.face[1][1], ep.r_stay, ep.discount) -
                          clv(p, cm.face[1][1], ep.r_lapse, ep.discount)) -
         clv(ep.incentive, cm.face[0][1], ep.r_stay, ep.discount) - ep.contact_cost * contacted;
}

double retention_gain(const ConfusionMatrix& cm, const EconomicParams& ep) {
  const double lmpv = lapse_managed_portfolio_value(cm, ep);
  const double rpv = reference_portfolio_value(cm, ep);
  const double full = lmpv - rpv;
  const double simplified = retention_gain_simplified(cm, ep);
  // Cancellation in LMPV - RPV leaves rounding noise proportional to the
  // portfolio value, so that magnitude bounds the admissible gap as well.
  const double eps = std::numeric_limits<double>::epsilon();
  const double scale = std::max({std::abs(full), std::abs(simplified), 1.0});
  const double tol = 1e-9 * scale + 64.0 * eps * (std::abs(lmpv) + std::abs(rpv));
  if (std::abs(full) + std::abs(simplified) > 0.0 && !(std::abs(full - simplified) <= tol)) {
    throw ConsistencyError("retention gain: LMPV - RPV = " + std::to_string(full) +
                           " but simplified form = " + std::to_string(simplified));
  }
  return full;
}

double profit_target(double face, int lapsed, const EconomicParams& ep) {
  const auto p = ep.profitability_vector();
  if (lapsed == 0) {
    return -clv(ep.incentive, face, ep.r_stay, ep.discount) - ep.contact_cost;
  }
  const auto net = minus(p, ep.incentive);
  return ep.acceptance *
             (clv(net, face, ep.r_stay, ep.discount) - clv(p, face, ep.r_lapse, ep.discount)) -
         ep.contact_cost;
}

std::vector<double> profit_targets(std::span<const double> faces, std::span<const int> labels,
                                   const EconomicParams& ep) {
  if (faces.size() != labels.size()) throw ShapeError("profit_targets: length mismatch");
  std::vector<double> z(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i) z[i] = profit_target(faces[i], labels[i], ep);
  return z;
}

}  // namespace lapsekit
