#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace lapsekit {

/// Everything the lifetime-value and retention-gain formulas need.
/// Vectors are indexed by policy year t = 0..T.
struct EconomicParams {
  int horizon = 12;               // T
  double profitability = 0.005;   // p, constant per year
  double discount = 0.02;         // d, constant per year
  double contact_cost = 10.0;     // c, USD per contacted policyholder
  std::vector<double> r_lapse;    // retention probabilities of would-be lapsers
  std::vector<double> r_stay;     // all ones
  std::vector<double> incentive;  // delta, profit ratio given back per year
  double acceptance = 0.0;        // gamma

  /// Throws ConfigError when lengths or ranges are off.
  void validate() const;
  /// Constant vector p of length T + 1.
  std::vector<double> profitability_vector() const;
};

enum class Strategy { Aggressive, Moderate };

std::string_view to_string(Strategy s);
/// Accepts "aggressive" / "moderate"; throws ConfigError otherwise.
Strategy parse_strategy(std::string_view name);

/// The two published incentive strategies over a 12-year horizon.
EconomicParams load_paper_presets(Strategy strategy);

/// 2x2 confusion matrix in counts and in face amount, indexed [actual][predicted].
struct ConfusionMatrix {
  std::array<std::array<long long, 2>, 2> counts{};
  std::array<std::array<double, 2>, 2> face{};

  long long total() const noexcept;
  double total_face() const noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          std::span<const double> face_amounts);

/// Discounted sum of p_t * F * r_t / (1 + d)^t over t = 0..T.
double clv(std::span<const double> profitability, double face, std::span<const double> retention,
           double discount);

double reference_portfolio_value(const ConfusionMatrix& cm, const EconomicParams& ep);
double lapse_managed_portfolio_value(const ConfusionMatrix& cm, const EconomicParams& ep);

/// LMPV - RPV, cross-checked against the simplified closed form.
/// Throws ConsistencyError if the two disagree beyond 1e-9 relative.
double retention_gain(const ConfusionMatrix& cm, const EconomicParams& ep);

/// The simplified closed form alone (no cross-check).
double retention_gain_simplified(const ConfusionMatrix& cm, const EconomicParams& ep);

/// Expected gain (or loss) of contacting one policyholder with face F and
/// lapse label y. Summing it over contacted policies reproduces retention_gain.
double profit_target(double face, int lapsed, const EconomicParams& ep);

std::vector<double> profit_targets(std::span<const double> faces, std::span<const int> labels,
                                   const EconomicParams& ep);

}  // namespace lapsekit
