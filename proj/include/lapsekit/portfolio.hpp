#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lapsekit/matrix.hpp"

namespace lapsekit {

using Date = std::chrono::year_month_day;

enum class Participation : std::uint8_t { NonParticipating, Participating, MandatoryParticipating };
enum class ProductType : std::uint8_t { Traditional, InterestAdjustable, InvestmentLinked };
enum class Channel : std::uint8_t { TA, BK, DM, Other };
enum class PaymentMethod : std::uint8_t { Insurer, BankOrCard, PostOrConvenience };

std::string_view to_string(Participation v);
std::string_view to_string(ProductType v);
std::string_view to_string(Channel v);
std::string_view to_string(PaymentMethod v);

/// One life-insurance contract.
struct Policy {
  int age = 0;
  bool female = false;
  bool occupation_extra_screening = false;
  bool physical_exam_required = false;
  int nonlife_policy_count = 0;
  Date inception_date{std::chrono::year{2005}, std::chrono::month{1}, std::chrono::day{1}};
  double face_amount = 1.0;  // USD
  bool single_premium = false;
  Participation participation = Participation::NonParticipating;
  ProductType product_type = ProductType::Traditional;
  bool currency_ntd = true;
  Channel channel = Channel::TA;
  PaymentMethod payment_method = PaymentMethod::Insurer;
  bool lapsed = false;

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// CSV column order; also the order of EncodingMap records.
inline constexpr std::array<std::string_view, 14> kPolicyFields = {
    "age",          "gender",        "occupation_extra_screening", "physical_exam_required",
    "nonlife_policy_count", "inception_date", "face_amount", "single_premium",
    "participation", "product_type", "currency_ntd", "channel",
    "payment_method", "lapsed"};

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

/// Target marginals. Defaults follow the published descriptive statistics of
/// a Taiwanese life portfolio (629,331 policies, 1998-2013).
struct Marginals {
  double female = 0.48;
  double occupation_extra_screening = 0.195;
  double physical_exam_required = 0.036;
  double single_premium = 0.031;
  double currency_ntd = 0.881;
  std::array<double, 3> participation = {0.372, 0.162, 0.466};
  std::array<double, 3> product_type = {0.971, 0.017, 0.012};
  std::array<double, 4> channel = {0.939, 0.034, 0.024, 0.003};
  std::array<double, 3> payment_method = {0.188, 0.708, 0.104};

  double age_mean = 28.3;
  double age_sd = 16.8;
  int age_min = 0;
  int age_max = 80;

  // Zero-inflated geometric count: P(0) = nonlife_zero_share, otherwise 1 + Geom(mean - 1).
  double nonlife_zero_share = 0.55;
  double nonlife_positive_mean = 2.67;
  int nonlife_max = 33;

  // Log-normal face amount pinned by median and mean, clipped to [min, max].
  double face_median = 10000.0;
  double face_mean = 17165.0;
  double face_min = 333.0;
  double face_max = 2000000.0;

  Date window_start{std::chrono::year{1998}, std::chrono::month{1}, std::chrono::day{1}};
  Date window_end{std::chrono::year{2013}, std::chrono::month{7}, std::chrono::day{31}};
  /// Non-participating policies could not be sold before this date, so
  /// mandatory-participating inception dates fall before it and the others after.
  Date participation_cutover{std::chrono::year{2004}, std::chrono::month{1}, std::chrono::day{1}};
};

/// Coefficients of the latent lapse-propensity score. The intercept is not
/// configured: it is solved so the mean lapse probability hits base_lapse_rate.
struct SignalSpec {
  // linear
  double age = -0.25;            // per standardized year, (age - 28) / 17
  double log_face = 0.30;        // ln(face / 10,000)
  double nonlife_count = -0.18;  // min(count, 4)
  double female = -0.10;
  double occupation_extra_screening = 0.15;
  double physical_exam_required = -0.35;
  double single_premium = -1.20;
  double currency_ntd = -0.20;
  std::array<double, 3> participation = {0.0, -0.15, 0.25};
  std::array<double, 3> product_type = {0.0, 0.40, 0.70};
  std::array<double, 4> channel = {0.0, 0.55, 0.80, 0.30};
  std::array<double, 3> payment_method = {0.0, -0.45, 0.35};
  // nonlinear
  double age_squared = 0.35;         // standardized age squared
  double early_duration = 1.60;      // exp(-years in force / 2)
  double large_face_step = -0.90;    // 1(face > 50,000)
  // interactions
  double insurer_paid_young = 1.10;  // 1(payment = Insurer) * 1(age < 25)
  double bank_channel_investment = 0.90;    // 1(channel != TA) * 1(product != Traditional)
  double mandatory_log_face = -0.45;        // 1(MandatoryParticipating) * ln(face / 10,000)
  double no_nonlife_post_office = 0.80;     // 1(count = 0) * 1(payment = PostOrConvenience)
  /// Multiplies every coefficient above; 0 gives a constant lapse probability.
  double scale = 1.0;
};

struct GeneratorConfig {
  std::size_t n_policies = 50000;
  std::uint64_t seed = 0;
  Marginals marginals;
  SignalSpec signal;
  double base_lapse_rate = 243152.0 / 629331.0;

  /// Throws ConfigError on invalid proportions or ranges.
  void validate() const;
};

/// Deterministic in config (including seed).
std::vector<Policy> generate(const GeneratorConfig& config);

/// Latent score without intercept; exposed for tests and diagnostics.
double latent_signal(const Policy& policy, const SignalSpec& signal, const Marginals& marginals);

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

enum class EncodingKind : std::uint8_t { Standardized, Binary, OneHot, Label };

struct FieldEncoding {
  std::string field;
  EncodingKind kind = EncodingKind::Binary;
  std::vector<std::size_t> columns;  // empty for the label
  // Standardized
  double mean = 0.0;
  double scale = 1.0;
  bool zero_variance = false;
  // OneHot: levels[0] is the dropped reference level, columns[k] encodes levels[k + 1]
  std::vector<std::string> levels;

  friend bool operator==(const FieldEncoding&, const FieldEncoding&) = default;
};

struct EncodingMap {
  std::vector<FieldEncoding> fields;
  std::size_t width = 0;
  Date window_start{std::chrono::year{1998}, std::chrono::month{1}, std::chrono::day{1}};

  std::vector<std::string> column_names() const;
  friend bool operator==(const EncodingMap&, const EncodingMap&) = default;
};

/// Encoded numeric data. labels are always present when built from policies;
/// targets holds regression targets z when a profit run attaches them.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<double> targets;
  std::vector<double> face_amounts;
  EncodingMap encoding;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t width() const noexcept { return features.cols(); }

  /// Row subset (features, labels, targets, face amounts) sharing the encoding.
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Fits an encoding on policies and applies it. Throws InputError on empty input.
Dataset encode(const std::vector<Policy>& policies,
               Date window_start = Marginals{}.window_start);

/// Applies a previously fitted encoding (held-out data).
Dataset encode_with(const EncodingMap& map, const std::vector<Policy>& policies);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::vector<Policy> read_csv(const std::filesystem::path& path);
std::vector<Policy> parse_csv(std::string_view text);
void write_csv(const std::vector<Policy>& policies, const std::filesystem::path& path);
std::string format_csv(const std::vector<Policy>& policies);

std::string format_date(const Date& d);
/// Parses YYYY-MM-DD; throws std::invalid_argument.
Date parse_date(std::string_view text);

}  // namespace lapsekit
