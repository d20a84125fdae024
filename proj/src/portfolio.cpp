#include "lapsekit/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lapsekit/error.hpp"
#include "lapsekit/random.hpp"

namespace lapsekit {

std::string_view to_string(Participation v) {
  switch (v) {
    case Participation::NonParticipating: return "NonParticipating";
    case Participation::Participating: return "Participating";
    case Participation::MandatoryParticipating: return "MandatoryParticipating";
  }
  return "?";
}

std::string_view to_string(ProductType v) {
  switch (v) {
    case ProductType::Traditional: return "Traditional";
    case ProductType::InterestAdjustable: return "InterestAdjustable";
    case ProductType::InvestmentLinked: return "InvestmentLinked";
  }
  return "?";
}

std::string_view to_string(Channel v) {
  switch (v) {
    case Channel::TA: return "TA";
    case Channel::BK: return "BK";
    case Channel::DM: return "DM";
    case Channel::Other: return "Other";
  }
  return "?";
}

std::string_view to_string(PaymentMethod v) {
  switch (v) {
    case PaymentMethod::Insurer: return "Insurer";
    case PaymentMethod::BankOrCard: return "BankOrCard";
    case PaymentMethod::PostOrConvenience: return "PostOrConvenience";
  }
  return "?";
}

namespace {

using std::chrono::sys_days;

template <std::size_t K>
void check_proportions(const std::array<double, K>& p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + ": proportion outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError(std::string(name) + ": proportions sum to " + std::to_string(sum) + ", not 1");
  }
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + ": probability outside [0, 1]");
}

template <std::size_t K>
std::size_t draw_category(Rng& rng, const std::array<double, K>& p) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    acc += p[k];
    if (u < acc) return k;
  }
  return K - 1;
}

Date uniform_date(Rng& rng, Date from, Date to_exclusive) {
  const auto lo = sys_days{from}.time_since_epoch().count();
  const auto hi = sys_days{to_exclusive}.time_since_epoch().count();
  const auto span = static_cast<std::size_t>(std::max<long>(hi - lo, 1));
  return Date{sys_days{std::chrono::days{lo + static_cast<long>(rng.index(span))}}};
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void GeneratorConfig::validate() const {
  if (n_policies == 0) throw ConfigError("n_policies must be positive");
  const auto& m = marginals;
  check_probability(m.female, "female");
  check_probability(m.occupation_extra_screening, "occupation_extra_screening");
  check_probability(m.physical_exam_required, "physical_exam_required");
  check_probability(m.single_premium, "single_premium");
  check_probability(m.currency_ntd, "currency_ntd");
  check_probability(m.nonlife_zero_share, "nonlife_zero_share");
  check_proportions(m.participation, "participation");
  check_proportions(m.product_type, "product_type");
  check_proportions(m.channel, "channel");
  check_proportions(m.payment_method, "payment_method");
  check_probability(base_lapse_rate, "base_lapse_rate");
  if (!(m.age_sd >= 0.0) || m.age_min < 0 || m.age_max > 120 || m.age_min > m.age_max) {
    throw ConfigError("age moments out of range");
  }
  if (!(m.nonlife_positive_mean >= 1.0) || m.nonlife_max < 0) {
    throw ConfigError("nonlife_positive_mean must be >= 1");
  }
  if (!(m.face_min > 0.0) || !(m.face_median > 0.0) || !(m.face_mean >= m.face_median) ||
      !(m.face_max >= m.face_min)) {
    throw ConfigError("face amount moments out of range");
  }
  if (!(sys_days{m.window_start} < sys_days{m.participation_cutover} &&
        sys_days{m.participation_cutover} <= sys_days{m.window_end})) {
    throw ConfigError("window_start < participation_cutover <= window_end required");
  }
}

double latent_signal(const Policy& p, const SignalSpec& s, const Marginals& m) {
  const double age_z = (p.age - 28.0) / 17.0;
  const double log_face = std::log(p.face_amount / 10000.0);
  const int capped_nonlife = std::min(p.nonlife_policy_count, 4);
  const double years_in_force =
      static_cast<double>((sys_days{m.window_end} - sys_days{p.inception_date}).count()) / 365.25;
  const auto part = static_cast<std::size_t>(p.participation);
  const auto prod = static_cast<std::size_t>(p.product_type);
  const auto chan = static_cast<std::size_t>(p.channel);
  const auto pay = static_cast<std::size_t>(p.payment_method);

  double score = s.age * age_z + s.log_face * log_face + s.nonlife_count * capped_nonlife;
  score += s.female * p.female + s.occupation_extra_screening * p.occupation_extra_screening +
           s.physical_exam_required * p.physical_exam_required +
           s.single_premium * p.single_premium + s.currency_ntd * p.currency_ntd;
  score += s.participation[part] + s.product_type[prod] + s.channel[chan] + s.payment_method[pay];

  score += s.age_squared * age_z * age_z;
  score += s.early_duration * std::exp(-years_in_force / 2.0);
  score += s.large_face_step * (p.face_amount > 50000.0 ? 1.0 : 0.0);

  score += s.insurer_paid_young * (p.payment_method == PaymentMethod::Insurer && p.age < 25);
  score += s.bank_channel_investment *
           (p.channel != Channel::TA && p.product_type != ProductType::Traditional);
  score += s.mandatory_log_face *
           (p.participation == Participation::MandatoryParticipating ? log_face : 0.0);
  score += s.no_nonlife_post_office *
           (p.nonlife_policy_count == 0 && p.payment_method == PaymentMethod::PostOrConvenience);
  return s.scale * score;
}

std::vector<Policy> generate(const GeneratorConfig& config) {
  config.validate();
  const auto& m = config.marginals;
  Rng rng(fork_seed(config.seed, 0));

  const double face_mu = std::log(m.face_median);
  const double face_sigma = std::sqrt(2.0 * std::log(m.face_mean / m.face_median));
  const double geom_continue = 1.0 - 1.0 / m.nonlife_positive_mean;

  std::vector<Policy> out(config.n_policies);
  for (auto& p : out) {
    p.participation = static_cast<Participation>(draw_category(rng, m.participation));
    p.inception_date = p.participation == Participation::MandatoryParticipating
                           ? uniform_date(rng, m.window_start, m.participation_cutover)
                           : uniform_date(rng, m.participation_cutover,
                                          Date{sys_days{m.window_end} + std::chrono::days{1}});
    const double age = std::round(m.age_mean + m.age_sd * rng.normal());
    p.age = static_cast<int>(std::clamp(age, double(m.age_min), double(m.age_max)));
    p.female = rng.bernoulli(m.female);
    p.occupation_extra_screening = rng.bernoulli(m.occupation_extra_screening);
    p.physical_exam_required = rng.bernoulli(m.physical_exam_required);
    if (rng.bernoulli(m.nonlife_zero_share)) {
      p.nonlife_policy_count = 0;
    } else {
      int count = 1;
      while (count < m.nonlife_max && rng.bernoulli(geom_continue)) ++count;
      p.nonlife_policy_count = count;
    }
    const double face = std::exp(face_mu + face_sigma * rng.normal());
    p.face_amount = std::round(std::clamp(face, m.face_min, m.face_max) * 100.0) / 100.0;
    p.single_premium = rng.bernoulli(m.single_premium);
    p.product_type = static_cast<ProductType>(draw_category(rng, m.product_type));
    p.currency_ntd = rng.bernoulli(m.currency_ntd);
    p.channel = static_cast<Channel>(draw_category(rng, m.channel));
    p.payment_method = static_cast<PaymentMethod>(draw_category(rng, m.payment_method));
  }

  if (config.base_lapse_rate <= 0.0 || config.base_lapse_rate >= 1.0) {
    for (auto& p : out) p.lapsed = config.base_lapse_rate >= 1.0;
    return out;
  }

  std::vector<double> score(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) score[i] = latent_signal(out[i], config.signal, m);

  // Intercept such that the mean lapse probability equals the target rate.
  const auto mean_prob = [&](double b) {
    double acc = 0.0;
    for (double s : score) acc += logistic(s + b);
    return acc / static_cast<double>(score.size());
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < config.base_lapse_rate ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);

  Rng label_rng(fork_seed(config.seed, 1));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].lapsed = label_rng.bernoulli(logistic(score[i] + intercept));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

namespace {

double days_since(const Date& d, const Date& origin) {
  return static_cast<double>((sys_days{d} - sys_days{origin}).count());
}

double numeric_field(const Policy& p, std::size_t field, const Date& origin) {
  switch (field) {
    case 0: return p.age;
    case 4: return p.nonlife_policy_count;
    case 5: return days_since(p.inception_date, origin);
    case 6: return p.face_amount;
  }
  return 0.0;
}

bool binary_field(const Policy& p, std::size_t field) {
  switch (field) {
    case 1: return p.female;
    case 2: return p.occupation_extra_screening;
    case 3: return p.physical_exam_required;
    case 7: return p.single_premium;
    case 10: return p.currency_ntd;
  }
  return false;
}

std::size_t level_of(const Policy& p, std::size_t field) {
  switch (field) {
    case 8: return static_cast<std::size_t>(p.participation);
    case 9: return static_cast<std::size_t>(p.product_type);
    case 11: return static_cast<std::size_t>(p.channel);
    case 12: return static_cast<std::size_t>(p.payment_method);
  }
  return 0;
}

std::vector<std::string> levels_of(std::size_t field) {
  std::vector<std::string> out;
  switch (field) {
    case 8:
      for (int k = 0; k < 3; ++k) out.emplace_back(to_string(static_cast<Participation>(k)));
      break;
    case 9:
      for (int k = 0; k < 3; ++k) out.emplace_back(to_string(static_cast<ProductType>(k)));
      break;
    case 11:
      for (int k = 0; k < 4; ++k) out.emplace_back(to_string(static_cast<Channel>(k)));
      break;
    case 12:
      for (int k = 0; k < 3; ++k) out.emplace_back(to_string(static_cast<PaymentMethod>(k)));
      break;
  }
  return out;
}

EncodingKind kind_of(std::size_t field) {
  switch (field) {
    case 0: case 4: case 5: case 6: return EncodingKind::Standardized;
    case 8: case 9: case 11: case 12: return EncodingKind::OneHot;
    case 13: return EncodingKind::Label;
    default: return EncodingKind::Binary;
  }
}

}  // namespace

std::vector<std::string> EncodingMap::column_names() const {
  std::vector<std::string> names(width);
  for (const auto& f : fields) {
    if (f.kind == EncodingKind::OneHot) {
      for (std::size_t k = 0; k < f.columns.size(); ++k) {
        names[f.columns[k]] = f.field + "=" + f.levels[k + 1];
      }
    } else if (f.kind != EncodingKind::Label) {
      names[f.columns.front()] = f.field;
    }
  }
  return names;
}

Dataset encode(const std::vector<Policy>& policies, Date window_start) {
  if (policies.empty()) throw InputError("encode: empty policy sequence");
  EncodingMap map;
  map.window_start = window_start;
  std::size_t col = 0;
  const auto n = static_cast<double>(policies.size());
  for (std::size_t f = 0; f < kPolicyFields.size(); ++f) {
    FieldEncoding enc;
    enc.field = std::string(kPolicyFields[f]);
    enc.kind = kind_of(f);
    switch (enc.kind) {
      case EncodingKind::Standardized: {
        double mean = 0.0;
        for (const auto& p : policies) mean += numeric_field(p, f, window_start);
        mean /= n;
        double var = 0.0;
        for (const auto& p : policies) {
          const double d = numeric_field(p, f, window_start) - mean;
          var += d * d;
        }
        var /= n;
        enc.mean = mean;
        enc.zero_variance = !(var > 0.0);
        enc.scale = enc.zero_variance ? 1.0 : std::sqrt(var);
        enc.columns = {col++};
        break;
      }
      case EncodingKind::Binary:
        enc.columns = {col++};
        break;
      case EncodingKind::OneHot:
        enc.levels = levels_of(f);
        for (std::size_t k = 1; k < enc.levels.size(); ++k) enc.columns.push_back(col++);
        break;
      case EncodingKind::Label:
        break;
    }
    map.fields.push_back(std::move(enc));
  }
  map.width = col;
  return encode_with(map, policies);
}

Dataset encode_with(const EncodingMap& map, const std::vector<Policy>& policies) {
  if (map.fields.size() != kPolicyFields.size()) throw ConfigError("encoding map does not cover every field");
  Dataset ds;
  ds.encoding = map;
  ds.features = Matrix(policies.size(), map.width);
  ds.labels.reserve(policies.size());
  ds.face_amounts.reserve(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const Policy& p = policies[i];
    auto row = ds.features.row(i);
    for (std::size_t f = 0; f < map.fields.size(); ++f) {
      const auto& enc = map.fields[f];
      switch (enc.kind) {
        case EncodingKind::Standardized:
          row[enc.columns[0]] =
              enc.zero_variance ? 0.0 : (numeric_field(p, f, map.window_start) - enc.mean) / enc.scale;
          break;
        case EncodingKind::Binary:
          row[enc.columns[0]] = binary_field(p, f) ? 1.0 : 0.0;
          break;
        case EncodingKind::OneHot: {
          const std::size_t level = level_of(p, f);
          if (level > 0) row[enc.columns[level - 1]] = 1.0;
          break;
        }
        case EncodingKind::Label:
          break;
      }
    }
    ds.labels.push_back(p.lapsed ? 1 : 0);
    ds.face_amounts.push_back(p.face_amount);
  }
  return ds;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = features.select_rows(rows);
  if (!labels.empty()) out.labels = select(labels, rows);
  if (!targets.empty()) out.targets = select(targets, rows);
  if (!face_amounts.empty()) out.face_amounts = select(face_amounts, rows);
  out.encoding = encoding;
  return out;
}

}  // namespace lapsekit
