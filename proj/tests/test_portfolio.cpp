#include <doctest.h>

#include <cmath>
#include <map>
#include <string>

#include "lapsekit/error.hpp"
#include "lapsekit/portfolio.hpp"

using namespace lapsekit;

namespace {

GeneratorConfig small_config(std::size_t n, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n_policies = n;
  cfg.seed = seed;
  return cfg;
}

double share(const std::vector<Policy>& ps, auto pred) {
  double k = 0;
  for (const auto& p : ps) k += pred(p) ? 1 : 0;
  return k / static_cast<double>(ps.size());
}

}  // namespace

TEST_CASE("realized lapse rate sits near the 38.6% target at 600k") {
  const auto ps = generate(small_config(600000, 11));
  const double rate = share(ps, [](const Policy& p) { return p.lapsed; });
  CHECK(rate >= 0.366);
  CHECK(rate <= 0.406);
}

TEST_CASE("categorical marginals within 1.5 pp at 100k") {
  const auto ps = generate(small_config(100000, 3));
  const Marginals m;
  constexpr double tol = 0.015;
  CHECK(std::abs(share(ps, [](auto& p) { return p.female; }) - m.female) <= tol);
  CHECK(std::abs(share(ps, [](auto& p) { return p.occupation_extra_screening; }) -
                 m.occupation_extra_screening) <= tol);
  CHECK(std::abs(share(ps, [](auto& p) { return p.physical_exam_required; }) - m.physical_exam_required) <=
        tol);
  CHECK(std::abs(share(ps, [](auto& p) { return p.single_premium; }) - m.single_premium) <= tol);
  CHECK(std::abs(share(ps, [](auto& p) { return p.currency_ntd; }) - m.currency_ntd) <= tol);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(share(ps, [&](auto& p) { return static_cast<std::size_t>(p.participation) == k; }) -
                   m.participation[k]) <= tol);
    CHECK(std::abs(share(ps, [&](auto& p) { return static_cast<std::size_t>(p.product_type) == k; }) -
                   m.product_type[k]) <= tol);
    CHECK(std::abs(share(ps, [&](auto& p) { return static_cast<std::size_t>(p.payment_method) == k; }) -
                   m.payment_method[k]) <= tol);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(share(ps, [&](auto& p) { return static_cast<std::size_t>(p.channel) == k; }) -
                   m.channel[k]) <= tol);
  }
}

TEST_CASE("generated fields respect their ranges and the participation cutover") {
  const auto ps = generate(small_config(20000, 5));
  const Marginals m;
  for (const auto& p : ps) {
    REQUIRE(p.age >= m.age_min);
    REQUIRE(p.age <= m.age_max);
    REQUIRE(p.nonlife_policy_count >= 0);
    REQUIRE(p.nonlife_policy_count <= m.nonlife_max);
    REQUIRE(p.face_amount >= m.face_min);
    REQUIRE(p.face_amount <= m.face_max);
    REQUIRE(p.inception_date >= m.window_start);
    REQUIRE(p.inception_date <= m.window_end);
    if (p.participation == Participation::MandatoryParticipating) {
      REQUIRE(p.inception_date < m.participation_cutover);
    } else {
      REQUIRE(p.inception_date >= m.participation_cutover);
    }
  }
}

TEST_CASE("zero base rate and zero signal give all-zero labels") {
  auto cfg = small_config(2000, 9);
  cfg.base_lapse_rate = 0.0;
  cfg.signal.scale = 0.0;
  for (const auto& p : generate(cfg)) REQUIRE_FALSE(p.lapsed);
}

TEST_CASE("generation is a pure function of the config") {
  const auto cfg = small_config(3000, 42);
  CHECK(generate(cfg) == generate(cfg));
  auto other = cfg;
  other.seed = 43;
  CHECK_FALSE(generate(cfg) == generate(other));
}

TEST_CASE("invalid generator configs are rejected") {
  auto cfg = small_config(10, 1);
  cfg.marginals.channel = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg = small_config(0, 1);
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg = small_config(10, 1);
  cfg.base_lapse_rate = 1.5;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("encoding drops the reference level of each categorical field") {
  const auto data = encode(generate(small_config(500, 2)));
  std::map<std::string, std::size_t> width;
  for (const auto& f : data.encoding.fields) width[f.field] = f.columns.size();
  CHECK(width["participation"] == 2);
  CHECK(width["product_type"] == 2);
  CHECK(width["payment_method"] == 2);
  CHECK(width["channel"] == 3);
  CHECK(width["lapsed"] == 0);
  CHECK(data.width() == 18);
  CHECK(data.encoding.column_names().size() == 18);
  for (const auto& name : data.encoding.column_names()) CHECK(name.find("lapsed") == std::string::npos);
}

TEST_CASE("a constant numeric field standardizes to zeros with a flag") {
  auto ps = generate(small_config(200, 4));
  for (auto& p : ps) p.age = 40;
  const auto data = encode(ps);
  const FieldEncoding* age = nullptr;
  for (const auto& f : data.encoding.fields) {
    if (f.field == "age") age = &f;
  }
  REQUIRE(age != nullptr);
  CHECK(age->zero_variance);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(data.features(i, age->columns[0]) == 0.0);
}

TEST_CASE("re-encoding training data with its own map is the identity") {
  const auto ps = generate(small_config(800, 6));
  const auto data = encode(ps);
  const auto again = encode_with(data.encoding, ps);
  CHECK(again.features == data.features);
  CHECK(again.labels == data.labels);
  CHECK(again.face_amounts == data.face_amounts);
}

TEST_CASE("standardized columns have zero mean and unit population variance") {
  const auto data = encode(generate(small_config(5000, 8)));
  for (const auto& f : data.encoding.fields) {
    if (f.kind != EncodingKind::Standardized) continue;
    const auto c = f.columns[0];
    double s = 0, ss = 0;
    for (std::size_t i = 0; i < data.size(); ++i) s += data.features(i, c);
    const double mean = s / static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) ss += (data.features(i, c) - mean) * (data.features(i, c) - mean);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9).scale(1));
    CHECK(ss / static_cast<double>(data.size()) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("subset keeps rows aligned") {
  const auto data = encode(generate(small_config(100, 1)));
  const std::vector<std::size_t> rows{7, 3, 99};
  const auto sub = data.subset(rows);
  REQUIRE(sub.size() == 3);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(sub.labels[k] == data.labels[rows[k]]);
    CHECK(sub.face_amounts[k] == data.face_amounts[rows[k]]);
    for (std::size_t c = 0; c < data.width(); ++c) CHECK(sub.features(k, c) == data.features(rows[k], c));
  }
}

TEST_CASE("csv round trip of 1,000 policies") {
  const auto ps = generate(small_config(1000, 12));
  CHECK(parse_csv(format_csv(ps)) == ps);
}

TEST_CASE("csv rejects a non-numeric age at the offending row") {
  auto text = format_csv(generate(small_config(3, 1)));
  // third line is data row 2 (the header is row 1)
  auto pos = text.find('\n');
  pos = text.find('\n', pos + 1) + 1;
  text.replace(pos, text.find(',', pos) - pos, "abc");
  try {
    parse_csv(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == "age");
  }
}

TEST_CASE("header-only csv gives an empty sequence") {
  const auto text = format_csv({});
  CHECK(parse_csv(text).empty());
}

TEST_CASE("csv with a wrong header or missing value is rejected") {
  CHECK_THROWS_AS(parse_csv("age,gender\n1,0\n"), ParseError);
  auto text = format_csv(generate(small_config(1, 1)));
  const auto comma = text.rfind(',');
  text.erase(comma + 1, text.size() - comma - 2);
  CHECK_THROWS_AS(parse_csv(text), ParseError);
}

TEST_CASE("dates round trip through ISO text") {
  const Date d{std::chrono::year{2004}, std::chrono::month{2}, std::chrono::day{29}};
  CHECK(format_date(d) == "2004-02-29");
  CHECK(parse_date("2004-02-29") == d);
  CHECK_THROWS(parse_date("2003-02-29"));
}
