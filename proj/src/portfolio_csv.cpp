#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lapsekit/error.hpp"
#include "lapsekit/portfolio.hpp"

namespace lapsekit {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class E, std::size_t K>
E parse_enum(std::string_view text, std::size_t row, std::string_view column) {
  for (std::size_t k = 0; k < K; ++k) {
    if (to_string(static_cast<E>(k)) == text) return static_cast<E>(k);
  }
  throw ParseError(row, std::string(column), "unknown level '" + std::string(text) + "'");
}

long parse_int(std::string_view text, std::size_t row, std::string_view column) {
  long v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError(row, std::string(column), "expected integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_flag(std::string_view text, std::size_t row, std::string_view column) {
  if (text == "0") return false;
  if (text == "1") return true;
  throw ParseError(row, std::string(column), "expected 0 or 1, got '" + std::string(text) + "'");
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()), unsigned(d.month()),
                unsigned(d.day()));
  return buf;
}

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument("expected YYYY-MM-DD");
  }
  int y = 0;
  unsigned m = 0, d = 0;
  const auto ok = [](auto res, const char* end) { return res.ec == std::errc{} && res.ptr == end; };
  const char* s = text.data();
  if (!ok(std::from_chars(s, s + 4, y), s + 4) || !ok(std::from_chars(s + 5, s + 7, m), s + 7) ||
      !ok(std::from_chars(s + 8, s + 10, d), s + 10)) {
    throw std::invalid_argument("expected YYYY-MM-DD");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw std::invalid_argument("not a calendar date");
  return date;
}

std::string format_csv(const std::vector<Policy>& policies) {
  std::string out;
  for (std::size_t k = 0; k < kPolicyFields.size(); ++k) {
    if (k) out += ',';
    out += kPolicyFields[k];
  }
  out += '\n';
  for (const auto& p : policies) {
    out += std::to_string(p.age);
    out += ',';
    out += p.female ? '1' : '0';
    out += ',';
    out += p.occupation_extra_screening ? '1' : '0';
    out += ',';
    out += p.physical_exam_required ? '1' : '0';
    out += ',';
    out += std::to_string(p.nonlife_policy_count);
    out += ',';
    out += format_date(p.inception_date);
    out += ',';
    out += format_double(p.face_amount);
    out += ',';
    out += p.single_premium ? '1' : '0';
    out += ',';
    out += to_string(p.participation);
    out += ',';
    out += to_string(p.product_type);
    out += ',';
    out += p.currency_ntd ? '1' : '0';
    out += ',';
    out += to_string(p.channel);
    out += ',';
    out += to_string(p.payment_method);
    out += ',';
    out += p.lapsed ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::vector<Policy> parse_csv(std::string_view text) {
  std::vector<Policy> out;
  std::size_t row = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++row;
    if (!header_seen) {
      const auto cols = split_fields(line);
      if (cols.size() != kPolicyFields.size()) {
        throw ParseError(row, "header", "expected " + std::to_string(kPolicyFields.size()) + " columns");
      }
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (cols[k] != kPolicyFields[k]) {
          throw ParseError(row, std::string(kPolicyFields[k]),
                           "unexpected header '" + std::string(cols[k]) + "'");
        }
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != kPolicyFields.size()) {
      throw ParseError(row, f.size() < kPolicyFields.size() ? std::string(kPolicyFields[f.size()]) : "end",
                       "expected " + std::to_string(kPolicyFields.size()) + " fields, got " +
                           std::to_string(f.size()));
    }
    Policy p;
    const long age = parse_int(f[0], row, kPolicyFields[0]);
    if (age < 0 || age > 120) throw ParseError(row, "age", "age outside [0, 120]");
    p.age = static_cast<int>(age);
    p.female = parse_flag(f[1], row, kPolicyFields[1]);
    p.occupation_extra_screening = parse_flag(f[2], row, kPolicyFields[2]);
    p.physical_exam_required = parse_flag(f[3], row, kPolicyFields[3]);
    const long nonlife = parse_int(f[4], row, kPolicyFields[4]);
    if (nonlife < 0) throw ParseError(row, "nonlife_policy_count", "negative count");
    p.nonlife_policy_count = static_cast<int>(nonlife);
    try {
      p.inception_date = parse_date(f[5]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(row, "inception_date", e.what());
    }
    {
      const auto* end = f[6].data() + f[6].size();
      const auto res = std::from_chars(f[6].data(), end, p.face_amount);
      if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError(row, "face_amount", "expected number, got '" + std::string(f[6]) + "'");
      }
      if (!(p.face_amount > 0.0) || !std::isfinite(p.face_amount)) {
        throw ParseError(row, "face_amount", "face amount must be positive");
      }
    }
    p.single_premium = parse_flag(f[7], row, kPolicyFields[7]);
    p.participation = parse_enum<Participation, 3>(f[8], row, kPolicyFields[8]);
    p.product_type = parse_enum<ProductType, 3>(f[9], row, kPolicyFields[9]);
    p.currency_ntd = parse_flag(f[10], row, kPolicyFields[10]);
    p.channel = parse_enum<Channel, 4>(f[11], row, kPolicyFields[11]);
    p.payment_method = parse_enum<PaymentMethod, 3>(f[12], row, kPolicyFields[12]);
    p.lapsed = parse_flag(f[13], row, kPolicyFields[13]);
    out.push_back(p);
  }
  if (!header_seen) throw ParseError(1, "header", "missing header");
  return out;
}

std::vector<Policy> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void write_csv(const std::vector<Policy>& policies, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << format_csv(policies);
  if (!out) throw InputError("write failed: " + path.string());
}

}  // namespace lapsekit
