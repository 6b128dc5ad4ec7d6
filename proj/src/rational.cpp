#include "cadence/rational.hpp"

#include <charconv>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace cadence {

namespace {

using wide = __int128;

Rational from_wide(wide num, wide den) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  wide a = num < 0 ? -num : num;
  wide b = den;
  while (b != 0) {
    wide t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  constexpr wide lim = INT64_MAX;
  if (num > lim || num < -lim || den > lim) throw std::overflow_error("rational overflow");
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("not a rational: '" + std::string(whole) + "'");
  return v;
}

}  // namespace

Rational::Rational(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw std::domain_error("rational with zero denominator");
  std::int64_t g = std::gcd(numerator, denominator);
  if (g == 0) g = 1;
  num_ = numerator / g;
  den_ = denominator / g;
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
}

std::int64_t Rational::floor() const noexcept {
  std::int64_t q = num_ / den_;
  if (num_ % den_ != 0 && num_ < 0) --q;
  return q;
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text, text));
  std::int64_t n = parse_int(text.substr(0, slash), text);
  std::string_view d_text = text.substr(slash + 1);
  if (!d_text.empty() && d_text.front() == '-')
    throw std::invalid_argument("not a rational: '" + std::string(text) + "'");
  std::int64_t d = parse_int(d_text, text);
  if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
  return Rational(n, d);
}

Rational operator+(const Rational& a, const Rational& b) {
  return from_wide(wide(a.num_) * b.den_ + wide(b.num_) * a.den_, wide(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return from_wide(wide(a.num_) * b.den_ - wide(b.num_) * a.den_, wide(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return from_wide(wide(a.num_) * b.num_, wide(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return from_wide(wide(a.num_) * b.den_, wide(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept {
  wide l = wide(a.num_) * b.den_;
  wide r = wide(b.num_) * a.den_;
  if (l < r) return std::strong_ordering::less;
  if (l > r) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

}  // namespace cadence
