#include "geogen/exact_value.hpp"

#include <cmath>

#include "geogen/error.hpp"

namespace geogen {
namespace {

// n = square * free with free square-free. Inputs here are small (products
// of diagram measures), trial division is adequate.
std::pair<std::int64_t, std::int64_t> split_square(std::int64_t n) {
  if (n > 1'000'000'000'000LL) throw Error(ErrorCode::Overflow, "radicand too large");
  std::int64_t square = 1;
  std::int64_t free = 1;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    int count = 0;
    while (n % p == 0) {
      n /= p;
      ++count;
    }
    for (int i = 0; i < count / 2; ++i) square *= p;
    if (count % 2 == 1) free *= p;
  }
  free *= n;
  return {square, free};
}

}  // namespace

ExactValue::ExactValue(Rational q) {
  if (!q.is_zero()) terms_[1] = q;
}

ExactValue ExactValue::surd(Rational q, std::int64_t radicand) {
  if (radicand < 0) throw Error(ErrorCode::InvalidArgument, "negative radicand");
  ExactValue v;
  if (radicand == 0 || q.is_zero()) return v;
  auto [square, free] = split_square(radicand);
  v.add_term(free, q * Rational(square));
  return v;
}

bool ExactValue::is_rational() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first == 1);
}

std::optional<Rational> ExactValue::as_rational() const {
  if (terms_.empty()) return Rational(0);
  if (!is_rational()) return std::nullopt;
  return terms_.begin()->second;
}

double ExactValue::to_double() const {
  double total = 0.0;
  for (const auto& [rad, q] : terms_) total += q.to_double() * std::sqrt(static_cast<double>(rad));
  return total;
}

int ExactValue::sign() const {
  if (terms_.empty()) return 0;
  return to_double() > 0 ? 1 : -1;
}

void ExactValue::add_term(std::int64_t radicand, const Rational& q) {
  auto it = terms_.find(radicand);
  if (it == terms_.end()) {
    if (!q.is_zero()) terms_.emplace(radicand, q);
    return;
  }
  it->second += q;
  if (it->second.is_zero()) terms_.erase(it);
}

ExactValue ExactValue::operator-() const {
  ExactValue r;
  for (const auto& [rad, q] : terms_) r.terms_.emplace(rad, -q);
  return r;
}

ExactValue& ExactValue::operator+=(const ExactValue& o) {
  for (const auto& [rad, q] : o.terms_) add_term(rad, q);
  return *this;
}

ExactValue& ExactValue::operator-=(const ExactValue& o) { return *this += -o; }

ExactValue& ExactValue::operator*=(const ExactValue& o) {
  ExactValue r;
  for (const auto& [ra, qa] : terms_) {
    for (const auto& [rb, qb] : o.terms_) {
      r += surd(qa * qb, ra * rb);
    }
  }
  *this = r;
  return *this;
}

std::optional<ExactValue> ExactValue::divided_by(const ExactValue& divisor) const {
  if (divisor.terms_.size() != 1) return std::nullopt;
  const auto& [rad, q] = *divisor.terms_.begin();
  // x / (q sqrt(r)) = x sqrt(r) / (q r)
  ExactValue inverse = surd(Rational(1) / (q * Rational(rad)), rad);
  return *this * inverse;
}

std::optional<ExactValue> ExactValue::sqrt() const {
  auto r = as_rational();
  if (!r || r->sign() < 0) return std::nullopt;
  if (r->is_zero()) return ExactValue();
  return surd(Rational(1, r->den()), r->num() * r->den());
}

std::string ExactValue::str() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [rad, q] : terms_) {
    Rational mag = q.sign() < 0 ? -q : q;
    if (!first) out += q.sign() < 0 ? "-" : "+";
    else if (q.sign() < 0) out += "-";
    first = false;
    if (rad == 1) {
      out += mag.str();
    } else {
      if (mag != Rational(1)) out += mag.str() + "*";
      out += "sqrt(" + std::to_string(rad) + ")";
    }
  }
  return out;
}

}  // namespace geogen
