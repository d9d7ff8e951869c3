#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "geogen/rational.hpp"

namespace geogen {

// Finite sum  sum_i q_i * sqrt(r_i)  with rational q_i and distinct
// square-free positive integers r_i (r = 1 is the rational part). Closed
// under +, -, *; division and sqrt are only defined where the result stays
// in this form.
class ExactValue {
 public:
  ExactValue() = default;
  ExactValue(Rational q);  // NOLINT implicit
  ExactValue(std::int64_t q) : ExactValue(Rational(q)) {}  // NOLINT implicit

  // q * sqrt(radicand) with radicand reduced to square-free form.
  static ExactValue surd(Rational q, std::int64_t radicand);

  bool is_zero() const { return terms_.empty(); }
  bool is_rational() const;
  std::optional<Rational> as_rational() const;
  // Single term q*sqrt(r).
  bool is_monomial() const { return terms_.size() <= 1; }
  const std::map<std::int64_t, Rational>& terms() const { return terms_; }

  double to_double() const;
  int sign() const;

  ExactValue operator-() const;
  ExactValue& operator+=(const ExactValue& o);
  ExactValue& operator-=(const ExactValue& o);
  ExactValue& operator*=(const ExactValue& o);

  friend ExactValue operator+(ExactValue a, const ExactValue& b) { return a += b; }
  friend ExactValue operator-(ExactValue a, const ExactValue& b) { return a -= b; }
  friend ExactValue operator*(ExactValue a, const ExactValue& b) { return a *= b; }

  // Fails (nullopt) when the divisor is zero or has more than one term.
  std::optional<ExactValue> divided_by(const ExactValue& divisor) const;
  // Principal square root; nullopt unless the value is a non-negative rational.
  std::optional<ExactValue> sqrt() const;

  friend bool operator==(const ExactValue&, const ExactValue&) = default;

  // "4", "5*sqrt(2)", "3+2*sqrt(2)", "1/2*sqrt(3)".
  std::string str() const;

 private:
  void add_term(std::int64_t radicand, const Rational& q);

  std::map<std::int64_t, Rational> terms_;
};

}  // namespace geogen
