#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace shopsim {

// USD amount held as integer cents. Every conversion from a real value
// rounds half-up to the cent.
class Money {
 public:
  constexpr Money() = default;

  static constexpr Money from_cents(std::int64_t cents) { return Money(cents); }
  static Money from_dollars(double dollars);

  constexpr std::int64_t cents() const { return cents_; }
  double dollars() const { return static_cast<double>(cents_) / 100.0; }

  // "28.80"
  std::string str() const;
  // "$28.80"
  std::string display() const { return "$" + str(); }

  constexpr Money operator+(Money o) const { return Money(cents_ + o.cents_); }
  constexpr Money operator-(Money o) const { return Money(cents_ - o.cents_); }
  constexpr Money operator*(std::int64_t n) const { return Money(cents_ * n); }
  constexpr Money& operator+=(Money o) {
    cents_ += o.cents_;
    return *this;
  }
  constexpr auto operator<=>(const Money&) const = default;

 private:
  constexpr explicit Money(std::int64_t cents) : cents_(cents) {}
  std::int64_t cents_ = 0;
};

// Round a real number of cents half-up. The small bias absorbs binary
// representation error so 100.5 cents stored as 100.4999... still rounds up.
std::int64_t round_half_up_cents(long double cents);

}  // namespace shopsim
