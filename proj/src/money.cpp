#include "shopsim/money.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace shopsim {

std::int64_t round_half_up_cents(long double cents) {
  return static_cast<std::int64_t>(std::floor(cents + 0.5L + 1e-6L));
}

Money Money::from_dollars(double dollars) {
  return Money(round_half_up_cents(static_cast<long double>(dollars) * 100.0L));
}

std::string Money::str() const {
  char buf[32];
  const std::int64_t a = std::llabs(cents_);
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", cents_ < 0 ? "-" : "",
                static_cast<long long>(a / 100), static_cast<long long>(a % 100));
  return buf;
}

}  // namespace shopsim
