#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace devsnet {

/// Simulated time point in integer microseconds, with a distinguished INFINITY.
///
/// Arithmetic on finite values is checked: an overflow throws instead of
/// wrapping, and INFINITY absorbs finite addends.
class SimTime {
public:
  using rep = std::uint64_t;
  static constexpr rep kInfinityRep = std::numeric_limits<rep>::max();

  constexpr SimTime() = default;

  static constexpr SimTime us(rep v) {
    if (v == kInfinityRep) {
      throw std::overflow_error("SimTime: value collides with INFINITY");
    }
    return SimTime(v);
  }
  static constexpr SimTime ms(rep v) { return us(checked_mul(v, 1000)); }
  static constexpr SimTime sec(rep v) { return us(checked_mul(v, 1000000)); }
  static constexpr SimTime infinity() { return SimTime(kInfinityRep); }
  static constexpr SimTime zero() { return SimTime(0); }

  /// Decodes the wire representation, where the all-ones pattern means INFINITY.
  static constexpr SimTime from_raw(rep v) { return SimTime(v); }

  constexpr bool is_infinite() const { return value_ == kInfinityRep; }
  constexpr bool is_finite() const { return value_ != kInfinityRep; }

  /// Microsecond count. Throws for INFINITY.
  constexpr rep micros() const {
    if (is_infinite()) {
      throw std::domain_error("SimTime: INFINITY has no microsecond count");
    }
    return value_;
  }
  constexpr rep raw() const { return value_; }
  double seconds() const { return static_cast<double>(micros()) / 1e6; }

  constexpr auto operator<=>(const SimTime&) const = default;

  friend constexpr SimTime operator+(SimTime a, SimTime b) {
    if (a.is_infinite() || b.is_infinite()) {
      return infinity();
    }
    if (b.value_ >= kInfinityRep - a.value_) {
      throw std::overflow_error("SimTime: addition overflow");
    }
    return SimTime(a.value_ + b.value_);
  }
  constexpr SimTime& operator+=(SimTime b) { return *this = *this + b; }

  /// Finite difference; requires a >= b and both finite.
  friend constexpr SimTime operator-(SimTime a, SimTime b) {
    if (a.is_infinite() || b.is_infinite()) {
      throw std::domain_error("SimTime: subtraction involving INFINITY");
    }
    if (a.value_ < b.value_) {
      throw std::domain_error("SimTime: negative difference");
    }
    return SimTime(a.value_ - b.value_);
  }

  SimTime operator*(rep k) const {
    if (is_infinite()) return infinity();
    return us(checked_mul(value_, k));
  }

  std::string str() const {
    return is_infinite() ? std::string("inf") : std::to_string(value_);
  }

private:
  constexpr explicit SimTime(rep v) : value_(v) {}

  static constexpr rep checked_mul(rep a, rep b) {
    if (a != 0 && b > (kInfinityRep - 1) / a) {
      throw std::overflow_error("SimTime: multiplication overflow");
    }
    return a * b;
  }

  rep value_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, SimTime t) {
  return os << t.str();
}

inline constexpr SimTime kInfinity = SimTime::infinity();

}  // namespace devsnet
