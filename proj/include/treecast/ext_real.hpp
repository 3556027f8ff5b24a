#ifndef TREECAST_EXT_REAL_HPP
#define TREECAST_EXT_REAL_HPP

#include <cmath>
#include <compare>
#include <limits>
#include <stdexcept>

namespace treecast {

/// Real number extended by +inf. Used for moment generating functions and
/// rate functions, which are legitimately infinite for heavy tails.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  constexpr ExtReal(double v) : v_(v) {}  // NOLINT: implicit by design of the arithmetic

  static constexpr ExtReal inf() { return ExtReal(std::numeric_limits<double>::infinity()); }

  constexpr bool is_inf() const { return v_ == std::numeric_limits<double>::infinity(); }
  constexpr bool is_finite() const { return !is_inf(); }

  /// Finite value; throws on +inf.
  double value() const {
    if (is_inf()) throw std::domain_error("ExtReal::value() on +inf");
    return v_;
  }
  /// Raw double, +inf encoded as IEEE infinity.
  constexpr double raw() const { return v_; }

  friend constexpr ExtReal operator+(ExtReal a, ExtReal b) {
    if (a.is_inf() || b.is_inf()) return inf();
    return ExtReal(a.v_ + b.v_);
  }
  friend constexpr ExtReal operator-(ExtReal a, double b) {
    if (a.is_inf()) return inf();
    return ExtReal(a.v_ - b);
  }
  friend constexpr ExtReal operator*(double s, ExtReal a) {
    if (a.is_inf()) return s > 0 ? inf() : (s == 0 ? ExtReal(0.0) : ExtReal(-std::numeric_limits<double>::infinity()));
    return ExtReal(s * a.v_);
  }

  friend constexpr bool operator==(ExtReal a, ExtReal b) { return a.v_ == b.v_; }
  friend constexpr auto operator<=>(ExtReal a, ExtReal b) { return a.v_ <=> b.v_; }

 private:
  double v_ = 0.0;
};

}  // namespace treecast

#endif  // TREECAST_EXT_REAL_HPP
