#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <utility>

#include "bipn/errors.hpp"

namespace bipn {

/// Element of GF(2^m): an m-bit word read as a polynomial over GF(2),
/// bit b holding the coefficient of t^b.
struct FieldElement {
  std::uint64_t value = 0;

  friend bool operator==(FieldElement, FieldElement) = default;
};

namespace detail {

inline int poly_degree(std::uint64_t p) noexcept { return p == 0 ? -1 : 63 - std::countl_zero(p); }

inline std::uint64_t poly_mod(std::uint64_t a, std::uint64_t m) noexcept {
  const int dm = poly_degree(m);
  for (int da = poly_degree(a); da >= dm; da = poly_degree(a)) a ^= m << (da - dm);
  return a;
}

/// Trial division by every polynomial of degree 1..deg/2.
inline bool is_irreducible(std::uint64_t p) noexcept {
  const int deg = poly_degree(p);
  if (deg < 1) return false;
  for (int d = 1; 2 * d <= deg; ++d) {
    for (std::uint64_t q = std::uint64_t{1} << d; q < (std::uint64_t{2} << d); ++q) {
      if (poly_mod(p, q) == 0) return false;
    }
  }
  return true;
}

// Minimal-weight irreducible polynomials, index = degree. Trinomials where
// one exists, pentanomials otherwise; among those the lexicographically
// smallest middle exponents.
inline constexpr std::array<std::uint64_t, 33> standard_moduli = {
    0x0,                                  // unused
    0x3,          0x7,        0xB,        // m = 1..3
    0x13,         0x25,       0x43,       0x83,        0x11B,      // m = 4..8
    0x211,        0x409,      0x805,      0x1009,      0x201B,     // m = 9..13
    0x4021,       0x8003,     0x1002B,    0x20009,     0x40081,    // m = 14..18
    0x80027,      0x100009,   0x200005,   0x400003,    0x800021,   // m = 19..23
    0x100001B,    0x2000009,  0x400001B,  0x8000027,   0x10000009, // m = 24..28
    0x20000005,   0x40000003, 0x80000009, 0x10000008D,             // m = 29..32
};

}  // namespace detail

/// GF(2^m) for 1 <= m <= 32, with its reduction polynomial.
class FieldContext {
 public:
  static constexpr unsigned max_degree = 32;

  /// Validates `modulus` (full polynomial including the t^m term) by
  /// exhaustive trial division.
  FieldContext(unsigned m, std::uint64_t modulus) : m_(m), modulus_(modulus) {
    if (m < 1 || m > max_degree) throw validation_error("FieldContext: degree must be in [1, 32]");
    if (detail::poly_degree(modulus) != static_cast<int>(m)) {
      throw validation_error("FieldContext: modulus degree does not match m=" + std::to_string(m));
    }
    if (!detail::is_irreducible(modulus)) {
      throw validation_error("FieldContext: modulus is reducible over GF(2)");
    }
  }

  /// Field from the built-in table; validated once per process.
  static const FieldContext& standard(unsigned m) {
    if (m < 1 || m > max_degree) {
      throw validation_error("FieldContext::standard: no table entry for m=" + std::to_string(m));
    }
    static const std::array<FieldContext, max_degree> table = [] {
      return make_table(std::make_index_sequence<max_degree>{});
    }();
    return table[m - 1];
  }

  [[nodiscard]] unsigned degree() const noexcept { return m_; }
  [[nodiscard]] std::uint64_t modulus() const noexcept { return modulus_; }
  [[nodiscard]] std::uint64_t order() const noexcept { return std::uint64_t{1} << m_; }

  [[nodiscard]] bool contains(FieldElement a) const noexcept { return (a.value >> m_) == 0; }

  [[nodiscard]] FieldElement element(std::uint64_t v) const {
    if ((v >> m_) != 0) throw validation_error("FieldElement value out of range for GF(2^" + std::to_string(m_) + ")");
    return FieldElement{v};
  }

  [[nodiscard]] static FieldElement add(FieldElement a, FieldElement b) noexcept { return {a.value ^ b.value}; }

  [[nodiscard]] FieldElement multiply(FieldElement a, FieldElement b) const noexcept {
    // carry-less product, at most 2m-1 <= 63 bits
    std::uint64_t prod = 0;
    std::uint64_t x = a.value;
    std::uint64_t y = b.value;
    while (y != 0) {
      if (y & 1U) prod ^= x;
      x <<= 1;
      y >>= 1;
    }
    for (int d = detail::poly_degree(prod); d >= static_cast<int>(m_); d = detail::poly_degree(prod)) {
      prod ^= modulus_ << (d - static_cast<int>(m_));
    }
    return {prod};
  }

  [[nodiscard]] FieldElement power(FieldElement a, std::uint64_t e) const noexcept {
    FieldElement result{1};
    while (e != 0) {
      if (e & 1U) result = multiply(result, a);
      a = multiply(a, a);
      e >>= 1;
    }
    return result;
  }

  /// a^(2^m - 2); zero has no inverse.
  [[nodiscard]] FieldElement inverse(FieldElement a) const {
    if (a.value == 0) throw validation_error("FieldContext::inverse of zero");
    return power(a, order() - 2);
  }

  friend bool operator==(const FieldContext&, const FieldContext&) = default;

 private:
  template <std::size_t... I>
  static std::array<FieldContext, max_degree> make_table(std::index_sequence<I...>) {
    return {FieldContext(static_cast<unsigned>(I + 1), detail::standard_moduli[I + 1])...};
  }

  unsigned m_;
  std::uint64_t modulus_;
};

inline FieldElement field_multiply(const FieldContext& ctx, FieldElement a, FieldElement b) {
  if (!ctx.contains(a) || !ctx.contains(b)) throw validation_error("field_multiply: operand outside the field");
  return ctx.multiply(a, b);
}

}  // namespace bipn
