#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bipn/errors.hpp"

namespace bipn {

/// An element of F_2^n.
///
/// Bit 0 is the first variable x_1. The text form is the little-endian 0/1
/// string, character i holding bit i. The hex form packs four bits per digit
/// in the same order: digit j carries bits 4j..4j+3 with bit 4j as the least
/// significant bit of the digit.
class BitVector {
 public:
  using word_type = std::uint64_t;
  static constexpr std::size_t word_bits = 64;

  BitVector() = default;
  explicit BitVector(std::size_t n) : n_(n), words_((n + word_bits - 1) / word_bits, 0) {}

  /// Packs the low n bits of `index` (n <= 64).
  static BitVector from_index(std::size_t n, std::uint64_t index) {
    if (n > word_bits) throw dimension_error("BitVector::from_index: n > 64");
    BitVector v(n);
    if (n > 0) v.words_[0] = n == word_bits ? index : (index & ((word_type{1} << n) - 1));
    return v;
  }

  static BitVector ones(std::size_t n) {
    BitVector v(n);
    for (auto& w : v.words_) w = ~word_type{0};
    v.trim();
    return v;
  }

  static BitVector parse(std::string_view text) {
    BitVector v(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') {
        v.set(i, true);
      } else if (text[i] != '0') {
        throw parse_error("BitVector: expected 0/1 string, got '" + std::string(text) + "'");
      }
    }
    return v;
  }

  static BitVector parse_hex(std::string_view hex, std::size_t n) {
    if (hex.size() != (n + 3) / 4) {
      throw parse_error("BitVector: hex string of " + std::to_string(hex.size()) +
                        " digits cannot hold exactly " + std::to_string(n) + " bits");
    }
    BitVector v(n);
    for (std::size_t j = 0; j < hex.size(); ++j) {
      const char c = hex[j];
      unsigned digit = 0;
      if (c >= '0' && c <= '9') {
        digit = static_cast<unsigned>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        digit = static_cast<unsigned>(c - 'a' + 10);
      } else if (c >= 'A' && c <= 'F') {
        digit = static_cast<unsigned>(c - 'A' + 10);
      } else {
        throw parse_error("BitVector: bad hex digit in '" + std::string(hex) + "'");
      }
      for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t i = 4 * j + b;
        if ((digit >> b) & 1U) {
          if (i >= n) throw parse_error("BitVector: hex digit sets bit beyond length");
          v.set(i, true);
        }
      }
    }
    return v;
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] bool empty() const noexcept { return n_ == 0; }

  [[nodiscard]] bool get(std::size_t i) const noexcept {
    return (words_[i / word_bits] >> (i % word_bits)) & 1U;
  }
  [[nodiscard]] bool operator[](std::size_t i) const noexcept { return get(i); }

  void set(std::size_t i, bool value) noexcept {
    const word_type mask = word_type{1} << (i % word_bits);
    if (value) {
      words_[i / word_bits] |= mask;
    } else {
      words_[i / word_bits] &= ~mask;
    }
  }

  [[nodiscard]] std::size_t hamming_weight() const noexcept {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  [[nodiscard]] bool parity() const noexcept { return hamming_weight() & 1U; }
  [[nodiscard]] bool is_zero() const noexcept {
    return std::all_of(words_.begin(), words_.end(), [](word_type w) { return w == 0; });
  }

  /// Integer encoding, bit i of the result = bit i of the vector (n <= 64).
  [[nodiscard]] std::uint64_t to_index() const {
    if (n_ > word_bits) throw dimension_error("BitVector::to_index: n > 64");
    return words_.empty() ? 0 : words_[0];
  }

  /// Bits [offset, offset + len) as a new vector.
  [[nodiscard]] BitVector slice(std::size_t offset, std::size_t len) const {
    if (offset + len > n_) throw dimension_error("BitVector::slice out of range");
    BitVector out(len);
    for (std::size_t i = 0; i < len; ++i) out.set(i, get(offset + i));
    return out;
  }

  /// Reads `len` <= 64 bits starting at `offset` as an integer.
  [[nodiscard]] std::uint64_t read_word(std::size_t offset, std::size_t len) const {
    if (len > word_bits || offset + len > n_) throw dimension_error("BitVector::read_word out of range");
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < len; ++i) out |= static_cast<std::uint64_t>(get(offset + i)) << i;
    return out;
  }

  [[nodiscard]] std::string to_string() const {
    std::string s(n_, '0');
    for (std::size_t i = 0; i < n_; ++i) {
      if (get(i)) s[i] = '1';
    }
    return s;
  }

  [[nodiscard]] std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s((n_ + 3) / 4, '0');
    for (std::size_t j = 0; j < s.size(); ++j) {
      unsigned d = 0;
      for (std::size_t b = 0; b < 4 && 4 * j + b < n_; ++b) d |= static_cast<unsigned>(get(4 * j + b)) << b;
      s[j] = digits[d];
    }
    return s;
  }

  [[nodiscard]] const std::vector<word_type>& words() const noexcept { return words_; }

  BitVector& operator^=(const BitVector& other) {
    check_same_length(other, "xor");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
  }

  BitVector& operator&=(const BitVector& other) {
    check_same_length(other, "and");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
    return *this;
  }

  friend bool operator==(const BitVector&, const BitVector&) = default;
  friend auto operator<=>(const BitVector& a, const BitVector& b) {
    if (auto c = a.n_ <=> b.n_; c != 0) return c;
    return std::lexicographical_compare_three_way(a.words_.rbegin(), a.words_.rend(), b.words_.rbegin(),
                                                  b.words_.rend());
  }

 private:
  void check_same_length(const BitVector& other, const char* op) const {
    if (other.n_ != n_) {
      throw dimension_error(std::string("BitVector ") + op + ": length " + std::to_string(n_) + " vs " +
                            std::to_string(other.n_));
    }
  }

  void trim() noexcept {
    if (n_ % word_bits != 0 && !words_.empty()) words_.back() &= (word_type{1} << (n_ % word_bits)) - 1;
  }

  std::size_t n_ = 0;
  std::vector<word_type> words_;
};

/// Addition over F_2^n.
inline BitVector xor_add(BitVector a, const BitVector& b) {
  a ^= b;
  return a;
}

inline BitVector bitwise_and(BitVector a, const BitVector& b) {
  a &= b;
  return a;
}

/// chi_alpha(x) = (-1)^{<alpha, x>}.
inline int character_eval(const BitVector& alpha, const BitVector& x) {
  if (alpha.size() != x.size()) {
    throw dimension_error("character_eval: length " + std::to_string(alpha.size()) + " vs " +
                          std::to_string(x.size()));
  }
  unsigned parity = 0;
  const auto& aw = alpha.words();
  const auto& xw = x.words();
  for (std::size_t i = 0; i < aw.size(); ++i) parity ^= static_cast<unsigned>(std::popcount(aw[i] & xw[i])) & 1U;
  return parity ? -1 : 1;
}

/// Packed-index form of character_eval for n <= 64.
inline constexpr int character_sign(std::uint64_t alpha, std::uint64_t x) noexcept {
  return (std::popcount(alpha & x) & 1) ? -1 : 1;
}

}  // namespace bipn
