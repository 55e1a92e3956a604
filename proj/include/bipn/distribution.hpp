#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/errors.hpp"

namespace bipn {

__extension__ using uint128 = unsigned __int128;

/// Exact probability mass function over F_2^n with dyadic masses
/// numerator(x) / 2^exponent. Stored densely, so n is capped at `max_bits`.
///
/// The constructor and every producer keep the representation reduced: some
/// numerator is odd unless the exponent is already zero. Two reduced
/// distributions are equal iff they describe the same pmf.
class ExactDistribution {
 public:
  static constexpr std::size_t max_bits = 24;

  ExactDistribution() = default;

  ExactDistribution(std::size_t n, unsigned exponent, std::vector<uint128> numerators)
      : n_(n), exponent_(exponent), mass_(std::move(numerators)) {
    check_bits(n);
    if (mass_.size() != (std::size_t{1} << n)) {
      throw dimension_error("ExactDistribution: table size does not match 2^n");
    }
    reduce();
  }

  static ExactDistribution uniform(std::size_t n) {
    check_bits(n);
    return {n, static_cast<unsigned>(n), std::vector<uint128>(std::size_t{1} << n, 1)};
  }

  static ExactDistribution point_mass(const BitVector& v) {
    check_bits(v.size());
    std::vector<uint128> m(std::size_t{1} << v.size(), 0);
    m[v.to_index()] = 1;
    return {v.size(), 0, std::move(m)};
  }

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] unsigned exponent() const noexcept { return exponent_; }
  [[nodiscard]] std::size_t domain_size() const noexcept { return mass_.size(); }
  [[nodiscard]] uint128 numerator(std::uint64_t x) const noexcept { return mass_[x]; }
  [[nodiscard]] const std::vector<uint128>& numerators() const noexcept { return mass_; }

  [[nodiscard]] double probability(std::uint64_t x) const noexcept { return to_double(mass_[x]) * scale(); }

  /// 2^-exponent as a double.
  [[nodiscard]] double scale() const noexcept { return std::ldexp(1.0, -static_cast<int>(exponent_)); }

  /// True iff the numerators sum to exactly 2^exponent.
  [[nodiscard]] bool sums_to_one() const noexcept {
    if (exponent_ >= 128) return false;
    uint128 total = 0;
    for (auto v : mass_) {
      total += v;
      if (total > (uint128{1} << exponent_)) return false;
    }
    return total == (uint128{1} << exponent_);
  }

  [[nodiscard]] bool is_uniform() const noexcept {
    return exponent_ == n_ && std::all_of(mass_.begin(), mass_.end(), [](uint128 v) { return v == 1; });
  }

  [[nodiscard]] std::size_t support_size() const noexcept {
    return static_cast<std::size_t>(std::count_if(mass_.begin(), mass_.end(), [](uint128 v) { return v != 0; }));
  }

  /// Calls f(x, numerator) for every x with nonzero mass, in increasing x.
  template <class F>
  void for_each_support(F&& f) const {
    for (std::uint64_t x = 0; x < mass_.size(); ++x) {
      if (mass_[x] != 0) f(x, mass_[x]);
    }
  }

  friend bool operator==(const ExactDistribution&, const ExactDistribution&) = default;

  static double to_double(uint128 v) noexcept {
    return std::ldexp(static_cast<double>(static_cast<std::uint64_t>(v >> 64)), 64) +
           static_cast<double>(static_cast<std::uint64_t>(v));
  }

  static std::string to_string(uint128 v) {
    if (v == 0) return "0";
    std::string s;
    while (v != 0) {
      s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    }
    return s;
  }

 private:
  static void check_bits(std::size_t n) {
    if (n > max_bits) {
      throw budget_error("ExactDistribution: dense table over 2^" + std::to_string(n) + " points exceeds 2^" +
                         std::to_string(max_bits));
    }
  }

  void reduce() noexcept {
    uint128 all = 0;
    for (auto v : mass_) all |= v;
    if (all == 0) return;
    unsigned shift = 0;
    while (shift < exponent_ && ((all >> shift) & 1U) == 0) ++shift;
    if (shift == 0) return;
    for (auto& v : mass_) v >>= shift;
    exponent_ -= shift;
  }

  std::size_t n_ = 0;
  unsigned exponent_ = 0;
  std::vector<uint128> mass_{uint128{1}};
};

}  // namespace bipn
