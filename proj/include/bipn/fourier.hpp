#pragma once

// Exact Fourier analysis of matrix-valued functions on F_2^n, for small n.
//
// Indices alpha and x are packed integers, bit j holding coordinate j + 1.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/errors.hpp"
#include "bipn/matrix.hpp"
#include "bipn/robp.hpp"

namespace bipn {

inline constexpr std::size_t default_fourier_budget_bits = 16;
inline constexpr double default_prune_tolerance = 1e-12;

/// Values F(x) for every x in F_2^n, indexed by the packed x.
struct MatrixTruthTable {
  std::size_t n = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<DenseMatrix> values;

  [[nodiscard]] const DenseMatrix& operator()(std::uint64_t x) const { return values[x]; }
};

namespace detail {

inline void check_fourier_budget(std::size_t n, std::size_t budget_bits, std::size_t rows, std::size_t cols) {
  if (n > budget_bits) {
    std::ostringstream os;
    os << "Fourier oracle refuses n=" << n << " (budget " << budget_bits << " bits): a dense table needs "
       << std::ldexp(static_cast<double>(rows * cols * sizeof(double)), static_cast<int>(n)) / 1048576.0 << " MiB";
    throw budget_error(os.str());
  }
}

/// In-place unnormalized Walsh-Hadamard transform.
inline void walsh_hadamard(std::vector<double>& v) {
  for (std::size_t len = 1; len < v.size(); len <<= 1) {
    for (std::size_t i = 0; i < v.size(); i += 2 * len) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = v[j];
        const double b = v[j + len];
        v[j] = a + b;
        v[j + len] = a - b;
      }
    }
  }
}

}  // namespace detail

/// F(y) for every read-order input y (for identity-order programs y = x).
inline MatrixTruthTable read_order_truth_table(const BranchingProgram& bp,
                                               std::size_t budget_bits = default_fourier_budget_bits) {
  detail::check_fourier_budget(bp.n(), budget_bits, bp.width(), bp.width());
  MatrixTruthTable t{bp.n(), bp.width(), bp.width(), {}};
  t.values.reserve(std::size_t{1} << bp.n());
  for (std::uint64_t y = 0; y < (std::uint64_t{1} << bp.n()); ++y) {
    t.values.push_back(state_map_matrix(bp.state_map_read_order(y)));
  }
  return t;
}

/// F(x) for every input x, honouring the read order.
inline MatrixTruthTable truth_table(const BranchingProgram& bp, std::size_t budget_bits = default_fourier_budget_bits) {
  detail::check_fourier_budget(bp.n(), budget_bits, bp.width(), bp.width());
  MatrixTruthTable t{bp.n(), bp.width(), bp.width(), {}};
  t.values.reserve(std::size_t{1} << bp.n());
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << bp.n()); ++x) {
    t.values.push_back(state_map_matrix(bp.state_map_read_order(bp.read_order_view(x))));
  }
  return t;
}

class FourierExpansion {
 public:
  FourierExpansion(std::size_t n, std::size_t rows, std::size_t cols) : n_(n), rows_(rows), cols_(cols) {}

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] const std::map<std::uint64_t, DenseMatrix>& coefficients() const noexcept { return coeffs_; }
  [[nodiscard]] std::size_t support_size() const noexcept { return coeffs_.size(); }

  [[nodiscard]] DenseMatrix coefficient(std::uint64_t alpha) const {
    auto it = coeffs_.find(alpha);
    return it == coeffs_.end() ? DenseMatrix(rows_, cols_) : it->second;
  }

  [[nodiscard]] DenseMatrix coefficient(const BitVector& alpha) const {
    if (alpha.size() != n_) throw dimension_error("coefficient index length differs from n");
    return coefficient(alpha.to_index());
  }

  void set(std::uint64_t alpha, DenseMatrix value) {
    if (value.rows() != rows_ || value.cols() != cols_) throw dimension_error("coefficient shape mismatch");
    if (n_ < 64 && (alpha >> n_) != 0) throw dimension_error("coefficient index beyond n bits");
    coeffs_[alpha] = std::move(value);
  }

  /// sum_alpha coeff_alpha * chi_alpha(x).
  [[nodiscard]] DenseMatrix evaluate(std::uint64_t x) const {
    DenseMatrix out(rows_, cols_);
    for (const auto& [alpha, c] : coeffs_) out.add_scaled(c, character_sign(alpha, x));
    return out;
  }

  /// Coefficients whose index has Hamming weight exactly k.
  [[nodiscard]] FourierExpansion level(std::size_t k) const {
    FourierExpansion out(n_, rows_, cols_);
    for (const auto& [alpha, c] : coeffs_) {
      if (static_cast<std::size_t>(std::popcount(alpha)) == k) out.coeffs_.emplace(alpha, c);
    }
    return out;
  }

  /// True iff every coefficient sits at Hamming weight k.
  [[nodiscard]] bool supported_at_level(std::size_t k) const {
    return std::all_of(coeffs_.begin(), coeffs_.end(),
                       [k](const auto& e) { return static_cast<std::size_t>(std::popcount(e.first)) == k; });
  }

  [[nodiscard]] double sum_squared_norms() const {
    double s = 0.0;
    for (const auto& [alpha, c] : coeffs_) s += frobenius_norm_squared(c);
    return s;
  }

  [[nodiscard]] double sum_norms() const {
    double s = 0.0;
    for (const auto& [alpha, c] : coeffs_) s += frobenius_norm(c);
    return s;
  }

  /// CSV dump: alpha (0/1 string), row, col, value (1-based row/col).
  [[nodiscard]] std::string to_csv() const {
    std::ostringstream os;
    os << "alpha,row,col,value\n";
    char buf[40];
    for (const auto& [alpha, c] : coeffs_) {
      const std::string a = BitVector::from_index(n_, alpha).to_string();
      for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t col = 0; col < cols_; ++col) {
          std::snprintf(buf, sizeof buf, "%.17g", c(r, col));
          os << a << ',' << r + 1 << ',' << col + 1 << ',' << buf << '\n';
        }
      }
    }
    return os.str();
  }

 private:
  std::size_t n_;
  std::size_t rows_;
  std::size_t cols_;
  std::map<std::uint64_t, DenseMatrix> coeffs_;
};

/// F_hat_alpha = E_x F(x) chi_alpha(x), one Walsh-Hadamard transform per entry.
/// Coefficients with Frobenius norm below `prune` are dropped.
inline FourierExpansion expand(const MatrixTruthTable& f, double prune = default_prune_tolerance,
                               std::size_t budget_bits = default_fourier_budget_bits) {
  detail::check_fourier_budget(f.n, budget_bits, f.rows, f.cols);
  const std::size_t size = std::size_t{1} << f.n;
  if (f.values.size() != size) throw dimension_error("truth table size differs from 2^n");
  std::vector<DenseMatrix> coeff(size, DenseMatrix(f.rows, f.cols));
  std::vector<double> column(size);
  const double inv = std::ldexp(1.0, -static_cast<int>(f.n));
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      for (std::size_t x = 0; x < size; ++x) column[x] = f.values[x](r, c);
      detail::walsh_hadamard(column);
      for (std::size_t a = 0; a < size; ++a) coeff[a](r, c) = column[a] * inv;
    }
  }
  FourierExpansion out(f.n, f.rows, f.cols);
  for (std::size_t a = 0; a < size; ++a) {
    if (frobenius_norm(coeff[a]) >= prune) out.set(a, std::move(coeff[a]));
  }
  return out;
}

/// Expansion of the program over its read-order inputs.
inline FourierExpansion expand(const BranchingProgram& bp, double prune = default_prune_tolerance,
                               std::size_t budget_bits = default_fourier_budget_bits) {
  return expand(read_order_truth_table(bp, budget_bits), prune, budget_bits);
}

struct ParsevalSides {
  double coefficient_side;  // sum_alpha ||F_hat_alpha||^2
  double value_side;        // E_x ||F(x)||^2
};

inline ParsevalSides parseval_check(const MatrixTruthTable& f, std::size_t budget_bits = default_fourier_budget_bits) {
  const FourierExpansion e = expand(f, 0.0, budget_bits);
  double values = 0.0;
  for (const auto& v : f.values) values += frobenius_norm_squared(v);
  return {e.sum_squared_norms(), std::ldexp(values, -static_cast<int>(f.n))};
}

/// L_k(F) = sum over |alpha| = k of ||F_hat_alpha||.
inline double level_mass(const FourierExpansion& e, std::size_t k) { return e.level(k).sum_norms(); }

enum class MassBoundMode { trivial, chrt };

struct MassBoundConfig {
  MassBoundMode mode = MassBoundMode::trivial;
  /// Constant in (c lg n)^(w k); the published bound leaves it unspecified.
  double chrt_constant = 1.0;
};

struct MassBound {
  double value = 0.0;
  bool overflow = false;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r < 9e15 ? std::round(r) : r;
}

/// Proxy for L(n, w; k) = max_F sum_{i=1..k} L_i(F).
/// trivial: sum_i C(n,i)^(1/2) w^(1/2); chrt: sum_i (c lg n)^(w i).
inline MassBound mass_bound(std::size_t n, std::size_t w, std::size_t k, MassBoundConfig cfg = {}) {
  MassBound out;
  for (std::size_t i = 1; i <= k; ++i) {
    double term = 0.0;
    if (cfg.mode == MassBoundMode::trivial) {
      term = std::sqrt(binomial(n, i)) * std::sqrt(static_cast<double>(w));
    } else {
      const double base = cfg.chrt_constant * std::log2(static_cast<double>(std::max<std::size_t>(n, 2)));
      term = std::pow(base, static_cast<double>(w * i));
    }
    out.value += term;
  }
  if (!std::isfinite(out.value)) {
    out.value = std::numeric_limits<double>::infinity();
    out.overflow = true;
  }
  return out;
}

/// F = F_hat_0 + L + sum_i H_i * F^{>i}, all over the read-order inputs.
struct Prop1Decomposition {
  struct HighTerm {
    std::size_t i;            // 1-based layer after which the term closes
    FourierExpansion h;       // over F_2^i; |alpha| = k and alpha_i = 1
    BranchingProgram suffix;  // layers i+1..n
  };

  std::size_t n = 0;
  std::size_t k = 0;
  DenseMatrix constant;
  FourierExpansion low{0, 0, 0};
  std::vector<HighTerm> high;

  /// Right-hand side of the identity at read-order input y.
  [[nodiscard]] DenseMatrix evaluate(std::uint64_t y) const {
    DenseMatrix out = constant + low.evaluate(y);
    for (const auto& t : high) {
      const std::uint64_t prefix = t.i >= 64 ? y : (y & ((std::uint64_t{1} << t.i) - 1));
      out += t.h.evaluate(prefix) * state_map_matrix(t.suffix.state_map_read_order(y >> t.i));
    }
    return out;
  }
};

inline Prop1Decomposition decompose_prop1(const BranchingProgram& bp, std::size_t k,
                                          std::size_t budget_bits = default_fourier_budget_bits) {
  if (k < 1) throw validation_error("decompose_prop1: k must be >= 1");
  const std::size_t n = bp.n();
  const std::size_t w = bp.width();
  const FourierExpansion full = expand(bp, default_prune_tolerance, budget_bits);

  Prop1Decomposition d;
  d.n = n;
  d.k = k;
  d.constant = full.coefficient(std::uint64_t{0});
  d.low = FourierExpansion(n, w, w);
  for (const auto& [alpha, c] : full.coefficients()) {
    const auto weight = static_cast<std::size_t>(std::popcount(alpha));
    if (weight > 0 && weight < k) d.low.set(alpha, c);
  }
  for (std::size_t i = std::max<std::size_t>(k, 1); i <= n; ++i) {
    auto [prefix, suffix] = split(bp, i);
    const FourierExpansion pe = expand(prefix, default_prune_tolerance, budget_bits);
    FourierExpansion h(i, w, w);
    const std::uint64_t last = std::uint64_t{1} << (i - 1);
    for (const auto& [alpha, c] : pe.coefficients()) {
      if (static_cast<std::size_t>(std::popcount(alpha)) == k && (alpha & last) != 0) h.set(alpha, c);
    }
    if (h.support_size() > 0) d.high.push_back({i, std::move(h), std::move(suffix)});
  }
  return d;
}

/// Largest entrywise |F(y) - decomposition(y)| over all read-order inputs.
inline double prop1_reconstruction_error(const BranchingProgram& bp, const Prop1Decomposition& d) {
  double worst = 0.0;
  for (std::uint64_t y = 0; y < (std::uint64_t{1} << bp.n()); ++y) {
    const DenseMatrix diff = state_map_matrix(bp.state_map_read_order(y)) - d.evaluate(y);
    worst = std::max(worst, max_abs_entry(diff));
  }
  return worst;
}

}  // namespace bipn
