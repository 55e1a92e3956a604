#pragma once

// Seeded k-wise independent, small-bias and almost k-wise independent
// distributions over F_2^n, plus exhaustive auditors.
//
// Seed layouts (bit 0 first):
//   kwise       k coefficients c_0..c_{k-1} of m bits each, m = ceil(lg max(n,2))
//   smallbias   x then y, m bits each, m = ceil(lg(n / delta))
//   almostkwise smallbias with delta' = gamma * 2^(-k/2)
//   uniform     the n output bits themselves
//   point       no seed

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/distribution.hpp"
#include "bipn/errors.hpp"
#include "bipn/gf2m.hpp"

namespace bipn {

inline constexpr unsigned default_seed_budget_bits = 26;

enum class DistributionKind { kwise, small_bias, almost_kwise, point_mass, uniform };

namespace detail {

/// ceil(log2 v), tolerant to the last-ulp noise of log2 on exact powers of two.
inline unsigned ceil_lg(double v) {
  const double l = std::ceil(std::log2(v) - 1e-9);
  return l <= 0.0 ? 0U : static_cast<unsigned>(l);
}

inline unsigned ceil_lg_from_log(double log2_value) {
  const double l = std::ceil(log2_value - 1e-9);
  return l <= 0.0 ? 0U : static_cast<unsigned>(l);
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Field degree used by the k-wise construction on n outputs.
inline unsigned kwise_field_degree(std::size_t n) { return detail::ceil_lg(static_cast<double>(std::max<std::size_t>(n, 2))); }

/// Field degree used by the powering construction for bias delta.
inline unsigned small_bias_field_degree(std::size_t n, double delta) {
  return std::max(1U, detail::ceil_lg_from_log(std::log2(static_cast<double>(n)) - std::log2(delta)));
}

class DistributionDescriptor {
 public:
  static DistributionDescriptor kwise(std::size_t n, unsigned k) {
    if (n < 1) throw validation_error("kwise: n must be >= 1");
    if (k < 1) throw validation_error("kwise: k must be >= 1");
    DistributionDescriptor d(DistributionKind::kwise, n);
    d.k_ = k;
    d.m_ = kwise_field_degree(n);
    return d;
  }

  static DistributionDescriptor small_bias(std::size_t n, double delta) {
    if (n < 1) throw validation_error("smallbias: n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw validation_error("smallbias: delta must lie in (0, 1)");
    DistributionDescriptor d(DistributionKind::small_bias, n);
    d.delta_ = delta;
    d.m_ = small_bias_field_degree(n, delta);
    return d;
  }

  /// Realized as a small-bias space with delta' = gamma * 2^(-k/2).
  static DistributionDescriptor almost_kwise(std::size_t n, unsigned k, double gamma) {
    if (n < 1) throw validation_error("almostkwise: n must be >= 1");
    if (k < 1) throw validation_error("almostkwise: k must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw validation_error("almostkwise: gamma must lie in (0, 1]");
    DistributionDescriptor d(DistributionKind::almost_kwise, n);
    d.k_ = k;
    d.gamma_ = gamma;
    d.delta_ = gamma * std::exp2(-0.5 * k);
    d.m_ = small_bias_field_degree(n, d.delta_);
    return d;
  }

  static DistributionDescriptor point_mass(BitVector v) {
    DistributionDescriptor d(DistributionKind::point_mass, v.size());
    d.point_ = std::move(v);
    return d;
  }

  static DistributionDescriptor uniform(std::size_t n) { return {DistributionKind::uniform, n}; }

  [[nodiscard]] DistributionKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] unsigned k() const noexcept { return k_; }
  /// Bias of the underlying powering space (delta' for almost k-wise).
  [[nodiscard]] double delta() const noexcept { return delta_; }
  [[nodiscard]] double gamma() const noexcept { return gamma_; }
  [[nodiscard]] const BitVector& point() const noexcept { return point_; }
  [[nodiscard]] unsigned field_degree() const noexcept { return m_; }

  [[nodiscard]] bool uses_field() const noexcept {
    return kind_ == DistributionKind::kwise || kind_ == DistributionKind::small_bias ||
           kind_ == DistributionKind::almost_kwise;
  }

  [[nodiscard]] const FieldContext& field() const {
    if (!uses_field()) throw validation_error("descriptor has no field: " + to_string());
    if (m_ > FieldContext::max_degree) {
      throw validation_error("field degree " + std::to_string(m_) + " exceeds the built-in table (max 32)");
    }
    return FieldContext::standard(m_);
  }

  [[nodiscard]] std::size_t seed_bits() const noexcept {
    switch (kind_) {
      case DistributionKind::kwise:
        return static_cast<std::size_t>(k_) * m_;
      case DistributionKind::small_bias:
      case DistributionKind::almost_kwise:
        return 2 * static_cast<std::size_t>(m_);
      case DistributionKind::uniform:
        return n_;
      case DistributionKind::point_mass:
        return 0;
    }
    return 0;
  }

  /// Single-line text form, e.g. `kwise n=16 k=4 m=4 poly=0x13`.
  [[nodiscard]] std::string to_string() const {
    std::ostringstream os;
    switch (kind_) {
      case DistributionKind::kwise:
        os << "kwise n=" << n_ << " k=" << k_;
        break;
      case DistributionKind::small_bias:
        os << "smallbias n=" << n_ << " delta=" << detail::format_real(delta_);
        break;
      case DistributionKind::almost_kwise:
        os << "almostkwise n=" << n_ << " k=" << k_ << " gamma=" << detail::format_real(gamma_);
        break;
      case DistributionKind::point_mass:
        return "point n=" + std::to_string(n_) + " v=" + point_.to_string();
      case DistributionKind::uniform:
        return "uniform n=" + std::to_string(n_);
    }
    os << " m=" << m_ << " poly=";
    if (m_ >= 1 && m_ <= FieldContext::max_degree) {
      os << "0x" << std::hex << detail::standard_moduli[m_];
    } else {
      os << "none";
    }
    return os.str();
  }

  static DistributionDescriptor parse(const std::string& line) {
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    std::map<std::string, std::string> kv;
    for (std::string tok; is >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw parse_error("descriptor: expected key=value, got '" + tok + "'");
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
      auto it = kv.find(key);
      if (it == kv.end()) throw parse_error("descriptor '" + line + "' lacks " + key + "=");
      return it->second;
    };
    try {
      const std::size_t n = std::stoul(need("n"));
      DistributionDescriptor d = [&] {
        if (kind == "kwise") return kwise(n, static_cast<unsigned>(std::stoul(need("k"))));
        if (kind == "smallbias") return small_bias(n, std::stod(need("delta")));
        if (kind == "almostkwise") {
          return almost_kwise(n, static_cast<unsigned>(std::stoul(need("k"))), std::stod(need("gamma")));
        }
        if (kind == "point") {
          auto v = BitVector::parse(need("v"));
          if (v.size() != n) throw parse_error("descriptor: point length differs from n");
          return point_mass(std::move(v));
        }
        if (kind == "uniform") return uniform(n);
        throw parse_error("descriptor: unknown kind '" + kind + "'");
      }();
      if (auto it = kv.find("m"); it != kv.end() && std::stoul(it->second) != d.m_) {
        throw parse_error("descriptor: m=" + it->second + " inconsistent with parameters (expected " +
                          std::to_string(d.m_) + ")");
      }
      return d;
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const validation_error*>(&e) != nullptr) throw;
      throw parse_error("descriptor '" + line + "': " + e.what());
    }
  }

  friend bool operator==(const DistributionDescriptor&, const DistributionDescriptor&) = default;

 private:
  DistributionDescriptor(DistributionKind kind, std::size_t n) : kind_(kind), n_(n) {}

  DistributionKind kind_;
  std::size_t n_;
  unsigned k_ = 0;
  double delta_ = 0.0;
  double gamma_ = 0.0;
  unsigned m_ = 0;
  BitVector point_;
};

namespace detail {

inline void check_seed(const DistributionDescriptor& d, const BitVector& seed) {
  if (seed.size() != d.seed_bits()) {
    throw seed_error("seed of " + std::to_string(seed.size()) + " bits for '" + d.to_string() + "', which needs " +
                     std::to_string(d.seed_bits()));
  }
}

inline BitVector kwise_output(const DistributionDescriptor& d, const BitVector& seed) {
  const FieldContext& f = d.field();
  const unsigned m = d.field_degree();
  std::vector<FieldElement> coeff(d.k());
  for (unsigned i = 0; i < d.k(); ++i) coeff[i] = FieldElement{seed.read_word(static_cast<std::size_t>(i) * m, m)};
  BitVector out(d.n());
  for (std::size_t j = 0; j < d.n(); ++j) {
    const FieldElement z{j};
    FieldElement acc{0};
    for (unsigned i = d.k(); i-- > 0;) acc = FieldContext::add(f.multiply(acc, z), coeff[i]);
    out.set(j, acc.value & 1U);
  }
  return out;
}

inline BitVector powering_output(const DistributionDescriptor& d, const BitVector& seed) {
  const FieldContext& f = d.field();
  const unsigned m = d.field_degree();
  const FieldElement x{seed.read_word(0, m)};
  const std::uint64_t y = seed.read_word(m, m);
  BitVector out(d.n());
  FieldElement p = x;
  for (std::size_t i = 0; i < d.n(); ++i) {
    out.set(i, std::popcount(p.value & y) & 1);
    p = f.multiply(p, x);
  }
  return out;
}

}  // namespace detail

/// Output bit j is the low bit of p(zeta_j), p the seed polynomial of degree
/// < k over GF(2^m) and zeta_j the field element encoded by the integer j.
inline BitVector sample_kwise(std::size_t n, unsigned k, const BitVector& seed) {
  const auto d = DistributionDescriptor::kwise(n, k);
  detail::check_seed(d, seed);
  return detail::kwise_output(d, seed);
}

/// Output bit i is <x^(i+1), y> over GF(2).
inline BitVector sample_small_bias(std::size_t n, double delta, const BitVector& seed) {
  const auto d = DistributionDescriptor::small_bias(n, delta);
  detail::check_seed(d, seed);
  return detail::powering_output(d, seed);
}

inline BitVector sample_almost_kwise(std::size_t n, unsigned k, double gamma, const BitVector& seed) {
  const auto d = DistributionDescriptor::almost_kwise(n, k, gamma);
  detail::check_seed(d, seed);
  return detail::powering_output(d, seed);
}

inline BitVector sample(const DistributionDescriptor& d, const BitVector& seed) {
  detail::check_seed(d, seed);
  switch (d.kind()) {
    case DistributionKind::kwise:
      return detail::kwise_output(d, seed);
    case DistributionKind::small_bias:
    case DistributionKind::almost_kwise:
      return detail::powering_output(d, seed);
    case DistributionKind::uniform:
      return seed;
    case DistributionKind::point_mass:
      return d.point();
  }
  return {};
}

namespace detail {

/// Word-level sampler for n <= 64 and seeds of at most 64 bits; used by the
/// exhaustive enumerators.
class PackedSampler {
 public:
  explicit PackedSampler(const DistributionDescriptor& d) : d_(d) {
    if (d.n() > 64 || d.seed_bits() > 64) {
      throw budget_error("packed sampling needs n <= 64 and seed <= 64 bits: " + d.to_string());
    }
    if (d.uses_field()) field_ = &d.field();
  }

  std::uint64_t operator()(std::uint64_t seed) const noexcept {
    const unsigned m = d_.field_degree();
    const std::uint64_t mask = (m >= 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << m) - 1);
    switch (d_.kind()) {
      case DistributionKind::kwise: {
        std::uint64_t out = 0;
        for (std::size_t j = 0; j < d_.n(); ++j) {
          FieldElement acc{0};
          for (unsigned i = d_.k(); i-- > 0;) {
            acc = FieldContext::add(field_->multiply(acc, FieldElement{j}), FieldElement{(seed >> (i * m)) & mask});
          }
          out |= (acc.value & 1U) << j;
        }
        return out;
      }
      case DistributionKind::small_bias:
      case DistributionKind::almost_kwise: {
        const FieldElement x{seed & mask};
        const std::uint64_t y = (seed >> m) & mask;
        std::uint64_t out = 0;
        FieldElement p = x;
        for (std::size_t i = 0; i < d_.n(); ++i) {
          out |= static_cast<std::uint64_t>(std::popcount(p.value & y) & 1) << i;
          p = field_->multiply(p, x);
        }
        return out;
      }
      case DistributionKind::uniform:
        return seed;
      case DistributionKind::point_mass:
        return d_.point().to_index();
    }
    return 0;
  }

 private:
  const DistributionDescriptor& d_;
  const FieldContext* field_ = nullptr;
};

inline void check_budget(const DistributionDescriptor& d, unsigned budget_bits) {
  if (d.seed_bits() > budget_bits) {
    throw budget_error("enumerating '" + d.to_string() + "' needs 2^" + std::to_string(d.seed_bits()) +
                       " seeds, budget is 2^" + std::to_string(budget_bits));
  }
}

/// Reduced row-echelon basis of the GF(2) span of packed vectors.
inline std::vector<std::uint64_t> span_basis(const std::vector<std::uint64_t>& vectors) {
  std::vector<std::uint64_t> basis;
  for (std::uint64_t v : vectors) {
    for (std::uint64_t b : basis) v = std::min(v, v ^ b);
    if (v != 0) {
      for (auto& b : basis) b = std::min(b, b ^ v);
      basis.push_back(v);
      std::sort(basis.rbegin(), basis.rend());
    }
  }
  return basis;
}

/// Calls f(point) for every point of the span of `basis`, in Gray-code order.
template <class F>
void for_each_in_span(const std::vector<std::uint64_t>& basis, F&& f) {
  std::uint64_t cur = 0;
  f(cur);
  const std::uint64_t count = std::uint64_t{1} << basis.size();
  for (std::uint64_t g = 1; g < count; ++g) {
    cur ^= basis[static_cast<std::size_t>(std::countr_zero(g))];
    f(cur);
  }
}

/// Images of the unit seed vectors under the (GF(2)-linear) k-wise sampler.
inline std::vector<std::uint64_t> kwise_columns(const DistributionDescriptor& d) {
  const FieldContext& f = d.field();
  const unsigned m = d.field_degree();
  std::vector<std::uint64_t> cols;
  cols.reserve(d.seed_bits());
  for (unsigned i = 0; i < d.k(); ++i) {
    for (unsigned b = 0; b < m; ++b) {
      std::uint64_t col = 0;
      for (std::size_t j = 0; j < d.n(); ++j) {
        const FieldElement v = f.multiply(FieldElement{std::uint64_t{1} << b}, f.power(FieldElement{j}, i));
        col |= (v.value & 1U) << j;
      }
      cols.push_back(col);
    }
  }
  return cols;
}

}  // namespace detail

/// Exact output distribution, computed structurally: the k-wise sampler is
/// linear in its seed, and the powering sampler is linear in y for each x,
/// so every fibre is uniform over a subspace.
inline ExactDistribution exact_distribution(const DistributionDescriptor& d, unsigned budget_bits = 30) {
  const std::size_t n = d.n();
  if (n > ExactDistribution::max_bits) {
    throw budget_error("exact distribution over 2^" + std::to_string(n) + " points refused");
  }
  switch (d.kind()) {
    case DistributionKind::uniform:
      return ExactDistribution::uniform(n);
    case DistributionKind::point_mass:
      return ExactDistribution::point_mass(d.point());
    case DistributionKind::kwise: {
      const auto basis = detail::span_basis(detail::kwise_columns(d));
      std::vector<uint128> mass(std::size_t{1} << n, 0);
      detail::for_each_in_span(basis, [&](std::uint64_t p) { mass[p] = 1; });
      return {n, static_cast<unsigned>(basis.size()), std::move(mass)};
    }
    case DistributionKind::small_bias:
    case DistributionKind::almost_kwise: {
      const unsigned m = d.field_degree();
      if (m > budget_bits) {
        throw budget_error("exact distribution of '" + d.to_string() + "' needs 2^" + std::to_string(m) +
                           " field points, budget is 2^" + std::to_string(budget_bits));
      }
      const FieldContext& f = d.field();
      std::vector<uint128> mass(std::size_t{1} << n, 0);
      std::vector<std::uint64_t> cols(m);
      for (std::uint64_t xv = 0; xv < f.order(); ++xv) {
        std::fill(cols.begin(), cols.end(), 0);
        FieldElement p{xv};
        for (std::size_t i = 0; i < n; ++i) {
          for (unsigned b = 0; b < m; ++b) cols[b] |= ((p.value >> b) & 1U) << i;
          p = f.multiply(p, FieldElement{xv});
        }
        const auto basis = detail::span_basis(cols);
        const uint128 weight = uint128{1} << (m - basis.size());
        detail::for_each_in_span(basis, [&](std::uint64_t q) { mass[q] += weight; });
      }
      return {n, 2 * m, std::move(mass)};
    }
  }
  return {};
}

/// Exact output distribution by running the sampler on every seed.
inline ExactDistribution enumerate_distribution(const DistributionDescriptor& d,
                                                unsigned budget_bits = default_seed_budget_bits) {
  detail::check_budget(d, budget_bits);
  if (d.n() > ExactDistribution::max_bits) {
    throw budget_error("histogram over 2^" + std::to_string(d.n()) + " points refused");
  }
  const detail::PackedSampler s(d);
  std::vector<uint128> mass(std::size_t{1} << d.n(), 0);
  const std::uint64_t seeds = std::uint64_t{1} << d.seed_bits();
  for (std::uint64_t seed = 0; seed < seeds; ++seed) mass[s(seed)] += 1;
  return {d.n(), static_cast<unsigned>(d.seed_bits()), std::move(mass)};
}

/// E_seed chi_alpha(sample(seed)), exactly, over every seed.
inline double measure_bias(const DistributionDescriptor& d, const BitVector& alpha,
                           unsigned budget_bits = default_seed_budget_bits) {
  if (alpha.size() != d.n()) throw dimension_error("measure_bias: alpha length differs from n");
  detail::check_budget(d, budget_bits);
  const std::uint64_t seeds = std::uint64_t{1} << d.seed_bits();
  std::int64_t sum = 0;
  if (d.n() <= 64) {
    const detail::PackedSampler s(d);
    const std::uint64_t a = alpha.to_index();
    for (std::uint64_t seed = 0; seed < seeds; ++seed) sum += character_sign(a, s(seed));
  } else {
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      sum += character_eval(alpha, sample(d, BitVector::from_index(d.seed_bits(), seed)));
    }
  }
  return static_cast<double>(sum) / static_cast<double>(seeds);
}

/// Largest |bias| over all nonzero alpha, from the seed-enumerated histogram.
inline double max_bias(const DistributionDescriptor& d, unsigned budget_bits = default_seed_budget_bits) {
  const ExactDistribution h = enumerate_distribution(d, budget_bits);
  // Walsh-Hadamard transform of the integer histogram gives every bias at once.
  std::vector<double> spectrum(h.domain_size());
  for (std::size_t x = 0; x < spectrum.size(); ++x) spectrum[x] = ExactDistribution::to_double(h.numerator(x));
  for (std::size_t len = 1; len < spectrum.size(); len <<= 1) {
    for (std::size_t i = 0; i < spectrum.size(); i += 2 * len) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = spectrum[j];
        const double b = spectrum[j + len];
        spectrum[j] = a + b;
        spectrum[j + len] = a - b;
      }
    }
  }
  double best = 0.0;
  for (std::size_t a = 1; a < spectrum.size(); ++a) best = std::max(best, std::abs(spectrum[a]));
  return best * h.scale();
}

/// Max over k-subsets S of coordinates and patterns p of
/// |Pr[sample restricted to S = p] - 2^-k|, exactly over every seed.
inline double audit_kwise(const DistributionDescriptor& d, unsigned k,
                          unsigned budget_bits = default_seed_budget_bits) {
  const std::size_t n = d.n();
  if (k < 1 || k > n) throw validation_error("audit_kwise: need 1 <= k <= n");
  const ExactDistribution h = enumerate_distribution(d, budget_bits);
  const double scale = h.scale();
  double worst = 0.0;
  std::vector<uint128> marginal(std::size_t{1} << k);
  // iterate k-subsets as bitmasks of weight k (Gosper's hack)
  std::uint64_t subset = (std::uint64_t{1} << k) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (subset < limit) {
    std::fill(marginal.begin(), marginal.end(), 0);
    h.for_each_support([&](std::uint64_t x, uint128 c) {
      std::uint64_t pattern = 0;
      unsigned pos = 0;
      for (std::uint64_t s = subset; s != 0; s &= s - 1, ++pos) {
        pattern |= ((x >> std::countr_zero(s)) & 1U) << pos;
      }
      marginal[pattern] += c;
    });
    const uint128 target = uint128{1} << h.exponent();
    for (uint128 c : marginal) {
      const uint128 scaled = c << k;
      if (scaled != target) {
        const double diff = std::abs(ExactDistribution::to_double(c) * scale - std::ldexp(1.0, -static_cast<int>(k)));
        worst = std::max(worst, diff);
      }
    }
    const std::uint64_t lowest = subset & (~subset + 1);
    const std::uint64_t ripple = subset + lowest;
    subset = (((ripple ^ subset) >> 2) / lowest) | ripple;
  }
  return worst;
}

}  // namespace bipn
