#pragma once

// The bounded-independence-plus-noise generators
//
//   G_0 = base,   G_i = D_i xor (T_i and G_{i-1}),   i = 1..r
//
// exact variant: base = all-ones, D_i 2k-wise, T_i k-wise independent
// star variant:  base 320k-wise, D_i delta-biased, T_i gamma-almost k-wise
//
// Seed layout "v1": base seed first, then levels r, r-1, ..., 1, each level
// as its D seed followed by its T seed. Slices are disjoint and contiguous.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/distribution.hpp"
#include "bipn/errors.hpp"
#include "bipn/fourier.hpp"
#include "bipn/primitives.hpp"

namespace bipn {

/// Independence of the star variant's base distribution, in units of k.
inline constexpr unsigned star_base_independence_factor = 320;

enum class GeneratorVariant { exact, star };

inline const char* to_string(GeneratorVariant v) { return v == GeneratorVariant::exact ? "exact" : "star"; }

struct ExactParams {
  unsigned k;
  unsigned r;
};

/// k = ceil(5 lg n + 2 lg w), r = ceil(2 lg n + lg(w) / 2).
inline ExactParams derive_params_exact(std::size_t n, std::size_t w) {
  if (n < 2 || w < 1) throw validation_error("derive_params_exact: need n >= 2 and w >= 1");
  const double ln = std::log2(static_cast<double>(n));
  const double lw = std::log2(static_cast<double>(w));
  return {detail::ceil_lg_from_log(5 * ln + 2 * lw), detail::ceil_lg_from_log(2 * ln + 0.5 * lw)};
}

struct StarParams {
  unsigned k;
  unsigned r;
  double gamma;
  double delta;
  double mass;  // L(n, w; k) under the configured bound
};

/// r = ceil(lg n), k = ceil(3 lg(nw/eps)), gamma = (nw/eps)^-9,
/// delta = (nw L(n,w;k) / eps)^-3.
inline StarParams derive_params_star(std::size_t n, std::size_t w, double epsilon, MassBoundConfig mass = {}) {
  if (n < 1 || w < 1) throw validation_error("derive_params_star: need n, w >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw validation_error("derive_params_star: epsilon must lie in (0, 1)");
  const double ratio = static_cast<double>(n) * static_cast<double>(w) / epsilon;
  StarParams p{};
  p.r = detail::ceil_lg(static_cast<double>(n));
  p.k = detail::ceil_lg_from_log(3 * std::log2(ratio));
  p.gamma = std::pow(ratio, -9.0);
  const MassBound bound = mass_bound(n, w, p.k, mass);
  p.mass = bound.value;
  if (bound.overflow) {
    throw validation_error("derive_params_star: mass bound overflowed for k=" + std::to_string(p.k) +
                           "; delta would be 0");
  }
  p.delta = std::pow(ratio * bound.value, -3.0);
  if (!(p.delta > 0.0)) throw validation_error("derive_params_star: delta underflowed to 0");
  return p;
}

enum class SeedRole { base, d, t };

struct SeedSlice {
  unsigned level;  // 0 for the base
  SeedRole role;
  std::size_t offset;
  std::size_t length;
};

class GeneratorSpec {
 public:
  static GeneratorSpec exact(std::size_t n, std::size_t w, unsigned k, unsigned r, bool derived = false) {
    if (n < 1) throw validation_error("generator: n must be >= 1");
    if (k < 1) throw validation_error("generator: k must be >= 1");
    GeneratorSpec s(GeneratorVariant::exact, n, w, k, r);
    s.derived_ = derived;
    s.base_ = DistributionDescriptor::point_mass(BitVector::ones(n));
    s.d_ = DistributionDescriptor::kwise(n, 2 * k);
    s.t_ = DistributionDescriptor::kwise(n, k);
    s.build_layout();
    return s;
  }

  static GeneratorSpec star(std::size_t n, std::size_t w, unsigned k, unsigned r, double delta, double gamma,
                            bool derived = false) {
    if (n < 1) throw validation_error("generator: n must be >= 1");
    if (k < 1) throw validation_error("generator: k must be >= 1");
    GeneratorSpec s(GeneratorVariant::star, n, w, k, r);
    s.derived_ = derived;
    s.delta_ = delta;
    s.gamma_ = gamma;
    s.base_ = DistributionDescriptor::kwise(n, star_base_independence_factor * k);
    s.d_ = DistributionDescriptor::small_bias(n, delta);
    s.t_ = DistributionDescriptor::almost_kwise(n, k, gamma);
    s.build_layout();
    return s;
  }

  static GeneratorSpec derived_exact(std::size_t n, std::size_t w) {
    const auto p = derive_params_exact(n, w);
    return exact(n, w, p.k, p.r, true);
  }

  static GeneratorSpec derived_star(std::size_t n, std::size_t w, double epsilon, MassBoundConfig mass = {}) {
    const auto p = derive_params_star(n, w, epsilon, mass);
    auto s = star(n, w, p.k, p.r, p.delta, p.gamma, true);
    s.epsilon_ = epsilon;
    return s;
  }

  [[nodiscard]] GeneratorVariant variant() const noexcept { return variant_; }
  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t w() const noexcept { return w_; }
  [[nodiscard]] unsigned k() const noexcept { return k_; }
  [[nodiscard]] unsigned r() const noexcept { return r_; }
  [[nodiscard]] double delta() const noexcept { return delta_; }
  [[nodiscard]] double gamma() const noexcept { return gamma_; }
  [[nodiscard]] std::optional<double> epsilon() const noexcept { return epsilon_; }
  /// True when (k, r, delta, gamma) came from the parameter formulas rather than overrides.
  [[nodiscard]] bool derived() const noexcept { return derived_; }

  [[nodiscard]] const DistributionDescriptor& base() const noexcept { return base_; }
  [[nodiscard]] const DistributionDescriptor& d() const noexcept { return d_; }
  [[nodiscard]] const DistributionDescriptor& t() const noexcept { return t_; }
  [[nodiscard]] const std::vector<SeedSlice>& layout() const noexcept { return layout_; }

  [[nodiscard]] std::size_t seed_bits() const noexcept {
    std::size_t total = 0;
    for (const auto& s : layout_) total += s.length;
    return total;
  }

  /// One-line form, e.g. `gen variant=exact n=16 w=4 k=6 r=3 layout=v1`.
  [[nodiscard]] std::string to_string() const {
    std::ostringstream os;
    os << "gen variant=" << bipn::to_string(variant_) << " n=" << n_ << " w=" << w_ << " k=" << k_ << " r=" << r_;
    if (variant_ == GeneratorVariant::star) {
      os << " delta=" << detail::format_real(delta_) << " gamma=" << detail::format_real(gamma_);
    }
    os << " layout=v1";
    return os.str();
  }

  static GeneratorSpec parse(const std::string& line) {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag != "gen") throw parse_error("generator spec must start with 'gen': " + line);
    std::map<std::string, std::string> kv;
    for (std::string tok; is >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw parse_error("generator spec: expected key=value, got '" + tok + "'");
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
      auto it = kv.find(key);
      if (it == kv.end()) throw parse_error("generator spec '" + line + "' lacks " + key + "=");
      return it->second;
    };
    if (auto it = kv.find("layout"); it != kv.end() && it->second != "v1") {
      throw parse_error("generator spec: unsupported layout '" + it->second + "'");
    }
    const std::size_t n = std::stoul(need("n"));
    const std::size_t w = std::stoul(need("w"));
    const auto k = static_cast<unsigned>(std::stoul(need("k")));
    const auto r = static_cast<unsigned>(std::stoul(need("r")));
    const std::string& variant = need("variant");
    if (variant == "exact") return exact(n, w, k, r);
    if (variant == "star") return star(n, w, k, r, std::stod(need("delta")), std::stod(need("gamma")));
    throw parse_error("generator spec: unknown variant '" + variant + "'");
  }

 private:
  GeneratorSpec(GeneratorVariant v, std::size_t n, std::size_t w, unsigned k, unsigned r)
      : variant_(v), n_(n), w_(w), k_(k), r_(r),
        base_(DistributionDescriptor::uniform(n)),
        d_(DistributionDescriptor::uniform(n)),
        t_(DistributionDescriptor::uniform(n)) {}

  void build_layout() {
    layout_.clear();
    std::size_t offset = 0;
    if (base_.seed_bits() > 0) {
      layout_.push_back({0, SeedRole::base, offset, base_.seed_bits()});
      offset += base_.seed_bits();
    }
    for (unsigned level = r_; level >= 1; --level) {
      layout_.push_back({level, SeedRole::d, offset, d_.seed_bits()});
      offset += d_.seed_bits();
      layout_.push_back({level, SeedRole::t, offset, t_.seed_bits()});
      offset += t_.seed_bits();
    }
  }

  GeneratorVariant variant_;
  std::size_t n_;
  std::size_t w_;
  unsigned k_;
  unsigned r_;
  double delta_ = 0.0;
  double gamma_ = 0.0;
  std::optional<double> epsilon_;
  bool derived_ = false;
  DistributionDescriptor base_;
  DistributionDescriptor d_;
  DistributionDescriptor t_;
  std::vector<SeedSlice> layout_;
};

inline std::size_t seed_length(const GeneratorSpec& spec) { return spec.seed_bits(); }

/// Runs the recursion on one seed.
inline BitVector expand_seed(const GeneratorSpec& spec, const BitVector& seed) {
  if (seed.size() != spec.seed_bits()) {
    throw seed_error("generator seed has " + std::to_string(seed.size()) + " bits, '" + spec.to_string() + "' needs " +
                     std::to_string(spec.seed_bits()));
  }
  BitVector g = spec.base().seed_bits() == 0 ? sample(spec.base(), BitVector(0)) : BitVector();
  std::vector<BitVector> d_seed(spec.r() + 1);
  std::vector<BitVector> t_seed(spec.r() + 1);
  for (const auto& s : spec.layout()) {
    BitVector part = seed.slice(s.offset, s.length);
    switch (s.role) {
      case SeedRole::base:
        g = sample(spec.base(), part);
        break;
      case SeedRole::d:
        d_seed[s.level] = std::move(part);
        break;
      case SeedRole::t:
        t_seed[s.level] = std::move(part);
        break;
    }
  }
  for (unsigned level = 1; level <= spec.r(); ++level) {
    g = xor_add(sample(spec.d(), d_seed[level]), bitwise_and(sample(spec.t(), t_seed[level]), g));
  }
  return g;
}

/// One recursion step on exact distributions: law of D xor (T and G) for
/// independent D, T, G.
inline ExactDistribution noise_step(const ExactDistribution& d, const ExactDistribution& t, const ExactDistribution& g,
                                    double max_work = 1e10) {
  const std::size_t n = g.n();
  if (d.n() != n || t.n() != n) throw dimension_error("noise_step: distributions over different lengths");
  const unsigned exponent = d.exponent() + t.exponent() + g.exponent();
  if (exponent > 127) {
    throw budget_error("noise_step: exact masses need 2^" + std::to_string(exponent) +
                       " denominators, beyond 128-bit numerators");
  }
  const double work = static_cast<double>(t.support_size()) * static_cast<double>(g.support_size()) +
                      static_cast<double>(d.support_size()) * static_cast<double>(std::size_t{1} << n);
  if (work > max_work) {
    std::ostringstream os;
    os << "noise_step: about " << work << " multiply-adds exceed the budget of " << max_work;
    throw budget_error(os.str());
  }
  // law of T and G, then xor-convolve with D
  std::vector<uint128> masked(std::size_t{1} << n, 0);
  t.for_each_support([&](std::uint64_t tv, uint128 tc) {
    g.for_each_support([&](std::uint64_t gv, uint128 gc) { masked[tv & gv] += tc * gc; });
  });
  std::vector<uint128> out(std::size_t{1} << n, 0);
  d.for_each_support([&](std::uint64_t dv, uint128 dc) {
    for (std::uint64_t h = 0; h < masked.size(); ++h) {
      if (masked[h] != 0) out[dv ^ h] += dc * masked[h];
    }
  });
  return {n, exponent, std::move(out)};
}

/// Laws of G_0, G_1, ..., G_r.
inline std::vector<ExactDistribution> level_distributions(const GeneratorSpec& spec, std::size_t max_n = 14) {
  if (spec.n() > max_n) {
    throw budget_error("exact output distribution refused for n=" + std::to_string(spec.n()) + " (limit " +
                       std::to_string(max_n) + ")");
  }
  std::vector<ExactDistribution> levels;
  levels.push_back(exact_distribution(spec.base()));
  if (spec.r() == 0) return levels;
  const ExactDistribution d = exact_distribution(spec.d());
  const ExactDistribution t = exact_distribution(spec.t());
  for (unsigned level = 1; level <= spec.r(); ++level) {
    if (d.is_uniform()) {
      levels.push_back(ExactDistribution::uniform(spec.n()));
    } else {
      levels.push_back(noise_step(d, t, levels.back()));
    }
  }
  return levels;
}

inline ExactDistribution exact_output_distribution(const GeneratorSpec& spec, std::size_t max_n = 14) {
  return level_distributions(spec, max_n).back();
}

/// Histogram of expand_seed over every seed.
inline ExactDistribution enumerate_output_distribution(const GeneratorSpec& spec,
                                                       unsigned budget_bits = default_seed_budget_bits) {
  if (spec.seed_bits() > budget_bits) {
    throw budget_error("seed enumeration of '" + spec.to_string() + "' needs 2^" + std::to_string(spec.seed_bits()) +
                       " runs, budget is 2^" + std::to_string(budget_bits));
  }
  if (spec.n() > ExactDistribution::max_bits) throw budget_error("histogram over too many points");
  std::vector<uint128> counts(std::size_t{1} << spec.n(), 0);
  const std::uint64_t seeds = std::uint64_t{1} << spec.seed_bits();
  for (std::uint64_t s = 0; s < seeds; ++s) {
    counts[expand_seed(spec, BitVector::from_index(spec.seed_bits(), s)).to_index()] += 1;
  }
  return {spec.n(), static_cast<unsigned>(spec.seed_bits()), std::move(counts)};
}

}  // namespace bipn
