#pragma once

// Fooling-error measurement and exact checks of the per-step inequalities.
//
// All computations work in the program's read order: distributions over the
// generator's output positions are permuted so that coordinate i is the bit
// read by layer i.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/distribution.hpp"
#include "bipn/errors.hpp"
#include "bipn/fourier.hpp"
#include "bipn/generator.hpp"
#include "bipn/matrix.hpp"
#include "bipn/primitives.hpp"
#include "bipn/robp.hpp"

namespace bipn {

/// Probability-weighted support points of an exact distribution.
struct WeightedPoint {
  std::uint64_t x;
  double p;
};

/// Support of `d` with points mapped into the program's read order.
inline std::vector<WeightedPoint> read_order_support(const ExactDistribution& d, const BranchingProgram& bp) {
  if (d.n() != bp.n()) throw dimension_error("distribution length differs from program length");
  std::vector<WeightedPoint> out;
  const double scale = d.scale();
  d.for_each_support([&](std::uint64_t x, uint128 c) {
    out.push_back({bp.read_order_view(x), ExactDistribution::to_double(c) * scale});
  });
  return out;
}

inline std::vector<WeightedPoint> support_points(const ExactDistribution& d) {
  std::vector<WeightedPoint> out;
  const double scale = d.scale();
  d.for_each_support([&](std::uint64_t x, uint128 c) { out.push_back({x, ExactDistribution::to_double(c) * scale}); });
  return out;
}

// ---------------------------------------------------------------- bounds

/// Single step with exact independence: n w / 2^(k/2).
inline double single_step_bound_exact(std::size_t n, std::size_t w, unsigned k) {
  return static_cast<double>(n * w) * std::exp2(-0.5 * k);
}

/// Single step with weak primitives: (sqrt(delta) L + 2^(-k/2) + sqrt(gamma)) n w.
inline double single_step_bound_star(std::size_t n, std::size_t w, unsigned k, double delta, double gamma,
                                     double mass) {
  return (std::sqrt(delta) * mass + std::exp2(-0.5 * k) + std::sqrt(gamma)) * static_cast<double>(n * w);
}

/// Full exact recursion: r n w / 2^(k/2) + 2 n w^(1/2) / 2^r.
inline double recursion_bound_exact(std::size_t n, std::size_t w, unsigned k, unsigned r) {
  return r * single_step_bound_exact(n, w, k) + 2.0 * static_cast<double>(n) * std::sqrt(static_cast<double>(w)) * std::exp2(-static_cast<double>(r));
}

/// Full star recursion, before the constants are absorbed:
/// r (sqrt(delta) L + 2^(-k/2) + sqrt(gamma)) n w + r (2^-floor(k/2) + 2 gamma 4^k) 2 w^(1/2).
inline double recursion_bound_star(std::size_t n, std::size_t w, unsigned k, unsigned r, double delta, double gamma,
                                   double mass) {
  const double tail = std::exp2(-static_cast<double>(k / 2)) + 2.0 * gamma * std::exp2(2.0 * k);
  return r * single_step_bound_star(n, w, k, delta, gamma, mass) + r * tail * 2.0 * std::sqrt(static_cast<double>(w));
}

/// Any two programs' expectations differ by at most 2 sqrt(w) in Frobenius norm.
inline bool bound_is_vacuous(double bound, std::size_t w) { return bound > 2.0 * std::sqrt(static_cast<double>(w)); }

// ------------------------------------------------------- fooling errors

struct FoolingError {
  double frobenius;  // ||E F(G) - E F(U)||
  double scalar;     // |E f(G) - E f(U)|, the (1,1) entry
};

/// E F(G) for an exact output law over input positions.
inline DenseMatrix expectation_under(const BranchingProgram& bp, const ExactDistribution& g) {
  DenseMatrix acc(bp.width(), bp.width());
  for (const auto& [y, p] : read_order_support(g, bp)) {
    const auto map = bp.state_map_read_order(y);
    for (std::size_t s = 0; s < map.size(); ++s) acc(s, map[s]) += p;
  }
  return acc;
}

inline FoolingError fooling_error(const BranchingProgram& bp, const ExactDistribution& g) {
  const DenseMatrix diff = expectation_under(bp, g) - uniform_expectation(bp);
  return {frobenius_norm(diff), std::abs(diff(0, 0))};
}

inline FoolingError exact_fooling_error(const BranchingProgram& bp, const GeneratorSpec& spec) {
  if (spec.n() != bp.n()) throw dimension_error("generator length differs from program length");
  return fooling_error(bp, exact_output_distribution(spec));
}

struct SampledError {
  double estimate;    // ||mean F(G) - E F(U)||
  double half_width;  // sqrt(sum of squared per-entry 99% half-widths)
  double scalar_estimate;
  double scalar_half_width;
};

inline constexpr double normal_quantile_995 = 2.5758293035489004;

/// Monte Carlo over uniformly drawn seeds; E F(U) is exact.
inline SampledError sampled_fooling_error(const BranchingProgram& bp, const GeneratorSpec& spec, std::size_t samples,
                                          std::uint64_t rng_seed) {
  if (samples < 2) throw validation_error("sampled_fooling_error: need at least 2 samples");
  if (spec.n() != bp.n()) throw dimension_error("generator length differs from program length");
  const std::size_t w = bp.width();
  std::mt19937_64 rng(rng_seed);
  std::vector<double> sum(w * w, 0.0);
  std::vector<double> sum_sq(w * w, 0.0);
  const std::size_t bits = spec.seed_bits();
  for (std::size_t s = 0; s < samples; ++s) {
    BitVector seed(bits);
    for (std::size_t i = 0; i < bits; i += 64) {
      const std::uint64_t word = rng();
      for (std::size_t b = 0; b < 64 && i + b < bits; ++b) seed.set(i + b, (word >> b) & 1U);
    }
    const BitVector g = expand_seed(spec, seed);
    const auto map = bp.state_map_read_order(bp.read_order_view(g).to_index());
    for (std::size_t r = 0; r < w; ++r) {
      sum[r * w + map[r]] += 1.0;
      sum_sq[r * w + map[r]] += 1.0;
    }
  }
  const DenseMatrix uniform = uniform_expectation(bp);
  const auto count = static_cast<double>(samples);
  DenseMatrix diff(w, w);
  double hw_sq = 0.0;
  double scalar_hw = 0.0;
  for (std::size_t r = 0; r < w; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double mean = sum[r * w + c] / count;
      const double var = std::max(0.0, (sum_sq[r * w + c] - count * mean * mean) / (count - 1.0));
      const double hw = normal_quantile_995 * std::sqrt(var / count);
      diff(r, c) = mean - uniform(r, c);
      hw_sq += hw * hw;
      if (r == 0 && c == 0) scalar_hw = hw;
    }
  }
  return {frobenius_norm(diff), std::sqrt(hw_sq), std::abs(diff(0, 0)), scalar_hw};
}

// ------------------------------------------------------ single step

/// Distributions for one D + T and U step.
struct StepParams {
  GeneratorVariant variant = GeneratorVariant::exact;
  unsigned k = 1;
  double delta = 0.0;
  double gamma = 0.0;

  static StepParams exact(unsigned k) { return {GeneratorVariant::exact, k, 0.0, 0.0}; }
  static StepParams star(double delta, double gamma, unsigned k) { return {GeneratorVariant::star, k, delta, gamma}; }

  [[nodiscard]] DistributionDescriptor d(std::size_t n) const {
    return variant == GeneratorVariant::exact ? DistributionDescriptor::kwise(n, 2 * k)
                                              : DistributionDescriptor::small_bias(n, delta);
  }
  [[nodiscard]] DistributionDescriptor t(std::size_t n) const {
    return variant == GeneratorVariant::exact ? DistributionDescriptor::kwise(n, k)
                                              : DistributionDescriptor::almost_kwise(n, k, gamma);
  }
};

struct StepResult {
  double error;
  double bound;
};

/// ||E_{D,T,U} F(D + T and U) - E_U F(U)||, exactly. For fixed (d, t) the
/// inner expectation over U is a product of per-layer averages.
inline StepResult single_step_error(const BranchingProgram& bp, const StepParams& params, MassBoundConfig mass = {}) {
  const std::size_t n = bp.n();
  const std::size_t w = bp.width();
  const auto dd = read_order_support(exact_distribution(params.d(n)), bp);
  const auto tt = read_order_support(exact_distribution(params.t(n)), bp);
  std::vector<DenseMatrix> fixed[2];
  std::vector<DenseMatrix> avg;
  for (std::size_t i = 0; i < n; ++i) {
    fixed[0].push_back(bp.transition(i, false));
    fixed[1].push_back(bp.transition(i, true));
    avg.push_back(bp.averaged_transition(i));
  }
  DenseMatrix acc(w, w);
  for (const auto& [t, pt] : tt) {
    for (const auto& [d, pd] : dd) {
      DenseMatrix prod = DenseMatrix::identity(w);
      for (std::size_t i = 0; i < n; ++i) {
        prod = prod * (((t >> i) & 1U) ? avg[i] : fixed[(d >> i) & 1U][i]);
      }
      acc.add_scaled(prod, pt * pd);
    }
  }
  const double error = frobenius_norm(acc - uniform_expectation(bp));
  const double bound = params.variant == GeneratorVariant::exact
                           ? single_step_bound_exact(n, w, params.k)
                           : single_step_bound_star(n, w, params.k, params.delta, params.gamma,
                                                    mass_bound(n, w, params.k, mass).value);
  return {error, bound};
}

// ---------------------------------------------------- degree-k lemma

struct LemmaCheck {
  double lhs;       // E_{D,T} ||E_U H(D + T and U)||^2, by enumeration
  double rhs;       // the lemma's bound
  double diagonal;  // sum_alpha ||H_alpha||^2 Pr[alpha and T = 0]
  double cross;     // sum_{alpha != beta} <H_alpha, H_beta> E chi_{alpha+beta}(D) Pr[(alpha or beta) and T = 0]
};

/// Uses E_U chi_alpha(d + t and U) = chi_alpha(d) [alpha and t = 0].
inline LemmaCheck lemma_h_bound_check(const FourierExpansion& h, const StepParams& params) {
  const std::size_t k = params.k;
  if (!h.supported_at_level(k)) {
    throw validation_error("lemma_h_bound_check: H has coefficients off level " + std::to_string(k));
  }
  const std::size_t n = h.n();
  if (n > 20) throw budget_error("lemma_h_bound_check: n too large for exact enumeration");
  const auto dd = support_points(exact_distribution(params.d(n)));
  const auto tt = support_points(exact_distribution(params.t(n)));
  const auto& coeffs = h.coefficients();

  LemmaCheck out{0.0, 0.0, 0.0, 0.0};
  for (const auto& [t, pt] : tt) {
    for (const auto& [d, pd] : dd) {
      DenseMatrix inner(h.rows(), h.cols());
      for (const auto& [alpha, c] : coeffs) {
        if ((alpha & t) == 0) inner.add_scaled(c, character_sign(alpha, d));
      }
      out.lhs += pt * pd * frobenius_norm_squared(inner);
    }
  }

  auto kill_probability = [&](std::uint64_t mask) {
    double p = 0.0;
    for (const auto& [t, pt] : tt) {
      if ((mask & t) == 0) p += pt;
    }
    return p;
  };
  auto bias = [&](std::uint64_t alpha) {
    double b = 0.0;
    for (const auto& [d, pd] : dd) b += pd * character_sign(alpha, d);
    return b;
  };
  for (const auto& [alpha, ca] : coeffs) {
    out.diagonal += frobenius_norm_squared(ca) * kill_probability(alpha);
    for (const auto& [beta, cb] : coeffs) {
      if (beta == alpha) continue;
      out.cross += frobenius_inner(ca, cb) * bias(alpha ^ beta) * kill_probability(alpha | beta);
    }
  }

  const double kill = std::exp2(-static_cast<double>(k));
  if (params.variant == GeneratorVariant::exact) {
    out.rhs = kill * h.sum_squared_norms();
  } else {
    const double l1 = h.sum_norms();
    out.rhs = (kill + params.gamma) * (params.delta * l1 * l1 + h.sum_squared_norms());
  }
  return out;
}

struct CharacterKill {
  double value;         // |E_{T,U} f(T and U)|
  double uniform_mean;  // E_U f(U), zero whenever alpha != 0
};

/// f = chi_alpha * g with g independent of the bits in alpha, T k-wise
/// independent. `g` is a truth table over all 2^n inputs.
inline CharacterKill character_kill_check(const BitVector& alpha, const std::vector<double>& g, unsigned k) {
  const std::size_t n = alpha.size();
  if (n > 20) throw budget_error("character_kill_check: n too large");
  if (g.size() != (std::size_t{1} << n)) throw dimension_error("g truth table must have 2^n entries");
  if (alpha.hamming_weight() < k) throw validation_error("character_kill_check: |alpha| < k");
  const std::uint64_t a = alpha.to_index();
  for (std::uint64_t x = 0; x < g.size(); ++x) {
    for (std::uint64_t s = a; s != 0; s &= s - 1) {
      if (g[x] != g[x ^ (s & (~s + 1))]) {
        throw validation_error("character_kill_check: g depends on a coordinate inside alpha");
      }
    }
  }
  const double inv = std::ldexp(1.0, -static_cast<int>(n));
  auto f = [&](std::uint64_t x) { return character_sign(a, x) * g[x]; };
  CharacterKill out{0.0, 0.0};
  for (std::uint64_t x = 0; x < g.size(); ++x) out.uniform_mean += f(x) * inv;
  double total = 0.0;
  for (const auto& [t, pt] : support_points(exact_distribution(DistributionDescriptor::kwise(n, k)))) {
    double inner = 0.0;
    for (std::uint64_t u = 0; u < g.size(); ++u) inner += f(t & u);
    total += pt * inner * inv;
  }
  out.value = std::abs(total);
  return out;
}

// ------------------------------------------------ level error profile

namespace detail {

/// R(rho) = sum_z weight(z) prod_j N_j(rho_j, z_j) for every restriction rho.
///
/// Coordinate j of rho holds (c_j, l_j) at bits (2j, 2j+1): the restricted
/// layer reads constant c_j when l_j = 0 and c_j xor x_j otherwise.
/// Coordinate j of z holds (d_j, t_j). N_j(rho_j, z_j) is the layer's
/// expectation over u_j at input d_j xor (t_j and u_j). The sum factorizes
/// coordinate by coordinate, like a Walsh-Hadamard transform.
inline std::vector<DenseMatrix> restriction_transform(const BranchingProgram& bp, std::vector<double> weight) {
  const std::size_t n = bp.n();
  const std::size_t w = bp.width();
  const std::size_t size = std::size_t{1} << (2 * n);
  std::vector<DenseMatrix> s(size);
  for (std::size_t z = 0; z < size; ++z) s[z] = DenseMatrix::identity(w) * weight[z];
  DenseMatrix in[4];
  for (std::size_t j = 0; j < n; ++j) {
    const DenseMatrix a[2] = {bp.transition(j, false), bp.transition(j, true)};
    const DenseMatrix avg = bp.averaged_transition(j);
    auto kernel = [&](unsigned rho, unsigned z) -> const DenseMatrix& {
      const unsigned c = rho & 1U;
      if ((rho >> 1) == 0) return a[c];
      if ((z >> 1) != 0) return avg;
      return a[c ^ (z & 1U)];
    };
    const std::size_t shift = 2 * j;
    for (std::size_t base = 0; base < size; ++base) {
      if (((base >> shift) & 3U) != 0) continue;
      for (unsigned z = 0; z < 4; ++z) in[z] = std::move(s[base | (std::size_t{z} << shift)]);
      for (unsigned rho = 0; rho < 4; ++rho) {
        DenseMatrix out(w, w);
        for (unsigned z = 0; z < 4; ++z) out += in[z] * kernel(rho, z);
        s[base | (std::size_t{rho} << shift)] = std::move(out);
      }
    }
  }
  return s;
}

inline std::size_t interleave(std::uint64_t low, std::uint64_t high, std::size_t n) {
  std::size_t out = 0;
  for (std::size_t j = 0; j < n; ++j) {
    out |= static_cast<std::size_t>((low >> j) & 1U) << (2 * j);
    out |= static_cast<std::size_t>((high >> j) & 1U) << (2 * j + 1);
  }
  return out;
}

/// Law of the composed restriction after one more level x -> d xor (t and x).
/// `p` is indexed by c | (l << n).
inline std::vector<double> compose_restrictions(const std::vector<double>& p, const std::vector<WeightedPoint>& d,
                                                const std::vector<WeightedPoint>& t, std::size_t n) {
  const std::size_t cube = std::size_t{1} << n;
  std::vector<double> out(p.size(), 0.0);
  std::vector<double> proj(cube);
  std::vector<double> q(cube);
  for (std::size_t l = 0; l < cube; ++l) {
    bool any = false;
    for (std::size_t c = 0; c < cube && !any; ++c) any = p[c | (l << n)] != 0.0;
    if (!any) continue;
    // c' = c xor (l and d)
    std::fill(proj.begin(), proj.end(), 0.0);
    for (const auto& [dv, pd] : d) proj[dv & l] += pd;
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t c = 0; c < cube; ++c) {
      const double pc = p[c | (l << n)];
      if (pc == 0.0) continue;
      for (std::size_t v = l;; v = (v - 1) & l) {
        if (proj[v] != 0.0) q[c ^ v] += pc * proj[v];
        if (v == 0) break;
      }
    }
    // l' = l and t
    std::fill(proj.begin(), proj.end(), 0.0);
    for (const auto& [tv, pt] : t) proj[tv & l] += pt;
    for (std::size_t v = l;; v = (v - 1) & l) {
      if (proj[v] != 0.0) {
        for (std::size_t c = 0; c < cube; ++c) {
          if (q[c] != 0.0) out[c | (v << n)] += q[c] * proj[v];
        }
      }
      if (v == 0) break;
    }
  }
  return out;
}

}  // namespace detail

struct LevelProfile {
  std::vector<double> step;        // step[i-1]: expected single-step error at level i
  double base_residual = 0.0;      // expected error of the base against the fully restricted program
  std::vector<double> level_error; // level_error[i] = ||E F(G_i) - E F(U)||, i = 0..r
  double total = 0.0;              // level_error[r]

  [[nodiscard]] double sum_of_contributions() const {
    double s = base_residual;
    for (double v : step) s += v;
    return s;
  }
};

/// Triangle-inequality decomposition of the recursion's error: level i
/// contributes the expected single-step error of the program restricted by
/// levels r..i+1, and the base case contributes the expected error of G_0 on
/// the program restricted by every level.
inline LevelProfile level_error_profile(const BranchingProgram& bp, const GeneratorSpec& spec,
                                        std::size_t budget_entries = std::size_t{1} << 24) {
  const std::size_t n = bp.n();
  const std::size_t w = bp.width();
  if (spec.n() != n) throw dimension_error("generator length differs from program length");
  const std::size_t size = std::size_t{1} << (2 * n);
  if (n > 12 || size * w * w > budget_entries) {
    throw budget_error("level_error_profile: 4^" + std::to_string(n) + " restrictions of " + std::to_string(w) + "x" +
                       std::to_string(w) + " matrices exceed the budget");
  }
  LevelProfile prof;
  const auto levels = level_distributions(spec);
  const DenseMatrix uniform = uniform_expectation(bp);
  for (const auto& g : levels) prof.level_error.push_back(frobenius_norm(expectation_under(bp, g) - uniform));
  prof.total = prof.level_error.back();

  const std::size_t cube = std::size_t{1} << n;
  const auto base = read_order_support(levels.front(), bp);

  // U restricted: d uniform, t = 0
  std::vector<double> uw(size, 0.0);
  for (std::size_t d = 0; d < cube; ++d) uw[detail::interleave(d, 0, n)] = 1.0 / static_cast<double>(cube);
  const auto uniform_restricted = detail::restriction_transform(bp, std::move(uw));

  auto expected_gap = [&](const std::vector<double>& law, const std::vector<DenseMatrix>& r) {
    double e = 0.0;
    for (std::size_t l = 0; l < cube; ++l) {
      for (std::size_t c = 0; c < cube; ++c) {
        const double p = law[c | (l << n)];
        if (p == 0.0) continue;
        const std::size_t rho = detail::interleave(c, l, n);
        e += p * frobenius_norm(r[rho] - uniform_restricted[rho]);
      }
    }
    return e;
  };

  std::vector<double> law(size, 0.0);
  law[(cube - 1) << n] = 1.0;  // identity restriction: c = 0, l = all ones
  prof.step.assign(spec.r(), 0.0);
  if (spec.r() > 0) {
    const auto dd = read_order_support(exact_distribution(spec.d()), bp);
    const auto tt = read_order_support(exact_distribution(spec.t()), bp);
    std::vector<double> sw(size, 0.0);
    for (const auto& [t, pt] : tt) {
      for (const auto& [d, pd] : dd) sw[detail::interleave(d, t, n)] += pt * pd;
    }
    const auto step_restricted = detail::restriction_transform(bp, std::move(sw));
    for (unsigned level = spec.r(); level >= 1; --level) {
      prof.step[level - 1] = expected_gap(law, step_restricted);
      law = detail::compose_restrictions(law, dd, tt, n);
    }
  }
  std::vector<double> bw(size, 0.0);
  for (const auto& [g, pg] : base) bw[detail::interleave(g, 0, n)] += pg;
  prof.base_residual = expected_gap(law, detail::restriction_transform(bp, std::move(bw)));
  return prof;
}

/// Law of the accumulated mask Y = T_1 and ... and T_r.
inline ExactDistribution and_mask_distribution(const GeneratorSpec& spec) {
  ExactDistribution y = ExactDistribution::point_mass(BitVector::ones(spec.n()));
  if (spec.r() == 0) return y;
  const ExactDistribution t = exact_distribution(spec.t());
  const ExactDistribution zero = ExactDistribution::point_mass(BitVector(spec.n()));
  for (unsigned level = 1; level <= spec.r(); ++level) y = noise_step(zero, t, y);
  return y;
}

/// Pr[|Y| >= threshold] for the accumulated mask.
inline double mask_weight_tail(const GeneratorSpec& spec, std::size_t threshold) {
  double p = 0.0;
  for (const auto& [y, py] : support_points(and_mask_distribution(spec))) {
    if (static_cast<std::size_t>(std::popcount(y)) >= threshold) p += py;
  }
  return p;
}

}  // namespace bipn
