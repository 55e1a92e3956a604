// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "bipn/bipn.hpp"
#include "oracles.hpp"

using namespace bipn;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

BranchingProgram random_ordered(std::size_t n, std::size_t w, std::mt19937_64& rng) {
  return permute_order(random_program(n, w, rng()), random_permutation(n, rng));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 1. k-wise samplers are exactly k-wise; small-bias samplers meet delta.
Outcome primitives() {
  Outcome o;
  for (std::size_t n : {4, 8, 16}) {
    for (unsigned k = 1; k <= 4; ++k) {
      const double dev = audit_kwise(DistributionDescriptor::kwise(n, k), k);
      o.require(dev == 0.0, "kwise n=" + std::to_string(n) + " k=" + std::to_string(k) + " deviation " + fmt(dev));
    }
  }
  double worst_ratio = 0.0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (double delta : {0.5, 0.25, 0.125}) {
      const auto d = DistributionDescriptor::small_bias(n, delta);
      const double b = max_bias(d);
      worst_ratio = std::max(worst_ratio, b / delta);
      o.require(b <= delta, "small-bias n=" + std::to_string(n) + " delta=" + fmt(delta) + " bias " + fmt(b));
    }
  }
  if (o.ok) o.detail = "max bias/delta " + fmt(worst_ratio);
  return o;
}

// 2. sum of squared coefficient norms equals w.
Outcome parseval() {
  Outcome o;
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng() % 10;
    const std::size_t w = 2 + rng() % 3;
    const auto s = parseval_check(read_order_truth_table(random_ordered(n, w, rng)));
    const double gap = std::abs(s.coefficient_side - static_cast<double>(w));
    worst = std::max(worst, gap);
    o.require(gap <= 1e-9, "program " + std::to_string(i) + " gap " + fmt(gap));
  }
  if (o.ok) o.detail = "max gap " + fmt(worst);
  return o;
}

// 3. the low/high decomposition reproduces F pointwise.
Outcome prop1() {
  Outcome o;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 8;
    const std::size_t w = 2 + rng() % 2;
    const auto bp = random_ordered(n, w, rng);
    for (std::size_t k = 1; k <= n; ++k) {
      const double e = prop1_reconstruction_error(bp, decompose_prop1(bp, k));
      worst = std::max(worst, e);
      o.require(e <= 1e-9, "program " + std::to_string(i) + " k=" + std::to_string(k) + " error " + fmt(e));
    }
  }
  if (o.ok) o.detail = "max pointwise error " + fmt(worst);
  return o;
}

// 4. degree-k terms shrink by 2^-k in expectation.
Outcome lemma_h() {
  Outcome o;
  std::mt19937_64 rng(4);
  int terms = 0;
  double worst_slack = -1.0;
  while (terms < 100) {
    const std::size_t n = 3 + rng() % 4;
    const auto k = static_cast<unsigned>(1 + rng() % 3);
    const auto bp = random_ordered(n, 2 + rng() % 2, rng);
    for (const auto& t : decompose_prop1(bp, k).high) {
      if (terms == 100) break;
      const auto c = lemma_h_bound_check(t.h, StepParams::exact(k));
      const double rhs = std::ldexp(t.h.sum_squared_norms(), -static_cast<int>(k));
      o.require(c.lhs <= rhs + 1e-9, "term " + std::to_string(terms) + " lhs " + fmt(c.lhs) + " > " + fmt(rhs));
      worst_slack = std::max(worst_slack, c.lhs - rhs);
      ++terms;
    }
  }
  std::normal_distribution<double> gauss;
  for (unsigned k = 1; k <= 3; ++k) {
    FourierExpansion h(6, 2, 2);
    DenseMatrix m(2, 2);
    for (double& v : m.data()) v = gauss(rng);
    h.set(((std::uint64_t{1} << k) - 1) << (6 - k), m);
    const auto c = lemma_h_bound_check(h, StepParams::exact(k));
    const double want = std::ldexp(frobenius_norm_squared(m), -static_cast<int>(k));
    o.require(std::abs(c.lhs - want) <= 1e-12, "single character k=" + std::to_string(k) + " lhs " + fmt(c.lhs));
  }
  if (o.ok) o.detail = "100 terms, max lhs - rhs " + fmt(worst_slack);
  return o;
}

// 5. one noise step fools width-w programs to nw/2^(k/2).
Outcome single_step() {
  Outcome o;
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng() % 5;
    const std::size_t w = 2 + rng() % 2;
    const unsigned k = 2 + static_cast<unsigned>(i % 2);
    const auto r = single_step_error(random_ordered(n, w, rng), StepParams::exact(k));
    const double bound = static_cast<double>(n * w) / std::pow(2.0, k / 2.0);
    worst = std::max(worst, r.error);
    o.require(r.error <= bound, "program " + std::to_string(i) + " error " + fmt(r.error) + " > " + fmt(bound));
  }
  if (o.ok) o.detail = "max error " + fmt(worst);
  return o;
}

double recursion_target(std::size_t n, std::size_t w, unsigned k, unsigned r) {
  return r * static_cast<double>(n * w) / std::pow(2.0, k / 2.0) +
         2.0 * static_cast<double>(n) * std::sqrt(static_cast<double>(w)) / std::pow(2.0, r);
}

// 6. the full recursion over many read orders.
Outcome recursion() {
  Outcome o;
  const unsigned k = 3;
  const unsigned r = 2;
  const double bound = recursion_target(8, 2, k, r);
  const auto g = exact_output_distribution(GeneratorSpec::exact(8, 2, k, r));
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int p = 0; p < 20; ++p) {
    const auto base = random_program(8, 2, rng());
    for (int i = 0; i < 100; ++i) {
      const auto e = fooling_error(permute_order(base, random_permutation(8, rng)), g);
      worst = std::max(worst, e.frobenius);
      o.require(e.frobenius <= bound, "program " + std::to_string(p) + " error " + fmt(e.frobenius));
    }
  }
  const auto parity = BranchingProgram::parity(8);
  const double pe = fooling_error(parity, g).frobenius;
  o.require(pe <= bound, "parity error " + fmt(pe));
  // 2k >= n: output is uniform
  const auto collapsed = exact_output_distribution(GeneratorSpec::exact(6, 2, 3, 2));
  for (int i = 0; i < 20; ++i) {
    const double e = fooling_error(random_ordered(6, 2, rng), collapsed).frobenius;
    o.require(e == 0.0, "collapse case error " + fmt(e));
  }
  if (o.ok) o.detail = "max error " + fmt(std::max(worst, pe)) + " vs bound " + fmt(bound);
  return o;
}

// 7. star step with small-bias D and almost k-wise T.
Outcome star_step() {
  Outcome o;
  std::mt19937_64 rng(7);
  const double delta = std::ldexp(1.0, -10);
  const double gamma = delta;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 2 + rng() % 5;
    const auto r = single_step_error(random_ordered(n, 2, rng), StepParams::star(delta, gamma, 3));
    const double l = oracle::trivial_mass(n, 2, 3);
    const double bound = (std::sqrt(delta) * l + std::pow(2.0, -1.5) + std::sqrt(gamma)) * static_cast<double>(2 * n);
    worst = std::max(worst, r.error);
    o.require(r.error <= bound, "program " + std::to_string(i) + " error " + fmt(r.error) + " > " + fmt(bound));
  }
  if (o.ok) o.detail = "max error " + fmt(worst);
  return o;
}

// 8. parameter formulas against hand-ceilinged values.
Outcome parameters() {
  Outcome o;
  const auto e = derive_params_exact(256, 256);
  o.require(e.k == 56 && e.r == 20, "exact (256,256) gave (" + std::to_string(e.k) + "," + std::to_string(e.r) + ")");
  o.require(GeneratorSpec::derived_exact(256, 256).seed_bits() == 26880, "seed length for (256,256)");
  struct Case {
    std::size_t n, w;
    double eps;
    unsigned k, r;
    double ratio;
  };
  for (const Case& c : {Case{16, 2, 0.5, 18, 4, 64.0}, Case{2, 1, 0.5, 6, 1, 4.0}, Case{100, 4, 0.1, 36, 7, 4000.0}}) {
    const auto p = derive_params_star(c.n, c.w, c.eps);
    const std::string tag = "star (" + std::to_string(c.n) + "," + std::to_string(c.w) + "," + fmt(c.eps) + ")";
    o.require(p.k == c.k && p.r == c.r, tag + " gave k=" + std::to_string(p.k) + " r=" + std::to_string(p.r));
    o.require(p.gamma == std::pow(c.ratio, -9.0), tag + " gamma");
    const double l = oracle::trivial_mass(c.n, c.w, c.k);
    o.require(std::abs(p.delta / std::pow(c.ratio * l, -3.0) - 1.0) <= 1e-12, tag + " delta");
  }
  return o;
}

// 9. the level-by-level law equals the histogram over every seed.
Outcome cross_validation() {
  Outcome o;
  for (const auto& spec : {GeneratorSpec::exact(4, 2, 1, 1), GeneratorSpec::exact(6, 2, 2, 1)}) {
    const auto dp = exact_output_distribution(spec);
    std::vector<uint128> counts(std::size_t{1} << spec.n(), 0);
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << spec.seed_bits()); ++s) {
      counts[expand_seed(spec, BitVector::from_index(spec.seed_bits(), s)).to_index()] += 1;
    }
    const ExactDistribution hist(spec.n(), static_cast<unsigned>(spec.seed_bits()), counts);
    o.require(dp == hist, "mismatch for " + spec.to_string());
  }
  return o;
}

// 10. read-once formulas compile correctly and are fooled like criterion 6.
Outcome formulas() {
  Outcome o;
  std::mt19937_64 rng(10);
  double worst_gap = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t depth = 1 + rng() % 4;
    const std::size_t vars = 1 + rng() % std::min<std::size_t>(8, std::size_t{1} << depth);
    const auto phi = random_formula(vars, depth, rng);
    const auto bp = compile_formula(phi);
    const std::size_t n = bp.n();
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
      const auto v = BitVector::from_index(n, x);
      o.require((oracle::walk(bp, v)[0] == 0) == phi.evaluate(v), "formula " + phi.to_string() + " disagrees");
    }
    const unsigned k = 3;
    const unsigned r = 2;
    const double bound = recursion_target(n, bp.width(), k, r);
    const auto g = exact_output_distribution(GeneratorSpec::exact(n, bp.width(), k, r));
    for (int j = 0; j < 20; ++j) {
      const double e = fooling_error(permute_order(bp, random_permutation(n, rng)), g).frobenius;
      worst_gap = std::max(worst_gap, e / bound);
      o.require(e <= bound, "formula " + phi.to_string() + " error " + fmt(e) + " > " + fmt(bound));
    }
  }
  if (o.ok) o.detail = "max error/bound " + fmt(worst_gap);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"primitive exactness", primitives},
      {"parseval", parseval},
      {"low/high decomposition", prop1},
      {"degree-k term shrinkage", lemma_h},
      {"single noise step", single_step},
      {"full recursion", recursion},
      {"star noise step", star_step},
      {"parameter formulas", parameters},
      {"dp vs seed enumeration", cross_validation},
      {"read-once formulas", formulas},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu (%s) %.2fs%s%s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    failed += o.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
