#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bipn/bipn.hpp"
#include "oracles.hpp"

using namespace bipn;

namespace {

BitVector random_bits(std::size_t n, std::mt19937_64& rng) {
  BitVector v(n);
  for (std::size_t i = 0; i < n; ++i) v.set(i, rng() & 1U);
  return v;
}

}  // namespace

TEST(Params, ExactTable) {
  const auto a = derive_params_exact(256, 256);
  EXPECT_EQ(a.k, 56U);
  EXPECT_EQ(a.r, 20U);
  const auto b = derive_params_exact(2, 1);
  EXPECT_EQ(b.k, 5U);
  EXPECT_EQ(b.r, 2U);
  const auto c = derive_params_exact(1024, 1024);
  EXPECT_EQ(c.k, 70U);
  EXPECT_EQ(c.r, 25U);
  EXPECT_THROW(derive_params_exact(1, 4), validation_error);
}

TEST(Params, StarTable) {
  struct Case {
    std::size_t n, w;
    double eps;
    unsigned k, r;
    double ratio;
  };
  for (const Case& c : {Case{16, 2, 0.5, 18, 4, 64.0}, Case{2, 1, 0.5, 6, 1, 4.0}, Case{100, 4, 0.1, 36, 7, 4000.0}}) {
    const auto p = derive_params_star(c.n, c.w, c.eps);
    EXPECT_EQ(p.k, c.k) << c.n;
    EXPECT_EQ(p.r, c.r) << c.n;
    EXPECT_DOUBLE_EQ(p.gamma, std::pow(c.ratio, -9.0));
    const double l = oracle::trivial_mass(c.n, c.w, c.k);
    EXPECT_NEAR(p.mass / l, 1.0, 1e-12);
    EXPECT_NEAR(p.delta / std::pow(c.ratio * l, -3.0), 1.0, 1e-12);
  }
  EXPECT_THROW(derive_params_star(16, 2, 1.0), validation_error);
  EXPECT_THROW(derive_params_star(16, 2, 0.0), validation_error);
}

TEST(Params, StarDeltaFollowsMassMode) {
  const MassBoundConfig chrt{MassBoundMode::chrt, 1.0};
  const auto p = derive_params_star(16, 2, 0.5, chrt);
  EXPECT_DOUBLE_EQ(p.mass, mass_bound(16, 2, p.k, chrt).value);
  EXPECT_DOUBLE_EQ(p.delta, std::pow(64.0 * p.mass, -3.0));
}

TEST(SeedLength, ExactDerivedExample) {
  const auto s = GeneratorSpec::derived_exact(256, 256);
  EXPECT_EQ(seed_length(s), 26880U);
  EXPECT_TRUE(s.derived());
}

TEST(SeedLength, StarLayout) {
  const auto s = GeneratorSpec::star(16, 2, 3, 2, 0.01, 0.02);
  const std::size_t base = 320 * 3 * 4;
  const auto d = DistributionDescriptor::small_bias(16, 0.01).seed_bits();
  const auto t = DistributionDescriptor::almost_kwise(16, 3, 0.02).seed_bits();
  EXPECT_EQ(seed_length(s), base + 2 * (d + t));
  ASSERT_EQ(s.layout().size(), 5U);
  EXPECT_EQ(s.layout()[0].role, SeedRole::base);
  EXPECT_EQ(s.layout()[0].length, base);
  EXPECT_EQ(s.layout()[1].level, 2U);
  EXPECT_EQ(s.layout()[1].role, SeedRole::d);
  EXPECT_EQ(s.layout()[4].level, 1U);
  EXPECT_EQ(s.layout()[4].role, SeedRole::t);
  std::size_t offset = 0;
  for (const auto& slice : s.layout()) {
    EXPECT_EQ(slice.offset, offset);
    offset += slice.length;
  }
  EXPECT_EQ(offset, s.seed_bits());
}

TEST(ExpandSeed, ZeroLevelsGiveAllOnes) {
  const auto s = GeneratorSpec::exact(7, 2, 2, 0);
  EXPECT_EQ(s.seed_bits(), 0U);
  EXPECT_EQ(expand_seed(s, BitVector(0)), BitVector::ones(7));
}

TEST(ExpandSeed, HandTraceOneLevel) {
  // n=4, k=1: D is 2-wise (coefficients c0, c1 in GF(4)), T is 1-wise (c0 only).
  const auto s = GeneratorSpec::exact(4, 2, 1, 1);
  ASSERT_EQ(s.seed_bits(), 6U);
  // D = 1111 (c0 = 1), T = 1111: output 0000
  EXPECT_EQ(expand_seed(s, BitVector::parse("100010")).to_string(), "0000");
  // D from p(z) = z: low bits of 0,1,2,3; T = 0000
  EXPECT_EQ(expand_seed(s, BitVector::parse("001000")).to_string(), "0101");
  // same D, T = 1111 keeps the all-ones base: 0101 xor 1111
  EXPECT_EQ(expand_seed(s, BitVector::parse("001010")).to_string(), "1010");
}

TEST(ExpandSeed, MatchesDirectRecursion) {
  std::mt19937_64 rng(4);
  const auto s = GeneratorSpec::exact(10, 2, 2, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto seed = random_bits(s.seed_bits(), rng);
    BitVector g = BitVector::ones(10);
    // levels stored r..1, each D then T
    std::size_t off = 0;
    std::vector<BitVector> d(4), t(4);
    for (unsigned level = 3; level >= 1; --level) {
      d[level] = seed.slice(off, s.d().seed_bits());
      off += s.d().seed_bits();
      t[level] = seed.slice(off, s.t().seed_bits());
      off += s.t().seed_bits();
    }
    for (unsigned level = 1; level <= 3; ++level) {
      g = xor_add(sample_kwise(10, 4, d[level]), bitwise_and(sample_kwise(10, 2, t[level]), g));
    }
    EXPECT_EQ(expand_seed(s, seed), g);
    EXPECT_EQ(expand_seed(s, seed), expand_seed(s, seed));
  }
}

TEST(ExpandSeed, WrongLength) {
  const auto s = GeneratorSpec::exact(4, 2, 1, 1);
  EXPECT_THROW(expand_seed(s, BitVector(5)), seed_error);
  EXPECT_THROW(expand_seed(s, BitVector(7)), seed_error);
}

TEST(ExpandSeed, StarRuns) {
  std::mt19937_64 rng(8);
  const auto s = GeneratorSpec::star(6, 2, 1, 2, 0.25, 0.25);
  const auto seed = random_bits(s.seed_bits(), rng);
  EXPECT_EQ(expand_seed(s, seed).size(), 6U);
  EXPECT_EQ(expand_seed(s, seed), expand_seed(s, seed));
}

TEST(OutputDistribution, DynamicProgramEqualsEnumeration) {
  for (const auto& s : {GeneratorSpec::exact(4, 2, 1, 1), GeneratorSpec::exact(6, 2, 2, 1),
                        GeneratorSpec::exact(4, 2, 1, 2), GeneratorSpec::exact(5, 3, 1, 2)}) {
    const auto dp = exact_output_distribution(s);
    EXPECT_TRUE(dp.sums_to_one());
    EXPECT_EQ(dp, enumerate_output_distribution(s)) << s.to_string();
  }
}

TEST(OutputDistribution, LevelsSumToOne) {
  const auto levels = level_distributions(GeneratorSpec::exact(10, 2, 2, 4));
  ASSERT_EQ(levels.size(), 5U);
  EXPECT_EQ(levels[0], ExactDistribution::point_mass(BitVector::ones(10)));
  for (const auto& l : levels) EXPECT_TRUE(l.sums_to_one());
}

TEST(OutputDistribution, UniformOnceDIsUniform) {
  // 2k >= n makes D fully uniform, so every level after the base is uniform
  for (std::size_t n : {3, 4, 6}) {
    const unsigned k = static_cast<unsigned>((n + 1) / 2);
    const auto levels = level_distributions(GeneratorSpec::exact(n, 2, k, 3));
    for (unsigned i = 1; i <= 3; ++i) EXPECT_TRUE(levels[i].is_uniform()) << n << " " << i;
  }
  const auto s = GeneratorSpec::exact(4, 2, 2, 1);
  EXPECT_TRUE(enumerate_output_distribution(s).is_uniform());
}

TEST(OutputDistribution, Refusals) {
  EXPECT_THROW(level_distributions(GeneratorSpec::exact(15, 2, 2, 1)), budget_error);
  EXPECT_THROW(enumerate_output_distribution(GeneratorSpec::exact(16, 2, 3, 3)), budget_error);
}

TEST(Noise, MaskOnesDecayGeometrically) {
  // Pr[T_1 and ... and T_r has bit j] = 2^-r for k-wise T
  for (unsigned r = 1; r <= 4; ++r) {
    const auto s = GeneratorSpec::exact(8, 2, 2, r);
    const auto mask = and_mask_distribution(s);
    for (std::size_t j = 0; j < 8; ++j) {
      double p = 0.0;
      mask.for_each_support([&](std::uint64_t x, uint128) {
        if ((x >> j) & 1U) p += mask.probability(x);
      });
      EXPECT_LE(p, std::ldexp(1.0, -static_cast<int>(r)) + 1e-15) << r << " " << j;
    }
  }
}

TEST(Noise, StepMatchesDirectConvolution) {
  const auto d = exact_distribution(DistributionDescriptor::kwise(5, 2));
  const auto t = exact_distribution(DistributionDescriptor::kwise(5, 1));
  const auto g = exact_distribution(DistributionDescriptor::small_bias(5, 0.5));
  const auto out = noise_step(d, t, g);
  std::vector<double> want(32, 0.0);
  for (std::uint64_t a = 0; a < 32; ++a) {
    for (std::uint64_t b = 0; b < 32; ++b) {
      for (std::uint64_t c = 0; c < 32; ++c) want[a ^ (b & c)] += d.probability(a) * t.probability(b) * g.probability(c);
    }
  }
  for (std::uint64_t x = 0; x < 32; ++x) EXPECT_DOUBLE_EQ(out.probability(x), want[x]);
  EXPECT_THROW(noise_step(d, t, ExactDistribution::uniform(4)), dimension_error);
}

TEST(SpecText, RoundTrip) {
  const std::string line = "gen variant=exact n=16 w=4 k=6 r=3 layout=v1";
  const auto s = GeneratorSpec::parse(line);
  EXPECT_EQ(s.to_string(), line);
  EXPECT_EQ(s.k(), 6U);
  EXPECT_EQ(s.r(), 3U);
  const auto star = GeneratorSpec::star(8, 2, 2, 3, 0.001, 1e-5);
  const auto back = GeneratorSpec::parse(star.to_string());
  EXPECT_EQ(back.to_string(), star.to_string());
  EXPECT_EQ(back.seed_bits(), star.seed_bits());
  EXPECT_THROW(GeneratorSpec::parse("gen variant=exact n=4 w=2 k=1 r=1 layout=v2"), parse_error);
  EXPECT_THROW(GeneratorSpec::parse("gen variant=exact n=4 k=1 r=1"), parse_error);
  EXPECT_THROW(GeneratorSpec::parse("generator n=4"), parse_error);
}
