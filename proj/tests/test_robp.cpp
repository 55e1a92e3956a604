#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "bipn/bipn.hpp"
#include "oracles.hpp"

using namespace bipn;

namespace {

void expect_matrix_near(const DenseMatrix& a, const DenseMatrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_NEAR(a(r, c), b(r, c), tol) << r << "," << c;
  }
}

std::vector<int> truth(const BranchingProgram& bp) {
  std::vector<int> t;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << bp.n()); ++x) t.push_back(evaluate(bp, BitVector::from_index(bp.n(), x)));
  return t;
}

}  // namespace

TEST(Program, IdentityProgram) {
  const auto bp = BranchingProgram::identity(4, 3);
  for (std::uint64_t x = 0; x < 16; ++x) {
    const auto f = product_matrix(bp, BitVector::from_index(4, x));
    expect_matrix_near(f, DenseMatrix::identity(3), 0.0);
    EXPECT_EQ(evaluate(bp, BitVector::from_index(4, x)), 1);
  }
  expect_matrix_near(uniform_expectation(bp), DenseMatrix::identity(3), 0.0);
}

TEST(Program, ParityExamples) {
  const auto bp = BranchingProgram::parity(3);
  const auto f = product_matrix(bp, BitVector::parse("110"));
  expect_matrix_near(f, DenseMatrix::identity(2), 0.0);
  const auto g = product_matrix(bp, BitVector::parse("100"));
  EXPECT_EQ(g(0, 1), 1.0);
  EXPECT_EQ(g(1, 0), 1.0);
  EXPECT_EQ(evaluate(bp, BitVector::parse("101")), 1);
  EXPECT_EQ(evaluate(bp, BitVector::parse("100")), 0);
  for (std::size_t n = 1; n <= 6; ++n) {
    expect_matrix_near(uniform_expectation(BranchingProgram::parity(n)), DenseMatrix(2, 2, 0.5), 1e-15);
  }
}

TEST(Program, ProductMatchesWalkAndNorm) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto bp = permute_order(random_program(6, 4, seed), [&] {
      std::mt19937_64 rng(seed);
      return random_permutation(6, rng);
    }());
    for (std::uint64_t x = 0; x < 64; ++x) {
      const auto in = BitVector::from_index(6, x);
      const auto f = product_matrix(bp, in);
      expect_matrix_near(f, oracle::walk_matrix(bp, in), 0.0);
      EXPECT_EQ(frobenius_norm_squared(f), 4.0);
    }
  }
  EXPECT_THROW(product_matrix(BranchingProgram::parity(3), BitVector(4)), dimension_error);
}

TEST(Program, UniformExpectationMatchesAverage) {
  for (std::size_t n = 0; n <= 12; n += 3) {
    const auto bp = random_program(n, 3, 100 + n);
    expect_matrix_near(uniform_expectation(bp), oracle::brute_uniform(bp), 1e-12);
  }
}

TEST(Program, ValidationRejectsBadLayers) {
  BranchingProgram::Layer l;
  l.next[0] = {0, 2};
  l.next[1] = {0, 1};
  EXPECT_THROW(BranchingProgram(2, {l}, {0}), validation_error);
  l.next[0] = {0};
  EXPECT_THROW(BranchingProgram(2, {l}, {0}), validation_error);
  l.next[0] = {0, 1};
  EXPECT_THROW(BranchingProgram(2, {l, l}, {0, 0}), validation_error);
  EXPECT_THROW(BranchingProgram(0, {}, {}), validation_error);
}

TEST(Split, Endpoints) {
  const auto bp = random_program(5, 3, 7);
  auto [pre0, suf0] = split(bp, 0);
  EXPECT_EQ(pre0.n(), 0U);
  EXPECT_EQ(suf0.layers(), bp.layers());
  auto [pre5, suf5] = split(bp, 5);
  EXPECT_EQ(pre5.layers(), bp.layers());
  EXPECT_EQ(suf5.n(), 0U);
  expect_matrix_near(product_matrix(suf5, BitVector(0)), DenseMatrix::identity(3), 0.0);
  EXPECT_THROW(split(bp, 6), std::invalid_argument);
}

TEST(Split, ProductIdentityAllInputs) {
  for (std::size_t n = 1; n <= 8; ++n) {
    std::mt19937_64 rng(n);
    const auto bp = permute_order(random_program(n, 3, 40 + n), random_permutation(n, rng));
    for (std::size_t i = 0; i <= n; ++i) {
      auto [pre, suf] = split(bp, i);
      for (std::uint64_t y = 0; y < (std::uint64_t{1} << n); ++y) {
        const auto whole = state_map_matrix(bp.state_map_read_order(y));
        const auto left = state_map_matrix(pre.state_map_read_order(y & ((std::uint64_t{1} << i) - 1)));
        const auto right = state_map_matrix(suf.state_map_read_order(y >> i));
        ASSERT_EQ(frobenius_norm(whole - left * right), 0.0) << n << " " << i << " " << y;
      }
    }
  }
}

TEST(Permute, Examples) {
  const auto bp = oracle::x1_and_not_x3();
  for (std::uint64_t x = 0; x < 8; ++x) {
    const auto v = BitVector::from_index(3, x);
    EXPECT_EQ(evaluate(bp, v), v.get(0) && !v.get(2));
  }
  const auto swapped = permute_order(bp, {2, 1, 0});
  for (std::uint64_t x = 0; x < 8; ++x) {
    const auto v = BitVector::from_index(3, x);
    EXPECT_EQ(evaluate(swapped, v), v.get(2) && !v.get(0));
  }
  EXPECT_EQ(truth(permute_order(bp, identity_permutation(3))), truth(bp));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(truth(permute_order(BranchingProgram::parity(5), random_permutation(5, rng))), truth(BranchingProgram::parity(5)));
  EXPECT_THROW(permute_order(bp, {0, 0, 1}), validation_error);
}

TEST(Permute, ReindexesTruthTable) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 7;
    const auto bp = random_program(n, 3, rng());
    const auto sigma = random_permutation(n, rng);
    const auto moved = permute_order(bp, sigma);
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
      const auto v = BitVector::from_index(n, x);
      BitVector y(n);
      for (std::size_t i = 0; i < n; ++i) y.set(i, v.get(sigma[i]));
      ASSERT_EQ(evaluate(moved, v), evaluate(bp, y));
    }
    EXPECT_EQ(truth(permute_order(moved, inverse_permutation(sigma))), truth(bp));
  }
}

TEST(Random, DeterministicAndValid) {
  EXPECT_EQ(random_program(0, 3, 9).n(), 0U);
  EXPECT_EQ(evaluate(random_program(0, 3, 9), BitVector(0)), 1);
  EXPECT_EQ(random_program(8, 4, 42).to_text(), random_program(8, 4, 42).to_text());
  EXPECT_NE(random_program(8, 4, 42).to_text(), random_program(8, 4, 43).to_text());
  const auto bp = random_program(8, 4, 42);
  for (std::size_t i = 0; i < 8; ++i) {
    for (int b = 0; b < 2; ++b) {
      const auto a = bp.transition(i, b != 0);
      for (std::size_t r = 0; r < 4; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
          EXPECT_TRUE(a(r, c) == 0.0 || a(r, c) == 1.0);
          row += a(r, c);
        }
        EXPECT_EQ(row, 1.0);
      }
    }
  }
}

TEST(TextFormat, Golden) {
  const auto bp = permute_order(BranchingProgram::parity(3), {2, 0, 1});
  const std::string want =
      "robp n=3 w=2 order=3,1,2\n"
      "1,2 | 2,1\n"
      "1,2 | 2,1\n"
      "1,2 | 2,1\n";
  EXPECT_EQ(bp.to_text(), want);
  EXPECT_EQ(BranchingProgram::parse(want).to_text(), want);
}

TEST(TextFormat, RoundTripAndErrors) {
  std::ostringstream many;
  for (std::uint64_t s = 0; s < 5; ++s) many << random_program(4 + s, 2 + s % 3, s).to_text() << "\n";
  std::istringstream in(many.str());
  const auto all = BranchingProgram::parse_all(in);
  ASSERT_EQ(all.size(), 5U);
  for (std::uint64_t s = 0; s < 5; ++s) EXPECT_EQ(all[s].to_text(), random_program(4 + s, 2 + s % 3, s).to_text());
  EXPECT_THROW(BranchingProgram::parse("robp n=1 w=2 order=1\n1,3 | 1,1\n"), parse_error);
  EXPECT_THROW(BranchingProgram::parse("robp n=2 w=2 order=1,2\n1,2 | 1,2\n"), parse_error);
  EXPECT_THROW(BranchingProgram::parse("program n=1\n"), parse_error);
}

TEST(Formula, SmallExamples) {
  const auto v1 = compile_formula(ReadOnceFormula::var(1));
  EXPECT_EQ(v1.width(), 2U);
  EXPECT_EQ(v1.n(), 1U);
  EXPECT_EQ(evaluate(v1, BitVector::parse("1")), 1);
  EXPECT_EQ(evaluate(v1, BitVector::parse("0")), 0);

  const auto conj = compile_formula(ReadOnceFormula::conj(ReadOnceFormula::var(1), ReadOnceFormula::var(2)));
  for (std::uint64_t x = 0; x < 4; ++x) EXPECT_EQ(evaluate(conj, BitVector::from_index(2, x)), x == 3 ? 1 : 0);
}

TEST(Formula, ParseAndRender) {
  const auto f = ReadOnceFormula::parse("AND(x1, OR(NOT(x3), x2))");
  EXPECT_EQ(f.to_string(), "AND(x1,OR(NOT(x3),x2))");
  EXPECT_EQ(f.depth(), 3U);
  EXPECT_TRUE(f.is_read_once());
  const auto bp = compile_formula(f);
  EXPECT_EQ(format_order(bp.order()), "1-3-2");
  EXPECT_THROW(compile_formula(ReadOnceFormula::parse("AND(x1,x1)")), validation_error);
  EXPECT_THROW(ReadOnceFormula::parse("AND(x1"), parse_error);
  EXPECT_THROW(ReadOnceFormula::parse("x0"), parse_error);
}

TEST(Formula, RandomAgreeWithTruthTables) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t depth = 1 + rng() % 4;
    const std::size_t vars = 1 + rng() % std::min<std::size_t>(8, std::size_t{1} << depth);
    const auto f = random_formula(vars, depth, rng);
    ASSERT_LE(f.depth(), depth);
    const auto bp = compile_formula(f);
    EXPECT_LE(bp.width(), f.depth() + 2) << f.to_string();
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << bp.n()); ++x) {
      const auto in = BitVector::from_index(bp.n(), x);
      ASSERT_EQ(evaluate(bp, in), f.evaluate(in) ? 1 : 0) << f.to_string();
    }
  }
}

TEST(Formula, EightVariableFormula) {
  const auto f = ReadOnceFormula::parse("OR(AND(OR(x1,x5),AND(x2,NOT(x7))),AND(OR(x3,x8),OR(x4,x6)))");
  const auto bp = compile_formula(f);
  ASSERT_EQ(bp.n(), 8U);
  for (std::uint64_t x = 0; x < 256; ++x) {
    const auto in = BitVector::from_index(8, x);
    ASSERT_EQ(evaluate(bp, in), f.evaluate(in) ? 1 : 0);
  }
}
