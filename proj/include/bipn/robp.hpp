#pragma once

// Read-once oblivious branching programs in the matrix-product encoding.
//
// Layer i holds the transition matrices A_{i,0}, A_{i,1}; rows index the
// current state and columns the successor, and state 0 (written "state 1" in
// the text format) is both start and accept. Layer i reads input bit
// order[i], so F(x) = A_{0, x[order[0]]} * ... * A_{n-1, x[order[n-1]]}.
// The vector y with y_i = x[order[i]] is the read-order view of x.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/errors.hpp"
#include "bipn/matrix.hpp"

namespace bipn {

using Permutation = std::vector<std::size_t>;

inline void validate_permutation(const Permutation& p, std::size_t n) {
  if (p.size() != n) throw validation_error("permutation has " + std::to_string(p.size()) + " entries, expected " + std::to_string(n));
  std::vector<bool> seen(n, false);
  for (std::size_t v : p) {
    if (v >= n || seen[v]) throw validation_error("not a permutation of {1.." + std::to_string(n) + "}");
    seen[v] = true;
  }
}

inline Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

inline Permutation inverse_permutation(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return inv;
}

/// Fisher-Yates driven by raw mt19937_64 output, so the stream is fixed
/// across standard libraries.
inline Permutation random_permutation(std::size_t n, std::mt19937_64& rng) {
  Permutation p = identity_permutation(n);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
  return p;
}

class BranchingProgram {
 public:
  using State = std::uint32_t;

  /// Successor lists for one layer: next[b][s] is the state reached from s on input bit b.
  struct Layer {
    std::vector<State> next[2];
    friend bool operator==(const Layer&, const Layer&) = default;
  };

  BranchingProgram(std::size_t width, std::vector<Layer> layers, Permutation order)
      : w_(width), layers_(std::move(layers)), order_(std::move(order)) {
    if (w_ < 1) throw validation_error("branching program width must be >= 1");
    validate_permutation(order_, layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (const auto& next : layers_[i].next) {
        if (next.size() != w_) throw validation_error("layer " + std::to_string(i + 1) + " has the wrong number of rows");
        for (State s : next) {
          if (s >= w_) throw validation_error("layer " + std::to_string(i + 1) + " names a state beyond the width");
        }
      }
    }
  }

  static BranchingProgram identity(std::size_t n, std::size_t w) {
    Layer l;
    l.next[0].resize(w);
    std::iota(l.next[0].begin(), l.next[0].end(), State{0});
    l.next[1] = l.next[0];
    return {w, std::vector<Layer>(n, l), identity_permutation(n)};
  }

  /// Width 2, accepts inputs of even parity.
  static BranchingProgram parity(std::size_t n) {
    Layer l;
    l.next[0] = {0, 1};
    l.next[1] = {1, 0};
    return {2, std::vector<Layer>(n, l), identity_permutation(n)};
  }

  [[nodiscard]] std::size_t n() const noexcept { return layers_.size(); }
  [[nodiscard]] std::size_t width() const noexcept { return w_; }
  [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
  [[nodiscard]] const Layer& layer(std::size_t i) const noexcept { return layers_[i]; }
  [[nodiscard]] const Permutation& order() const noexcept { return order_; }

  [[nodiscard]] bool has_identity_order() const noexcept {
    for (std::size_t i = 0; i < order_.size(); ++i) {
      if (order_[i] != i) return false;
    }
    return true;
  }

  /// A_{i,b} as a 0/1 matrix.
  [[nodiscard]] DenseMatrix transition(std::size_t i, bool b) const {
    DenseMatrix m(w_, w_);
    for (std::size_t s = 0; s < w_; ++s) m(s, layers_[i].next[b][s]) = 1.0;
    return m;
  }

  /// (A_{i,0} + A_{i,1}) / 2.
  [[nodiscard]] DenseMatrix averaged_transition(std::size_t i) const {
    DenseMatrix m(w_, w_);
    for (std::size_t s = 0; s < w_; ++s) {
      m(s, layers_[i].next[0][s]) += 0.5;
      m(s, layers_[i].next[1][s]) += 0.5;
    }
    return m;
  }

  [[nodiscard]] BitVector read_order_view(const BitVector& x) const {
    check_input(x);
    BitVector y(n());
    for (std::size_t i = 0; i < n(); ++i) y.set(i, x.get(order_[i]));
    return y;
  }

  /// Packed read-order view for n <= 64.
  [[nodiscard]] std::uint64_t read_order_view(std::uint64_t x) const noexcept {
    std::uint64_t y = 0;
    for (std::size_t i = 0; i < n(); ++i) y |= ((x >> order_[i]) & 1U) << i;
    return y;
  }

  /// Composite state map of the product: row s of F(x) has its 1 in column map[s].
  /// `y` is in read order.
  [[nodiscard]] std::vector<State> state_map_read_order(std::uint64_t y) const {
    std::vector<State> map(w_);
    std::iota(map.begin(), map.end(), State{0});
    for (std::size_t i = 0; i < n(); ++i) {
      const auto& next = layers_[i].next[(y >> i) & 1U];
      for (auto& s : map) s = next[s];
    }
    return map;
  }

  [[nodiscard]] State final_state_read_order(std::uint64_t y) const noexcept {
    State s = 0;
    for (std::size_t i = 0; i < n(); ++i) s = layers_[i].next[(y >> i) & 1U][s];
    return s;
  }

  /// Text form: header plus one line per layer, states and order 1-based.
  [[nodiscard]] std::string to_text() const {
    std::ostringstream os;
    os << "robp n=" << n() << " w=" << w_ << " order=";
    for (std::size_t i = 0; i < n(); ++i) os << (i ? "," : "") << order_[i] + 1;
    os << '\n';
    for (const auto& l : layers_) {
      for (int b = 0; b < 2; ++b) {
        if (b) os << " | ";
        for (std::size_t s = 0; s < w_; ++s) os << (s ? "," : "") << l.next[b][s] + 1;
      }
      os << '\n';
    }
    return os.str();
  }

  /// Reads every program in a stream. Blank lines and '#' comments are skipped.
  static std::vector<BranchingProgram> parse_all(std::istream& in) {
    std::vector<BranchingProgram> out;
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
      while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        return true;
      }
      return false;
    };
    auto fail = [&](const std::string& what) {
      throw parse_error("robp line " + std::to_string(lineno) + ": " + what);
    };
    auto parse_list = [&](const std::string& text) {
      std::vector<std::size_t> v;
      std::istringstream is(text);
      for (std::string tok; std::getline(is, tok, ',');) {
        const auto a = tok.find_first_not_of(" \t\r");
        if (a == std::string::npos) fail("empty list entry");
        const auto b = tok.find_last_not_of(" \t\r");
        const std::string t = tok.substr(a, b - a + 1);
        if (t.find_first_not_of("0123456789") != std::string::npos) fail("bad number '" + t + "'");
        const auto value = std::stoul(t);
        if (value == 0) fail("states and positions are 1-based");
        v.push_back(value - 1);
      }
      return v;
    };
    while (next_line()) {
      std::istringstream hs(line);
      std::string tag;
      hs >> tag;
      if (tag != "robp") fail("expected 'robp' header");
      std::size_t n = 0;
      std::size_t w = 0;
      bool have_n = false;
      bool have_w = false;
      Permutation order;
      for (std::string tok; hs >> tok;) {
        if (tok.rfind("n=", 0) == 0) {
          n = std::stoul(tok.substr(2));
          have_n = true;
        } else if (tok.rfind("w=", 0) == 0) {
          w = std::stoul(tok.substr(2));
          have_w = true;
        } else if (tok.rfind("order=", 0) == 0) {
          if (tok.size() > 6) order = parse_list(tok.substr(6));
        } else {
          fail("unknown header field '" + tok + "'");
        }
      }
      if (!have_n || !have_w) fail("header needs n= and w=");
      if (order.empty()) order = identity_permutation(n);
      std::vector<Layer> layers(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!next_line()) fail("missing layer " + std::to_string(i + 1));
        const auto bar = line.find('|');
        if (bar == std::string::npos) fail("layer line needs 'succ0 | succ1'");
        for (int b = 0; b < 2; ++b) {
          const auto list = parse_list(b == 0 ? line.substr(0, bar) : line.substr(bar + 1));
          if (list.size() != w) fail("layer row count differs from w");
          layers[i].next[b].assign(list.begin(), list.end());
        }
      }
      try {
        out.emplace_back(w, std::move(layers), std::move(order));
      } catch (const validation_error& e) {
        fail(e.what());
      }
    }
    return out;
  }

  static BranchingProgram parse(const std::string& text) {
    std::istringstream is(text);
    auto all = parse_all(is);
    if (all.size() != 1) throw parse_error("expected exactly one program, found " + std::to_string(all.size()));
    return std::move(all.front());
  }

  friend bool operator==(const BranchingProgram&, const BranchingProgram&) = default;

 private:
  void check_input(const BitVector& x) const {
    if (x.size() != n()) {
      throw dimension_error("input of length " + std::to_string(x.size()) + " for a program on " + std::to_string(n()) + " bits");
    }
  }

  std::size_t w_;
  std::vector<Layer> layers_;
  Permutation order_;
};

/// 0/1 matrix with one 1 per row at the composite successor.
inline DenseMatrix state_map_matrix(const std::vector<BranchingProgram::State>& map) {
  DenseMatrix m(map.size(), map.size());
  for (std::size_t s = 0; s < map.size(); ++s) m(s, map[s]) = 1.0;
  return m;
}

/// F(x) = prod_i A_{i, x[order[i]]}.
inline DenseMatrix product_matrix(const BranchingProgram& bp, const BitVector& x) {
  const BitVector y = bp.read_order_view(x);
  std::vector<BranchingProgram::State> map(bp.width());
  std::iota(map.begin(), map.end(), BranchingProgram::State{0});
  for (std::size_t i = 0; i < bp.n(); ++i) {
    const auto& next = bp.layer(i).next[y.get(i)];
    for (auto& s : map) s = next[s];
  }
  return state_map_matrix(map);
}

/// Entry (1,1) of the product: 1 iff the path from the start state returns to it.
inline int evaluate(const BranchingProgram& bp, const BitVector& x) {
  const BitVector y = bp.read_order_view(x);
  BranchingProgram::State s = 0;
  for (std::size_t i = 0; i < bp.n(); ++i) s = bp.layer(i).next[y.get(i)][s];
  return s == 0 ? 1 : 0;
}

/// E_U F(U) as the product of per-layer averaged transitions.
inline DenseMatrix uniform_expectation(const BranchingProgram& bp) {
  DenseMatrix acc = DenseMatrix::identity(bp.width());
  for (std::size_t i = 0; i < bp.n(); ++i) acc = acc * bp.averaged_transition(i);
  return acc;
}

/// Prefix holds layers 1..i, suffix layers i+1..n. Both read their inputs in
/// the parent's read order, so F(x) = prefix(y_{1..i}) * suffix(y_{i+1..n}).
inline std::pair<BranchingProgram, BranchingProgram> split(const BranchingProgram& bp, std::size_t i) {
  if (i > bp.n()) throw validation_error("split index " + std::to_string(i) + " beyond n=" + std::to_string(bp.n()));
  const auto& ls = bp.layers();
  std::vector<BranchingProgram::Layer> pre(ls.begin(), ls.begin() + static_cast<std::ptrdiff_t>(i));
  std::vector<BranchingProgram::Layer> suf(ls.begin() + static_cast<std::ptrdiff_t>(i), ls.end());
  return {BranchingProgram(bp.width(), std::move(pre), identity_permutation(i)),
          BranchingProgram(bp.width(), std::move(suf), identity_permutation(bp.n() - i))};
}

/// Program computing x -> evaluate(bp, x o sigma), where (x o sigma)_j = x_{sigma(j)}.
/// Layers are untouched; only the read order composes.
inline BranchingProgram permute_order(const BranchingProgram& bp, const Permutation& sigma) {
  validate_permutation(sigma, bp.n());
  Permutation order(bp.n());
  for (std::size_t i = 0; i < bp.n(); ++i) order[i] = sigma[bp.order()[i]];
  return {bp.width(), bp.layers(), std::move(order)};
}

/// Every row of every transition picks an independent uniform successor.
/// Identity read order. Deterministic in rng_seed.
inline BranchingProgram random_program(std::size_t n, std::size_t w, std::uint64_t rng_seed) {
  if (w < 1) throw validation_error("random_program: width must be >= 1");
  std::mt19937_64 rng(rng_seed);
  std::vector<BranchingProgram::Layer> layers(n);
  for (auto& l : layers) {
    for (auto& next : l.next) {
      next.resize(w);
      for (auto& s : next) s = static_cast<BranchingProgram::State>(rng() % w);
    }
  }
  return {w, std::move(layers), identity_permutation(n)};
}

}  // namespace bipn
