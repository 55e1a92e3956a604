#pragma once

// Read-once formulas over {AND, OR, NOT} with fan-in at most two, and their
// compilation into read-once branching programs.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bipn/bitvector.hpp"
#include "bipn/errors.hpp"
#include "bipn/robp.hpp"

namespace bipn {

class ReadOnceFormula {
 public:
  enum class Gate { var, negation, conjunction, disjunction };

  /// Variable x_i, 1-based.
  static ReadOnceFormula var(std::size_t i) {
    if (i < 1) throw validation_error("formula variables are 1-based");
    auto node = std::make_shared<Node>();
    node->gate = Gate::var;
    node->index = i;
    return ReadOnceFormula(std::move(node));
  }

  static ReadOnceFormula negate(const ReadOnceFormula& a) { return unary(Gate::negation, a); }
  static ReadOnceFormula conj(const ReadOnceFormula& a, const ReadOnceFormula& b) { return binary(Gate::conjunction, a, b); }
  static ReadOnceFormula disj(const ReadOnceFormula& a, const ReadOnceFormula& b) { return binary(Gate::disjunction, a, b); }

  [[nodiscard]] Gate gate() const noexcept { return root_->gate; }
  [[nodiscard]] std::size_t index() const noexcept { return root_->index; }
  [[nodiscard]] ReadOnceFormula left() const { return ReadOnceFormula(root_->left); }
  [[nodiscard]] ReadOnceFormula right() const { return ReadOnceFormula(root_->right); }

  /// Variable indices in left-to-right leaf order.
  [[nodiscard]] std::vector<std::size_t> variables() const {
    std::vector<std::size_t> out;
    collect(*root_, out);
    return out;
  }

  /// Largest variable index; the formula is a function on that many bits.
  [[nodiscard]] std::size_t num_vars() const {
    const auto v = variables();
    return *std::max_element(v.begin(), v.end());
  }

  /// Gate depth; a lone variable has depth 0.
  [[nodiscard]] std::size_t depth() const noexcept { return depth_of(*root_); }

  [[nodiscard]] bool is_read_once() const {
    auto v = variables();
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  }

  void validate() const {
    if (!is_read_once()) throw validation_error("formula reads some variable more than once: " + to_string());
  }

  /// x has at least num_vars() bits; bit i-1 is variable i.
  [[nodiscard]] bool evaluate(const BitVector& x) const {
    if (x.size() < num_vars()) throw dimension_error("formula input shorter than its variable range");
    return eval(*root_, x);
  }

  /// Text form: x<i>, NOT(f), AND(f,g), OR(f,g).
  [[nodiscard]] std::string to_string() const { return render(*root_); }

  static ReadOnceFormula parse(const std::string& text) {
    std::size_t pos = 0;
    auto f = parse_expr(text, pos);
    skip_space(text, pos);
    if (pos != text.size()) throw parse_error("formula: trailing text at offset " + std::to_string(pos));
    return f;
  }

 private:
  struct Node {
    Gate gate = Gate::var;
    std::size_t index = 0;
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;
  };

  explicit ReadOnceFormula(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  static ReadOnceFormula unary(Gate g, const ReadOnceFormula& a) {
    auto node = std::make_shared<Node>();
    node->gate = g;
    node->left = a.root_;
    return ReadOnceFormula(std::move(node));
  }

  static ReadOnceFormula binary(Gate g, const ReadOnceFormula& a, const ReadOnceFormula& b) {
    auto node = std::make_shared<Node>();
    node->gate = g;
    node->left = a.root_;
    node->right = b.root_;
    return ReadOnceFormula(std::move(node));
  }

  static void collect(const Node& n, std::vector<std::size_t>& out) {
    if (n.gate == Gate::var) {
      out.push_back(n.index);
      return;
    }
    collect(*n.left, out);
    if (n.right) collect(*n.right, out);
  }

  static std::size_t depth_of(const Node& n) noexcept {
    if (n.gate == Gate::var) return 0;
    std::size_t d = depth_of(*n.left);
    if (n.right) d = std::max(d, depth_of(*n.right));
    return d + 1;
  }

  static bool eval(const Node& n, const BitVector& x) {
    switch (n.gate) {
      case Gate::var:
        return x.get(n.index - 1);
      case Gate::negation:
        return !eval(*n.left, x);
      case Gate::conjunction:
        return eval(*n.left, x) && eval(*n.right, x);
      case Gate::disjunction:
        return eval(*n.left, x) || eval(*n.right, x);
    }
    return false;
  }

  static std::string render(const Node& n) {
    switch (n.gate) {
      case Gate::var:
        return "x" + std::to_string(n.index);
      case Gate::negation:
        return "NOT(" + render(*n.left) + ")";
      case Gate::conjunction:
        return "AND(" + render(*n.left) + "," + render(*n.right) + ")";
      case Gate::disjunction:
        return "OR(" + render(*n.left) + "," + render(*n.right) + ")";
    }
    return {};
  }

  static void skip_space(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  static void expect(const std::string& s, std::size_t& pos, char c) {
    skip_space(s, pos);
    if (pos >= s.size() || s[pos] != c) {
      throw parse_error(std::string("formula: expected '") + c + "' at offset " + std::to_string(pos));
    }
    ++pos;
  }

  static ReadOnceFormula parse_expr(const std::string& s, std::size_t& pos) {
    skip_space(s, pos);
    std::size_t start = pos;
    while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
    std::string word = s.substr(start, pos - start);
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::toupper(c); });
    if (word.size() > 1 && word[0] == 'X' && std::all_of(word.begin() + 1, word.end(), ::isdigit)) {
      const auto index = std::stoul(word.substr(1));
      if (index == 0) throw parse_error("formula: variables are 1-based, got '" + word + "'");
      return var(index);
    }
    if (word == "NOT") {
      expect(s, pos, '(');
      auto a = parse_expr(s, pos);
      expect(s, pos, ')');
      return negate(a);
    }
    if (word == "AND" || word == "OR") {
      expect(s, pos, '(');
      auto a = parse_expr(s, pos);
      expect(s, pos, ',');
      auto b = parse_expr(s, pos);
      expect(s, pos, ')');
      return word == "AND" ? conj(a, b) : disj(a, b);
    }
    throw parse_error("formula: unexpected token '" + word + "' at offset " + std::to_string(start));
  }

  std::shared_ptr<const Node> root_;

  friend BranchingProgram compile_formula(const ReadOnceFormula& phi);
};

/// Compiles phi into a program that reads the leaves left to right.
///
/// States between layers are continuation labels: "evaluating the next leaf",
/// "resume at leaf q" for a later leaf q, or a final verdict. AND short-cuts a
/// false left child straight to its own false exit, OR a true one to its true
/// exit. The width is the largest label set on any layer boundary and stays
/// within depth + 2. Variables in 1..num_vars() that phi never reads get
/// identity layers at the end.
inline BranchingProgram compile_formula(const ReadOnceFormula& phi) {
  using Node = ReadOnceFormula::Node;
  using Gate = ReadOnceFormula::Gate;
  phi.validate();

  // Leaves in order, with parent links for exit resolution.
  struct Info {
    const Node* node;
    const Node* parent;
  };
  std::vector<Info> nodes;
  std::map<const Node*, std::size_t> id;
  std::vector<const Node*> leaves;
  std::map<const Node*, std::size_t> first_leaf;
  auto walk = [&](auto&& self, const Node* n, const Node* parent) -> void {
    id[n] = nodes.size();
    nodes.push_back({n, parent});
    first_leaf[n] = leaves.size();
    if (n->gate == Gate::var) {
      leaves.push_back(n);
      return;
    }
    self(self, n->left.get(), n);
    if (n->right) self(self, n->right.get(), n);
  };
  walk(walk, phi.root_.get(), nullptr);

  // Labels: 0..m-1 resume at leaf p; m + v is the final verdict v.
  const std::size_t m = leaves.size();
  const std::size_t verdict_false = m;
  const std::size_t verdict_true = m + 1;

  auto resolve = [&](const Node* n, bool value) {
    for (;;) {
      const Node* parent = nodes[id[n]].parent;
      if (parent == nullptr) return value ? verdict_true : verdict_false;
      if (parent->gate == Gate::negation) {
        value = !value;
      } else if (n == parent->left.get()) {
        const bool shortcut = parent->gate == Gate::conjunction ? !value : value;
        if (!shortcut) return first_leaf[parent->right.get()];
      }
      n = parent;
    }
  };

  std::vector<std::size_t> exit_label[2];
  for (auto& e : exit_label) e.resize(m);
  for (std::size_t p = 0; p < m; ++p) {
    for (int b = 0; b < 2; ++b) exit_label[b][p] = resolve(leaves[p], b == 1);
  }

  // Reachable label sets at each boundary.
  std::vector<std::vector<std::size_t>> boundary(m + 1);
  boundary[0] = {0};
  for (std::size_t p = 0; p < m; ++p) {
    std::vector<std::size_t> next;
    for (std::size_t label : boundary[p]) {
      if (label == p) {
        next.push_back(exit_label[0][p]);
        next.push_back(exit_label[1][p]);
      } else {
        next.push_back(label);
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    boundary[p + 1] = std::move(next);
  }
  boundary[m] = {verdict_true, verdict_false};

  std::size_t width = 2;
  for (const auto& b : boundary) width = std::max(width, b.size());

  auto index_of = [&](std::size_t p, std::size_t label) -> BranchingProgram::State {
    const auto& b = boundary[p];
    return static_cast<BranchingProgram::State>(std::find(b.begin(), b.end(), label) - b.begin());
  };

  const std::size_t n = phi.num_vars();
  std::vector<BranchingProgram::Layer> layers;
  Permutation order;
  for (std::size_t p = 0; p < m; ++p) {
    BranchingProgram::Layer layer;
    for (int b = 0; b < 2; ++b) {
      auto& next = layer.next[b];
      next.resize(width);
      for (std::size_t s = 0; s < width; ++s) next[s] = static_cast<BranchingProgram::State>(s);
      for (std::size_t s = 0; s < boundary[p].size(); ++s) {
        const std::size_t label = boundary[p][s];
        next[s] = index_of(p + 1, label == p ? exit_label[b][p] : label);
      }
    }
    layers.push_back(std::move(layer));
    order.push_back(leaves[p]->index - 1);
  }
  std::vector<bool> read(n, false);
  for (auto v : order) read[v] = true;
  for (std::size_t v = 0; v < n; ++v) {
    if (read[v]) continue;
    BranchingProgram::Layer idle;
    idle.next[0].resize(width);
    for (std::size_t s = 0; s < width; ++s) idle.next[0][s] = static_cast<BranchingProgram::State>(s);
    idle.next[1] = idle.next[0];
    layers.push_back(std::move(idle));
    order.push_back(v);
  }
  return {width, std::move(layers), std::move(order)};
}

/// Random read-once formula on variables 1..num_vars (in shuffled leaf order)
/// with depth at most max_depth; needs num_vars <= 2^max_depth.
inline ReadOnceFormula random_formula(std::size_t num_vars, std::size_t max_depth, std::mt19937_64& rng) {
  if (num_vars < 1) throw validation_error("random_formula: need at least one variable");
  if (max_depth >= 63 || num_vars > (std::size_t{1} << max_depth)) {
    throw validation_error("random_formula: variable count does not fit the depth");
  }
  const Permutation vars = random_permutation(num_vars, rng);
  std::size_t next_var = 0;
  auto build = [&](auto&& self, std::size_t leaves, std::size_t depth) -> ReadOnceFormula {
    if (leaves == 1) {
      auto leaf = ReadOnceFormula::var(vars[next_var++] + 1);
      if (depth > 0 && rng() % 4 == 0) return ReadOnceFormula::negate(leaf);
      return leaf;
    }
    // a negation costs one level; only take it when the rest still fits
    if (depth >= 2 && leaves <= (std::size_t{1} << (depth - 2)) && rng() % 4 == 0) {
      return ReadOnceFormula::negate(self(self, leaves, depth - 1));
    }
    const std::size_t cap = std::min<std::size_t>(leaves - 1, std::size_t{1} << (depth - 1));
    const std::size_t lo = leaves - cap;
    const std::size_t left = lo + rng() % (cap - lo + 1);
    auto a = self(self, left, depth - 1);
    auto b = self(self, leaves - left, depth - 1);
    return rng() % 2 == 0 ? ReadOnceFormula::conj(a, b) : ReadOnceFormula::disj(a, b);
  };
  return build(build, num_vars, max_depth);
}

}  // namespace bipn
