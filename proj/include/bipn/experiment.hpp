#pragma once

// Experiment configuration, the row-parallel runner and CSV/JSON reports.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bipn/errors.hpp"
#include "bipn/formula.hpp"
#include "bipn/fourier.hpp"
#include "bipn/generator.hpp"
#include "bipn/harness.hpp"
#include "bipn/robp.hpp"

namespace bipn {

using json = nlohmann::json;

struct ProgramSource {
  enum class Kind { random, file, formula_file };
  Kind kind = Kind::random;
  std::size_t n = 8;
  std::size_t w = 2;
  std::size_t count = 1;
  std::uint64_t rng_seed = 1;
  std::string path;
};

struct OrderPolicy {
  enum class Kind { identity, all, sampled };
  Kind kind = Kind::identity;
  std::size_t count = 0;
  std::uint64_t rng_seed = 0;
};

struct MeasurementMode {
  enum class Kind { exact_dp, exact_seeds, sampled };
  Kind kind = Kind::exact_dp;
  std::size_t samples = 0;
  std::uint64_t rng_seed = 0;
};

/// Either derived from (n, w[, epsilon]) or fixed by explicit overrides.
struct GeneratorChoice {
  GeneratorVariant variant = GeneratorVariant::exact;
  std::optional<unsigned> k;
  std::optional<unsigned> r;
  std::optional<double> delta;
  std::optional<double> gamma;
  std::optional<double> epsilon;

  [[nodiscard]] bool overridden() const { return k.has_value() || r.has_value(); }

  [[nodiscard]] GeneratorSpec resolve(std::size_t n, std::size_t w, MassBoundConfig mass) const {
    if (variant == GeneratorVariant::exact) {
      if (!overridden()) return GeneratorSpec::derived_exact(n, w);
      if (!k || !r) throw validation_error("exact overrides need both k and r");
      return GeneratorSpec::exact(n, w, *k, *r);
    }
    if (!overridden()) {
      if (!epsilon) throw validation_error("derived star parameters need epsilon");
      return GeneratorSpec::derived_star(n, w, *epsilon, mass);
    }
    if (!k || !r || !delta || !gamma) throw validation_error("star overrides need k, r, delta and gamma");
    return GeneratorSpec::star(n, w, *k, *r, *delta, *gamma);
  }
};

struct ExperimentConfig {
  ProgramSource programs;
  OrderPolicy orders;
  GeneratorChoice generator;
  MeasurementMode mode;
  MassBoundConfig mass;
  std::string out;
  unsigned jobs = 1;

  void validate() const {
    if (orders.kind == OrderPolicy::Kind::sampled && orders.count == 0) {
      throw validation_error("sampled orders need a positive count");
    }
    if (mode.kind == MeasurementMode::Kind::sampled && mode.samples < 2) {
      throw validation_error("sampled mode needs samples >= 2");
    }
    if (programs.kind != ProgramSource::Kind::random && programs.path.empty()) {
      throw validation_error("file program sources need a path");
    }
    if (jobs == 0) throw validation_error("jobs must be positive");
  }

  static ExperimentConfig from_json(const json& j);
  [[nodiscard]] json to_json() const;
};

// -------------------------------------------------------------- json

namespace detail {

template <class E>
E enum_from(const json& j, const char* key, const std::map<std::string, E>& names, E fallback) {
  if (!j.contains(key)) return fallback;
  const auto s = j.at(key).get<std::string>();
  const auto it = names.find(s);
  if (it == names.end()) throw parse_error(std::string("config: unknown ") + key + " '" + s + "'");
  return it->second;
}

template <class E>
std::string enum_name(E v, const std::map<std::string, E>& names) {
  for (const auto& [k, e] : names) {
    if (e == v) return k;
  }
  return "?";
}

inline const std::map<std::string, ProgramSource::Kind> program_kinds = {
    {"random", ProgramSource::Kind::random},
    {"file", ProgramSource::Kind::file},
    {"formula_file", ProgramSource::Kind::formula_file}};
inline const std::map<std::string, OrderPolicy::Kind> order_kinds = {
    {"identity", OrderPolicy::Kind::identity}, {"all", OrderPolicy::Kind::all}, {"sampled", OrderPolicy::Kind::sampled}};
inline const std::map<std::string, MeasurementMode::Kind> mode_kinds = {{"exact_dp", MeasurementMode::Kind::exact_dp},
                                                                         {"exact_seeds", MeasurementMode::Kind::exact_seeds},
                                                                         {"sampled", MeasurementMode::Kind::sampled}};
inline const std::map<std::string, GeneratorVariant> variant_names = {{"exact", GeneratorVariant::exact},
                                                                       {"star", GeneratorVariant::star}};
inline const std::map<std::string, MassBoundMode> mass_modes = {{"trivial", MassBoundMode::trivial},
                                                                 {"chrt", MassBoundMode::chrt}};

template <class T>
std::optional<T> opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("programs")) {
      const auto& p = j.at("programs");
      c.programs.kind = detail::enum_from(p, "kind", detail::program_kinds, ProgramSource::Kind::random);
      c.programs.n = p.value("n", c.programs.n);
      c.programs.w = p.value("w", c.programs.w);
      c.programs.count = p.value("count", c.programs.count);
      c.programs.rng_seed = p.value("rng_seed", c.programs.rng_seed);
      c.programs.path = p.value("path", std::string());
    }
    if (j.contains("orders")) {
      const auto& o = j.at("orders");
      c.orders.kind = detail::enum_from(o, "kind", detail::order_kinds, OrderPolicy::Kind::identity);
      c.orders.count = o.value("count", std::size_t{0});
      if (c.orders.kind == OrderPolicy::Kind::sampled && !o.contains("rng_seed")) {
        throw validation_error("sampled orders need an explicit rng_seed");
      }
      c.orders.rng_seed = o.value("rng_seed", std::uint64_t{0});
    }
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      c.generator.variant = detail::enum_from(g, "variant", detail::variant_names, GeneratorVariant::exact);
      c.generator.k = detail::opt<unsigned>(g, "k");
      c.generator.r = detail::opt<unsigned>(g, "r");
      c.generator.delta = detail::opt<double>(g, "delta");
      c.generator.gamma = detail::opt<double>(g, "gamma");
      c.generator.epsilon = detail::opt<double>(g, "epsilon");
    }
    if (j.contains("mode")) {
      const auto& m = j.at("mode");
      c.mode.kind = detail::enum_from(m, "kind", detail::mode_kinds, MeasurementMode::Kind::exact_dp);
      c.mode.samples = m.value("samples", std::size_t{0});
      if (c.mode.kind == MeasurementMode::Kind::sampled && !m.contains("rng_seed")) {
        throw validation_error("sampled mode needs an explicit rng_seed");
      }
      c.mode.rng_seed = m.value("rng_seed", std::uint64_t{0});
    }
    if (j.contains("mass_bound")) {
      const auto& m = j.at("mass_bound");
      c.mass.mode = detail::enum_from(m, "mode", detail::mass_modes, MassBoundMode::trivial);
      c.mass.chrt_constant = m.value("c", c.mass.chrt_constant);
    }
    c.out = j.value("out", std::string());
    c.jobs = j.value("jobs", 1U);
  } catch (const json::exception& e) {
    throw parse_error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json ExperimentConfig::to_json() const {
  json j;
  json p = {{"kind", detail::enum_name(programs.kind, detail::program_kinds)}};
  if (programs.kind == ProgramSource::Kind::random) {
    p["n"] = programs.n;
    p["w"] = programs.w;
    p["count"] = programs.count;
    p["rng_seed"] = programs.rng_seed;
  } else {
    p["path"] = programs.path;
  }
  j["programs"] = p;
  json o = {{"kind", detail::enum_name(orders.kind, detail::order_kinds)}};
  if (orders.kind == OrderPolicy::Kind::sampled) {
    o["count"] = orders.count;
    o["rng_seed"] = orders.rng_seed;
  }
  j["orders"] = o;
  json g = {{"variant", to_string(generator.variant)}};
  if (generator.k) g["k"] = *generator.k;
  if (generator.r) g["r"] = *generator.r;
  if (generator.delta) g["delta"] = *generator.delta;
  if (generator.gamma) g["gamma"] = *generator.gamma;
  if (generator.epsilon) g["epsilon"] = *generator.epsilon;
  j["generator"] = g;
  json m = {{"kind", detail::enum_name(mode.kind, detail::mode_kinds)}};
  if (mode.kind == MeasurementMode::Kind::sampled) {
    m["samples"] = mode.samples;
    m["rng_seed"] = mode.rng_seed;
  }
  j["mode"] = m;
  j["mass_bound"] = {{"mode", detail::enum_name(mass.mode, detail::mass_modes)}, {"c", mass.chrt_constant}};
  // out and jobs do not change results and are left out of the hash
  return j;
}

/// 64-bit FNV-1a of the canonical (key-sorted, compact) config echo.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : c.to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// ------------------------------------------------------------ rows

struct ReportRow {
  std::size_t row = 0;
  std::size_t program = 0;
  std::string order;  // 1-based read order joined by '-'
  std::string spec;
  std::string variant;
  std::string params_mode;  // derived | override
  std::string mode;
  std::string mass_mode;
  std::size_t seed_bits = 0;
  double frobenius_error = 0.0;
  double scalar_error = 0.0;
  double bound = 0.0;
  bool vacuous = false;
  double half_width = 0.0;
  std::string status;  // pass | fail | skipped
  std::string note;
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "row",   "program",         "order",        "spec",  "variant", "params_mode", "mode",   "mass_mode",
      "seed_bits", "frobenius_error", "scalar_error", "bound", "vacuous", "half_width",  "status", "note",
      "config_hash"};
  return cols;
}

struct ErrorReport {
  std::vector<ReportRow> rows;
  std::string config_hash;
  json config;

  [[nodiscard]] bool all_passed() const {
    return std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.status == "fail"; });
  }
  [[nodiscard]] std::size_t count(const std::string& status) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.status == status; }));
  }

  [[nodiscard]] std::string to_csv() const {
    std::ostringstream os;
    const auto& cols = report_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    auto quote = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char c : s) {
        if (c == '"') q += '"';
        q += c;
      }
      return q + "\"";
    };
    for (const auto& r : rows) {
      os << r.row << ',' << r.program << ',' << r.order << ',' << quote(r.spec) << ',' << r.variant << ','
         << r.params_mode << ',' << r.mode << ',' << r.mass_mode << ',' << r.seed_bits << ','
         << detail::format_real(r.frobenius_error) << ',' << detail::format_real(r.scalar_error) << ','
         << detail::format_real(r.bound) << ',' << (r.vacuous ? "true" : "false") << ','
         << detail::format_real(r.half_width) << ',' << r.status << ',' << quote(r.note) << ',' << config_hash << '\n';
    }
    return os.str();
  }

  [[nodiscard]] json sidecar() const {
    double max_err = 0.0;
    for (const auto& r : rows) {
      if (r.status != "skipped") max_err = std::max(max_err, r.frobenius_error);
    }
    return {{"config", config},
            {"config_hash", config_hash},
            {"columns", report_columns()},
            {"rows", rows.size()},
            {"passed", count("pass")},
            {"failed", count("fail")},
            {"skipped", count("skipped")},
            {"max_frobenius_error", max_err},
            {"all_passed", all_passed()}};
  }

  /// Writes `path` (CSV) and `path + ".json"`.
  void write(const std::string& path) const {
    std::ofstream csv(path);
    if (!csv) throw std::runtime_error("cannot open '" + path + "' for writing");
    csv << to_csv();
    std::ofstream side(path + ".json");
    if (!side) throw std::runtime_error("cannot open '" + path + ".json' for writing");
    side << sidecar().dump(2) << '\n';
  }
};

// ---------------------------------------------------------- runner

inline std::string format_order(const Permutation& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "-" : "") + std::to_string(p[i] + 1);
  return s;
}

inline std::vector<BranchingProgram> load_programs(const ProgramSource& src) {
  std::vector<BranchingProgram> out;
  switch (src.kind) {
    case ProgramSource::Kind::random:
      for (std::size_t i = 0; i < src.count; ++i) out.push_back(random_program(src.n, src.w, src.rng_seed + i));
      break;
    case ProgramSource::Kind::file: {
      std::ifstream in(src.path);
      if (!in) throw std::runtime_error("cannot open program file '" + src.path + "'");
      out = BranchingProgram::parse_all(in);
      break;
    }
    case ProgramSource::Kind::formula_file: {
      std::ifstream in(src.path);
      if (!in) throw std::runtime_error("cannot open formula file '" + src.path + "'");
      std::string line;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        out.push_back(compile_formula(ReadOnceFormula::parse(line)));
      }
      break;
    }
  }
  return out;
}

/// Read orders to test for a program on n bits.
inline std::vector<Permutation> select_orders(const OrderPolicy& policy, std::size_t n) {
  std::vector<Permutation> out;
  switch (policy.kind) {
    case OrderPolicy::Kind::identity:
      out.push_back(identity_permutation(n));
      break;
    case OrderPolicy::Kind::all: {
      if (n > 7) throw validation_error("all permutations limited to n <= 7");
      Permutation p = identity_permutation(n);
      do out.push_back(p);
      while (std::next_permutation(p.begin(), p.end()));
      break;
    }
    case OrderPolicy::Kind::sampled: {
      std::mt19937_64 rng(policy.rng_seed);
      for (std::size_t i = 0; i < policy.count; ++i) out.push_back(random_permutation(n, rng));
      break;
    }
  }
  return out;
}

/// Composite bound for the active variant: the full recursion inequality.
inline double recursion_bound(const GeneratorSpec& spec, MassBoundConfig mass) {
  if (spec.variant() == GeneratorVariant::exact) return recursion_bound_exact(spec.n(), spec.w(), spec.k(), spec.r());
  const MassBound l = mass_bound(spec.n(), spec.w(), spec.k(), mass);
  if (l.overflow) return std::numeric_limits<double>::infinity();
  return recursion_bound_star(spec.n(), spec.w(), spec.k(), spec.r(), spec.delta(), spec.gamma(), l.value);
}

namespace detail {

/// Output laws are shared across rows with the same spec.
class DistributionCache {
 public:
  std::shared_ptr<const ExactDistribution> get(const GeneratorSpec& spec, MeasurementMode::Kind mode) {
    const std::string key = spec.to_string() + (mode == MeasurementMode::Kind::exact_seeds ? "#seeds" : "#dp");
    std::shared_ptr<Slot> slot;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto& s = slots_[key];
      if (!s) s = std::make_shared<Slot>();
      slot = s;
    }
    std::call_once(slot->once, [&] {
      try {
        slot->dist = std::make_shared<const ExactDistribution>(mode == MeasurementMode::Kind::exact_seeds
                                                                   ? enumerate_output_distribution(spec)
                                                                   : exact_output_distribution(spec));
      } catch (const budget_error& e) {
        slot->refusal = e.what();
      }
    });
    if (!slot->dist) throw budget_error(slot->refusal);
    return slot->dist;
  }

 private:
  struct Slot {
    std::once_flag once;
    std::shared_ptr<const ExactDistribution> dist;
    std::string refusal;
  };
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace detail

inline ErrorReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ErrorReport report;
  report.config = config.to_json();
  report.config_hash = config_hash(config);

  struct Item {
    std::size_t program;
    Permutation order;
  };
  const auto programs = load_programs(config.programs);
  std::vector<Item> items;
  for (std::size_t p = 0; p < programs.size(); ++p) {
    for (auto& o : select_orders(config.orders, programs[p].n())) items.push_back({p, std::move(o)});
  }
  report.rows.resize(items.size());

  detail::DistributionCache cache;
  const std::string mode_name = detail::enum_name(config.mode.kind, detail::mode_kinds);
  const std::string mass_name = detail::enum_name(config.mass.mode, detail::mass_modes);

  auto run_row = [&](std::size_t idx) {
    const Item& item = items[idx];
    const BranchingProgram bp = permute_order(programs[item.program], item.order);
    ReportRow row;
    row.row = idx;
    row.program = item.program;
    row.order = format_order(bp.order());
    row.mode = mode_name;
    row.mass_mode = mass_name;
    row.variant = to_string(config.generator.variant);
    row.params_mode = config.generator.overridden() ? "override" : "derived";
    try {
      const GeneratorSpec spec = config.generator.resolve(bp.n(), bp.width(), config.mass);
      row.spec = spec.to_string();
      row.seed_bits = spec.seed_bits();
      row.bound = recursion_bound(spec, config.mass);
      row.vacuous = bound_is_vacuous(row.bound, bp.width());
      bool ok = false;
      if (config.mode.kind == MeasurementMode::Kind::sampled) {
        const auto s = sampled_fooling_error(bp, spec, config.mode.samples, config.mode.rng_seed + idx);
        row.frobenius_error = s.estimate;
        row.scalar_error = s.scalar_estimate;
        row.half_width = s.half_width;
        ok = s.estimate - s.half_width <= row.bound;
      } else {
        const auto e = fooling_error(bp, *cache.get(spec, config.mode.kind));
        row.frobenius_error = e.frobenius;
        row.scalar_error = e.scalar;
        ok = e.frobenius <= row.bound + 1e-9 && e.scalar <= e.frobenius + 1e-12;
      }
      row.status = ok ? "pass" : "fail";
    } catch (const budget_error& e) {
      row.status = "skipped";
      row.note = e.what();
    }
    report.rows[idx] = std::move(row);
  };

  const unsigned jobs = std::max(1U, std::min<unsigned>(config.jobs, static_cast<unsigned>(items.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t idx = next++; idx < items.size(); idx = next++) {
      try {
        run_row(idx);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  if (!config.out.empty()) report.write(config.out);
  return report;
}

}  // namespace bipn
