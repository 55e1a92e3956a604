// Command-line driver: primitive audits, per-step and full-generator error
// measurements, decomposition checks and config-driven reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "bipn/bipn.hpp"

namespace {

using namespace bipn;

struct Common {
  std::size_t n = 8;
  std::size_t w = 2;
  unsigned k = 2;
  unsigned r = 2;
  std::optional<double> delta;
  std::optional<double> gamma;
  std::optional<double> epsilon;
  std::string variant = "exact";
  std::string orders = "identity";
  std::string mode = "exact_dp";
  std::size_t samples = 1000;
  std::uint64_t rng_seed = 1;
  std::size_t count = 1;
  std::string out;
  std::string programs;
  std::string formulas;
  std::string mass = "trivial";
  double chrt_c = 1.0;
  unsigned jobs = 1;
};

GeneratorVariant parse_variant(const std::string& s) {
  if (s == "exact") return GeneratorVariant::exact;
  if (s == "star") return GeneratorVariant::star;
  throw validation_error("unknown variant '" + s + "'");
}

MassBoundConfig mass_config(const Common& c) {
  if (c.mass != "trivial" && c.mass != "chrt") throw validation_error("unknown mass bound mode '" + c.mass + "'");
  return {c.mass == "chrt" ? MassBoundMode::chrt : MassBoundMode::trivial, c.chrt_c};
}

StepParams step_params(const Common& c) {
  if (parse_variant(c.variant) == GeneratorVariant::exact) return StepParams::exact(c.k);
  if (!c.delta || !c.gamma) throw validation_error("star steps need --delta and --gamma");
  return StepParams::star(*c.delta, *c.gamma, c.k);
}

/// "identity", "all", or "sampled:COUNT" (seeded by --rng-seed).
OrderPolicy parse_orders(const std::string& s, std::uint64_t seed) {
  if (s == "identity") return {OrderPolicy::Kind::identity, 0, 0};
  if (s == "all") return {OrderPolicy::Kind::all, 0, 0};
  if (s.rfind("sampled:", 0) == 0) return {OrderPolicy::Kind::sampled, std::stoul(s.substr(8)), seed};
  throw validation_error("--orders must be identity, all or sampled:COUNT");
}

int emit(const ErrorReport& report) {
  std::cout << report.to_csv();
  std::cerr << report.count("pass") << " pass, " << report.count("fail") << " fail, " << report.count("skipped")
            << " skipped\n";
  return report.all_passed() ? 0 : 1;
}

int cmd_audit(const Common& c, const std::vector<unsigned>& ks, const std::vector<double>& deltas) {
  bool ok = true;
  std::printf("kind,n,param,seed_bits,measured,limit,status\n");
  for (unsigned k : ks) {
    const auto d = DistributionDescriptor::kwise(c.n, k);
    const double dev = audit_kwise(d, k);
    ok = ok && dev == 0.0;
    std::printf("kwise,%zu,k=%u,%zu,%.17g,0,%s\n", c.n, k, d.seed_bits(), dev, dev == 0.0 ? "pass" : "fail");
  }
  for (double delta : deltas) {
    const auto d = DistributionDescriptor::small_bias(c.n, delta);
    const double b = max_bias(d);
    ok = ok && b <= delta;
    std::printf("small_bias,%zu,delta=%.17g,%zu,%.17g,%.17g,%s\n", c.n, delta, d.seed_bits(), b, delta,
                b <= delta ? "pass" : "fail");
  }
  return ok ? 0 : 1;
}

int cmd_single_step(const Common& c) {
  const StepParams params = step_params(c);
  const MassBoundConfig mass = mass_config(c);
  bool ok = true;
  double worst = 0.0;
  std::printf("program,error,bound,status\n");
  for (std::size_t p = 0; p < c.count; ++p) {
    const auto bp = random_program(c.n, c.w, c.rng_seed + p);
    const auto res = single_step_error(bp, params, mass);
    const bool pass = res.error <= res.bound + 1e-9;
    ok = ok && pass;
    worst = std::max(worst, res.error);
    std::printf("%zu,%.17g,%.17g,%s\n", p, res.error, res.bound, pass ? "pass" : "fail");
  }
  std::fprintf(stderr, "max error %.6g\n", worst);
  return ok ? 0 : 1;
}

int cmd_fool(const Common& c) {
  ExperimentConfig cfg;
  if (!c.programs.empty()) {
    cfg.programs = {ProgramSource::Kind::file, 0, 0, 0, 0, c.programs};
  } else if (!c.formulas.empty()) {
    cfg.programs = {ProgramSource::Kind::formula_file, 0, 0, 0, 0, c.formulas};
  } else {
    cfg.programs = {ProgramSource::Kind::random, c.n, c.w, c.count, c.rng_seed, {}};
  }
  cfg.orders = parse_orders(c.orders, c.rng_seed);
  cfg.generator.variant = parse_variant(c.variant);
  cfg.generator.k = c.k;
  cfg.generator.r = c.r;
  cfg.generator.delta = c.delta;
  cfg.generator.gamma = c.gamma;
  cfg.generator.epsilon = c.epsilon;
  if (c.mode == "exact_dp") {
    cfg.mode = {MeasurementMode::Kind::exact_dp, 0, 0};
  } else if (c.mode == "exact_seeds") {
    cfg.mode = {MeasurementMode::Kind::exact_seeds, 0, 0};
  } else if (c.mode == "sampled") {
    cfg.mode = {MeasurementMode::Kind::sampled, c.samples, c.rng_seed};
  } else {
    throw validation_error("--mode must be exact_dp, exact_seeds or sampled");
  }
  cfg.mass = mass_config(c);
  cfg.out = c.out;
  cfg.jobs = c.jobs;
  return emit(run_experiment(cfg));
}

int cmd_prop1(const Common& c) {
  bool ok = true;
  std::printf("program,k,terms,max_abs_error,status\n");
  for (std::size_t p = 0; p < c.count; ++p) {
    const auto bp = random_program(c.n, c.w, c.rng_seed + p);
    for (std::size_t k = 1; k <= c.n; ++k) {
      const auto d = decompose_prop1(bp, k);
      const double err = prop1_reconstruction_error(bp, d);
      const bool pass = err <= 1e-9;
      ok = ok && pass;
      std::printf("%zu,%zu,%zu,%.3g,%s\n", p, k, d.high.size(), err, pass ? "pass" : "fail");
    }
  }
  return ok ? 0 : 1;
}

int cmd_lemma(const Common& c) {
  const StepParams params = step_params(c);
  bool ok = true;
  std::printf("program,i,lhs,rhs,status\n");
  for (std::size_t p = 0; p < c.count; ++p) {
    const auto bp = random_program(c.n, c.w, c.rng_seed + p);
    for (const auto& term : decompose_prop1(bp, c.k).high) {
      const auto res = lemma_h_bound_check(term.h, params);
      const bool pass = res.lhs <= res.rhs + 1e-9;
      ok = ok && pass;
      std::printf("%zu,%zu,%.17g,%.17g,%s\n", p, term.i, res.lhs, res.rhs, pass ? "pass" : "fail");
    }
  }
  return ok ? 0 : 1;
}

int cmd_report(const std::string& path, const std::string& out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw parse_error(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  if (!out.empty()) cfg.out = out;
  return emit(run_experiment(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounded-independence-plus-noise generators for read-once branching programs"};
  app.require_subcommand(1);
  Common c;

  auto add_shape = [&](CLI::App* sub) {
    sub->add_option("--n", c.n, "input length")->capture_default_str();
    sub->add_option("--w", c.w, "program width")->capture_default_str();
    sub->add_option("--k", c.k, "independence parameter")->capture_default_str();
    sub->add_option("--rng-seed", c.rng_seed, "seed for programs, orders and sampling")->capture_default_str();
    sub->add_option("--count", c.count, "number of random programs")->capture_default_str();
  };
  auto add_star = [&](CLI::App* sub) {
    sub->add_option("--variant", c.variant, "exact or star")->capture_default_str();
    sub->add_option("--delta", c.delta, "bias of D (star)");
    sub->add_option("--gamma", c.gamma, "closeness of T to k-wise (star)");
    sub->add_option("--mass-bound", c.mass, "trivial or chrt")->capture_default_str();
    sub->add_option("--chrt-c", c.chrt_c, "constant for the chrt mass bound")->capture_default_str();
  };

  std::vector<unsigned> audit_ks = {1, 2, 3, 4};
  std::vector<double> audit_deltas = {0.5, 0.25, 0.125};
  auto* audit = app.add_subcommand("audit-primitives", "exhaustive k-wise and bias audits");
  audit->add_option("--n", c.n, "input length")->capture_default_str();
  audit->add_option("--k", audit_ks, "k values to audit")->capture_default_str();
  audit->add_option("--delta", audit_deltas, "bias targets")->capture_default_str();

  auto* single = app.add_subcommand("single-step", "exact error of D + T and U");
  add_shape(single);
  add_star(single);

  auto* fool = app.add_subcommand("fool", "fooling error of the full generator");
  add_shape(fool);
  add_star(fool);
  fool->add_option("--r", c.r, "recursion depth")->capture_default_str();
  fool->add_option("--epsilon", c.epsilon, "target error (unused with explicit k, r)");
  fool->add_option("--orders", c.orders, "identity, all or sampled:COUNT")->capture_default_str();
  fool->add_option("--mode", c.mode, "exact_dp, exact_seeds or sampled")->capture_default_str();
  fool->add_option("--samples", c.samples, "seeds per program in sampled mode")->capture_default_str();
  fool->add_option("--programs", c.programs, "file of programs in text form");
  fool->add_option("--formulas", c.formulas, "file of read-once formulas, one per line");
  fool->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
  fool->add_option("--out", c.out, "CSV path; a JSON sidecar is written next to it");

  auto* prop1 = app.add_subcommand("prop1-check", "pointwise check of the high/low decomposition");
  add_shape(prop1);

  auto* lemma = app.add_subcommand("lemma-check", "degree-k step inequality on extracted terms");
  add_shape(lemma);
  add_star(lemma);

  std::string config_path;
  std::string report_out;
  auto* report = app.add_subcommand("report", "run an experiment described by a JSON config");
  report->add_option("config", config_path, "config file")->required();
  report->add_option("--out", report_out, "CSV path overriding the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (audit->parsed()) return cmd_audit(c, audit_ks, audit_deltas);
    if (single->parsed()) return cmd_single_step(c);
    if (fool->parsed()) return cmd_fool(c);
    if (prop1->parsed()) return cmd_prop1(c);
    if (lemma->parsed()) return cmd_lemma(c);
    if (report->parsed()) return cmd_report(config_path, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
