#include "fkprop/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fkprop/auditor.hpp"
#include "fkprop/inequalities.hpp"
#include "fkprop/io.hpp"
#include "fkprop/montecarlo.hpp"
#include "fkprop/numerics.hpp"
#include "fkprop/propagator.hpp"
#include "fkprop/scenarios.hpp"

namespace fkprop {

namespace {

using nlohmann::json;

// Collects parameters and pending output files for one command run, then
// writes everything in one pass so each file can embed the manifest hash.
// The hash covers command, scenario name, a fingerprint of the scenario
// config bytes, parameters, output names, and tool version -- not the wall
// clock, the config path, or the output directory -- so data files are
// byte-reproducible from (config, parameters, version) alone.
class RunContext {
 public:
  RunContext(std::string command, std::string scenario_name,
             std::string scenario_path, const std::string& config_text,
             std::filesystem::path out_dir)
      : command_(std::move(command)),
        scenario_(std::move(scenario_name)),
        scenario_path_(std::move(scenario_path)),
        config_hash_(config_text.empty() ? "builtin"
                                         : fnv1a_hex(config_text)),
        dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  void param(const std::string& key, double value) {
    parameters_[key] = format_double(value);
  }
  void param(const std::string& key, long long value) {
    parameters_[key] = std::to_string(value);
  }
  void param(const std::string& key, const std::string& value) {
    parameters_[key] = value;
  }

  void add_csv(std::string name, std::string body) {
    csvs_.emplace_back(std::move(name), std::move(body));
  }
  void add_json(std::string name, json body) {
    jsons_.emplace_back(std::move(name), std::move(body));
  }

  // Writes all registered files plus manifest.json; returns the hash.
  std::string finish() {
    json core;
    core["command"] = command_;
    core["scenario"] = scenario_;
    core["scenario_config_hash"] = config_hash_;
    core["parameters"] = parameters_;
    std::vector<std::string> names;
    for (const auto& [name, body] : csvs_) names.push_back(name);
    for (const auto& [name, body] : jsons_) names.push_back(name);
    core["outputs"] = names;
    core["tool_version"] = kToolVersion;
    const std::string hash = fnv1a_hex(core.dump());

    for (const auto& [name, body] : csvs_) {
      write_file_atomic(dir_ / name, body + "# manifest " + hash + "\n");
    }
    for (auto& [name, body] : jsons_) {
      body["manifest_hash"] = hash;
      write_file_atomic(dir_ / name, body.dump(2) + "\n");
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    json manifest = core;
    manifest["manifest_hash"] = hash;
    manifest["scenario_path"] = scenario_path_;
    manifest["out_dir"] = dir_.string();
    manifest["wall_clock_seconds"] = seconds;
    write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
    std::cout << command_ << ": wrote " << (names.size() + 1) << " files to "
              << dir_.string() << " (manifest " << hash << ")\n";
    return hash;
  }

 private:
  std::string command_;
  std::string scenario_;
  std::string scenario_path_;
  std::string config_hash_;
  std::map<std::string, std::string> parameters_;
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> csvs_;
  std::vector<std::pair<std::string, json>> jsons_;
  std::chrono::steady_clock::time_point start_;
};

struct TimeWindow {
  double s = 0.0;
  double t = 0.0;
};

TimeWindow resolve_window(const Scenario& sc, std::optional<double> s,
                          std::optional<double> t) {
  TimeWindow w;
  w.s = s.value_or(sc.grid.t_start());
  w.t = t.value_or(sc.grid.t_end());
  if (!sc.grid.contains(w.s) || !sc.grid.contains(w.t) || !(w.s <= w.t)) {
    throw ConfigError("--s/--t must satisfy " + format_double(sc.grid.t_start()) +
                      " <= s <= t <= " + format_double(sc.grid.t_end()));
  }
  return w;
}

StateFunction parse_function_spec(const std::string& spec, int n) {
  if (spec == "ones") return StateFunction::Ones(n);
  if (spec == "identity") {
    StateFunction v(n);
    for (int i = 0; i < n; ++i) v(i) = static_cast<double>(i);
    return v;
  }
  const std::string prefix = "indicator:";
  if (spec.rfind(prefix, 0) == 0) {
    long k = -1;
    try {
      std::size_t used = 0;
      k = std::stol(spec.substr(prefix.size()), &used);
      if (used != spec.size() - prefix.size()) k = -1;
    } catch (const std::exception&) {
      k = -1;
    }
    if (k < 0 || k >= n) {
      throw ConfigError("--f: indicator index out of range [0, " +
                        std::to_string(n) + ")");
    }
    StateFunction v = StateFunction::Zero(n);
    v(k) = 1.0;
    return v;
  }
  throw ConfigError("--f: unknown function spec '" + spec +
                    "' (expected ones, identity, indicator:K)");
}

struct CommonArgs {
  std::string scenario;
  std::string out = "fkprop-out";
  std::optional<double> s;
  std::optional<double> t;
};

struct LoadedScenario {
  Scenario sc;
  std::string config_text;
};

LoadedScenario load_with_text(const std::string& path) {
  std::string text = read_file(path);
  try {
    Scenario sc = load_scenario(text);
    return {std::move(sc), std::move(text)};
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int cmd_propagate(const CommonArgs& a, std::optional<double> step_override) {
  auto [sc, config_text] = load_with_text(a.scenario);
  if (step_override) {
    sc.validate_step(*step_override);
    sc.solver.step = *step_override;
  }
  const TimeWindow w = resolve_window(sc, a.s, a.t);
  const PropagatorMatrix q = solve_backward(sc, w.s, w.t);
  const PropagatorMatrix p = markov_propagator(sc, w.s, w.t);
  const PropagatorDiagnostics diag = propagator_diagnostics(sc, w.s, w.t);

  RunContext run("propagate", sc.name, a.scenario, config_text, a.out);
  run.param("s", w.s);
  run.param("t", w.t);
  run.param("step", sc.solver.step);
  run.add_csv("propagator_q.csv", q.to_csv(sc.states));
  run.add_csv("propagator_p.csv", p.to_csv(sc.states));
  run.add_json("diagnostics.json", json::parse(diag.to_json()));
  run.finish();
  return 0;
}

int cmd_constants(const CommonArgs& a, bool allow_infinite) {
  auto [sc, config_text] = load_with_text(a.scenario);
  const ConstantsReport rep = compute_constants(sc);

  RunContext run("constants", sc.name, a.scenario, config_text, a.out);
  run.add_csv("constants.csv", rep.to_csv());
  run.add_json("constants.json", json::parse(rep.to_json()));
  run.finish();
  if (rep.any_infinite() && !allow_infinite) {
    std::cerr << "error: a functional-inequality constant is infinite (the "
                 "chain is reducible at some grid time); pass "
                 "--allow-infinite to accept the report\n";
    return 3;
  }
  return 0;
}

struct AuditArgs {
  CommonArgs common;
  std::string check;
  double p = 2.0;
  double q = 4.0;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double kappa = 1.0;
};

std::string resolve_check(const std::string& name) {
  static const std::map<std::string, std::string> aliases = {
      {"contraction", "contraction"},
      {"mainp", "contraction"},
      {"recursion", "recursion"},
      {"decay", "decay"},
      {"main2", "decay"},
      {"general-decay", "general-decay"},
      {"hypercontractivity", "hypercontractivity"},
      {"lsi", "hypercontractivity"},
      {"subset", "subset"},
      {"rough", "rough"},
  };
  const auto it = aliases.find(name);
  if (it == aliases.end()) {
    throw ConfigError(
        "unknown audit check '" + name +
        "' (expected contraction, recursion, decay, general-decay, "
        "hypercontractivity, subset, rough)");
  }
  return it->second;
}

int cmd_audit(const AuditArgs& a) {
  const std::string check = resolve_check(a.check);
  auto [sc, config_text] = load_with_text(a.common.scenario);
  const TimeWindow w = resolve_window(sc, a.common.s, a.common.t);

  AuditReport rep;
  if (check == "contraction") {
    rep = audit_contraction(sc, a.p, w.t);
  } else if (check == "recursion") {
    rep = audit_recursion(sc, a.p, w.t);
  } else if (check == "decay") {
    rep = audit_decay(sc, a.p, a.alpha, a.beta, w.t);
  } else if (check == "general-decay") {
    rep = audit_general_decay(sc, a.p, a.gamma, a.kappa, w.t);
  } else if (check == "hypercontractivity") {
    rep = audit_hypercontractivity(sc, a.p, a.q, w.s, w.t);
  } else if (check == "subset") {
    rep = audit_subset(sc, a.p, a.alpha, a.beta, w.t);
  } else {
    rep = audit_rough(sc, w.s, w.t);
  }

  RunContext run("audit-" + check, sc.name, a.common.scenario, config_text,
                 a.common.out);
  for (const auto& [key, value] : rep.parameters) run.param(key, value);
  run.add_csv("audit_" + check + ".csv", rep.to_csv());
  run.add_json("audit_" + check + ".json", json::parse(rep.to_json()));
  run.finish();

  const long vacuous = std::count_if(
      rep.rows.begin(), rep.rows.end(),
      [](const AuditRow& r) { return r.vacuous; });
  const long asserted = static_cast<long>(rep.rows.size()) - vacuous;
  if (vacuous > 0) {
    std::cerr << "warning: " << vacuous << " of " << rep.rows.size()
              << " rows have unsatisfied hypotheses; their bounds were "
                 "recorded but not asserted\n";
  }
  const bool pass = rep.all_pass();
  std::cout << "audit " << check << ": " << (pass ? "PASS" : "FAIL") << " ("
            << asserted << " asserted rows, " << vacuous << " vacuous)\n";
  return pass ? 0 : 1;
}

struct McArgs {
  CommonArgs common;
  int x = 0;
  std::string f = "indicator:0";
  long n_paths = 10000;
  std::uint64_t seed = 1;
  bool dump_paths = false;
};

int cmd_mc(const McArgs& a) {
  auto [sc, config_text] = load_with_text(a.common.scenario);
  const TimeWindow w = resolve_window(sc, a.common.s, a.common.t);
  if (a.x < 0 || a.x >= sc.size()) {
    throw ConfigError("--x: state index out of range [0, " +
                      std::to_string(sc.size()) + ")");
  }
  const StateFunction f = parse_function_spec(a.f, sc.size());

  const EstimatorResult est =
      fk_estimate(sc, w.s, a.x, w.t, f, a.n_paths, a.seed);
  const PropagatorMatrix qm = solve_backward(sc, w.s, w.t);
  const double reference = qm.entries.row(a.x).dot(f);

  // z-score of the estimate against the ODE value. A degenerate sample
  // (zero standard error) scores 0 when the two agree to solver accuracy.
  double z = 0.0;
  if (est.std_error > 0.0) {
    z = (est.mean - reference) / est.std_error;
  } else if (std::abs(est.mean - reference) >
             1e-8 * std::max(1.0, std::abs(reference))) {
    z = est.mean > reference ? kInf : -kInf;
  }

  RunContext run("mc", sc.name, a.common.scenario, config_text, a.common.out);
  run.param("s", w.s);
  run.param("t", w.t);
  run.param("x", static_cast<long long>(a.x));
  run.param("f", a.f);
  run.param("n_paths", static_cast<long long>(a.n_paths));
  run.param("seed", static_cast<long long>(a.seed));

  json j;
  j["scenario"] = sc.name;
  j["s"] = json_number(w.s);
  j["t"] = json_number(w.t);
  j["x"] = a.x;
  j["f"] = a.f;
  j["n_paths"] = est.n_paths;
  j["seed"] = est.seed;
  j["mean"] = json_number(est.mean);
  j["std_error"] = json_number(est.std_error);
  j["ode_reference"] = json_number(reference);
  j["z_score"] = json_number(z);
  run.add_json("mc.json", std::move(j));

  if (a.dump_paths) {
    const long cap = std::min<long>(a.n_paths, 10000);
    const double dominating = dominating_rate(sc, w.s, w.t);
    std::ostringstream csv;
    csv << "path,jumps,final_state,weight,value\n";
    for (long i = 0; i < cap; ++i) {
      SplitMix64 rng(derive_stream_seed(a.seed, static_cast<std::uint64_t>(i)));
      const PathSample path = simulate_path(sc, w.s, a.x, w.t, dominating, rng);
      csv << i << ',' << path.jump_times.size() << ','
          << sc.states.label(path.states.back()) << ','
          << format_double(path.weight) << ','
          << format_double(path.weight * f(path.states.back())) << '\n';
    }
    run.add_csv("paths.csv", csv.str());
  }
  run.finish();
  std::cout << "mc: mean " << format_double(est.mean) << " +/- "
            << format_double(est.std_error) << ", ode "
            << format_double(reference) << ", z " << format_double(z) << "\n";
  return 0;
}

struct BoundsArgs {
  int n = 0;
  double time = 0.0;
  std::string out = "fkprop-out";
};

int cmd_bounds(const BoundsArgs& a) {
  const TransferBoundsReport rep = endpoint_transfer_bounds_report(a.n, a.time);

  RunContext run("bounds", "endpoint-transfer-n" + std::to_string(a.n),
                 "builtin", "", a.out);
  run.param("n", static_cast<long long>(a.n));
  run.param("time", a.time);
  run.add_csv("bounds.csv", rep.to_csv());
  run.add_json("bounds.json", json::parse(rep.to_json()));
  run.finish();

  for (const BoundsRow& row : rep.rows) {
    if (row.skipped) {
      std::cerr << "notice: row " << row.name << " skipped: " << row.note
                << "\n";
    }
  }
  const bool ok = rep.all_ok();
  std::cout << "bounds n=" << a.n << " t=" << format_double(a.time) << ": "
            << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Propagator toolkit for jump processes with time-dependent reference "
      "measures"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  CommonArgs prop_args;
  std::optional<double> prop_step;
  CLI::App* propagate =
      app.add_subcommand("propagate",
                         "Solve the evolution equations on [s, t] and write "
                         "the kernel matrices plus consistency diagnostics");
  propagate->add_option("--scenario", prop_args.scenario, "Scenario JSON file")
      ->required();
  propagate->add_option("--s", prop_args.s, "Start time (default: grid start)");
  propagate->add_option("--t", prop_args.t, "End time (default: grid end)");
  propagate->add_option("--step", prop_step, "Solver step override");
  propagate->add_option("--out", prop_args.out, "Output directory");

  CommonArgs const_args;
  bool allow_infinite = false;
  CLI::App* constants =
      app.add_subcommand("constants",
                         "Compute the functional-inequality constants on the "
                         "scenario grid");
  constants->add_option("--scenario", const_args.scenario, "Scenario JSON file")
      ->required();
  constants->add_option("--out", const_args.out, "Output directory");
  constants->add_flag("--allow-infinite", allow_infinite,
                      "Exit 0 even when a constant is infinite");

  AuditArgs audit_args;
  CLI::App* audit = app.add_subcommand(
      "audit", "Check one family of quantitative bounds against the scenario");
  audit
      ->add_option("check", audit_args.check,
                   "One of: contraction, recursion, decay, general-decay, "
                   "hypercontractivity, subset, rough")
      ->required();
  audit
      ->add_option("--scenario", audit_args.common.scenario,
                   "Scenario JSON file")
      ->required();
  audit->add_option("--s", audit_args.common.s,
                    "Start time (default: grid start)");
  audit->add_option("--t", audit_args.common.t, "End time (default: grid end)");
  audit->add_option("--p", audit_args.p, "Norm exponent p");
  audit->add_option("--q", audit_args.q, "Target exponent q");
  audit->add_option("--alpha", audit_args.alpha, "Decay rate alpha");
  audit->add_option("--beta", audit_args.beta, "Speed margin beta");
  audit->add_option("--gamma", audit_args.gamma, "Decay rate gamma");
  audit->add_option("--kappa", audit_args.kappa, "Speed margin kappa");
  audit->add_option("--out", audit_args.common.out, "Output directory");

  McArgs mc_args;
  CLI::App* mc = app.add_subcommand(
      "mc", "Monte Carlo estimate of (q_{s,t} f)(x) with ODE cross-check");
  mc->add_option("--scenario", mc_args.common.scenario, "Scenario JSON file")
      ->required();
  mc->add_option("--s", mc_args.common.s, "Start time (default: grid start)");
  mc->add_option("--t", mc_args.common.t, "End time (default: grid end)");
  mc->add_option("--x", mc_args.x, "Start state index");
  mc->add_option("--f", mc_args.f,
                 "Terminal function: ones, identity, or indicator:K");
  mc->add_option("--n-paths", mc_args.n_paths, "Number of simulated paths");
  mc->add_option("--seed", mc_args.seed, "RNG seed");
  mc->add_flag("--dump-paths", mc_args.dump_paths,
               "Also write per-path CSV (capped at 10000 paths)");
  mc->add_option("--out", mc_args.common.out, "Output directory");

  BoundsArgs bounds_args;
  CLI::App* bounds = app.add_subcommand(
      "bounds",
      "Closed-form constant bounds for the endpoint-transfer chain vs exact "
      "solver values");
  bounds->add_option("--n", bounds_args.n, "Interior path length parameter")
      ->required();
  bounds->add_option("--time", bounds_args.time, "Evaluation time");
  bounds->add_option("--out", bounds_args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(propagate)) return cmd_propagate(prop_args, prop_step);
    if (app.got_subcommand(constants)) return cmd_constants(const_args, allow_infinite);
    if (app.got_subcommand(audit)) return cmd_audit(audit_args);
    if (app.got_subcommand(mc)) return cmd_mc(mc_args);
    if (app.got_subcommand(bounds)) return cmd_bounds(bounds_args);
    std::cerr << "error: no command selected\n";
    return 2;
  } catch (const ReducibleChainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fkprop
