#include "fkprop/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fkprop/inequalities.hpp"
#include "fkprop/io.hpp"
#include "fkprop/numerics.hpp"

namespace fkprop {

namespace {

Scenario make_two_state(double speed, std::string name) {
  StateFunction base(2);
  base << 0.0, 1.0;
  MeasureFamily measures(ProbabilityVector::uniform(2),
                         EnergySchedule::linear(base));
  GeneratorFamily gen = GeneratorFamily::metropolis(
      measures, EdgeSet::path(2), SpeedSchedule::constant(speed));
  Scenario sc{StateSpace::indexed(2), std::move(measures), std::move(gen),
              TimeGrid(0.0, 1.0, 16),  SolverConfig{1e-3},  std::nullopt,
              std::move(name)};
  sc.validate_step(sc.solver.step);
  return sc;
}

}  // namespace

Scenario two_state_fixture() { return make_two_state(1.0, "two-state"); }

Scenario two_state_frozen() { return make_two_state(0.0, "two-state-frozen"); }

Scenario uniform_path_scenario(int states, double t_end, int segments,
                               double lambda) {
  if (states < 2) throw ConfigError("uniform_path_scenario: need >= 2 states");
  if (!(t_end > 0.0)) throw ConfigError("uniform_path_scenario: t_end must be > 0");
  if (segments < 1) throw ConfigError("uniform_path_scenario: need >= 1 segment");
  if (!(lambda >= 0.0)) throw ConfigError("uniform_path_scenario: speed must be >= 0");
  MeasureFamily measures(ProbabilityVector::uniform(states),
                         EnergySchedule::linear(StateFunction::Zero(states)));
  GeneratorFamily gen = GeneratorFamily::metropolis(
      measures, EdgeSet::path(states), SpeedSchedule::constant(lambda));
  Scenario sc{StateSpace::indexed(states),
              std::move(measures),
              std::move(gen),
              TimeGrid(0.0, t_end, segments),
              SolverConfig{},
              std::nullopt,
              "uniform-path-" + std::to_string(states)};
  return with_default_solver(std::move(sc));
}

Scenario endpoint_transfer_scenario(int n, double eps, double omega,
                                    double t_end, double grid_step,
                                    SpeedSchedule lambda) {
  if (n < 2) throw ConfigError("endpoint_transfer_scenario: need n >= 2");
  if (!(t_end > 0.0)) {
    throw ConfigError("endpoint_transfer_scenario: t_end must be > 0");
  }
  if (!(grid_step > 0.0)) {
    throw ConfigError("endpoint_transfer_scenario: grid_step must be > 0");
  }
  const long long segments = std::llround(t_end / grid_step);
  if (segments < 1 ||
      std::abs(static_cast<double>(segments) * grid_step - t_end) >
          1e-9 * std::max(1.0, t_end)) {
    throw ConfigError(
        "endpoint_transfer_scenario: grid_step must divide t_end evenly");
  }
  MeasureFamily measures(ProbabilityVector::uniform(n + 1),
                         EnergySchedule::endpoint_transfer(n + 1, eps, omega));
  GeneratorFamily gen = GeneratorFamily::metropolis(
      measures, EdgeSet::path(n + 1), std::move(lambda));
  Scenario sc{StateSpace::indexed(n + 1),
              std::move(measures),
              std::move(gen),
              TimeGrid(0.0, t_end, static_cast<int>(segments)),
              SolverConfig{},
              std::nullopt,
              "endpoint-transfer-n" + std::to_string(n)};
  return with_default_solver(std::move(sc));
}

Scenario split_halves_scenario() {
  StateFunction base(4);
  base << -0.5, 0.5, 0.0, 1.0;
  MeasureFamily measures(ProbabilityVector::uniform(4),
                         EnergySchedule::linear(base));
  GeneratorFamily gen = GeneratorFamily::metropolis(
      measures, EdgeSet(4, {{0, 1}, {2, 3}}), SpeedSchedule::constant(1.0));
  Scenario sc{StateSpace::indexed(4),
              std::move(measures),
              std::move(gen),
              TimeGrid(0.0, 1.0, 16),
              SolverConfig{1e-3},
              std::vector<int>{0, 1},
              "split-halves"};
  sc.validate_step(sc.solver.step);
  return sc;
}

namespace {

bool row_within(double lower, double exact, double upper) {
  double scale = std::max(1.0, std::abs(exact));
  if (std::isfinite(lower)) scale = std::max(scale, std::abs(lower));
  if (std::isfinite(upper)) scale = std::max(scale, std::abs(upper));
  const double tol = 1e-9 * scale;
  return exact >= lower - tol && exact <= upper + tol;
}

BoundsRow make_bounds_row(std::string name, double lower, double exact,
                          double upper, std::string note = {}) {
  BoundsRow row;
  row.name = std::move(name);
  row.lower = lower;
  row.exact = exact;
  row.upper = upper;
  row.ok = row_within(lower, exact, upper);
  row.note = std::move(note);
  return row;
}

BoundsRow skipped_row(std::string name, std::string note) {
  BoundsRow row;
  row.name = std::move(name);
  row.lower = -kInf;
  row.exact = std::numeric_limits<double>::quiet_NaN();
  row.upper = kInf;
  row.skipped = true;
  row.ok = true;
  row.note = std::move(note);
  return row;
}

std::string csv_field(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',' || c == '\n') c = ';';
  }
  return out;
}

}  // namespace

bool TransferBoundsReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const BoundsRow& r) { return r.ok; });
}

std::string TransferBoundsReport::to_csv() const {
  std::ostringstream out;
  out << "name,lower,exact,upper,ok,skipped,note\n";
  for (const BoundsRow& r : rows) {
    out << csv_field(r.name) << ',' << format_double(r.lower) << ','
        << format_double(r.exact) << ',' << format_double(r.upper) << ','
        << (r.ok ? 1 : 0) << ',' << (r.skipped ? 1 : 0) << ','
        << csv_field(r.note) << '\n';
  }
  return out.str();
}

std::string TransferBoundsReport::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["time"] = json_number(time);
  j["relabeled"] = relabeled;
  j["all_ok"] = all_ok();
  j["rows"] = nlohmann::json::array();
  for (const BoundsRow& r : rows) {
    nlohmann::json row;
    row["name"] = r.name;
    row["lower"] = json_number(r.lower);
    row["exact"] = json_number(r.exact);
    row["upper"] = json_number(r.upper);
    row["ok"] = r.ok;
    row["skipped"] = r.skipped;
    row["note"] = r.note;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

TransferBoundsReport endpoint_transfer_bounds_report(int n, double time) {
  if (n < 2) {
    throw ConfigError("endpoint_transfer_bounds_report: need n >= 2");
  }
  const double eps = 0.5;
  const double omega = 1.0;
  MeasureFamily measures(ProbabilityVector::uniform(n + 1),
                         EnergySchedule::endpoint_transfer(n + 1, eps, omega));
  GeneratorFamily gen = GeneratorFamily::metropolis(
      measures, EdgeSet::path(n + 1), SpeedSchedule::constant(1.0));

  const QMatrix rates = gen.rates_at(time);
  const ProbabilityVector mu = measures.measure_at(time);
  const StateFunction h = measures.potential_at(time);

  const ConstantResult c_exact = poincare_constant_full(rates, mu);
  const ConstantResult a_exact = weighted_poincare_quadratic(rates, mu, h);
  const ConstantResult b_exact = weighted_poincare_linear(rates, mu, h);

  const double h0 = h(0);
  const double hn = h(n);

  TransferBoundsReport rep;
  rep.n = n;
  rep.time = time;
  // The closed forms assume the mass of state 0 is not shrinking; when it is,
  // reverse the path (a relabeling that leaves every constant unchanged).
  rep.relabeled = h0 > 0.0;
  const double h_low = std::min(h0, hn);  // potential at the filling endpoint

  rep.rows.push_back(make_bounds_row(
      "quadratic-constant", -kInf, a_exact.value,
      4.0 * (n + 1) * std::max(0.0, -h_low),
      rep.relabeled ? "path reversed so the filling endpoint is state 0" : ""));
  rep.rows.push_back(make_bounds_row("linear-constant", -kInf, b_exact.value,
                                     4.0 * (h0 * h0 + hn * hn) * (n + 1)));
  rep.rows.push_back(make_bounds_row("inverse-gap-upper", -kInf, c_exact.value,
                                     n * std::max((n + 1) / 2.0, 2.0)));
  if (n >= 4) {
    const double d = static_cast<double>(n - 4);
    rep.rows.push_back(make_bounds_row(
        "inverse-gap-lower", d * d * d * d / (48.0 * (n + 1.0) * (n + 1.0)),
        c_exact.value, kInf));
  } else {
    rep.rows.push_back(
        skipped_row("inverse-gap-lower", "lower bound requires n >= 4"));
  }

  const double sup_h = h.cwiseAbs().maxCoeff();
  if (sup_h <= 1.0 + 1e-12) {
    rep.rows.push_back(make_bounds_row("quadratic-constant-unit-sup", -kInf,
                                       a_exact.value, 4.0 * (n + 1)));
    rep.rows.push_back(make_bounds_row("linear-constant-unit-sup", -kInf,
                                       b_exact.value, 8.0 * (n + 1)));
  } else {
    rep.rows.push_back(skipped_row("quadratic-constant-unit-sup",
                                   "requires sup |H| <= 1"));
    rep.rows.push_back(
        skipped_row("linear-constant-unit-sup", "requires sup |H| <= 1"));
  }
  return rep;
}

VarianceWitness variance_lower_bound_witness(int n) {
  if (n < 4) {
    throw PreconditionError("variance_lower_bound_witness: need n >= 4");
  }
  MeasureFamily measures(ProbabilityVector::uniform(n + 1),
                         EnergySchedule::endpoint_transfer(n + 1, 0.5, 1.0));
  GeneratorFamily gen = GeneratorFamily::metropolis(
      measures, EdgeSet::path(n + 1), SpeedSchedule::constant(1.0));
  const double t = 0.0;  // the measure is uniform here
  const QMatrix rates = gen.rates_at(t);
  const ProbabilityVector mu = measures.measure_at(t);

  VarianceWitness w;
  w.f = StateFunction(n + 1);
  w.f(0) = 1.0;
  for (int i = 1; i < n; ++i) w.f(i) = static_cast<double>(i);
  w.f(n) = static_cast<double>(n - 1);
  w.variance = variance(w.f, mu);
  w.dirichlet = dirichlet_form(rates, mu, w.f, w.f);
  w.ratio = w.variance / w.dirichlet;
  return w;
}

QMatrix nonlocal_drift_generator(int n, const MeasureFamily& measures,
                                 double t) {
  if (n < 1) throw ConfigError("nonlocal_drift_generator: need n >= 1");
  if (measures.size() != n + 1) {
    throw DimensionError("nonlocal_drift_generator: measure family has " +
                         std::to_string(measures.size()) + " states, need " +
                         std::to_string(n + 1));
  }
  const ProbabilityVector mu = measures.measure_at(t);
  const StateFunction h = measures.potential_at(t);

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
  double required_flux = 0.0;  // net up-flux across bond (y-1, y)
  for (int y = 1; y <= n; ++y) {
    // d/dt mu_t({0..y-1}) = -sum_{x<y} H_t(x) mu_t(x) must leave across the bond
    required_flux += h(y - 1) * mu[y - 1];
    const double base_flux = 0.5 * (mu[y - 1] - mu[y]);
    const double extra = required_flux - base_flux;
    const double up = 0.5 + std::max(extra, 0.0) / mu[y - 1];
    const double down = 0.5 + std::max(-extra, 0.0) / mu[y];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw PreconditionError(
          "nonlocal_drift_generator: required rates are not finite at t = " +
          format_double(t));
    }
    m(y - 1, y) = up;
    m(y, y - 1) = down;
  }
  return QMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// JSON config loader
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config error at " + (path.empty() ? "/" : path) + ": " +
                    msg);
}

const json& need(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "/" + key, "missing required field");
  return j.at(key);
}

void need_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) {
      if (it.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) fail(path + "/" + it.key(), "unknown field");
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_number_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_number(j[i], path + "/" + std::to_string(i)));
  }
  return out;
}

StateFunction as_state_vector(const json& j, const std::string& path,
                              int expected) {
  std::vector<double> nums = as_number_array(j, path);
  if (static_cast<int>(nums.size()) != expected) {
    fail(path, "expected " + std::to_string(expected) + " entries, got " +
                   std::to_string(nums.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(nums.data(),
                                           static_cast<long>(nums.size()));
}

StateSpace parse_states(const json& j, const std::string& path) {
  need_object(j, path);
  reject_unknown(j, path, {"count", "labels"});
  const bool has_count = j.contains("count");
  const bool has_labels = j.contains("labels");
  if (has_count == has_labels) {
    fail(path, "provide exactly one of count, labels");
  }
  if (has_count) {
    const long long count = as_integer(j.at("count"), path + "/count");
    if (count < 2) fail(path + "/count", "must be >= 2");
    return StateSpace::indexed(static_cast<int>(count));
  }
  const json& jl = j.at("labels");
  if (!jl.is_array()) fail(path + "/labels", "expected an array of strings");
  std::vector<std::string> labels;
  labels.reserve(jl.size());
  for (std::size_t i = 0; i < jl.size(); ++i) {
    labels.push_back(as_string(jl[i], path + "/labels/" + std::to_string(i)));
  }
  if (labels.size() < 2) fail(path + "/labels", "need >= 2 states");
  try {
    return StateSpace(std::move(labels));
  } catch (const Error& e) {
    fail(path + "/labels", e.what());
  }
}

ProbabilityVector parse_mu0(const json& jmeasure, const std::string& path,
                            int n) {
  if (!jmeasure.contains("mu0")) return ProbabilityVector::uniform(n);
  const json& j = jmeasure.at("mu0");
  const std::string p = path + "/mu0";
  if (j.is_string()) {
    const std::string preset = j.get<std::string>();
    if (preset != "uniform") fail(p, "unknown preset '" + preset + "'");
    return ProbabilityVector::uniform(n);
  }
  StateFunction w = as_state_vector(j, p, n);
  if ((w.array() <= 0.0).any()) fail(p, "weights must be > 0");
  const double sum = w.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) fail(p, "weights must sum to a positive finite value");
  if (std::abs(sum - 1.0) > 1e-6) {
    std::cerr << "warning: " << p << " weights sum to " << format_double(sum)
              << "; normalizing\n";
  }
  return ProbabilityVector(w / sum);
}

EnergySchedule parse_energy(const json& jmeasure, const std::string& path,
                            int n) {
  const json& j = need(jmeasure, path, "energy");
  const std::string p = path + "/energy";
  need_object(j, p);
  reject_unknown(j, p, {"form", "base", "times", "values", "eps", "omega"});
  const std::string form = as_string(need(j, p, "form"), p + "/form");
  try {
    if (form == "linear") {
      return EnergySchedule::linear(
          as_state_vector(need(j, p, "base"), p + "/base", n));
    }
    if (form == "piecewise_linear") {
      std::vector<double> times =
          as_number_array(need(j, p, "times"), p + "/times");
      const json& jv = need(j, p, "values");
      if (!jv.is_array()) fail(p + "/values", "expected an array of arrays");
      std::vector<StateFunction> values;
      values.reserve(jv.size());
      for (std::size_t i = 0; i < jv.size(); ++i) {
        values.push_back(as_state_vector(
            jv[i], p + "/values/" + std::to_string(i), n));
      }
      if (values.size() != times.size()) {
        fail(p, "times and values must have the same length");
      }
      return EnergySchedule::piecewise_linear(std::move(times),
                                              std::move(values));
    }
    if (form == "endpoint_transfer") {
      const double eps = as_number(need(j, p, "eps"), p + "/eps");
      const double omega = as_number(need(j, p, "omega"), p + "/omega");
      return EnergySchedule::endpoint_transfer(n, eps, omega);
    }
  } catch (const ConfigError& e) {
    // re-raise errors produced by the schedule constructors with the path
    const std::string what = e.what();
    if (what.rfind("config error at ", 0) == 0) throw;
    fail(p, what);
  }
  fail(p + "/form", "unknown form '" + form +
                        "' (expected linear, piecewise_linear, "
                        "endpoint_transfer)");
}

SpeedSchedule parse_lambda(const json& j, const std::string& path) {
  need_object(j, path);
  reject_unknown(j, path, {"form", "value", "times", "values"});
  const std::string form = as_string(need(j, path, "form"), path + "/form");
  if (form == "constant") {
    const double value = as_number(need(j, path, "value"), path + "/value");
    if (!(value >= 0.0)) fail(path + "/value", "must be >= 0");
    return SpeedSchedule::constant(value);
  }
  if (form == "piecewise_linear") {
    std::vector<double> times =
        as_number_array(need(j, path, "times"), path + "/times");
    std::vector<double> values =
        as_number_array(need(j, path, "values"), path + "/values");
    if (times.size() != values.size()) {
      fail(path, "times and values must have the same length");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0)) {
        fail(path + "/values/" + std::to_string(i), "must be >= 0");
      }
    }
    try {
      return SpeedSchedule::piecewise_linear(std::move(times),
                                             std::move(values));
    } catch (const Error& e) {
      fail(path, e.what());
    }
  }
  fail(path + "/form",
       "unknown form '" + form + "' (expected constant, piecewise_linear)");
}

EdgeSet parse_edges(const json& j, const std::string& path, int n) {
  if (j.is_string()) {
    const std::string preset = j.get<std::string>();
    if (preset == "path") return EdgeSet::path(n);
    if (preset == "complete") return EdgeSet::complete(n);
    fail(path, "unknown preset '" + preset + "' (expected path, complete)");
  }
  if (!j.is_array()) fail(path, "expected a preset string or an array of pairs");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string pe = path + "/" + std::to_string(i);
    const json& je = j[i];
    if (!je.is_array() || je.size() != 2) {
      fail(pe, "expected a pair [x, y]");
    }
    const long long x = as_integer(je[0], pe + "/0");
    const long long y = as_integer(je[1], pe + "/1");
    if (x < 0 || x >= n || y < 0 || y >= n) {
      fail(pe, "state index out of range [0, " + std::to_string(n) + ")");
    }
    edges.emplace_back(static_cast<int>(x), static_cast<int>(y));
  }
  try {
    return EdgeSet(n, std::move(edges));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

GeneratorFamily parse_generator(const json& j, const std::string& path,
                                const MeasureFamily& measures,
                                SpeedSchedule lambda, int n) {
  need_object(j, path);
  reject_unknown(j, path, {"builder", "edges", "times", "matrices"});
  const std::string builder =
      as_string(need(j, path, "builder"), path + "/builder");
  if (builder == "metropolis") {
    EdgeSet edges = parse_edges(need(j, path, "edges"), path + "/edges", n);
    return GeneratorFamily::metropolis(measures, std::move(edges),
                                       std::move(lambda));
  }
  if (builder == "tabulated") {
    std::vector<double> times =
        as_number_array(need(j, path, "times"), path + "/times");
    const json& jm = need(j, path, "matrices");
    if (!jm.is_array()) fail(path + "/matrices", "expected an array of matrices");
    std::vector<QMatrix> values;
    values.reserve(jm.size());
    for (std::size_t i = 0; i < jm.size(); ++i) {
      const std::string pm = path + "/matrices/" + std::to_string(i);
      const json& rows = jm[i];
      if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
        fail(pm, "expected " + std::to_string(n) + " rows");
      }
      Eigen::MatrixXd m(n, n);
      for (int r = 0; r < n; ++r) {
        m.row(r) = as_state_vector(rows[r], pm + "/" + std::to_string(r), n)
                       .transpose();
      }
      try {
        values.emplace_back(std::move(m));
      } catch (const Error& e) {
        fail(pm, e.what());
      }
    }
    if (values.size() != times.size()) {
      fail(path, "times and matrices must have the same length");
    }
    try {
      return GeneratorFamily::tabulated(std::move(times), std::move(values),
                                        std::move(lambda));
    } catch (const Error& e) {
      fail(path, e.what());
    }
  }
  fail(path + "/builder",
       "unknown builder '" + builder + "' (expected metropolis, tabulated)");
}

TimeGrid parse_time(const json& j, const std::string& path) {
  need_object(j, path);
  reject_unknown(j, path, {"t_start", "t_end", "segments", "step"});
  const double t_start =
      j.contains("t_start") ? as_number(j.at("t_start"), path + "/t_start")
                            : 0.0;
  const double t_end = as_number(need(j, path, "t_end"), path + "/t_end");
  if (!(t_end > t_start)) fail(path + "/t_end", "must be > t_start");
  const bool has_segments = j.contains("segments");
  const bool has_step = j.contains("step");
  if (has_segments == has_step) {
    fail(path, "provide exactly one of segments, step");
  }
  long long segments = 0;
  if (has_segments) {
    segments = as_integer(j.at("segments"), path + "/segments");
    if (segments < 1) fail(path + "/segments", "must be >= 1");
  } else {
    const double step = as_number(j.at("step"), path + "/step");
    if (!(step > 0.0)) fail(path + "/step", "must be > 0");
    const double len = t_end - t_start;
    segments = std::llround(len / step);
    if (segments < 1 || std::abs(static_cast<double>(segments) * step - len) >
                            1e-9 * std::max(1.0, len)) {
      fail(path + "/step", "must divide t_end - t_start evenly");
    }
  }
  return TimeGrid(t_start, t_end, static_cast<int>(segments));
}

std::vector<int> parse_subset(const json& j, const std::string& path, int n) {
  if (!j.is_array()) fail(path, "expected an array of state indices");
  std::vector<int> subset;
  subset.reserve(j.size());
  std::set<long long> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string pe = path + "/" + std::to_string(i);
    const long long x = as_integer(j[i], pe);
    if (x < 0 || x >= n) {
      fail(pe, "state index out of range [0, " + std::to_string(n) + ")");
    }
    if (!seen.insert(x).second) fail(pe, "duplicate state index");
    subset.push_back(static_cast<int>(x));
  }
  if (subset.size() < 2) fail(path, "need >= 2 states");
  return subset;
}

}  // namespace

Scenario load_scenario(const std::string& config_text) {
  json doc;
  try {
    doc = json::parse(config_text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min(e.byte, config_text.size());
    const long line =
        1 + static_cast<long>(std::count(config_text.begin(),
                                         config_text.begin() + byte, '\n'));
    throw ConfigError("config parse error at line " + std::to_string(line) +
                      ": " + e.what());
  }
  need_object(doc, "");
  reject_unknown(doc, "", {"name", "states", "measure", "generator", "lambda",
                           "time", "solver", "subset"});

  StateSpace states = parse_states(need(doc, "", "states"), "/states");
  const int n = states.size();

  const json& jmeasure = need(doc, "", "measure");
  need_object(jmeasure, "/measure");
  reject_unknown(jmeasure, "/measure", {"mu0", "energy"});
  ProbabilityVector mu0 = parse_mu0(jmeasure, "/measure", n);
  EnergySchedule schedule = parse_energy(jmeasure, "/measure", n);
  MeasureFamily measures = [&] {
    try {
      return MeasureFamily(std::move(mu0), std::move(schedule));
    } catch (const Error& e) {
      fail("/measure", e.what());
    }
  }();

  SpeedSchedule lambda = parse_lambda(need(doc, "", "lambda"), "/lambda");
  GeneratorFamily gen = parse_generator(need(doc, "", "generator"),
                                        "/generator", measures,
                                        std::move(lambda), n);
  TimeGrid grid = parse_time(need(doc, "", "time"), "/time");

  std::optional<std::vector<int>> subset;
  if (doc.contains("subset")) {
    subset = parse_subset(doc.at("subset"), "/subset", n);
  }
  std::string name =
      doc.contains("name") ? as_string(doc.at("name"), "/name") : "scenario";

  Scenario sc{std::move(states), std::move(measures), std::move(gen),
              grid,              SolverConfig{},      std::move(subset),
              std::move(name)};
  if (doc.contains("solver")) {
    const json& js = doc.at("solver");
    need_object(js, "/solver");
    reject_unknown(js, "/solver", {"step"});
    const double step = as_number(need(js, "/solver", "step"), "/solver/step");
    if (!(step > 0.0)) fail("/solver/step", "must be > 0");
    try {
      sc.validate_step(step);
    } catch (const Error& e) {
      fail("/solver/step", e.what());
    }
    sc.solver.step = step;
  } else {
    sc = with_default_solver(std::move(sc));
  }
  try {
    sc.require_reversible();
  } catch (const Error& e) {
    fail("/generator", e.what());
  }
  return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return load_scenario(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fkprop
