#include "fkprop/auditor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "fkprop/io.hpp"
#include "fkprop/numerics.hpp"
#include "fkprop/rng.hpp"

namespace fkprop {
namespace {

constexpr double kFourthRootOfTwo = 1.1892071150027210667;

// a * x with the convention 0 * inf = 0 (absent terms do not poison margins).
double scaled(double a, double x) { return a == 0.0 ? 0.0 : a * x; }

bool is_power_of_two_at_least_two(double p) {
  if (!(p >= 2.0) || !std::isfinite(p)) return false;
  const double n = std::log2(p);
  return std::abs(n - static_cast<double>(std::llround(n))) <= 1e-9;
}

int knot_index(const TimeGrid& grid, double time, const char* what) {
  const double h = grid.step();
  const auto i = std::llround((time - grid.t_start()) / h);
  if (i < 0 || i > grid.segments() ||
      std::abs(grid.knot(static_cast<int>(i)) - time) >
          1e-9 * std::max(1.0, std::abs(time))) {
    throw ConfigError(std::string(what) + " = " + format_double(time) +
                      " does not lie on the scenario grid");
  }
  return static_cast<int>(i);
}

// Sample times with spacing step/2 from knot 0 through knot t_index; index 2*j
// is grid knot j exactly.
std::vector<double> half_step_times(const TimeGrid& grid, int t_index) {
  const double h = grid.step();
  std::vector<double> out;
  out.reserve(2 * t_index + 1);
  for (int j = 0; j <= 2 * t_index; ++j) {
    out.push_back(j % 2 == 0 ? grid.knot(j / 2)
                             : grid.knot(j / 2) + 0.5 * h);
  }
  return out;
}

// The three variational constants plus the speed, tabulated on a time sample.
struct SampledConstants {
  std::vector<double> times;
  std::vector<double> lambda;
  std::vector<double> c, a, b;
};

SampledConstants sample_constants(const Scenario& sc,
                                  std::vector<double> times) {
  SampledConstants out;
  out.times = std::move(times);
  const auto m = out.times.size();
  out.lambda.resize(m);
  out.c.resize(m);
  out.a.resize(m);
  out.b.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = out.times[i];
    out.lambda[i] = sc.generator.speed()(r);
    const QMatrix rates = sc.generator.rates_at(r);
    const ProbabilityVector mu = sc.measures.measure_at(r);
    const ConstantResult cr = poincare_constant_full(rates, mu);
    out.c[i] = cr.value;
    if (!std::isfinite(cr.value)) {
      out.a[i] = kInf;
      out.b[i] = kInf;
      continue;
    }
    const StateFunction h = sc.measures.potential_at(r);
    out.a[i] = weighted_poincare_quadratic(rates, mu, h).value;
    out.b[i] = weighted_poincare_linear(rates, mu, h).value;
  }
  return out;
}

struct Hypothesis {
  bool ok = true;
  double margin = kInf;
  double required = 0.0;
};

// Verifies lambda_r >= threshold(r) on sample indices [begin, end]; strict
// demands a positive margin.
template <class Threshold>
Hypothesis check_hypothesis(const SampledConstants& k, std::size_t begin,
                            std::size_t end, Threshold&& threshold,
                            bool strict = false) {
  Hypothesis hyp;
  hyp.required = -kInf;
  for (std::size_t i = begin; i <= end; ++i) {
    const double req = threshold(i);
    hyp.required = std::max(hyp.required, req);
    hyp.margin = std::min(hyp.margin, k.lambda[i] - req);
  }
  if (strict) {
    hyp.ok = hyp.margin > 0.0;
  } else {
    const double slack =
        1e-9 * std::max(1.0, std::isfinite(hyp.required) ? std::abs(hyp.required) : 1.0);
    hyp.ok = hyp.margin >= -slack;
  }
  return hyp;
}

Hypothesis trivial_hypothesis() { return Hypothesis{true, 0.0, 0.0}; }

// Deterministic function battery: constants, coordinate indicators, then a
// rotation of signed, nonnegative and heavy-tailed random vectors.
std::vector<Eigen::VectorXd> probe_battery(int n, int count,
                                           std::uint64_t seed) {
  std::vector<Eigen::VectorXd> probes;
  probes.reserve(static_cast<std::size_t>(count));
  probes.push_back(Eigen::VectorXd::Ones(n));
  for (int x = 0; x < n && static_cast<int>(probes.size()) < count; ++x) {
    probes.push_back(Eigen::VectorXd::Unit(n, x));
  }
  SplitMix64 rng(seed);
  while (static_cast<int>(probes.size()) < count) {
    Eigen::VectorXd f(n);
    const int kind = static_cast<int>(probes.size() % 3);
    for (int x = 0; x < n; ++x) {
      const double u = rng.uniform();
      if (kind == 0) {
        f(x) = 2.0 * u - 1.0;
      } else if (kind == 1) {
        f(x) = u;
      } else {
        f(x) = std::tan(3.0 * (u - 0.5));
      }
    }
    probes.push_back(f);
  }
  return probes;
}

// sum_x mu(x) |f(x)|^p (the p-th moment, no root).
double abs_moment(const Eigen::VectorXd& f, const ProbabilityVector& mu,
                  double p) {
  return (f.array().abs().pow(p) * mu.weights().array()).sum();
}

AuditRow make_row(double s, double t, const Hypothesis& hyp, double measured,
                  double bound, double tolerance, std::string method,
                  std::string note, Eigen::VectorXd witness = {}) {
  AuditRow row;
  row.s = s;
  row.t = t;
  row.hypothesis_ok = hyp.ok;
  row.hypothesis_margin = hyp.margin;
  row.lambda_required = hyp.required;
  row.measured = measured;
  row.bound = bound;
  row.tolerance = tolerance;
  row.pass = measured <= bound + tolerance;
  row.vacuous = !hyp.ok;
  row.method = std::move(method);
  row.note = std::move(note);
  row.witness = std::move(witness);
  return row;
}

std::string csv_cell(std::string v) {
  for (char& ch : v) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return v;
}

nlohmann::json row_to_json(const AuditRow& r) {
  nlohmann::json j;
  j["s"] = json_number(r.s);
  j["t"] = json_number(r.t);
  j["hypothesis_ok"] = r.hypothesis_ok;
  j["hypothesis_margin"] = json_number(r.hypothesis_margin);
  j["lambda_required"] = json_number(r.lambda_required);
  j["measured"] = json_number(r.measured);
  j["bound"] = json_number(r.bound);
  j["tolerance"] = json_number(r.tolerance);
  j["pass"] = r.pass;
  j["vacuous"] = r.vacuous;
  j["method"] = r.method;
  j["note"] = r.note;
  nlohmann::json witness = nlohmann::json::array();
  for (int i = 0; i < r.witness.size(); ++i) witness.push_back(json_number(r.witness(i)));
  j["witness"] = witness;
  return j;
}

}  // namespace

double audit_tolerance(double bound) {
  if (!std::isfinite(bound)) return 1e-6;
  return bound > 10.0 ? 1e-6 * bound : 1e-7;
}

bool AuditReport::all_pass() const {
  for (const AuditRow& row : rows) {
    if (row.hypothesis_ok && !row.pass) return false;
  }
  return true;
}

std::string AuditReport::to_csv() const {
  std::ostringstream out;
  out << "check_id,scenario,s,t,hypothesis_ok,hypothesis_margin,"
         "lambda_required,measured,bound,tolerance,pass,vacuous,method,note\n";
  for (const AuditRow& r : rows) {
    out << csv_cell(check_id) << ',' << csv_cell(scenario_name) << ','
        << format_double(r.s) << ',' << format_double(r.t) << ','
        << (r.hypothesis_ok ? 1 : 0) << ',' << format_double(r.hypothesis_margin)
        << ',' << format_double(r.lambda_required) << ','
        << format_double(r.measured) << ',' << format_double(r.bound) << ','
        << format_double(r.tolerance) << ',' << (r.pass ? 1 : 0) << ','
        << (r.vacuous ? 1 : 0) << ',' << csv_cell(r.method) << ','
        << csv_cell(r.note) << '\n';
  }
  return out.str();
}

std::string AuditReport::to_json() const {
  nlohmann::json j;
  j["check_id"] = check_id;
  j["scenario"] = scenario_name;
  nlohmann::json params;
  for (const auto& [name, value] : parameters) params[name] = json_number(value);
  j["parameters"] = params;
  nlohmann::json rows_json = nlohmann::json::array();
  for (const AuditRow& r : rows) rows_json.push_back(row_to_json(r));
  j["rows"] = rows_json;
  j["all_pass"] = all_pass();
  return j.dump(2) + "\n";
}

SpeedPlan plan_speed_for_contraction(const ConstantsReport& constants, double p,
                                     double t) {
  if (!(p >= 2.0) || !std::isfinite(p)) {
    throw ConfigError("speed planning requires finite p >= 2");
  }
  if (constants.rows.size() < 2) {
    throw PlanningError("speed planning needs at least two constants rows");
  }
  if (constants.rows.front().time > 1e-9 ||
      constants.rows.back().time < t - 1e-9) {
    throw PlanningError("constants rows do not cover the planning window");
  }
  SpeedPlan plan;
  for (const ConstantsRow& row : constants.rows) {
    if (row.time > t + 1e-9 && plan.times.size() >= 2) break;
    if (!std::isfinite(row.a) || !std::isfinite(row.b)) {
      throw PlanningError("constants are infinite at time " +
                          format_double(row.time) +
                          "; no finite speed threshold exists");
    }
    const double a_term = std::max(0.0, 0.25 * p * row.a);
    const double b_term = 0.25 * p * (p + 3.0) * t * row.b;
    plan.times.push_back(row.time);
    plan.thresholds.push_back(a_term + b_term);
    plan.binding_term.push_back(a_term >= b_term ? "quadratic-term"
                                                 : "linear-term");
  }
  std::vector<double> values;
  values.reserve(plan.thresholds.size());
  for (double thr : plan.thresholds) values.push_back(1.01 * thr);
  plan.schedule = SpeedSchedule::piecewise_linear(plan.times, values);
  return plan;
}

AuditReport audit_contraction(const Scenario& sc, double p, double t) {
  if (!(p >= 2.0) || !std::isfinite(p)) {
    throw ConfigError("contraction audit requires finite p >= 2");
  }
  const int T = knot_index(sc.grid, t, "t");
  const SampledConstants k = sample_constants(sc, half_step_times(sc.grid, T));
  std::vector<double> knot_times;
  knot_times.reserve(T + 1);
  for (int j = 0; j <= T; ++j) knot_times.push_back(sc.grid.knot(j));
  const auto snaps = solve_backward_snapshots(sc, knot_times, t);
  const ProbabilityVector mu_t = sc.measures.measure_at(t);
  const auto probes = probe_battery(sc.size(), 1000, 0xa5d17b4c9e02f318ULL);

  AuditReport rep;
  rep.check_id = "contraction";
  rep.scenario_name = sc.name;
  rep.parameters = {{"p", p}, {"t", t}};
  const auto threshold = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]) + scaled(0.25 * p * (p + 3.0) * t, k.b[i]);
  };
  for (int j = 0; j <= T; ++j) {
    const double s = knot_times[j];
    const Hypothesis hyp =
        check_hypothesis(k, 2 * static_cast<std::size_t>(j), 2 * T, threshold);
    const ProbabilityVector mu_s = sc.measures.measure_at(s);

    OperatorNormResult norm =
        operator_norm_pq(snaps[j].entries, mu_s, mu_t, p, p);
    rep.rows.push_back(make_row(
        s, t, hyp, norm.value, kFourthRootOfTwo,
        audit_tolerance(kFourthRootOfTwo), norm.method,
        "operator norm for exponent p", norm.maximizer));

    double worst_gap = -kInf;
    double worst_measured = 0.0, worst_bound = 0.0;
    Eigen::VectorXd worst_f;
    for (const Eigen::VectorXd& raw : probes) {
      const double np = lp_norm(raw, mu_t, p);
      if (!(np > 1e-12)) continue;
      const Eigen::VectorXd f = raw / np;
      const double measured = lp_norm(snaps[j].entries * f, mu_s, p);
      const double bound =
          1.0 + kFourthRootOfTwo * lp_norm(f, mu_t, 0.5 * p);
      if (measured - bound > worst_gap) {
        worst_gap = measured - bound;
        worst_measured = measured;
        worst_bound = bound;
        worst_f = f;
      }
    }
    rep.rows.push_back(make_row(
        s, t, hyp, worst_measured, worst_bound, audit_tolerance(worst_bound),
        "probe_battery",
        "two-norm variant; worst of 1000 probes at unit p-norm", worst_f));
  }
  return rep;
}

AuditReport audit_recursion(const Scenario& sc, double p, double t) {
  if (!(p >= 2.0) || !std::isfinite(p)) {
    throw ConfigError("recursion audit requires finite p >= 2");
  }
  const int T = knot_index(sc.grid, t, "t");
  const SampledConstants k = sample_constants(sc, half_step_times(sc.grid, T));
  const auto snaps = solve_backward_snapshots(sc, k.times, t);
  std::vector<ProbabilityVector> mus;
  mus.reserve(k.times.size());
  for (double r : k.times) mus.push_back(sc.measures.measure_at(r));
  const ProbabilityVector& mu_t = mus.back();
  const double half = 0.5 * sc.grid.step();
  const auto probes = probe_battery(sc.size(), 1000, 0x51c0ffeeb01dfaceULL);

  // Denominator 4 lambda - p a and the half-moment <(q_{r,t}|f|)^{p/2}, mu_r>
  // share sample indices with k.times.
  std::vector<double> denom(k.times.size());
  for (std::size_t i = 0; i < k.times.size(); ++i) {
    denom[i] = 4.0 * k.lambda[i] - scaled(p, k.a[i]);
  }

  AuditReport rep;
  rep.check_id = "recursion";
  rep.scenario_name = sc.name;
  rep.parameters = {{"p", p}, {"t", t}};

  const auto strict_threshold = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]);
  };
  const auto contraction_threshold = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]) + scaled(0.25 * p * (p + 3.0) * t, k.b[i]);
  };

  for (int j = 0; j <= T; ++j) {
    const double s = sc.grid.knot(j);
    const std::size_t lo = 2 * static_cast<std::size_t>(j);
    const std::size_t hi = 2 * static_cast<std::size_t>(T);
    const Hypothesis hyp = check_hypothesis(k, lo, hi, strict_threshold, true);
    const bool degenerate =
        std::any_of(denom.begin() + lo, denom.end(),
                    [](double d) { return !(d > 0.0); });

    double worst_gap = -kInf;
    double worst_measured = 0.0, worst_bound = kInf;
    Eigen::VectorXd worst_f;
    for (const Eigen::VectorXd& raw : probes) {
      const double np = lp_norm(raw, mu_t, p);
      if (!(np > 1e-12)) continue;
      const Eigen::VectorXd f = raw / np;
      const double lhs = abs_moment(snaps[lo].entries * f, mus[lo], p);
      double rhs = kInf;
      if (!degenerate) {
        const Eigen::VectorXd abs_f = f.cwiseAbs();
        std::vector<double> integrand(hi - lo + 1);
        for (std::size_t i = lo; i <= hi; ++i) {
          const Eigen::VectorXd v = snaps[i].entries * abs_f;
          const double m = abs_moment(v, mus[i], 0.5 * p);
          integrand[i - lo] = k.b[i] / denom[i] * m * m;
        }
        const double integral =
            integrand.size() < 2 ? 0.0 : simpson_tabulated(integrand, half);
        rhs = abs_moment(f, mu_t, p) + p * (p - 1.0) * integral;
      }
      if (lhs - rhs > worst_gap) {
        worst_gap = lhs - rhs;
        worst_measured = lhs;
        worst_bound = rhs;
        worst_f = f;
      }
    }
    rep.rows.push_back(make_row(
        s, t, hyp, worst_measured, worst_bound,
        std::max(1e-6, audit_tolerance(worst_bound)), "probe_battery",
        degenerate ? "denominator not positive; right side undefined"
                   : "moment recursion; worst of 1000 probes at unit p-norm",
        worst_f));

    const Hypothesis side_hyp =
        check_hypothesis(k, lo, hi, contraction_threshold);
    double side_integral;
    if (hi == lo) {
      side_integral = 0.0;
    } else {
      std::vector<double> integrand(hi - lo + 1);
      for (std::size_t i = lo; i <= hi; ++i) {
        if (!(k.b[i] > 0.0)) {
          integrand[i - lo] = 0.0;
        } else if (denom[i] > 0.0) {
          integrand[i - lo] = p * k.b[i] / denom[i];
        } else {
          integrand[i - lo] = kInf;
        }
      }
      side_integral = simpson_tabulated(integrand, half);
    }
    const double side_bound = 1.0 / (p + 3.0);
    rep.rows.push_back(make_row(s, t, side_hyp, side_integral, side_bound,
                                1e-9, "quadrature",
                                "integral side condition"));
  }
  return rep;
}

AuditReport audit_decay(const Scenario& sc, double p, double alpha, double beta,
                        double t) {
  if (!is_power_of_two_at_least_two(p)) {
    throw ConfigError("decay audit requires p to be a power of two (p >= 2)");
  }
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("decay audit requires alpha, beta >= 0");
  }
  const int T = knot_index(sc.grid, t, "t");
  const SampledConstants k = sample_constants(sc, half_step_times(sc.grid, T));
  std::vector<double> knot_times;
  for (int j = 0; j <= T; ++j) knot_times.push_back(sc.grid.knot(j));
  const auto snaps = solve_backward_snapshots(sc, knot_times, t);
  const ProbabilityVector mu_t = sc.measures.measure_at(t);

  AuditReport rep;
  rep.check_id = "decay";
  rep.scenario_name = sc.name;
  rep.parameters = {{"p", p}, {"alpha", alpha}, {"beta", beta}, {"t", t}};

  const auto threshold_two = [&](std::size_t i) {
    return scaled(0.5, k.a[i]) + scaled(alpha, k.c[i]);
  };
  const auto threshold_p = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]) + scaled(0.25 * beta * (p - 1.0), k.b[i]) +
           scaled(0.5 * alpha * p, k.c[i]);
  };
  const double ab = alpha * beta;
  const double factor = std::sqrt(2.0 + (ab > 0.0 ? 1.0 / ab : kInf));

  for (int j = 0; j <= T; ++j) {
    const double s = knot_times[j];
    const double tau = t - s;
    const std::size_t lo = 2 * static_cast<std::size_t>(j);
    const std::size_t hi = 2 * static_cast<std::size_t>(T);
    const ProbabilityVector mu_s = sc.measures.measure_at(s);

    const Hypothesis hyp2 = check_hypothesis(k, lo, hi, threshold_two);
    OperatorNormResult res2 =
        operator_norm_2_meanzero(snaps[j].entries, mu_s, mu_t);
    const double bound2 = std::exp(-alpha * tau);
    rep.rows.push_back(make_row(s, t, hyp2, res2.value, bound2,
                                audit_tolerance(bound2), res2.method,
                                "mean-zero quadratic decay", res2.maximizer));

    const Hypothesis hypP = check_hypothesis(k, lo, hi, threshold_p);
    OperatorNormResult resP =
        operator_norm_p_meanzero(snaps[j].entries, mu_s, mu_t, p);
    const double boundP = std::exp(-alpha * tau) * factor;
    rep.rows.push_back(make_row(
        s, t, hypP, resP.value, boundP,
        std::max(1e-6, audit_tolerance(boundP)), resP.method,
        std::isfinite(boundP) ? "mean-zero decay for exponent p"
                              : "constant unbounded at alpha beta = 0",
        resP.maximizer));
  }
  return rep;
}

AuditReport audit_general_decay(const Scenario& sc, double p, double gamma,
                                double kappa, double t) {
  if (!is_power_of_two_at_least_two(p)) {
    throw ConfigError(
        "general decay audit requires p to be a power of two (p >= 2)");
  }
  if (!(gamma >= 0.0)) throw ConfigError("general decay audit requires gamma >= 0");
  if (!(kappa > 0.0)) throw ConfigError("general decay audit requires kappa > 0");
  const int T = knot_index(sc.grid, t, "t");
  const SampledConstants k = sample_constants(sc, half_step_times(sc.grid, T));
  const auto snaps = solve_backward_snapshots(sc, k.times, t);
  std::vector<ProbabilityVector> mus;
  mus.reserve(k.times.size());
  for (double r : k.times) mus.push_back(sc.measures.measure_at(r));
  const ProbabilityVector& mu_t = mus.back();
  const double half = 0.5 * sc.grid.step();
  auto probes = probe_battery(sc.size(), 1000, 0x6e0caf3b51d9a271ULL);
  // Mix in exactly centered probes so the mean term of the quadratic bound
  // is exercised at zero as well.
  for (std::size_t idx = 3; idx < probes.size(); idx += 4) {
    probes[idx].array() -= expectation(probes[idx], mu_t);
  }

  AuditReport rep;
  rep.check_id = "general-decay";
  rep.scenario_name = sc.name;
  rep.parameters = {{"p", p}, {"gamma", gamma}, {"kappa", kappa}, {"t", t}};

  const auto threshold = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]) +
           scaled(0.25 * kappa * p * (p - 1.0), k.b[i]) +
           scaled(0.5 * gamma, k.c[i]);
  };

  for (int j = 0; j <= T; ++j) {
    const double s = sc.grid.knot(j);
    const double tau = t - s;
    const std::size_t lo = 2 * static_cast<std::size_t>(j);
    const std::size_t hi = 2 * static_cast<std::size_t>(T);
    const Hypothesis hyp = check_hypothesis(k, lo, hi, threshold);
    const double damp = std::exp(-gamma * tau);
    // (1 + 1/(kappa gamma)) (1 - e^{-gamma tau}), continued to tau/kappa at
    // gamma = 0.
    const double mean_coeff =
        gamma < 1e-12 ? tau / kappa
                      : (1.0 + 1.0 / (kappa * gamma)) * (-std::expm1(-gamma * tau));

    double worst2_gap = -kInf, worst2_measured = 0.0, worst2_bound = 0.0;
    Eigen::VectorXd worst2_f;
    double worstP_gap = -kInf, worstP_measured = 0.0, worstP_bound = 0.0;
    Eigen::VectorXd worstP_f;
    for (const Eigen::VectorXd& raw : probes) {
      const double n2 = lp_norm(raw, mu_t, 2.0);
      if (n2 > 1e-12) {
        const Eigen::VectorXd f = raw / n2;
        const double lhs = abs_moment(snaps[lo].entries * f, mus[lo], 2.0);
        const double mean = expectation(f, mu_t);
        const double rhs =
            damp * abs_moment(f, mu_t, 2.0) + mean_coeff * mean * mean;
        if (lhs - rhs > worst2_gap) {
          worst2_gap = lhs - rhs;
          worst2_measured = lhs;
          worst2_bound = rhs;
          worst2_f = f;
        }
      }
      const double np = lp_norm(raw, mu_t, p);
      if (np > 1e-12) {
        const Eigen::VectorXd f = raw / np;
        const double lhs = abs_moment(snaps[lo].entries * f, mus[lo], p);
        double integral = 0.0;
        if (hi > lo) {
          std::vector<double> integrand(hi - lo + 1);
          for (std::size_t i = lo; i <= hi; ++i) {
            const Eigen::VectorXd w = (snaps[i].entries * f).cwiseAbs();
            const double m = abs_moment(w, mus[i], 0.5 * p);
            integrand[i - lo] = std::exp(gamma * (t - k.times[i])) * m * m;
          }
          integral = simpson_tabulated(integrand, half);
        }
        const double rhs =
            damp * (abs_moment(f, mu_t, p) + (1.0 / kappa + gamma) * integral);
        if (lhs - rhs > worstP_gap) {
          worstP_gap = lhs - rhs;
          worstP_measured = lhs;
          worstP_bound = rhs;
          worstP_f = f;
        }
      }
    }
    rep.rows.push_back(make_row(
        s, t, hyp, worst2_measured, worst2_bound,
        std::max(1e-6, audit_tolerance(worst2_bound)), "probe_battery",
        "quadratic decay with mean term; worst of 1000 probes", worst2_f));
    rep.rows.push_back(make_row(
        s, t, hyp, worstP_measured, worstP_bound,
        std::max(1e-6, audit_tolerance(worstP_bound)), "probe_battery",
        "weighted-integral decay for exponent p; worst of 1000 probes",
        worstP_f));
  }
  return rep;
}

AuditReport audit_hypercontractivity(const Scenario& sc, double p, double q_exp,
                                     double s, double t) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw ConfigError("hypercontractivity audit requires finite p > 1");
  }
  if (!(q_exp >= p) || !std::isfinite(q_exp)) {
    throw ConfigError("hypercontractivity audit requires p <= q < infinity");
  }
  const int S = knot_index(sc.grid, s, "s");
  const int T = knot_index(sc.grid, t, "t");
  if (S > T) throw ConfigError("hypercontractivity audit requires s <= t");

  const ConstantsReport constants = compute_constants(sc);
  std::vector<double> integrand;
  integrand.reserve(T - S + 1);
  for (int j = S; j <= T; ++j) {
    const ConstantsRow& row = constants.rows.at(j);
    const double lam = sc.generator.speed()(row.time);
    integrand.push_back(
        lam == 0.0 ? 0.0
                   : (std::isfinite(row.c_ls_lower) ? lam / row.c_ls_lower : 0.0));
  }
  const double integral =
      integrand.size() < 2 ? 0.0 : simpson_tabulated(integrand, sc.grid.step());
  const double required = 0.25 * std::log((q_exp - 1.0) / (p - 1.0));

  const PropagatorMatrix qm = solve_backward(sc, s, t);
  const ProbabilityVector mu_s = sc.measures.measure_at(s);
  const ProbabilityVector mu_t = sc.measures.measure_at(t);
  const double growth = potential_negative_part_integral(sc, s, t);
  const double bound = std::exp(growth);
  OperatorNormResult norm = operator_norm_pq(qm.entries, mu_s, mu_t, p, q_exp);
  const double tol = std::max(1e-6, audit_tolerance(bound));

  AuditReport rep;
  rep.check_id = "hypercontractivity";
  rep.scenario_name = sc.name;
  rep.parameters = {{"p", p}, {"q", q_exp}, {"s", s}, {"t", t}};

  Hypothesis hyp1;
  hyp1.required = required;
  hyp1.margin = integral - required;
  hyp1.ok = hyp1.margin >= -1e-12 * std::max(1.0, std::abs(required));
  rep.rows.push_back(make_row(
      s, t, hyp1, norm.value, bound, tol, norm.method,
      "time condition with certified entropy constant; required threshold is "
      "the integral lower bound",
      norm.maximizer));

  Hypothesis hyp2;
  hyp2.required = required;
  hyp2.margin = 0.5 * integral - required;
  hyp2.ok = hyp2.margin >= -1e-12 * std::max(1.0, std::abs(required));
  rep.rows.push_back(make_row(
      s, t, hyp2, norm.value, bound, tol, norm.method,
      "time condition with entropy constant doubled for safety",
      norm.maximizer));
  return rep;
}

double RestrictedScenario::mass(double t) const {
  const ProbabilityVector mu = parent_measures.measure_at(t);
  double total = 0.0;
  for (int x : subset) total += mu[x];
  return total;
}

double RestrictedScenario::mass_rate(double t) const {
  const StateFunction h = parent_measures.potential_at(t);
  const ProbabilityVector cond = restricted.measures.measure_at(t);
  double out = 0.0;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    out += h(subset[i]) * cond[static_cast<int>(i)];
  }
  return out;
}

RestrictedScenario restrict_subset(const Scenario& sc,
                                   const std::vector<int>& subset_in) {
  std::vector<int> subset = subset_in;
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  if (subset.size() < 2) {
    throw ConfigError("subset must contain at least two states");
  }
  for (int x : subset) {
    if (x < 0 || x >= sc.size()) {
      throw ConfigError("subset index out of range: " + std::to_string(x));
    }
  }
  std::vector<char> inside(static_cast<std::size_t>(sc.size()), 0);
  for (int x : subset) inside[static_cast<std::size_t>(x)] = 1;

  for (int j = 0; j <= sc.grid.segments(); ++j) {
    const double u = sc.grid.knot(j);
    const QMatrix rates = sc.generator.rates_at(u);
    for (int x : subset) {
      for (int y = 0; y < sc.size(); ++y) {
        if (inside[static_cast<std::size_t>(y)]) continue;
        if (std::abs(rates(x, y)) > 1e-14) {
          throw NotInvariantError(
              "subset is not closed under the dynamics: rate " +
              sc.states.label(x) + " -> " + sc.states.label(y) +
              " is nonzero at time " + format_double(u));
        }
      }
    }
  }

  std::vector<std::string> labels;
  labels.reserve(subset.size());
  for (int x : subset) labels.push_back(sc.states.label(x));
  Scenario restricted{StateSpace(std::move(labels)),
                      sc.measures.restrict(subset),
                      sc.generator.restrict(subset),
                      sc.grid,
                      sc.solver,
                      std::nullopt,
                      sc.name + ":restricted"};
  // Recentering the potential can raise its sup on the subset, so the parent
  // step may exceed the restricted stability guard; clamp it.
  restricted.solver.step =
      std::min(restricted.solver.step, 0.999 * restricted.guard_step());
  for (int j = 0; j <= restricted.grid.segments(); ++j) {
    const double u = restricted.grid.knot(j);
    require_detailed_balance(restricted.generator.rates_at(u),
                             restricted.measures.measure_at(u), 1e-12);
  }
  return RestrictedScenario{std::move(restricted), std::move(subset),
                            sc.measures};
}

AuditReport audit_subset(const Scenario& sc, double p, double alpha,
                         double beta, double t) {
  if (!sc.subset.has_value()) {
    throw ConfigError("scenario does not declare a subset");
  }
  if (!is_power_of_two_at_least_two(p)) {
    throw ConfigError("subset audit requires p to be a power of two (p >= 2)");
  }
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("subset audit requires alpha, beta >= 0");
  }
  const RestrictedScenario rs = restrict_subset(sc, *sc.subset);
  const int T = knot_index(sc.grid, t, "t");
  std::vector<double> knot_times;
  for (int j = 0; j <= T; ++j) knot_times.push_back(sc.grid.knot(j));
  const auto snaps_full = solve_backward_snapshots(sc, knot_times, t);
  const auto snaps_res = solve_backward_snapshots(rs.restricted, knot_times, t);
  const SampledConstants k =
      sample_constants(rs.restricted, half_step_times(sc.grid, T));
  const ProbabilityVector cond_t = rs.restricted.measures.measure_at(t);
  const double mass_t = rs.mass(t);

  AuditReport rep;
  rep.check_id = "subset";
  rep.scenario_name = sc.name;
  rep.parameters = {{"p", p},
                    {"alpha", alpha},
                    {"beta", beta},
                    {"t", t},
                    {"subset_size", static_cast<double>(rs.subset.size())}};

  double identity_defect = 0.0;
  for (int j = 0; j <= T; ++j) {
    const double ratio = mass_t / rs.mass(knot_times[j]);
    const Eigen::MatrixXd block =
        snaps_full[j].entries(rs.subset, rs.subset);
    identity_defect = std::max(
        identity_defect,
        (block - ratio * snaps_res[j].entries).cwiseAbs().maxCoeff());
  }
  rep.rows.push_back(make_row(
      sc.grid.knot(0), t, trivial_hypothesis(), identity_defect, 0.0, 1e-8,
      "ode_cross_check",
      "block of the full solve vs mass ratio times restricted solve; max over "
      "start times"));

  const auto threshold_contraction = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]) + scaled(0.25 * p * (p + 3.0) * t, k.b[i]);
  };
  const auto threshold_two = [&](std::size_t i) {
    return scaled(0.5, k.a[i]) + scaled(alpha, k.c[i]);
  };
  const auto threshold_p = [&](std::size_t i) {
    return scaled(0.25 * p, k.a[i]) + scaled(0.25 * beta * (p - 1.0), k.b[i]) +
           scaled(0.5 * alpha * p, k.c[i]);
  };
  const double ab = alpha * beta;
  const double factor = std::sqrt(2.0 + (ab > 0.0 ? 1.0 / ab : kInf));

  for (int j = 0; j <= T; ++j) {
    const double s = knot_times[j];
    const double tau = t - s;
    const double ratio = mass_t / rs.mass(s);
    const std::size_t lo = 2 * static_cast<std::size_t>(j);
    const std::size_t hi = 2 * static_cast<std::size_t>(T);
    const Eigen::MatrixXd block =
        snaps_full[j].entries(rs.subset, rs.subset);
    const ProbabilityVector cond_s = rs.restricted.measures.measure_at(s);

    const Hypothesis hyp1 = check_hypothesis(k, lo, hi, threshold_contraction);
    OperatorNormResult res1 = operator_norm_pq(block, cond_s, cond_t, p, p);
    const double bound1 = kFourthRootOfTwo * ratio;
    rep.rows.push_back(make_row(
        s, t, hyp1, res1.value, bound1, audit_tolerance(bound1), res1.method,
        "conditional-norm contraction with mass ratio", res1.maximizer));

    const Hypothesis hyp2 = check_hypothesis(k, lo, hi, threshold_two);
    OperatorNormResult res2 = operator_norm_2_meanzero(block, cond_s, cond_t);
    const double bound2 = std::exp(-alpha * tau) * ratio;
    rep.rows.push_back(make_row(
        s, t, hyp2, res2.value, bound2, audit_tolerance(bound2), res2.method,
        "conditional mean-zero quadratic decay with mass ratio",
        res2.maximizer));

    const Hypothesis hyp3 = check_hypothesis(k, lo, hi, threshold_p);
    OperatorNormResult res3 = operator_norm_p_meanzero(block, cond_s, cond_t, p);
    const double bound3 = std::exp(-alpha * tau) * factor * ratio;
    rep.rows.push_back(make_row(
        s, t, hyp3, res3.value, bound3,
        std::max(1e-6, audit_tolerance(bound3)), res3.method,
        std::isfinite(bound3)
            ? "conditional mean-zero decay for exponent p with mass ratio"
            : "constant unbounded at alpha beta = 0",
        res3.maximizer));
  }
  return rep;
}

AuditReport audit_rough(const Scenario& sc, double s, double t) {
  const PropagatorMatrix qm = solve_backward(sc, s, t);
  const ProbabilityVector mu_s = sc.measures.measure_at(s);
  const ProbabilityVector mu_t = sc.measures.measure_at(t);
  const double growth = potential_negative_part_integral(sc, s, t);

  AuditReport rep;
  rep.check_id = "rough";
  rep.scenario_name = sc.name;
  rep.parameters = {{"s", s}, {"t", t}};

  OperatorNormResult res1 = operator_norm_pq(qm.entries, mu_s, mu_t, 1.0, 1.0);
  rep.rows.push_back(make_row(s, t, trivial_hypothesis(), res1.value, 1.0,
                              audit_tolerance(1.0), res1.method,
                              "L1 contraction", res1.maximizer));

  const auto probes = probe_battery(sc.size(), 1000, 0x0ddba11fedc0ffeeULL);
  double worst_eq = 0.0;
  Eigen::VectorXd worst_f;
  for (const Eigen::VectorXd& raw : probes) {
    Eigen::VectorXd f = raw.cwiseAbs();
    const double n1 = lp_norm(f, mu_t, 1.0);
    if (!(n1 > 1e-12)) continue;
    f /= n1;
    const double defect =
        std::abs(lp_norm(qm.entries * f, mu_s, 1.0) - 1.0);
    if (defect > worst_eq) {
      worst_eq = defect;
      worst_f = f;
    }
  }
  rep.rows.push_back(make_row(
      s, t, trivial_hypothesis(), worst_eq, 0.0, 1e-8, "probe_battery",
      "L1 equality on nonnegative functions; worst of 1000 probes", worst_f));

  const struct {
    double p;
    const char* note;
  } cases[] = {{2.0, "rough bound for exponent 2"},
               {4.0, "rough bound for exponent 4"},
               {kInf, "rough bound for exponent infinity"}};
  for (const auto& c : cases) {
    OperatorNormResult res = operator_norm_pq(qm.entries, mu_s, mu_t, c.p, c.p);
    const double exponent = std::isinf(c.p) ? 1.0 : (c.p - 1.0) / c.p;
    const double bound = std::exp(exponent * growth);
    rep.rows.push_back(make_row(s, t, trivial_hypothesis(), res.value, bound,
                                audit_tolerance(bound), res.method, c.note,
                                res.maximizer));
  }
  return rep;
}

}  // namespace fkprop
