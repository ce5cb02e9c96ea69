#include "fkprop/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "fkprop/numerics.hpp"

namespace fkprop {

namespace {

using MatrixFn = std::function<Eigen::MatrixXd(double)>;

// One classical RK4 step of dM/du = -A(u) M (left=true, backward form) or
// dM/du = M A(u) (left=false, forward form); h may be negative.
void rk4_step(const MatrixFn& a, bool left, double u, double h,
              Eigen::MatrixXd& m) {
  auto rhs = [&](double v, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    if (left) return -(a(v) * x);
    return x * a(v);
  };
  const Eigen::MatrixXd k1 = rhs(u, m);
  const Eigen::MatrixXd k2 = rhs(u + 0.5 * h, m + (0.5 * h) * k1);
  const Eigen::MatrixXd k3 = rhs(u + 0.5 * h, m + (0.5 * h) * k2);
  const Eigen::MatrixXd k4 = rhs(u + h, m + h * k3);
  m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Fixed-step integration from `from` to `to` (either direction), final
// partial step allowed. Step endpoints are computed from the anchors (never
// accumulated) and the last one is pinned to `to`, so RK stage times cannot
// drift outside [from, to] however the rounding falls.
void integrate(const MatrixFn& a, bool left, double from, double to,
               double step, Eigen::MatrixXd& m) {
  const double len = std::abs(to - from);
  if (len == 0.0) return;
  const double dir = to >= from ? 1.0 : -1.0;
  const auto full = static_cast<long>(std::floor(len / step + 1e-12));
  double rem = len - static_cast<double>(full) * step;
  if (rem <= step * 1e-9) rem = 0.0;
  const long total = full + (rem > 0.0 ? 1 : 0);
  for (long i = 0; i < total; ++i) {
    const double u0 = from + dir * static_cast<double>(i) * step;
    const double u1 =
        i + 1 == total ? to : from + dir * static_cast<double>(i + 1) * step;
    rk4_step(a, left, u0, u1 - u0, m);
  }
}

void check_solve_times(const Scenario& sc, double s, double t) {
  if (!(s >= 0.0) || !(s <= t)) {
    throw ConfigError("propagator: need 0 <= s <= t");
  }
  if (!sc.grid.contains(s) || !sc.grid.contains(t)) {
    throw ConfigError("propagator: times outside the scenario grid");
  }
}

PropagatorMatrix finalize(Eigen::MatrixXd m, double s, double t,
                          PropagatorMatrix::Kind kind, double step) {
  if (!m.allFinite()) {
    throw SolverError("propagator: non-finite entries (step too large?)");
  }
  PropagatorMatrix out;
  out.s = s;
  out.t = t;
  out.kind = kind;
  out.step = step;
  out.min_entry_raw = m.minCoeff();
  if (out.min_entry_raw < -1e-8) {
    throw SolverError("propagator: entry " + format_double(out.min_entry_raw) +
                      " below -1e-8; refine the solver step");
  }
  out.entries = m.cwiseMax(0.0);
  return out;
}

MatrixFn operator_fn(const Scenario& sc, bool markov) {
  if (markov) {
    return [&sc](double u) { return sc.markov_operator(u); };
  }
  return [&sc](double u) { return sc.weighted_operator(u); };
}

}  // namespace

PropagatorMatrix solve_backward(const Scenario& sc, double s, double t) {
  check_solve_times(sc, s, t);
  sc.validate_step(sc.solver.step);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sc.size(), sc.size());
  integrate(operator_fn(sc, false), /*left=*/true, t, s, sc.solver.step, m);
  return finalize(std::move(m), s, t, PropagatorMatrix::Kind::feynman_kac,
                  sc.solver.step);
}

PropagatorMatrix solve_forward(const Scenario& sc, double s, double t) {
  check_solve_times(sc, s, t);
  sc.validate_step(sc.solver.step);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sc.size(), sc.size());
  integrate(operator_fn(sc, false), /*left=*/false, s, t, sc.solver.step, m);
  return finalize(std::move(m), s, t, PropagatorMatrix::Kind::feynman_kac,
                  sc.solver.step);
}

PropagatorMatrix markov_propagator(const Scenario& sc, double s, double t) {
  check_solve_times(sc, s, t);
  sc.validate_step(sc.solver.step);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sc.size(), sc.size());
  integrate(operator_fn(sc, true), /*left=*/true, t, s, sc.solver.step, m);
  return finalize(std::move(m), s, t, PropagatorMatrix::Kind::markov,
                  sc.solver.step);
}

std::vector<PropagatorMatrix> solve_backward_snapshots(
    const Scenario& sc, std::span<const double> s_values, double t,
    bool markov) {
  if (s_values.empty()) return {};
  for (std::size_t i = 0; i + 1 < s_values.size(); ++i) {
    if (!(s_values[i] <= s_values[i + 1])) {
      throw ConfigError("solve_backward_snapshots: s values must be ascending");
    }
  }
  check_solve_times(sc, s_values.front(), t);
  check_solve_times(sc, s_values.back(), t);
  sc.validate_step(sc.solver.step);
  const MatrixFn a = operator_fn(sc, markov);
  const auto kind = markov ? PropagatorMatrix::Kind::markov
                           : PropagatorMatrix::Kind::feynman_kac;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sc.size(), sc.size());
  std::vector<PropagatorMatrix> out(s_values.size());
  double cursor = t;
  for (std::size_t k = s_values.size(); k-- > 0;) {
    integrate(a, /*left=*/true, cursor, s_values[k], sc.solver.step, m);
    cursor = s_values[k];
    out[k] = finalize(m, cursor, t, kind, sc.solver.step);
  }
  return out;
}

double potential_negative_part_integral(const Scenario& sc, double s, double t) {
  if (s == t) return 0.0;
  return simpson_with_step(
      [&](double r) {
        const StateFunction h = sc.measures.potential_at(r);
        return std::max(0.0, -h.minCoeff());
      },
      s, t, sc.solver.step);
}

std::string PropagatorMatrix::to_csv(const StateSpace& states) const {
  if (entries.rows() != states.size()) {
    throw DimensionError("PropagatorMatrix::to_csv: label count mismatch");
  }
  std::ostringstream os;
  os << "# s=" << format_double(s) << " t=" << format_double(t) << " kind="
     << (kind == Kind::feynman_kac ? "feynman_kac" : "markov")
     << " step=" << format_double(step) << "\n";
  os << "from,to,value\n";
  for (int x = 0; x < entries.rows(); ++x) {
    for (int y = 0; y < entries.cols(); ++y) {
      os << states.label(x) << ',' << states.label(y) << ','
         << format_double(entries(x, y)) << "\n";
    }
  }
  return os.str();
}

PropagatorDiagnostics propagator_diagnostics(const Scenario& sc, double s,
                                             double t) {
  check_solve_times(sc, s, t);
  PropagatorDiagnostics d;
  d.s = s;
  d.t = t;
  d.midpoint = 0.5 * (s + t);

  const PropagatorMatrix q = solve_backward(sc, s, t);
  const PropagatorMatrix p = markov_propagator(sc, s, t);
  d.min_entry = q.min_entry_raw;
  d.markov_row_sum_defect =
      (p.entries.rowwise().sum().array() - 1.0).abs().maxCoeff();

  if (t > s) {
    const PropagatorMatrix q_sm = solve_backward(sc, s, d.midpoint);
    const PropagatorMatrix q_mt = solve_backward(sc, d.midpoint, t);
    d.chapman_defect =
        (q_sm.entries * q_mt.entries - q.entries).cwiseAbs().maxCoeff();
  }

  const Eigen::VectorXd pushed = q.entries.transpose() * sc.measures.measure_at(s).weights();
  d.invariance_defect =
      (pushed - sc.measures.measure_at(t).weights()).cwiseAbs().sum();

  d.growth_integral = potential_negative_part_integral(sc, s, t);
  d.pointwise_margin =
      (q.entries - std::exp(d.growth_integral) * p.entries).maxCoeff();
  return d;
}

std::string PropagatorDiagnostics::to_json() const {
  std::ostringstream os;
  os << "{\n"
     << "  \"s\": " << format_double(s) << ",\n"
     << "  \"t\": " << format_double(t) << ",\n"
     << "  \"midpoint\": " << format_double(midpoint) << ",\n"
     << "  \"chapman_defect\": " << format_double(chapman_defect) << ",\n"
     << "  \"min_entry\": " << format_double(min_entry) << ",\n"
     << "  \"invariance_defect\": " << format_double(invariance_defect) << ",\n"
     << "  \"pointwise_margin\": " << format_double(pointwise_margin) << ",\n"
     << "  \"markov_row_sum_defect\": " << format_double(markov_row_sum_defect)
     << ",\n"
     << "  \"growth_integral\": " << format_double(growth_integral) << "\n"
     << "}\n";
  return os.str();
}

}  // namespace fkprop
