#include "fkprop/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fkprop/io.hpp"
#include "fkprop/numerics.hpp"
#include "fkprop/rng.hpp"

namespace fkprop {

namespace {

// E(f,g) = f^T G g with G = -(D Q + Q^T D)/2, D = diag(mu). Symmetric.
Eigen::MatrixXd dirichlet_matrix(const QMatrix& rates,
                                 const ProbabilityVector& mu) {
  const Eigen::MatrixXd dq =
      mu.weights().asDiagonal() * rates.entries();
  return -0.5 * (dq + dq.transpose());
}

struct ProjectedDirichlet {
  MeanZeroBasis basis;
  Eigen::MatrixXd form;                 // basis^T G basis, positive definite
  Eigen::LLT<Eigen::MatrixXd> llt;
  double min_pivot = 0.0;

  ProjectedDirichlet(const QMatrix& rates, const ProbabilityVector& mu)
      : basis(MeanZeroBasis::build(mu)) {
    form = basis.columns.transpose() * dirichlet_matrix(rates, mu) *
           basis.columns;
    form = 0.5 * (form + form.transpose().eval());
    llt.compute(form);
    if (llt.info() != Eigen::Success) {
      throw ReducibleChainError(
          "projected Dirichlet form is not positive definite "
          "(reducible chain: constants are infinite)");
    }
    const double min_diag = Eigen::MatrixXd(llt.matrixL()).diagonal().minCoeff();
    min_pivot = min_diag * min_diag;
    if (!(min_pivot > 0.0) || !std::isfinite(min_pivot)) {
      throw ReducibleChainError(
          "projected Dirichlet form is numerically singular");
    }
  }
};

void check_centered(const StateFunction& h, const ProbabilityVector& mu) {
  if (h.size() != mu.weights().size()) {
    throw DimensionError("weighted constant: h dimension mismatch");
  }
  if (std::abs(expectation(h, mu)) > 1e-10) {
    throw PreconditionError("weighted constant: h must be centered under mu");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// MeanZeroBasis

Eigen::MatrixXd MeanZeroBasis::complement_of_sqrt(const ProbabilityVector& mu) {
  const int n = mu.size();
  Eigen::VectorXd v = mu.weights().array().sqrt().matrix();
  Eigen::VectorXd w = v;
  w(0) += 1.0;  // v has positive entries, so no cancellation here
  w /= w.norm();
  const Eigen::MatrixXd householder =
      Eigen::MatrixXd::Identity(n, n) - 2.0 * w * w.transpose();
  // First column equals -v; the rest span its orthogonal complement.
  return householder.rightCols(n - 1);
}

MeanZeroBasis MeanZeroBasis::build(const ProbabilityVector& mu) {
  MeanZeroBasis out;
  const Eigen::VectorXd inv_sqrt =
      mu.weights().array().rsqrt().matrix();
  out.columns = inv_sqrt.asDiagonal() * complement_of_sqrt(mu);
  return out;
}

// ---------------------------------------------------------------------------
// Poincare constant

ConstantResult poincare_constant_full(const QMatrix& rates,
                                      const ProbabilityVector& mu) {
  require_detailed_balance(rates, mu, 1e-10);
  const int n = rates.size();
  Eigen::MatrixXd s(n, n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      s(x, y) = -rates(x, y) * std::sqrt(mu[x] / mu[y]);
    }
  }
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) {
    throw PreconditionError(
        "symmetrized generator asymmetric (detailed balance broken): " +
        format_double(asym));
  }
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error("poincare_constant: eigensolver failed");
  }
  const double gap = es.eigenvalues()(1);  // eigenvalues ascending; (0) ~ 0
  ConstantResult out;
  const Eigen::VectorXd inv_sqrt = mu.weights().array().rsqrt().matrix();
  if (gap > 1e-10) {
    out.maximizer = inv_sqrt.asDiagonal() * es.eigenvectors().col(1);
    out.value = 1.0 / gap;
  } else {
    // Reducible: the null space is at least two-dimensional. Certify with a
    // zero-energy direction orthogonal to sqrt(mu), i.e. a mean-zero function
    // of positive variance that the Dirichlet form cannot see.
    const Eigen::VectorXd root = mu.weights().cwiseSqrt();
    Eigen::VectorXd v =
        es.eigenvectors().col(1) - root.dot(es.eigenvectors().col(1)) * root;
    if (v.norm() < 1e-6) {
      v = es.eigenvectors().col(0) - root.dot(es.eigenvectors().col(0)) * root;
    }
    v.normalize();
    out.maximizer = inv_sqrt.asDiagonal() * v;
    out.value = kInf;
  }
  return out;
}

double poincare_constant(const QMatrix& rates, const ProbabilityVector& mu) {
  return poincare_constant_full(rates, mu).value;
}

// ---------------------------------------------------------------------------
// Weighted constants

ConstantResult weighted_poincare_quadratic(const QMatrix& rates,
                                           const ProbabilityVector& mu,
                                           const StateFunction& h) {
  require_detailed_balance(rates, mu, 1e-10);
  check_centered(h, mu);
  ProjectedDirichlet pd(rates, mu);
  const Eigen::VectorXd neg_h_mu =
      (-h.array() * mu.weights().array()).matrix();
  Eigen::MatrixXd np = pd.basis.columns.transpose() *
                       neg_h_mu.asDiagonal() * pd.basis.columns;
  np = 0.5 * (np + np.transpose().eval());

  const Eigen::MatrixXd l = pd.llt.matrixL();
  const Eigen::MatrixXd y =
      l.triangularView<Eigen::Lower>().solve(np);
  const Eigen::MatrixXd z =
      l.triangularView<Eigen::Lower>().solve(y.transpose().eval());
  const Eigen::MatrixXd w = 0.5 * (z + z.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
  if (es.info() != Eigen::Success) {
    throw Error("weighted_poincare_quadratic: eigensolver failed");
  }
  const int last = static_cast<int>(w.rows()) - 1;
  ConstantResult out;
  out.value = es.eigenvalues()(last);
  const Eigen::VectorXd c = l.transpose()
                                .triangularView<Eigen::Upper>()
                                .solve(es.eigenvectors().col(last));
  out.maximizer = pd.basis.columns * c;
  out.min_pivot = pd.min_pivot;
  out.pivot_warning = pd.min_pivot < 1e-12;
  return out;
}

ConstantResult weighted_poincare_linear(const QMatrix& rates,
                                        const ProbabilityVector& mu,
                                        const StateFunction& h) {
  require_detailed_balance(rates, mu, 1e-10);
  check_centered(h, mu);
  ProjectedDirichlet pd(rates, mu);
  const Eigen::VectorXd v =
      pd.basis.columns.transpose() * (h.array() * mu.weights().array()).matrix();
  const Eigen::VectorXd g = pd.llt.solve(v);
  ConstantResult out;
  out.value = v.dot(g);
  out.maximizer = pd.basis.columns * g;
  out.min_pivot = pd.min_pivot;
  out.pivot_warning = pd.min_pivot < 1e-12;
  return out;
}

std::pair<double, double> comparison_bounds(double c,
                                            const ProbabilityVector& mu,
                                            const StateFunction& h) {
  if (!std::isfinite(c)) return {kInf, kInf};
  const double max_neg_part = std::max(0.0, -h.minCoeff());
  return {c * max_neg_part, c * variance(h, mu)};
}

// ---------------------------------------------------------------------------
// Log-Sobolev lower bound

namespace {

// Entropy/energy ratio with evaluations that stay accurate arbitrarily close
// to constant functions, where numerator and denominator both vanish to
// second order and the naive formulas are pure cancellation noise. Energy is
// summed over edge differences; entropy is summed over the second-order
// remainders psi(e) = (1+e)log1p(e) - e of the relative deviations
// e_x = f(x)^2/||f||^2 - 1, themselves built from pairwise differences. The
// first-order entropy term sum mu_x e_x vanishes identically (antisymmetric
// double sum), so it is dropped analytically instead of being cancelled in
// floating point.
class EntropyRatio {
 public:
  EntropyRatio(const QMatrix& rates, const ProbabilityVector& mu)
      : mu_(mu.weights()), g_(dirichlet_matrix(rates, mu)) {
    for (int x = 0; x < rates.size(); ++x) {
      for (int y = 0; y < rates.size(); ++y) {
        if (x != y && rates(x, y) > 0.0) {
          edges_.push_back({x, y, 0.5 * mu_(x) * rates(x, y)});
        }
      }
    }
  }

  double energy(const Eigen::VectorXd& f) const {
    double acc = 0.0;
    for (const auto& e : edges_) {
      const double d = f(e.y) - f(e.x);
      acc += e.w * d * d;
    }
    return acc;
  }

  double l2sq(const Eigen::VectorXd& f) const { return f.cwiseAbs2().dot(mu_); }

  // e_x = f(x)^2/s - 1 as sum_y mu_y (f(x)-f(y))(f(x)+f(y)) / s: differences
  // of nearby values are exact, so the deviations keep full relative accuracy
  // however close f is to constant.
  Eigen::VectorXd deviations(const Eigen::VectorXd& f, double s) const {
    const Eigen::Index n = f.size();
    Eigen::VectorXd e(n);
    for (Eigen::Index x = 0; x < n; ++x) {
      double acc = 0.0;
      for (Eigen::Index y = 0; y < n; ++y) {
        acc += mu_(y) * (f(x) - f(y)) * (f(x) + f(y));
      }
      e(x) = acc / s;
    }
    return e;
  }

  // (1+e)log1p(e) - e without cancellation for small e.
  static double second_order_remainder(double e) {
    if (std::abs(e) < 1e-3) {
      return e * e *
             (0.5 + e * (-1.0 / 6.0 + e * (1.0 / 12.0 + e * (-1.0 / 20.0))));
    }
    return (1.0 + e) * std::log1p(e) - e;
  }

  // Ent(f^2) = sum mu f^2 log(f^2 / ||f||^2).
  double entropy(const Eigen::VectorXd& f) const {
    const double s = l2sq(f);
    if (!(s > 0.0)) return 0.0;
    const Eigen::VectorXd e = deviations(f, s);
    if (e.cwiseAbs().maxCoeff() <= 0.5) {
      double acc = 0.0;
      for (Eigen::Index x = 0; x < e.size(); ++x) {
        acc += mu_(x) * second_order_remainder(e(x));
      }
      return s * acc;
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double fsq = f(i) * f(i);
      if (fsq > 0.0) acc += mu_(i) * fsq * std::log(fsq / s);
    }
    return acc;
  }

  double ratio(const Eigen::VectorXd& f) const {
    const double e = energy(f);
    if (!(e > 0.0)) return 0.0;
    return entropy(f) / e;
  }

  Eigen::VectorXd ratio_gradient(const Eigen::VectorXd& f) const {
    const double e = energy(f);
    const double num = entropy(f);
    const double s = l2sq(f);
    const Eigen::VectorXd dev = deviations(f, s);
    Eigen::VectorXd grad_num(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      // d/df_i Ent(f^2) = 2 mu_i f_i log(f_i^2 / s) = 2 mu_i f_i log1p(e_i)
      grad_num(i) = dev(i) > -1.0
                        ? 2.0 * mu_(i) * f(i) * std::log1p(dev(i))
                        : 0.0;
    }
    const Eigen::VectorXd grad_en = 2.0 * (g_ * f);
    return (grad_num * e - num * grad_en) / (e * e);
  }

 private:
  struct Edge {
    int x, y;
    double w;
  };
  Eigen::VectorXd mu_;
  Eigen::MatrixXd g_;  // quadratic form, used for the energy gradient only
  std::vector<Edge> edges_;
};

}  // namespace

LogSobolevResult log_sobolev_lower_bound(const QMatrix& rates,
                                         const ProbabilityVector& mu,
                                         const LogSobolevOptions& opt) {
  require_detailed_balance(rates, mu, 1e-10);
  const ConstantResult gap = poincare_constant_full(rates, mu);
  if (!std::isfinite(gap.value)) {
    throw ReducibleChainError("log_sobolev_lower_bound: reducible chain");
  }
  const int n = rates.size();
  const EntropyRatio fn(rates, mu);

  // Seed battery: spectral eigenvectors, centered indicators, fixed random
  // draws, and near-constant perturbations along the gap eigenvector (the
  // entropy/energy ratio often approaches its supremum as f -> const, where
  // plain ascent stalls; these candidates certify that regime).
  std::vector<Eigen::VectorXd> seeds;
  {
    Eigen::MatrixXd s(n, n);
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        s(x, y) = -rates(x, y) * std::sqrt(mu[x] / mu[y]);
      }
    }
    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const Eigen::VectorXd inv_sqrt = mu.weights().array().rsqrt().matrix();
    for (int k = 1; k < n; ++k) {  // k = 0 is the constant direction
      seeds.push_back(inv_sqrt.asDiagonal() * es.eigenvectors().col(k));
    }
  }
  for (int x = 0; x < n; ++x) {
    Eigen::VectorXd f = Eigen::VectorXd::Constant(n, -mu[x]);
    f(x) += 1.0;
    seeds.push_back(std::move(f));
  }
  {
    SplitMix64 rng(opt.rng_seed);
    for (int k = 0; k < opt.random_seeds; ++k) {
      Eigen::VectorXd f(n);
      for (int i = 0; i < n; ++i) f(i) = 2.0 * rng.uniform() - 1.0;
      seeds.push_back(std::move(f));
    }
  }
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    // Both signs: the ratio's first-order term in eps can have either sign.
    seeds.push_back(Eigen::VectorXd::Ones(n) + eps * gap.maximizer);
    seeds.push_back(Eigen::VectorXd::Ones(n) - eps * gap.maximizer);
  }

  LogSobolevResult best;
  best.maximizer = Eigen::VectorXd::Zero(n);
  long total_iters = 0;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    Eigen::VectorXd f = seeds[si];
    const double spread = f.maxCoeff() - f.minCoeff();
    double norm = std::sqrt(fn.l2sq(f));
    if (!(norm > 0.0) || spread < 1e-14) continue;  // constant: ratio 0
    f /= norm;
    double r = fn.ratio(f);
    double step = 0.1;
    bool converged = false;
    int iters = 0;
    const int budget = std::max(1, opt.max_iterations /
                                       static_cast<int>(seeds.size()));
    while (iters < budget) {
      ++iters;
      const Eigen::VectorXd grad = fn.ratio_gradient(f);
      Eigen::VectorXd trial = f + step * grad;
      const double tnorm = std::sqrt(fn.l2sq(trial));
      if (tnorm > 0.0) {
        trial /= tnorm;
        const double tr = fn.ratio(trial);
        if (tr > r) {
          const double improvement = tr - r;
          f = trial;
          r = tr;
          step *= 1.25;
          if (improvement < opt.rel_tol * std::max(1.0, std::abs(r))) {
            converged = true;
            break;
          }
          continue;
        }
      }
      step *= 0.5;
      if (step < 1e-14) {
        converged = true;
        break;
      }
    }
    total_iters += iters;
    if (r > best.value) {
      best.value = r;
      best.maximizer = f;
      best.best_seed = static_cast<int>(si);
      best.converged = converged;
    }
  }
  best.iterations = total_iters;
  return best;
}

// ---------------------------------------------------------------------------
// ConstantsReport

bool ConstantsReport::any_infinite() const {
  return std::any_of(rows.begin(), rows.end(), [](const ConstantsRow& r) {
    return !std::isfinite(r.c) || !std::isfinite(r.a) || !std::isfinite(r.b);
  });
}

const ConstantsRow& ConstantsReport::row_at(double time) const {
  for (const auto& r : rows) {
    if (std::abs(r.time - time) <= 1e-9) return r;
  }
  throw ConfigError("ConstantsReport: no row at time " + format_double(time));
}

double ConstantsReport::interpolate(double time,
                                    double ConstantsRow::*field) const {
  if (rows.empty()) throw ConfigError("ConstantsReport: no rows");
  if (time <= rows.front().time) return rows.front().*field;
  if (time >= rows.back().time) return rows.back().*field;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (time <= rows[i].time) {
      const double t0 = rows[i - 1].time, t1 = rows[i].time;
      const double w = (time - t0) / (t1 - t0);
      return (1.0 - w) * (rows[i - 1].*field) + w * (rows[i].*field);
    }
  }
  return rows.back().*field;  // unreachable: covered by the range checks
}

std::string ConstantsReport::to_csv() const {
  std::ostringstream os;
  os << "t,c,a,b,c_ls_lower,a_comparison,b_comparison,min_pivot,"
        "ls_iterations,ls_converged\n";
  for (const auto& r : rows) {
    os << format_double(r.time) << ',' << format_double(r.c) << ','
       << format_double(r.a) << ',' << format_double(r.b) << ','
       << format_double(r.c_ls_lower) << ',' << format_double(r.a_comparison)
       << ',' << format_double(r.b_comparison) << ','
       << format_double(r.min_pivot) << ',' << r.ls_iterations << ','
       << (r.ls_converged ? 1 : 0) << "\n";
  }
  return os.str();
}

std::string ConstantsReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario_name;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"t", json_number(r.time)},
                         {"c", json_number(r.c)},
                         {"a", json_number(r.a)},
                         {"b", json_number(r.b)},
                         {"c_ls_lower", json_number(r.c_ls_lower)},
                         {"a_comparison", json_number(r.a_comparison)},
                         {"b_comparison", json_number(r.b_comparison)},
                         {"min_pivot", json_number(r.min_pivot)},
                         {"ls_iterations", r.ls_iterations},
                         {"ls_converged", r.ls_converged}});
  }
  return j.dump(2) + "\n";
}

ConstantsReport compute_constants(const Scenario& sc,
                                  const ConstantsOptions& opt) {
  ConstantsReport report;
  report.scenario_name = sc.name;
  for (double t : sc.grid.knots()) {
    const QMatrix q = sc.generator.rates_at(t);
    const ProbabilityVector mu = sc.measures.measure_at(t);
    const StateFunction h = sc.measures.potential_at(t);
    ConstantsRow row;
    row.time = t;
    row.c = poincare_constant(q, mu);
    if (!std::isfinite(row.c)) {
      row.a = row.b = row.c_ls_lower = kInf;
      row.a_comparison = row.b_comparison = kInf;
    } else {
      const ConstantResult a = weighted_poincare_quadratic(q, mu, h);
      const ConstantResult b = weighted_poincare_linear(q, mu, h);
      row.a = a.value;
      row.b = b.value;
      row.min_pivot = a.min_pivot;
      const auto [ac, bc] = comparison_bounds(row.c, mu, h);
      row.a_comparison = ac;
      row.b_comparison = bc;
      if (opt.with_log_sobolev) {
        const LogSobolevResult ls = log_sobolev_lower_bound(q, mu, opt.ls);
        row.c_ls_lower = ls.value;
        row.ls_iterations = ls.iterations;
        row.ls_converged = ls.converged;
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace fkprop
