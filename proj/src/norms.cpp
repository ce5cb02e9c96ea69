#include "fkprop/norms.hpp"

#include <algorithm>
#include <cmath>

#include "fkprop/inequalities.hpp"
#include "fkprop/numerics.hpp"
#include "fkprop/rng.hpp"

namespace fkprop {

namespace {

constexpr double kBoydEta = 1e-12;
constexpr double kBoydRelTol = 1e-10;
constexpr int kBoydMaxIter = 5000;
constexpr int kProbeCount = 10000;
constexpr std::uint64_t kProbeSeed = 0x9a1fb0c5d3ee7214ULL;

void check_sizes(const Eigen::MatrixXd& kernel, const ProbabilityVector& mu_s,
                 const ProbabilityVector& mu_t) {
  if (kernel.rows() != mu_s.size() || kernel.cols() != mu_t.size()) {
    throw DimensionError("operator norm: kernel/measure size mismatch");
  }
}

double ratio_pq(const Eigen::MatrixXd& kernel, const ProbabilityVector& mu_s,
                const ProbabilityVector& mu_t, double p, double q,
                const Eigen::VectorXd& f) {
  const double denom = lp_norm(f, mu_t, p);
  if (!(denom > 0.0)) return 0.0;
  return lp_norm(kernel * f, mu_s, q) / denom;
}

}  // namespace

double lp_norm(const StateFunction& f, const ProbabilityVector& mu, double p) {
  if (f.size() != mu.size()) throw DimensionError("lp_norm: size mismatch");
  if (std::isinf(p)) return f.cwiseAbs().maxCoeff();
  if (!(p >= 1.0)) throw ConfigError("lp_norm: p must be >= 1");
  double acc = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    acc += std::pow(std::abs(f(i)), p) * mu[i];
  }
  return std::pow(acc, 1.0 / p);
}

OperatorNormResult operator_norm_2(const Eigen::MatrixXd& kernel,
                                   const ProbabilityVector& mu_s,
                                   const ProbabilityVector& mu_t) {
  check_sizes(kernel, mu_s, mu_t);
  const Eigen::MatrixXd m = mu_s.weights().array().sqrt().matrix().asDiagonal() *
                            kernel *
                            mu_t.weights().array().rsqrt().matrix().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  OperatorNormResult out;
  out.value = svd.singularValues()(0);
  out.method = "exact_svd";
  Eigen::VectorXd v = svd.matrixV().col(0);
  if (v.sum() < 0.0) v = -v;
  out.maximizer = mu_t.weights().array().rsqrt().matrix().asDiagonal() * v;
  return out;
}

OperatorNormResult operator_norm_2_meanzero(const Eigen::MatrixXd& kernel,
                                            const ProbabilityVector& mu_s,
                                            const ProbabilityVector& mu_t) {
  check_sizes(kernel, mu_s, mu_t);
  const Eigen::MatrixXd u = MeanZeroBasis::complement_of_sqrt(mu_t);
  const Eigen::MatrixXd m = mu_s.weights().array().sqrt().matrix().asDiagonal() *
                            kernel *
                            mu_t.weights().array().rsqrt().matrix().asDiagonal() *
                            u;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  OperatorNormResult out;
  out.value = svd.singularValues()(0);
  out.method = "exact_svd";
  Eigen::VectorXd v = svd.matrixV().col(0);
  if (v.sum() < 0.0) v = -v;
  out.maximizer =
      mu_t.weights().array().rsqrt().matrix().asDiagonal() * (u * v);
  return out;
}

namespace {

struct BoydOutcome {
  double value = 0.0;
  Eigen::VectorXd maximizer;
  long iterations = 0;
  bool converged = false;
};

// Alternating dual-exponent power iteration for the L^p(mu_t) -> L^q(mu_s)
// norm of an entrywise-positive kernel; evaluates the final ratio on the
// *original* kernel so the outcome is a certified lower bound.
BoydOutcome boyd_iteration(const Eigen::MatrixXd& lifted,
                           const Eigen::MatrixXd& original,
                           const ProbabilityVector& mu_s,
                           const ProbabilityVector& mu_t, double p, double q) {
  const int n = static_cast<int>(lifted.cols());
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Ones(n));
  {
    SplitMix64 rng(0x7be0d1c2a54939f1ULL);
    for (int k = 0; k < 8; ++k) {
      Eigen::VectorXd f(n);
      for (int i = 0; i < n; ++i) f(i) = rng.uniform() + 0.01;
      starts.push_back(std::move(f));
    }
  }

  BoydOutcome best;
  for (auto& f0 : starts) {
    Eigen::VectorXd f = f0;
    double sigma_prev = -1.0;
    bool converged = false;
    long iters = 0;
    for (int it = 0; it < kBoydMaxIter; ++it) {
      ++iters;
      f /= lp_norm(f, mu_t, p);
      const Eigen::VectorXd g = lifted * f;
      const double sigma = lp_norm(g, mu_s, q);
      if (!(sigma > 0.0)) break;
      if (sigma_prev > 0.0 &&
          std::abs(sigma - sigma_prev) <= kBoydRelTol * sigma) {
        converged = true;
        break;
      }
      sigma_prev = sigma;
      // Dual step: u is the norming functional of g in L^q(mu_s), pulled
      // back through the adjoint and re-expressed as an L^p element.
      const Eigen::VectorXd u = (g / sigma).array().pow(q - 1.0).matrix();
      Eigen::VectorXd h(n);
      for (int y = 0; y < n; ++y) {
        double acc = 0.0;
        for (int x = 0; x < lifted.rows(); ++x) {
          acc += mu_s[x] * lifted(x, y) * u(x);
        }
        h(y) = acc / mu_t[y];
      }
      f = h.array().pow(1.0 / (p - 1.0)).matrix();
    }
    const double certified = ratio_pq(original, mu_s, mu_t, p, q, f);
    best.iterations += iters;
    if (certified > best.value) {
      best.value = certified;
      best.maximizer = f / lp_norm(f, mu_t, p);
      best.converged = converged;
    }
  }
  return best;
}

}  // namespace

OperatorNormResult operator_norm_pq(const Eigen::MatrixXd& kernel,
                                    const ProbabilityVector& mu_s,
                                    const ProbabilityVector& mu_t, double p,
                                    double q) {
  check_sizes(kernel, mu_s, mu_t);
  if (kernel.minCoeff() < 0.0) {
    throw ConfigError("operator_norm_pq: kernel must be entrywise >= 0");
  }
  if (!(p >= 1.0) || !(q >= p)) {
    throw ConfigError("operator_norm_pq: need 1 <= p <= q");
  }

  OperatorNormResult out;
  const bool p_inf = std::isinf(p);
  const bool q_inf = std::isinf(q);
  if (p == 1.0 && q == 1.0) {
    // Attained at a scaled indicator: max_y (sum_x mu_s(x) K(x,y)) / mu_t(y).
    int best_y = 0;
    double best = -1.0;
    for (int y = 0; y < mu_t.size(); ++y) {
      const double v = mu_s.weights().dot(kernel.col(y)) / mu_t[y];
      if (v > best) {
        best = v;
        best_y = y;
      }
    }
    out.value = best;
    out.method = "closed_form";
    out.maximizer = Eigen::VectorXd::Zero(mu_t.size());
    out.maximizer(best_y) = 1.0;
    return out;
  }
  if (p_inf && q_inf) {
    // Attained at f = 1: largest row sum.
    out.value = kernel.rowwise().sum().maxCoeff();
    out.method = "closed_form";
    out.maximizer = Eigen::VectorXd::Ones(mu_t.size());
    return out;
  }
  if (p == 2.0 && q == 2.0) {
    return operator_norm_2(kernel, mu_s, mu_t);
  }
  if (p_inf || q_inf || !(p > 1.0)) {
    throw ConfigError(
        "operator_norm_pq: mixed-endpoint exponent pairs are not supported "
        "(need 1 < p <= q < infinity or p = q in {1, infinity})");
  }

  // Certified random lower bound (includes the coordinate indicators).
  double probe_best = 0.0;
  Eigen::VectorXd probe_arg = Eigen::VectorXd::Ones(mu_t.size());
  {
    SplitMix64 rng(kProbeSeed);
    Eigen::VectorXd f(mu_t.size());
    for (int k = 0; k < kProbeCount; ++k) {
      for (int i = 0; i < f.size(); ++i) f(i) = rng.uniform();
      const double r = ratio_pq(kernel, mu_s, mu_t, p, q, f);
      if (r > probe_best) {
        probe_best = r;
        probe_arg = f;
      }
    }
    for (int y = 0; y < mu_t.size(); ++y) {
      f.setZero();
      f(y) = 1.0;
      const double r = ratio_pq(kernel, mu_s, mu_t, p, q, f);
      if (r > probe_best) {
        probe_best = r;
        probe_arg = f;
      }
    }
  }

  auto lift = [&](double eta) {
    Eigen::MatrixXd l = kernel;
    for (int x = 0; x < l.rows(); ++x) {
      for (int y = 0; y < l.cols(); ++y) {
        if (l(x, y) == 0.0) l(x, y) = eta;
      }
    }
    return l;
  };
  const BoydOutcome primary =
      boyd_iteration(lift(kBoydEta), kernel, mu_s, mu_t, p, q);
  const BoydOutcome check =
      boyd_iteration(lift(kBoydEta / 10.0), kernel, mu_s, mu_t, p, q);

  out.method = "boyd_power";
  out.iterations = primary.iterations + check.iterations;
  out.converged = primary.converged;
  out.sensitivity_flag =
      std::abs(primary.value - check.value) >
      1e-9 * std::max(1.0, std::max(primary.value, check.value));
  out.value = primary.value;
  out.maximizer = primary.maximizer;
  out.probe_lower = probe_best;
  if (check.value > out.value) {
    out.value = check.value;
    out.maximizer = check.maximizer;
  }
  if (probe_best > out.value) {
    out.value = probe_best;
    out.maximizer = probe_arg / lp_norm(probe_arg, mu_t, p);
    out.method = "probe_lower_bound";
  }
  return out;
}

OperatorNormResult operator_norm_pq(const PropagatorMatrix& q,
                                    const ProbabilityVector& mu_s,
                                    const ProbabilityVector& mu_t, double p,
                                    double q_exp) {
  return operator_norm_pq(q.entries, mu_s, mu_t, p, q_exp);
}

OperatorNormResult operator_norm_p_meanzero(const Eigen::MatrixXd& kernel,
                                            const ProbabilityVector& mu_s,
                                            const ProbabilityVector& mu_t,
                                            double p) {
  check_sizes(kernel, mu_s, mu_t);
  if (p == 2.0) return operator_norm_2_meanzero(kernel, mu_s, mu_t);
  if (!(p > 1.0) || std::isinf(p)) {
    throw ConfigError("operator_norm_p_meanzero: need 1 < p < infinity");
  }
  const MeanZeroBasis basis = MeanZeroBasis::build(mu_t);
  const int dim = static_cast<int>(basis.columns.cols());

  auto ratio_of = [&](const Eigen::VectorXd& c) {
    return ratio_pq(kernel, mu_s, mu_t, p, p, basis.columns * c);
  };

  // Seed with the exact L^2 mean-zero maximizer plus random probes.
  std::vector<Eigen::VectorXd> seeds;
  {
    const OperatorNormResult l2 =
        operator_norm_2_meanzero(kernel, mu_s, mu_t);
    seeds.push_back(basis.columns.transpose() *
                    (mu_t.weights().asDiagonal() * l2.maximizer));
  }
  double probe_best = 0.0;
  {
    SplitMix64 rng(kProbeSeed ^ 0x55u);
    Eigen::VectorXd c(dim);
    Eigen::VectorXd best_c = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < 1000; ++k) {
      for (int i = 0; i < dim; ++i) c(i) = 2.0 * rng.uniform() - 1.0;
      const double r = ratio_of(c);
      if (r > probe_best) {
        probe_best = r;
        best_c = c;
      }
    }
    seeds.push_back(best_c);
  }

  OperatorNormResult out;
  out.method = "gradient_ascent";
  out.probe_lower = probe_best;
  Eigen::VectorXd best_c;
  for (const auto& seed : seeds) {
    Eigen::VectorXd c = seed;
    if (!(c.norm() > 0.0)) continue;
    double r = ratio_of(c);
    double step = 0.5;
    for (int it = 0; it < 2000; ++it) {
      ++out.iterations;
      const Eigen::VectorXd f = basis.columns * c;
      const Eigen::VectorXd g = kernel * f;
      const double nn = lp_norm(g, mu_s, p);
      const double dd = lp_norm(f, mu_t, p);
      if (!(dd > 0.0) || !(nn > 0.0)) break;
      Eigen::VectorXd wn(g.size()), wd(f.size());
      for (int x = 0; x < g.size(); ++x) {
        wn(x) = mu_s[x] * std::pow(std::abs(g(x)), p - 1.0) *
                (g(x) >= 0.0 ? 1.0 : -1.0);
      }
      for (int y = 0; y < f.size(); ++y) {
        wd(y) = mu_t[y] * std::pow(std::abs(f(y)), p - 1.0) *
                (f(y) >= 0.0 ? 1.0 : -1.0);
      }
      const Eigen::VectorXd grad =
          basis.columns.transpose() *
          (kernel.transpose() * wn / std::pow(nn, p) - wd / std::pow(dd, p));
      Eigen::VectorXd trial = c + step * grad;
      const double tn = trial.norm();
      if (tn > 0.0) {
        trial /= tn;
        const double tr = ratio_of(trial);
        if (tr > r) {
          const double improvement = tr - r;
          c = trial;
          r = tr;
          step *= 1.25;
          if (improvement < 1e-12 * std::max(1.0, r)) {
            out.converged = true;
            break;
          }
          continue;
        }
      }
      step *= 0.5;
      if (step < 1e-14) {
        out.converged = true;
        break;
      }
    }
    if (r > out.value) {
      out.value = r;
      best_c = c;
    }
  }
  if (best_c.size() > 0) {
    const Eigen::VectorXd f = basis.columns * best_c;
    out.maximizer = f / lp_norm(f, mu_t, p);
  } else {
    out.maximizer = Eigen::VectorXd::Zero(mu_t.size());
  }
  return out;
}

}  // namespace fkprop
