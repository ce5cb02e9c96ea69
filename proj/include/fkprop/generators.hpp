#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fkprop/core_model.hpp"

namespace fkprop {

// Conservative rate matrix (generator of a continuous-time Markov chain):
// off-diagonal entries >= 0, rows summing to zero. Validated on construction;
// the diagonal is recomputed as minus the off-diagonal row sum so the row-sum
// identity holds exactly.
class QMatrix {
 public:
  explicit QMatrix(Eigen::MatrixXd entries);

  int size() const { return static_cast<int>(entries_.rows()); }
  double operator()(int x, int y) const { return entries_(x, y); }
  const Eigen::MatrixXd& entries() const { return entries_; }

  // max_x |Q(x,x)|: the largest total jump rate.
  double max_exit_rate() const;

 private:
  Eigen::MatrixXd entries_;
};

// Undirected simple graph on the state indices; jump rates live on its edges.
class EdgeSet {
 public:
  explicit EdgeSet(int state_count, std::vector<std::pair<int, int>> edges);
  static EdgeSet path(int state_count);      // i -- i+1
  static EdgeSet complete(int state_count);  // all pairs

  int state_count() const { return state_count_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  bool connected() const;

 private:
  int state_count_;
  std::vector<std::pair<int, int>> edges_;  // normalized x < y, sorted, distinct
};

// Nonnegative, continuous, piecewise-linear time-dependent speed factor.
class SpeedSchedule {
 public:
  static SpeedSchedule constant(double value);
  static SpeedSchedule piecewise_linear(std::vector<double> times,
                                        std::vector<double> values);

  double operator()(double t) const;
  // max over [a, b].
  double max_on(double a, double b) const;
  bool is_constant() const { return times_.empty(); }

 private:
  SpeedSchedule() = default;
  double constant_ = 0.0;
  std::vector<double> times_, values_;
};

// Time-dependent family of rate matrices t |-> L_t, each reversible w.r.t. the
// measure family it was built from, bundled with a speed factor lambda_t.
// The dynamics generator at time t is lambda_t * L_t.
class GeneratorFamily {
 public:
  // Metropolis rates on the edges of a graph: L_t(x,y) = (1/2) min(mu_t(y)/mu_t(x), 1)
  // for {x,y} an edge. Reversible w.r.t. mu_t by construction.
  static GeneratorFamily metropolis(MeasureFamily measures, EdgeSet edges,
                                    SpeedSchedule speed);

  // Piecewise-linear interpolation of tabulated rate matrices. Interpolants
  // are conservative with nonnegative off-diagonal automatically; reversibility
  // w.r.t. an accompanying measure family is *checked*, not implied.
  static GeneratorFamily tabulated(std::vector<double> times,
                                   std::vector<QMatrix> values,
                                   SpeedSchedule speed);

  // Arbitrary builder callback (used for derived constructions).
  static GeneratorFamily custom(std::function<QMatrix(double)> builder,
                                SpeedSchedule speed, std::string description);

  QMatrix rates_at(double t) const;            // L_t
  const SpeedSchedule& speed() const;          // lambda_t
  const std::string& description() const;

  // Restriction to an index subset (off-diagonal block dropped, diagonal
  // recomputed): the sub-chain generator.
  GeneratorFamily restrict(const std::vector<int>& indices) const;

 private:
  struct Impl;
  explicit GeneratorFamily(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

// max_{x != y} |mu(x) L(x,y) - mu(y) L(y,x)|: reversibility defect.
double detailed_balance_defect(const QMatrix& rates, const ProbabilityVector& mu);

// Throws PreconditionError if the defect exceeds tol.
void require_detailed_balance(const QMatrix& rates, const ProbabilityVector& mu,
                              double tol = 1e-12);

// Dirichlet form E(f,g) = (1/2) sum_{x,y} (f(y)-f(x))(g(y)-g(x)) L(x,y) mu(x).
double dirichlet_form(const QMatrix& rates, const ProbabilityVector& mu,
                      const StateFunction& f, const StateFunction& g);

// Symmetric similarity transform D^{1/2} (-L) D^{-1/2} with D = diag(mu);
// symmetric (up to roundoff) when L is reversible w.r.t. mu. Returned matrix
// is explicitly symmetrized.
Eigen::MatrixXd symmetrized_negative_generator(const QMatrix& rates,
                                               const ProbabilityVector& mu);

}  // namespace fkprop
