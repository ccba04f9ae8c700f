#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dadao/dynamics.hpp"
#include "dadao/objectives.hpp"

namespace dadao {

// Weights of the Lyapunov potential at time t. All six share the factor
// A(t) = exp(tau sqrt(nu / L) t), tau = 1/8, and satisfy
//   4 A~ = nu A,  A~ = 2 L nu B~,  (delta/2) B~ = alpha B,
//   theta B~ = beta~ C~ = alpha C.
struct LyapunovCoefficients {
  double A = 0, A_t = 0, B = 0, B_t = 0, C = 0, C_t = 0;

  static LyapunovCoefficients at(double t, const DadaoParams& p);
};

// Per-block d x n views of a set of node states (column i = node i).
struct StackedState {
  Eigen::MatrixXd x, x_t, y, y_t, z, z_t;

  static StackedState from(const std::vector<NodeState>& states);
};

// (1/n) sum_i |x_i - x*|^2.
double mean_dist_sq(const std::vector<NodeState>& states, const Eigen::VectorXd& x_star);

// |pi x|^2 = sum_i |x_i - mean(x)|^2.
double consensus_err(const std::vector<NodeState>& states);

// Bregman divergence of F(x) = sum_i f_i(x_i) - nu/2 |x|^2 between the
// stacked x (d x n) and the consensus point x*.
double bregman_F(const Objective& objective, const Eigen::MatrixXd& x, const Eigen::VectorXd& x_star, double nu);

// Which x-part the potential uses. AsStated is the displayed definition;
// ProofForm swaps in A d_F(x, x*) + A~ |x~ - x*|^2, the pairing the descent
// argument actually manipulates.
enum class PotentialForm { AsStated, ProofForm };

// Phi = A |x - x*|^2 + A~ d_F(x, x*) + B |y - y*|^2 + B~ |y~ - y*|^2
//     + C |z + y - z* - y*|^2 + C~ |z~ - z*|^2_{Lambda^+}
// The last term applies the n x n matrix gossip_pinv to every coordinate.
double lyapunov(const std::vector<NodeState>& states, const LyapunovCoefficients& coeffs,
                const SaddleCertificate& certificate, const Eigen::MatrixXd& gossip_pinv, const Objective& objective,
                double nu, PotentialForm form = PotentialForm::AsStated);

// Running average of x over each node's own post-event snapshots.
class RunningAverage {
 public:
  RunningAverage(int n, int dim);

  void add(int node, const Eigen::VectorXd& x);
  int count(int node) const { return counts_[node]; }
  Eigen::VectorXd mean(int node) const;

  // (1/n) sum_i |mean_i - x*|^2; throws ParameterError if a node is empty.
  double dist_sq(const Eigen::VectorXd& x_star) const;

 private:
  std::vector<Eigen::VectorXd> sums_;
  std::vector<int> counts_;
};

// Batch form of the running-average distance; histories[i] holds node i's
// snapshots. Throws ParameterError on an empty history.
double running_avg_dist(const std::vector<std::vector<Eigen::VectorXd>>& histories, const Eigen::VectorXd& x_star);

// Least-squares line through (t_k, log y_k) over the final `fraction` of
// the points; returns slope, intercept and R^2.
struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};
LogLinearFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& y, double fraction = 0.8);

}  // namespace dadao
