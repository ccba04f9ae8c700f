#include "dadao/metrics.hpp"

#include <cmath>

#include "dadao/error.hpp"

namespace dadao {

LyapunovCoefficients LyapunovCoefficients::at(double t, const DadaoParams& p) {
  constexpr double kTau = 1.0 / 8.0;
  LyapunovCoefficients c;
  c.A = std::exp(kTau * std::sqrt(p.nu / p.L) * t);
  c.A_t = p.nu / 4.0 * c.A;
  c.B_t = c.A / (8.0 * p.L);
  c.B = p.delta / (2.0 * p.alpha) * c.B_t;
  c.C = p.theta / p.alpha * c.B_t;
  c.C_t = p.theta / p.beta_t * c.B_t;
  return c;
}

StackedState StackedState::from(const std::vector<NodeState>& states) {
  const auto n = static_cast<Eigen::Index>(states.size());
  const auto d = states.empty() ? 0 : states.front().blocks.rows();
  StackedState s{Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n),
                 Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = states[i].blocks;
    s.x.col(i) = b.col(kX);
    s.x_t.col(i) = b.col(kXt);
    s.y.col(i) = b.col(kY);
    s.y_t.col(i) = b.col(kYt);
    s.z.col(i) = b.col(kZ);
    s.z_t.col(i) = b.col(kZt);
  }
  return s;
}

double mean_dist_sq(const std::vector<NodeState>& states, const Eigen::VectorXd& x_star) {
  if (states.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : states) total += (s.x() - x_star).squaredNorm();
  return total / static_cast<double>(states.size());
}

double consensus_err(const std::vector<NodeState>& states) {
  if (states.empty()) return 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(states.front().dim());
  for (const auto& s : states) mean += s.x();
  mean /= static_cast<double>(states.size());
  double total = 0.0;
  for (const auto& s : states) total += (s.x() - mean).squaredNorm();
  return total;
}

double bregman_F(const Objective& objective, const Eigen::MatrixXd& x, const Eigen::VectorXd& x_star, double nu) {
  double total = 0.0;
  for (int i = 0; i < objective.num_nodes(); ++i) {
    const Eigen::VectorXd xi = x.col(i);
    const Eigen::VectorXd diff = xi - x_star;
    total += objective.value(i, xi) - objective.value(i, x_star) - objective.grad(i, x_star).dot(diff) -
             0.5 * nu * diff.squaredNorm();
  }
  return total;
}

double lyapunov(const std::vector<NodeState>& states, const LyapunovCoefficients& coeffs,
                const SaddleCertificate& certificate, const Eigen::MatrixXd& gossip_pinv, const Objective& objective,
                double nu, PotentialForm form) {
  const auto s = StackedState::from(states);
  const auto n = s.x.cols();
  if (certificate.x.cols() != n || gossip_pinv.rows() != n)
    throw ParameterError("lyapunov: state, certificate and gossip sizes differ");
  const Eigen::MatrixXd dz_t = s.z_t - certificate.z;
  // Rows of dz_t are coordinates; the Lambda^+ norm applies along nodes.
  const double resistance_term = (dz_t * gossip_pinv).cwiseProduct(dz_t).sum();
  const double primal = form == PotentialForm::AsStated
                            ? coeffs.A * (s.x - certificate.x).squaredNorm() +
                                  coeffs.A_t * bregman_F(objective, s.x, objective.x_star(), nu)
                            : coeffs.A * bregman_F(objective, s.x, objective.x_star(), nu) +
                                  coeffs.A_t * (s.x_t - certificate.x).squaredNorm();
  return primal + coeffs.B * (s.y - certificate.y).squaredNorm() + coeffs.B_t * (s.y_t - certificate.y).squaredNorm() +
         coeffs.C * (s.z + s.y - certificate.z - certificate.y).squaredNorm() + coeffs.C_t * resistance_term;
}

RunningAverage::RunningAverage(int n, int dim)
    : sums_(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(dim)), counts_(static_cast<std::size_t>(n), 0) {}

void RunningAverage::add(int node, const Eigen::VectorXd& x) {
  sums_[node] += x;
  ++counts_[node];
}

Eigen::VectorXd RunningAverage::mean(int node) const {
  if (counts_[node] == 0) throw ParameterError("running average: node has no snapshots");
  return sums_[node] / static_cast<double>(counts_[node]);
}

double RunningAverage::dist_sq(const Eigen::VectorXd& x_star) const {
  double total = 0.0;
  for (std::size_t i = 0; i < sums_.size(); ++i) total += (mean(static_cast<int>(i)) - x_star).squaredNorm();
  return total / static_cast<double>(sums_.size());
}

double running_avg_dist(const std::vector<std::vector<Eigen::VectorXd>>& histories, const Eigen::VectorXd& x_star) {
  if (histories.empty()) throw ParameterError("running_avg_dist: no nodes");
  double total = 0.0;
  for (const auto& h : histories) {
    if (h.empty()) throw ParameterError("running_avg_dist: empty history");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(x_star.size());
    for (const auto& x : h) mean += x;
    mean /= static_cast<double>(h.size());
    total += (mean - x_star).squaredNorm();
  }
  return total / static_cast<double>(histories.size());
}

LogLinearFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& y, double fraction) {
  if (t.size() != y.size()) throw ParameterError("fit_log_linear: size mismatch");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("fit_log_linear: fraction must be in (0, 1]");
  const std::size_t count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(t.size())));
  const std::size_t first = t.size() - count;
  std::vector<double> xs, ys;
  for (std::size_t k = first; k < t.size(); ++k) {
    if (y[k] > 0.0 && std::isfinite(y[k])) {
      xs.push_back(t[k]);
      ys.push_back(std::log(y[k]));
    }
  }
  LogLinearFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace dadao
