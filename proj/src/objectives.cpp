#include "dadao/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dadao/error.hpp"

namespace dadao {

namespace {

// log(1 + exp(-s)) without overflow.
double softplus_neg(double s) { return std::max(-s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

// 1 / (1 + exp(s)).
double sigmoid_neg(double s) {
  if (s >= 0) {
    const double e = std::exp(-s);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(s));
}

double certificate_tolerance(int n, double L, const Eigen::VectorXd& x) {
  return 1e-9 * n * L * (1.0 + x.norm());
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::LinearRegression ? "linreg" : "logreg";
}

Objective::Objective(ObjectiveKind kind, std::vector<LocalDataset> datasets, double ridge)
    : kind_(kind), datasets_(std::move(datasets)), ridge_(ridge) {
  if (datasets_.empty()) throw ParameterError("objective: no datasets");
  if (!(ridge_ >= 0.0) || !std::isfinite(ridge_)) throw ParameterError("objective: ridge must be >= 0");
  if (kind_ == ObjectiveKind::LogisticRegression && !(ridge_ > 0.0))
    throw ParameterError("objective: logistic regression needs mu_reg > 0");
  dim_ = static_cast<int>(datasets_.front().features.cols());
  if (dim_ < 1) throw ParameterError("objective: dimension must be >= 1");
  for (const auto& ds : datasets_) {
    if (ds.features.rows() < 1) throw ParameterError("objective: every worker needs m >= 1 samples");
    if (ds.features.cols() != dim_ || ds.features.rows() != ds.labels.size())
      throw ParameterError("objective: inconsistent dataset shapes");
    if (!ds.features.allFinite() || !ds.labels.allFinite()) throw ParameterError("objective: non-finite data");
    if (kind_ == ObjectiveKind::LogisticRegression)
      for (double b : ds.labels)
        if (b != 1.0 && b != -1.0) throw ParameterError("objective: logistic labels must be +1 or -1");
  }
  compute_constants();
  if (kind_ == ObjectiveKind::LinearRegression)
    solve_linear();
  else
    solve_logistic();
  const double residual = certificate_residual();
  if (!(residual <= certificate_tolerance(num_nodes(), L_, x_star_)))
    throw CertificationError("objective: minimizer residual " + std::to_string(residual) + " above tolerance");
}

void Objective::compute_constants() {
  mu_ = std::numeric_limits<double>::infinity();
  L_ = 0.0;
  for (const auto& ds : datasets_) {
    const double m = static_cast<double>(ds.features.rows());
    const Eigen::MatrixXd gram = ds.features.transpose() * ds.features / m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    const double lo = std::max(solver.eigenvalues()[0], 0.0);
    const double hi = solver.eigenvalues()[dim_ - 1];
    if (kind_ == ObjectiveKind::LinearRegression) {
      mu_ = std::min(mu_, 2.0 * lo + ridge_);
      L_ = std::max(L_, 2.0 * hi + ridge_);
    } else {
      // The logistic curvature lies in [0, 1/4] per sample.
      mu_ = ridge_;
      L_ = std::max(L_, ridge_ + hi / 4.0);
    }
  }
  if (!(mu_ > 1e-12 * L_))
    throw ParameterError("objective: a local Hessian is singular (mu = 0); add a ridge term");
}

void Objective::solve_linear() {
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_);
  for (const auto& ds : datasets_) {
    const double m = static_cast<double>(ds.features.rows());
    hessian += (2.0 / m) * ds.features.transpose() * ds.features;
    rhs += (2.0 / m) * ds.features.transpose() * ds.labels;
  }
  hessian.diagonal().array() += ridge_ * num_nodes();
  x_star_ = hessian.ldlt().solve(rhs);
  // One step of iterative refinement keeps the residual near round-off.
  Eigen::VectorXd r = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < num_nodes(); ++i) r += grad(i, x_star_);
  x_star_ -= hessian.ldlt().solve(r);
}

void Objective::solve_logistic() {
  // Full-gradient descent with Armijo backtracking on sum_i f_i.
  auto total_value = [&](const Eigen::VectorXd& x) {
    double v = 0.0;
    for (int i = 0; i < num_nodes(); ++i) v += value(i, x);
    return v;
  };
  auto total_grad = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
    for (int i = 0; i < num_nodes(); ++i) g += grad(i, x);
    return g;
  };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim_);
  double step = 1.0 / (num_nodes() * L_);
  constexpr double kTarget = 1e-12;
  constexpr int kMaxIterations = 1000000;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::VectorXd g = total_grad(x);
    const double g2 = g.squaredNorm();
    if (std::sqrt(g2) <= kTarget) {
      x_star_ = x;
      return;
    }
    const double fx = total_value(x);
    const double safe = 1.0 / (num_nodes() * L_);
    double t = std::min(2.0 * step, 2.0 / (num_nodes() * mu_));
    // Near the optimum the Armijo test drowns in round-off; the 1/(nL)
    // step is then still a guaranteed descent step by smoothness.
    if (0.5 * safe * g2 <= 1e-13 * std::max(1.0, std::abs(fx))) {
      x -= safe * g;
      continue;
    }
    Eigen::VectorXd candidate = x - t * g;
    while (total_value(candidate) > fx - 0.5 * t * g2 && t > safe) {
      t = std::max(0.5 * t, safe);
      candidate = x - t * g;
    }
    step = t;
    x = candidate;
  }
  throw CertificationError("objective: logistic solver did not reach gradient norm 1e-12");
}

double Objective::value(int i, const Eigen::VectorXd& x) const {
  const auto& ds = datasets_[i];
  const Eigen::VectorXd s = ds.features * x;
  double loss = 0.0;
  if (kind_ == ObjectiveKind::LinearRegression) {
    loss = (s - ds.labels).squaredNorm();
  } else {
    for (Eigen::Index j = 0; j < s.size(); ++j) loss += softplus_neg(ds.labels[j] * s[j]);
  }
  return loss / static_cast<double>(s.size()) + 0.5 * ridge_ * x.squaredNorm();
}

Eigen::VectorXd Objective::grad(int i, const Eigen::VectorXd& x) const {
  const auto& ds = datasets_[i];
  const double m = static_cast<double>(ds.features.rows());
  Eigen::VectorXd weights;
  if (kind_ == ObjectiveKind::LinearRegression) {
    weights = 2.0 * (ds.features * x - ds.labels);
  } else {
    const Eigen::VectorXd s = (ds.features * x).cwiseProduct(ds.labels);
    weights.resize(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) weights[j] = -ds.labels[j] * sigmoid_neg(s[j]);
  }
  return ds.features.transpose() * weights / m + ridge_ * x;
}

Eigen::VectorXd Objective::stochastic_grad(int i, const Eigen::VectorXd& x, int batch, CounterRng& rng) const {
  const int m = samples(i);
  if (batch < 1 || batch > m) throw ParameterError("stochastic_grad: batch size must be in [1, m]");
  if (batch == m) return grad(i, x);
  // Partial Fisher-Yates: the first `batch` slots become a uniform sample.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  for (int k = 0; k < batch; ++k) {
    const auto pick = k + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m - k)));
    std::swap(order[k], order[pick]);
  }
  const auto& ds = datasets_[i];
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (int k = 0; k < batch; ++k) {
    const auto a = ds.features.row(order[k]).transpose();
    const double c = ds.labels[order[k]];
    const double s = a.dot(x);
    if (kind_ == ObjectiveKind::LinearRegression)
      g += 2.0 * (s - c) * a;
    else
      g += -c * sigmoid_neg(c * s) * a;
  }
  return g / static_cast<double>(batch) + ridge_ * x;
}

double Objective::certificate_residual() const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < num_nodes(); ++i) total += grad(i, x_star_);
  return total.norm();
}

SaddleCertificate Objective::saddle_certificate(double nu) const {
  const int n = num_nodes();
  SaddleCertificate cert{Eigen::MatrixXd(dim_, n), Eigen::MatrixXd(dim_, n), Eigen::MatrixXd(dim_, n)};
  for (int i = 0; i < n; ++i) {
    cert.x.col(i) = x_star_;
    cert.y.col(i) = grad(i, x_star_) - nu * x_star_;
    cert.z.col(i) = -nu * x_star_ - cert.y.col(i);
  }
  const double drift = cert.z.rowwise().sum().norm();
  if (!(drift <= certificate_tolerance(n, L_, x_star_)))
    throw CertificationError("saddle certificate: sum of z* is " + std::to_string(drift));
  return cert;
}

Objective make_linear_regression(int n, int m, int d, std::uint64_t seed, const LinearRegressionOptions& opts) {
  if (n < 1 || m < 1 || d < 1) throw ParameterError("make_linear_regression: n, m, d must be >= 1");
  if (!(opts.noise >= 0.0)) throw ParameterError("make_linear_regression: noise must be >= 0");
  CounterRng rng = CounterRng(seed).split(streams::kData);
  Eigen::VectorXd planted(d);
  for (int k = 0; k < d; ++k) planted[k] = rng.normal();
  std::vector<LocalDataset> data(static_cast<std::size_t>(n));
  for (auto& ds : data) {
    ds.features.resize(m, d);
    ds.labels.resize(m);
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < d; ++k) ds.features(j, k) = rng.normal();
      ds.labels[j] = ds.features.row(j).dot(planted) + opts.noise * rng.normal();
    }
  }
  return Objective(ObjectiveKind::LinearRegression, std::move(data), opts.ridge);
}

Objective make_logistic(int n, int m, int d, double mu_reg, std::uint64_t seed) {
  if (n < 1 || m < 1 || d < 1) throw ParameterError("make_logistic: n, m, d must be >= 1");
  if (!(mu_reg > 0.0)) throw ParameterError("make_logistic: mu_reg must be positive");
  CounterRng rng = CounterRng(seed).split(streams::kData);
  Eigen::VectorXd centre(d);
  for (int k = 0; k < d; ++k) centre[k] = rng.normal();
  centre /= centre.norm();
  std::vector<LocalDataset> data(static_cast<std::size_t>(n));
  for (auto& ds : data) {
    ds.features.resize(m, d);
    ds.labels.resize(m);
    for (int j = 0; j < m; ++j) {
      const double label = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int k = 0; k < d; ++k) ds.features(j, k) = label * centre[k] + rng.normal();
      ds.labels[j] = rng.uniform() < 0.1 ? -label : label;
    }
  }
  return Objective(ObjectiveKind::LogisticRegression, std::move(data), mu_reg);
}

}  // namespace dadao
