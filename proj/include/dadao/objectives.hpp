#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dadao/rng.hpp"

namespace dadao {

// m samples held by one worker: features is m x d, labels has m entries
// (real targets for regression, +-1 for classification).
struct LocalDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
};

enum class ObjectiveKind { LinearRegression, LogisticRegression };

// Stacked saddle point of the augmented Lagrangian. Each matrix is d x n,
// column i belonging to worker i.
struct SaddleCertificate {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  Eigen::MatrixXd z;
};

// Sum over workers of f_i, with
//   linear:   f_i(x) = 1/m sum_j (a_ij^T x - c_ij)^2 + ridge/2 |x|^2
//   logistic: f_i(x) = 1/m sum_j log(1 + exp(-b_ij a_ij^T x)) + ridge/2 |x|^2
// Immutable after construction; mu, L and the global minimizer x_star are
// computed and certified by the constructor.
class Objective {
 public:
  Objective(ObjectiveKind kind, std::vector<LocalDataset> datasets, double ridge);

  ObjectiveKind kind() const { return kind_; }
  int num_nodes() const { return static_cast<int>(datasets_.size()); }
  int dim() const { return dim_; }
  int samples(int i) const { return static_cast<int>(datasets_[i].labels.size()); }
  const std::vector<LocalDataset>& datasets() const { return datasets_; }
  double ridge() const { return ridge_; }

  double mu() const { return mu_; }
  double L() const { return L_; }
  const Eigen::VectorXd& x_star() const { return x_star_; }

  double value(int i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad(int i, const Eigen::VectorXd& x) const;
  // Gradient of the mean loss over `batch` samples drawn uniformly without
  // replacement (plus the ridge term). batch == m gives grad() exactly.
  Eigen::VectorXd stochastic_grad(int i, const Eigen::VectorXd& x, int batch, CounterRng& rng) const;

  // |sum_i grad f_i(x_star)|.
  double certificate_residual() const;

  // x* stacked n times; y*_i = grad f_i(x*) - nu x*; z* = -nu x* - y*.
  // Throws CertificationError when sum_i z*_i is not numerically zero.
  SaddleCertificate saddle_certificate(double nu) const;

 private:
  double sample_loss_grad(int i, int j, const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;
  void compute_constants();
  void solve_linear();
  void solve_logistic();

  ObjectiveKind kind_;
  std::vector<LocalDataset> datasets_;
  double ridge_;
  int dim_ = 0;
  double mu_ = 0.0;
  double L_ = 0.0;
  Eigen::VectorXd x_star_;
};

struct LinearRegressionOptions {
  double noise = 0.1;  // std-dev of the target noise
  double ridge = 0.0;
};

// Gaussian features, targets from a planted weight vector plus noise.
Objective make_linear_regression(int n, int m, int d, std::uint64_t seed, const LinearRegressionOptions& opts = {});

// Two Gaussian clusters centred at +-c with labels +-1 and 10% label flips.
Objective make_logistic(int n, int m, int d, double mu_reg, std::uint64_t seed);

std::string to_string(ObjectiveKind kind);

}  // namespace dadao
