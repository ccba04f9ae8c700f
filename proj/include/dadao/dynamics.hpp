#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dadao/events.hpp"
#include "dadao/graph.hpp"
#include "dadao/objectives.hpp"

namespace dadao {

// Constants of the continuized dynamics, resolved from (mu, L, chi1*).
// Names ending in _t are the tilde variants.
struct DadaoParams {
  double mu = 0, L = 0, nu = 0, chi1_star = 0;
  double eta = 0, eta_t = 0;
  double gamma = 0, gamma_t = 0;
  double delta = 0, delta_t = 0;
  double alpha = 0, alpha_t = 0;
  double beta = 0, beta_t = 0;
  double theta = 0;
};

// Throws ParameterError unless 0 < mu <= L and chi1_star > 0.
DadaoParams params_from(double mu, double L, double chi1_star);

// Block order of the per-node state.
enum Block : int { kX = 0, kXt = 1, kY = 2, kYt = 3, kZ = 4, kZt = 5 };
inline constexpr int kNumBlocks = 6;

// One worker's state: six d-dimensional blocks stored as the columns of a
// d x 6 matrix, plus the time the node was last advanced to.
struct NodeState {
  Eigen::MatrixXd blocks;
  double last_update = 0.0;

  NodeState() = default;
  explicit NodeState(int dim) : blocks(Eigen::MatrixXd::Zero(dim, kNumBlocks)) {}

  int dim() const { return static_cast<int>(blocks.rows()); }
  auto x() { return blocks.col(kX); }
  auto x() const { return blocks.col(kX); }
  auto x_t() { return blocks.col(kXt); }
  auto x_t() const { return blocks.col(kXt); }
  auto y() { return blocks.col(kY); }
  auto y() const { return blocks.col(kY); }
  auto y_t() { return blocks.col(kYt); }
  auto y_t() const { return blocks.col(kYt); }
  auto z() { return blocks.col(kZ); }
  auto z() const { return blocks.col(kZ); }
  auto z_t() { return blocks.col(kZt); }
  auto z_t() const { return blocks.col(kZt); }
};

using Matrix6d = Eigen::Matrix<double, kNumBlocks, kNumBlocks>;

// Time derivative of the six blocks between spikes, written term by term:
//   x' = eta (x~ - x)          x~' = eta~ (x - x~)
//   y' = alpha (y~ - y)        y~' = -theta (y + z + nu x~)
//   z' = alpha (z~ - z)        z~' = alpha~ (z - z~)
Eigen::MatrixXd drift_rhs(const DadaoParams& p, const Eigen::MatrixXd& blocks);

// The 6x6 generator of the inter-spike linear ODE, acting on each coordinate.
class DriftMatrix {
 public:
  // Builds the matrix and checks every column against drift_rhs.
  explicit DriftMatrix(const DadaoParams& p);

  const Matrix6d& matrix() const { return a_; }
  // exp(dt * A); dt >= 0.
  Matrix6d exp(double dt) const;

 private:
  Matrix6d a_;
};

// DriftMatrix plus a bounded memo of exp(dt * A) keyed on the exact bits of
// dt. Not thread-safe; each simulation owns one.
class Propagator {
 public:
  explicit Propagator(DriftMatrix drift, std::size_t capacity = 4096)
      : drift_(std::move(drift)), capacity_(capacity) {}

  const Matrix6d& exp(double dt);
  const DriftMatrix& drift() const { return drift_; }

 private:
  DriftMatrix drift_;
  std::size_t capacity_;
  std::unordered_map<std::uint64_t, Matrix6d> cache_;
};

// Advances the state to `to_time` with the exact flow of the linear ODE.
// Throws OrderingError if to_time < s.last_update.
NodeState propagate(const NodeState& s, double to_time, const DriftMatrix& drift);
void propagate_in_place(NodeState& s, double to_time, Propagator& prop);

// Local gradient spike. With g = grad - nu x - y~:
//   x -= gamma g,  x~ -= gamma~ g,  y~ += (delta + delta~) g.
NodeState gradient_jump(const NodeState& s, const Eigen::VectorXd& grad, const DadaoParams& p, int node = -1);
void gradient_jump_in_place(NodeState& s, const Eigen::VectorXd& grad, const DadaoParams& p, int node = -1);

// Edge spike. With m = (y_i + z_i) - (y_j + z_j):
//   z_i -= beta m, z~_i -= beta~ m, z_j += beta m, z~_j += beta~ m.
// Both states must sit at the same time.
std::pair<NodeState, NodeState> gossip_jump(const NodeState& si, const NodeState& sj, const DadaoParams& p);
void gossip_jump_in_place(NodeState& si, NodeState& sj, const DadaoParams& p);

struct RunMode {
  enum class Kind { ExactGradient, Stochastic };
  Kind kind = Kind::ExactGradient;
  int batch = 1;

  static RunMode exact() { return {}; }
  static RunMode stochastic(int batch) { return {Kind::Stochastic, batch}; }
};

struct ProbeRecord {
  double time = 0.0;
  std::uint64_t grad_events = 0;
  std::uint64_t comm_events = 0;
  double mean_dist_sq = 0.0;
  double consensus_err = 0.0;
  double lyapunov = 0.0;
  double running_avg_dist_sq = 0.0;
};

struct RunOptions {
  std::vector<double> probe_times;  // sorted, within [0, t_max]
  RunMode mode;
  std::uint64_t minibatch_seed = 0;
  // Rate used to weight the gossip matrix in the potential:
  // Lambda(t) = comm_rate / |E(t)| * L(t).
  double comm_rate = 0.0;
  bool record_lyapunov = true;
  bool proof_form_potential = false;  // see PotentialForm
  // Stop at the first probe whose mean_dist_sq falls to this value.
  std::optional<double> target_mean_dist_sq;
  std::uint64_t max_events = 10'000'000;
  // Starting states (all zero when empty).
  std::vector<NodeState> initial;
};

struct Trajectory {
  std::vector<ProbeRecord> records;
  std::vector<NodeState> final_states;  // advanced to the stop time
  double stop_time = 0.0;
  std::uint64_t events_processed = 0;
  bool reached_target = false;
  bool hit_event_cap = false;
  // Mean of |stochastic - full gradient|^2 over gradient spikes (0 in exact mode).
  double sigma_sq_hat = 0.0;

  // Final x estimate of every worker.
  std::vector<Eigen::VectorXd> estimates() const;
};

// Replays the schedule: each event advances the touched node(s) to its time
// and applies the jump; each probe advances copies of all states and
// records the metrics.
Trajectory run(const EventSchedule& schedule, const TimeVaryingTopology& topo, const Objective& objective,
               const DadaoParams& params, const RunOptions& options);

// probe_count equally spaced times covering [0, t_max].
std::vector<double> uniform_probes(double t_max, int probe_count);

}  // namespace dadao
