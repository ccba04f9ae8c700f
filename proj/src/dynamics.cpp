#include "dadao/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "dadao/error.hpp"
#include "dadao/expm.hpp"
#include "dadao/metrics.hpp"
#include "dadao/rng.hpp"

namespace dadao {

DadaoParams params_from(double mu, double L, double chi1_star) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ParameterError("params: mu must be positive");
  if (!(L > 0.0) || !std::isfinite(L)) throw ParameterError("params: L must be positive");
  if (mu > L) throw ParameterError("params: mu must not exceed L");
  if (!(chi1_star > 0.0) || !std::isfinite(chi1_star)) throw ParameterError("params: chi1* must be positive");
  DadaoParams p;
  p.mu = mu;
  p.L = L;
  p.chi1_star = chi1_star;
  p.nu = mu / 2.0;
  const double ratio = std::sqrt(p.nu / L);
  p.eta = ratio / 8.0;
  p.eta_t = ratio / 8.0;
  p.gamma = 1.0 / (4.0 * L);
  p.gamma_t = 1.0 / (4.0 * std::sqrt(p.nu * L));
  p.delta = ratio / 4.0;
  p.delta_t = 1.0;
  p.alpha = ratio / 4.0;
  p.alpha_t = ratio / 8.0;
  p.beta = 0.5;
  p.beta_t = 2.0 * chi1_star / ratio;
  p.theta = 0.5 / ratio;
  return p;
}

Eigen::MatrixXd drift_rhs(const DadaoParams& p, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(b.rows(), kNumBlocks);
  d.col(kX) = p.eta * (b.col(kXt) - b.col(kX));
  d.col(kXt) = p.eta_t * (b.col(kX) - b.col(kXt));
  d.col(kY) = p.alpha * (b.col(kYt) - b.col(kY));
  d.col(kYt) = -p.theta * (b.col(kY) + b.col(kZ) + p.nu * b.col(kXt));
  d.col(kZ) = p.alpha * (b.col(kZt) - b.col(kZ));
  d.col(kZt) = p.alpha_t * (b.col(kZ) - b.col(kZt));
  return d;
}

DriftMatrix::DriftMatrix(const DadaoParams& p) {
  const double eta = p.eta, eta_t = p.eta_t, alpha = p.alpha, alpha_t = p.alpha_t;
  const double theta = p.theta, tn = p.theta * p.nu;
  // clang-format off
  a_ << -eta,   eta,    0,      0,     0,       0,
        eta_t, -eta_t,  0,      0,     0,       0,
        0,      0,     -alpha,  alpha, 0,       0,
        0,     -tn,    -theta,  0,    -theta,   0,
        0,      0,      0,      0,    -alpha,   alpha,
        0,      0,      0,      0,     alpha_t, -alpha_t;
  // clang-format on

  // Column k of A is the drift of the k-th unit state.
  const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
  for (int k = 0; k < kNumBlocks; ++k) {
    Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(1, kNumBlocks);
    unit(0, k) = 1.0;
    const Eigen::MatrixXd expected = drift_rhs(p, unit).transpose();
    if ((expected - a_.col(k)).cwiseAbs().maxCoeff() > 1e-14 * scale)
      throw Error("drift matrix: column " + std::to_string(k) + " disagrees with the drift equations");
  }
}

Matrix6d DriftMatrix::exp(double dt) const {
  if (!(dt >= 0.0)) throw OrderingError("drift: negative time step");
  if (dt == 0.0) return Matrix6d::Identity();
  return Matrix6d(expm(dt * Eigen::MatrixXd(a_)));
}

const Matrix6d& Propagator::exp(double dt) {
  const auto key = std::bit_cast<std::uint64_t>(dt);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  if (cache_.size() >= capacity_) cache_.clear();
  return cache_.emplace(key, drift_.exp(dt)).first->second;
}

namespace {

void check_order(const NodeState& s, double to_time) {
  if (to_time < s.last_update)
    throw OrderingError("propagate: target time " + std::to_string(to_time) + " precedes last update " +
                        std::to_string(s.last_update));
}

}  // namespace

NodeState propagate(const NodeState& s, double to_time, const DriftMatrix& drift) {
  check_order(s, to_time);
  NodeState out = s;
  if (to_time > s.last_update) out.blocks = s.blocks * drift.exp(to_time - s.last_update).transpose();
  out.last_update = to_time;
  return out;
}

void propagate_in_place(NodeState& s, double to_time, Propagator& prop) {
  check_order(s, to_time);
  if (to_time > s.last_update) s.blocks = (s.blocks * prop.exp(to_time - s.last_update).transpose()).eval();
  s.last_update = to_time;
}

void gradient_jump_in_place(NodeState& s, const Eigen::VectorXd& grad, const DadaoParams& p, int node) {
  if (grad.size() != s.dim()) throw ParameterError("gradient_jump: gradient dimension mismatch");
  if (!grad.allFinite()) throw NumericError("gradient_jump: non-finite gradient at node " + std::to_string(node));
  const Eigen::VectorXd g = grad - p.nu * s.x() - s.y_t();
  s.x() -= p.gamma * g;
  s.x_t() -= p.gamma_t * g;
  s.y_t() += (p.delta + p.delta_t) * g;
}

NodeState gradient_jump(const NodeState& s, const Eigen::VectorXd& grad, const DadaoParams& p, int node) {
  NodeState out = s;
  gradient_jump_in_place(out, grad, p, node);
  return out;
}

void gossip_jump_in_place(NodeState& si, NodeState& sj, const DadaoParams& p) {
  if (si.last_update != sj.last_update) throw OrderingError("gossip_jump: states are at different times");
  if (si.dim() != sj.dim()) throw ParameterError("gossip_jump: dimension mismatch");
  const Eigen::VectorXd m = (si.y() + si.z()) - (sj.y() + sj.z());
  si.z() -= p.beta * m;
  si.z_t() -= p.beta_t * m;
  sj.z() += p.beta * m;
  sj.z_t() += p.beta_t * m;
}

std::pair<NodeState, NodeState> gossip_jump(const NodeState& si, const NodeState& sj, const DadaoParams& p) {
  std::pair<NodeState, NodeState> out{si, sj};
  gossip_jump_in_place(out.first, out.second, p);
  return out;
}

std::vector<Eigen::VectorXd> Trajectory::estimates() const {
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(final_states.size());
  for (const auto& s : final_states) xs.emplace_back(s.x());
  return xs;
}

std::vector<double> uniform_probes(double t_max, int probe_count) {
  if (probe_count < 2) throw ParameterError("probes: need at least 2 probe times");
  if (!(t_max >= 0.0)) throw ParameterError("probes: t_max must be >= 0");
  std::vector<double> times(static_cast<std::size_t>(probe_count));
  for (int k = 0; k < probe_count; ++k) times[k] = t_max * k / (probe_count - 1);
  times.back() = t_max;
  return times;
}

namespace {

class Simulation {
 public:
  Simulation(const EventSchedule& schedule, const TimeVaryingTopology& topo, const Objective& objective,
             const DadaoParams& params, const RunOptions& options)
      : schedule_(schedule),
        topo_(topo),
        objective_(objective),
        params_(params),
        options_(options),
        prop_(DriftMatrix(params)),
        average_(objective.num_nodes(), objective.dim()),
        batch_rng_(CounterRng(options.minibatch_seed).split(streams::kMiniBatch)) {
    const int n = objective.num_nodes();
    if (topo.num_nodes() != n) throw ParameterError("run: topology and objective sizes differ");
    if (options.mode.kind == RunMode::Kind::Stochastic) {
      for (int i = 0; i < n; ++i)
        if (options.mode.batch < 1 || options.mode.batch > objective.samples(i))
          throw ParameterError("run: batch size must be in [1, m]");
    }
    for (double p : options.probe_times)
      if (!(p >= 0.0) || p > schedule.t_max()) throw ParameterError("run: probe time outside [0, t_max]");
    for (std::size_t k = 1; k < options.probe_times.size(); ++k)
      if (options.probe_times[k] < options.probe_times[k - 1]) throw ParameterError("run: probe times must be sorted");

    if (options.initial.empty()) {
      states_.assign(static_cast<std::size_t>(n), NodeState(objective.dim()));
    } else {
      if (options.initial.size() != static_cast<std::size_t>(n)) throw ParameterError("run: wrong number of initial states");
      states_ = options.initial;
      for (const auto& s : states_) {
        if (s.dim() != objective.dim() || s.blocks.cols() != kNumBlocks)
          throw ParameterError("run: initial state has the wrong shape");
        if (s.last_update > 0.0) throw ParameterError("run: initial states must start at time 0");
      }
      for (auto& s : states_) s.last_update = 0.0;
      // The dual blocks must start on the zero-sum subspace; gossip preserves
      // their sums, so any offset would shift the fixed point.
      Eigen::VectorXd sum_z = Eigen::VectorXd::Zero(objective.dim()), sum_zt = sum_z;
      double scale = 1.0;
      for (const auto& s : states_) {
        sum_z += s.z();
        sum_zt += s.z_t();
        scale = std::max(scale, s.blocks.cwiseAbs().maxCoeff());
      }
      if (sum_z.norm() > 1e-9 * n * scale || sum_zt.norm() > 1e-9 * n * scale)
        throw ParameterError("run: initial z and z~ must sum to zero over the nodes");
    }

    if (options.record_lyapunov) {
      certificate_ = objective.saddle_certificate(params.nu);
      for (std::size_t q = 0; q < topo.graphs().size(); ++q) {
        const auto edges = static_cast<double>(topo.graphs()[q].num_edges());
        if (options.comm_rate > 0.0 && edges > 0.0)
          gossip_pinv_.push_back(topo.laplacians()[q].pinv() * (edges / options.comm_rate));
        else
          gossip_pinv_.push_back(Eigen::MatrixXd::Zero(n, n));
      }
    }
  }

  Trajectory execute() {
    const auto& events = schedule_.events();
    for (double probe : options_.probe_times) {
      while (next_ < events.size() && events[next_].time <= probe) {
        if (!step(events[next_])) return finish(events[next_ - 1].time);
      }
      record(probe);
      if (options_.target_mean_dist_sq && out_.records.back().mean_dist_sq <= *options_.target_mean_dist_sq) {
        out_.reached_target = true;
        return finish(probe);
      }
    }
    while (next_ < events.size()) {
      if (!step(events[next_])) return finish(events[next_ - 1].time);
    }
    return finish(schedule_.t_max());
  }

 private:
  // Returns false once the event cap is reached.
  bool step(const Event& e) {
    if (out_.events_processed >= options_.max_events) {
      out_.hit_event_cap = true;
      return false;
    }
    try {
      if (e.kind == EventKind::GradientSpike)
        gradient_event(e);
      else
        comm_event(e);
    } catch (const Error& err) {
      throw Error("event " + std::to_string(next_) + " at t=" + std::to_string(e.time) + ": " + err.what());
    }
    ++next_;
    ++out_.events_processed;
    return true;
  }

  void gradient_event(const Event& e) {
    auto& s = states_.at(static_cast<std::size_t>(e.a));
    propagate_in_place(s, e.time, prop_);
    const Eigen::VectorXd x = s.x();
    Eigen::VectorXd g;
    if (options_.mode.kind == RunMode::Kind::Stochastic) {
      g = objective_.stochastic_grad(e.a, x, options_.mode.batch, batch_rng_);
      sigma_sum_ += (g - objective_.grad(e.a, x)).squaredNorm();
    } else {
      g = objective_.grad(e.a, x);
    }
    gradient_jump_in_place(s, g, params_, e.a);
    average_.add(e.a, s.x());
    ++grad_events_;
  }

  void comm_event(const Event& e) {
    if (e.b < 0 || e.a == e.b) throw ParameterError("run: communication event without a valid edge");
    auto& si = states_.at(static_cast<std::size_t>(e.a));
    auto& sj = states_.at(static_cast<std::size_t>(e.b));
    propagate_in_place(si, e.time, prop_);
    propagate_in_place(sj, e.time, prop_);
    gossip_jump_in_place(si, sj, params_);
    average_.add(e.a, si.x());
    average_.add(e.b, sj.x());
    ++comm_events_;
  }

  std::vector<NodeState> advanced_copies(double t) {
    std::vector<NodeState> copies = states_;
    for (auto& s : copies) propagate_in_place(s, t, prop_);
    return copies;
  }

  void record(double t) {
    const auto copies = advanced_copies(t);
    const auto& x_star = objective_.x_star();
    ProbeRecord r;
    r.time = t;
    r.grad_events = grad_events_;
    r.comm_events = comm_events_;
    r.mean_dist_sq = mean_dist_sq(copies, x_star);
    r.consensus_err = consensus_err(copies);
    if (options_.record_lyapunov) {
      const auto coeffs = LyapunovCoefficients::at(t, params_);
      r.lyapunov = lyapunov(copies, coeffs, *certificate_, gossip_pinv_[topo_.active_index(t)], objective_, params_.nu,
                             options_.proof_form_potential ? PotentialForm::ProofForm : PotentialForm::AsStated);
    }
    double avg = 0.0;
    for (int i = 0; i < objective_.num_nodes(); ++i) {
      const Eigen::VectorXd mean =
          average_.count(i) > 0 ? average_.mean(i) : Eigen::VectorXd(states_[static_cast<std::size_t>(i)].x());
      avg += (mean - x_star).squaredNorm();
    }
    r.running_avg_dist_sq = avg / objective_.num_nodes();
    out_.records.push_back(r);
  }

  Trajectory finish(double stop_time) {
    out_.stop_time = stop_time;
    out_.final_states = advanced_copies(stop_time);
    out_.sigma_sq_hat = grad_events_ > 0 ? sigma_sum_ / static_cast<double>(grad_events_) : 0.0;
    return std::move(out_);
  }

  const EventSchedule& schedule_;
  const TimeVaryingTopology& topo_;
  const Objective& objective_;
  const DadaoParams& params_;
  const RunOptions& options_;
  Propagator prop_;
  RunningAverage average_;
  CounterRng batch_rng_;
  std::vector<NodeState> states_;
  std::optional<SaddleCertificate> certificate_;
  std::vector<Eigen::MatrixXd> gossip_pinv_;
  std::size_t next_ = 0;
  std::uint64_t grad_events_ = 0;
  std::uint64_t comm_events_ = 0;
  double sigma_sum_ = 0.0;
  Trajectory out_;
};

}  // namespace

Trajectory run(const EventSchedule& schedule, const TimeVaryingTopology& topo, const Objective& objective,
               const DadaoParams& params, const RunOptions& options) {
  return Simulation(schedule, topo, objective, params, options).execute();
}

}  // namespace dadao
