#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dadao/dynamics.hpp"
#include "dadao/graph.hpp"
#include "dadao/metrics.hpp"
#include "dadao/objectives.hpp"

namespace dadao {

// Everything a run or sweep needs. Parsed from a `key = value` text file;
// see parse_config for the recognised keys.
struct ExperimentConfig {
  ObjectiveKind task = ObjectiveKind::LinearRegression;

  GraphFamily family;
  int n = 20;
  std::size_t sequence_length = 1;
  double switch_frequency = 1.0;
  std::uint64_t graph_seed = 0;
  std::string graph_file;  // edge list; overrides the generated family

  int m = 100;
  int d = 10;
  std::optional<double> mu_reg;  // ridge; required for logistic regression
  double noise = 0.1;
  std::uint64_t data_seed = 0;
  std::string data_dir;  // load datasets from here instead of generating

  double t_max = 100.0;
  int probe_count = 101;
  std::vector<std::uint64_t> seeds{0};
  RunMode mode;
  std::string output_dir = "out";

  std::optional<double> mu;  // overrides the measured constants
  std::optional<double> L;
  double L_scale = 1.0;
  std::optional<double> comm_rate;  // defaults to lambda*

  bool record_lyapunov = true;
  bool proof_form_potential = false;
  std::uint64_t max_events = 10'000'000;
  double sweep_epsilon = 1e-6;
  bool write_schedules = false;
  bool export_data = false;
};

// Recognised keys (dotted sections):
//   task, t_max, probe_count, seeds, mode, batch, output_dir, comm_rate,
//   max_events, record_lyapunov, potential (stated|proof), write_schedules,
//   graph.kind, graph.n, graph.radius, graph.dim, graph.sequence_length,
//   graph.frequency, graph.seed, graph.file,
//   data.m, data.d, data.mu_reg, data.noise, data.seed, data.dir, data.export,
//   params.mu, params.L, params.L_scale, sweep.epsilon
// Blank lines and `#` comments are ignored. Unknown keys, duplicates and
// malformed values raise FormatError; out-of-range values ParameterError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

// Throws ParameterError for inconsistent settings (including mu > L when
// both are overridden). Called by parse_config and again by the runners.
void validate(const ExperimentConfig& cfg);

// Seed lists: "0,1,2" or the half-open range "0:10", or a mix.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

// Normalised `key = value` rendering; equal configs render equally.
std::string canonical_config(const ExperimentConfig& cfg);
// SHA-256 (hex) of the canonical rendering.
std::string config_hash(const ExperimentConfig& cfg);

// Objective, topology and resolved constants shared by every seed.
struct PreparedExperiment {
  Objective objective;
  TimeVaryingTopology topology;
  double chi1_star = 0.0;  // sup chi1[L/|E|]
  double chi2_star = 0.0;  // sup chi2[L/|E|]
  double lambda_star = 0.0;
  double comm_rate = 0.0;
  // 2 chi1 chi2 <= 1 fails for a comm rate below lambda*.
  bool precondition_violated = false;
  DadaoParams params;
};

// Builds the objective and topology. Errors carry the failing stage.
PreparedExperiment prepare(const ExperimentConfig& cfg);

struct SeedResult {
  std::uint64_t seed = 0;
  Trajectory trajectory;
  LogLinearFit fit;  // of mean_dist_sq over the final 80% of probes
  std::uint64_t grad_events = 0;
  std::uint64_t comm_events = 0;
  bool no_events = false;
};

SeedResult run_seed(const PreparedExperiment& prep, const ExperimentConfig& cfg, std::uint64_t seed,
                    std::optional<double> target_mean_dist_sq = std::nullopt);

struct ExperimentSummary {
  std::string config_hash;
  double chi1_star = 0.0;
  double chi2_star = 0.0;
  double lambda_star = 0.0;
  double comm_rate = 0.0;
  double mu = 0.0;
  double L = 0.0;
  bool precondition_violated = false;
  bool no_events = false;  // some seed saw no events at all
  std::vector<SeedResult> seeds;
  std::vector<std::string> files;  // relative to output_dir
};

// Runs every seed on the worker pool and, if write_outputs, writes one
// trajectory CSV per seed, summary.json and manifest.json to output_dir.
ExperimentSummary run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

struct SweepRow {
  int n = 0;
  double lambda_star = 0.0;
  double chi1_star = 0.0;
  double chi2_star = 0.0;
  double target = 0.0;  // absolute mean_dist_sq threshold
  double comms_to_eps = 0.0;  // means over the seeds that reached it
  double grads_to_eps = 0.0;
  double time_to_eps = 0.0;
  std::size_t seeds = 0;
  std::size_t seeds_reached = 0;
  bool unreached = false;  // some seed hit t_max or the event cap first
};

struct SweepTable {
  std::string config_hash;
  std::vector<SweepRow> rows;
  // Least-squares slopes of log(count) against log(n) over reached rows.
  double comms_exponent = 0.0;
  double grads_exponent = 0.0;
  std::vector<std::string> files;
};

// For each n, runs all seeds until mean_dist_sq <= epsilon * mean_dist_sq(0)
// (checked at probe times) and records the event counts used.
SweepTable scaling_sweep(const ExperimentConfig& cfg, const std::vector<int>& n_values, bool write_outputs = true);

// Slope of log(y) against log(x).
double power_law_exponent(const std::vector<double>& x, const std::vector<double>& y);

// Worker count from DADAO_WORKERS, else the hardware concurrency.
unsigned worker_count();

// Per-node dataset CSVs (`label,feat_0,...`) plus `manifest.txt` holding
// n, m, d, kind, ridge, mu, L and x_star.
void export_datasets(const Objective& objective, const std::filesystem::path& dir);
Objective import_datasets(const std::filesystem::path& dir);

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

}  // namespace dadao
