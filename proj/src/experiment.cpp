#include "dadao/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dadao/error.hpp"
#include "dadao/events.hpp"

namespace dadao {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, sep)) parts.push_back(trim(part));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError("config: " + key + ": not a number: '" + text + "'");
  return v;
}

std::int64_t to_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError("config: " + key + ": not an integer: '" + text + "'");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError("config: " + key + ": not a non-negative integer: '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  throw FormatError("config: " + key + ": not a boolean: '" + text + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Re-throws a library error with the failing stage prepended, keeping its type.
template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ParameterError(stage + ": " + e.what());
  } catch (const DisconnectedError& e) {
    throw DisconnectedError(stage + ": " + e.what());
  } catch (const OrderingError& e) {
    throw OrderingError(stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(stage + ": " + e.what());
  } catch (const CertificationError& e) {
    throw CertificationError(stage + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(stage + ": " + e.what());
  } catch (const Error& e) {
    throw Error(stage + ": " + e.what());
  }
}

// Runs body(k) for k in [0, count) on worker_count() threads. The first
// exception (by job index) is re-thrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), count);
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) {
      try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < count; k = next++) {
          try {
            body(k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return os.str();
}

json seed_json(const SeedResult& r) {
  const auto& tr = r.trajectory;
  return {{"seed", r.seed},
          {"final_mean_dist_sq", tr.records.empty() ? 0.0 : tr.records.back().mean_dist_sq},
          {"final_running_avg_dist_sq", tr.records.empty() ? 0.0 : tr.records.back().running_avg_dist_sq},
          {"slope", r.fit.slope},
          {"intercept", r.fit.intercept},
          {"r_squared", r.fit.r_squared},
          {"fit_points", r.fit.points},
          {"grad_events", r.grad_events},
          {"comm_events", r.comm_events},
          {"stop_time", tr.stop_time},
          {"reached_target", tr.reached_target},
          {"hit_event_cap", tr.hit_event_cap},
          {"sigma_sq_hat", tr.sigma_sq_hat},
          {"no_events", r.no_events}};
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, const std::string& kind,
                    std::vector<std::string>& files) {
  files.push_back("manifest.json");
  const json manifest = {{"kind", kind}, {"config_hash", config_hash(cfg)}, {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) throw FormatError("seed list: empty entry in '" + text + "'");
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      seeds.push_back(to_uint("seeds", item));
    } else {
      const auto lo = to_uint("seeds", trim(item.substr(0, colon)));
      const auto hi = to_uint("seeds", trim(item.substr(colon + 1)));
      if (hi <= lo) throw FormatError("seed list: empty range '" + item + "'");
      for (auto s = lo; s < hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) throw FormatError("seed list: no seeds");
  return seeds;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) throw FormatError("integer list: empty entry in '" + text + "'");
    values.push_back(static_cast<int>(to_int("list", item)));
  }
  if (values.empty()) throw FormatError("integer list: no values");
  return values;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw FormatError("config line " + std::to_string(line_no) + ": empty key or value");
    if (!seen.emplace(key, value).second)
      throw FormatError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");

    if (key == "task") {
      if (value == "linreg")
        cfg.task = ObjectiveKind::LinearRegression;
      else if (value == "logreg")
        cfg.task = ObjectiveKind::LogisticRegression;
      else
        throw FormatError("config: task must be linreg or logreg");
    } else if (key == "t_max") {
      cfg.t_max = to_double(key, value);
    } else if (key == "probe_count") {
      cfg.probe_count = static_cast<int>(to_int(key, value));
    } else if (key == "seeds") {
      cfg.seeds = parse_seed_list(value);
    } else if (key == "mode") {
      if (value == "exact")
        cfg.mode.kind = RunMode::Kind::ExactGradient;
      else if (value == "sgd")
        cfg.mode.kind = RunMode::Kind::Stochastic;
      else
        throw FormatError("config: mode must be exact or sgd");
    } else if (key == "batch") {
      cfg.mode.batch = static_cast<int>(to_int(key, value));
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "comm_rate") {
      cfg.comm_rate = to_double(key, value);
    } else if (key == "max_events") {
      cfg.max_events = to_uint(key, value);
    } else if (key == "record_lyapunov") {
      cfg.record_lyapunov = to_bool(key, value);
    } else if (key == "potential") {
      if (value != "stated" && value != "proof") throw FormatError("config: potential must be stated or proof");
      cfg.proof_form_potential = value == "proof";
    } else if (key == "write_schedules") {
      cfg.write_schedules = to_bool(key, value);
    } else if (key == "graph.kind") {
      try {
        cfg.family.kind = parse_graph_kind(value);
      } catch (const Error& e) {
        throw FormatError(std::string("config: ") + e.what());
      }
    } else if (key == "graph.n") {
      cfg.n = static_cast<int>(to_int(key, value));
    } else if (key == "graph.radius") {
      cfg.family.radius = to_double(key, value);
    } else if (key == "graph.dim") {
      cfg.family.dim = static_cast<int>(to_int(key, value));
    } else if (key == "graph.sequence_length") {
      cfg.sequence_length = to_uint(key, value);
    } else if (key == "graph.frequency") {
      cfg.switch_frequency = to_double(key, value);
    } else if (key == "graph.seed") {
      cfg.graph_seed = to_uint(key, value);
    } else if (key == "graph.file") {
      cfg.graph_file = value;
    } else if (key == "data.m") {
      cfg.m = static_cast<int>(to_int(key, value));
    } else if (key == "data.d") {
      cfg.d = static_cast<int>(to_int(key, value));
    } else if (key == "data.mu_reg") {
      cfg.mu_reg = to_double(key, value);
    } else if (key == "data.noise") {
      cfg.noise = to_double(key, value);
    } else if (key == "data.seed") {
      cfg.data_seed = to_uint(key, value);
    } else if (key == "data.dir") {
      cfg.data_dir = value;
    } else if (key == "data.export") {
      cfg.export_data = to_bool(key, value);
    } else if (key == "params.mu") {
      cfg.mu = to_double(key, value);
    } else if (key == "params.L") {
      cfg.L = to_double(key, value);
    } else if (key == "params.L_scale") {
      cfg.L_scale = to_double(key, value);
    } else if (key == "sweep.epsilon") {
      cfg.sweep_epsilon = to_double(key, value);
    } else {
      throw FormatError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("config: cannot open " + path.string());
  return parse_config(is);
}

void validate(const ExperimentConfig& cfg) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (cfg.graph_file.empty() && cfg.data_dir.empty() && cfg.n < 2)
    throw ParameterError("config: graph.n must be >= 2");
  if (cfg.m < 1 || cfg.d < 1) throw ParameterError("config: data.m and data.d must be >= 1");
  if (cfg.sequence_length < 1) throw ParameterError("config: graph.sequence_length must be >= 1");
  if (!positive(cfg.switch_frequency)) throw ParameterError("config: graph.frequency must be positive");
  if (!(cfg.t_max >= 0.0) || !std::isfinite(cfg.t_max)) throw ParameterError("config: t_max must be >= 0");
  if (cfg.probe_count < 2) throw ParameterError("config: probe_count must be >= 2");
  if (cfg.seeds.empty()) throw ParameterError("config: at least one seed is required");
  if (cfg.mode.kind == RunMode::Kind::Stochastic && cfg.mode.batch < 1)
    throw ParameterError("config: batch must be >= 1");
  if (cfg.mu_reg && !(*cfg.mu_reg >= 0.0)) throw ParameterError("config: data.mu_reg must be >= 0");
  if (cfg.task == ObjectiveKind::LogisticRegression && cfg.data_dir.empty() && !(cfg.mu_reg && *cfg.mu_reg > 0.0))
    throw ParameterError("config: logreg needs a positive data.mu_reg");
  if (!(cfg.noise >= 0.0)) throw ParameterError("config: data.noise must be >= 0");
  if (cfg.mu && !positive(*cfg.mu)) throw ParameterError("config: params.mu must be positive");
  if (cfg.L && !positive(*cfg.L)) throw ParameterError("config: params.L must be positive");
  if (!positive(cfg.L_scale)) throw ParameterError("config: params.L_scale must be positive");
  if (cfg.mu && cfg.L && *cfg.mu > *cfg.L * cfg.L_scale) throw ParameterError("config: params.mu must not exceed params.L");
  if (cfg.comm_rate && !positive(*cfg.comm_rate)) throw ParameterError("config: comm_rate must be positive");
  if (cfg.max_events < 1) throw ParameterError("config: max_events must be >= 1");
  if (!(cfg.sweep_epsilon > 0.0 && cfg.sweep_epsilon < 1.0)) throw ParameterError("config: sweep.epsilon must be in (0, 1)");
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  // Unset optionals and empty paths are left out so the text parses back.
  auto opt = [&os](const char* key, const std::optional<double>& v) {
    if (v) os << key << " = " << fmt(*v) << "\n";
  };
  auto path = [&os](const char* key, const std::string& v) {
    if (!v.empty()) os << key << " = " << v << "\n";
  };
  std::string seeds;
  for (std::size_t k = 0; k < cfg.seeds.size(); ++k) seeds += (k ? "," : "") + std::to_string(cfg.seeds[k]);
  os << "task = " << to_string(cfg.task) << "\n"
     << "graph.kind = " << to_string(cfg.family.kind) << "\n"
     << "graph.n = " << cfg.n << "\n"
     << "graph.radius = " << fmt(cfg.family.radius) << "\n"
     << "graph.dim = " << cfg.family.dim << "\n"
     << "graph.sequence_length = " << cfg.sequence_length << "\n"
     << "graph.frequency = " << fmt(cfg.switch_frequency) << "\n"
     << "graph.seed = " << cfg.graph_seed << "\n";
  path("graph.file", cfg.graph_file);
  os << "data.m = " << cfg.m << "\n"
     << "data.d = " << cfg.d << "\n";
  opt("data.mu_reg", cfg.mu_reg);
  os << "data.noise = " << fmt(cfg.noise) << "\n"
     << "data.seed = " << cfg.data_seed << "\n";
  path("data.dir", cfg.data_dir);
  os << "t_max = " << fmt(cfg.t_max) << "\n"
     << "probe_count = " << cfg.probe_count << "\n"
     << "seeds = " << seeds << "\n"
     << "mode = " << (cfg.mode.kind == RunMode::Kind::Stochastic ? "sgd" : "exact") << "\n"
     << "batch = " << cfg.mode.batch << "\n";
  opt("params.mu", cfg.mu);
  opt("params.L", cfg.L);
  os << "params.L_scale = " << fmt(cfg.L_scale) << "\n";
  opt("comm_rate", cfg.comm_rate);
  os << "record_lyapunov = " << (cfg.record_lyapunov ? "true" : "false") << "\n"
     << "potential = " << (cfg.proof_form_potential ? "proof" : "stated") << "\n"
     << "max_events = " << cfg.max_events << "\n"
     << "sweep.epsilon = " << fmt(cfg.sweep_epsilon) << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

unsigned worker_count() {
  if (const char* env = std::getenv("DADAO_WORKERS"); env && *env) {
    unsigned v = 0;
    const auto* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec == std::errc() && ptr == end && v > 0) return v;
    throw ParameterError("DADAO_WORKERS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PreparedExperiment prepare(const ExperimentConfig& cfg) {
  staged("config", [&] { validate(cfg); });
  Objective objective = staged("objective", [&] {
    if (!cfg.data_dir.empty()) return import_datasets(cfg.data_dir);
    if (cfg.task == ObjectiveKind::LinearRegression)
      return make_linear_regression(cfg.n, cfg.m, cfg.d, cfg.data_seed, {cfg.noise, cfg.mu_reg.value_or(0.0)});
    return make_logistic(cfg.n, cfg.m, cfg.d, *cfg.mu_reg, cfg.data_seed);
  });
  TimeVaryingTopology topology = staged("topology", [&] {
    if (!cfg.graph_file.empty()) return load_edge_list(cfg.graph_file);
    return generate_sequence(cfg.family, objective.num_nodes(), cfg.sequence_length, cfg.switch_frequency,
                             cfg.graph_seed);
  });
  return staged("parameters", [&] {
    if (topology.num_nodes() != objective.num_nodes())
      throw ParameterError("topology has " + std::to_string(topology.num_nodes()) + " nodes but the data has " +
                           std::to_string(objective.num_nodes()));
    const double chi1n = topology.chi1_normalized();
    const double chi2n = topology.chi2_normalized();
    const double ls = lambda_star(topology);
    const double rate = cfg.comm_rate.value_or(ls);
    const double mu = cfg.mu.value_or(objective.mu());
    const double L = cfg.L.value_or(objective.L()) * cfg.L_scale;
    if (mu > L) throw ParameterError("mu = " + fmt(mu) + " exceeds L = " + fmt(L));
    const DadaoParams params = params_from(mu, L, chi1n / rate);
    const bool violated = 2.0 * (chi1n / rate) * (chi2n / rate) > 1.0 + 1e-12;
    return PreparedExperiment{std::move(objective), std::move(topology), chi1n, chi2n, ls, rate, violated, params};
  });
}

SeedResult run_seed(const PreparedExperiment& prep, const ExperimentConfig& cfg, std::uint64_t seed,
                    std::optional<double> target_mean_dist_sq) {
  const int n = prep.objective.num_nodes();
  // Schedules are pregenerated; past the event cap only a short tail is
  // kept so memory stays bounded.
  const double total_rate = n + prep.comm_rate;
  const double cap = static_cast<double>(cfg.max_events);
  const double horizon = std::min(cfg.t_max, (cap + 10.0 * std::sqrt(cap) + 100.0) / total_rate);
  const EventSchedule schedule =
      staged("schedule", [&] { return build_schedule(n, prep.comm_rate, prep.topology, horizon, seed); });

  RunOptions options;
  options.probe_times = uniform_probes(cfg.t_max, cfg.probe_count);
  options.probe_times.erase(std::remove_if(options.probe_times.begin(), options.probe_times.end(),
                                           [&](double t) { return t > horizon; }),
                            options.probe_times.end());
  options.mode = cfg.mode;
  options.minibatch_seed = seed;
  options.comm_rate = prep.comm_rate;
  options.record_lyapunov = cfg.record_lyapunov;
  options.proof_form_potential = cfg.proof_form_potential;
  options.target_mean_dist_sq = target_mean_dist_sq;
  options.max_events = cfg.max_events;

  SeedResult result;
  result.seed = seed;
  result.trajectory = staged("simulation (seed " + std::to_string(seed) + ")",
                             [&] { return run(schedule, prep.topology, prep.objective, prep.params, options); });
  auto& tr = result.trajectory;
  if (horizon < cfg.t_max && !tr.reached_target) tr.hit_event_cap = true;
  for (std::size_t k = 0; k < tr.events_processed; ++k)
    (schedule.events()[k].kind == EventKind::GradientSpike ? result.grad_events : result.comm_events)++;
  result.no_events = tr.events_processed == 0;
  std::vector<double> t, y;
  for (const auto& r : tr.records) {
    t.push_back(r.time);
    y.push_back(r.mean_dist_sq);
  }
  result.fit = fit_log_linear(t, y, 0.8);

  if (cfg.write_schedules && !cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    save_schedule_csv((fs::path(cfg.output_dir) / ("schedule_seed" + std::to_string(seed) + ".csv")).string(),
                      schedule);
  }
  return result;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "time,grad_events,comm_events,mean_dist_sq,consensus_err,lyapunov,running_avg_dist_sq\n";
  for (const auto& r : trajectory.records) {
    os << fmt(r.time) << ',' << r.grad_events << ',' << r.comm_events << ',' << fmt(r.mean_dist_sq) << ','
       << fmt(r.consensus_err) << ',' << fmt(r.lyapunov) << ',' << fmt(r.running_avg_dist_sq) << '\n';
  }
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  const PreparedExperiment prep = prepare(cfg);

  ExperimentSummary summary;
  summary.config_hash = config_hash(cfg);
  summary.chi1_star = prep.chi1_star;
  summary.chi2_star = prep.chi2_star;
  summary.lambda_star = prep.lambda_star;
  summary.comm_rate = prep.comm_rate;
  summary.mu = prep.params.mu;
  summary.L = prep.params.L;
  summary.precondition_violated = prep.precondition_violated;
  summary.seeds.resize(cfg.seeds.size());

  ExperimentConfig run_cfg = cfg;
  if (!write_outputs) run_cfg.write_schedules = false;
  if (write_outputs) staged("output", [&] { fs::create_directories(cfg.output_dir); });
  parallel_for(cfg.seeds.size(), [&](std::size_t k) { summary.seeds[k] = run_seed(prep, run_cfg, cfg.seeds[k]); });
  for (const auto& s : summary.seeds) summary.no_events = summary.no_events || s.no_events;

  if (!write_outputs) return summary;

  staged("output", [&] {
    const fs::path dir(cfg.output_dir);
    for (const auto& s : summary.seeds) {
      const std::string name = "trajectory_seed" + std::to_string(s.seed) + ".csv";
      std::ostringstream os;
      write_trajectory_csv(os, s.trajectory);
      write_text(dir / name, os.str());
      summary.files.push_back(name);
      if (cfg.write_schedules) summary.files.push_back("schedule_seed" + std::to_string(s.seed) + ".csv");
    }
    if (cfg.export_data) {
      export_datasets(prep.objective, dir / "data");
      summary.files.push_back("data/manifest.txt");
      for (int i = 0; i < prep.objective.num_nodes(); ++i)
        summary.files.push_back("data/node_" + std::to_string(i) + ".csv");
    }
    write_text(dir / "config.txt", canonical_config(cfg));
    summary.files.push_back("config.txt");

    json seeds = json::array();
    double slope_sum = 0.0;
    for (const auto& s : summary.seeds) {
      seeds.push_back(seed_json(s));
      slope_sum += s.fit.slope;
    }
    const json out = {{"config_hash", summary.config_hash},
                      {"task", to_string(cfg.task)},
                      {"n", prep.objective.num_nodes()},
                      {"d", prep.objective.dim()},
                      {"chi1_star", summary.chi1_star},
                      {"chi2_star", summary.chi2_star},
                      {"lambda_star", summary.lambda_star},
                      {"comm_rate", summary.comm_rate},
                      {"mu", summary.mu},
                      {"L", summary.L},
                      {"precondition_violated", summary.precondition_violated},
                      {"no_events", summary.no_events},
                      {"mean_slope", slope_sum / static_cast<double>(summary.seeds.size())},
                      {"seeds", seeds}};
    write_text(dir / "summary.json", out.dump(2) + "\n");
    summary.files.push_back("summary.json");
    write_manifest(dir, cfg, "run", summary.files);
  });
  return summary;
}

double power_law_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nan("");
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) return std::nan("");
    lx.push_back(std::log(x[k]));
    ly.push_back(std::log(y[k]));
  }
  const double m = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k] / m;
    my += ly[k] / m;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  return sxx > 0.0 ? sxy / sxx : std::nan("");
}

SweepTable scaling_sweep(const ExperimentConfig& cfg, const std::vector<int>& n_values, bool write_outputs) {
  if (n_values.size() < 2) throw ParameterError("sweep: need at least two values of n");
  if (!cfg.graph_file.empty() || !cfg.data_dir.empty())
    throw ParameterError("sweep: graph.file and data.dir fix n and cannot be swept");

  std::vector<ExperimentConfig> configs;
  std::vector<std::optional<PreparedExperiment>> preps(n_values.size());
  for (int n : n_values) {
    configs.push_back(cfg);
    configs.back().n = n;
    configs.back().write_schedules = false;
  }
  parallel_for(n_values.size(), [&](std::size_t k) { preps[k].emplace(prepare(configs[k])); });

  // All (n, seed) pairs go to one pool.
  const std::size_t per_n = cfg.seeds.size();
  std::vector<SeedResult> results(n_values.size() * per_n);
  std::vector<double> targets(n_values.size());
  for (std::size_t k = 0; k < n_values.size(); ++k)
    targets[k] = cfg.sweep_epsilon * preps[k]->objective.x_star().squaredNorm();
  parallel_for(results.size(), [&](std::size_t job) {
    const std::size_t k = job / per_n;
    results[job] = run_seed(*preps[k], configs[k], cfg.seeds[job % per_n], targets[k]);
  });

  SweepTable table;
  table.config_hash = config_hash(cfg);
  std::vector<double> ns, comms, grads;
  for (std::size_t k = 0; k < n_values.size(); ++k) {
    SweepRow row;
    row.n = n_values[k];
    row.lambda_star = preps[k]->lambda_star;
    row.chi1_star = preps[k]->chi1_star;
    row.chi2_star = preps[k]->chi2_star;
    row.target = targets[k];
    row.seeds = per_n;
    for (std::size_t s = 0; s < per_n; ++s) {
      const auto& r = results[k * per_n + s];
      if (!r.trajectory.reached_target) continue;
      ++row.seeds_reached;
      row.comms_to_eps += static_cast<double>(r.comm_events);
      row.grads_to_eps += static_cast<double>(r.grad_events);
      row.time_to_eps += r.trajectory.stop_time;
    }
    if (row.seeds_reached > 0) {
      const auto c = static_cast<double>(row.seeds_reached);
      row.comms_to_eps /= c;
      row.grads_to_eps /= c;
      row.time_to_eps /= c;
    }
    row.unreached = row.seeds_reached < row.seeds;
    if (!row.unreached) {
      ns.push_back(row.n);
      comms.push_back(row.comms_to_eps);
      grads.push_back(row.grads_to_eps);
    }
    table.rows.push_back(row);
  }
  table.comms_exponent = power_law_exponent(ns, comms);
  table.grads_exponent = power_law_exponent(ns, grads);

  if (!write_outputs) return table;
  staged("output", [&] {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    std::ostringstream os;
    os << "n,lambda_star,chi1_star,chi2_star,target,comms_to_eps,grads_to_eps,time_to_eps,seeds,seeds_reached,"
          "unreached\n";
    for (const auto& r : table.rows) {
      os << r.n << ',' << fmt(r.lambda_star) << ',' << fmt(r.chi1_star) << ',' << fmt(r.chi2_star) << ','
         << fmt(r.target) << ',' << fmt(r.comms_to_eps) << ',' << fmt(r.grads_to_eps) << ',' << fmt(r.time_to_eps)
         << ',' << r.seeds << ',' << r.seeds_reached << ',' << (r.unreached ? 1 : 0) << '\n';
    }
    write_text(dir / "sweep.csv", os.str());
    table.files.push_back("sweep.csv");
    write_text(dir / "config.txt", canonical_config(cfg));
    table.files.push_back("config.txt");
    auto number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    const json out = {{"config_hash", table.config_hash},
                      {"graph", to_string(cfg.family.kind)},
                      {"epsilon", cfg.sweep_epsilon},
                      {"comms_exponent", number(table.comms_exponent)},
                      {"grads_exponent", number(table.grads_exponent)},
                      {"unreached_rows", std::count_if(table.rows.begin(), table.rows.end(),
                                                       [](const SweepRow& r) { return r.unreached; })}};
    write_text(dir / "summary.json", out.dump(2) + "\n");
    table.files.push_back("summary.json");
    write_manifest(dir, cfg, "sweep", table.files);
  });
  return table;
}

void export_datasets(const Objective& objective, const fs::path& dir) {
  fs::create_directories(dir);
  for (int i = 0; i < objective.num_nodes(); ++i) {
    const auto& ds = objective.datasets()[i];
    std::ostringstream os;
    for (Eigen::Index j = 0; j < ds.features.rows(); ++j) {
      os << fmt(ds.labels[j]);
      for (Eigen::Index k = 0; k < ds.features.cols(); ++k) os << ',' << fmt(ds.features(j, k));
      os << '\n';
    }
    write_text(dir / ("node_" + std::to_string(i) + ".csv"), os.str());
  }
  std::ostringstream os;
  os << "kind = " << to_string(objective.kind()) << "\n"
     << "n = " << objective.num_nodes() << "\n"
     << "m = " << objective.samples(0) << "\n"
     << "d = " << objective.dim() << "\n"
     << "ridge = " << fmt(objective.ridge()) << "\n"
     << "mu = " << fmt(objective.mu()) << "\n"
     << "L = " << fmt(objective.L()) << "\n"
     << "x_star = ";
  for (int k = 0; k < objective.dim(); ++k) os << (k ? "," : "") << fmt(objective.x_star()[k]);
  os << "\n";
  write_text(dir / "manifest.txt", os.str());
}

Objective import_datasets(const fs::path& dir) {
  std::ifstream ms(dir / "manifest.txt");
  if (!ms) throw FormatError("datasets: missing " + (dir / "manifest.txt").string());
  std::map<std::string, std::string> manifest;
  for (std::string line; std::getline(ms, line);) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("datasets: bad manifest line '" + line + "'");
    manifest[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto field = [&](const std::string& key) {
    const auto it = manifest.find(key);
    if (it == manifest.end()) throw FormatError("datasets: manifest lacks '" + key + "'");
    return it->second;
  };
  const std::string kind_name = field("kind");
  if (kind_name != "linreg" && kind_name != "logreg") throw FormatError("datasets: unknown kind '" + kind_name + "'");
  const auto kind = kind_name == "linreg" ? ObjectiveKind::LinearRegression : ObjectiveKind::LogisticRegression;
  const auto n = to_int("n", field("n"));
  const auto d = to_int("d", field("d"));
  if (n < 1 || d < 1) throw FormatError("datasets: n and d must be positive");

  std::vector<LocalDataset> data(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const fs::path path = dir / ("node_" + std::to_string(i) + ".csv");
    std::ifstream is(path);
    if (!is) throw FormatError("datasets: missing " + path.string());
    std::vector<std::vector<double>> rows;
    for (std::string line; std::getline(is, line);) {
      line = trim(line);
      if (line.empty()) continue;
      const auto cells = split(line, ',');
      if (static_cast<std::int64_t>(cells.size()) != d + 1)
        throw FormatError("datasets: " + path.string() + ": expected " + std::to_string(d + 1) + " columns");
      std::vector<double> row;
      for (const auto& c : cells) row.push_back(to_double(path.string(), c));
      rows.push_back(std::move(row));
    }
    auto& ds = data[static_cast<std::size_t>(i)];
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
    ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      ds.labels[j] = rows[j][0];
      for (std::int64_t k = 0; k < d; ++k) ds.features(j, k) = rows[j][k + 1];
    }
  }
  Objective objective(kind, std::move(data), to_double("ridge", field("ridge")));

  const auto stored = split(field("x_star"), ',');
  if (static_cast<std::int64_t>(stored.size()) != d) throw FormatError("datasets: x_star has the wrong length");
  Eigen::VectorXd x(d);
  for (std::int64_t k = 0; k < d; ++k) x[k] = to_double("x_star", stored[k]);
  if ((x - objective.x_star()).norm() > 1e-8 * (1.0 + x.norm()))
    throw CertificationError("datasets: recomputed minimizer differs from the manifest");
  return objective;
}

}  // namespace dadao
