// Command-line front end: `dadao run` and `dadao sweep`.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dadao/error.hpp"
#include "dadao/experiment.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kParameter = 3, kFormat = 4 };

int report(const std::exception& e, int code) {
  std::cerr << "dadao: " << e.what() << "\n";
  return code;
}

dadao::ExperimentConfig load(const std::string& path, const std::string& seeds, const std::string& out) {
  auto cfg = dadao::load_config(path);
  if (!seeds.empty()) cfg.seeds = dadao::parse_seed_list(seeds);
  if (!out.empty()) cfg.output_dir = out;
  dadao::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven simulator for decentralized accelerated optimization over gossip networks"};
  app.require_subcommand(1);

  std::string config, seeds, out, n_list;
  auto* run = app.add_subcommand("run", "Run every seed of one experiment");
  run->add_option("--config", config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  run->add_option("--seeds", seeds, "Seeds, e.g. 0,1,2 or 0:10 (overrides the config)");
  run->add_option("--out", out, "Output directory (overrides the config)");

  auto* sweep = app.add_subcommand("sweep", "Events needed to reach a relative precision as n varies");
  sweep->add_option("--config", config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--n", n_list, "Comma-separated node counts")->required();
  sweep->add_option("--seeds", seeds, "Seeds, e.g. 0,1,2 or 0:10 (overrides the config)");
  sweep->add_option("--out", out, "Output directory (overrides the config)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(config, seeds, out);
    if (run->parsed()) {
      const auto summary = dadao::run_experiment(cfg);
      std::printf("lambda* %.6g  chi1* %.6g  chi2* %.6g  comm_rate %.6g\n", summary.lambda_star, summary.chi1_star,
                  summary.chi2_star, summary.comm_rate);
      for (const auto& s : summary.seeds) {
        const double last = s.trajectory.records.empty() ? 0.0 : s.trajectory.records.back().mean_dist_sq;
        std::printf("seed %llu  grads %llu  comms %llu  final %.4e  slope %.4e  R2 %.4f%s\n",
                    static_cast<unsigned long long>(s.seed), static_cast<unsigned long long>(s.grad_events),
                    static_cast<unsigned long long>(s.comm_events), last, s.fit.slope, s.fit.r_squared,
                    s.trajectory.hit_event_cap ? "  (event cap)" : "");
      }
      if (summary.no_events) std::printf("warning: some seeds saw no events\n");
      if (summary.precondition_violated)
        std::printf("warning: comm_rate is below lambda*; the convergence hypothesis does not hold\n");
      std::printf("wrote %zu files to %s\n", summary.files.size(), cfg.output_dir.c_str());
    } else {
      const auto table = dadao::scaling_sweep(cfg, dadao::parse_int_list(n_list));
      std::printf("%6s %12s %14s %14s %10s\n", "n", "lambda*", "comms_to_eps", "grads_to_eps", "reached");
      for (const auto& r : table.rows)
        std::printf("%6d %12.5g %14.6g %14.6g %5zu/%-4zu%s\n", r.n, r.lambda_star, r.comms_to_eps, r.grads_to_eps,
                    r.seeds_reached, r.seeds, r.unreached ? " unreached" : "");
      std::printf("exponents: comms %.3f  grads %.3f\n", table.comms_exponent, table.grads_exponent);
      std::printf("wrote %zu files to %s\n", table.files.size(), cfg.output_dir.c_str());
    }
  } catch (const dadao::ParameterError& e) {
    return report(e, kParameter);
  } catch (const dadao::FormatError& e) {
    return report(e, kFormat);
  } catch (const std::exception& e) {
    return report(e, kFailure);
  }
  return kOk;
}
