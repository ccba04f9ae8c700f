#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dadao/dynamics.hpp"
#include "dadao/error.hpp"
#include "dadao/experiment.hpp"
#include "dadao/graph.hpp"
#include "dadao/metrics.hpp"
#include "dadao/objectives.hpp"

namespace py = pybind11;
using namespace dadao;

namespace {

using EdgeTuple = std::tuple<Index, Index, double>;

Graph make_graph(Index n, const std::vector<py::tuple>& edges) {
  Graph g(n);
  for (const auto& e : edges) {
    if (e.size() != 2 && e.size() != 3) throw ParameterError("edges must be (i, j) or (i, j, weight)");
    g.add_edge(e[0].cast<Index>(), e[1].cast<Index>(), e.size() == 3 ? e[2].cast<double>() : 1.0);
  }
  return g;
}

std::vector<EdgeTuple> edge_tuples(const Graph& g) {
  std::vector<EdgeTuple> out;
  for (const auto& e : g.edges()) out.emplace_back(e.i, e.j, e.weight);
  return out;
}

ExperimentConfig config_from_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

py::dict trajectory_dict(const Trajectory& tr) {
  const auto k = static_cast<Eigen::Index>(tr.records.size());
  Eigen::VectorXd time(k), grads(k), comms(k), dist(k), cons(k), phi(k), avg(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& rec = tr.records[static_cast<std::size_t>(r)];
    time[r] = rec.time;
    grads[r] = static_cast<double>(rec.grad_events);
    comms[r] = static_cast<double>(rec.comm_events);
    dist[r] = rec.mean_dist_sq;
    cons[r] = rec.consensus_err;
    phi[r] = rec.lyapunov;
    avg[r] = rec.running_avg_dist_sq;
  }
  const auto est = tr.estimates();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(est.size()), est.empty() ? 0 : est.front().size());
  for (std::size_t i = 0; i < est.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = est[i].transpose();
  py::dict d;
  d["time"] = time;
  d["grad_events"] = grads;
  d["comm_events"] = comms;
  d["mean_dist_sq"] = dist;
  d["consensus_err"] = cons;
  d["lyapunov"] = phi;
  d["running_avg_dist_sq"] = avg;
  d["x"] = x;
  d["stop_time"] = tr.stop_time;
  d["events_processed"] = tr.events_processed;
  d["reached_target"] = tr.reached_target;
  d["hit_event_cap"] = tr.hit_event_cap;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dadao, m) {
  m.doc() = "Event-driven simulator for decentralized asynchronous optimization";

  static py::exception<Error> base(m, "Error");
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<DisconnectedError>(m, "DisconnectedError", base.ptr());
  py::register_exception<OrderingError>(m, "OrderingError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<CertificationError>(m, "CertificationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  py::class_<Graph>(m, "Graph")
      .def(py::init(&make_graph), py::arg("n"), py::arg("edges") = std::vector<py::tuple>{})
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("edges", &edge_tuples)
      .def("is_connected", &Graph::is_connected)
      .def("__repr__", [](const Graph& g) {
        return "Graph(n=" + std::to_string(g.num_nodes()) + ", edges=" + std::to_string(g.num_edges()) + ")";
      });

  m.def(
      "generate_graph",
      [](const std::string& kind, Index n, std::uint64_t seed, double radius, int dim) {
        return generate({parse_graph_kind(kind), radius, dim}, n, seed);
      },
      py::arg("kind"), py::arg("n"), py::arg("seed") = 0, py::arg("radius") = 0.3, py::arg("dim") = 2,
      "Connected graph of the family star, line, cycle, complete, grid or random_geometric.");
  m.def(
      "laplacian", [](const Graph& g) { return build_laplacian(g).matrix(); }, py::arg("graph"));
  m.def(
      "chi1", [](const Graph& g) { return chi1(build_laplacian(g)); }, py::arg("graph"),
      "Inverse of the smallest nonzero Laplacian eigenvalue.");
  m.def(
      "chi2", [](const Graph& g) { return chi2(build_laplacian(g), g); }, py::arg("graph"),
      "Half the largest effective resistance over the edges.");
  m.def(
      "lambda_star", [](const Graph& g) { return lambda_star(TimeVaryingTopology::fixed(g)); }, py::arg("graph"));

  py::class_<DadaoParams>(m, "Params")
      .def_readonly("mu", &DadaoParams::mu)
      .def_readonly("L", &DadaoParams::L)
      .def_readonly("nu", &DadaoParams::nu)
      .def_readonly("chi1_star", &DadaoParams::chi1_star)
      .def_readonly("eta", &DadaoParams::eta)
      .def_readonly("eta_t", &DadaoParams::eta_t)
      .def_readonly("gamma", &DadaoParams::gamma)
      .def_readonly("gamma_t", &DadaoParams::gamma_t)
      .def_readonly("delta", &DadaoParams::delta)
      .def_readonly("delta_t", &DadaoParams::delta_t)
      .def_readonly("alpha", &DadaoParams::alpha)
      .def_readonly("alpha_t", &DadaoParams::alpha_t)
      .def_readonly("beta", &DadaoParams::beta)
      .def_readonly("beta_t", &DadaoParams::beta_t)
      .def_readonly("theta", &DadaoParams::theta);

  m.def("params_from", &params_from, py::arg("mu"), py::arg("L"), py::arg("chi1_star"));
  m.def(
      "drift_matrix", [](const DadaoParams& p) { return Eigen::MatrixXd(DriftMatrix(p).matrix()); }, py::arg("params"),
      "6x6 generator; rows and columns ordered x, x~, y, y~, z, z~.");
  m.def(
      "drift_exp", [](const DadaoParams& p, double dt) { return Eigen::MatrixXd(DriftMatrix(p).exp(dt)); },
      py::arg("params"), py::arg("dt"));

  py::class_<Objective>(m, "Objective")
      .def_property_readonly("kind", [](const Objective& o) { return to_string(o.kind()); })
      .def_property_readonly("num_nodes", &Objective::num_nodes)
      .def_property_readonly("dim", &Objective::dim)
      .def_property_readonly("mu", &Objective::mu)
      .def_property_readonly("L", &Objective::L)
      .def_property_readonly("x_star", &Objective::x_star)
      .def("value", &Objective::value, py::arg("i"), py::arg("x"))
      .def("grad", &Objective::grad, py::arg("i"), py::arg("x"));

  m.def(
      "make_linear_regression",
      [](int n, int m_, int d, std::uint64_t seed, double noise, double ridge) {
        return make_linear_regression(n, m_, d, seed, {noise, ridge});
      },
      py::arg("n"), py::arg("m"), py::arg("d"), py::arg("seed") = 0, py::arg("noise") = 0.1, py::arg("ridge") = 0.0);
  m.def("make_logistic", &make_logistic, py::arg("n"), py::arg("m"), py::arg("d"), py::arg("mu_reg"),
        py::arg("seed") = 0);

  m.def(
      "build_schedule",
      [](const Graph& g, double comm_rate, double t_max, std::uint64_t seed) {
        const auto s = build_schedule(g.num_nodes(), comm_rate, TimeVaryingTopology::fixed(g), t_max, seed);
        const auto k = static_cast<Eigen::Index>(s.size());
        Eigen::VectorXd time(k);
        Eigen::VectorXi kind(k), a(k), b(k);
        for (Eigen::Index e = 0; e < k; ++e) {
          const auto& ev = s.events()[static_cast<std::size_t>(e)];
          time[e] = ev.time;
          kind[e] = ev.kind == EventKind::GradientSpike ? 0 : 1;
          a[e] = static_cast<int>(ev.a);
          b[e] = static_cast<int>(ev.b);
        }
        py::dict d;
        d["time"] = time;
        d["kind"] = kind;
        d["a"] = a;
        d["b"] = b;
        return d;
      },
      py::arg("graph"), py::arg("comm_rate"), py::arg("t_max"), py::arg("seed") = 0,
      "Event arrays: time, kind (0 gradient, 1 communication), a, b (-1 for gradient events).");

  m.def(
      "run",
      [](const Graph& g, const Objective& obj, double t_max, std::uint64_t seed, int probe_count,
         std::optional<double> comm_rate, std::optional<int> batch, bool record_lyapunov) {
        const auto topo = TimeVaryingTopology::fixed(g);
        const double rate = comm_rate ? *comm_rate : lambda_star(topo);
        const auto params = params_from(obj.mu(), obj.L(), topo.chi1_normalized() / rate);
        RunOptions opts;
        opts.probe_times = uniform_probes(t_max, probe_count);
        opts.comm_rate = rate;
        opts.minibatch_seed = seed;
        opts.record_lyapunov = record_lyapunov;
        if (batch) opts.mode = RunMode::stochastic(*batch);
        Trajectory tr;
        {
          py::gil_scoped_release release;
          tr = run(build_schedule(g.num_nodes(), rate, topo, t_max, seed), topo, obj, params, opts);
        }
        return trajectory_dict(tr);
      },
      py::arg("graph"), py::arg("objective"), py::arg("t_max"), py::arg("seed") = 0, py::arg("probe_count") = 101,
      py::arg("comm_rate") = py::none(), py::arg("batch") = py::none(), py::arg("record_lyapunov") = true,
      "Simulates one seed; the communication rate defaults to lambda*.");

  m.def(
      "run_experiment",
      [](const std::string& config, std::optional<std::string> output_dir) {
        auto cfg = config_from_text(config);
        if (output_dir) cfg.output_dir = *output_dir;
        ExperimentSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(cfg, output_dir.has_value());
        }
        py::list seeds;
        for (const auto& r : s.seeds) {
          py::dict d = trajectory_dict(r.trajectory);
          d["seed"] = r.seed;
          d["slope"] = r.fit.slope;
          d["r_squared"] = r.fit.r_squared;
          seeds.append(d);
        }
        py::dict out;
        out["config_hash"] = s.config_hash;
        out["lambda_star"] = s.lambda_star;
        out["chi1_star"] = s.chi1_star;
        out["chi2_star"] = s.chi2_star;
        out["comm_rate"] = s.comm_rate;
        out["mu"] = s.mu;
        out["L"] = s.L;
        out["no_events"] = s.no_events;
        out["precondition_violated"] = s.precondition_violated;
        out["seeds"] = seeds;
        out["files"] = s.files;
        return out;
      },
      py::arg("config"), py::arg("output_dir") = py::none(),
      "Runs the `key = value` config text; writes files only when output_dir is given.");

  m.def(
      "scaling_sweep",
      [](const std::string& config, const std::vector<int>& n_values, std::optional<std::string> output_dir) {
        auto cfg = config_from_text(config);
        if (output_dir) cfg.output_dir = *output_dir;
        SweepTable t;
        {
          py::gil_scoped_release release;
          t = scaling_sweep(cfg, n_values, output_dir.has_value());
        }
        py::list rows;
        for (const auto& r : t.rows) {
          py::dict d;
          d["n"] = r.n;
          d["lambda_star"] = r.lambda_star;
          d["target"] = r.target;
          d["comms_to_eps"] = r.comms_to_eps;
          d["grads_to_eps"] = r.grads_to_eps;
          d["time_to_eps"] = r.time_to_eps;
          d["seeds_reached"] = r.seeds_reached;
          d["unreached"] = r.unreached;
          rows.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["comms_exponent"] = t.comms_exponent;
        out["grads_exponent"] = t.grads_exponent;
        return out;
      },
      py::arg("config"), py::arg("n_values"), py::arg("output_dir") = py::none());
}
