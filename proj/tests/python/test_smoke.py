import math

import numpy as np
import pytest

import dadao


def test_graph_constants():
    k3 = dadao.generate_graph("complete", 3)
    assert k3.num_edges == 3
    assert dadao.lambda_star(k3) == pytest.approx(math.sqrt(2))
    star = dadao.generate_graph("star", 5)
    assert all(0 in e[:2] for e in star.edges)
    assert dadao.chi1(star) == pytest.approx(1.0)
    assert dadao.chi2(star) == pytest.approx(0.5)
    lap = dadao.laplacian(dadao.Graph(2, [(0, 1)]))
    np.testing.assert_array_equal(lap, [[1, -1], [-1, 1]])


def test_disconnected_graph_raises():
    g = dadao.Graph(4, [(0, 1), (2, 3)])
    assert not g.is_connected()
    with pytest.raises(dadao.DisconnectedError):
        dadao.chi1(g)


def test_params_and_drift():
    p = dadao.params_from(8, 16, 1)
    assert (p.nu, p.eta, p.gamma, p.beta_t, p.theta) == pytest.approx((4, 1 / 16, 1 / 64, 4, 1))
    np.testing.assert_array_equal(dadao.drift_exp(p, 0.0), np.eye(6))
    a = dadao.drift_matrix(p)
    assert a.shape == (6, 6)
    with pytest.raises(dadao.ParameterError):
        dadao.params_from(2, 1, 1)
    with pytest.raises(dadao.Error):
        dadao.params_from(2, 1, 1)


def test_schedule():
    g = dadao.generate_graph("cycle", 6)
    s = dadao.build_schedule(g, 2.0, 50.0, seed=3)
    assert np.all(np.diff(s["time"]) >= 0)
    grads = s["kind"] == 0
    assert np.all(s["b"][grads] == -1)
    assert abs(grads.sum() - 300) < 5 * math.sqrt(300)
    again = dadao.build_schedule(g, 2.0, 50.0, seed=3)
    np.testing.assert_array_equal(s["time"], again["time"])


def test_objective_and_run():
    obj = dadao.make_linear_regression(6, 20, 3, seed=1)
    assert 0 < obj.mu <= obj.L
    total = sum(obj.grad(i, obj.x_star) for i in range(obj.num_nodes))
    assert np.linalg.norm(total) < 1e-9
    g = dadao.generate_graph("complete", 6)
    out = dadao.run(g, obj, 200.0, seed=0, probe_count=41)
    assert out["mean_dist_sq"][-1] < 1e-6 * out["mean_dist_sq"][0]
    assert np.all(np.diff(out["grad_events"]) >= 0)
    assert out["x"].shape == (6, 3)
    np.testing.assert_allclose(out["x"].mean(axis=0), obj.x_star, atol=1e-3)


def test_logistic():
    obj = dadao.make_logistic(4, 30, 3, 0.2, seed=1)
    total = sum(obj.grad(i, obj.x_star) for i in range(obj.num_nodes))
    assert np.linalg.norm(total) < 1e-10
    assert obj.mu == 0.2
    assert obj.kind == "logreg"


def test_experiment_from_config(tmp_path):
    cfg = "graph.kind = star\ngraph.n = 5\ndata.m = 10\ndata.d = 2\nt_max = 20\nprobe_count = 11\nseeds = 0:2\n"
    res = dadao.run_experiment(cfg)
    assert len(res["seeds"]) == 2
    assert res["files"] == []
    written = dadao.run_experiment(cfg, str(tmp_path))
    assert (tmp_path / "summary.json").exists()
    assert written["config_hash"] == res["config_hash"]
    with pytest.raises(dadao.FormatError):
        dadao.run_experiment("graph.knd = star\n")
    with pytest.raises(dadao.ParameterError):
        dadao.run_experiment("params.mu = 4\nparams.L = 1\n")


def test_sweep():
    cfg = "graph.kind = complete\ndata.m = 20\ndata.d = 3\nt_max = 300\nprobe_count = 601\nseeds = 0:2\nsweep.epsilon = 1e-3\n"
    table = dadao.scaling_sweep(cfg, [4, 8])
    assert [r["n"] for r in table["rows"]] == [4, 8]
    assert not any(r["unreached"] for r in table["rows"])
