import json

import numpy as np
import pytest

import dgon


def small_config(variant=dgon.ModelVariant.standard):
    cfg = dgon.ModelConfig()
    cfg.gnn_layers = 2
    cfg.gnn_width = 8
    cfg.trunk_layers = 2
    cfg.trunk_width = 8
    cfg.latent_dim = 4
    cfg.sensors = 11
    cfg.memory_length = 0.05
    cfg.horizon = 0.02
    cfg.variant = variant
    return cfg


def heat_data(graph, count=10, steps=200):
    out = []
    for i in range(count):
        spec = dgon.SystemSpec()
        spec.seed = i
        out.append(dgon.simulate(spec, graph, steps, 1e-3))
    return out


def test_graph_basics():
    g = dgon.random_connected_graph(6, 0.3, 7)
    assert g.node_count == 6
    assert dgon.is_connected(g)
    L = dgon.laplacian(g)
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(L).min() > -1e-12
    assert dgon.Graph.from_json(g.to_json()) == g
    assert dgon.neighbor_mean(dgon.Graph.path(3), np.array([1.0, 2.0, 4.0])).tolist() == [2.0, 2.5, 2.0]
    with pytest.raises(dgon.GraphError):
        dgon.Graph(2, [(0, 5)])


def test_simulate_conserves_sum():
    g = dgon.Graph.cycle(5)
    t = dgon.simulate(dgon.SystemSpec(), g, 100, 1e-3)
    assert t.states.shape == (101, 5)
    sums = t.states.sum(axis=1)
    np.testing.assert_allclose(sums, sums[0], rtol=0, atol=1e-12)
    assert t.times[-1] == pytest.approx(0.1)


def test_model_predict_and_round_trip(tmp_path):
    g = dgon.random_connected_graph(6, 0.3, 1)
    traj = heat_data(g, 1)[0]
    model = dgon.DeepGraphONet(small_config(), 3)
    w = dgon.fixed_window(traj, 60, 0.05, 11)
    out = model.predict(g, w, [0.0, 0.01, 0.02])
    assert out.shape == (3, 6)
    merged = dgon.merge(model.branch(g, w), model.trunk(0.01))
    np.testing.assert_allclose(merged, out[1], rtol=1e-13, atol=1e-15)

    path = tmp_path / "m.dgon"
    model.save(path)
    back = dgon.DeepGraphONet.load(path)
    assert back.config == model.config
    np.testing.assert_array_equal(back.predict(g, w, [0.01]), model.predict(g, w, [0.01]))


def test_training_reduces_loss():
    g = dgon.random_connected_graph(5, 0.3, 2)
    split = dgon.split_trajectories(heat_data(g, 10), seed=1)
    sc = dgon.SamplingConfig()
    sc.memory_length = 0.05
    sc.sensors = 11
    sc.horizon = 0.02
    dgon.build_split_triplets(split, sc)
    assert split.train_triplets > 0
    model = dgon.DeepGraphONet(small_config(), 4)
    tc = dgon.TrainConfig()
    tc.epochs = 20
    tc.adam.lr = 3e-3
    h = dgon.train(model, split, tc)
    assert len(h.train_loss) == 20
    assert h.train_loss[-1] < 0.5 * h.initial_train_loss

    rc = dgon.RolloutConfig.for_model(model.config)
    report = dgon.evaluate(model, g, split.test, rc)
    assert report.pooled_error > 0
    assert json.loads(report.to_json())["config"]["sensors"] == 11


def test_oracle_rollout_contract():
    g = dgon.random_connected_graph(6, 0.3, 7)
    traj = heat_data(g, 1, 700)[0]
    rc = dgon.RolloutConfig()
    rc.memory_length = 0.2
    rc.horizon = 0.02
    r = dgon.rollout_teacher_forced(dgon.OraclePredictor(traj), g, traj, rc)
    assert r.horizons == 25
    assert len(r.times) == 500
    assert r.times[0] == pytest.approx(0.201) and r.times[-1] == pytest.approx(0.7)
    assert dgon.evaluate_oracle(g, [traj], rc).pooled_error == 0.0


def test_compatibility_error():
    g = dgon.Graph.path(4)
    traj = heat_data(g, 1)[0]
    model = dgon.DeepGraphONet(small_config(), 0)
    rc = dgon.RolloutConfig.for_model(model.config)
    rc.sensors = 21
    with pytest.raises(dgon.CompatibilityError):
        dgon.evaluate(model, g, [traj], rc)


def test_cli_generate(tmp_path):
    out = tmp_path / "data"
    code, stdout, _ = dgon.cli(["generate", "--out", str(out), "--set", "generate.count=3",
                                "--set", "generate.steps=20"])
    assert code == 0, stdout
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["trajectories"]) == 3
    code, _, err = dgon.cli(["generate", "--set", "generate.cuont=3"])
    assert code == 2 and "unknown config key" in err
