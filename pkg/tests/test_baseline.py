import numpy as np
import pytest

from fsmdm.baseline import (DEFAULT_ETA0, ETA0_GRID, SubgradConfig, run_dsrl, subgradient_f_l,
                            tune_eta0)
from fsmdm.datagen import generate_network
from fsmdm.model import Hyperparams, SensorNetwork, objective
from fsmdm.orchestrator import run

O = np.zeros(3)


@pytest.mark.parametrize("w,expected", [((3, 0, 0), (1, 0, 0)), ((0.5, 0, 0), (-1, 0, 0)),
                                        ((0, 0, 0), (0, 0, 0)), ((1, 0, 0), (0, 0, 0))])
def test_subgradient_examples(w, expected):
    np.testing.assert_array_equal(subgradient_f_l(w, O, 1.0), expected)


def test_subgradient_matches_gradient_off_kinks(rng):
    for _ in range(200):
        a, w = rng.normal(size=3), rng.normal(size=3) * 3
        d = rng.uniform(0, 4)
        f = lambda y: abs(np.linalg.norm(y - a) - d)  # noqa: E731
        h = 1e-6
        fd = np.array([(f(w + h * e) - f(w - h * e)) / (2 * h) for e in np.eye(3)])
        np.testing.assert_allclose(subgradient_f_l(w, a, d), fd, atol=1e-6)


def test_stationary_on_sphere():
    # the start point w = 0 lies exactly on the single anchor's range sphere
    net = SensorNetwork([[-2.0, 0, 0]], [2.0])
    assert np.all(run_dsrl(net, SubgradConfig(1.0, iterations=50)).w == 0)


def test_eta_zero_never_moves():
    res = run_dsrl(generate_network(seed=1), SubgradConfig(0.0, iterations=30))
    assert np.all(res.history.w == 0)


def test_step_schedule_properties():
    cfg = SubgradConfig(2.0)
    steps = np.array([cfg.step(k) for k in range(1, 10_001)])
    assert np.all(np.diff(steps) < 0)
    # sum eta_k grows like sqrt(K) (diverges); sum eta_k^2 = eta0^2 H_K grows only like log K
    assert steps.sum() > 2.0 * 2 * (np.sqrt(10_000) - 1)
    assert (steps ** 2).sum() < 4.0 * (np.log(10_000) + 1)


def test_update_is_mean_of_subgradients(rng):
    net = generate_network(L=6, seed=2)
    perm = rng.permutation(6)
    shuffled = SensorNetwork(net.anchors[perm], net.measurements[perm])
    a = run_dsrl(net, SubgradConfig(iterations=20))
    b = run_dsrl(shuffled, SubgradConfig(iterations=20))
    np.testing.assert_allclose(a.w, b.w, atol=1e-12)
    g = np.mean([subgradient_f_l(O, net.anchors[i], net.measurements[i]) for i in range(6)], axis=0)
    first = run_dsrl(net, SubgradConfig(1.0, iterations=1)).w
    np.testing.assert_allclose(first, -g, atol=1e-12)


def test_clean_sanity_against_fsmdm():
    net = generate_network(seed=0)
    f = run(net.blind(), Hyperparams(), record=False)
    b = run_dsrl(net.blind(), SubgradConfig(1.0, iterations=2000), record=False)
    fo, bo = objective(f.w, net), objective(b.w, net)
    assert bo <= 10 * fo + 1e-2


def test_result_shape():
    net = generate_network(L=5, seed=1)
    res = run_dsrl(net, SubgradConfig(iterations=10))
    assert res.algorithm == "dsrl" and res.rounds == 10
    assert res.x.shape == (5, 3) and np.all(res.x == res.w)
    assert res.history.rmse_local(net.source).shape == (10,)
    assert res.final_rmse_local(net.source) == pytest.approx(res.final_rmse_global(net.source))


def test_config_validation():
    with pytest.raises(ValueError):
        SubgradConfig(-1.0)
    with pytest.raises(ValueError):
        SubgradConfig(decay="constant")
    with pytest.raises(ValueError):
        SubgradConfig(iterations=0)


def test_tuning_selects_frozen_default():
    nets = [generate_network(seed=np.random.default_rng(np.random.SeedSequence([999, i])))
            for i in range(100)]
    best, scores = tune_eta0(nets, ETA0_GRID, iterations=2000)
    assert best == DEFAULT_ETA0
    assert set(scores) == set(ETA0_GRID)
