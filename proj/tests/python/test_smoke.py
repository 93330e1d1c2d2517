import csv
import pathlib

import numpy as np
import pytest

import coadapt

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


@pytest.fixture(scope="module")
def game():
    return coadapt.load_game(CONFIGS / "game_2x2.json")


def test_game_fields(game):
    assert game.d_H == 2 and game.d_M == 2
    assert game.A_H.shape == (2, 2)
    ok, messages = coadapt.validate(game)
    assert ok, messages


def test_equilibria(game):
    ne = coadapt.solve_nash(game)
    se = coadapt.solve_stackelberg_human_led(game)
    np.testing.assert_allclose(ne.h, [-0.2433580506844341, -0.2567536424062055], rtol=0, atol=1e-12)
    np.testing.assert_allclose(se.m, [-0.1325526616541542, -0.1327527411434435], rtol=0, atol=1e-12)
    assert coadapt.check_differential_nash(game, ne)
    assert coadapt.check_differential_stackelberg(game, se)
    np.testing.assert_allclose(coadapt.grad_H(game, ne.h, ne.m), 0.0, atol=1e-12)
    assert coadapt.cost_H(game, ne.h, ne.m) == pytest.approx(0.20602606617169178, abs=1e-12)


def test_ai_step(game):
    ne = coadapt.solve_nash(game)
    np.testing.assert_array_equal(coadapt.ai_step(game, np.array([0.5, 0.5]), np.zeros(2), 0.0), ne.m)
    np.testing.assert_allclose(
        coadapt.ai_step(game, ne.h, np.zeros(2), 1.0), coadapt.best_response_M(game, ne.h), atol=1e-15
    )


def test_simulation(game):
    cfg = coadapt.SimConfig()
    cfg.T = 100
    cfg.seed = 4
    a = coadapt.simulate_zeroth_order(game, cfg)
    b = coadapt.simulate_zeroth_order(game, cfg)
    assert a["h"].shape == (101, 2)
    np.testing.assert_array_equal(a["h"], b["h"])
    assert a["diverged_at"] is None


def test_random_game_and_estimator(game):
    g = coadapt.random_game(4, 6, seed=1, targets=(-0.25, 0.25))
    np.testing.assert_allclose(coadapt.solve_nash(g).h, -0.25, atol=1e-10)
    mean, se = coadapt.estimate_gradient_bias(game, np.zeros(2), np.full(2, 0.1), 0.1, 20000, 3)
    target = 2 * coadapt.grad_H(game, np.zeros(2), np.full(2, 0.1))
    assert np.all(np.abs(mean - target) <= 4 * se)


def test_session(game):
    plan = coadapt.build_session("2x2", "cost_circle", 7, "k", game)
    assert len(plan["trials"]) == 20


def test_dimension_error(game):
    with pytest.raises(ValueError):
        coadapt.cost_H(game, np.zeros(3), np.zeros(2))


def test_analyze_csv(tmp_path, game):
    path = tmp_path / "export.csv"
    header = "pubkey,t,h_1,h_2,m_1,m_2,cost_H,cost_M,alpha,trial_index,s_1,s_2".split(",")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for idx, value in enumerate([0.1, 0.2, 0.7]):
            for k in range(1500):
                w.writerow(["p", k / 60, value, value, 0, 0, 0, 0, 0.1, idx, 1, 1])
    rows = coadapt.analyze_csv(path, game)
    assert len(rows) == 1
    np.testing.assert_array_equal(rows[0]["median_h"], [0.2, 0.2])
    assert rows[0]["trials"] == 3
