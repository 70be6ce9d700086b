import numpy as np
import pytest

from densemodel.core import BoundedMeasure, FunctionFamily, signed_closure
from densemodel.errors import InvalidParameter, NoCertificate
from densemodel.game import (
    GameConfig,
    Mixture,
    fill_counts,
    function_best_response,
    game_value_bounds,
    measure_best_response,
    solve_game,
)
from densemodel.testkit import gen_random_instance, oracle_game_value


def test_greedy_fill_examples():
    assert measure_best_response(np.zeros(4), 0.5).values.tolist() == [1, 1, 0, 0]
    assert measure_best_response([0.9, -0.2, 0.5, 0.1], 0.5).values.tolist() == [1, 0, 1, 0]
    g1 = measure_best_response([0.1, 0.9, 0.3, 0.7, 0.5], 0.3)
    assert g1.values.tolist() == [0, 1, 0, 0.5, 0]
    assert g1.mean() == pytest.approx(0.3)
    with pytest.raises(InvalidParameter):
        measure_best_response([0.1, 0.2], 0.0)
    with pytest.raises(InvalidParameter):
        measure_best_response([0.1, 0.2], 1.5)


def test_fill_counts_snaps_integers():
    assert fill_counts(0.3, 10) == (3, 0.0)
    assert fill_counts(1.0, 7) == (7, 0.0)
    full, frac = fill_counts(0.3, 5)
    assert (full, round(frac, 12)) == (1, 0.5)


def _project_onto_G(H, delta):
    """Euclidean projection of each row onto {h in [0, 1]^n : mean(h) = delta} (bisection on the shift)."""
    lo = np.full(H.shape[0], -1.0 - H.max())
    hi = np.full(H.shape[0], 1.0 - H.min())
    for _ in range(100):
        mid = (lo + hi) / 2
        too_big = np.clip(H + mid[:, None], 0, 1).mean(axis=1) > delta
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_big, lo, mid)
    return np.clip(H + ((lo + hi) / 2)[:, None], 0, 1)


def test_best_response_beats_random_feasible_measures(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        delta = float(rng.uniform(0.05, 1.0))
        fbar = rng.uniform(-1, 1, n)
        best = measure_best_response(fbar, delta).values @ fbar
        G = _project_onto_G(rng.normal(0.5, 1.0, (100, n)), delta)
        assert np.allclose(G.mean(axis=1), delta, atol=1e-9)
        assert np.all(G @ fbar <= best + 1e-8)


def test_function_best_response(rng):
    fam = signed_closure(FunctionFamily.from_rows(rng.uniform(-1, 1, (3, 6))))
    g = rng.uniform(0, 1, 6)
    assert function_best_response(g, g, fam)[1] == 0.0
    g1 = rng.uniform(0, 1, 6)
    idx, pay = function_best_response(g, g1, fam)
    direct = [sum((g[x] - g1[x]) * fam.matrix[i][x] for x in range(6)) / 6 for i in range(6)]
    assert idx == int(np.argmax(direct))
    assert pay == pytest.approx(max(direct), abs=1e-15)


def test_two_point_game_value_is_one(split_family):
    res = solve_game([2.0, 0.0], split_family, GameConfig(delta=1.0, gamma=0.05))
    # G is the single point 1_X, so the function player's best mixture is pure
    assert res.upper_bound == 1.0
    assert res.lower_bound <= 1.0
    assert res.avg_measure.values.tolist() == [1.0, 1.0]


def test_bounded_g_is_its_own_model(rng):
    g = rng.uniform(0, 1, 16)
    fam = FunctionFamily.from_rows(rng.uniform(-1, 1, (4, 16)))
    res = solve_game(g, fam, GameConfig(delta=float(g.mean()), gamma=0.02))
    assert res.lower_bound <= 0 + 1e-12 and res.upper_bound <= 2 * 0.02
    assert res.lower_bound <= 0 <= res.upper_bound + 1e-12


def test_bracket_against_oracle():
    for seed in range(10):
        inst = gen_random_instance(8, 4, seed, 0.1)
        res = solve_game(inst.g, inst.family, GameConfig(inst.delta, 0.02))
        orc = oracle_game_value(inst.g, inst.family, inst.delta, 0.02)
        assert res.gap <= 0.04 + 1e-12
        assert res.lower_bound <= orc.ub + 1e-12 and orc.lb <= res.upper_bound + 1e-12


def test_result_invariants():
    inst = gen_random_instance(24, 5, 3, 0.1)
    res = solve_game(inst.g, inst.family, GameConfig(inst.delta, 0.01))
    avg = res.avg_measure.values
    assert avg.min() >= 0 and avg.max() <= 1
    assert avg.mean() == pytest.approx(inst.delta, abs=1e-9)
    assert np.all(np.abs(res.mixture.values) <= 1 + 1e-12)
    lb, ub = game_value_bounds(inst.g, res.mixture.family, res.mixture, res.avg_measure, inst.delta)
    assert (lb, ub) == (res.lower_bound, res.upper_bound)


def test_gap_shrinks_with_rounds():
    inst = gen_random_instance(32, 6, 11, 0.1)
    gaps = []
    for rounds in (250, 1000, 4000, 16000):
        cfg = GameConfig(inst.delta, 0.001, max_rounds=rounds, early_stop=False)
        try:
            res = solve_game(inst.g, inst.family, cfg)
        except NoCertificate as exc:
            res = exc.partial
        gaps.append(res.gap)
    assert gaps[-1] <= gaps[0]
    assert sum(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])) >= 2


def test_no_certificate_carries_partial_result():
    inst = gen_random_instance(32, 6, 11, 0.1)
    with pytest.raises(NoCertificate) as info:
        solve_game(inst.g, inst.family, GameConfig(inst.delta, 0.001, max_rounds=3))
    assert info.value.partial.rounds_used == 3


def test_config_validation_and_schedule():
    cfg = GameConfig(delta=0.5, gamma=0.01)
    assert cfg.learning_rate == pytest.approx(0.01 / 8)
    assert cfg.round_budget(8) == int(np.ceil(16 * np.log(8) / 0.01**2))
    with pytest.raises(InvalidParameter):
        GameConfig(delta=0.5, gamma=0.0)
    with pytest.raises(InvalidParameter):
        solve_game([0.5, 0.5], FunctionFamily.from_rows([[1, -1]]), GameConfig(delta=0.25, gamma=0.1))


def test_mixture_validation(split_family):
    fp = signed_closure(split_family)
    assert Mixture(fp, [0.25, 0.75]).values.tolist() == [-0.5, 0.5]
    with pytest.raises(InvalidParameter):
        Mixture(fp, [0.5, 0.6])
    with pytest.raises(InvalidParameter):
        Mixture(fp, [1.0])
