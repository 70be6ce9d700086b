from fractions import Fraction

import numpy as np
import pytest

from densemodel.core import FunctionFamily, distinguishability, is_pseudorandom
from densemodel.errors import BudgetExceeded, EmptySet, InvalidParameter
from densemodel.testkit import (
    SetInstanceSpec,
    build_set_instance,
    exact_inner,
    exact_mean,
    exhaustive_product_search,
    family_from_spec,
    gen_character_family,
    gen_random_family,
    gen_random_instance,
    gen_random_set_spec,
    gen_sized_set_spec,
    oracle_game_value,
)


def test_set_instance_examples():
    inst = build_set_instance(SetInstanceSpec(8, (0, 2, 4, 6), (0, 2, 4, 6)), 0.1)
    assert np.array_equal(inst.g.values, inst.nu.values) and inst.delta == 1.0
    inst = build_set_instance(SetInstanceSpec(8, (1, 3, 5, 7), (3, 5)), 0.1)
    assert inst.delta == 0.5 and inst.nu.mean() == 1.0
    with pytest.raises(EmptySet):
        build_set_instance(SetInstanceSpec(8, (1, 3), ()), 0.1)
    with pytest.raises(InvalidParameter):
        build_set_instance(SetInstanceSpec(8, (1, 3), (2,)), 0.1)
    with pytest.raises(InvalidParameter):
        build_set_instance(SetInstanceSpec(8, (1, 9), (1,)), 0.1)


def test_set_identities_in_exact_arithmetic():
    for seed in range(20):
        spec = gen_random_set_spec(37, seed)
        inst = build_set_instance(spec, 0.1)
        target = Fraction(len(spec.D), len(spec.R))
        assert abs(exact_mean(inst.g.values) - target) <= Fraction(1, 10**12)
        assert abs(exact_mean(inst.nu.values) - 1) <= Fraction(1, 10**12)


def test_sized_set_spec():
    spec = gen_sized_set_spec(16, 8, 4, 3)
    assert len(spec.R) == 8 and len(spec.D) == 4 and set(spec.D) <= set(spec.R)
    assert spec == gen_sized_set_spec(16, 8, 4, 3)
    with pytest.raises(EmptySet):
        gen_sized_set_spec(16, 8, 0, 3)


def test_character_family():
    fam = gen_character_family(12, [0, 1, 5])
    assert np.array_equal(fam.matrix[0], np.ones(12))
    assert fam.labels == ("cos0", "sin0", "cos1", "sin1", "cos5", "sin5")
    for row in fam.matrix[2:]:
        assert abs(row.mean()) <= 1e-12
    assert np.all(np.abs(fam.matrix) <= 1)


def test_random_subsets_are_pseudorandom_against_characters():
    fam = gen_character_family(1024, [1, 2, 3, 4])
    hits = 0
    for seed in range(20):
        coins = np.random.default_rng(seed).random(1024) < 1 / 8
        nu = coins * (1024 / coins.sum())
        hits += is_pseudorandom(nu, fam, 0.2)[0]
    assert hits >= 19


def test_random_family():
    a = gen_random_family(10, 3, 5)
    assert np.array_equal(a.matrix, gen_random_family(10, 3, 5).matrix)
    assert np.all(np.abs(a.matrix) <= 1)
    rows = {gen_random_family(10, 1, s).matrix.tobytes() for s in range(100)}
    assert len(rows) == 100
    with pytest.raises(InvalidParameter):
        gen_random_family(10, 0, 1)


def test_family_from_spec():
    inline = family_from_spec({"members": [{"label": "a", "values": [1, -1]}]}, 2)
    assert inline.labels == ("a",)
    assert len(family_from_spec({"generator": "random", "m": 2, "seed": 1}, 4)) == 2
    with pytest.raises(InvalidParameter):
        family_from_spec({"generator": "walsh"}, 4)


def test_random_instances_are_valid():
    for seed in range(20):
        inst = gen_random_instance(16, 3, seed, 0.1)
        assert inst.nu.mean() == pytest.approx(1.0)
        assert np.all(inst.g.values <= inst.nu.values)


def test_oracle_single_point_polytope(rng):
    g = np.array([2.0, 0.0, 1.0, 1.0])
    fam = FunctionFamily.from_rows(rng.uniform(-1, 1, (3, 4)))
    br = oracle_game_value(g, fam, 1.0, 0.01)
    exact = max(np.max(fam.matrix @ (g - 1) / 4), np.max(-fam.matrix @ (g - 1) / 4))
    assert br.lb == br.ub == pytest.approx(exact, abs=1e-15)


def test_oracle_bounded_g(rng):
    g = rng.uniform(0, 1, 16)
    fam = FunctionFamily.from_rows(rng.uniform(-1, 1, (4, 16)))
    br = oracle_game_value(g, fam, float(g.mean()), 0.02)
    assert br.converged and br.ub <= 2 * 0.02


def test_oracle_budget_guard():
    fam = FunctionFamily.from_rows(np.zeros((2, 600_000)))
    with pytest.raises(BudgetExceeded):
        oracle_game_value(np.full(600_000, 0.5), fam, 0.5, 0.1)


def test_exhaustive_search(rng):
    nu = rng.exponential(size=6)
    nu /= nu.mean()
    fam = FunctionFamily.from_rows(rng.uniform(-1, 1, (2, 6)))
    best, prod = exhaustive_product_search(nu, fam, 1, 100)
    assert best == pytest.approx(distinguishability(nu, np.ones(6), fam)[0], abs=1e-15)
    deeper, prod = exhaustive_product_search(nu, fam, 3, 100)
    assert deeper >= best and 1 <= len(prod) <= 3
    with pytest.raises(BudgetExceeded):
        exhaustive_product_search(nu, fam, 3, 50)


def test_exact_inner_agrees():
    a, b = [0.5, 0.25, -1.0], [1.0, 0.5, 0.5]
    assert exact_inner(a, b) == Fraction(0.5 + 0.125 - 0.5) / 3
