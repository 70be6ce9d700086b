"""Instance generators and independent oracles.

Nothing here shares equilibrium code with :mod:`densemodel.game`: the game
oracle is fictitious play (no learning rate, measure player moves first),
and product search is plain enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from . import splitmix
from .core import FunctionFamily, _vals, power_count
from .errors import BudgetExceeded, EmptySet, InvalidParameter
from .pipeline import Instance


@dataclass(frozen=True)
class SetInstanceSpec:
    """D within R within {0..n-1}; nu and g are the normalised indicators.

    ``family`` is a generator spec understood by :func:`family_from_spec`.
    """

    n: int
    R: tuple
    D: tuple
    family: dict = field(default_factory=lambda: {"generator": "characters", "frequencies": [1, 2, 3]})
    seed: int = 0


def build_set_instance(spec: SetInstanceSpec, eps: float) -> Instance:
    R, D = set(spec.R), set(spec.D)
    if not R or not D:
        raise EmptySet("R and D must be nonempty")
    if not D <= R:
        raise InvalidParameter("D must be a subset of R")
    if min(R) < 0 or max(R) >= spec.n:
        raise InvalidParameter("R must lie within the universe")
    scale = spec.n / len(R)
    nu = np.zeros(spec.n)
    g = np.zeros(spec.n)
    nu[sorted(R)] = scale
    g[sorted(D)] = scale
    return Instance(nu, g, family_from_spec(spec.family, spec.n), eps)


def gen_character_family(N: int, frequencies) -> FunctionFamily:
    """cos(2 pi a x / N) and sin(2 pi a x / N) for each frequency a."""
    x = np.arange(N)
    rows, labels = [], []
    for a in frequencies:
        phase = 2 * np.pi * ((int(a) * x) % N) / N
        rows += [np.cos(phase), np.sin(phase)]
        labels += [f"cos{a}", f"sin{a}"]
    return FunctionFamily.from_rows(rows, labels)


def gen_random_family(n: int, m: int, seed: int) -> FunctionFamily:
    """m functions with splitmix64-uniform values in [-1, 1); row j uses counters j*n .. j*n+n-1."""
    if m < 1:
        raise InvalidParameter("family size must be at least 1")
    vals = 2.0 * splitmix.uniforms(seed, m * n) - 1.0
    return FunctionFamily.from_rows(vals.reshape(m, n), [f"r{j}" for j in range(m)])


def family_from_spec(spec: dict, n: int) -> FunctionFamily:
    kind = spec.get("generator")
    if kind == "characters":
        return gen_character_family(n, spec["frequencies"])
    if kind == "random":
        return gen_random_family(n, int(spec["m"]), int(spec["seed"]))
    if kind is None and "members" in spec:
        return FunctionFamily.from_rows([m["values"] for m in spec["members"]], [m["label"] for m in spec["members"]])
    raise InvalidParameter(f"unknown family generator {kind!r}")


def _subseeds(seed: int, count: int) -> list:
    return [int(z) for z in splitmix.splitmix64(seed, count, offset=1 << 40)]


def gen_random_instance(n: int, m: int, seed: int, eps: float) -> Instance:
    """A random nu of mean 1, a random g <= nu and a random family of size m.

    nu is a normalised power of exponential variates (the power controls how
    spiky nu is); g keeps a random fraction of nu at each point.
    """
    s = _subseeds(seed, 4)
    shape = 0.5 + 2.5 * splitmix.uniforms(s[0], 1)[0]
    raw = (-np.log1p(-splitmix.uniforms(s[1], n))) ** shape + 1e-3
    nu = raw * (n / raw.sum())
    keep = splitmix.uniforms(s[2], n)
    g = nu * keep
    return Instance(nu, g, gen_random_family(n, m, s[3]), eps)


def gen_random_set_spec(n: int, seed: int, family: dict | None = None) -> SetInstanceSpec:
    """R of random density in [1/8, 1/2], D a random subset of R of relative density in [1/4, 1]."""
    s = _subseeds(seed, 4)
    r_density = 0.125 + 0.375 * splitmix.uniforms(s[0], 1)[0]
    d_density = 0.25 + 0.75 * splitmix.uniforms(s[1], 1)[0]
    R = np.flatnonzero(splitmix.uniforms(s[2], n) < r_density)
    if R.size == 0:
        R = np.array([0])
    D = R[splitmix.uniforms(s[3], R.size) < d_density]
    if D.size == 0:
        D = R[:1]
    if family is None:
        family = {"generator": "characters", "frequencies": [1, 2, 3]}
    return SetInstanceSpec(n, tuple(int(x) for x in R), tuple(int(x) for x in D), family, seed)


def gen_sized_set_spec(n: int, r_size: int, d_size: int, seed: int, family: dict | None = None) -> SetInstanceSpec:
    """|R| = r_size and |D| = d_size exactly, both chosen by sorting splitmix64 uniforms."""
    if not 1 <= d_size <= r_size <= n:
        raise EmptySet(f"need 1 <= |D| <= |R| <= n, got |D|={d_size}, |R|={r_size}, n={n}")
    s = _subseeds(seed, 2)
    R = np.sort(np.argsort(splitmix.uniforms(s[0], n), kind="stable")[:r_size])
    D = np.sort(R[np.argsort(splitmix.uniforms(s[1], r_size), kind="stable")[:d_size]])
    if family is None:
        family = {"generator": "characters", "frequencies": [1, 2, 3]}
    return SetInstanceSpec(n, tuple(int(x) for x in R), tuple(int(x) for x in D), family, seed)


# --- game oracle -----------------------------------------------------------


@dataclass(frozen=True)
class OracleBracket:
    lb: float
    ub: float
    rounds: int
    converged: bool


@numba.njit(cache=True)
def _fp_greedy(v, full, frac, out):
    # selection by repeated argmax; ties resolve to the lowest index
    n = v.shape[0]
    taken = np.zeros(n, dtype=np.bool_)
    out[:] = 0.0
    count = full + (1 if (frac > 0.0 and full < n) else 0)
    for r in range(count):
        best = -1
        for x in range(n):
            if not taken[x] and (best < 0 or v[x] > v[best]):
                best = x
        taken[best] = True
        out[best] = 1.0 if r < full else frac


@numba.njit(cache=True)
def _fictitious_play(fp, g, full, frac, rounds, counts, g1_sum, start):
    k, n = fp.shape
    mix = np.empty(n)
    g1 = np.empty(n)
    for r in range(start, start + rounds):
        # measure player answers the empirical mixture so far
        for x in range(n):
            acc = 0.0
            for i in range(k):
                acc += counts[i] * fp[i, x]
            mix[x] = acc
        _fp_greedy(mix, full, frac, g1)
        for x in range(n):
            g1_sum[x] += g1[x]
        # function player answers the empirical measure
        best = 0
        best_val = -1e300
        for i in range(k):
            acc = 0.0
            for x in range(n):
                acc += (g[x] * (r + 1) - g1_sum[x]) * fp[i, x]
            if acc > best_val:
                best_val = acc
                best = i
        counts[best] += 1.0


def _fill(delta: float, n: int):
    k = delta * n
    r = round(k)
    if abs(k - r) <= 1e-9 * max(1.0, k):
        k = float(r)
    full = min(int(math.floor(k)), n)
    return full, (k - full if full < n else 0.0)


def oracle_game_value(g, family: FunctionFamily, delta: float, gamma: float,
                      max_rounds: int = 200_000, check_every: int = 1000) -> OracleBracket:
    """Fictitious-play bracket [lb, ub] on the game value over F'.

    lb = min over G of <g - g1, empirical mixture>, ub = max over F' of
    <g - empirical measure, f>; both are exact best responses, so the bracket
    is sound at every stopping point.
    """
    gv = np.ascontiguousarray(_vals(g), dtype=np.float64)
    n = gv.shape[0]
    if n * len(family) > 10**6:
        raise BudgetExceeded(f"oracle limited to n*|F| <= 1e6, got {n * len(family)}")
    fp = np.ascontiguousarray(np.vstack([family.matrix, -family.matrix]))
    full, frac = _fill(delta, n)
    counts = np.zeros(fp.shape[0])
    g1_sum = np.zeros(n)
    done = 0
    lb = ub = math.nan
    while done < max_rounds:
        step = min(check_every, max_rounds - done)
        _fictitious_play(fp, gv, full, frac, step, counts, g1_sum, done)
        done += step
        mix = counts / counts.sum()
        fbar = mix @ fp
        g1 = np.empty(n)
        _fp_greedy(fbar, full, frac, g1)
        lb = float((gv - g1) @ fbar / n)
        ub = float((fp @ (gv - g1_sum / done) / n).max())
        if ub - lb <= 2 * gamma:
            return OracleBracket(lb, ub, done, True)
    return OracleBracket(lb, ub, done, False)


# --- product oracle --------------------------------------------------------


def exhaustive_product_search(nu, family: FunctionFamily, k: int, budget: int):
    """max |<nu - 1, f_1 ... f_j>| over j <= k and f_i in F' (lexicographically first maximiser).

    Returns (value, product) with the product as a tuple of F' indices
    (originals 0..m-1, negations m..2m-1).
    """
    fp = np.vstack([family.matrix, -family.matrix])
    size = fp.shape[0]
    if power_count(size, k) > budget:
        raise BudgetExceeded(f"{power_count(size, k)} products exceed budget {budget}")
    u = _vals(nu) - 1.0
    n = u.shape[0]
    best = [-1.0, ()]

    def walk(prefix_vals, prefix, depth):
        vals = np.abs(fp @ prefix_vals) / n
        for i in range(size):
            if vals[i] > best[0]:
                best[0], best[1] = float(vals[i]), prefix + (i,)
        if depth < k:
            for i in range(size):
                walk(prefix_vals * fp[i], prefix + (i,), depth + 1)

    walk(u, (), 1)
    return best[0], best[1]


# --- exact arithmetic checks -------------------------------------------------


def exact_mean(values) -> Fraction:
    vals = [Fraction(float(v)) for v in values]
    return sum(vals, Fraction(0)) / len(vals)


def exact_inner(f, g) -> Fraction:
    a, b = _vals(f), _vals(g)
    return sum((Fraction(float(x)) * Fraction(float(y)) for x, y in zip(a, b)), Fraction(0)) / a.shape[0]
