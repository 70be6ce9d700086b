"""Zero-sum game between test functions and dense bounded measures.

The function player mixes over the signed closure F' of the family; the
measure player picks g1 from G = {bounded measures with mean delta}; the
payoff to the function player is <g - g1, f>.  Both best responses are closed
form (a greedy fill for the measure player, a scan for the function player),
so the equilibrium is computed with multiplicative weights for the function
player against exact best responses, and certified by a bracket
[lower_bound, upper_bound] around the game value computed from exact best
responses against the averaged strategies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import linprog

from .core import TOL, BoundedFunction, BoundedMeasure, FunctionFamily, PointFunction, _same_universe, _vals, signed_closure
from .errors import InvalidParameter, NoCertificate


@dataclass(frozen=True, eq=False)
class Mixture:
    """Convex combination of the members of a (signed) family."""

    family: FunctionFamily
    weights: np.ndarray
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(self.family):
            raise InvalidParameter(f"{w.shape[0]} weights for a family of {len(self.family)}")
        if w.min() < -TOL or abs(w.sum() - 1.0) > TOL:
            raise InvalidParameter("mixture weights must be nonnegative and sum to 1")
        w.setflags(write=False)
        vals = w @ self.family.matrix
        vals.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", vals)

    @property
    def universe(self):
        return self.family.universe

    def evaluate(self) -> np.ndarray:
        return self.values

    def as_function(self) -> BoundedFunction:
        return BoundedFunction(self.family.universe, self.values)


def fill_counts(delta: float, n: int) -> tuple[int, float]:
    """Number of points set to 1 and the fractional value on the next point.

    delta*n is snapped to the nearest integer when within tolerance so that
    e.g. delta = 0.5 on n = 4 fills exactly two points.
    """
    k = delta * n
    r = round(k)
    if abs(k - r) <= TOL * max(1.0, k):
        k = float(r)
    full = min(int(math.floor(k)), n)
    frac = k - full if full < n else 0.0
    return full, frac


def greedy_fill(values: np.ndarray, full: int, frac: float) -> np.ndarray:
    order = np.argsort(-values, kind="stable")
    out = np.zeros(values.shape[0])
    out[order[:full]] = 1.0
    if full < values.shape[0] and frac > 0:
        out[order[full]] = frac
    return out


def measure_best_response(fbar, delta: float) -> BoundedMeasure:
    """The g1 in G maximising <g1, fbar>: ones on the top floor(delta*n) points
    (ties by lowest index), the fractional remainder on the next point."""
    if not 0 < delta <= 1 + TOL:
        raise InvalidParameter(f"delta must lie in (0, 1], got {delta!r}")
    v = _vals(fbar)
    full, frac = fill_counts(delta, v.shape[0])
    return BoundedMeasure.of(greedy_fill(v, full, frac))


def function_best_response(g, g1, fprime: FunctionFamily) -> tuple[int, float]:
    """argmax over F' of <g - g1, f> (no absolute value), lowest index on ties."""
    _same_universe(g, g1, fprime)
    payoffs = fprime.matrix @ (_vals(g) - _vals(g1)) / fprime.universe.n
    i = int(np.argmax(payoffs))
    return i, float(payoffs[i])


@dataclass(frozen=True)
class GameConfig:
    delta: float
    gamma: float
    max_rounds: int | None = None
    eta: float | None = None
    check_every: int = 500
    early_stop: bool = True

    def __post_init__(self):
        if not 0 < self.delta <= 1 + TOL:
            raise InvalidParameter(f"delta must lie in (0, 1], got {self.delta!r}")
        if not 0 < self.gamma < 1:
            raise InvalidParameter(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise InvalidParameter("max_rounds must be at least 1")
        if self.eta is not None and not self.eta > 0:
            raise InvalidParameter("eta must be positive")
        if self.check_every < 1:
            raise InvalidParameter("check_every must be at least 1")

    @property
    def learning_rate(self) -> float:
        return self.eta if self.eta is not None else self.gamma / 8

    def round_budget(self, strategies: int) -> int:
        """Rounds after which the regret bound certifies a 2*gamma bracket.

        Payoffs lie in [-2, 2]; with eta = gamma/8 the average regret after
        16 ln|F'| / gamma^2 rounds is at most 0.75 gamma.
        """
        if self.max_rounds is not None:
            return self.max_rounds
        return max(1, math.ceil(16 * math.log(max(strategies, 2)) / self.gamma**2))


@dataclass(frozen=True, eq=False)
class GameResult:
    mixture: Mixture
    avg_measure: BoundedMeasure
    lower_bound: float
    upper_bound: float
    rounds_used: int
    gamma: float

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound


@numba.njit(cache=True)
def _fill(v, full, frac, out):
    order = np.argsort(-v, kind="mergesort")
    out[:] = 0.0
    for i in range(full):
        out[order[i]] = 1.0
    if full < v.shape[0] and frac > 0.0:
        out[order[full]] = frac


@numba.njit(cache=True)
def _mwu_rounds(fp, g, full, frac, eta, rounds, logw, wsum, gsum):
    k, n = fp.shape
    w = np.empty(k)
    fbar = np.empty(n)
    g1 = np.empty(n)
    for _ in range(rounds):
        top = logw.max()
        total = 0.0
        for i in range(k):
            w[i] = math.exp(logw[i] - top)
            total += w[i]
        for i in range(k):
            w[i] /= total
            wsum[i] += w[i]
        for x in range(n):
            acc = 0.0
            for i in range(k):
                acc += w[i] * fp[i, x]
            fbar[x] = acc
        _fill(fbar, full, frac, g1)
        for x in range(n):
            gsum[x] += g1[x]
        for i in range(k):
            acc = 0.0
            for x in range(n):
                acc += (g[x] - g1[x]) * fp[i, x]
            logw[i] += eta * acc / n
        # renormalise the log-weights every round (underflow guard)
        top = logw.max()
        for i in range(k):
            logw[i] -= top


def _certificate(g: np.ndarray, fprime: FunctionFamily, weights: np.ndarray, avg_g1: np.ndarray, full, frac):
    n = g.shape[0]
    fbar = weights @ fprime.matrix
    g1 = greedy_fill(fbar, full, frac)
    lower = float((g - g1) @ fbar / n)
    upper = float((fprime.matrix @ (g - avg_g1) / n).max())
    return lower, upper


def solve_game(g, family: FunctionFamily, config: GameConfig) -> GameResult:
    """Approximate equilibrium of the game over the signed closure of ``family``.

    Runs multiplicative weights with exact measure best responses, checking the
    best-response bracket every ``config.check_every`` rounds and stopping once
    it is at most 2*gamma wide (unless ``early_stop`` is off).  The bracket is
    sound whatever the number of rounds.
    """
    _same_universe(g, family)
    gv = np.ascontiguousarray(_vals(g), dtype=np.float64)
    n = gv.shape[0]
    if abs(gv.mean() - config.delta) > TOL:
        raise InvalidParameter(f"config delta {config.delta!r} does not match mean(g) = {gv.mean()!r}")
    fprime = signed_closure(family)
    fp = np.ascontiguousarray(fprime.matrix)
    k = fp.shape[0]
    full, frac = fill_counts(config.delta, n)
    budget = config.round_budget(k)
    eta = config.learning_rate

    logw = np.zeros(k)
    wsum = np.zeros(k)
    gsum = np.zeros(n)
    done = 0
    lower = upper = math.nan
    while done < budget:
        step = min(config.check_every, budget - done)
        _mwu_rounds(fp, gv, full, frac, eta, step, logw, wsum, gsum)
        done += step
        lower, upper = _certificate(gv, fprime, wsum / done, gsum / done, full, frac)
        if config.early_stop and upper - lower <= 2 * config.gamma:
            break

    weights = wsum / done
    weights /= weights.sum()
    avg_g1 = gsum / done
    lower, upper = _certificate(gv, fprime, weights, avg_g1, full, frac)
    result = GameResult(
        mixture=Mixture(fprime, weights),
        avg_measure=BoundedMeasure.of(avg_g1),
        lower_bound=lower,
        upper_bound=upper,
        rounds_used=done,
        gamma=config.gamma,
    )
    if upper - lower > 2 * config.gamma:
        raise NoCertificate(f"bracket width {upper - lower:.3g} > 2*gamma after {done} rounds", partial=result)
    return result


def _fix_mean(g1: np.ndarray, delta: float) -> np.ndarray:
    """Clip to [0, 1] and spread the mean error over the available room."""
    g1 = np.clip(g1, 0.0, 1.0)
    err = delta * g1.shape[0] - g1.sum()
    room = 1.0 - g1 if err > 0 else g1
    if room.sum() > 0:
        g1 = np.clip(g1 + err * room / room.sum(), 0.0, 1.0)
    return g1


def solve_game_exact(g, family: FunctionFamily, delta: float, gamma: float) -> GameResult:
    """Equilibrium of the game as a linear program (HiGHS).

    min s over g1 in G subject to <g - g1, f> <= s for every f in F'; the
    optimal g1 is the primal solution and the mixture comes from the duals.
    The returned bracket is recomputed from exact best responses, so it is
    sound even though the LP is solved in floating point.
    """
    _same_universe(g, family)
    gv = np.ascontiguousarray(_vals(g), dtype=np.float64)
    n = gv.shape[0]
    fprime = signed_closure(family)
    A = fprime.matrix
    k = A.shape[0]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.hstack([-A / n, -np.ones((k, 1))])
    b_ub = -(A @ gv) / n
    a_eq = np.concatenate([np.full(n, 1.0 / n), [0.0]])[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[delta],
                  bounds=[(0.0, 1.0)] * n + [(None, None)], method="highs")
    if res.status != 0:
        raise NoCertificate(f"linear program failed: {res.message}")
    g1 = _fix_mean(res.x[:n], delta)
    w = np.clip(-res.ineqlin.marginals, 0.0, None)
    if not w.sum() > 0:
        w = np.zeros(k)
        w[int(np.argmax(A @ (gv - g1)))] = 1.0
    w = w / w.sum()
    full, frac = fill_counts(delta, n)
    lower, upper = _certificate(gv, fprime, w, g1, full, frac)
    return GameResult(Mixture(fprime, w), BoundedMeasure.of(g1), lower, upper, 0, gamma)


def game_value_bounds(g, fprime: FunctionFamily, mixture: Mixture, avg_measure, delta: float) -> tuple[float, float]:
    """Recompute the best-response bracket for given averaged strategies."""
    full, frac = fill_counts(delta, fprime.universe.n)
    return _certificate(_vals(g), fprime, mixture.weights, _vals(avg_measure), full, frac)
