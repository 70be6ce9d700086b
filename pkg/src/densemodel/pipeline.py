"""Dense model or distinguisher, end to end.

``find_dense_model`` solves the game between F' and the dense measures G.
When the certified upper bound is at most eps, the averaged measure is a dense
model of g.  When the certified lower bound is at least eps, the averaged
mixture fbar distinguishes g from every member of G, and the chain

    threshold (eps/3) -> step polynomial (eps/6) -> single term (eps/(6(d+1)))
    -> product of at most d members of F (eps')

turns it into an explicit product that distinguishes nu from the constant 1.
Every link is recomputed and checked as it is produced.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import splitmix
from .core import (
    TOL,
    BoundedMeasure,
    FunctionFamily,
    Measure,
    PointFunction,
    Universe,
    _vals,
    family_seminorm,
    inner,
)
from .errors import (
    ChainViolation,
    DominationViolated,
    InvalidParameter,
    MeanMismatch,
    NoCertificate,
    TermSelectionFailed,
    UniverseMismatch,
    Unresolved,
)
from .game import GameConfig, GameResult, Mixture, measure_best_response, solve_game, solve_game_exact
from .steppoly import StepPolynomial, build_step_polynomial, compose_and_separate
from .threshold import ThresholdWitness, TransferLinks, find_threshold, pseudorandomness_transfer_check, transfer_links

EPS_MACHINE = sys.float_info.epsilon


@dataclass(frozen=True, eq=False)
class Instance:
    """nu >= g >= 0 measures, a test family and the target accuracy eps."""

    nu: Measure
    g: Measure
    family: FunctionFamily
    eps: float

    def __post_init__(self):
        nu = self.nu if isinstance(self.nu, Measure) else Measure.of(self.nu)
        g = self.g if isinstance(self.g, Measure) else Measure.of(self.g)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "g", g)
        if not (nu.n == g.n == self.family.universe.n):
            raise UniverseMismatch("nu, g and the family must live on the same universe")
        if not 0 < self.eps < 1:
            raise InvalidParameter(f"epsilon must lie in (0, 1), got {self.eps!r}")
        excess = float(np.max(g.values - nu.values))
        if excess > TOL:
            raise DominationViolated(f"g exceeds nu by {excess:.3g}")
        if not 0 < self.delta <= 1 + TOL:
            raise InvalidParameter(f"mean(g) must lie in (0, 1], got {self.delta!r}")

    @property
    def universe(self) -> Universe:
        return self.family.universe

    @property
    def n(self) -> int:
        return self.universe.n

    @property
    def delta(self) -> float:
        return self.g.mean()


@dataclass(frozen=True, eq=False)
class DenseModel:
    g1: BoundedMeasure
    indist: float
    mean_gap: float
    game: GameResult


@dataclass(frozen=True, eq=False)
class Extraction:
    """A product of members of F distinguishing nu from 1.

    ``factors`` index the signed closure F'; ``members`` index F itself, with
    squared +-1 members cancelled, and ``sign`` is the sign of
    <nu - 1, prod F[members]>.  ``chain`` lists the conditional values
    <(nu - 1) prod_{i<=j} f_i, fbar^(k-j)> for j = 0..k.
    """

    k: int
    c_k: Fraction
    m_k: float
    log10_term: float
    epsilon_prime: float
    epsilon_prime_4: float
    factors: tuple
    members: tuple
    sign: int
    achieved: float
    chain: tuple
    moments: tuple = field(repr=False)


@dataclass(frozen=True, eq=False)
class Distinguisher:
    members: tuple
    sign: int
    k: int
    epsilon_prime: float
    achieved: float
    game: GameResult
    g1: BoundedMeasure
    witness: ThresholdWitness
    transfer: TransferLinks
    polynomial: StepPolynomial
    separation: float
    extraction: Extraction

    @property
    def degree(self) -> int:
        return self.polynomial.degree


def _moments(u: np.ndarray, fbar: np.ndarray, d: int):
    """m_k = <u, fbar^k> for k = 0..d and a rounding-error scale for each."""
    n = u.shape[0]
    m = np.empty(d + 1)
    scale = np.empty(d + 1)
    power = np.ones(n)
    au, af = np.abs(u), np.abs(fbar)
    apower = np.ones(n)
    for k in range(d + 1):
        m[k] = u @ power / n
        scale[k] = au @ apower / n
        power = power * fbar
        apower = apower * af
    return m, scale


def _select_term(p: StepPolynomial, moments, scale, eps: float, rule: str) -> int:
    d = p.degree
    log_floor = math.log(eps / (6 * (d + 1)))
    candidates = []
    for k in range(d + 1):
        mk = moments[k]
        # only trust terms whose sign survives rounding in the moment sum
        if abs(mk) <= 64 * (d + 1) * EPS_MACHINE * scale[k] or mk == 0:
            continue
        lt = p.log_abs_coefficient(k) + math.log(abs(mk))
        if lt >= log_floor:
            candidates.append((k, lt))
            if rule == "first":
                break
    if not candidates:
        raise TermSelectionFailed(f"no term of p o fbar reaches eps/(6(d+1)) = {eps / (6 * (d + 1)):.3g}")
    if rule == "first":
        return candidates[0][0]
    if rule == "max":
        return max(candidates, key=lambda c: (c[1], -c[0]))[0]
    raise InvalidParameter(f"unknown term rule {rule!r}")


def conditional_expectation_product(u: np.ndarray, fbar: Mixture, k: int, sign: int):
    """Greedy derandomisation of E <u, f_1 ... f_k> with f_i drawn from fbar's weights.

    At step j the conditional value <u * prod_{i<=j} f_i, fbar^(k-j)> is an
    average over the next choice, so the best next factor never loses.
    Returns the chosen F' indices and the chain of conditional values.
    """
    fp = fbar.family.matrix
    fv = fbar.values
    n = u.shape[0]
    prefix = u.copy()
    chain = [float(prefix @ fv**k / n)]
    picks = []
    for j in range(k):
        rest = fv ** (k - j - 1)
        vals = fp @ (prefix * rest) / n
        i = int(np.argmax(sign * vals))
        nxt = float(vals[i])
        slack = 1e-12 + 1e-9 * abs(chain[-1])
        if sign * nxt < sign * chain[-1] - slack:
            raise ChainViolation(f"conditional value dropped at step {j + 1}")
        picks.append(i)
        chain.append(nxt)
        prefix = prefix * fp[i]
    return tuple(picks), tuple(chain)


def _cancel_squares(members: tuple, fam: np.ndarray) -> tuple:
    """Drop pairs of a repeated member whose values are all +-1 (its square is 1_X exactly)."""
    out = list(members)
    for i in sorted(set(members)):
        if np.all(np.abs(fam[i]) == 1.0):
            keep = members.count(i) % 2
            idx = [j for j, v in enumerate(out) if v == i]
            for j in reversed(idx[keep:]):
                del out[j]
    return tuple(out)


def sample_product(u: np.ndarray, fbar: Mixture, k: int, sign: int, target: float, seed: int, tries: int):
    """Draw k factors i.i.d. from fbar's weights until sign * <u, prod> >= target.

    Draw r uses splitmix64 counters r*k .. r*k + k - 1 of ``seed``.  Returns the
    F' indices and the chain (m_k, value), or raises ChainViolation after
    ``tries`` failures.
    """
    fp = fbar.family.matrix
    cdf = np.cumsum(fbar.weights)
    n = u.shape[0]
    m_k = float(u @ fbar.values**k / n)
    for r in range(tries):
        picks = np.minimum(np.searchsorted(cdf, splitmix.uniforms(seed, k, offset=r * k) * cdf[-1], side="right"),
                           len(cdf) - 1)
        prod = np.prod(fp[picks], axis=0) if k else np.ones(n)
        value = float(u @ prod / n)
        if sign * value >= target:
            return tuple(int(i) for i in picks), (m_k, value)
    raise ChainViolation(f"no sampled product reached {target:.3g} in {tries} draws")


def extract_product_distinguisher(nu, fbar: Mixture, p: StepPolynomial, eps: float, rule: str = "first",
                                  strategy: str = "conditional", seed: int = 0, tries: int = 1000) -> Extraction:
    """Pick a term c_k fbar^k of p o fbar carrying eps/(6(d+1)) of the separation,
    then derandomise fbar^k into a product of k members of F.

    ``fbar`` must be a mixture over the signed closure of F (originals first).
    ``rule`` chooses among the qualifying terms: ``first`` takes the lowest
    order (fewest factors), ``max`` the largest |c_k m_k|.  ``strategy``
    ``sample`` replaces the derandomisation by seeded sampling (for
    comparison only; it only guarantees eps').
    """
    u = _vals(nu) - 1.0
    fv = fbar.values
    d = p.degree
    moments, scale = _moments(u, fv, d)
    k = _select_term(p, moments, scale, eps, rule)
    m_k = float(moments[k])
    sign = 1 if m_k > 0 else -1
    log_c = p.log_abs_coefficient(k)
    log10_term = (log_c + math.log(abs(m_k))) / math.log(10)
    eps_prime = math.exp(math.log(eps / (6 * (d + 1))) - log_c)
    eps_prime_4 = math.exp(math.log(eps / (4 * (d + 1))) - log_c)

    if strategy == "conditional":
        factors, chain = conditional_expectation_product(u, fbar, k, sign)
        floor = abs(m_k)
    elif strategy == "sample":
        factors, chain = sample_product(u, fbar, k, sign, eps_prime, seed, tries)
        floor = eps_prime
    else:
        raise InvalidParameter(f"unknown extraction strategy {strategy!r}")
    base = len(fbar.family) // 2
    members = tuple(i % base for i in factors)
    flips = sum(1 for i in factors if i >= base)
    fam = fbar.family.matrix[:base]
    prod = np.prod(fam[list(members)], axis=0) if members else np.ones(u.shape[0])
    signed = float(u @ prod / u.shape[0])
    if abs((-1) ** flips * signed - chain[-1]) > 1e-12 + 1e-9 * abs(signed):
        raise ChainViolation("sign folding changed the product value")
    members = _cancel_squares(members, fam)
    reduced = np.prod(fam[list(members)], axis=0) if members else np.ones(u.shape[0])
    if not np.array_equal(reduced, prod):
        raise ChainViolation("cancelling squared factors changed the product")
    achieved = abs(signed)
    if achieved < floor * (1 - 1e-9) or achieved < eps_prime * (1 - 1e-9):
        raise ChainViolation(f"product value {achieved:.3g} below {floor:.3g}")
    return Extraction(
        k=k,
        c_k=p.coefficient(k),
        m_k=m_k,
        log10_term=log10_term,
        epsilon_prime=eps_prime,
        epsilon_prime_4=eps_prime_4,
        factors=factors,
        members=members,
        sign=1 if signed > 0 else -1,
        achieved=achieved,
        chain=chain,
        moments=tuple(float(x) for x in moments),
    )


def _distinguish(inst: Instance, game: GameResult, method: str, grid: int, rule: str) -> Distinguisher:
    eps = inst.eps
    fbar = game.mixture
    g1 = measure_best_response(fbar, inst.delta)
    witness = find_threshold(fbar, inst.g, g1, eps)
    pseudorandomness_transfer_check(inst.nu, inst.g, g1, witness, eps)
    links = transfer_links(inst.nu, inst.g, g1, witness)
    p = build_step_polynomial(witness.t, eps / 3, eps / 12, method=method, grid=grid)
    separation = compose_and_separate(p, fbar, inst.nu, eps)
    ext = extract_product_distinguisher(inst.nu, fbar, p, eps, rule=rule)
    return Distinguisher(
        members=ext.members,
        sign=ext.sign,
        k=ext.k,
        epsilon_prime=ext.epsilon_prime,
        achieved=ext.achieved,
        game=game,
        g1=g1,
        witness=witness,
        transfer=links,
        polynomial=p,
        separation=separation,
        extraction=ext,
    )


def find_dense_model(inst: Instance, config: GameConfig | None = None, *, max_tighten: int = 0,
                     method: str = "concentrated", grid: int = 10**4, rule: str = "first"):
    """Return a verified DenseModel or Distinguisher for ``inst``.

    The game is solved with gamma = eps/10 unless ``config`` says otherwise.
    A bracket straddling eps halves gamma and re-solves, up to ``max_tighten``
    times, and then falls back to the exact linear program.  The branch
    returned is always re-verified directly.
    """
    eps = inst.eps
    if config is None:
        config = GameConfig(delta=inst.delta, gamma=eps / 10)
    for attempt in range(max_tighten + 2):
        if attempt <= max_tighten:
            try:
                game = solve_game(inst.g, inst.family, config)
            except NoCertificate as exc:
                # the bracket is sound even without a certificate; it only routes
                game = exc.partial
        else:
            game = solve_game_exact(inst.g, inst.family, inst.delta, config.gamma)
        if game.upper_bound <= eps:
            model = _verified_model(inst, game)
            if model is not None:
                return model
        if game.lower_bound >= eps:
            return _distinguish(inst, game, method, grid, rule)
        config = replace(config, gamma=config.gamma / 2)
    # the bracket no longer routes; direct verification decides
    model = _verified_model(inst, game)
    if model is not None:
        return model
    raise Unresolved(f"bracket [{game.lower_bound:.6g}, {game.upper_bound:.6g}] still straddles eps = {eps:g}")


def _verified_model(inst: Instance, game: GameResult):
    g1 = game.avg_measure
    mean_gap = abs(g1.mean() - inst.delta)
    indist = family_seminorm(inst.g.values - g1.values, inst.family)
    if mean_gap <= TOL and indist <= inst.eps:
        return DenseModel(g1=g1, indist=indist, mean_gap=mean_gap, game=game)
    return None


@dataclass(frozen=True, eq=False)
class Decomposition:
    g1: BoundedMeasure
    g2: PointFunction
    orthogonality: float


def decompose(inst: Instance, g1, expect_model: bool = False) -> Decomposition:
    """Write g = g1 + g2 and measure how far g2 is from orthogonal to F."""
    g1 = g1 if isinstance(g1, BoundedMeasure) else BoundedMeasure.of(g1)
    if g1.n != inst.n:
        raise UniverseMismatch("g1 lives on a different universe")
    if abs(g1.mean() - inst.delta) > TOL:
        raise MeanMismatch(f"mean(g1) = {g1.mean():.12g} but mean(g) = {inst.delta:.12g}")
    g2 = PointFunction(inst.universe, inst.g.values - g1.values)
    orth = family_seminorm(g2, inst.family)
    if expect_model and orth > inst.eps:
        raise ChainViolation(f"|<g2, f>| reaches {orth:.6g} > eps")
    return Decomposition(g1, g2, orth)


@dataclass(frozen=True)
class ModelSet:
    members: tuple
    density: float
    indist_vs_g: float
    indist_vs_g1: float
    seed: int


def round_to_set(g1, inst: Instance, seed: int) -> ModelSet:
    """Include each point x independently with probability g1(x).

    The coin for point x is the x-th splitmix64 uniform for ``seed``.
    """
    g1 = g1 if isinstance(g1, BoundedMeasure) else BoundedMeasure.of(g1)
    if g1.n != inst.n:
        raise UniverseMismatch("g1 lives on a different universe")
    coins = splitmix.uniforms(seed, inst.n)
    chosen = coins < g1.values
    indicator = chosen.astype(np.float64)
    return ModelSet(
        members=tuple(int(i) for i in np.flatnonzero(chosen)),
        density=float(indicator.mean()),
        indist_vs_g=family_seminorm(inst.g.values - indicator, inst.family),
        indist_vs_g1=family_seminorm(g1.values - indicator, inst.family),
        seed=int(seed),
    )


CHERNOFF_CONSTANT = 0.5


def chernoff_failure_bound(n: int, delta: float, eps: float, family_size: int) -> float:
    """Upper bound on P[density < (1-eps) delta or some test moves by more than eps].

    Density: multiplicative Chernoff, exp(-eps^2 delta n / 2).  Each test:
    Hoeffding on the centred coins, 2 exp(-2 n eps^2).  The sum is returned;
    each term is at most exp(-CHERNOFF_CONSTANT * delta eps^2 n).
    """
    return math.exp(-eps**2 * delta * n / 2) + 2 * family_size * math.exp(-2 * n * eps**2)
