"""Polynomial approximations of a threshold step on [-1, 1].

A step polynomial p for (t, alpha, beta) satisfies

* 0 <= p(z) <= 1 on [-1, 1],
* p(z) <= beta on [-1, t - alpha],
* p(z) >= 1 - beta on [t, 1].

Both constructions here are of the form

    p(z) = int_{-1}^{z} K(s) ds / int_{-1}^{1} K(s) ds

with K a polynomial that is nonnegative on [-1, 1].  That makes p monotone
with p(-1) = 0 and p(1) = 1, so the first condition holds identically and the
side conditions reduce to the two exact values p(t - alpha) and p(t).  K has
integer coefficients, so the monomial coefficients c_i of p are exact
rationals; they are needed by the term extraction, whereas evaluation uses a
numerically stable form (Legendre series or binomial tail).

``concentrated`` (default): K = q^2 where q of degree m maximises the share of
its L2 mass falling inside [t - alpha, t].  Degree grows like
log(1/beta)/alpha.

``binomial``: K = (1 + z)^(J-1) (1 - z)^(N-J), i.e. p is the binomial tail
P[Bin(N, (1+z)/2) >= J].  Degree grows like log(1/beta)/alpha^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as leg
from scipy.linalg import eigh
from scipy.stats import binom

from .core import TOL, _vals, inner
from .errors import ChainViolation, DegreeCapExceeded, InvalidParameter, SandwichViolation

DEFAULT_MAX_DEGREE = 4096
MONOTONE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepPolynomial:
    """p(z) = sum_i coeffs[i] z^i, together with the step it approximates.

    ``numerators``/``denominator`` hold the same coefficients over a common
    integer denominator; ``definition`` is enough to rebuild p exactly.
    """

    numerators: tuple
    denominator: int
    t: float
    alpha: float
    beta: float
    method: str
    definition: dict = field(repr=False)
    stable: np.ndarray | None = field(default=None, repr=False)
    monotone: bool = False

    @property
    def degree(self) -> int:
        return len(self.numerators) - 1

    @property
    def coeffs(self) -> tuple:
        return _fractions(self.numerators, self.denominator)

    def coefficient(self, k: int) -> Fraction:
        return Fraction(self.numerators[k], self.denominator)

    def log_abs_coefficient(self, k: int) -> float:
        num = self.numerators[k]
        if num == 0:
            return -math.inf
        return math.log(abs(num)) - math.log(self.denominator)

    @property
    def log10_coeff_bound(self) -> float:
        return max(self.log_abs_coefficient(k) for k in range(self.degree + 1)) / math.log(10)

    @property
    def coeff_bound(self) -> float:
        lg = self.log10_coeff_bound
        return math.inf if lg > 307 else 10.0**lg

    def __call__(self, z):
        z = np.clip(np.asarray(z, dtype=np.float64), -1.0, 1.0)
        if self.method == "concentrated":
            return leg.legval(z, self.stable)
        if self.method == "binomial":
            return binom.sf(self.definition["J"] - 1, self.definition["N"], (1.0 + z) / 2.0)
        return np.polynomial.polynomial.polyval(z, [float(c) for c in self.coeffs])

    def exact(self, z: float) -> Fraction:
        """p(z) in exact rational arithmetic."""
        a, s = Fraction(z).as_integer_ratio()
        acc = 0
        spow = 1
        for c in reversed(self.numerators):
            acc = acc * a + c * spow
            spow *= s
        # acc = sum_i c_i a^i s^(d-i) and spow = s^(d+1)
        return Fraction(acc, self.denominator * spow // s)


@lru_cache(maxsize=None)
def _fractions(nums, den):
    return tuple(Fraction(c, den) for c in nums)


@lru_cache(maxsize=None)
def _legendre_row(j: int) -> tuple:
    """Integer monomial coefficients of 2^j P_j."""
    row = [0] * (j + 1)
    for k in range(j // 2 + 1):
        row[j - 2 * k] = (-1) ** k * math.comb(j, k) * math.comb(2 * j - 2 * k, j)
    return tuple(row)


def _poly_mul(a, b):
    return [int(x) for x in np.convolve(np.array(a, dtype=object), np.array(b, dtype=object))]


def _integrate_kernel(kernel) -> tuple[tuple, int]:
    """Integer numerators and denominator of int_{-1}^z K / int_{-1}^1 K."""
    d = len(kernel)
    lcm = math.lcm(*range(1, d + 1))
    nums = [0] * (d + 1)
    total = 0
    for i, b in enumerate(kernel):
        scaled = b * (lcm // (i + 1))
        nums[i + 1] = scaled
        nums[0] += scaled if i % 2 == 0 else -scaled
        if i % 2 == 0:
            total += 2 * scaled
    if total <= 0:
        raise InvalidParameter("kernel has no mass on [-1, 1]")
    g = math.gcd(total, *nums)
    return tuple(c // g for c in nums), total // g


def _legendre_to_integer(a: np.ndarray) -> list:
    """Integer monomial coefficients proportional to sum_j a_j P_j (a_j exact floats)."""
    parts = []
    shift = 0
    for j, x in enumerate(a):
        num, den = float(x).as_integer_ratio()
        e = den.bit_length() - 1 + j
        parts.append((num, e))
        shift = max(shift, e)
    out = [0] * len(a)
    for j, (num, e) in enumerate(parts):
        if num == 0:
            continue
        scale = num << (shift - e)
        for i, c in enumerate(_legendre_row(j)):
            if c:
                out[i] += scale * c
    return out


def _concentrated_generator(lo: float, hi: float, m: int, with_tails: bool = False):
    """Legendre coefficients of the degree-m q maximising int_lo^hi q^2 / int_-1^1 q^2.

    With ``with_tails`` also returns the shares of q^2 on [-1, lo] and [hi, 1].
    """
    norm = np.sqrt((2 * np.arange(m + 1) + 1) / 2.0)

    def gram(a, b):
        x, w = leg.leggauss(m + 2)
        V = leg.legvander(0.5 * (b - a) * x + 0.5 * (b + a), m) * norm
        return V, 0.5 * (b - a) * w

    V, w = gram(lo, hi)
    _, vec = eigh((V * w[:, None]).T @ V, subset_by_index=[m, m])
    v = vec[:, 0]
    a = v * norm
    a = a / np.abs(a).max()
    if not with_tails:
        return a
    tails = []
    for left, right in ((-1.0, lo), (hi, 1.0)):
        if right - left <= 0:
            tails.append(0.0)
            continue
        Vt, wt = gram(left, right)
        tails.append(float(wt @ (Vt @ v) ** 2 / (v @ v)))
    return a, tails[0], tails[1]


def _stable_concentrated(a: np.ndarray) -> np.ndarray:
    P = leg.legint(leg.legmul(a, a), lbnd=-1)
    return P / leg.legval(1.0, P)


def _sides_ok(values_lo, values_hi, beta) -> bool:
    return values_lo <= beta and values_hi >= 1 - beta


def polynomial_from_definition(definition: dict, t: float, alpha: float, beta: float) -> StepPolynomial:
    """Rebuild a step polynomial exactly from its recorded definition."""
    method = definition["method"]
    if method == "concentrated":
        a = np.asarray(definition["generator"], dtype=np.float64)
        q = _legendre_to_integer(a)
        nums, den = _integrate_kernel(_poly_mul(q, q))
        return StepPolynomial(nums, den, t, alpha, beta, method, {"method": method, "generator": [float(x) for x in a]},
                              stable=_stable_concentrated(a), monotone=True)
    if method == "binomial":
        N, J = int(definition["N"]), int(definition["J"])
        if not 1 <= J <= N:
            raise InvalidParameter(f"binomial tail needs 1 <= J <= N, got J={J}, N={N}")
        plus = [math.comb(J - 1, i) for i in range(J)]
        minus = [(-1) ** i * math.comb(N - J, i) for i in range(N - J + 1)]
        nums, den = _integrate_kernel(_poly_mul(plus, minus))
        return StepPolynomial(nums, den, t, alpha, beta, method, {"method": method, "N": N, "J": J}, monotone=True)
    if method == "monomial":
        return from_coefficients(definition["coefficients"], t, alpha, beta)
    raise InvalidParameter(f"unknown polynomial method {method!r}")


def from_coefficients(coeffs, t: float, alpha: float, beta: float) -> StepPolynomial:
    """Wrap arbitrary monomial coefficients (no monotonicity assumed)."""
    fr = [Fraction(c) for c in coeffs]
    den = math.lcm(*(c.denominator for c in fr))
    nums = tuple(int(c * den) for c in fr)
    return StepPolynomial(nums, den, t, alpha, beta, "monomial",
                          {"method": "monomial", "coefficients": [str(c) for c in fr]})


def _check_params(t, alpha, beta):
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise InvalidParameter(f"alpha and beta must lie in (0, 1], got {alpha!r}, {beta!r}")
    if t - alpha < -1 - TOL or t > 1 + TOL:
        raise InvalidParameter(f"threshold t={t!r} needs -1 <= t - alpha and t <= 1")


def _exact_sides_ok(p: StepPolynomial) -> bool:
    lo = max(p.t - p.alpha, -1.0)
    return p.exact(lo) <= Fraction(p.beta) and p.exact(min(p.t, 1.0)) >= 1 - Fraction(p.beta)


def _build_concentrated(t, alpha, beta, max_degree):
    lo, hi = max(t - alpha, -1.0), min(t, 1.0)

    def passes(m):
        _, left, right = _concentrated_generator(lo, hi, m, with_tails=True)
        return _sides_ok(left, 1 - right, beta)

    max_m = (max_degree - 1) // 2
    m = 2
    while not passes(m):
        if m >= max_m:
            raise DegreeCapExceeded(f"no concentrated step polynomial of degree <= {max_degree}")
        m = min(2 * m, max_m)
    low = m // 2
    while m - low > 1:
        mid = (low + m) // 2
        if passes(mid):
            m = mid
        else:
            low = mid
    while m <= max_m:
        p = polynomial_from_definition({"method": "concentrated", "generator": _concentrated_generator(lo, hi, m)},
                                       t, alpha, beta)
        if _exact_sides_ok(p):
            return p
        m += 1
    raise DegreeCapExceeded(f"no concentrated step polynomial of degree <= {max_degree}")


def _build_binomial(t, alpha, beta, max_degree, c0):
    mid = (t - alpha / 2 + 1) / 2
    half_gap = alpha / 4
    N = max(2, math.ceil(c0 * math.log(1 / beta) / half_gap**2))
    while N <= max_degree:
        J = min(max(1, math.ceil(mid * N)), N)
        y_lo, y_hi = (max(t - alpha, -1.0) + 1) / 2, (min(t, 1.0) + 1) / 2
        if _sides_ok(binom.sf(J - 1, N, y_lo), binom.sf(J - 1, N, y_hi), beta):
            p = polynomial_from_definition({"method": "binomial", "N": N, "J": J}, t, alpha, beta)
            if _exact_sides_ok(p):
                return p
        N *= 2
    raise DegreeCapExceeded(f"binomial tail needs degree above {max_degree}")


def build_step_polynomial(t: float, alpha: float, beta: float, method: str = "concentrated",
                          max_degree: int = DEFAULT_MAX_DEGREE, grid: int = 10**5, c0: float = 0.5) -> StepPolynomial:
    """Construct a step polynomial and verify it before returning.

    ``c0`` scales the initial binomial degree c0*ln(1/beta)/(alpha/4)^2; the
    binomial degree doubles on each failed attempt.  The concentrated degree
    is the smallest passing one found by doubling and bisection.
    """
    _check_params(t, alpha, beta)
    if method == "concentrated":
        p = _build_concentrated(t, alpha, beta, max_degree)
    elif method == "binomial":
        p = _build_binomial(t, alpha, beta, max_degree, c0)
    else:
        raise InvalidParameter(f"unknown construction {method!r}")
    report = verify_step_polynomial(p, grid)
    if not report.passed:
        raise DegreeCapExceeded(f"constructed polynomial failed verification: {report}")
    return p


@dataclass(frozen=True)
class VerificationReport:
    grid: int
    range_violation: float
    low_violation: float
    high_violation: float
    monotone_violation: float
    exact_low: float
    exact_high: float
    passed: bool
    guaranteed: bool


def verify_step_polynomial(p: StepPolynomial, grid: int = 10**5) -> VerificationReport:
    """Check the three range conditions and monotonicity of p.

    Values are taken on a uniform grid over [-1, 1] augmented with the band
    edges t - alpha and t, plus exact rational values at the two edges.  For a
    polynomial that is monotone by construction the exact edge values prove
    the side conditions on the whole intervals (``guaranteed``).
    """
    if grid < 1000:
        raise InvalidParameter("verification grid must have at least 1000 points")
    lo, hi = max(p.t - p.alpha, -1.0), min(p.t, 1.0)
    z = np.unique(np.concatenate([np.linspace(-1.0, 1.0, grid), [lo, hi]]))
    v = p(z)
    range_violation = float(max(0.0, -v.min(), v.max() - 1))
    low = v[z <= lo]
    high = v[z >= hi]
    low_violation = float(max(0.0, (low - p.beta).max())) if low.size else 0.0
    high_violation = float(max(0.0, (1 - p.beta - high).max())) if high.size else 0.0
    monotone_violation = float(max(0.0, -np.diff(v).min()))
    exact_lo, exact_hi = p.exact(lo), p.exact(hi)
    beta = Fraction(p.beta)
    exact_ok = exact_lo <= beta and exact_hi >= 1 - beta
    passed = (
        range_violation <= TOL
        and low_violation <= TOL
        and high_violation <= TOL
        and monotone_violation <= MONOTONE_TOL
        and exact_ok
    )
    return VerificationReport(grid, range_violation, low_violation, high_violation, monotone_violation,
                              float(exact_lo), float(exact_hi), passed, passed and p.monotone)


def compose_and_separate(p: StepPolynomial, fbar, nu, eps: float) -> float:
    """<nu - 1, p o fbar>, after checking the pointwise sandwich

    fbar_t(x) - eps/12 <= p(fbar(x)) <= fbar_{t - eps/3}(x) + eps/12.
    """
    if abs(p.alpha - eps / 3) > TOL or abs(p.beta - eps / 12) > TOL:
        raise InvalidParameter("step polynomial must use alpha = eps/3 and beta = eps/12")
    fv, nv = _vals(fbar), _vals(nu)
    pv = p(fv)
    upper_ind = (fv >= p.t).astype(np.float64)
    lower_ind = (fv >= p.t - p.alpha).astype(np.float64)
    if np.any(pv < upper_ind - p.beta - TOL) or np.any(pv > lower_ind + p.beta + TOL):
        raise SandwichViolation("p o fbar leaves the band around the threshold indicators")
    separation = inner(nv - 1.0, pv)
    if separation < eps / 6 - TOL:
        raise ChainViolation(f"polynomial separation {separation:.6g} below eps/6")
    return separation
