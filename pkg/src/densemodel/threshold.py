"""Robust thresholds of a mixture and the transfer of distinguishing power to nu.

Both <g, fbar_t> and <g1, fbar_{t - eps/3}> are piecewise constant in t, with
jumps only at the values fbar(x) and fbar(x) + eps/3.  The threshold search
therefore visits every breakpoint and one interior point of every gap between
breakpoints, which is an exhaustive search over t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import TOL, BoundedFunction, Universe, _same_universe, _vals, inner
from .errors import ChainViolation, DominationViolated, InvalidParameter, NoThreshold, SupportViolation


@dataclass(frozen=True, eq=False)
class ThresholdWitness:
    t: float
    shift: float
    f_t: BoundedFunction
    f_t_shifted: BoundedFunction
    margin: float

    @property
    def t_shifted(self) -> float:
        return self.t - self.shift


def threshold_indicator(fbar, t: float) -> BoundedFunction:
    """0/1 function equal to 1 exactly where fbar(x) >= t."""
    v = _vals(fbar)
    return BoundedFunction(Universe(v.shape[0]), (v >= t).astype(np.float64))


def layer_cake_check(fbar, grid: int = 64) -> float:
    """Largest deviation from fbar(x) = integral_{-1}^{1} fbar_t(x) dt - 1.

    The integral is taken over the partition of [-1, 1] formed by a uniform
    grid together with the point fbar(x) itself; the integrand is constant on
    each cell, so evaluating it at the cell midpoint is exact.
    """
    if grid < 2:
        raise InvalidParameter("grid must be at least 2")
    v = np.clip(_vals(fbar), -1.0, 1.0)
    ts = np.linspace(-1.0, 1.0, grid)
    cuts = np.sort(np.concatenate([np.broadcast_to(ts, (v.shape[0], grid)), v[:, None]], axis=1), axis=1)
    mids = 0.5 * (cuts[:, 1:] + cuts[:, :-1])
    widths = np.diff(cuts, axis=1)
    integral = (widths * (v[:, None] >= mids)).sum(axis=1)
    return float(np.abs(v - (integral - 1.0)).max())


def _upper_mass(fv: np.ndarray, weights: np.ndarray):
    """t -> E_x weights(x) * [fv(x) >= t], vectorised over t."""
    order = np.argsort(fv, kind="stable")
    fs = fv[order]
    tail = np.concatenate([np.cumsum(weights[order][::-1])[::-1], [0.0]])
    n = fv.shape[0]

    def mass(ts):
        return tail[np.searchsorted(fs, ts, side="left")] / n

    return mass


def _candidates(fv: np.ndarray, lo: float, shift: float) -> np.ndarray:
    pts = np.concatenate([fv, fv + shift, [lo, 1.0]])
    pts = np.unique(pts[(pts >= lo) & (pts <= 1.0)])
    mids = 0.5 * (pts[1:] + pts[:-1])
    return np.sort(np.concatenate([pts, mids]))[::-1]


def find_threshold(fbar, g, g1, eps: float) -> ThresholdWitness:
    """Highest t in [-1 + eps/3, 1] with <g, fbar_t> >= <g1, fbar_{t-eps/3}> + eps/3.

    Requires <g - g1, fbar> >= eps with g1 the greedy best response to fbar;
    also checks that g1 is identically 1 on the support of fbar_{t-eps/3}.
    """
    _same_universe(fbar, g, g1)
    if not 0 < eps < 1:
        raise InvalidParameter(f"epsilon must lie in (0, 1), got {eps!r}")
    fv, gv, g1v = _vals(fbar), _vals(g), _vals(g1)
    advantage = inner(gv - g1v, fv)
    if advantage < eps - TOL:
        raise NoThreshold(f"<g - g1, fbar> = {advantage:.6g} is below epsilon = {eps:g}")
    shift = eps / 3
    lo = -1.0 + shift
    g_mass = _upper_mass(fv, gv)
    g1_mass = _upper_mass(fv, g1v)
    ts = _candidates(fv, lo, shift)
    margins = g_mass(ts) - g1_mass(ts - shift)
    ok = np.flatnonzero(margins >= shift - TOL)
    if ok.size == 0:
        raise NoThreshold(f"no threshold reaches margin eps/3 (best {margins.max():.6g})")
    t = float(ts[ok[0]])
    f_t = threshold_indicator(fv, t)
    f_s = threshold_indicator(fv, t - shift)
    margin = inner(gv, f_t) - inner(g1v, f_s)
    if margin < shift - TOL:
        raise NoThreshold(f"recomputed margin {margin:.6g} below eps/3 at t = {t!r}")
    support = f_s.values > 0
    if not np.all(g1v[support] == 1.0):
        raise SupportViolation(f"g1 < 1 on the support of fbar_(t - eps/3) at t = {t!r}")
    return ThresholdWitness(t=t, shift=shift, f_t=f_t, f_t_shifted=f_s, margin=margin)


class TransferLinks(NamedTuple):
    nu_ft: float
    g_ft: float
    g1_fs: float
    one_fs: float

    @property
    def value(self) -> float:
        return self.nu_ft - self.one_fs


def transfer_links(nu, g, g1, witness: ThresholdWitness) -> TransferLinks:
    return TransferLinks(
        nu_ft=inner(nu, witness.f_t),
        g_ft=inner(g, witness.f_t),
        g1_fs=inner(g1, witness.f_t_shifted),
        one_fs=witness.f_t_shifted.mean(),
    )


def pseudorandomness_transfer_check(nu, g, g1, witness: ThresholdWitness, eps: float) -> float:
    """<nu, fbar_t> - <1, fbar_{t-eps/3}>, after checking every link of

    <nu, f_t> >= <g, f_t> >= <g1, f_s> + eps/3 = <1, f_s> + eps/3.
    """
    _same_universe(nu, g, g1)
    nv, gv = _vals(nu), _vals(g)
    if np.any(gv > nv + TOL):
        raise DominationViolated(f"g exceeds nu by {np.max(gv - nv):.3g}")
    links = transfer_links(nu, g, g1, witness)
    shift = eps / 3
    if links.nu_ft < links.g_ft - TOL:
        raise ChainViolation("domination link <nu, f_t> >= <g, f_t> failed")
    if links.g_ft < links.g1_fs + shift - TOL:
        raise ChainViolation("threshold link <g, f_t> >= <g1, f_s> + eps/3 failed")
    if abs(links.g1_fs - links.one_fs) > TOL:
        raise ChainViolation("support link <g1, f_s> = <1, f_s> failed")
    if links.value < shift - TOL:
        raise ChainViolation(f"transfer value {links.value:.6g} below eps/3")
    return links.value
