"""Self-contained reports and their independent re-verification.

A report carries every number needed to re-check each claimed inequality
from the instance alone.  :func:`verify_report` recomputes them with plain
numpy (and an exact rebuild of the step polynomial from its definition); it
never calls the solver, the threshold search or the extraction.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import __version__, splitmix
from .formats import REPORT_SCHEMA, InstanceFile
from .pipeline import DenseModel, Distinguisher, ModelSet
from .steppoly import polynomial_from_definition, verify_step_polynomial

CHECK_TOL = 1e-9
POLY_GRID = 10**4


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a).reshape(-1)]


def _game_section(game, labels) -> dict:
    return {
        "gamma": game.gamma,
        "rounds": game.rounds_used,
        "lower_bound": game.lower_bound,
        "upper_bound": game.upper_bound,
        "strategies": list(labels),
        "weights": _floats(game.mixture.weights),
        "avg_measure": _floats(game.avg_measure.values),
    }


def build_report(source: InstanceFile, result, seconds: float, seed: int, rounding: ModelSet | None = None) -> dict:
    inst = source.instance()
    eps = inst.eps
    head = {
        "schema": REPORT_SCHEMA,
        "tool_version": __version__,
        "instance_sha256": source.sha256(),
        "n": inst.n,
        "epsilon": eps,
        "delta": inst.delta,
    }
    labels = result.game.mixture.family.labels
    if isinstance(result, DenseModel):
        rep = {**head, "result": "dense_model", "game": _game_section(result.game, labels)}
        rep["model"] = {
            "g1": _floats(result.g1.values),
            "mean_gap": result.mean_gap,
            "indistinguishability": result.indist,
        }
        if rounding is not None:
            rep["rounding"] = {
                "seed": rounding.seed,
                "size": len(rounding.members),
                "density": rounding.density,
                "indist_vs_g": rounding.indist_vs_g,
                "indist_vs_g1": rounding.indist_vs_g1,
            }
        rep["timing"] = {"seconds": seconds}
        rep["seeds"] = {"seed": seed}
        return rep
    if not isinstance(result, Distinguisher):
        raise TypeError(f"cannot report {type(result).__name__}")
    w, p, ext = result.witness, result.polynomial, result.extraction
    d = p.degree
    rep = {**head, "result": "distinguisher", "game": _game_section(result.game, labels)}
    rep["threshold"] = {
        "t": w.t,
        "shift": w.shift,
        "margin": w.margin,
        "g1": _floats(result.g1.values),
    }
    tl = result.transfer
    rep["transfer"] = {"nu_ft": tl.nu_ft, "g_ft": tl.g_ft, "g1_fs": tl.g1_fs, "one_fs": tl.one_fs, "value": tl.value}
    rep["polynomial"] = {
        "alpha": p.alpha,
        "beta": p.beta,
        "degree": d,
        "log10_coeff_bound": p.log10_coeff_bound,
        "definition": p.definition,
    }
    rep["separation"] = result.separation
    rep["term"] = {
        "k": ext.k,
        "c_k": str(ext.c_k),
        "m_k": ext.m_k,
        "log10_term": ext.log10_term,
        "floor": eps / (6 * (d + 1)),
    }
    rep["epsilon_prime"] = ext.epsilon_prime
    rep["epsilon_prime_4"] = ext.epsilon_prime_4
    base = len(labels) // 2
    rep["witness"] = {
        "factors": list(ext.factors),
        "members": list(ext.members),
        "labels": [labels[i][1:] for i in ext.members],
        "sign": ext.sign,
        "achieved": ext.achieved,
        "chain": list(ext.chain),
        "flips": sum(1 for i in ext.factors if i >= base),
    }
    rep["timing"] = {"seconds": seconds}
    rep["seeds"] = {"seed": seed}
    return rep


# --- verification ------------------------------------------------------------


class _Checks:
    def __init__(self):
        self.failures = []

    def claim(self, link: str, ok: bool, message: str):
        if not ok:
            self.failures.append((link, message))
        return ok

    def close(self, link: str, reported, actual, rel: float = CHECK_TOL):
        ok = abs(float(reported) - float(actual)) <= CHECK_TOL + rel * abs(float(actual))
        return self.claim(link, ok, f"reported {reported!r}, recomputed {actual!r}")


def _greedy(v: np.ndarray, delta: float) -> np.ndarray:
    n = v.shape[0]
    k = delta * n
    if abs(k - round(k)) <= CHECK_TOL * max(1.0, k):
        k = float(round(k))
    full = min(int(math.floor(k)), n)
    out = np.zeros(n)
    order = np.argsort(-v, kind="stable")
    out[order[:full]] = 1.0
    if full < n and k - full > 0:
        out[order[full]] = k - full
    return out


def verify_report(report: dict, source: InstanceFile) -> list:
    """Recompute every claim; returns a list of (link, message) failures."""
    c = _Checks()
    try:
        _verify(report, source, c)
    except (KeyError, TypeError, ValueError, IndexError, ZeroDivisionError) as exc:
        c.claim("report", False, f"malformed report: {type(exc).__name__}: {exc}")
    return c.failures


def _verify(rep: dict, source: InstanceFile, c: _Checks) -> None:
    c.claim("schema", rep.get("schema") == REPORT_SCHEMA, f"unexpected schema {rep.get('schema')!r}")
    c.claim("instance", rep["instance_sha256"] == source.sha256(), "report was produced for a different instance")
    inst = source.instance()
    n, eps = inst.n, inst.eps
    nu, g = inst.nu.values, inst.g.values
    delta = float(g.mean())
    c.claim("epsilon", rep["epsilon"] == eps, f"report epsilon {rep['epsilon']!r} differs from instance {eps!r}")
    c.close("delta", rep["delta"], delta)

    F = inst.family.matrix
    Fp = np.vstack([F, -F])
    game = rep["game"]
    w = np.array(game["weights"], dtype=np.float64)
    avg = np.array(game["avg_measure"], dtype=np.float64)
    c.claim("game.weights", w.shape == (Fp.shape[0],) and w.min() >= -CHECK_TOL and abs(w.sum() - 1) <= CHECK_TOL,
            "weights must form a distribution over the signed family")
    c.claim("game.avg_measure", avg.shape == (n,) and avg.min() >= -CHECK_TOL and avg.max() <= 1 + CHECK_TOL
            and abs(avg.mean() - delta) <= CHECK_TOL, "averaged measure must be bounded with mean delta")
    fbar = w @ Fp
    g1_br = _greedy(fbar, delta)
    lb = float((g - g1_br) @ fbar / n)
    ub = float((Fp @ (g - avg) / n).max())
    c.close("game.lower_bound", game["lower_bound"], lb)
    c.close("game.upper_bound", game["upper_bound"], ub)
    c.claim("game.bracket", lb <= ub + CHECK_TOL, f"bracket [{lb!r}, {ub!r}] is inverted")

    if rep["result"] == "dense_model":
        _verify_model(rep, inst, avg, c)
    elif rep["result"] == "distinguisher":
        c.claim("game.routing", lb >= eps - CHECK_TOL, f"lower bound {lb!r} below epsilon")
        _verify_distinguisher(rep, inst, w, Fp, fbar, g1_br, c)
    else:
        c.claim("result", False, f"unknown result {rep['result']!r}")


def _verify_model(rep, inst, avg, c: _Checks) -> None:
    m = rep["model"]
    g1 = np.array(m["g1"], dtype=np.float64)
    g, eps, n = inst.g.values, inst.eps, inst.n
    c.claim("model.g1", g1.shape == (n,) and np.array_equal(g1, avg), "model differs from the averaged measure")
    c.claim("model.bounded", g1.min() >= -CHECK_TOL and g1.max() <= 1 + CHECK_TOL, "model leaves [0, 1]")
    gap = abs(float(g1.mean()) - float(g.mean()))
    c.claim("model.mean", gap <= CHECK_TOL, f"|mean(g1) - mean(g)| = {gap!r}")
    c.close("model.mean_gap", m["mean_gap"], gap)
    indist = float(np.abs(inst.family.matrix @ (g - g1) / n).max())
    c.claim("model.indistinguishability", indist <= eps + CHECK_TOL, f"{indist!r} exceeds epsilon")
    c.close("model.indistinguishability", m["indistinguishability"], indist)
    r = rep.get("rounding")
    if r is not None:
        chosen = (splitmix.uniforms(int(r["seed"]), n) < g1).astype(np.float64)
        c.claim("rounding.size", r["size"] == int(chosen.sum()), "rounded set size differs")
        c.close("rounding.density", r["density"], chosen.mean())
        c.close("rounding.indist_vs_g", r["indist_vs_g"], np.abs(inst.family.matrix @ (g - chosen) / n).max())
        c.close("rounding.indist_vs_g1", r["indist_vs_g1"], np.abs(inst.family.matrix @ (g1 - chosen) / n).max())


def _verify_distinguisher(rep, inst, w, Fp, fbar, g1_br, c: _Checks) -> None:
    nu, g, eps, n = inst.nu.values, inst.g.values, inst.eps, inst.n
    th = rep["threshold"]
    t, shift = float(th["t"]), eps / 3
    g1 = np.array(th["g1"], dtype=np.float64)
    c.close("threshold.shift", th["shift"], shift)
    c.claim("threshold.g1", g1.shape == (n,) and np.allclose(g1, g1_br, rtol=0, atol=1e-12),
            "g1 is not the greedy best response to the mixture")
    c.claim("threshold.range", -1 + shift - CHECK_TOL <= t <= 1 + CHECK_TOL, f"t = {t!r} outside [-1 + eps/3, 1]")
    f_t = (fbar >= t).astype(np.float64)
    f_s = (fbar >= t - shift).astype(np.float64)
    margin = float(g @ f_t / n - g1 @ f_s / n)
    c.claim("threshold.margin", margin >= shift - CHECK_TOL, f"margin {margin!r} below eps/3")
    c.close("threshold.margin", th["margin"], margin)
    c.claim("threshold.support", bool(np.all(g1[f_s > 0] == 1.0)), "g1 < 1 on the support of the shifted indicator")

    tr = rep["transfer"]
    nu_ft, g_ft, g1_fs, one_fs = nu @ f_t / n, g @ f_t / n, g1 @ f_s / n, f_s.mean()
    for key, val in (("nu_ft", nu_ft), ("g_ft", g_ft), ("g1_fs", g1_fs), ("one_fs", one_fs), ("value", nu_ft - one_fs)):
        c.close(f"transfer.{key}", tr[key], val)
    c.claim("transfer.domination", nu_ft >= g_ft - CHECK_TOL, "<nu, f_t> < <g, f_t>")
    c.claim("transfer.threshold", g_ft >= g1_fs + shift - CHECK_TOL, "<g, f_t> < <g1, f_s> + eps/3")
    c.claim("transfer.support", abs(g1_fs - one_fs) <= CHECK_TOL, "<g1, f_s> != <1, f_s>")
    c.claim("transfer.value", nu_ft - one_fs >= shift - CHECK_TOL, "transfer value below eps/3")

    pr = rep["polynomial"]
    c.close("polynomial.alpha", pr["alpha"], eps / 3)
    c.close("polynomial.beta", pr["beta"], eps / 12)
    p = polynomial_from_definition(pr["definition"], t, eps / 3, eps / 12)
    d = p.degree
    c.claim("polynomial.degree", pr["degree"] == d, f"reported degree {pr['degree']!r}, rebuilt {d}")
    c.close("polynomial.log10_coeff_bound", pr["log10_coeff_bound"], p.log10_coeff_bound)
    beta = Fraction(p.beta)
    lo, hi = max(t - p.alpha, -1.0), min(t, 1.0)
    c.claim("polynomial.low", p.exact(lo) <= beta, "p(t - alpha) > beta")
    c.claim("polynomial.high", p.exact(hi) >= 1 - beta, "p(t) < 1 - beta")
    c.claim("polynomial.monotone", p.monotone, "polynomial is not monotone by construction")
    c.claim("polynomial.grid", verify_step_polynomial(p, POLY_GRID).passed, "grid verification failed")

    pv = p(fbar)
    c.claim("polynomial.sandwich", bool(np.all(pv >= f_t - p.beta - CHECK_TOL) and np.all(pv <= f_s + p.beta + CHECK_TOL)),
            "p o fbar leaves the band around the threshold indicators")
    sep = float((nu - 1) @ pv / n)
    c.claim("separation", sep >= eps / 6 - CHECK_TOL, f"separation {sep!r} below eps/6")
    c.close("separation", rep["separation"], sep)

    term = rep["term"]
    k = int(term["k"])
    c.claim("term.k", 0 <= k <= d, f"k = {k} outside 0..{d}")
    c_k = p.coefficient(k) if 0 <= k <= d else Fraction(0)
    c.claim("term.c_k", Fraction(term["c_k"]) == c_k, f"c_k {term['c_k']} differs from rebuilt {c_k}")
    u = nu - 1.0
    m_k = float(u @ fbar**k / n)
    c.close("term.m_k", term["m_k"], m_k, rel=1e-7)
    floor = eps / (6 * (d + 1))
    c.close("term.floor", term["floor"], floor)
    abs_ck = abs(c_k)
    # |c_k m_k| >= floor, compared in log space since c_k may be huge
    ok = abs_ck != 0 and m_k != 0 and _log_abs(abs_ck) + math.log(abs(m_k)) >= math.log(floor) + math.log1p(-CHECK_TOL)
    c.claim("term.value", ok, "selected term below eps/(6(d+1))")

    eps_prime = math.exp(math.log(floor) - _log_abs(abs_ck)) if abs_ck else math.inf
    eps_prime_4 = math.exp(math.log(eps / (4 * (d + 1))) - _log_abs(abs_ck)) if abs_ck else math.inf
    c.close("epsilon_prime", rep["epsilon_prime"], eps_prime)
    c.close("epsilon_prime_4", rep["epsilon_prime_4"], eps_prime_4)

    wit = rep["witness"]
    factors = [int(i) for i in wit["factors"]]
    members = [int(i) for i in wit["members"]]
    m = inst.family.matrix.shape[0]
    c.claim("witness.factors", len(factors) == k and all(0 <= i < 2 * m for i in factors), "factors must be k indices of F'")
    c.claim("witness.members", len(members) <= d and all(0 <= i < m for i in members), "members must be at most d indices of F")
    c.claim("witness.labels", wit["labels"] == [inst.family.labels[i] for i in members], "labels do not match members")
    prod = np.prod(inst.family.matrix[members], axis=0) if members else np.ones(n)
    value = float(u @ prod / n)
    c.claim("witness.sign", wit["sign"] == (1 if value > 0 else -1), "sign does not match the product")
    c.close("witness.achieved", wit["achieved"], abs(value))
    c.claim("witness.product", abs(value) >= rep["epsilon_prime"] * (1 - CHECK_TOL) and abs(value) >= eps_prime * (1 - CHECK_TOL),
            f"|<nu - 1, prod>| = {abs(value)!r} below epsilon_prime")
    full = np.prod(Fp[factors], axis=0) if factors else np.ones(n)
    c.claim("witness.folding", np.array_equal(full, (-1) ** int(wit["flips"]) * prod)
            and wit["flips"] == sum(1 for i in factors if i >= m), "factors do not fold to the members")

    chain = [float(x) for x in wit["chain"]]
    c.claim("witness.chain", len(chain) == k + 1, "chain must have k + 1 values")
    s = 1 if m_k > 0 else -1
    prefix = u.copy()
    for j in range(min(len(chain), k + 1)):
        val = float(prefix @ fbar ** (k - j) / n)
        c.close(f"witness.chain[{j}]", chain[j], val, rel=1e-7)
        if j:
            c.claim(f"witness.chain[{j}]", s * val >= s * prev - 1e-12 - 1e-9 * abs(prev), "conditional value dropped")
        prev = val
        if j < len(factors):
            prefix = prefix * Fp[factors[j]]


def _log_abs(x: Fraction) -> float:
    x = abs(x)
    return math.log(x.numerator) - math.log(x.denominator)
