"""densemodel command line.

Exit codes: 0 dense model / verified / pseudorandom, 3 distinguisher / not
pseudorandom, 4 check skipped over budget, 1 usage or parse error, 2
verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import warnings

import numba
import numpy as np

from . import splitmix, testkit
from .core import family_power_check
from .errors import DenseModelError, SchemaError
from .formats import MODEL_SCHEMA, instance_file, parse_model, read_instance, read_json, to_text
from .game import GameConfig
from .pipeline import CHERNOFF_CONSTANT, DenseModel, chernoff_failure_bound, find_dense_model, round_to_set
from .report import build_report, verify_report

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_OTHER_BRANCH, EXIT_SKIPPED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _set_threads(requested: int | None) -> None:
    if requested is None:
        env = os.environ.get("DENSEMODEL_THREADS")
        if not env:
            return
        try:
            requested = int(env)
        except ValueError:
            raise UsageError(f"DENSEMODEL_THREADS must be an integer, got {env!r}") from None
    if requested < 1:
        raise UsageError("--threads must be at least 1")
    with warnings.catch_warnings():
        # numba complains about old TBB builds while picking a threading layer
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


def cmd_find_model(args) -> int:
    source = read_instance(args.instance)
    inst = source.instance()
    config = GameConfig(delta=inst.delta, gamma=args.gamma) if args.gamma else None
    start = time.perf_counter()
    try:
        result = find_dense_model(inst, config, method=args.method, rule=args.rule)
    except DenseModelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    seconds = time.perf_counter() - start
    rounding = round_to_set(result.g1, inst, args.seed) if isinstance(result, DenseModel) else None
    report = build_report(source, result, seconds, args.seed, rounding)
    failures = verify_report(report, source)
    _write(args.report, to_text(report))
    if failures:
        for link, msg in failures:
            print(f"FAIL {link}: {msg}", file=sys.stderr)
        return EXIT_VERIFY
    if isinstance(result, DenseModel):
        print(f"dense model: indistinguishability {result.indist:.6g} <= {inst.eps:g}", file=sys.stderr)
        return EXIT_OK
    labels = [inst.family.labels[i] for i in result.members]
    print(f"distinguisher: {result.sign:+d} * prod{labels} achieves {result.achieved:.6g} "
          f">= epsilon' {result.epsilon_prime:.6g}", file=sys.stderr)
    return EXIT_OTHER_BRANCH


def cmd_verify(args) -> int:
    source = read_instance(args.instance)
    report = read_json(args.report, "report")
    if not isinstance(report, dict):
        raise SchemaError("$", "report must be an object")
    failures = verify_report(report, source)
    if failures:
        for link, msg in failures:
            print(f"FAIL {link}: {msg}")
        return EXIT_VERIFY
    print("OK: every link holds")
    return EXIT_OK


def cmd_round(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    source = read_instance(args.instance)
    inst = source.instance()
    g1 = parse_model(read_json(args.model, "model"), inst.n)
    eps = inst.eps
    delta = inst.delta
    seeds = [int(s) for s in splitmix.splitmix64(args.seed, args.trials)]
    trials, failures = [], 0
    for s in seeds:
        ms = round_to_set(g1, inst, s)
        failed = ms.density < (1 - eps) * delta or ms.indist_vs_g > 2 * eps
        failures += failed
        trials.append({"seed": s, "density": ms.density, "indist_vs_g": ms.indist_vs_g,
                       "indist_vs_g1": ms.indist_vs_g1, "failed": bool(failed)})
    densities = np.array([t["density"] for t in trials])
    summary = {
        "schema": "densemodel.rounding/1",
        "seed": args.seed,
        "trials": args.trials,
        "delta": delta,
        "mean_density": float(densities.mean()),
        "failure_event": "density < (1 - eps) delta or indistinguishability from g > 2 eps",
        "empirical_failure_rate": failures / args.trials,
        "chernoff_bound": chernoff_failure_bound(inst.n, float(g1.mean()), eps, len(inst.family)),
        "chernoff_form": "exp(-eps^2 delta n / 2) + 2 |F| exp(-2 n eps^2)",
        "chernoff_constant": CHERNOFF_CONSTANT,
        "per_trial": trials,
    }
    _write(args.output, to_text(summary))
    return EXIT_OK


def _frequencies(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--frequencies must be comma-separated integers, got {text!r}") from None


def _family_arg(args) -> dict:
    if args.family == "random":
        return {"generator": "random", "m": args.m, "seed": args.family_seed if args.family_seed is not None else args.seed}
    return {"generator": "characters", "frequencies": _frequencies(args.frequencies)}


def cmd_gen(args) -> int:
    eps = args.epsilon
    if not 0 < eps < 1:
        raise UsageError("--epsilon must lie in (0, 1)")
    if args.generator == "hand2":
        out = instance_file(2, eps, [2.0, 0.0], [2.0, 0.0], {"members": [{"label": "split", "values": [1.0, -1.0]}]})
    elif args.generator == "set":
        n = args.n
        r_size = args.r_size if args.r_size is not None else max(1, n // 4)
        d_size = args.d_size if args.d_size is not None else max(1, r_size // 2)
        try:
            spec = testkit.gen_sized_set_spec(n, r_size, d_size, args.seed, _family_arg(args))
        except DenseModelError as exc:
            raise UsageError(str(exc)) from None
        inst = testkit.build_set_instance(spec, eps)
        out = instance_file(n, eps, inst.nu.values, inst.g.values, spec.family)
    elif args.generator == "random":
        inst = testkit.gen_random_instance(args.n, args.m, args.seed, eps)
        members = [{"label": lab, "values": [float(x) for x in row]}
                   for lab, row in zip(inst.family.labels, inst.family.matrix)]
        out = instance_file(args.n, eps, inst.nu.values, inst.g.values, {"members": members})
    else:  # argparse restricts the choices
        raise UsageError(f"unknown generator {args.generator!r}")
    out.instance()
    _write(args.output, out.to_text())
    return EXIT_OK


def cmd_check_pr(args) -> int:
    source = read_instance(args.instance)
    inst = source.instance()
    eps = args.epsilon if args.epsilon is not None else inst.eps
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    verdict = family_power_check(inst.nu, inst.family, args.k, eps, args.budget)
    if not verdict.definitive:
        print(f"skipped: more than {args.budget} products")
        return EXIT_SKIPPED
    labels = [inst.family.labels[i] for i in verdict.worst_product]
    print(f"{'pseudorandom' if verdict.pseudorandom else 'not pseudorandom'}: worst |<nu - 1, prod{labels}>| = "
          f"{verdict.worst_value:.6g} vs epsilon {eps:g} over {verdict.checked} products")
    return EXIT_OK if verdict.pseudorandom else EXIT_OTHER_BRANCH


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="densemodel", description="Dense models and product distinguishers over finite universes.")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads (default: DENSEMODEL_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("find-model", help="solve an instance and write a report")
    p.add_argument("instance")
    p.add_argument("--gamma", type=float, default=None, help="solver accuracy (default epsilon/10)")
    p.add_argument("--seed", type=int, default=0, help="seed for rounding a dense model to a set")
    p.add_argument("--report", default=None, help="report path (default: standard output)")
    p.add_argument("--method", choices=("concentrated", "binomial"), default="concentrated")
    p.add_argument("--rule", choices=("first", "max"), default="first", help="term selection rule")
    p.set_defaults(func=cmd_find_model)

    p = sub.add_parser("verify", help="re-check every claim of a report against its instance")
    p.add_argument("report")
    p.add_argument("instance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("round", help="round a bounded model to random sets")
    p.add_argument("instance")
    p.add_argument("model", help=f"{MODEL_SCHEMA} file or dense-model report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("gen", help="write a generated instance to standard output")
    p.add_argument("generator", choices=("set", "random", "hand2"))
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=4, help="family size (random)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--r-size", type=int, default=None, help="|R| for set instances (default n/4)")
    p.add_argument("--d-size", type=int, default=None, help="|D| for set instances (default |R|/2)")
    p.add_argument("--family", choices=("characters", "random"), default="characters")
    p.add_argument("--frequencies", default="1,2,3")
    p.add_argument("--family-seed", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check-pr", help="test nu for pseudorandomness against F or its products")
    p.add_argument("instance")
    p.add_argument("--k", type=int, default=1, help="products of up to k members")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--budget", type=int, default=10**6)
    p.set_defaults(func=cmd_check_pr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
