"""JSON file formats: instances, model values and reports.

Output is UTF-8 JSON with keys in a fixed order, objects indented two spaces
and arrays of scalars kept on one line.  Floats are written in Python's
shortest round-trip form, so parse -> serialize reproduces a generated file
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import TOL
from .errors import DenseModelError, SchemaError
from .pipeline import Instance
from .testkit import family_from_spec

INSTANCE_SCHEMA = "densemodel.instance/1"
REPORT_SCHEMA = "densemodel.report/1"
MODEL_SCHEMA = "densemodel.model/1"

_INSTANCE_KEYS = ("schema", "n", "epsilon", "nu", "g", "family")


def dumps(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(x, (dict, list, tuple)) for x in obj):
            return "[" + ", ".join(_scalar(x) for x in obj) + "]"
        items = [f"{pad}  {dumps(x, indent + 1)}" for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _scalar(obj)


def _scalar(x) -> str:
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite float {x!r}")
    return json.dumps(x)


def to_text(obj) -> str:
    return dumps(obj) + "\n"


def loads(text: str, what: str = "file"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}, column {exc.colno}", f"invalid JSON in {what}: {exc.msg}") from None


def read_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(path, f"cannot read {what}: {exc.strerror}") from None
    return loads(text, what)


# --- instances ---------------------------------------------------------------


@dataclass(frozen=True)
class InstanceFile:
    """Parsed instance file; keeps the family spec as written so it can be re-serialised."""

    n: int
    epsilon: float
    nu: tuple
    g: tuple
    family: dict

    def to_dict(self) -> dict:
        return {
            "schema": INSTANCE_SCHEMA,
            "n": self.n,
            "epsilon": self.epsilon,
            "nu": list(self.nu),
            "g": list(self.g),
            "family": self.family,
        }

    def to_text(self) -> str:
        return to_text(self.to_dict())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def instance(self) -> Instance:
        try:
            fam = family_from_spec(self.family, self.n)
            return Instance(np.array(self.nu), np.array(self.g), fam, self.epsilon)
        except DenseModelError as exc:
            raise SchemaError("$", str(exc)) from None


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise SchemaError(path, "must be finite")
    return float(v)


def _vector(d: dict, key: str, n: int, path: str = "") -> tuple:
    p = f"{path}{key}"
    v = d[key]
    if not isinstance(v, list):
        raise SchemaError(p, "expected an array of numbers")
    if len(v) != n:
        raise SchemaError(p, f"expected {n} values, got {len(v)}")
    return tuple(_number(x, f"{p}[{i}]") for i, x in enumerate(v))


def _require(d: dict, keys, path: str = "") -> None:
    if not isinstance(d, dict):
        raise SchemaError(path or "$", "expected an object")
    for k in keys:
        if k not in d:
            raise SchemaError(f"{path}{k}", "missing field")


def _int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, "expected an integer")
    return v


def _family(spec, n: int) -> dict:
    _require(spec, (), "family")
    kind = spec.get("generator")
    if kind == "characters":
        _require(spec, ("frequencies",), "family.")
        if not isinstance(spec["frequencies"], list) or not spec["frequencies"]:
            raise SchemaError("family.frequencies", "expected a nonempty array of integers")
        for i, a in enumerate(spec["frequencies"]):
            _int(a, f"family.frequencies[{i}]")
        return {"generator": kind, "frequencies": list(spec["frequencies"])}
    if kind == "random":
        _require(spec, ("m", "seed"), "family.")
        if _int(spec["m"], "family.m") < 1:
            raise SchemaError("family.m", "must be at least 1")
        if _int(spec["seed"], "family.seed") < 0:
            raise SchemaError("family.seed", "must be nonnegative")
        return {"generator": kind, "m": spec["m"], "seed": spec["seed"]}
    if kind is not None:
        raise SchemaError("family.generator", f"unknown generator {kind!r}")
    _require(spec, ("members",), "family.")
    members = spec["members"]
    if not isinstance(members, list) or not members:
        raise SchemaError("family.members", "expected a nonempty array")
    out, seen = [], set()
    for i, m in enumerate(members):
        path = f"family.members[{i}]."
        _require(m, ("values",), path)
        label = m.get("label", f"f{i}")
        if not isinstance(label, str) or label in seen:
            raise SchemaError(f"{path}label", f"labels must be distinct strings, got {label!r}")
        seen.add(label)
        vals = _vector(m, "values", n, path)
        for j, x in enumerate(vals):
            if abs(x) > 1 + TOL:
                raise SchemaError(f"{path}values[{j}]", f"{x!r} lies outside [-1, 1]")
        out.append({"label": label, "values": list(vals)})
    return {"members": out}


def parse_instance(obj) -> InstanceFile:
    _require(obj, _INSTANCE_KEYS)
    if obj["schema"] != INSTANCE_SCHEMA:
        raise SchemaError("schema", f"expected {INSTANCE_SCHEMA!r}, got {obj['schema']!r}")
    n = _int(obj["n"], "n")
    if n < 1:
        raise SchemaError("n", "must be at least 1")
    eps = _number(obj["epsilon"], "epsilon")
    if not 0 < eps < 1:
        raise SchemaError("epsilon", f"must lie in (0, 1), got {eps!r}")
    nu = _vector(obj, "nu", n)
    g = _vector(obj, "g", n)
    for i, (a, b) in enumerate(zip(nu, g)):
        if a < -TOL:
            raise SchemaError(f"nu[{i}]", f"negative value {a!r}")
        if b < -TOL:
            raise SchemaError(f"g[{i}]", f"negative value {b!r}")
        if b > a + TOL:
            raise SchemaError(f"g[{i}]", f"g = {b!r} exceeds nu = {a!r}")
    if sum(nu) / n > 1 + TOL:
        raise SchemaError("nu", "mean exceeds 1")
    if not sum(g) > 0:
        raise SchemaError("g", "mean must be positive")
    fam = _family(obj["family"], n)
    inst = InstanceFile(n, eps, nu, g, fam)
    inst.instance()  # surfaces anything the field checks missed
    return inst


def read_instance(path: str) -> InstanceFile:
    return parse_instance(read_json(path, "instance"))


def instance_file(n: int, epsilon: float, nu, g, family: dict) -> InstanceFile:
    return InstanceFile(int(n), float(epsilon), tuple(float(x) for x in nu), tuple(float(x) for x in g), family)


# --- model values --------------------------------------------------------------


def parse_model(obj, n: int) -> np.ndarray:
    """Model values from a model file or from a dense-model report."""
    if isinstance(obj, dict) and obj.get("schema") == REPORT_SCHEMA:
        if obj.get("result") != "dense_model":
            raise SchemaError("result", "report does not contain a dense model")
        _require(obj, ("model",))
        _require(obj["model"], ("g1",), "model.")
        vals = _vector(obj["model"], "g1", n, "model.")
    else:
        _require(obj, ("schema", "values"))
        if obj["schema"] != MODEL_SCHEMA:
            raise SchemaError("schema", f"expected {MODEL_SCHEMA!r}, got {obj['schema']!r}")
        vals = _vector(obj, "values", n)
    for i, x in enumerate(vals):
        if not -TOL <= x <= 1 + TOL:
            raise SchemaError(f"values[{i}]", f"{x!r} lies outside [0, 1]")
    return np.clip(np.array(vals), 0.0, 1.0)
