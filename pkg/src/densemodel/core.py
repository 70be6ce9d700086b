"""Measures, bounded test functions and families over a finite universe.

A universe is the index set ``0..n-1``.  Every function on it is stored as a
dense float64 vector that is frozen after construction.  Range constraints
(measure, bounded measure, bounded function) are checked at construction
against a global tolerance rather than clamped, so a generator bug surfaces
immediately instead of being silently repaired.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameter, UniverseMismatch

TOL = 1e-9


@dataclass(frozen=True)
class Universe:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"universe size must be a positive integer, got {self.n!r}")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointFunction:
    """A real-valued function on a universe."""

    universe: Universe
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.shape[0] != self.universe.n:
            raise UniverseMismatch(
                f"{type(self).__name__} has {arr.shape[0]} values for a universe of size {self.universe.n}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidParameter(f"{type(self).__name__} values must be finite")
        object.__setattr__(self, "values", arr)
        self._check_range(arr)

    def _check_range(self, arr: np.ndarray) -> None:
        pass

    @classmethod
    def of(cls, values: Sequence[float]):
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(Universe(arr.shape[0]), arr)

    @property
    def n(self) -> int:
        return self.universe.n

    def mean(self) -> float:
        return float(self.values.mean())

    def __len__(self):
        return self.universe.n

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, values={np.array2string(self.values, threshold=8)})"


class Measure(PointFunction):
    """Nonnegative function with mean at most 1."""

    def _check_range(self, arr):
        if arr.min() < -TOL:
            raise InvalidParameter(f"measure has negative value {arr.min():g}")
        if arr.mean() > 1 + TOL:
            raise InvalidParameter(f"measure has mean {arr.mean():.12g} > 1")


class BoundedMeasure(Measure):
    """Measure with all values in [0, 1]."""

    def _check_range(self, arr):
        if arr.min() < -TOL or arr.max() > 1 + TOL:
            raise InvalidParameter(
                f"bounded measure values must lie in [0, 1], got range [{arr.min():g}, {arr.max():g}]"
            )


class BoundedFunction(PointFunction):
    """Test function with values in [-1, 1]."""

    def _check_range(self, arr):
        if np.abs(arr).max() > 1 + TOL:
            raise InvalidParameter(f"bounded function has value of magnitude {np.abs(arr).max():g} > 1")


@dataclass(frozen=True, eq=False)
class FunctionFamily:
    """An ordered, labelled, finite family of bounded test functions.

    ``matrix`` holds the members as rows and is what the numeric code works on.
    """

    universe: Universe
    members: tuple
    labels: tuple
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        members = tuple(self.members)
        labels = tuple(str(s) for s in self.labels)
        if not members:
            raise InvalidParameter("a function family must be nonempty")
        if len(labels) != len(members):
            raise InvalidParameter(f"{len(labels)} labels for {len(members)} members")
        if len(set(labels)) != len(labels):
            raise InvalidParameter("family labels must be unique")
        for f in members:
            if not isinstance(f, BoundedFunction):
                raise InvalidParameter(f"family members must be BoundedFunction, got {type(f).__name__}")
            if f.universe.n != self.universe.n:
                raise UniverseMismatch("family members must share the universe")
        mat = np.vstack([f.values for f in members])
        mat.setflags(write=False)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_rows(cls, rows, labels: Iterable[str] | None = None) -> "FunctionFamily":
        mat = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        universe = Universe(mat.shape[1])
        if labels is None:
            labels = [f"f{i}" for i in range(mat.shape[0])]
        return cls(universe, tuple(BoundedFunction(universe, row) for row in mat), tuple(labels))

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i) -> BoundedFunction:
        return self.members[i]


def _vals(f) -> np.ndarray:
    # PointFunction, Mixture or anything array-like
    vals = getattr(f, "values", None)
    if isinstance(vals, np.ndarray):
        return vals
    return np.asarray(f, dtype=np.float64)


def _same_universe(*fs) -> None:
    sizes = {f.universe.n if hasattr(f, "universe") else len(f) for f in fs}
    if len(sizes) != 1:
        raise UniverseMismatch(f"universe sizes differ: {sorted(sizes)}")


def inner(f, g) -> float:
    """<f, g> = E_x f(x) g(x)."""
    _same_universe(f, g)
    a, b = _vals(f), _vals(g)
    return float(np.dot(a, b) / a.shape[0])


def constant_one(universe: Universe) -> BoundedMeasure:
    return BoundedMeasure(universe, np.ones(universe.n))


def _correlations(u: np.ndarray, family: FunctionFamily) -> np.ndarray:
    return family.matrix @ u / family.universe.n


def family_seminorm(u, family: FunctionFamily) -> float:
    """max over f in the family of |<u, f>|."""
    _same_universe(u, family)
    return float(np.abs(_correlations(_vals(u), family)).max())


def distinguishability(g, h, family: FunctionFamily) -> tuple[float, int]:
    """Largest |<g - h, f>| over the family and the first member attaining it."""
    _same_universe(g, h, family)
    corr = np.abs(_correlations(_vals(g) - _vals(h), family))
    idx = int(np.argmax(corr))
    return float(corr[idx]), idx


def is_pseudorandom(nu, family: FunctionFamily, eps: float) -> tuple[bool, int]:
    if not eps > 0:
        raise InvalidParameter(f"epsilon must be positive, got {eps!r}")
    value, idx = distinguishability(nu, np.ones(family.universe.n), family)
    return value <= eps, idx


def signed_closure(family: FunctionFamily) -> FunctionFamily:
    """The family followed by the negation of each member (labels ``+f``/``-f``).

    No deduplication: closing an already-closed family doubles it again.
    """
    u = family.universe
    negs = tuple(BoundedFunction(u, -f.values) for f in family.members)
    labels = tuple(f"+{s}" for s in family.labels) + tuple(f"-{s}" for s in family.labels)
    return FunctionFamily(u, family.members + negs, labels)


def product_function(fs: Sequence[BoundedFunction]) -> BoundedFunction:
    if len(fs) == 0:
        raise InvalidParameter("product of an empty list is undefined here")
    _same_universe(*fs)
    out = np.ones(fs[0].universe.n)
    for f in fs:
        out = out * _vals(f)
    return BoundedFunction(fs[0].universe, out)


@dataclass(frozen=True)
class PowerCheck:
    """Verdict of an exhaustive pseudorandomness check against products of up to k members.

    ``definitive`` is False when the enumeration would exceed the budget; the
    other fields are then None.
    """

    definitive: bool
    pseudorandom: bool | None = None
    worst_value: float | None = None
    worst_product: tuple | None = None
    checked: int = 0


def power_count(size: int, k: int) -> int:
    return sum(size**j for j in range(1, k + 1))


def family_power_check(nu, family: FunctionFamily, k: int, eps: float, budget: int) -> PowerCheck:
    """Check nu against every ordered product of 1..k family members.

    Products are enumerated depth-first in lexicographic index order, so the
    reported worst product is the lexicographically first maximiser.
    """
    if k < 1:
        raise InvalidParameter(f"k must be at least 1, got {k}")
    _same_universe(nu, family)
    m = len(family)
    if power_count(m, k) > budget:
        return PowerCheck(definitive=False)
    u = _vals(nu) - 1.0
    rows = family.matrix
    n = family.universe.n
    best_val, best_prod, count = -1.0, None, 0
    for length in range(1, k + 1):
        for combo in itertools.product(range(m), repeat=length):
            prod = np.prod(rows[list(combo)], axis=0)
            val = abs(float(u @ prod) / n)
            count += 1
            if val > best_val:
                best_val, best_prod = val, combo
    return PowerCheck(True, best_val <= eps, best_val, tuple(best_prod), count)
