"""The parameter collection ``c = {c_i^{kj}}`` and its genericity checks.

Indices are 1-based in every public signature, matching the usual
tensor notation.  Internally a dense ``(n, n, n)`` tensor
``C[i-1, k-1, j-1] = c_i^{kj}`` is built once and cached.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidDimension, InvalidPair, MalformedParams

DEFAULT_GEN_EPS = 1e-12


def free_keys(n):
    """All free index triples ``(i, k, j)`` with ``k < j``, in storage order."""
    return [(i, k, j) for i in range(1, n + 1)
            for k, j in itertools.combinations(range(1, n + 1), 2)]


def n_free(n):
    return n * n * (n - 1) // 2


@dataclass(frozen=True, eq=False)
class ParamSet:
    """Immutable parameter set.

    Only the entries with ``k < j`` are stored; ``c_i^{jk}`` is read from the
    same slot, ``c_i^{ii} = 1`` and ``c_i^{jj} = 0`` (``i != j``) are implied.
    """

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise InvalidDimension(f"n must be at least 3, got {self.n}")
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != n_free(self.n):
            raise MalformedParams(
                f"expected {n_free(self.n)} free entries for n={self.n}, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise MalformedParams("parameter entries must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @cached_property
    def _index(self):
        return {key: pos for pos, key in enumerate(free_keys(self.n))}

    def __call__(self, i, k, j):
        """Return ``c_i^{kj}`` (1-based)."""
        n = self.n
        if not all(1 <= x <= n for x in (i, k, j)):
            raise IndexError(f"index out of range for n={n}: {(i, k, j)}")
        if k == j:
            return 1.0 if i == k else 0.0
        if k > j:
            k, j = j, k
        return float(self.values[self._index[(i, k, j)]])

    @cached_property
    def tensor(self):
        """Dense array ``C[i, k, j] = c_{i+1}^{k+1, j+1}`` including implied entries."""
        n = self.n
        C = np.zeros((n, n, n))
        for (i, k, j), v in zip(free_keys(n), self.values):
            C[i - 1, k - 1, j - 1] = v
            C[i - 1, j - 1, k - 1] = v
        for i in range(n):
            C[i, i, i] = 1.0
        C.setflags(write=False)
        return C

    def entries(self):
        """Iterate ``((i, k, j), value)`` over free entries."""
        return zip(free_keys(self.n), (float(v) for v in self.values))

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.n, self.values.tobytes()))

    @classmethod
    def from_tensor(cls, C):
        """Build from a dense ``(n, n, n)`` array; only ``k < j`` slots are read."""
        C = np.asarray(C, dtype=float)
        n = C.shape[0]
        return cls(n, [C[i - 1, k - 1, j - 1] for (i, k, j) in free_keys(n)])

    @classmethod
    def from_dict(cls, n, mapping):
        """Build from ``{(i, k, j): value}``.  Either ordering of ``k, j`` is accepted once."""
        vals = {}
        for (i, k, j), v in mapping.items():
            key = (i, min(k, j), max(k, j))
            if k == j:
                raise MalformedParams(f"entry {(i, k, j)} is implied, not free")
            if key not in _keyset(n):
                raise MalformedParams(f"entry {(i, k, j)} out of range for n={n}")
            if key in vals:
                raise MalformedParams(f"duplicate entry {key}")
            vals[key] = float(v)
        missing = [key for key in free_keys(n) if key not in vals]
        if missing:
            raise MalformedParams(f"missing entries, e.g. {missing[0]}")
        return cls(n, [vals[key] for key in free_keys(n)])

    def to_json(self):
        return {
            "n": self.n,
            "entries": [{"i": i, "k": k, "j": j, "value": v}
                        for (i, k, j), v in self.entries()],
        }

    @classmethod
    def from_json(cls, obj):
        try:
            n = int(obj["n"])
            raw = obj["entries"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedParams(f"not a parameter object: {exc}") from exc
        if n < 3:
            raise InvalidDimension(f"n must be at least 3, got {n}")
        mapping = {}
        for e in raw:
            try:
                key = (int(e["i"]), int(e["k"]), int(e["j"]))
                val = float(e["value"])
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedParams(f"bad entry {e!r}") from exc
            i, k, j = key
            if not k < j:
                raise MalformedParams(f"entry {key} must have k < j")
            if key in mapping:
                raise MalformedParams(f"duplicate entry {key}")
            mapping[key] = val
        return cls.from_dict(n, mapping)


def _keyset(n, _cache={}):
    if n not in _cache:
        _cache[n] = frozenset(free_keys(n))
    return _cache[n]


def save(c, path):
    Path(path).write_text(json.dumps(c.to_json(), indent=1))


def load(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedParams(f"{path}: {exc}") from exc
    return ParamSet.from_json(obj)


def sample(n, seed, dist="uniform", low=-1.0, high=1.0, value=0.0, scale=1.0):
    """Draw a parameter set with i.i.d. free entries.

    Parameters
    ----------
    n : int
        Dimension, at least 3.
    seed : int
        Seed for ``numpy.random.default_rng``.
    dist : {"uniform", "normal", "point"}
        ``uniform`` draws on ``[low, high]``, ``normal`` draws
        ``N(0, scale**2)``, ``point`` puts every entry at ``value``.
    """
    if n < 3:
        raise InvalidDimension(f"n must be at least 3, got {n}")
    rng = np.random.default_rng(seed)
    m = n_free(n)
    if dist == "uniform":
        vals = rng.uniform(low, high, size=m)
    elif dist == "normal":
        vals = rng.normal(0.0, scale, size=m)
    elif dist == "point":
        vals = np.full(m, float(value))
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    return ParamSet(n, vals)


def scale(c, t):
    """Multiply every free entry by ``t``."""
    return ParamSet(c.n, c.values * float(t))


@dataclass(frozen=True)
class Violation:
    condition: str
    indices: tuple
    lhs: float
    rhs: float


@dataclass
class GenericReport:
    n: int
    violations: list = field(default_factory=list)
    min_margin: float = float("inf")
    checked: int = 0

    @property
    def passed(self):
        return not self.violations

    def _compare(self, condition, indices, lhs, rhs, eps, unit=1.0):
        # ``unit`` is (max |c|)**degree, which keeps the test scale invariant.
        gap = abs(lhs - rhs)
        self.checked += 1
        self.min_margin = min(self.min_margin, gap / unit if unit > 0 else 0.0)
        if gap <= eps * max(unit, abs(lhs), abs(rhs)):
            self.violations.append(Violation(condition, tuple(indices), float(lhs), float(rhs)))

    def merge(self, other):
        self.violations.extend(other.violations)
        self.min_margin = min(self.min_margin, other.min_margin)
        self.checked += other.checked
        return self

    def to_json(self):
        return {
            "n": self.n,
            "passed": self.passed,
            "checked": self.checked,
            "min_margin": self.min_margin,
            "violations": [
                {"condition": v.condition, "indices": list(v.indices),
                 "lhs": v.lhs, "rhs": v.rhs} for v in self.violations
            ],
        }


# The four triple-product inequalities for n = 4, each as (lhs, rhs) lists
# of (i, k, j) factors.
_N4_TRIPLES = [
    ([(2, 1, 4), (4, 1, 3), (3, 1, 2)], [(4, 1, 2), (3, 1, 4), (2, 1, 3)]),
    ([(4, 2, 1), (3, 2, 4), (1, 2, 3)], [(1, 2, 4), (4, 2, 3), (3, 2, 1)]),
    ([(4, 3, 1), (2, 3, 4), (1, 3, 2)], [(1, 3, 4), (4, 3, 2), (2, 3, 1)]),
    ([(2, 4, 1), (1, 4, 3), (3, 4, 2)], [(1, 4, 2), (3, 4, 1), (2, 4, 3)]),
]


def check_n4_conditions(c, eps=DEFAULT_GEN_EPS):
    """Evaluate the pairwise and triple-product inequalities required for n = 4."""
    if c.n != 4:
        raise InvalidDimension(f"n = 4 conditions need n = 4, got {c.n}")
    rep = GenericReport(4)
    s = _size(c)
    for i, j in itertools.permutations(range(1, 5), 2):
        k, l = [x for x in range(1, 5) if x not in (i, j)]
        lhs = c(j, i, k) * c(i, j, l)
        rhs = c(j, i, l) * c(i, j, k)
        rep._compare("n4-pair", (i, j, k, l), lhs, rhs, eps, s**2)
    for q, (left, right) in enumerate(_N4_TRIPLES, start=1):
        lhs = np.prod([c(*f) for f in left])
        rhs = np.prod([c(*f) for f in right])
        rep._compare("n4-triple", (q,), lhs, rhs, eps, s**3)
    return rep


def _size(c):
    return float(np.max(np.abs(c.values))) if c.values.size else 0.0


def _cond2_value(c, p, I, i, j, k, l, m):
    return (c(p, k, I) * (c(i, l, j) * c(j, m, i) - c(j, l, i) * c(i, m, j))
            + c(p, l, I) * (c(j, k, i) * c(i, m, j) - c(i, k, j) * c(j, m, i))
            + c(p, m, I) * (c(i, k, j) * c(j, l, i) - c(j, k, i) * c(i, l, j)))


def check_cond12(c, i, j, eps=DEFAULT_GEN_EPS):
    """Check the pair conditions attached to the zero pattern ``{i, j}``.

    The first family asks ``c_i^{kj} c_j^{li} != c_j^{ki} c_i^{lj}`` for all
    ``k < l`` outside ``{i, j}``.  The second asks, for every ``p`` outside
    ``{i, j}`` and for both ``I = i`` and ``I = j``, that some triple
    ``k < l < m`` outside ``{i, j}`` makes the bordered determinant nonzero.
    For n = 5 there is exactly one such triple.
    """
    n = c.n
    if i == j:
        raise InvalidPair(f"pair must have distinct entries, got ({i}, {j})")
    if not (1 <= i <= n and 1 <= j <= n):
        raise InvalidPair(f"pair ({i}, {j}) out of range for n={n}")
    if n < 5:
        raise InvalidDimension(f"pair conditions need n >= 5, got {n}")
    rep = GenericReport(n)
    s = _size(c)
    rest = [x for x in range(1, n + 1) if x not in (i, j)]
    for k, l in itertools.combinations(rest, 2):
        rep._compare("cond1", (i, j, k, l), c(i, k, j) * c(j, l, i), c(j, k, i) * c(i, l, j), eps, s**2)
    for p in rest:
        for I in (i, j):
            best = None
            for k, l, m in itertools.combinations(rest, 3):
                val = _cond2_value(c, p, I, i, j, k, l, m)
                if best is None or abs(val) > abs(best[1]):
                    best = ((k, l, m), val)
                if abs(val) > eps * s**3:
                    break
            rep._compare("cond2", (i, j, p, I) + best[0], best[1], 0.0, eps, s**3)
    return rep


def check_all_pairs(c, eps=DEFAULT_GEN_EPS):
    """Merge ``check_cond12`` over every pair ``i < j``."""
    rep = GenericReport(c.n)
    for i, j in itertools.combinations(range(1, c.n + 1), 2):
        rep.merge(check_cond12(c, i, j, eps))
    return rep
