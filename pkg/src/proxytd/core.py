"""Answer representations, distance kernels and the proxy distance.

Answers are plain numpy arrays:

* continuous: ``(n, m)`` float64, one real per question;
* categorical: ``(n, m)`` int64 labels in ``0..k-1``;
* ranking: ``(n, P)`` int8 pairwise vectors in {-1, +1} with ``P = c(c-1)/2``.

A ranking ``order`` lists candidates best first, so ``order[0]`` is the
top candidate. Pairwise entries are indexed by lexicographic pairs
``(a, b)`` with ``a < b``; ``+1`` means ``a`` is ranked above ``b``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import stats

from .errors import (
    InsufficientWorkersError,
    InvalidParameterError,
    NonTransitiveError,
    ShapeError,
)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
RANKING = "ranking"
DOMAINS = (CONTINUOUS, CATEGORICAL, RANKING)


# --------------------------------------------------------------------------
# ranking <-> pairwise vector
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def candidate_pairs(c: int) -> tuple[np.ndarray, np.ndarray]:
    """Return index arrays ``(a, b)`` of all lexicographic pairs ``a < b``."""
    if c < 2:
        raise ShapeError(f"need at least 2 candidates, got {c}")
    a, b = np.triu_indices(c, k=1)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def n_pairs(c: int) -> int:
    return c * (c - 1) // 2


def candidates_from_pairs(p: int) -> int:
    c = int(round((1 + np.sqrt(1 + 8 * p)) / 2))
    if n_pairs(c) != p:
        raise ShapeError(f"{p} is not a valid pairwise-vector length")
    return c


def is_permutation(order) -> bool:
    order = np.asarray(order)
    return order.ndim == 1 and np.array_equal(np.sort(order), np.arange(order.size))


def positions(orders: np.ndarray) -> np.ndarray:
    """Rank position of every candidate (0 = top), row-wise for 2D input."""
    orders = np.asarray(orders)
    pos = np.empty_like(orders)
    idx = np.arange(orders.shape[-1])
    if orders.ndim == 1:
        pos[orders] = idx
    else:
        np.put_along_axis(pos, orders, np.broadcast_to(idx, orders.shape), axis=-1)
    return pos


def to_pairwise(orders) -> np.ndarray:
    """Encode one order ``(c,)`` or a stack of orders ``(n, c)`` as +-1 vectors."""
    orders = np.asarray(orders, dtype=np.int64)
    one = orders.ndim == 1
    orders2 = orders[None, :] if one else orders
    c = orders2.shape[1]
    for row in orders2:
        if not is_permutation(row):
            raise ShapeError(f"not a permutation of 0..{c - 1}: {row.tolist()}")
    a, b = candidate_pairs(c)
    pos = positions(orders2)
    vec = np.where(pos[:, a] < pos[:, b], 1, -1).astype(np.int8)
    return vec[0] if one else vec


def from_pairwise(vec) -> np.ndarray:
    """Decode a transitive pairwise vector back into an order.

    Raises NonTransitiveError if the relation contains a cycle.
    """
    vec = np.asarray(vec)
    if vec.ndim != 1 or not np.all(np.abs(vec) == 1):
        raise ShapeError("pairwise vector must be 1D with entries in {-1, +1}")
    c = candidates_from_pairs(vec.size)
    a, b = candidate_pairs(c)
    wins = np.zeros(c, dtype=np.int64)
    np.add.at(wins, a, vec > 0)
    np.add.at(wins, b, vec < 0)
    # a tournament is transitive iff its win counts are exactly 0..c-1
    if not np.array_equal(np.sort(wins), np.arange(c)):
        raise NonTransitiveError("pairwise vector is not transitive")
    return np.argsort(-wins, kind="stable")


def is_transitive(vec) -> bool:
    try:
        from_pairwise(vec)
    except NonTransitiveError:
        return False
    return True


@lru_cache(maxsize=None)
def all_orders(c: int) -> tuple[np.ndarray, np.ndarray]:
    """All ``c!`` orders (lexicographic) and their pairwise vectors."""
    orders = np.array(list(itertools.permutations(range(c))), dtype=np.int64)
    vecs = to_pairwise(orders)
    orders.setflags(write=False)
    vecs.setflags(write=False)
    return orders, vecs


def parse_ranking_string(text: str) -> np.ndarray:
    """``"acbd"`` -> ``[0, 2, 1, 3]``; letters name candidates from ``a``."""
    text = text.strip()
    order = np.array([ord(ch) - ord("a") for ch in text], dtype=np.int64)
    if not text.isalpha() or not text.islower() or not is_permutation(order):
        raise ShapeError(f"invalid ranking string {text!r}")
    return order


def format_ranking(order) -> str:
    return "".join(chr(ord("a") + int(x)) for x in order)


# --------------------------------------------------------------------------
# distances
# --------------------------------------------------------------------------


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 1 or a.size == 0:
        raise ShapeError("answers must be non-empty 1D vectors")


def dist_continuous(a, b) -> float:
    """Normalized squared Euclidean distance ``mean((a - b)**2)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def dist_hamming(a, b) -> float:
    """Fraction of positions where two label vectors differ."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_same_shape(a, b)
    return np.count_nonzero(a != b) / a.size


def _as_pairwise(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ShapeError("expected a single ranking or pairwise vector")
    # every order contains candidate 0, so +-1 vectors are never orders
    if x.size and np.all(np.abs(x) == 1):
        return x
    if is_permutation(x):
        return to_pairwise(x)
    raise ShapeError("expected a permutation or a +-1 pairwise vector")


def dist_kendall(a, b) -> float:
    """Normalized Kendall-tau distance between orders or pairwise vectors.

    Pairwise vectors may be non-transitive.
    """
    va, vb = _as_pairwise(a), _as_pairwise(b)
    if va.shape != vb.shape:
        raise ShapeError("candidate-count mismatch")
    return dist_hamming(va, vb)


def distance_matrix(answers: np.ndarray, domain: str, k: Optional[int] = None) -> np.ndarray:
    """Full ``(n, n)`` matrix of pairwise distances between workers."""
    S = np.asarray(answers)
    if S.ndim != 2 or S.shape[1] == 0:
        raise ShapeError("answers must be a 2D (workers x questions) array")
    n, m = S.shape
    if domain == CONTINUOUS:
        S = S.astype(np.float64, copy=False)
        D = np.empty((n, n))
        for i in range(n):
            D[i] = np.mean((S - S[i]) ** 2, axis=1)
        return D
    if domain == CATEGORICAL:
        k = int(S.max()) + 1 if k is None else k
        agree = np.zeros((n, n))
        for x in range(k):
            onehot = (S == x).astype(np.float64)
            agree += onehot @ onehot.T
        return (m - agree) / m
    if domain == RANKING:
        V = S.astype(np.int64)
        return ((m - V @ V.T) // 2) / m
    raise ShapeError(f"unknown domain {domain!r}")


def proxy_from_matrix(D: np.ndarray) -> np.ndarray:
    """Average distance from every worker to all others."""
    n = D.shape[0]
    if n < 2:
        raise InsufficientWorkersError(f"need at least 2 workers, got {n}")
    # column sums accumulate sequentially over workers
    return D.sum(axis=0) / (n - 1)


def proxy_distances(instance: "Instance") -> np.ndarray:
    if instance.n < 2:
        raise InsufficientWorkersError(f"need at least 2 workers, got {instance.n}")
    return proxy_from_matrix(instance.distances())


def distance_to(answers: np.ndarray, target: np.ndarray, domain: str) -> np.ndarray:
    """Distance of every worker's answer to one target answer."""
    S = np.asarray(answers)
    target = np.asarray(target)
    if domain == CONTINUOUS:
        return np.mean((S - target) ** 2, axis=1)
    return np.count_nonzero(S != target, axis=1) / S.shape[1]


# --------------------------------------------------------------------------
# instances and populations
# --------------------------------------------------------------------------


def _frozen(x, dtype=None):
    if x is None:
        return None
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """An answer matrix with optional ground truth and true fault levels.

    For rankings ``answers`` holds pairwise vectors and ``truth`` an order;
    ``rankings`` keeps the original orders when every answer is transitive.
    """

    domain: str
    answers: np.ndarray
    truth: Optional[np.ndarray] = None
    k: Optional[int] = None
    faults: Optional[np.ndarray] = None
    phis: Optional[np.ndarray] = None
    rankings: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ShapeError(f"unknown domain {self.domain!r}")
        dtype = {CONTINUOUS: np.float64, CATEGORICAL: np.int64, RANKING: np.int8}[self.domain]
        S = np.array(self.answers, dtype=dtype)
        if S.ndim != 2 or S.shape[1] < 1:
            raise ShapeError("answers must be a non-empty (n, m) matrix")
        if S.shape[0] < 2:
            raise InsufficientWorkersError(f"need at least 2 workers, got {S.shape[0]}")
        if self.domain == CONTINUOUS and not np.all(np.isfinite(S)):
            raise ShapeError("continuous answers must be finite")
        if self.domain == CATEGORICAL:
            if self.k is None or self.k < 2:
                raise ShapeError("categorical instances need k >= 2")
            if S.min() < 0 or S.max() >= self.k:
                raise ShapeError(f"labels must lie in 0..{self.k - 1}")
        if self.domain == RANKING:
            if not np.all(np.abs(S) == 1):
                raise ShapeError("pairwise answers must be +-1")
            candidates_from_pairs(S.shape[1])
        object.__setattr__(self, "answers", _frozen(S))
        if self.truth is not None:
            t = np.array(self.truth, dtype=np.int64 if self.domain != CONTINUOUS else np.float64)
            if self.domain == RANKING:
                if t.shape != (self.n_candidates,) or not is_permutation(t):
                    raise ShapeError("ranking truth must be a permutation of the candidates")
            elif t.shape != (S.shape[1],):
                raise ShapeError("truth shape does not match answers")
            object.__setattr__(self, "truth", _frozen(t))
        if self.rankings is not None:
            R = np.array(self.rankings, dtype=np.int64)
            if R.shape != (S.shape[0], self.n_candidates):
                raise ShapeError("rankings shape does not match answers")
            object.__setattr__(self, "rankings", _frozen(R))
        for name in ("faults", "phis"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=np.float64)
                if v.shape != (S.shape[0],):
                    raise ShapeError(f"{name} must have one entry per worker")
                object.__setattr__(self, name, _frozen(v))
        object.__setattr__(self, "_cache", {})

    @property
    def n(self) -> int:
        return self.answers.shape[0]

    @property
    def m(self) -> int:
        """Number of coordinates (questions, or candidate pairs for rankings)."""
        return self.answers.shape[1]

    @property
    def n_candidates(self) -> Optional[int]:
        if self.domain != RANKING:
            return None
        return candidates_from_pairs(self.answers.shape[1])

    @property
    def size(self) -> int:
        """``m`` for answer vectors, candidate count ``c`` for rankings."""
        return self.n_candidates if self.domain == RANKING else self.m

    @property
    def truth_vector(self) -> Optional[np.ndarray]:
        """Ground truth in the same coordinates as ``answers``."""
        if self.truth is None:
            return None
        if self.domain == RANKING:
            return to_pairwise(self.truth)
        return self.truth

    def distances(self) -> np.ndarray:
        """Pairwise distance matrix, computed once per instance."""
        D = self._cache.get("D")
        if D is None:
            D = distance_matrix(self.answers, self.domain, self.k)
            D.setflags(write=False)
            self._cache["D"] = D
        return D

    def empirical_faults(self) -> Optional[np.ndarray]:
        """Distance of each worker to the ground truth."""
        if self.truth is None:
            return None
        return distance_to(self.answers, self.truth_vector, self.domain)

    def permuted(self, perm) -> "Instance":
        perm = np.asarray(perm)
        pick = lambda v: None if v is None else v[perm]  # noqa: E731
        return Instance(
            self.domain, self.answers[perm], self.truth, self.k,
            pick(self.faults), pick(self.phis), pick(self.rankings), dict(self.meta),
        )

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented

        def same(x, y):
            if x is None or y is None:
                return x is None and y is None
            return x.shape == y.shape and np.array_equal(x, y)

        return (
            self.domain == other.domain
            and self.k == other.k
            and same(self.answers, other.answers)
            and same(self.truth, other.truth)
            and same(self.faults, other.faults)
            and same(self.phis, other.phis)
            and same(self.rankings, other.rankings)
        )

    __hash__ = None


@dataclass(frozen=True)
class Population:
    faults: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "faults", _frozen(self.faults, np.float64))

    @property
    def n(self):
        return self.faults.size


PROTO_KINDS = ("normal", "uniform", "triangular", "bimodal", "point")


@dataclass(frozen=True)
class ProtoPopulation:
    """Distribution over fault levels, clipped into ``[lo, hi]``.

    Parameters per kind:

    ============  =====================================
    normal        ``(mean, std)``
    uniform       ``(low, high)``
    triangular    ``(low, mode, high)``
    bimodal       ``(f_good, f_bad, p_good)``
    point         ``(value,)``
    ============  =====================================
    """

    kind: str
    params: tuple
    clip: tuple = (-np.inf, np.inf)

    def __post_init__(self):
        if self.kind == "point-mass":
            object.__setattr__(self, "kind", "point")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "clip", tuple(float(c) for c in self.clip))
        arity = {"normal": 2, "uniform": 2, "triangular": 3, "bimodal": 3, "point": 1}
        if self.kind not in arity:
            raise InvalidParameterError(f"unknown proto-population kind {self.kind!r}")
        if len(self.params) != arity[self.kind]:
            raise InvalidParameterError(
                f"{self.kind} takes {arity[self.kind]} parameters, got {len(self.params)}"
            )
        lo, hi = self.clip
        if not lo <= hi:
            raise InvalidParameterError(f"clip bounds must satisfy lo <= hi, got {self.clip}")
        p = self.params
        if self.kind == "normal" and p[1] < 0:
            raise InvalidParameterError("normal std must be >= 0")
        if self.kind == "uniform" and p[0] > p[1]:
            raise InvalidParameterError("uniform needs low <= high")
        if self.kind == "triangular" and not p[0] <= p[1] <= p[2]:
            raise InvalidParameterError("triangular needs low <= mode <= high")
        if self.kind == "bimodal" and not 0 <= p[2] <= 1:
            raise InvalidParameterError("bimodal p_good must lie in [0, 1]")

    @classmethod
    def point_mass(cls, value):
        return cls("point", (value,), (value, value))

    def _raw(self, n, rng):
        p = self.params
        if self.kind == "normal":
            return rng.normal(p[0], p[1], size=n)
        if self.kind == "uniform":
            return rng.uniform(p[0], p[1], size=n)
        if self.kind == "triangular":
            if p[0] == p[2]:
                return np.full(n, p[0])
            return rng.triangular(p[0], p[1], p[2], size=n)
        if self.kind == "bimodal":
            good = rng.random(n) < p[2]
            return np.where(good, p[0], p[1])
        return np.full(n, p[0])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.clip(self._raw(n, rng), *self.clip)

    def _scipy(self):
        p = self.params
        if self.kind == "normal":
            return stats.norm(p[0], p[1])
        if self.kind == "uniform":
            return stats.uniform(p[0], p[1] - p[0])
        scale = p[2] - p[0]
        return stats.triang((p[1] - p[0]) / scale, loc=p[0], scale=scale)

    def _moment(self, power):
        lo, hi = self.clip
        p = self.params
        if self.kind == "point":
            return np.clip(p[0], lo, hi) ** power
        if self.kind == "bimodal":
            g, b = np.clip(p[0], lo, hi), np.clip(p[1], lo, hi)
            return p[2] * g**power + (1 - p[2]) * b**power
        if self.kind == "normal" and p[1] == 0 or self.kind == "triangular" and p[0] == p[2]:
            return np.clip(p[0], lo, hi) ** power
        dist = self._scipy()
        # censored at the bounds: mass outside lands exactly on lo / hi
        inner = dist.expect(lambda x: x**power, lb=max(lo, dist.support()[0]),
                            ub=min(hi, dist.support()[1])) if lo < hi else 0.0
        out = 0.0
        if np.isfinite(lo):
            out += dist.cdf(lo) * lo**power
        if np.isfinite(hi):
            out += dist.sf(hi) * hi**power
        return inner + out

    @property
    def mean(self) -> float:
        """Mean of the clipped distribution."""
        return float(self._moment(1))

    @property
    def variance(self) -> float:
        """Variance of the clipped distribution."""
        return float(max(self._moment(2) - self.mean**2, 0.0))

    def to_dict(self):
        clip = [c if np.isfinite(c) else ("inf" if c > 0 else "-inf") for c in self.clip]
        return {"kind": self.kind, "params": list(self.params), "clip": clip}

    @classmethod
    def from_dict(cls, d):
        clip = d.get("clip", ["-inf", "inf"])
        return cls(d["kind"], tuple(d["params"]), tuple(float(c) for c in clip))
