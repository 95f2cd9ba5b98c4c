"""Weight transforms and weighted aggregation rules.

Ranking rules take pairwise answers ``(n, P)`` plus, when available, the
original orders ``(n, c)``. Every rule outputs an order (best first).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CATEGORICAL,
    CONTINUOUS,
    RANKING,
    all_orders,
    candidate_pairs,
    candidates_from_pairs,
    from_pairwise,
    positions,
)
from .errors import (
    ConfigError,
    NonTransitiveError,
    DegenerateWeightsError,
    ExceedsExactSearchError,
    InvalidParameterError,
)
from .noisegen import make_rng

DEFAULT_EPS = 1e-4
KEMENY_CAP = 8

RANK_RULES = (
    "borda",
    "copeland",
    "kemeny",
    "kemeny-weighted-graph",
    "plurality-rank",
    "veto",
    "best-dictator",
    "random-dictator",
)
RULES = ("mean", "plurality") + RANK_RULES
RULES_FOR_DOMAIN = {CONTINUOUS: ("mean",), CATEGORICAL: ("plurality",), RANKING: RANK_RULES}


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    policy: str
    eps: Optional[float] = None
    clamped: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise DegenerateWeightsError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n), "uniform")


def _values(f):
    return np.asarray(getattr(f, "values", f), dtype=np.float64)


def weights_inverse_variance(f_hat, eps: float = DEFAULT_EPS) -> WeightVector:
    f = _values(f_hat)
    clamped = f < eps
    return WeightVector(1.0 / np.maximum(f, eps), "inverse-variance", eps, clamped)


def grofman(f, k: int = 2):
    """Log-odds weight ``log((1 - f)(k - 1) / f)`` (no clamping)."""
    f = np.asarray(f, dtype=np.float64)
    return np.log((1 - f) * (k - 1) / f)


def weights_grofman(f_hat, k: int = 2, eps: float = DEFAULT_EPS, clip_negative: bool = False):
    if k < 2:
        raise InvalidParameterError("Grofman weights need k >= 2")
    f = _values(f_hat)
    fc = np.clip(f, eps, 1 - eps)
    w = grofman(fc, k)
    if clip_negative:
        w = np.maximum(w, 0.0)
    policy = "grofman-clipped" if clip_negative else "grofman"
    return WeightVector(w, policy, eps, fc != f)


def _w(w, n):
    if w is None:
        return np.full(n, 1.0 / n)
    w = _values(getattr(w, "weights", w))
    if w.shape != (n,):
        raise DegenerateWeightsError(f"expected {n} weights, got shape {w.shape}")
    return w


# --------------------------------------------------------------------------
# continuous and categorical
# --------------------------------------------------------------------------


def agg_mean(S, w=None) -> np.ndarray:
    """Per-question weighted average."""
    S = np.asarray(S, dtype=np.float64)
    w = _w(w, S.shape[0])
    total = w.sum()
    if not total > 0:
        raise DegenerateWeightsError("weighted mean needs a positive total weight")
    return (w @ S) / total


def tallies(S, w, k: int) -> np.ndarray:
    """``(m, k)`` summed weight behind every label of every question."""
    S = np.asarray(S)
    T = np.empty((S.shape[1], k))
    for x in range(k):
        T[:, x] = w @ (S == x)
    return T


def argmax_random_ties(scores: np.ndarray, rng) -> np.ndarray:
    """Row-wise argmax; exact ties broken uniformly at random."""
    best = scores == scores.max(axis=-1, keepdims=True)
    keys = np.where(best, rng.random(scores.shape), -1.0)
    return keys.argmax(axis=-1)


def agg_plurality(S, w=None, k: Optional[int] = None, seed=0) -> np.ndarray:
    """Weighted plurality per question; negative weights count against."""
    S = np.asarray(S)
    k = int(S.max()) + 1 if k is None else k
    w = _w(w, S.shape[0])
    return argmax_random_ties(tallies(S, w, k), make_rng(seed))


# --------------------------------------------------------------------------
# rankings
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedMajorityGraph:
    """``v[a, b]``: share of weight ranking a above b; ``y = v > 0.5``."""

    v: np.ndarray
    y: np.ndarray


def _rank_weights(w, n):
    w = _w(w, n)
    if np.any(w < 0):
        raise InvalidParameterError("ranking rules need non-negative weights")
    total = w.sum()
    if total == 0:
        return np.full(n, 1.0 / n)
    return w / total


def majority_graph(V, w=None) -> WeightedMajorityGraph:
    V = np.asarray(V)
    w = _rank_weights(w, V.shape[0])
    c = candidates_from_pairs(V.shape[1])
    a, b = candidate_pairs(c)
    pro = w @ (V > 0)
    v = np.zeros((c, c))
    v[a, b] = pro
    v[b, a] = w @ (V < 0)
    return WeightedMajorityGraph(v, v > 0.5)


def order_by_score(q: np.ndarray, rng) -> np.ndarray:
    """Candidates by ascending score, exact ties in random order."""
    return np.lexsort((rng.random(q.size), q))


def kemeny(V, w=None, variant: str = "unweighted-graph", seed=0, cap: int = KEMENY_CAP):
    """Exact (weighted) Kemeny-Young by enumerating all orders.

    ``unweighted-graph`` projects the sign of the weighted pairwise vote;
    ``weighted-graph`` minimizes the l1 distance to the vote fractions,
    which equals maximizing agreement with the weighted vote sum.
    """
    V = np.asarray(V)
    c = candidates_from_pairs(V.shape[1])
    if c > cap:
        raise ExceedsExactSearchError(f"exact Kemeny is capped at {cap} candidates, got {c}")
    rng = make_rng(seed)
    w = _rank_weights(w, V.shape[0])
    s = w @ V.astype(np.float64)
    orders, vecs = all_orders(c)
    if variant == "unweighted-graph":
        y0 = np.sign(s)
        zero = y0 == 0
        y0[zero] = rng.choice([-1.0, 1.0], size=int(zero.sum()))
        score = vecs @ y0
        best = score == score.max()
    elif variant == "weighted-graph":
        score = vecs @ s
        best = np.isclose(score, score.max(), rtol=1e-12, atol=1e-12)
    else:
        raise ConfigError(f"unknown Kemeny variant {variant!r}")
    choice = np.flatnonzero(best)
    return orders[choice[rng.integers(choice.size)]].copy()


def project_to_rankings(V, seed=0, cap: int = KEMENY_CAP) -> np.ndarray:
    """Closest order to every (possibly cyclic) pairwise vector."""
    V = np.asarray(V)
    rng = make_rng(seed)
    out = []
    for vec in V:
        try:
            out.append(from_pairwise(vec))
        except NonTransitiveError:
            out.append(kemeny(vec[None, :], None, "unweighted-graph", rng, cap))
    return np.array(out, dtype=np.int64)


def rule_score(rule: str, V, w=None, seed=0, rankings=None, cap: int = KEMENY_CAP):
    """Aggregate rankings with one of the named voting rules.

    ``V`` holds pairwise vectors; positional and dictator rules read
    ``rankings`` when given, otherwise the Kemeny projection of each row.
    """
    if rule not in RANK_RULES:
        raise ConfigError(f"unknown ranking rule {rule!r}")
    V = np.asarray(V)
    n = V.shape[0]
    w = _rank_weights(w, n)
    rng = make_rng(seed)
    if rule == "kemeny":
        return kemeny(V, w, "unweighted-graph", rng, cap)
    if rule == "kemeny-weighted-graph":
        return kemeny(V, w, "weighted-graph", rng, cap)
    if rule == "copeland":
        y = majority_graph(V, w).y
        return order_by_score(y.sum(axis=0).astype(np.float64), rng)

    R = project_to_rankings(V, rng, cap) if rankings is None else np.asarray(rankings)
    c = R.shape[1]
    if rule == "best-dictator":
        return R[argmax_random_ties(w, rng)].copy()
    if rule == "random-dictator":
        return R[rng.choice(n, p=w)].copy()
    pos = positions(R)
    if rule == "borda":
        q = w @ pos
    elif rule == "plurality-rank":
        q = -(w @ (pos == 0))
    else:  # veto
        q = w @ (pos == c - 1)
    return order_by_score(q, rng)


def aggregate(domain: str, rule: str, S, w=None, seed=0, k=None, rankings=None):
    """Dispatch to the aggregation rule for ``domain``."""
    if rule not in RULES_FOR_DOMAIN.get(domain, ()):
        raise ConfigError(f"rule {rule!r} does not apply to the {domain} domain")
    if rule == "mean":
        return agg_mean(S, w)
    if rule == "plurality":
        return agg_plurality(S, w, k, seed)
    return rule_score(rule, S, w, seed, rankings)
