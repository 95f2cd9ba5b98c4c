"""Fault-level estimation: D-EFL, P-EFL, Estimate-Mu, IP-EFL and ID-TD."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .aggregation import DEFAULT_EPS, RULES_FOR_DOMAIN, aggregate, grofman
from .core import (
    CATEGORICAL,
    CONTINUOUS,
    RANKING,
    Instance,
    distance_to,
    proxy_from_matrix,
    to_pairwise,
)
from .errors import ConfigError, InvalidParameterError, SingularInversionError
from .noisegen import child_seed

DEFAULT_RULE = {CONTINUOUS: "mean", CATEGORICAL: "plurality", RANKING: "kemeny"}


@dataclass(frozen=True)
class FaultEstimate:
    values: np.ndarray
    estimator: str
    u: Optional[float] = None
    mu_hat: Optional[float] = None
    T: Optional[int] = None
    fallback_iterations: tuple = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def to_rows(self):
        for i, f in enumerate(self.values):
            yield {"worker_id": i, "f_hat": f, "estimator": self.estimator,
                   "u": "" if self.u is None else self.u,
                   "T": "" if self.T is None else self.T}


@dataclass(frozen=True)
class EstimatorConfig:
    u: float = 0.0
    T: int = 8
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.T < 1:
            raise InvalidParameterError("T must be >= 1")
        if not 0 < self.eps < 0.5:
            raise InvalidParameterError("eps must lie in (0, 0.5)")


_U_FORMS = {
    "1/n": lambda n: 1 / n,
    "1/(n-1)": lambda n: 1 / (n - 1),
    "1/(n-2)": lambda n: 1 / (n - 2),
}


def resolve_u(u: Union[float, str, None], n: int) -> float:
    """Numeric u; accepts the symbolic forms ``1/n``, ``1/(n-1)``, ``1/(n-2)``."""
    if u is None:
        return 0.0
    if isinstance(u, str):
        key = re.sub(r"\s+", "", u)
        if key in _U_FORMS:
            return _U_FORMS[key](n)
        try:
            u = float(key)
        except ValueError:
            raise InvalidParameterError(f"cannot parse u={u!r}") from None
    if u < 0:
        raise InvalidParameterError("u must be >= 0")
    return float(u)


def rule_for(instance: Instance, rule: Optional[str]) -> str:
    rule = DEFAULT_RULE[instance.domain] if rule is None else rule
    if rule not in RULES_FOR_DOMAIN[instance.domain]:
        raise ConfigError(f"rule {rule!r} does not apply to the {instance.domain} domain")
    return rule


def _k(instance: Instance) -> int:
    return instance.k if instance.domain == CATEGORICAL else 2


def outcome_vector(instance: Instance, y) -> np.ndarray:
    """Aggregated answer in the coordinates of ``instance.answers``."""
    return to_pairwise(y) if instance.domain == RANKING else np.asarray(y)


def d_efl(instance: Instance, rule: Optional[str] = None, seed=0) -> FaultEstimate:
    """Distance of every worker from the unweighted aggregate."""
    rule = rule_for(instance, rule)
    y0 = aggregate(instance.domain, rule, instance.answers, None, child_seed(seed, 0),
                   instance.k, instance.rankings)
    f0 = distance_to(instance.answers, outcome_vector(instance, y0), instance.domain)
    return FaultEstimate(f0, "D-EFL")


def estimate_mu(instance: Instance, u, rule: Optional[str] = None, seed=0) -> float:
    u = resolve_u(u, instance.n)
    if u == 0:
        return 0.0
    return u * float(d_efl(instance, rule, seed).values.sum())


def p_efl_continuous(instance: Instance, u=0.0, seed=0) -> FaultEstimate:
    if instance.domain != CONTINUOUS:
        raise ConfigError("continuous P-EFL needs a continuous instance")
    u = resolve_u(u, instance.n)
    pi = proxy_from_matrix(instance.distances())
    mu = estimate_mu(instance, u, "mean", seed)
    return FaultEstimate(pi - mu, "P-EFL", u=u, mu_hat=mu)


def _p_efl_binary_like(instance, u, k, rule, seed):
    u = resolve_u(u, instance.n)
    theta = 1.0 / (k - 1)
    pi = proxy_from_matrix(instance.distances())
    mu = estimate_mu(instance, u, rule, seed)
    denom = 1.0 - (1.0 + theta) * mu
    if np.isclose(denom, 0.0, atol=1e-12):
        raise SingularInversionError(f"mu_hat={mu} makes the linear inversion singular")
    return FaultEstimate((pi - mu) / denom, "P-EFL", u=u, mu_hat=mu)


def p_efl_categorical(instance: Instance, u=0.0, seed=0) -> FaultEstimate:
    if instance.domain != CATEGORICAL:
        raise ConfigError("categorical P-EFL needs a categorical instance")
    return _p_efl_binary_like(instance, u, instance.k, "plurality", seed)


def p_efl_ranking(instance: Instance, u=0.0, rule: Optional[str] = None, seed=0) -> FaultEstimate:
    if instance.domain != RANKING:
        raise ConfigError("ranking P-EFL needs a ranking instance")
    return _p_efl_binary_like(instance, u, 2, rule_for(instance, rule), seed)


def p_efl(instance: Instance, u=0.0, rule: Optional[str] = None, seed=0) -> FaultEstimate:
    if instance.domain == CONTINUOUS:
        return p_efl_continuous(instance, u, seed)
    if instance.domain == CATEGORICAL:
        return p_efl_categorical(instance, u, seed)
    return p_efl_ranking(instance, u, rule, seed)


def weighted_proxy(D: np.ndarray, w) -> np.ndarray:
    """Weighted average distance to the other workers.

    Equal weights reproduce the plain proxy distance exactly.
    """
    w = np.asarray(w, dtype=np.float64)
    if np.all(w == w[0]) and w[0] > 0:
        return proxy_from_matrix(D)
    others = w.sum() - w
    if np.any(others <= 0):
        raise InvalidParameterError("weights of the other workers must have a positive sum")
    return (D @ w) / others


def ip_efl(instance: Instance, T: int = 8, eps: float = DEFAULT_EPS) -> FaultEstimate:
    """Iterated weighted proxy distance with Grofman weights.

    Iterations whose weights leave some worker with a non-positive
    denominator fall back to uniform weights; they are recorded.
    """
    if instance.domain == CONTINUOUS:
        raise ConfigError("IP-EFL applies to categorical and ranking instances")
    if T < 1:
        raise InvalidParameterError("T must be >= 1")
    k = _k(instance)
    D = instance.distances()
    n = instance.n
    w = np.full(n, 1.0 / n)
    fallbacks = []
    for t in range(T):
        if np.any(w.sum() - w <= 0):
            w = np.full(n, 1.0 / n)
            fallbacks.append(t)
        f = weighted_proxy(D, w)
        w = grofman(np.clip(f, eps, 1 - eps), k)
    return FaultEstimate(f, "IP-EFL", u=0.0, T=T, fallback_iterations=tuple(fallbacks))


def id_td_estimate(instance: Instance, T: int = 8, rule: Optional[str] = None, seed=0,
                   eps: float = DEFAULT_EPS):
    """Alternate weighted aggregation and distance-from-outcome estimation.

    Returns the final fault estimate and the aggregate under ``w^T``.
    Ranking instances clip negative weights at zero before aggregating.
    """
    if instance.domain == CONTINUOUS:
        raise ConfigError("ID-TD applies to categorical and ranking instances")
    if T < 1:
        raise InvalidParameterError("T must be >= 1")
    rule = rule_for(instance, rule)
    k = _k(instance)
    n = instance.n
    w = np.full(n, 1.0 / n)
    ranking = instance.domain == RANKING

    def agg(weights, t):
        if ranking:
            weights = np.maximum(weights, 0.0)
        return aggregate(instance.domain, rule, instance.answers, weights,
                         child_seed(seed, t), instance.k, instance.rankings)

    for t in range(T):
        y = agg(w, t)
        f = distance_to(instance.answers, outcome_vector(instance, y), instance.domain)
        w = grofman(np.clip(f, eps, 1 - eps), k)
    z_hat = agg(w, T)
    return FaultEstimate(f, "ID-TD", T=T), z_hat


__all__ = [
    "FaultEstimate", "EstimatorConfig", "resolve_u", "d_efl", "estimate_mu",
    "p_efl_continuous", "p_efl_categorical", "p_efl_ranking", "p_efl",
    "weighted_proxy", "ip_efl", "id_td_estimate",
]
