"""Truth-discovery methods: estimate faults, turn them into weights, aggregate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .aggregation import (
    DEFAULT_EPS,
    RULES_FOR_DOMAIN,
    WeightVector,
    aggregate,
    weights_grofman,
    weights_inverse_variance,
)
from .core import CATEGORICAL, CONTINUOUS, Instance, dist_continuous, dist_hamming, to_pairwise
from .errors import ConfigError, OracleUnavailableError
from .estimators import (
    FaultEstimate,
    rule_for,
    d_efl,
    id_td_estimate,
    ip_efl,
    p_efl,
    resolve_u,
)
from .noisegen import child_seed

METHODS = ("UA", "OA", "D-TD", "P-TD", "ID-TD", "IP-TD")
ITERATIVE = ("ID-TD", "IP-TD")


@dataclass(frozen=True)
class MethodSpec:
    method: str
    rule: Optional[str] = None
    u: Union[float, str] = 0.0
    T: int = 8
    eps: float = DEFAULT_EPS
    label: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.T < 1:
            raise ConfigError("T must be >= 1")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        name = self.method
        if self.method == "P-TD" and self.u not in (0, 0.0, "0"):
            name = f"{self.u}-P-TD"
        if self.rule is not None and self.rule not in ("mean", "plurality"):
            name = f"{name}[{self.rule}]"
        return name

    def check_domain(self, domain: str):
        if self.method in ITERATIVE and domain == CONTINUOUS:
            raise ConfigError(f"{self.method} applies to categorical and ranking data only")
        if self.rule is not None and self.rule not in RULES_FOR_DOMAIN[domain]:
            raise ConfigError(f"rule {self.rule!r} does not apply to the {domain} domain")

    def to_dict(self):
        d = {"method": self.method}
        if self.rule is not None:
            d["rule"] = self.rule
        if self.method == "P-TD":
            d["u"] = self.u
        if self.method in ITERATIVE:
            d["T"] = self.T
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d):
        if "method" not in d:
            raise ConfigError("method entry needs a 'method' field")
        return cls(d["method"], d.get("rule"), d.get("u", 0.0), int(d.get("T", 8)),
                   float(d.get("eps", DEFAULT_EPS)), d.get("label"))


@dataclass(frozen=True)
class MethodResult:
    method: str
    z_hat: np.ndarray
    f_hat: Optional[FaultEstimate]
    weights: Optional[WeightVector]
    error: Optional[float]
    rule: str
    u: Optional[float] = None
    T: Optional[int] = None
    seed: object = None
    n: int = 0
    size: int = 0

    def to_row(self):
        seed = self.seed
        if isinstance(seed, (list, tuple)):
            seed = "-".join(str(s) for s in seed)
        return {"method": self.method, "u": "" if self.u is None else self.u,
                "T": "" if self.T is None else self.T, "rule": self.rule, "n": self.n,
                "m_or_c": self.size, "error": "" if self.error is None else self.error,
                "seed": seed}


def domain_weights(instance: Instance, f, eps: float = DEFAULT_EPS) -> WeightVector:
    """Optimal weight transform of fault levels for the instance's domain."""
    if instance.domain == CONTINUOUS:
        return weights_inverse_variance(f, eps)
    if instance.domain == CATEGORICAL:
        return weights_grofman(f, instance.k, eps)
    return weights_grofman(f, 2, eps, clip_negative=True)


def error_of(instance: Instance, z_hat) -> Optional[float]:
    """Distance of an aggregate to the ground truth in the domain metric."""
    if instance.truth is None:
        return None
    if instance.domain == CONTINUOUS:
        return dist_continuous(z_hat, instance.truth)
    if instance.domain == CATEGORICAL:
        return dist_hamming(z_hat, instance.truth)
    return dist_hamming(to_pairwise(z_hat), instance.truth_vector)


def _aggregate(instance, rule, w, seed):
    return aggregate(instance.domain, rule, instance.answers, w, seed, instance.k,
                     instance.rankings)


def _result(instance, method, z_hat, f_hat, w, rule, seed, u=None, T=None):
    return MethodResult(method, np.asarray(z_hat), f_hat, w, error_of(instance, z_hat), rule,
                        u, T, seed, instance.n, instance.size)


def run_ua(instance: Instance, rule: Optional[str] = None, seed=0) -> MethodResult:
    rule = rule_for(instance, rule)
    w = WeightVector.uniform(instance.n)
    z_hat = _aggregate(instance, rule, w, child_seed(seed, 1))
    return _result(instance, "UA", z_hat, None, w, rule, seed)


def oracle_faults(instance: Instance) -> np.ndarray:
    if instance.faults is not None:
        return instance.faults
    if instance.truth is not None:
        return instance.empirical_faults()
    raise OracleUnavailableError("OA needs true fault levels or a ground truth")


def run_oa(instance: Instance, rule: Optional[str] = None, seed=0, eps=DEFAULT_EPS) -> MethodResult:
    rule = rule_for(instance, rule)
    f = FaultEstimate(oracle_faults(instance), "oracle")
    w = domain_weights(instance, f, eps)
    w = WeightVector(w.weights, "oracle", eps, w.clamped)
    z_hat = _aggregate(instance, rule, w, child_seed(seed, 1))
    return _result(instance, "OA", z_hat, f, w, rule, seed)


def run_p_td(instance: Instance, u=0.0, rule: Optional[str] = None, seed=0,
             eps=DEFAULT_EPS) -> MethodResult:
    rule = rule_for(instance, rule)
    f = p_efl(instance, u, rule, seed)
    w = domain_weights(instance, f, eps)
    z_hat = _aggregate(instance, rule, w, child_seed(seed, 1))
    return _result(instance, "P-TD", z_hat, f, w, rule, seed, u=f.u)


def run_d_td(instance: Instance, rule: Optional[str] = None, seed=0, eps=DEFAULT_EPS) -> MethodResult:
    rule = rule_for(instance, rule)
    f = d_efl(instance, rule, seed)
    w = domain_weights(instance, f, eps)
    z_hat = _aggregate(instance, rule, w, child_seed(seed, 1))
    return _result(instance, "D-TD", z_hat, f, w, rule, seed)


def run_ip_td(instance: Instance, T: int = 8, rule: Optional[str] = None, seed=0,
              eps=DEFAULT_EPS) -> MethodResult:
    rule = rule_for(instance, rule)
    f = ip_efl(instance, T, eps)
    w = domain_weights(instance, f, eps)
    z_hat = _aggregate(instance, rule, w, child_seed(seed, 1))
    return _result(instance, "IP-TD", z_hat, f, w, rule, seed, T=T)


def run_id_td(instance: Instance, T: int = 8, rule: Optional[str] = None, seed=0,
              eps=DEFAULT_EPS) -> MethodResult:
    rule = rule_for(instance, rule)
    f, z_hat = id_td_estimate(instance, T, rule, seed, eps)
    return _result(instance, "ID-TD", z_hat, f, None, rule, seed, T=T)


def run_method(instance: Instance, spec: MethodSpec, seed=0) -> MethodResult:
    spec.check_domain(instance.domain)
    m = spec.method
    if m == "UA":
        return run_ua(instance, spec.rule, seed)
    if m == "OA":
        return run_oa(instance, spec.rule, seed, spec.eps)
    if m == "P-TD":
        return run_p_td(instance, resolve_u(spec.u, instance.n), spec.rule, seed, spec.eps)
    if m == "D-TD":
        return run_d_td(instance, spec.rule, seed, spec.eps)
    if m == "IP-TD":
        return run_ip_td(instance, spec.T, spec.rule, seed, spec.eps)
    return run_id_td(instance, spec.T, spec.rule, seed, spec.eps)
