"""Synthetic populations and instances under the four noise models.

All randomness comes from ``numpy.random.Generator`` objects built from a
seed; a seed may be an int or a sequence of ints (``(master, cell, rep)``),
which numpy hashes through ``SeedSequence`` so that derived streams are
independent and order-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    CATEGORICAL,
    CONTINUOUS,
    RANKING,
    Instance,
    Population,
    ProtoPopulation,
    is_permutation,
    to_pairwise,
)
from .errors import ConfigError, InvalidFaultError, InvalidParameterError, ShapeError

Seed = Union[int, Sequence[int], np.random.SeedSequence]

NOISE_KINDS = ("INN", "IER", "ICN", "Mallows")
DOMAIN_OF = {"INN": CONTINUOUS, "IER": CATEGORICAL, "ICN": RANKING, "Mallows": RANKING}


def make_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (list, tuple)):
        seed = [int(s) for s in seed]
    return np.random.default_rng(seed)


def child_seed(seed: Seed, *keys: int) -> list:
    """Seed for a named sub-stream: ``seed`` extended by ``keys``."""
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed] + [int(k) for k in keys]
    return [int(seed)] + [int(k) for k in keys]


def sample_population(proto: ProtoPopulation, n: int, seed: Seed) -> Population:
    if n < 2:
        raise InvalidParameterError(f"need at least 2 workers, got {n}")
    return Population(proto.sample(n, make_rng(seed)))


def phi_from_fault(f):
    """Mallows dispersion matching an ICN flip probability: ``f / (1 - f)``."""
    f = np.asarray(f, dtype=np.float64)
    if np.any((f <= 0) | (f >= 1)):
        raise InvalidParameterError("fault must lie strictly inside (0, 1)")
    out = f / (1 - f)
    return float(out) if out.ndim == 0 else out


def fault_from_phi(phi):
    """Inverse of :func:`phi_from_fault`: ``phi / (1 + phi)``."""
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(phi <= 0) or not np.all(np.isfinite(phi)):
        raise InvalidParameterError("phi must be a positive finite number")
    out = phi / (1 + phi)
    return float(out) if out.ndim == 0 else out


def _faults(pop) -> np.ndarray:
    return np.asarray(pop.faults if isinstance(pop, Population) else pop, dtype=np.float64)


def _unit_faults(f):
    if np.any((f < 0) | (f > 1)) or not np.all(np.isfinite(f)):
        raise InvalidFaultError("fault levels must lie in [0, 1]")


def gen_inn(z, pop, seed: Seed) -> Instance:
    """Independent normal noise: worker i answers ``z + N(0, f_i)`` per question."""
    z = np.asarray(z, dtype=np.float64)
    f = _faults(pop)
    if np.any(f <= 0) or not np.all(np.isfinite(f)):
        raise InvalidFaultError("INN fault levels must be positive")
    rng = make_rng(seed)
    noise = rng.standard_normal((f.size, z.size)) * np.sqrt(f)[:, None]
    return Instance(CONTINUOUS, z + noise, truth=z, faults=f)


def gen_ier(z, pop, seed: Seed, k: int) -> Instance:
    """Independent errors: wrong w.p. ``f_i``, wrong labels uniform over k-1."""
    z = np.asarray(z, dtype=np.int64)
    if k < 2:
        raise ShapeError("IER needs k >= 2")
    f = _faults(pop)
    _unit_faults(f)
    rng = make_rng(seed)
    wrong = rng.random((f.size, z.size)) < f[:, None]
    # shift by 1..k-1 picks each wrong label with equal probability
    shift = rng.integers(1, k, size=wrong.shape)
    S = np.where(wrong, (z + shift) % k, z)
    return Instance(CATEGORICAL, S, truth=z, k=k, faults=f)


def gen_icn(z, pop, seed: Seed) -> Instance:
    """Independent Condorcet noise: every pairwise entry flipped w.p. ``f_i``."""
    z = np.asarray(z, dtype=np.int64)
    if not is_permutation(z) or z.size < 2:
        raise ShapeError("ICN truth must be a permutation of c >= 2 candidates")
    f = _faults(pop)
    _unit_faults(f)
    rng = make_rng(seed)
    zv = to_pairwise(z)
    flip = rng.random((f.size, zv.size)) < f[:, None]
    S = np.where(flip, -zv, zv).astype(np.int8)
    return Instance(RANKING, S, truth=z, faults=f)


def mallows_orders(z, phis, rng: np.random.Generator) -> np.ndarray:
    """Exact Mallows samples by repeated insertion, one row per phi.

    The j-th candidate of ``z`` is inserted into the partial order at
    ``d`` places above the bottom with probability proportional to
    ``phi**d``; each such step adds exactly ``d`` discordant pairs.
    """
    z = np.asarray(z, dtype=np.int64)
    phis = np.asarray(phis, dtype=np.float64)
    if np.any(phis <= 0) or not np.all(np.isfinite(phis)):
        raise InvalidParameterError("Mallows phi must be positive and finite")
    n, c = phis.size, z.size
    u = rng.random((n, c))
    slot = np.zeros((n, c), dtype=np.int64)
    for j in range(1, c):
        cdf = np.cumsum(phis[:, None] ** np.arange(j + 1), axis=1)
        d = np.minimum((cdf <= u[:, j:j + 1] * cdf[:, -1:]).sum(axis=1), j)
        p = j - d
        # items at or below the insertion slot move down one place
        slot[:, :j] += slot[:, :j] >= p[:, None]
        slot[:, j] = p
    out = np.empty((n, c), dtype=np.int64)
    np.put_along_axis(out, slot, np.broadcast_to(z, (n, c)), axis=1)
    return out


def gen_mallows(z, phis, seed: Seed) -> Instance:
    z = np.asarray(z, dtype=np.int64)
    if not is_permutation(z) or z.size < 2:
        raise ShapeError("Mallows truth must be a permutation of c >= 2 candidates")
    phis = np.asarray(phis, dtype=np.float64)
    orders = mallows_orders(z, phis, make_rng(seed))
    return Instance(
        RANKING, to_pairwise(orders), truth=z, faults=fault_from_phi(phis),
        phis=phis, rankings=orders,
    )


# --------------------------------------------------------------------------
# noise-model specs (JSON experiment-config block)
# --------------------------------------------------------------------------

TRUTH_POLICIES = ("default", "uniform", "zero", "identity")


@dataclass(frozen=True)
class NoiseModelSpec:
    """A noise model, its proto-population and a ground-truth policy.

    ``size`` is ``m`` (questions) or ``c`` (candidates); grids override it.
    For Mallows the proto-population samples phi values directly.
    """

    kind: str
    proto: ProtoPopulation
    size: Optional[int] = None
    k: Optional[int] = None
    truth: str = "default"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise model {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind == "IER" and (self.k is None or self.k < 2):
            raise ConfigError("IER requires k >= 2")
        if self.kind in ("ICN", "Mallows") and self.size is not None and self.size < 2:
            raise ConfigError("ranking models require c >= 2")
        if self.truth not in TRUTH_POLICIES:
            raise ConfigError(f"unknown truth policy {self.truth!r}")

    @property
    def domain(self) -> str:
        return DOMAIN_OF[self.kind]

    def make_truth(self, size: int, rng: np.random.Generator) -> np.ndarray:
        policy = self.truth
        if self.kind == "INN":
            if policy == "uniform":
                return rng.standard_normal(size)
            return np.zeros(size)
        if self.kind == "IER":
            if policy == "zero":
                return np.zeros(size, dtype=np.int64)
            return rng.integers(0, self.k, size=size)
        if policy == "uniform":
            return rng.permutation(size)
        return np.arange(size)

    def generate(self, n: int, seed: Seed, size: Optional[int] = None) -> Instance:
        """Fresh population and instance; ``seed`` drives both."""
        size = self.size if size is None else size
        if size is None or size < 1:
            raise ConfigError("noise spec needs a question/candidate count")
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(
            [int(s) for s in seed] if isinstance(seed, (list, tuple)) else seed
        )
        pop_seed, truth_seed, inst_seed = ss.spawn(3)
        pop = sample_population(self.proto, n, pop_seed)
        z = self.make_truth(size, make_rng(truth_seed))
        if self.kind == "INN":
            inst = gen_inn(z, pop, inst_seed)
        elif self.kind == "IER":
            inst = gen_ier(z, pop, inst_seed, self.k)
        elif self.kind == "ICN":
            inst = gen_icn(z, pop, inst_seed)
        else:
            inst = gen_mallows(z, pop.faults, inst_seed)
        return inst

    def to_dict(self):
        d = {"kind": self.kind, "proto": self.proto.to_dict(), "truth": self.truth}
        if self.size is not None:
            d["c" if self.domain == RANKING else "m"] = self.size
        if self.k is not None:
            d["k"] = self.k
        return d

    @classmethod
    def from_dict(cls, d):
        if "kind" not in d or "proto" not in d:
            raise ConfigError("noise spec needs 'kind' and 'proto'")
        size = d.get("c", d.get("m"))
        return cls(
            kind=d["kind"],
            proto=ProtoPopulation.from_dict(d["proto"]),
            size=None if size is None else int(size),
            k=None if d.get("k") is None else int(d["k"]),
            truth=d.get("truth", "default"),
        )
