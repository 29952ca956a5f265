"""Concave-benefit / linear-cost utility model for information sharing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .topology import Topology


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class UtilityModel:
    """Benefit family plus linear sharing cost.

    The built-in ``"estimation"`` family gives agent i the benefit
    ``r2_i - r2_i / (1 + s)`` where ``s`` is the total inbound sharing.
    A ``"custom"`` model takes ``custom_benefit(inbound_vector) -> float``;
    the closed-form solvers only accept the sum-form family.
    """

    r2: float = 4.0
    kind: str = "estimation"
    r2_by_agent: tuple[float, ...] | None = None
    custom_benefit: Callable[[np.ndarray], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("estimation", "custom"):
            raise ModelError(f"unknown benefit family {self.kind!r}")
        if self.kind == "estimation" and not self.r2 > 0:
            raise ModelError("r2 must be positive")
        if self.kind == "custom" and self.custom_benefit is None:
            raise ModelError("custom benefit family requires custom_benefit")
        if self.r2_by_agent is not None:
            object.__setattr__(self, "r2_by_agent", tuple(float(x) for x in self.r2_by_agent))
            if min(self.r2_by_agent) <= 0:
                raise ModelError("per-agent r2 must be positive")

    @property
    def is_sum_form(self) -> bool:
        return self.kind == "estimation"

    def r2_of(self, i: int) -> float:
        return self.r2_by_agent[i] if self.r2_by_agent is not None else self.r2

    def r2_vector(self, n: int) -> np.ndarray:
        if self.r2_by_agent is not None:
            if len(self.r2_by_agent) != n:
                raise ModelError(f"model has {len(self.r2_by_agent)} agent parameters, topology has {n}")
            return np.array(self.r2_by_agent, dtype=np.float64)
        return np.full(n, float(self.r2))

    def benefit_of_sum(self, s, r2=None):
        """Sum-form benefit evaluated at inbound total(s) ``s``."""
        if not self.is_sum_form:
            raise ModelError("benefit_of_sum needs the sum-form family")
        r2 = self.r2 if r2 is None else r2
        s = np.asarray(s, dtype=np.float64)
        return r2 - r2 / (1.0 + s)

    def optimal_inbound_sum(self, r2=None) -> float:
        """Unconstrained maximiser of ``b(s) - s``: ``sqrt(r2) - 1`` floored at 0."""
        r2 = self.r2 if r2 is None else r2
        return max(0.0, float(np.sqrt(r2)) - 1.0)


def estimation_benefit(s, r2: float):
    s = np.asarray(s, dtype=np.float64)
    return r2 - r2 / (1.0 + s)


def _check_vector(v, size: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != size:
        raise ModelError(f"{what} has {v.size} entries, expected {size}")
    return v


def benefit(m: UtilityModel, t: Topology, i: int, inbound) -> float:
    """Benefit agent ``i`` derives from its inbound sharing vector."""
    v = _check_vector(inbound, len(t.neighbors[i]), f"inbound vector of agent {i}")
    if m.is_sum_form:
        return float(estimation_benefit(v.sum(), m.r2_of(i)))
    return float(m.custom_benefit(v))


def validate_profile(t: Topology, profile) -> np.ndarray:
    a = _check_vector(profile, t.n_arcs, "action profile")
    if np.any(a < -1e-12) or np.any(a > 1 + 1e-12) or not np.all(np.isfinite(a)):
        raise ModelError("actions must lie in [0, 1]")
    return a


def inbound_sums(t: Topology, profile) -> np.ndarray:
    return np.bincount(t.dst, weights=np.asarray(profile, dtype=np.float64), minlength=t.n)


def outbound_sums(t: Topology, profile) -> np.ndarray:
    return np.bincount(t.src, weights=np.asarray(profile, dtype=np.float64), minlength=t.n)


def benefits(m: UtilityModel, t: Topology, profile) -> np.ndarray:
    """Per-agent benefits under a profile over arcs."""
    a = np.asarray(profile, dtype=np.float64)
    if m.is_sum_form:
        return estimation_benefit(inbound_sums(t, a), m.r2_vector(t.n))
    return np.array([float(m.custom_benefit(a[t.inbound_arcs(i)])) for i in range(t.n)])


def utilities(m: UtilityModel, t: Topology, profile) -> np.ndarray:
    a = validate_profile(t, profile)
    return benefits(m, t, a) - outbound_sums(t, a)


def utility(m: UtilityModel, t: Topology, i: int, profile) -> float:
    """Benefit from inbound sharing minus the l1 cost of outbound sharing."""
    a = validate_profile(t, profile)
    inb = a[t.inbound_arcs(i)]
    return benefit(m, t, i, inb) - float(a[t.outbound_arcs(i)].sum())


@dataclass
class ModelReport:
    checks: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(m: UtilityModel, samples: int, seed: int = 0, dim: int = 3,
                   tol: float = 1e-12) -> ModelReport:
    """Spot-check monotonicity and midpoint concavity on random inbound vectors."""
    if samples < 1:
        raise ModelError("samples must be >= 1")
    rng = np.random.default_rng(seed)

    def f(v):
        if m.is_sum_form:
            return float(estimation_benefit(v.sum(), m.r2))
        return float(m.custom_benefit(v))

    violations = []
    for k in range(samples):
        x = rng.random(dim)
        y = rng.random(dim)
        bump = x.copy()
        j = int(rng.integers(dim))
        bump[j] = min(1.0, bump[j] + rng.random() * (1.0 - bump[j]))
        if f(bump) < f(x) - tol:
            violations.append(f"sample {k}: monotonicity violated along coordinate {j}")
        if f(0.5 * (x + y)) < 0.5 * (f(x) + f(y)) - tol:
            violations.append(f"sample {k}: concavity violated at midpoint")
    return ModelReport(checks=samples, violations=violations)


def sum_form_model(r2: float | Sequence[float]) -> UtilityModel:
    if np.ndim(r2) == 0:
        return UtilityModel(r2=float(r2))
    vals = tuple(float(x) for x in r2)
    return UtilityModel(r2=vals[0], r2_by_agent=vals)
