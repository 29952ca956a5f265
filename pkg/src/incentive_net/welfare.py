"""Obedient-agent welfare benchmark, welfare accounting and price of anarchy."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .topology import Topology
from .utility import ModelError, UtilityModel, benefits, outbound_sums, validate_profile


def even_split(total: float, caps) -> np.ndarray:
    """Split ``total`` evenly over slots with upper bounds ``caps``.

    Slots that hit their cap are clamped and the residual is spread evenly
    over the remaining open slots; ascending slot order is never consulted,
    so the result is independent of neighbour labelling.
    """
    caps = np.asarray(caps, dtype=np.float64)
    out = np.zeros(caps.size)
    remaining = min(max(float(total), 0.0), float(caps.sum()))
    open_ = caps > 0
    while remaining > 1e-15 and open_.any():
        share = remaining / open_.sum()
        take = np.where(open_, np.minimum(share, caps - out), 0.0)
        out += take
        remaining -= take.sum()
        open_ &= (caps - out) > 1e-15
    return out


def _projected_gradient(f, dim: int, step: float = 0.05, iters: int = 10_000,
                        tol: float = 1e-8, h: float = 1e-7) -> np.ndarray:
    """Maximise ``f(v) - sum(v)`` over the unit box by projected gradient ascent."""
    v = np.full(dim, 0.5)
    for _ in range(iters):
        g = np.empty(dim)
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = h
            g[k] = (f(np.clip(v + e, 0, 1)) - f(np.clip(v - e, 0, 1))) / (
                np.clip(v[k] + h, 0, 1) - np.clip(v[k] - h, 0, 1))
        new = np.clip(v + step * (g - 1.0), 0.0, 1.0)
        if np.max(np.abs(new - v)) < tol:
            return new
        v = new
    return v


def solve_obedient(t: Topology, m: UtilityModel) -> tuple[np.ndarray, float]:
    """Welfare-maximising profile when agents share whatever they are told.

    Each agent's inbound vector maximises its own benefit minus the sharing
    it receives; for the sum form the optimal inbound total is
    ``min(degree, sqrt(r2) - 1)`` split evenly across neighbours.
    """
    profile = np.zeros(t.n_arcs)
    for i in range(t.n):
        arcs = t.inbound_arcs(i)
        if arcs.size == 0:
            continue
        if m.is_sum_form:
            s = min(float(arcs.size), m.optimal_inbound_sum(m.r2_of(i)))
            profile[arcs] = even_split(s, np.ones(arcs.size))
        else:
            profile[arcs] = _projected_gradient(lambda v: float(m.custom_benefit(v)), arcs.size)
    return profile, social_welfare(t, m, profile)


def optimal_welfare(t: Topology, m: UtilityModel) -> float:
    """Closed-form obedient optimum for the sum form (no profile built)."""
    if not m.is_sum_form:
        return solve_obedient(t, m)[1]
    r2 = m.r2_vector(t.n)
    s = np.minimum(t.degrees.astype(np.float64), np.maximum(0.0, np.sqrt(r2) - 1.0))
    return float(np.sum(r2 - r2 / (1.0 + s) - s))


def social_welfare(t: Topology, m: UtilityModel, profile) -> float:
    """Sum of benefits minus sum of sharing costs."""
    a = validate_profile(t, profile)
    return float(benefits(m, t, a).sum() - outbound_sums(t, a).sum())


def price_of_anarchy(v_opt: float, v_star: float) -> float:
    if v_star > 0:
        return v_opt / v_star
    if v_opt <= 0:
        return 1.0
    return float("inf")


@dataclass
class Metrics:
    V_opt: float
    V_star: float
    poa: float
    per_agent_utility: list[float]

    @classmethod
    def build(cls, v_opt: float, v_star: float, per_agent) -> "Metrics":
        return cls(float(v_opt), float(v_star), price_of_anarchy(v_opt, v_star),
                   [float(x) for x in per_agent])

    def to_dict(self) -> dict:
        return asdict(self)


def poa_threshold_degree(m: UtilityModel, delta: float, tol: float = 1e-9) -> float:
    """Positive root of ``delta * b(d) = d`` for the sum-form benefit, else 0."""
    if not m.is_sum_form:
        raise ModelError("degree threshold is defined for the sum-form benefit only")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    r2 = m.r2

    def f(d):
        return delta * (r2 - r2 / (1.0 + d)) - d

    # f is concave with f(0)=0 and f'(0)=delta*r2-1; no positive root otherwise
    if delta * r2 - 1.0 <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        lo, hi = hi, 2 * hi
    lo = max(lo, tol)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
