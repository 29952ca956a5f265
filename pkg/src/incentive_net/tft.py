"""Tit-for-Tat baseline: mirror rule, incentive test and symmetric optimum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Topology
from .utility import ModelError, UtilityModel, estimation_benefit, inbound_sums


@dataclass
class TftProfile:
    """Cooperative action per arc; punishment is always zero sharing."""

    coop: np.ndarray

    def __post_init__(self):
        self.coop = np.asarray(self.coop, dtype=np.float64)
        if np.any(self.coop <= 0) or np.any(self.coop > 1):
            raise ValueError("cooperative actions must lie in (0, 1]")


def tft_next_action(coop_ij: float, coop_ji: float, last_a_ji: float | None) -> float:
    """Cooperate first, then copy whether the partner cooperated last period."""
    if last_a_ji is None or last_a_ji == coop_ji:
        return coop_ij
    return 0.0


def tft_incentive_check(profile: TftProfile, t: Topology, m: UtilityModel,
                        delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-arc test that reciprocation repays cooperation.

    For arc i->j the margin is ``delta * (b_i(S_i) - b_i(S_i - a_ji)) - a_ij``
    with ``S_i`` agent i's inbound total under full cooperation: dropping
    the link costs i the partner's sharing from next period on.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if not m.is_sum_form:
        raise ModelError("the incentive test is implemented for the sum-form benefit")
    a = profile.coop
    S = inbound_sums(t, a)
    r2 = m.r2_vector(t.n)
    src, dst = t.src, t.dst
    reverse = np.array([t.arc_index[(int(j), int(i))] for i, j in t.arcs], dtype=np.int64)
    back = a[reverse]
    margin = delta * (estimation_benefit(S[src], r2[src])
                      - estimation_benefit(S[src] - back, r2[src])) - a
    return margin >= -1e-12, margin


def _symmetric_margin(a: float, d: int, m: UtilityModel, delta: float) -> float:
    return delta * (estimation_benefit(d * a, m.r2) - estimation_benefit((d - 1) * a, m.r2)) - a


def best_symmetric_tft(d: int, m: UtilityModel, delta: float,
                       resolution: float = 1e-4) -> tuple[float, float]:
    """Largest common cooperative action on a d-regular graph that passes the
    incentive test, capped at the welfare-maximising level; also returns the
    per-agent welfare ``b(d a) - d a``."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    if not m.is_sum_form:
        raise ModelError("symmetric search needs the sum-form benefit")
    upper = min(1.0, m.optimal_inbound_sum() / d)
    if upper <= 0 or delta <= 0:
        return 0.0, 0.0
    if _symmetric_margin(upper, d, m, delta) >= 0:
        best = upper
    else:
        grid = np.arange(resolution, upper + resolution / 2, resolution)
        ok = np.array([_symmetric_margin(a, d, m, delta) >= 0 for a in grid])
        if not ok.any():
            return 0.0, 0.0
        k = int(np.flatnonzero(ok).max())
        lo = grid[k]
        hi = grid[k + 1] if k + 1 < grid.size else upper
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _symmetric_margin(mid, d, m, delta) >= 0:
                lo = mid
            else:
                hi = mid
        best = lo
    s = d * best
    return float(best), float(estimation_benefit(s, m.r2) - s)


def symmetric_rating_welfare(d: int, m: UtilityModel, delta: float) -> tuple[float, float]:
    """Inbound total and per-agent welfare of the rating protocol on a
    d-regular graph, where each agent's constraint reads ``s <= delta b(s)``."""
    s_star = min(float(d), m.optimal_inbound_sum())
    s = min(s_star, max(0.0, delta * m.r2 - 1.0))
    return s, float(estimation_benefit(s, m.r2) - s)


def simulate_tft(t: Topology, profile: TftProfile, horizon: int,
                 deviations: dict[int, set[int]] | None = None) -> np.ndarray:
    """Play the mirror rule; ``deviations[i]`` lists periods where agent i
    shares nothing regardless. Returns the ``(horizon, arcs)`` action history."""
    deviations = deviations or {}
    reverse = np.array([t.arc_index[(int(j), int(i))] for i, j in t.arcs], dtype=np.int64)
    coop = profile.coop
    hist = np.zeros((horizon, t.n_arcs))
    for p in range(horizon):
        for k, (i, j) in enumerate(t.arcs):
            last = None if p == 0 else hist[p - 1, reverse[k]]
            act = tft_next_action(coop[k], coop[reverse[k]], last)
            if p in deviations.get(int(i), ()):
                act = 0.0
            hist[p, k] = act
    return hist
