"""Monte Carlo simulator of the repeated sharing game under a rating protocol."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .protocol import RatingProtocol, signal_matrix, value_functions
from .topology import Topology
from .utility import ModelError, UtilityModel

BEHAVIOR_CODES = {"compliant": 0, "always_zero": 1, "best_response": 2, "scripted": 3}
CHUNK = 4096


@dataclass(frozen=True)
class BehaviorSpec:
    """One behaviour per agent.

    ``scripted`` agents comply except in the periods listed for them in
    ``deviation_periods`` (0-based), where they share nothing.
    """

    kinds: tuple[str, ...]
    deviation_periods: dict[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        for k in self.kinds:
            if k not in BEHAVIOR_CODES:
                raise ValueError(f"unknown behaviour {k!r}")
        for i in self.deviation_periods:
            if self.kinds[i] != "scripted":
                raise ValueError(f"agent {i} has deviation periods but is not scripted")

    @classmethod
    def uniform(cls, n: int, kind: str = "compliant") -> "BehaviorSpec":
        return cls(tuple([kind] * n))

    @classmethod
    def one_shot(cls, n: int, agent: int, periods) -> "BehaviorSpec":
        kinds = ["compliant"] * n
        kinds[agent] = "scripted"
        return cls(tuple(kinds), {agent: frozenset(int(p) for p in periods)})


@dataclass
class SimResult:
    horizon: int
    welfare: float                     # time-average social welfare
    per_agent_utility: np.ndarray      # time-average utility per agent
    discounted_utility: np.ndarray | None
    occupancy: np.ndarray              # (n, K) fractions after burn-in
    occupancy_counts: np.ndarray       # (n, K) counts over all periods
    profile_counts: dict[tuple[int, ...], int]
    final_ratings: np.ndarray
    trace: list[tuple[int, int, int, float, float]] | None = None

    def high_fraction(self) -> np.ndarray:
        return self.occupancy[:, -1]


def _deviation_thresholds(protocol: RatingProtocol, t: Topology, m: UtilityModel, delta: float,
                          eps: float) -> np.ndarray:
    """Continuation value an agent forfeits by deviating, per agent and rating.

    An agent whose current sharing cost exceeds this amount gains by
    deviating for one period.
    """
    if delta <= 0:
        return np.zeros((t.n, protocol.K))
    mode = "average" if delta >= 1 else "discounted"
    V = value_functions(protocol, t, m, delta, eps, mode).values
    out = np.zeros((t.n, protocol.K))
    for i in range(t.n):
        diff = signal_matrix(protocol, i, eps, True) - signal_matrix(protocol, i, eps, False)
        out[i] = delta * diff @ V[i]
    return out


def best_response_action(i: int, ratings, protocol: RatingProtocol, t: Topology, m: UtilityModel,
                         delta: float, eps: float) -> np.ndarray:
    """Agent i's outbound action: its recommendation when compliance is worth
    at least as much as a one-period deviation, otherwise nothing."""
    ratings = np.asarray(ratings)
    arcs = t.outbound_arcs(i)
    rec = protocol.table.values[ratings[t.dst[arcs]] - 1, arcs]
    threshold = _deviation_thresholds(protocol, t, m, delta, eps)[i, ratings[i] - 1]
    if rec.sum() > threshold + 1e-12:
        return np.zeros_like(rec)
    return rec


@njit(cache=True)
def _periods(src, dst, table, alpha, beta, kinds, scripted, thresholds, r2, eps,
             ratings, draws, rating_hist, util, welfare):
    steps = draws.shape[0]
    n = ratings.shape[0]
    e = src.shape[0]
    K = table.shape[0]
    rec = np.empty(e)
    cost = np.empty(n)
    dev = np.zeros(n, dtype=np.bool_)
    inb = np.empty(n)
    outb = np.empty(n)
    for q in range(steps):
        for i in range(n):
            cost[i] = 0.0
            inb[i] = 0.0
            outb[i] = 0.0
            rating_hist[q, i] = ratings[i]
        for k in range(e):
            rec[k] = table[ratings[dst[k]] - 1, k]
            cost[src[k]] += rec[k]
        for i in range(n):
            kd = kinds[i]
            if kd == 0:
                dev[i] = False
            elif kd == 1:
                dev[i] = True
            elif kd == 2:
                dev[i] = cost[i] > thresholds[i, ratings[i] - 1] + 1e-12
            else:
                dev[i] = scripted[q, i]
        for k in range(e):
            if not dev[src[k]]:
                inb[dst[k]] += rec[k]
                outb[src[k]] += rec[k]
        w = 0.0
        for i in range(n):
            u = r2[i] - r2[i] / (1.0 + inb[i]) - outb[i]
            util[q, i] = u
            w += u
        welfare[q] = w
        for i in range(n):
            good = (not dev[i]) or cost[i] == 0.0
            if draws[q, 0, i] < eps:
                good = not good
            k = ratings[i] - 1
            if good:
                if draws[q, 1, i] < beta[i, k] and ratings[i] < K:
                    ratings[i] += 1
            else:
                if draws[q, 1, i] < alpha[i, k] and ratings[i] > 1:
                    ratings[i] -= 1


def simulate(t: Topology, m: UtilityModel, protocol: RatingProtocol, behavior: BehaviorSpec,
             horizon: int, eps: float, seed: int, delta: float | None = None,
             burn_in: float = 0.1, trace: bool = False, profiles: bool = True) -> SimResult:
    """Play ``horizon`` periods starting with every agent at the top rating.

    ``delta`` is needed for best-response agents and for the discounted
    utility totals. Occupancy fractions skip the first ``burn_in`` share of
    periods; counts cover every period.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    if not m.is_sum_form:
        raise ModelError("the simulator supports the sum-form benefit only")
    if len(behavior.kinds) != t.n:
        raise ValueError("behaviour spec must list one behaviour per agent")
    kinds = np.array([BEHAVIOR_CODES[k] for k in behavior.kinds], dtype=np.int64)
    if np.any(kinds == 2) and delta is None:
        raise ValueError("best-response agents need delta")
    thresholds = (_deviation_thresholds(protocol, t, m, delta, eps) if np.any(kinds == 2)
                  else np.zeros((t.n, protocol.K)))
    rng = np.random.default_rng(seed)
    K = protocol.K
    ratings = np.full(t.n, K, dtype=np.int64)
    r2 = m.r2_vector(t.n)
    src, dst = t.src, t.dst
    table = np.ascontiguousarray(protocol.table.values)
    skip = int(np.floor(burn_in * horizon))

    total_util = np.zeros(t.n)
    disc_util = np.zeros(t.n) if delta is not None else None
    welfare_sum = 0.0
    occ_all = np.zeros((t.n, K), dtype=np.int64)
    occ_post = np.zeros((t.n, K), dtype=np.int64)
    prof: dict[tuple[int, ...], int] = {}
    rows = [] if trace else None
    start = 0
    while start < horizon:
        steps = min(CHUNK, horizon - start)
        draws = rng.random((steps, 2, t.n))
        scripted = np.zeros((steps, t.n), dtype=np.bool_)
        for i, periods in behavior.deviation_periods.items():
            for p in periods:
                if start <= p < start + steps:
                    scripted[p - start, i] = True
        rating_hist = np.empty((steps, t.n), dtype=np.int64)
        util = np.empty((steps, t.n))
        welfare = np.empty(steps)
        _periods(src, dst, table, protocol.alpha, protocol.beta, kinds, scripted, thresholds,
                 r2, float(eps), ratings, draws, rating_hist, util, welfare)
        total_util += util.sum(axis=0)
        welfare_sum += welfare.sum()
        if disc_util is not None:
            disc_util += (delta ** np.arange(start, start + steps)) @ util
        idx = np.arange(t.n)
        for k in range(K):
            hit = rating_hist == k + 1
            occ_all[idx, k] += hit.sum(axis=0)
            lo = max(0, skip - start)
            occ_post[idx, k] += hit[lo:].sum(axis=0)
        if profiles:
            uniq, counts = np.unique(rating_hist, axis=0, return_counts=True)
            for row, c in zip(uniq, counts):
                key = tuple(int(x) for x in row)
                prof[key] = prof.get(key, 0) + int(c)
        if rows is not None:
            for q in range(steps):
                for i in range(t.n):
                    rows.append((start + q, i, int(rating_hist[q, i]), 0.0, float(util[q, i])))
        start += steps
    if rows is not None:
        rows = _fill_action_sums(rows, t, protocol, behavior, m, delta, eps, thresholds)
    post = max(1, horizon - skip)
    return SimResult(
        horizon=horizon,
        welfare=welfare_sum / horizon,
        per_agent_utility=total_util / horizon,
        discounted_utility=disc_util,
        occupancy=occ_post / post,
        occupancy_counts=occ_all,
        profile_counts=prof,
        final_ratings=ratings.copy(),
        trace=rows,
    )


def _fill_action_sums(rows, t, protocol, behavior, m, delta, eps, thresholds):
    """Recompute each agent's outbound total from the recorded ratings."""
    out = []
    n = t.n
    for start in range(0, len(rows), n):
        block = rows[start:start + n]
        period = block[0][0]
        ratings = np.array([r[2] for r in block])
        rec = protocol.table.values[ratings[t.dst] - 1, np.arange(t.n_arcs)]
        cost = np.bincount(t.src, weights=rec, minlength=n)
        for (p, i, rating, _, u) in block:
            kind = behavior.kinds[i]
            dev = (kind == "always_zero"
                   or (kind == "scripted" and period in behavior.deviation_periods.get(i, ()))
                   or (kind == "best_response" and cost[i] > thresholds[i, rating - 1] + 1e-12))
            out.append((p, i, rating, 0.0 if dev else float(cost[i]), u))
    return out


def stage_welfare(t: Topology, m: UtilityModel, protocol: RatingProtocol, ratings) -> float:
    """Social welfare of one period in which everyone follows the protocol."""
    ratings = np.asarray(ratings)
    rec = protocol.table.values[ratings[t.dst] - 1, np.arange(t.n_arcs)]
    inb = np.bincount(t.dst, weights=rec, minlength=t.n)
    r2 = m.r2_vector(t.n)
    return float(np.sum(r2 - r2 / (1.0 + inb)) - rec.sum())
