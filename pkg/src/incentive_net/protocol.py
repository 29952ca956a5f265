"""Rating protocols: update rule, binary design, value functions and
equilibrium checks.

Ratings run from 1 to K. On a bad signal an agent at rating k drops to
``max(1, k-1)`` with probability ``alpha[i, k-1]``; on a good signal it rises
to ``min(K, k+1)`` with probability ``beta[i, k-1]``. Signals record whether
the agent followed its recommendation and are flipped with probability eps.

Value functions and deviation gains are computed for one agent at a time,
holding every other agent compliant at the top rating. That is the
unilateral-deviation view used by the one-shot deviation principle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dcrs import FEASIBILITY_TOL, StrategyTable, check_incentive_feasibility
from .topology import Topology
from .utility import UtilityModel, benefits, outbound_sums

GAIN_TOL = 1e-9


class InfeasibleDesignError(ValueError):
    """The supplied top-rating strategy violates some incentive constraint."""

    def __init__(self, message: str, slacks: np.ndarray):
        super().__init__(message)
        self.slacks = slacks


@dataclass
class RatingProtocol:
    table: StrategyTable
    alpha: np.ndarray  # (n, K) demotion probability on a bad signal
    beta: np.ndarray   # (n, K) promotion probability on a good signal

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=np.float64))
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=np.float64))
        if self.alpha.shape != self.beta.shape or self.alpha.shape[1] != self.table.levels:
            raise ValueError("alpha/beta must be (agents, K) with K matching the strategy table")
        for name, arr in (("alpha", self.alpha), ("beta", self.beta)):
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError(f"{name} entries must lie in [0, 1]")

    @property
    def K(self) -> int:
        return self.table.levels

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def to_json(self) -> str:
        doc = {
            "K": self.K,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "strategy": self.table.values.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RatingProtocol":
        doc = json.loads(text)
        table = StrategyTable(np.array(doc["strategy"], dtype=np.float64).reshape(doc["K"], -1))
        return cls(table, np.array(doc["alpha"]), np.array(doc["beta"]))


# ---------------------------------------------------------------- design

def _require_feasible(sigma_top, t, m, delta) -> np.ndarray:
    slack = check_incentive_feasibility(sigma_top, t, m, delta)
    if slack.size and slack.min() < -FEASIBILITY_TOL:
        worst = int(np.argmin(slack))
        raise InfeasibleDesignError(
            f"agent {worst} violates its incentive constraint (slack {slack[worst]:.6g})", slack)
    return slack


def design_binary_protocol(sigma_top, t: Topology, m: UtilityModel, delta: float) -> RatingProtocol:
    """Two-level protocol with sure promotion and the smallest sufficient demotion.

    At the low rating an agent receives nothing. Promotion after a good
    signal is certain. Demotion after a bad signal happens with probability
    ``outbound / (delta * benefit)``, the least that still deters deviation.
    """
    sigma_top = np.asarray(sigma_top, dtype=np.float64)
    _require_feasible(sigma_top, t, m, delta)
    out = outbound_sums(t, sigma_top)
    ben = benefits(m, t, sigma_top)
    alpha_top = np.zeros(t.n)
    pos = out > 0
    alpha_top[pos] = np.minimum(1.0, out[pos] / (delta * ben[pos]))
    alpha = np.column_stack([np.zeros(t.n), alpha_top])
    beta = np.column_stack([np.ones(t.n), np.zeros(t.n)])
    table = StrategyTable(np.vstack([np.zeros_like(sigma_top), sigma_top]))
    return RatingProtocol(table, alpha, beta)


def feasible_update_bounds(i: int, sigma_top, t: Topology, m: UtilityModel,
                           delta: float) -> tuple[float, Callable[[float], float]]:
    """Lower bounds on promotion, and on demotion given promotion, for agent i."""
    sigma_top = np.asarray(sigma_top, dtype=np.float64)
    out = float(outbound_sums(t, sigma_top)[i])
    ben = float(benefits(m, t, sigma_top)[i])
    if ben <= out:
        raise InfeasibleDesignError(f"agent {i}: benefit {ben:.6g} does not exceed cost {out:.6g}",
                                    np.array([delta * ben - out]))
    beta_lb = (1.0 - delta) / delta * out / (ben - out)

    def alpha_lb(beta: float) -> float:
        return (1.0 - delta * (1.0 - beta)) / delta * out / ben

    return beta_lb, alpha_lb


def construct_appendix_protocol(sigma_top, t: Topology, m: UtilityModel, delta: float,
                                K: int = 2) -> RatingProtocol:
    """Perfect-monitoring protocol: any bad signal at the top rating demotes,
    any good signal one level below promotes, and that level is never left
    downwards."""
    if K < 2:
        raise ValueError("K must be at least 2")
    sigma_top = np.asarray(sigma_top, dtype=np.float64)
    _require_feasible(sigma_top, t, m, delta)
    alpha = np.zeros((t.n, K))
    alpha[:, K - 1] = 1.0
    beta = np.ones((t.n, K))
    beta[:, K - 1] = 0.0
    values = np.zeros((K, sigma_top.size))
    values[K - 1] = sigma_top
    return RatingProtocol(StrategyTable(values), alpha, beta)


# ---------------------------------------------------------------- dynamics

def transition_row(protocol: RatingProtocol, i: int, rating: int, signal: int) -> np.ndarray:
    """Distribution of the next rating (index 0 is rating 1)."""
    K = protocol.K
    row = np.zeros(K)
    k = rating - 1
    if signal == 0:
        p = protocol.alpha[i, k]
        row[max(0, k - 1)] += p
        row[k] += 1.0 - p
    else:
        p = protocol.beta[i, k]
        row[min(K - 1, k + 1)] += p
        row[k] += 1.0 - p
    return row


def rating_transition(rating: int, signal: int, protocol: RatingProtocol, i: int,
                      rng: np.random.Generator) -> int:
    if not 1 <= rating <= protocol.K:
        raise ValueError(f"rating {rating} outside 1..{protocol.K}")
    u = rng.random()
    if signal == 0:
        return max(1, rating - 1) if u < protocol.alpha[i, rating - 1] else rating
    return min(protocol.K, rating + 1) if u < protocol.beta[i, rating - 1] else rating


def stationary_high_fraction(alpha: float, beta: float, eps: float) -> float:
    """Long-run share of time a compliant agent spends at the high rating of a
    binary protocol."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    num = (1.0 - eps) * beta
    den = eps * alpha + num
    if den == 0:
        raise ValueError("chain has no unique stationary distribution (alpha = beta = 0)")
    return num / den


def signal_matrix(protocol: RatingProtocol, i: int, eps: float, complied: bool) -> np.ndarray:
    """One-period rating transition matrix for agent i."""
    p_good = 1.0 - eps if complied else eps
    K = protocol.K
    P = np.zeros((K, K))
    for r in range(1, K + 1):
        P[r - 1] = p_good * transition_row(protocol, i, r, 1) + (1 - p_good) * transition_row(protocol, i, r, 0)
    return P


# ---------------------------------------------------------------- values

def stage_terms(protocol: RatingProtocol, t: Topology, m: UtilityModel) -> tuple[np.ndarray, np.ndarray]:
    """Benefit received at each own rating, and the cost of compliance.

    Returns ``(ben, cost)`` where ``ben[i, k]`` is agent i's benefit when it
    holds rating ``k+1`` and its neighbours comply, and ``cost[i]`` is what
    agent i must share with neighbours who sit at the top rating.
    """
    ben = np.column_stack([benefits(m, t, protocol.table.at(k)) for k in range(1, protocol.K + 1)])
    cost = outbound_sums(t, protocol.table.top)
    return ben, cost


@dataclass
class ValueTable:
    values: np.ndarray  # (n, K)
    mode: str           # "discounted" or "average"
    gain_rate: np.ndarray | None = None  # long-run average per agent (average mode)

    def at(self, i: int, rating: int) -> float:
        return float(self.values[i, rating - 1])


def _average_solve(P: np.ndarray, u: np.ndarray) -> tuple[float, np.ndarray]:
    """Average reward and bias with the bias of rating 1 pinned to zero."""
    K = P.shape[0]
    A = np.zeros((K + 1, K + 1))
    A[:K, :K] = np.eye(K) - P
    A[:K, K] = 1.0
    A[K, 0] = 1.0
    rhs = np.concatenate([u, [0.0]])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return float(sol[K]), sol[:K]


def value_functions(protocol: RatingProtocol, t: Topology, m: UtilityModel, delta: float,
                    eps: float, mode: str = "discounted") -> ValueTable:
    """Compliant continuation values per agent and rating.

    ``mode="discounted"`` gives sums of discounted stage utilities and needs
    ``delta < 1``. ``mode="average"`` gives relative (bias) values of the
    long-run average criterion, which is the meaningful notion at ``delta = 1``.
    """
    if mode not in ("discounted", "average"):
        raise ValueError("mode must be 'discounted' or 'average'")
    if mode == "discounted" and not 0 <= delta < 1:
        raise ValueError("discounted values need delta < 1; use mode='average' for delta = 1")
    ben, cost = stage_terms(protocol, t, m)
    K = protocol.K
    vals = np.zeros((t.n, K))
    rates = np.zeros(t.n) if mode == "average" else None
    for i in range(t.n):
        u = ben[i] - cost[i]
        P = signal_matrix(protocol, i, eps, complied=True)
        if mode == "discounted":
            vals[i] = np.linalg.solve(np.eye(K) - delta * P, u)
        else:
            rates[i], vals[i] = _average_solve(P, u)
    return ValueTable(vals, mode, rates)


def deviation_gains(protocol: RatingProtocol, t: Topology, m: UtilityModel, delta: float,
                    eps: float, scale: float = 0.0) -> np.ndarray:
    """Gain from one period of sharing ``scale`` times the recommendation, per
    agent and rating, followed by compliance.

    Any ``scale < 1`` is recorded as a deviation when the recommendation is
    non-zero. Positive entries mean the deviation pays.
    """
    mode = "average" if delta >= 1 else "discounted"
    vt = value_functions(protocol, t, m, delta, eps, mode)
    ben, cost = stage_terms(protocol, t, m)
    disc = 1.0 if mode == "average" else delta
    gains = np.zeros((t.n, protocol.K))
    for i in range(t.n):
        if cost[i] == 0.0 or scale >= 1.0:
            continue  # the deviation is indistinguishable from compliance
        V = vt.values[i]
        P_ok = signal_matrix(protocol, i, eps, complied=True)
        P_dev = signal_matrix(protocol, i, eps, complied=False)
        comply = ben[i] - cost[i] + disc * P_ok @ V
        deviate = ben[i] - scale * cost[i] + disc * P_dev @ V
        gains[i] = deviate - comply
    return gains


def ppe_one_shot_check(protocol: RatingProtocol, t: Topology, m: UtilityModel, delta: float,
                       eps: float) -> np.ndarray:
    """Best one-shot deviation gain per agent and rating (deviation to zero
    sharing). The protocol is an equilibrium when every entry is at most
    ``GAIN_TOL``. At ``delta = 1`` the comparison uses bias values."""
    return deviation_gains(protocol, t, m, delta, eps, scale=0.0)


def is_ppe(protocol: RatingProtocol, t: Topology, m: UtilityModel, delta: float, eps: float) -> bool:
    return bool(np.all(ppe_one_shot_check(protocol, t, m, delta, eps) <= GAIN_TOL))


def binary_gap(protocol: RatingProtocol, t: Topology, m: UtilityModel, delta: float,
               eps: float) -> np.ndarray:
    """Closed-form top-rating deviation gain of a binary protocol.

    With Δ the value difference between the two ratings, a deviation at the
    top saves the sharing cost and shifts the chance of demotion by
    ``(1 - 2 eps) * alpha``, so the gain is ``cost - delta (1 - 2 eps) alpha Δ``.
    """
    if protocol.K != 2:
        raise ValueError("binary protocol expected")
    ben, cost = stage_terms(protocol, t, m)
    a, b = protocol.alpha[:, 1], protocol.beta[:, 0]
    b_gap = ben[:, 1] - ben[:, 0]
    denom = 1.0 - delta + delta * (eps * a + (1.0 - eps) * b)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap_value = np.where(denom > 0, b_gap / denom, 0.0)
    return np.where(cost > 0, cost - delta * (1.0 - 2.0 * eps) * a * gap_value, 0.0)
