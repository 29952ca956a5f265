"""Distributed design of the top-rating recommended strategy.

Agents run synchronous rounds. In each round every agent reads its own and
its neighbours' multipliers, chooses how much sharing it asks each neighbour
for (its inbound vector) and publishes it. Once every agent knows what it is
asked to send, it moves its multiplier along the violation of its incentive
constraint ``outbound <= delta * benefit(inbound)``.

The round subproblem used by :func:`run_dcrs` adds a proximal penalty
``(prox/2) * ||x - x_prev||^2`` to the per-agent Lagrangian. With linear
prices the plain subproblem is piecewise linear in each link, so its
maximiser jumps between price tiers and the multipliers never settle; the
penalty makes the round map continuous while leaving the fixed points, and
thus the converged design, unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .topology import Topology
from .utility import ModelError, UtilityModel, benefits, inbound_sums, outbound_sums

FEASIBILITY_TOL = 1e-6
REPAIR_LIMIT = 1e-4


class DcrsConvergenceError(RuntimeError):
    """Raised when the multipliers fail to settle; carries the partial state."""

    def __init__(self, message: str, state: "DcrsState"):
        super().__init__(message)
        self.state = state


@dataclass
class StrategyTable:
    """Recommended sharing per arc and per rating level.

    ``values[k, e]`` is what the sender of arc ``e`` should share with the
    receiver when the receiver holds rating ``k + 1``.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("recommended sharing must lie in [0, 1]")
        if np.any(np.diff(v, axis=0) < -1e-15):
            raise ValueError("recommended sharing must be non-decreasing in the rating")
        self.values = v

    @property
    def levels(self) -> int:
        return self.values.shape[0]

    @property
    def top(self) -> np.ndarray:
        return self.values[-1]

    def at(self, rating: int) -> np.ndarray:
        return self.values[rating - 1]


@dataclass
class DcrsState:
    lam: np.ndarray
    iterations: int
    w: float
    tol: float
    prox: float
    converged: bool
    lam_trace: np.ndarray = field(repr=False)
    sigma_trace: np.ndarray = field(repr=False)
    repaired_agents: list[int] = field(default_factory=list)

    @property
    def trace_length(self) -> int:
        return self.lam_trace.shape[0]


@dataclass
class DcrsResult:
    sigma: np.ndarray
    state: DcrsState
    V_star: float

    @property
    def table(self) -> StrategyTable:
        return StrategyTable(self.sigma[None, :])


# ---------------------------------------------------------------- subproblem

def solve_subproblem(i: int, lam_i: float, neighbor_lams, m: UtilityModel, delta: float) -> np.ndarray:
    """Inbound vector maximising ``(1 + lam_i*delta) b(s) - sum_j (1 + lam_j) x_j``.

    Sharing is bought from the cheapest neighbours first (price ``1 + lam_j``)
    until the weighted marginal benefit drops to the next price. Neighbours
    with equal prices split their tier's amount evenly.
    """
    lams = np.asarray(neighbor_lams, dtype=np.float64).reshape(-1)
    if lam_i < 0 or np.any(lams < 0):
        raise ValueError("multipliers must be non-negative")
    if not m.is_sum_form:
        raise ModelError("the distributed design supports the sum-form benefit only")
    out = np.zeros(lams.size)
    if lams.size == 0:
        return out
    weight = (1.0 + lam_i * delta) * m.r2_of(i)
    prices = 1.0 + lams
    total = 0.0
    for p in np.unique(prices):
        target = math.sqrt(weight / p) - 1.0
        if target <= total:
            break
        tier = np.flatnonzero(prices == p)
        amount = min(target - total, float(tier.size))
        out[tier] = amount / tier.size
        total += amount
        if amount < tier.size:
            break
    return out


def update_multiplier(lam: float, out_sum: float, benefit_value: float, w: float, delta: float) -> float:
    """Projected subgradient step on one agent's multiplier."""
    if w <= 0:
        raise ValueError("step size must be positive")
    return max(0.0, lam + w * (out_sum - delta * benefit_value))


def check_incentive_feasibility(sigma, t: Topology, m: UtilityModel, delta: float) -> np.ndarray:
    """Per-agent slack ``delta * b(inbound) - outbound`` of a top-rating strategy."""
    a = sigma.top if isinstance(sigma, StrategyTable) else np.asarray(sigma, dtype=np.float64)
    return delta * benefits(m, t, a) - outbound_sums(t, a)


def dual_value(t: Topology, m: UtilityModel, lam, delta: float) -> float:
    """Dual function: sum over agents of the maximised local Lagrangian."""
    lam = np.asarray(lam, dtype=np.float64)
    total = 0.0
    for i in range(t.n):
        arcs = t.inbound_arcs(i)
        senders = t.src[arcs]
        x = solve_subproblem(i, lam[i], lam[senders], m, delta)
        b = float(m.benefit_of_sum(x.sum(), m.r2_of(i)))
        total += (1.0 + lam[i] * delta) * b - float(np.dot(1.0 + lam[senders], x))
    return total


# ---------------------------------------------------------------- kernel

@njit(cache=True)
def _clipped_sum(g, prices, z, prox):
    s = 0.0
    slope = 0.0
    for k in range(prices.shape[0]):
        v = z[k] + (g - prices[k]) / prox
        if v <= 0.0:
            continue
        if v >= 1.0:
            s += 1.0
        else:
            s += v
            slope += 1.0 / prox
    return s, slope


@njit(cache=True)
def _prox_local(weight, prices, z, prox, out, g_start):
    """Maximise ``weight * (1 - 1/(1+s)) - p.x - prox/2 |x - z|^2`` on the box.

    ``weight`` already includes r2. For a trial marginal benefit ``g`` every
    link sits at ``clip(z + (g - p)/prox)``; ``g`` solves
    ``1 + s(g) = sqrt(weight / g)``, an increasing function of ``g``. Newton
    steps are kept inside a shrinking bracket and fall back to bisection.
    ``g_start`` (last round's marginal) seeds the search. Returns ``(s, g)``.
    """
    m = prices.shape[0]
    if m == 0:
        return 0.0, 0.0
    lo = 0.0
    hi = weight
    g = g_start if 0.0 < g_start < weight else 0.5 * weight
    for _ in range(100):
        s, slope = _clipped_sum(g, prices, z, prox)
        root = math.sqrt(weight / g)
        f = 1.0 + s - root
        if abs(f) <= 1e-14 * root:
            break
        if f > 0.0:
            hi = g
        else:
            lo = g
        if hi - lo <= 1e-15 * (1.0 + hi):
            break
        fp = slope + 0.5 * root / g
        step = g - f / fp
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - g) <= 1e-15 * (1.0 + g):
            g = step
            break
        g = step
    if weight <= 0.0:
        g = 0.0
    s = 0.0
    for k in range(m):
        v = z[k] + (g - prices[k]) / prox
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[k] = v
        s += v
    return s, g


@njit(cache=True)
def _rounds(ptr, senders, r2, delta, w, prox, tol, n_rounds, x, lam, lam_trace, x_trace, record):
    """Run up to ``n_rounds`` synchronous rounds in place.

    ``x`` is indexed in inbound order (receiver-major). Returns the number
    of rounds executed and whether the stopping rule fired.
    """
    n = lam.shape[0]
    e = x.shape[0]
    xn = np.empty(e)
    sin = np.zeros(n)
    sout = np.zeros(n)
    prices = np.empty(e)
    marg = np.zeros(n)
    for q in range(n_rounds):
        for k in range(e):
            prices[k] = 1.0 + lam[senders[k]]
        for i in range(n):
            a = ptr[i]
            b = ptr[i + 1]
            _, marg[i] = _prox_local((1.0 + lam[i] * delta) * r2[i], prices[a:b], x[a:b], prox,
                                     xn[a:b], marg[i])
        dx = 0.0
        for k in range(e):
            d = abs(xn[k] - x[k])
            if d > dx:
                dx = d
            x[k] = xn[k]
        for i in range(n):
            sin[i] = 0.0
            sout[i] = 0.0
        for i in range(n):
            for k in range(ptr[i], ptr[i + 1]):
                sin[i] += x[k]
                sout[senders[k]] += x[k]
        dl = 0.0
        for i in range(n):
            h = sout[i] - delta * (r2[i] - r2[i] / (1.0 + sin[i]))
            nl = lam[i] + w[i] * h
            if nl < 0.0:
                nl = 0.0
            d = abs(nl - lam[i])
            if d > dl:
                dl = d
            lam[i] = nl
        if record:
            for i in range(n):
                lam_trace[q, i] = lam[i]
            for k in range(e):
                x_trace[q, k] = x[k]
        if dl < tol and dx < tol:
            return q + 1, True
    return n_rounds, False


# ---------------------------------------------------------------- driver

def _repair(t: Topology, m: UtilityModel, delta: float, sigma: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Scale down the outbound sharing of agents whose constraint is violated.

    Shrinking one agent's outbound lowers its neighbours' benefit, which can
    tip a neighbour into violation, so sweeps repeat until all are feasible.
    """
    sigma = sigma.copy()
    touched: set[int] = set()
    for _ in range(10_000):
        out = outbound_sums(t, sigma)
        allowed = delta * benefits(m, t, sigma)
        bad = np.flatnonzero(out > allowed)
        if bad.size == 0:
            break
        for i in bad:
            arcs = t.outbound_arcs(int(i))
            sigma[arcs] *= allowed[i] / out[i]
            touched.add(int(i))
    return sigma, sorted(touched)


def run_dcrs(t: Topology, m: UtilityModel, delta: float, w: float = 6.0, tol: float = 1e-6,
             max_iter: int = 500_000, prox: float = 3.0, record_trace: bool = True,
             warm_lam=None, warm_sigma=None, chunk: int = 4096,
             degree_scaled: bool = True) -> DcrsResult:
    """Compute the top-rating strategy that maximises welfare subject to every
    agent's incentive constraint.

    ``warm_lam`` / ``warm_sigma`` (per agent / per arc) seed the iteration.
    Raises :class:`DcrsConvergenceError` when ``max_iter`` rounds pass without
    the multipliers and the strategy settling within ``tol``, or when the
    settled strategy violates a constraint by more than the repair limit.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if w <= 0 or tol <= 0 or prox <= 0:
        raise ValueError("step size, tolerance and proximal weight must be positive")
    if not m.is_sum_form:
        raise ModelError("the distributed design supports the sum-form benefit only")
    n, e = t.n, t.n_arcs
    ptr, order = t.inbound_csr
    senders = t.src[order]
    r2 = m.r2_vector(n)
    steps_w = np.full(n, float(w))
    if degree_scaled:
        steps_w /= np.maximum(1, t.degrees)
    lam = np.zeros(n) if warm_lam is None else np.array(warm_lam, dtype=np.float64)
    x = np.zeros(e) if warm_sigma is None else np.array(warm_sigma, dtype=np.float64)[order]
    lam_chunks, x_chunks = [], []
    done, converged = 0, e == 0
    if delta * r2.max(initial=0.0) <= 1.0:
        # delta*b(s) < s for every s > 0, so only zero sharing is feasible and
        # the multipliers would grow without bound
        x[:] = 0.0
        converged = True
    while not converged and done < max_iter:
        steps = min(chunk, max_iter - done)
        lt = np.empty((steps if record_trace else 0, n))
        xt = np.empty((steps if record_trace else 0, e))
        ran, converged = _rounds(ptr, senders, r2, float(delta), steps_w, float(prox), float(tol),
                                 steps, x, lam, lt, xt, record_trace)
        done += ran
        if record_trace:
            lam_chunks.append(lt[:ran])
            # traces are kept in arc order like every other per-arc array
            back = np.empty_like(xt[:ran])
            back[:, order] = xt[:ran]
            x_chunks.append(back)
    sigma = np.empty(e)
    sigma[order] = x
    state = DcrsState(
        lam=lam, iterations=done, w=w, tol=tol, prox=prox, converged=converged,
        lam_trace=np.concatenate(lam_chunks) if lam_chunks else np.zeros((0, n)),
        sigma_trace=np.concatenate(x_chunks) if x_chunks else np.zeros((0, e)),
    )
    if not converged:
        raise DcrsConvergenceError(f"multipliers did not settle within {max_iter} rounds", state)
    slack = check_incentive_feasibility(sigma, t, m, delta)
    if slack.size and slack.min() < -REPAIR_LIMIT:
        raise DcrsConvergenceError(
            f"settled strategy violates a constraint by {-slack.min():.3g}", state)
    sigma, state.repaired_agents = _repair(t, m, delta, np.clip(sigma, 0.0, 1.0))
    v_star = float(benefits(m, t, sigma).sum() - sigma.sum())
    return DcrsResult(sigma=sigma, state=state, V_star=v_star)


def trace_rows(t: Topology, m: UtilityModel, delta: float, state: DcrsState, every: int = 1):
    """Rows ``(iteration, agent, lambda, constraint_slack)`` of a recorded run."""
    rows = []
    for q in range(0, state.trace_length, every):
        slack = check_incentive_feasibility(state.sigma_trace[q], t, m, delta)
        for i in range(t.n):
            rows.append((q + 1, i, float(state.lam_trace[q, i]), float(slack[i])))
    return rows
