"""Experiment recipes shared by the command line and the acceptance suite."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ScenarioConfig
from .dcrs import run_dcrs, trace_rows
from .engine import BehaviorSpec, simulate
from .growth import GrowthConfig, sweep_refresh
from .protocol import construct_appendix_protocol, design_binary_protocol
from .tft import best_symmetric_tft
from .topology import gen_topology
from .utility import UtilityModel, utilities
from .welfare import optimal_welfare, price_of_anarchy


def fan_out(fn, jobs, workers: int):
    """Map ``fn`` over ``jobs`` keeping input order."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def design(cfg: ScenarioConfig) -> dict:
    t, m = cfg.build_topology(), cfg.model()
    res = run_dcrs(t, m, cfg.delta, **cfg.dcrs)
    proto = design_binary_protocol(res.sigma, t, m, cfg.delta)
    v_opt = optimal_welfare(t, m)
    metrics = {
        "scenario": cfg.scenario,
        "V_opt": v_opt,
        "V_star": res.V_star,
        "poa": price_of_anarchy(v_opt, res.V_star),
        "iterations": res.state.iterations,
        "multipliers": res.state.lam.tolist(),
        "per_agent_utility": utilities(m, t, res.sigma).tolist(),
    }
    return {"metrics": metrics, "protocol": proto,
            "trace": trace_rows(t, m, cfg.delta, res.state)}


def benchmark(cfg: ScenarioConfig) -> dict:
    t, m = cfg.build_topology(), cfg.model()
    return {"scenario": cfg.scenario, "V_opt": optimal_welfare(t, m)}


def simulate_scenario(cfg: ScenarioConfig, seed: int) -> dict:
    t, m = cfg.build_topology(), cfg.model()
    sim_cfg = cfg.simulate
    res = run_dcrs(t, m, cfg.delta, record_trace=False, **cfg.dcrs)
    if sim_cfg.get("protocol", "binary") == "appendix":
        proto = construct_appendix_protocol(res.sigma, t, m, cfg.delta)
    else:
        proto = design_binary_protocol(res.sigma, t, m, cfg.delta)
    behavior = BehaviorSpec.uniform(t.n, sim_cfg.get("behavior", "compliant"))
    out = simulate(t, m, proto, behavior, int(sim_cfg.get("horizon", 10_000)), cfg.epsilon, seed,
                   delta=cfg.delta, burn_in=float(sim_cfg.get("burn_in", 0.1)),
                   trace=bool(sim_cfg.get("trace", False)), profiles=False)
    v_opt = optimal_welfare(t, m)
    metrics = {
        "scenario": cfg.scenario,
        "V_opt": v_opt,
        "V_star": res.V_star,
        "V_sim": out.welfare,
        "poa": price_of_anarchy(v_opt, out.welfare),
        "per_agent_utility": out.per_agent_utility.tolist(),
    }
    occ = [(i, k + 1, float(out.occupancy[i, k])) for i in range(t.n) for k in range(proto.K)]
    return {"metrics": metrics, "occupancy": occ, "trace": out.trace}


# ---------------------------------------------------------------- sweeps

def _tft_point(job):
    delta, d, n, r2, resolution, dcrs = job
    m = UtilityModel(r2)
    t = gen_topology("circulant", n, {"k": d // 2})
    v_opt = optimal_welfare(t, m)
    res = run_dcrs(t, m, delta, record_trace=False, **dcrs)
    a_tft, w_tft = best_symmetric_tft(d, m, delta, resolution)
    return (delta, price_of_anarchy(v_opt, res.V_star), price_of_anarchy(v_opt / n, w_tft),
            a_tft, float(res.sigma.mean()))


def compare_tft(cfg: ScenarioConfig, workers: int = 1) -> list[tuple]:
    """Rows ``(delta, poa_rating, poa_tft, a_tft, a_rating)`` on a d-regular ring lattice."""
    c = cfg.compare_tft
    d = int(c.get("degree", 4))
    if d % 2:
        raise ValueError("compare-tft builds ring lattices, which need an even degree")
    deltas = c.get("deltas", [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    jobs = [(float(x), d, int(c.get("n", 100)), cfg.r2, float(c.get("resolution", 1e-4)), cfg.dcrs)
            for x in deltas]
    return fan_out(_tft_point, jobs, workers)


def _star_point(job):
    delta, size, r2, dcrs = job
    m = UtilityModel(r2)
    t = gen_topology("star", size)
    v_opt = optimal_welfare(t, m)
    res = run_dcrs(t, m, delta, record_trace=False, **dcrs)
    return (delta, size, v_opt, res.V_star, price_of_anarchy(v_opt, res.V_star))


def star_sweep(cfg: ScenarioConfig, workers: int = 1) -> list[tuple]:
    """Rows ``(delta, size, V_opt, V_star, poa)`` over star sizes and discounts."""
    s = cfg.star_sweep
    sizes = s.get("sizes", list(range(2, 21)))
    deltas = s.get("deltas", [1.0, 0.9, 0.8, 0.7])
    r2 = float(s.get("r2", 8.0))
    jobs = [(float(dl), int(n), r2, cfg.dcrs) for dl in deltas for n in sizes]
    return fan_out(_star_point, jobs, workers)


def _scalefree_point(job):
    exponent, epsilons, n, m_attach, r2, delta, horizon, topo_seed, sim_seed, dcrs = job
    m = UtilityModel(r2)
    t = gen_topology("scale_free", n, {"exponent": exponent, "m": m_attach}, seed=topo_seed)
    v_opt = optimal_welfare(t, m)
    res = run_dcrs(t, m, delta, record_trace=False, **dcrs)
    proto = design_binary_protocol(res.sigma, t, m, delta)
    rows = []
    for k, eps in enumerate(epsilons):
        sim = simulate(t, m, proto, BehaviorSpec.uniform(t.n), horizon, eps, sim_seed + k,
                       profiles=False)
        rows.append((exponent, eps, v_opt, res.V_star, sim.welfare,
                     price_of_anarchy(v_opt, sim.welfare)))
    return rows


def scalefree_table(cfg: ScenarioConfig, workers: int = 1) -> list[tuple]:
    """Rows ``(exponent, epsilon, V_opt, V_star, V_sim, poa)`` with PoA measured
    on simulated compliant play under monitoring error."""
    s = cfg.scalefree
    exps = [float(x) for x in s.get("exponents", [2.5, 3.0, 3.5])]
    epsilons = [float(x) for x in s.get("epsilons", [0.0, 0.02, 0.05, 0.1])]
    jobs = [(e, epsilons, int(s.get("n", 100)), int(s.get("m", 2)), cfg.r2, cfg.delta,
             int(s.get("horizon", 10_000)), cfg.seed + k, cfg.seed + 1000 * (k + 1), cfg.dcrs)
            for k, e in enumerate(exps)]
    return [row for rows in fan_out(_scalefree_point, jobs, workers) for row in rows]


def growth_sweep(cfg: ScenarioConfig, workers: int = 1):
    g = cfg.growth
    gc = GrowthConfig(n0=int(g.get("n0", 50)), join_prob=float(g.get("join_prob", 0.1)),
                      link_prob=float(g.get("link_prob", 0.2)), horizon=int(g.get("horizon", 400)),
                      topology_seed=int(g.get("topology_seed", cfg.seed)))
    rhos = g.get("rhos", [0.005, 0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.1, 0.14])
    n_seeds = int(g.get("seeds", 50))
    seeds = range(cfg.seed, cfg.seed + n_seeds)
    return sweep_refresh(gc, cfg.model(), cfg.delta, rhos, seeds, cfg.dcrs, workers)
