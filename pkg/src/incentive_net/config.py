"""Scenario configuration: a JSON document validated into plain dataclasses."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .topology import TOPOLOGY_KINDS, Topology, TopologyError, gen_topology
from .utility import UtilityModel


class ConfigError(ValueError):
    pass


DCRS_DEFAULTS = {"w": 6.0, "tol": 1e-6, "max_iter": 500_000, "prox": 3.0}


def _num(doc: dict, key: str, default, lo=None, hi=None, lo_open=False, hi_open=False, kind=float):
    v = doc.get(key, default)
    try:
        v = kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"{key}={v} below allowed range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(f"{key}={v} above allowed range")
    return v


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    topology: dict
    r2: float
    delta: float
    epsilon: float
    dcrs: dict
    simulate: dict = field(default_factory=dict)
    compare_tft: dict = field(default_factory=dict)
    star_sweep: dict = field(default_factory=dict)
    scalefree: dict = field(default_factory=dict)
    growth: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def model(self) -> UtilityModel:
        return UtilityModel(r2=self.r2)

    def build_topology(self) -> Topology:
        spec = self.topology
        try:
            if "edge_list" in spec:
                return Topology.read(self.base_dir / spec["edge_list"])
            return gen_topology(spec["kind"], int(spec["n"]), spec.get("params", {}),
                                int(spec.get("seed", self.seed)))
        except TopologyError as exc:
            raise ConfigError(f"topology: {exc}") from exc


def parse_config(doc: dict, base_dir: Path = Path(".")) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    topo = doc.get("topology", {"kind": "ring", "n": 4})
    if not isinstance(topo, dict):
        raise ConfigError("topology must be an object")
    if "edge_list" in topo:
        if not (base_dir / topo["edge_list"]).is_file():
            raise ConfigError(f"topology.edge_list: file {topo['edge_list']!r} not found")
    else:
        if topo.get("kind") not in TOPOLOGY_KINDS:
            raise ConfigError(f"topology.kind must be one of {TOPOLOGY_KINDS}")
        _num(topo, "n", 4, lo=1, kind=int)
    util = doc.get("utility", {})
    if util.get("benefit", "estimation") != "estimation":
        raise ConfigError("utility.benefit: only 'estimation' can be configured")
    r2 = _num(util, "r2", 4.0, lo=0, lo_open=True)
    delta = _num(doc, "delta", 1.0, lo=0, hi=1, lo_open=True)
    eps = _num(doc, "epsilon", 0.0, lo=0, hi=1, hi_open=True)
    d = dict(DCRS_DEFAULTS)
    d.update(doc.get("dcrs", {}))
    _num(d, "w", 1, lo=0, lo_open=True)
    _num(d, "tol", 1, lo=0, lo_open=True)
    _num(d, "prox", 1, lo=0, lo_open=True)
    _num(d, "max_iter", 1, lo=1, kind=int)
    unknown = set(d) - set(DCRS_DEFAULTS)
    if unknown:
        raise ConfigError(f"dcrs: unknown keys {sorted(unknown)}")
    sim = doc.get("simulate", {})
    if sim:
        _num(sim, "horizon", 1, lo=1, kind=int)
        _num(sim, "burn_in", 0.1, lo=0, hi=1, hi_open=True)
        if sim.get("behavior", "compliant") not in ("compliant", "always_zero", "best_response"):
            raise ConfigError("simulate.behavior must be compliant, always_zero or best_response")
        if sim.get("protocol", "binary") not in ("binary", "appendix"):
            raise ConfigError("simulate.protocol must be binary or appendix")
    growth = doc.get("growth", {})
    for key in ("join_prob", "link_prob"):
        if key in growth:
            _num(growth, key, 0, lo=0, hi=1)
    for rho in growth.get("rhos", []):
        if not 0 <= float(rho) <= 1:
            raise ConfigError("growth.rhos entries must lie in [0, 1]")
    for dd in doc.get("star_sweep", {}).get("deltas", []) + doc.get("compare_tft", {}).get("deltas", []):
        if not 0 < float(dd) <= 1:
            raise ConfigError("sweep deltas must lie in (0, 1]")
    for e in doc.get("scalefree", {}).get("epsilons", []):
        if not 0 <= float(e) < 1:
            raise ConfigError("scalefree.epsilons entries must lie in [0, 1)")
    return ScenarioConfig(
        scenario=str(doc.get("scenario", "scenario")),
        seed=_num(doc, "seed", 0, lo=0, kind=int),
        topology=topo, r2=r2, delta=delta, epsilon=eps, dcrs=d,
        simulate=sim, compare_tft=doc.get("compare_tft", {}),
        star_sweep=doc.get("star_sweep", {}), scalefree=doc.get("scalefree", {}),
        growth=growth, base_dir=base_dir,
    )


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc, p.parent)
