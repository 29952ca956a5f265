"""Command-line front end: ``incentive-net <command> --config <path>``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import scenarios
from .config import ConfigError, load_config
from .dcrs import DcrsConvergenceError
from .protocol import InfeasibleDesignError

COMMANDS = ("design", "benchmark", "simulate", "compare-tft", "growth-sweep", "star-sweep",
            "scalefree-table")

EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_INFEASIBLE = 4


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def resolve_workers(cli_value: int | None) -> int:
    env = os.environ.get("INCENTIVE_NET_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"INCENTIVE_NET_WORKERS must be an integer, got {env!r}")
    return max(1, cli_value or 1)


def run_scenario(config_path, command: str, out_dir, seed: int | None = None,
                 workers: int = 1, timing: bool = False) -> list[Path]:
    """Run one command and return the files it wrote."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    written: list[Path] = []

    def emit_json(name, doc):
        write_json(out / name, doc)
        written.append(out / name)

    def emit_csv(name, header, rows):
        write_csv(out / name, header, rows)
        written.append(out / name)

    if command == "design":
        res = scenarios.design(cfg)
        (out / "protocol.json").write_text(res["protocol"].to_json() + "\n", encoding="utf-8")
        written.append(out / "protocol.json")
        emit_csv("dcrs_trace.csv", ["iteration", "agent", "lambda", "constraint_slack"], res["trace"])
        emit_json("metrics.json", res["metrics"])
        m = res["metrics"]
        emit_csv("metrics.csv", ["scenario", "V_opt", "V_star", "poa"],
                 [(m["scenario"], m["V_opt"], m["V_star"], m["poa"])])
    elif command == "benchmark":
        res = scenarios.benchmark(cfg)
        emit_json("metrics.json", res)
        emit_csv("metrics.csv", ["scenario", "V_opt"], [(res["scenario"], res["V_opt"])])
    elif command == "simulate":
        res = scenarios.simulate_scenario(cfg, cfg.seed)
        emit_json("metrics.json", res["metrics"])
        emit_csv("occupancy.csv", ["agent", "rating", "fraction"], res["occupancy"])
        if res["trace"] is not None:
            emit_csv("trace.csv", ["period", "agent", "rating", "action_sum", "utility"], res["trace"])
    elif command == "compare-tft":
        rows = scenarios.compare_tft(cfg, workers)
        emit_csv("compare_tft.csv", ["delta", "poa_rating", "poa_tft", "a_tft", "a_rating"], rows)
    elif command == "star-sweep":
        rows = scenarios.star_sweep(cfg, workers)
        emit_csv("star_sweep.csv", ["delta", "size", "V_opt", "V_star", "poa"], rows)
    elif command == "scalefree-table":
        rows = scenarios.scalefree_table(cfg, workers)
        emit_csv("scalefree_table.csv", ["exponent", "epsilon", "V_opt", "V_star", "V_sim", "poa"], rows)
    elif command == "growth-sweep":
        res = scenarios.growth_sweep(cfg, workers)
        emit_csv("growth_sweep.csv",
                 ["rho", "mean_gap", "mean_welfare", "stderr", "mean_opt", "poa", "refresh_rate",
                  "expected_gap"],
                 [(r.rho, r.mean_gap, r.mean_welfare, r.stderr, r.mean_opt, r.poa, r.refresh_rate,
                   r.expected_gap) for r in res.rows])
        emit_json("growth_summary.json", {"scenario": cfg.scenario, "rho_star": res.rho_star,
                                          "delta_v": res.delta_v})
    if timing:
        # kept apart from the results so those stay byte-identical across runs
        emit_json("timing.json", {"scenario": cfg.scenario, "command": command,
                                  "runtime": time.perf_counter() - started})
    return written


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="incentive-net",
                                description="Design and simulate rating protocols for information sharing.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
    p.add_argument("--timing", action="store_true", help="also write timing.json")
    return p


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = resolve_workers(args.workers)
        run_scenario(args.config, args.command, args.out, args.seed, workers, args.timing)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except DcrsConvergenceError as exc:
        return _fail(EXIT_CONVERGENCE, "non_convergence", str(exc))
    except InfeasibleDesignError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible_design", str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "invalid_input", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
