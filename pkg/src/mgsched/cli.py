"""Command line entry point.

``mgsched run`` loads a scenario, executes the requested strategy (or all
three), and writes delimited results, a JSON summary, and rendered figures
into the output directory.  A parameter sweep fans points out over worker
processes; every point is an isolated, seed-deterministic run.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report
from .coordinator import (STRATEGIES, StrategyResult, Study, prepare_study,
                          run_all, run_strategy)
from .ipm import IpmError
from .jaya import NoFeasibleCandidateError
from .scenario import ScenarioConfig, ScenarioError, bundled_scenario_path, load_scenario

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgsched",
                                     description="stochastic microgrid scheduling")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute one scheduling study")
    run.add_argument("--scenario", default="paper_base",
                     help="scenario file path or bundled scenario name")
    run.add_argument("--strategy", default="bilevel",
                     choices=[*STRATEGIES, "all"])
    run.add_argument("--gamma", type=float, default=None,
                     help="override the reserve confidence level")
    run.add_argument("--ratio", type=float, default=None,
                     help="override the shiftable-load ratio")
    run.add_argument("--step", type=float, default=None,
                     help="override the discretisation step (kW)")
    run.add_argument("--seed", type=int, default=None,
                     help="master seed (also overrides the scenario's)")
    run.add_argument("--sweep", default=None, metavar="SPEC",
                     help="parameter sweep, e.g. gamma=0.50:0.95:0.05")
    run.add_argument("--jobs", type=int, default=1,
                     help="concurrent sweep points")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--dump-seqs", action="store_true",
                     help="also dump the per-period net-demand sequences")
    run.add_argument("--no-figures", action="store_true",
                     help="skip figure rendering")
    return parser


def _fail(category: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    return 2


def _load(args) -> ScenarioConfig:
    source = Path(args.scenario)
    if not source.exists() and not str(args.scenario).endswith(".json"):
        source = bundled_scenario_path(str(args.scenario))
    config = load_scenario(source)
    return config.with_overrides(gamma=args.gamma, ratio=args.ratio,
                                 q=args.step, seed=args.seed)


def _seed_of(config: ScenarioConfig, args) -> int:
    return args.seed if args.seed is not None else config.jaya.rng_seed


def _result_block(result: StrategyResult, seconds: float, files: list[str]) -> dict:
    chosen = result.chosen
    sched = chosen.schedule
    reserve = sched.r_mt.sum(axis=1) + sched.p_res
    prices = chosen.prices.rt
    return {
        "f1": result.f1,
        "f2": result.f2,
        "f1_io": result.f1_io,
        "f2_io": result.f2_io,
        "selected_iteration": chosen.iteration,
        "pricing_iterations": len(result.records),
        "shed_energy_kwh": float(sched.p_ls.sum() * sched.dt),
        "reserve_margin_min_kw": float(reserve.min()) if reserve.size else 0.0,
        "price_range_per_kwh": [float(prices.min()), float(prices.max())],
        "seconds": seconds,
        "files": sorted(files),
    }


def _write_strategy(out: Path, result: StrategyResult, study: Study,
                    figures: bool) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    chosen = result.chosen
    files: list[str] = []
    if result.mode != "user_only":
        p = out / "schedule.csv"
        report.write_schedule_csv(p, chosen.schedule, chosen.prices.rt,
                                  chosen.el_served)
        files.append(str(p))
        p = out / "prices.csv"
        report.write_prices_csv(p, chosen.prices.tou,
                                [r.prices.rt for r in result.records])
        files.append(str(p))
        p = out / "convergence.csv"
        report.write_convergence_csv(p, result)
        files.append(str(p))
    if result.mode != "mg_only":
        p = out / "plan.csv"
        report.write_plan_csv(p, chosen.plan, chosen.prices.rt)
        files.append(str(p))
    if figures:
        files += report.render_figures(out, result, study)
    return files


def _parse_sweep(spec: str) -> tuple[str, list[float]]:
    try:
        name, rng = spec.split("=", 1)
        lo_s, hi_s, step_s = rng.split(":")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
    except ValueError:
        raise ScenarioError("--sweep", f"cannot parse sweep spec {spec!r}; "
                                       "expected name=start:stop:step") from None
    name = name.strip()
    if name not in ("gamma", "ratio"):
        raise ScenarioError("--sweep", f"unknown sweep parameter {name!r}")
    if step <= 0 or hi < lo:
        raise ScenarioError("--sweep", "sweep range must ascend with step > 0")
    n = int(round((hi - lo) / step)) + 1
    values = [round(lo + i * step, 12) for i in range(n) if lo + i * step <= hi + 1e-9]
    return name, values


def _sweep_point(payload) -> dict:
    """Executed in a worker process; must stay module-level picklable."""
    scenario_source, name, value, seed, strategy, out_dir, figures = payload
    config = load_scenario(scenario_source)
    config = config.with_overrides(**{("gamma" if name == "gamma" else "ratio"): value},
                                   seed=seed)
    t0 = time.perf_counter()
    study = prepare_study(config)
    result = run_strategy(strategy, config, seed, study=study)
    seconds = time.perf_counter() - t0
    out = Path(out_dir)
    files = _write_strategy(out, result, study, figures)
    block = _result_block(result, seconds, files)
    report.write_summary_json(out / "summary.json",
                              {"scenario": str(scenario_source), name: value,
                               "strategy": result.mode, "seed": seed,
                               "results": {result.mode: block}})
    return {"param": name, "value": value, "f1": result.f1, "f2": result.f2,
            "f1_io": result.f1_io, "f2_io": result.f2_io,
            "selected_iteration": result.chosen.iteration, "seconds": seconds}


def _run_sweep(args, config: ScenarioConfig, scenario_source: str, out: Path) -> int:
    name, values = _parse_sweep(args.sweep)
    seed = _seed_of(config, args)
    strategy = args.strategy if args.strategy != "all" else "bilevel"
    payloads = []
    for value in values:
        sub = out / f"{name}_{value:g}"
        payloads.append((scenario_source, name, value, seed, strategy,
                         str(sub), not args.no_figures))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]

    sweep_csv = out / "sweep.csv"
    with open(sweep_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("param,value,f1,f2,f1_io,f2_io,selected_iteration\n")
        for row in rows:
            fh.write(f"{row['param']},{row['value']!r},{row['f1']!r},{row['f2']!r},"
                     f"{row['f1_io']!r},{row['f2_io']!r},{row['selected_iteration']}\n")
    if not args.no_figures:
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot([r["value"] for r in rows], [r["f1"] for r in rows], marker="o")
        ax.set_xlabel(name)
        ax.set_ylabel("net cost f1 ($)")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "sweep.png", dpi=144)
        plt.close(fig)
    report.write_summary_json(out / "summary.json", {
        "scenario": scenario_source, "sweep": {"param": name, "values": values},
        "strategy": strategy, "seed": seed, "rows": rows})
    print(f"wrote {len(rows)} sweep points to {out}")
    return 0


def _cmd_run(args) -> int:
    config = _load(args)
    seed = _seed_of(config, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    scenario_source = args.scenario
    src = Path(scenario_source)
    if not src.exists() and not str(scenario_source).endswith(".json"):
        scenario_source = str(bundled_scenario_path(str(scenario_source)))

    if args.sweep:
        return _run_sweep(args, config, scenario_source, out)

    study = prepare_study(config)
    summary: dict = {"scenario": scenario_source, "strategy": args.strategy,
                     "seed": seed, "gamma": config.gamma, "ratio": config.dr.ratio,
                     "step_kw": config.q, "results": {}}

    if args.strategy == "all":
        t0 = time.perf_counter()
        results = run_all(config, seed)
        total = time.perf_counter() - t0
        for mode, result in results.items():
            files = _write_strategy(out / mode, result, study, not args.no_figures)
            summary["results"][mode] = _result_block(result, total / len(results), files)
    else:
        t0 = time.perf_counter()
        result = run_strategy(args.strategy, config, seed, study=study)
        seconds = time.perf_counter() - t0
        files = _write_strategy(out, result, study, not args.no_figures)
        summary["results"][args.strategy] = _result_block(result, seconds, files)

    if args.dump_seqs:
        summary["sequence_files"] = report.write_sequences(out / "sequences", study)

    report.write_summary_json(out / "summary.json", summary)
    print(f"wrote results to {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        raise ValueError(f"unknown command {args.command!r}")
    except ScenarioError as exc:
        return _fail("validation", str(exc))
    except NoFeasibleCandidateError as exc:
        return _fail("over_constrained", str(exc))
    except IpmError as exc:
        return _fail("solver", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
