"""Result export: delimited files, a JSON summary, and rendered figures.

All CSVs use a 1-based period column ``t``, UTF-8, dot decimals, and
``repr`` float formatting so that identical runs produce byte-identical
files and re-parsing loses no precision.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .coordinator import StrategyResult, Study
from .demand import UserPlan
from .microgrid import Schedule

__all__ = [
    "write_schedule_csv",
    "read_schedule_csv",
    "write_plan_csv",
    "write_prices_csv",
    "write_convergence_csv",
    "write_summary_json",
    "write_sequences",
    "render_figures",
]


def _fmt(x) -> str:
    return repr(float(x))


def write_schedule_csv(path, schedule: Schedule, rt_prices, el_expected) -> None:
    """One row per period: commitments, powers, reserves, SOC, shed, price."""
    T, M = schedule.horizon, schedule.n_units
    header = ["t"]
    for n in range(1, M + 1):
        header += [f"on_{n}", f"start_{n}", f"p_mt_{n}_kw", f"r_mt_{n}_kw"]
    header += ["p_ch_kw", "p_dc_kw", "p_res_kw", "p_ls_kw",
               "soc_start_kwh", "soc_end_kwh", "price_per_kwh", "el_kw"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(T):
            row = [t + 1]
            for n in range(M):
                row += [int(schedule.on[t, n]), int(schedule.start[t, n]),
                        _fmt(schedule.p_mt[t, n]), _fmt(schedule.r_mt[t, n])]
            row += [_fmt(schedule.p_ch[t]), _fmt(schedule.p_dc[t]),
                    _fmt(schedule.p_res[t]), _fmt(schedule.p_ls[t]),
                    _fmt(schedule.soc[t]), _fmt(schedule.soc[t + 1]),
                    _fmt(rt_prices[t]), _fmt(el_expected[t])]
            writer.writerow(row)


def read_schedule_csv(path) -> tuple[Schedule, np.ndarray, np.ndarray]:
    """Re-parse a schedule CSV into (schedule, rt_prices, el_expected)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty schedule file")
    m = 0
    while f"on_{m + 1}" in rows[0]:
        m += 1
    T = len(rows)
    on = np.zeros((T, m), dtype=np.int8)
    start = np.zeros((T, m), dtype=np.int8)
    p_mt = np.zeros((T, m))
    r_mt = np.zeros((T, m))
    p_ch = np.zeros(T)
    p_dc = np.zeros(T)
    p_res = np.zeros(T)
    p_ls = np.zeros(T)
    soc = np.zeros(T + 1)
    prices = np.zeros(T)
    el = np.zeros(T)
    for t, row in enumerate(rows):
        for n in range(m):
            on[t, n] = int(row[f"on_{n + 1}"])
            start[t, n] = int(row[f"start_{n + 1}"])
            p_mt[t, n] = float(row[f"p_mt_{n + 1}_kw"])
            r_mt[t, n] = float(row[f"r_mt_{n + 1}_kw"])
        p_ch[t] = float(row["p_ch_kw"])
        p_dc[t] = float(row["p_dc_kw"])
        p_res[t] = float(row["p_res_kw"])
        p_ls[t] = float(row["p_ls_kw"])
        if t == 0:
            soc[0] = float(row["soc_start_kwh"])
        soc[t + 1] = float(row["soc_end_kwh"])
        prices[t] = float(row["price_per_kwh"])
        el[t] = float(row["el_kw"])
    schedule = Schedule(on=on, start=start, p_mt=p_mt, r_mt=r_mt, p_ch=p_ch,
                        p_dc=p_dc, p_res=p_res, p_ls=p_ls, soc=soc)
    return schedule, prices, el


def write_plan_csv(path, plan: UserPlan, rt_prices) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "p_un_kw", "p_cn_kw", "p_move_kw", "price_per_kwh"])
        for t in range(plan.p_cn.size):
            writer.writerow([t + 1, _fmt(plan.p_un[t]), _fmt(plan.p_cn[t]),
                             _fmt(plan.p_move[t]), _fmt(rt_prices[t])])


def write_prices_csv(path, tou, rt_tracks: list[np.ndarray]) -> None:
    """Time-of-use column plus one real-time column per pricing iteration."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["t", "tou_per_kwh"] + [f"rt_iter_{i + 1}_per_kwh"
                                         for i in range(len(rt_tracks))]
        writer.writerow(header)
        for t in range(len(tou)):
            row = [t + 1, _fmt(tou[t])] + [_fmt(track[t]) for track in rt_tracks]
            writer.writerow(row)


def write_convergence_csv(path, result: StrategyResult) -> None:
    """Best cost and repairable fraction per heuristic iteration."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pricing_iter", "iteration", "best_f1", "feasible_fraction"])
        for record in result.records:
            best = record.upper.best_trace
            feas = record.upper.feasible_trace
            for i in range(best.size):
                writer.writerow([record.iteration, i + 1, _fmt(best[i]), _fmt(feas[i])])


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sequences(directory, study: Study) -> list[str]:
    """Dump each period's net-demand sequence for plotting and inspection."""
    from .sequences import write_sequence_csv

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, seq in enumerate(study.el_seqs):
        p = directory / f"el_t{t + 1:02d}.csv"
        write_sequence_csv(p, seq)
        paths.append(str(p))
    return paths


# -- figures -----------------------------------------------------------------

def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=144)
    plt.close(fig)
    return str(path)


def fig_profiles(path, study: Study) -> str:
    """Expected load, renewables and net demand over the day."""
    t = np.arange(1, study.horizon + 1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(t, study.load_mean, label="load", color="tab:red", marker="o", ms=3)
    ax.plot(t, study.pv_mean, label="pv", color="tab:orange", marker="s", ms=3)
    ax.plot(t, study.wt_mean, label="wind", color="tab:green", marker="^", ms=3)
    ax.plot(t, study.el_base, label="net demand", color="tab:blue", lw=2)
    ax.set_xlabel("period")
    ax.set_ylabel("expected power (kW)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def fig_prices(path, result: StrategyResult) -> str:
    """Time-of-use tariff against the first and the selected price tracks."""
    chosen = result.chosen
    tou = chosen.prices.tou
    t = np.arange(1, tou.size + 1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.step(t, tou, where="mid", label="time-of-use", color="0.4", ls="--")
    if len(result.records) > 1:
        ax.step(t, result.records[1].prices.rt, where="mid",
                label="real-time (iteration 2)", color="tab:orange", alpha=0.8)
    ax.step(t, chosen.prices.rt, where="mid",
            label=f"real-time (selected, iteration {chosen.iteration})",
            color="tab:blue", lw=2)
    ax.set_xlabel("period")
    ax.set_ylabel("price ($/kWh)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def fig_convergence(path, result: StrategyResult) -> str:
    """Best cost trace of the selected pricing iteration's search."""
    chosen = result.chosen
    trace = chosen.upper.best_trace
    fig, ax = plt.subplots(figsize=(8, 4.5))
    finite = np.isfinite(trace)
    ax.plot(np.arange(1, trace.size + 1)[finite], trace[finite], color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best net cost ($)")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def fig_plan(path, result: StrategyResult, study: Study) -> str:
    """Net demand before and after the demand-response shift."""
    chosen = result.chosen
    el = study.el_base
    t = np.arange(1, el.size + 1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(t, el, label="before shift", color="0.4", ls="--", marker="o", ms=3)
    ax.plot(t, el + chosen.plan.p_move, label="after shift",
            color="tab:blue", lw=2, marker="o", ms=3)
    ax.bar(t, chosen.plan.p_move, color="tab:green", alpha=0.4, label="moved load")
    ax.set_xlabel("period")
    ax.set_ylabel("power (kW)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def render_figures(out_dir, result: StrategyResult, study: Study) -> list[str]:
    """Render the figure set appropriate for one strategy result."""
    out = Path(out_dir)
    paths = [fig_profiles(out / "profiles.png", study)]
    if result.mode != "user_only":
        paths.append(fig_prices(out / "prices.png", result))
        paths.append(fig_convergence(out / "convergence.png", result))
    if result.mode != "mg_only":
        paths.append(fig_plan(out / "plan.png", result, study))
    return paths
