"""Population heuristic for the upper-level commitment problem.

Candidates are flat real gene vectors covering, per period: one relaxed
commitment value per unit (decoded on/off at 0.5), unit output and reserve
offers, and storage charge/discharge/reserve levels.  Every update moves a
candidate toward the population's best member and away from its worst,

    x' = x + r1 * (best - |x|) - r2 * (worst - |x|),

with fresh uniform r1, r2 per gene, clamps to the gene boxes, and keeps the
update only when the repaired candidate prices out strictly cheaper (greedy
acceptance).

Constraint handling is repair plus penalty: candidates whose power balance
cannot be restored price at infinity; a reserve shortfall (which only a
different commitment could fix) adds a steep per-kW penalty so the search
is pulled toward commitments with enough headroom.  The returned schedule
is always the cheapest fully feasible candidate seen across the whole run.

Commitment landscapes trap a single population easily, so long runs restart
twice at fixed budget fractions: the population is redrawn uniformly with
the incumbent best carried over in slot zero.  Restarts spend the same
per-iteration evaluation budget as an update step.

The initial population evaluation counts as iteration 1, so a run with
population ``p`` and ``m`` iterations performs exactly ``p * m`` candidate
evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .microgrid import (DispatchContext, Schedule, _repair_full,
                        _schedule_from_arrays, repair_arrays)

__all__ = [
    "JayaParams",
    "Candidate",
    "GeneLayout",
    "UpperResult",
    "NoFeasibleCandidateError",
    "jaya_update",
    "solve_upper",
]


class NoFeasibleCandidateError(RuntimeError):
    """Every candidate in every iteration was unrepairable."""


# $/kW on unmet reserve: steep enough to dominate any operating-cost gain.
RESERVE_SHORTFALL_PENALTY = 1000.0

_FEAS_TOL = 1e-7

# Population restarts at these budget fractions (runs of at least 9 steps).
_RESTART_POINTS = (1 / 3, 2 / 3)


@dataclass(frozen=True)
class JayaParams:
    population: int = 100
    max_iters: int = 1500
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class Candidate:
    """One population member: gene vector plus its repaired-schedule cost."""

    genes: np.ndarray
    fitness: float


class GeneLayout:
    """Mapping between flat gene vectors and schedule variable blocks."""

    def __init__(self, ctx: DispatchContext):
        self.T = ctx.horizon
        self.M = len(ctx.units)
        tm = self.T * self.M
        self._tm = tm
        self.size = 3 * tm + 3 * self.T
        p_max = ctx.p_max
        ess = ctx.ess
        self.lower = np.zeros(self.size)
        hi = np.empty(self.size)
        hi[0:tm] = 1.0                                   # commitment, relaxed
        hi[tm:2 * tm] = np.tile(p_max, self.T)           # unit output
        hi[2 * tm:3 * tm] = np.tile(p_max, self.T)       # unit reserve
        hi[3 * tm:3 * tm + self.T] = ess.p_ch_max        # charging
        hi[3 * tm + self.T:3 * tm + 2 * self.T] = ess.p_dc_max   # discharging
        hi[3 * tm + 2 * self.T:] = ess.p_dc_max          # storage reserve
        self.upper = hi

    def decode(self, genes: np.ndarray) -> tuple[np.ndarray, ...]:
        """Split (..., size) genes into (on, p_mt, r_mt, p_ch, p_dc, p_res)."""
        lead = genes.shape[:-1]
        tm, T, M = self._tm, self.T, self.M
        on = genes[..., 0:tm].reshape(*lead, T, M) >= 0.5
        p_mt = genes[..., tm:2 * tm].reshape(*lead, T, M)
        r_mt = genes[..., 2 * tm:3 * tm].reshape(*lead, T, M)
        p_ch = genes[..., 3 * tm:3 * tm + T]
        p_dc = genes[..., 3 * tm + T:3 * tm + 2 * T]
        p_res = genes[..., 3 * tm + 2 * T:]
        return on, p_mt, r_mt, p_ch, p_dc, p_res


@dataclass
class UpperResult:
    """Best repaired schedule found plus the per-iteration convergence trace."""

    schedule: Schedule
    f1: float
    best_trace: np.ndarray      # best fitness after each iteration
    feasible_trace: np.ndarray  # repairable fraction of the population
    evaluations: int


def _evaluate(genes: np.ndarray, layout: GeneLayout, ctx: DispatchContext,
              revenue: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fitness (penalised), raw cost, and full-feasibility mask per candidate."""
    on, p_mt, r_mt, p_ch, p_dc, p_res = layout.decode(genes)
    _, bad, short, op_cost = _repair_full(on, p_mt, r_mt, p_ch, p_dc, p_res, ctx)
    cost = op_cost - revenue
    fitness = np.where(bad, np.inf, cost + RESERVE_SHORTFALL_PENALTY * short)
    feasible = ~bad & (short <= _FEAS_TOL)
    return fitness, cost, feasible


def jaya_update(x: Candidate, best: Candidate, worst: Candidate,
                rng: np.random.Generator, lower: np.ndarray, upper: np.ndarray,
                evaluate) -> Candidate:
    """One greedy move of a single candidate (the population-level solver
    applies the same rule vectorised)."""
    if x.genes.shape != best.genes.shape or x.genes.shape != worst.genes.shape:
        raise ValueError("gene dimensions differ")
    r1 = rng.random(x.genes.size)
    r2 = rng.random(x.genes.size)
    mag = np.abs(x.genes)
    moved = x.genes + r1 * (best.genes - mag) - r2 * (worst.genes - mag)
    moved = np.clip(moved, lower, upper)
    fitness = float(evaluate(moved))
    if fitness < x.fitness:
        return Candidate(genes=moved, fitness=fitness)
    return x


def solve_upper(ctx: DispatchContext, rt_prices, params: JayaParams) -> UpperResult:
    """Search the commitment space for the cheapest repairable schedule.

    Deterministic for a fixed ``params.rng_seed``.  Raises
    :class:`NoFeasibleCandidateError` when no candidate in any iteration
    could be repaired (an over-constrained scenario).
    """
    rt = np.asarray(rt_prices, dtype=float)
    if rt.size != ctx.horizon:
        raise ValueError("price horizon does not match the context")
    layout = GeneLayout(ctx)
    rng = np.random.default_rng(params.rng_seed)
    pop_n, iters = params.population, params.max_iters
    revenue = float(ctx.el_expected @ rt) * ctx.dt

    pop = rng.uniform(layout.lower, layout.upper, size=(pop_n, layout.size))
    fit, cost, feasible = _evaluate(pop, layout, ctx, revenue)
    evaluations = pop_n
    best_trace = np.empty(iters)
    feasible_trace = np.empty(iters)

    best_genes: np.ndarray | None = None
    best_cost = np.inf

    def track_feasible(genes, cost, feasible):
        nonlocal best_genes, best_cost
        if feasible.any():
            masked = np.where(feasible, cost, np.inf)
            idx = int(np.argmin(masked))
            if masked[idx] < best_cost:
                best_cost = float(masked[idx])
                best_genes = genes[idx].copy()

    track_feasible(pop, cost, feasible)
    best_trace[0] = fit.min()
    feasible_trace[0] = feasible.mean()

    restart_at = ({int(round(f * iters)) for f in _RESTART_POINTS}
                  if iters >= 9 else set())
    best_fit_global = best_trace[0]

    for it in range(1, iters):
        if it in restart_at:
            pop = rng.uniform(layout.lower, layout.upper,
                              size=(pop_n, layout.size))
            if best_genes is not None:
                pop[0] = best_genes
            fit, cost, feasible = _evaluate(pop, layout, ctx, revenue)
            evaluations += pop_n
            track_feasible(pop, cost, feasible)
        else:
            best = pop[int(np.argmin(fit))]
            worst = pop[int(np.argmax(fit))]
            r1 = rng.random((pop_n, layout.size))
            r2 = rng.random((pop_n, layout.size))
            mag = np.abs(pop)
            cand = np.clip(pop + r1 * (best - mag) - r2 * (worst - mag),
                           layout.lower, layout.upper)
            cand_fit, cand_cost, cand_feas = _evaluate(cand, layout, ctx, revenue)
            evaluations += pop_n
            track_feasible(cand, cand_cost, cand_feas)
            accept = cand_fit < fit
            pop[accept] = cand[accept]
            fit[accept] = cand_fit[accept]
            feasible[accept] = cand_feas[accept]
        best_fit_global = min(best_fit_global, fit.min())
        best_trace[it] = best_fit_global
        feasible_trace[it] = feasible.mean()

    if best_genes is None:
        raise NoFeasibleCandidateError(
            "no fully feasible candidate found; the scenario is over-constrained")
    on, p_mt, r_mt, p_ch, p_dc, p_res = layout.decode(best_genes[None])
    arrays, bad, short = repair_arrays(on, p_mt, r_mt, p_ch, p_dc, p_res, ctx)
    assert not bad[0] and short[0] <= _FEAS_TOL
    schedule = _schedule_from_arrays(arrays, 0, ctx.dt)
    return UpperResult(schedule=schedule, f1=best_cost,
                       best_trace=best_trace, feasible_trace=feasible_trace,
                       evaluations=evaluations)
