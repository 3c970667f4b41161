"""Upper-level microgrid data and physics.

Holds the device types (micro-turbines, storage), the schedule container,
the operating-cost function, constraint checking, and a deterministic repair
projection that turns an arbitrary candidate into a feasible schedule (or
flags it as unrepairable).

The repair walks the horizon once.  For every period it projects the storage
action into a window that keeps the terminal state of charge reachable,
rebalances supply and demand by moving the largest committed turbine, then
the storage, then shedding load as a last resort, and finally lifts reserve
offers (storage first, it is cheaper) until the per-period reserve
requirement is met.  All steps are pure clamps, so the projection is
idempotent and leaves feasible schedules untouched.

The heavy lifting is written batch-first: a leading population axis lets the
heuristic solver repair and price thousands of candidates per second.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

__all__ = [
    "MtUnit",
    "EssConfig",
    "PriceTrack",
    "Schedule",
    "DispatchContext",
    "Violation",
    "UnrepairableError",
    "evaluate_cost",
    "soc_step",
    "ess_reserve_limit",
    "check_feasible",
    "repair",
    "repair_arrays",
    "cost_arrays",
]

_KW_TOL = 1e-6
_BALANCE_SLACK = 1e-7
# Imbalances below this are arithmetic dust; snapping them keeps the repair
# projection exactly idempotent.
_GAP_SNAP = 1e-9


class UnrepairableError(RuntimeError):
    """Even full load shedding cannot balance the candidate."""


@dataclass(frozen=True)
class MtUnit:
    """One micro-turbine: cost coefficients ($) and power limits (kW)."""

    fixed_cost: float        # $ per committed hour
    startup_cost: float      # $ per start
    fuel_slope: float        # $/kWh on delivered energy
    reserve_cost: float      # $/kWh on offered reserve
    p_min: float
    p_max: float

    def __post_init__(self) -> None:
        if not 0 <= self.p_min <= self.p_max:
            raise ValueError("power limits must satisfy 0 <= p_min <= p_max")
        for name in ("fixed_cost", "startup_cost", "fuel_slope", "reserve_cost"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class EssConfig:
    """Storage ratings, efficiencies, state-of-charge box, and tariffs.

    The reactive-power and voltage fields are parsed for completeness but
    not enforced anywhere; no network model exists to constrain them.
    """

    p_ch_max: float
    p_dc_max: float
    eta_ch: float
    eta_dc: float
    soc_min: float
    soc_max: float
    soc_init: float
    charge_price: float = 0.0     # $/kWh paid to the grid when charging
    discharge_price: float = 0.0  # $/kWh paid to the storage when discharging
    reserve_price: float = 0.0    # $/kWh on offered reserve
    q_ch_max: float | None = None
    q_dc_max: float | None = None
    v_min: float | None = None
    v_max: float | None = None

    def __post_init__(self) -> None:
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dc <= 1):
            raise ValueError("efficiencies must be in (0, 1]")
        if not self.soc_min <= self.soc_init <= self.soc_max:
            raise ValueError("soc_init must lie within [soc_min, soc_max]")
        if self.p_ch_max < 0 or self.p_dc_max < 0:
            raise ValueError("power limits must be >= 0")
        for name in ("charge_price", "discharge_price", "reserve_price"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PriceTrack:
    """Tariff context: time-of-use base, current real-time prices, reference."""

    tou: np.ndarray
    rt: np.ndarray
    ref_price: float
    ref_el: float

    def __post_init__(self) -> None:
        tou = np.atleast_1d(np.asarray(self.tou, dtype=float))
        rt = np.atleast_1d(np.asarray(self.rt, dtype=float))
        if tou.shape != rt.shape:
            raise ValueError("tou and rt horizons differ")
        if tou.min(initial=0.0) < 0 or rt.min(initial=0.0) < 0:
            raise ValueError("prices must be >= 0")
        if self.ref_price < 0:
            raise ValueError("ref_price must be >= 0")
        object.__setattr__(self, "tou", tou)
        object.__setattr__(self, "rt", rt)


@dataclass
class Schedule:
    """One upper-level decision over the horizon.

    Arrays are (T, M) for per-unit quantities and (T,) for storage, reserve
    and shedding; ``soc`` has T+1 entries with ``soc[0]`` the initial level.
    """

    on: np.ndarray
    start: np.ndarray
    p_mt: np.ndarray
    r_mt: np.ndarray
    p_ch: np.ndarray
    p_dc: np.ndarray
    p_res: np.ndarray
    p_ls: np.ndarray
    soc: np.ndarray
    dt: float = 1.0

    @property
    def horizon(self) -> int:
        return int(self.on.shape[0])

    @property
    def n_units(self) -> int:
        return int(self.on.shape[1])

    def copy(self) -> "Schedule":
        return Schedule(*(np.array(getattr(self, f)) for f in
                          ("on", "start", "p_mt", "r_mt", "p_ch", "p_dc",
                           "p_res", "p_ls", "soc")), dt=self.dt)


@dataclass(frozen=True)
class DispatchContext:
    """Scenario slice needed to repair and price schedules."""

    units: tuple[MtUnit, ...]
    ess: EssConfig
    el_expected: np.ndarray        # served net demand per period (kW)
    reserve_required: np.ndarray   # reserve quantile per period (kW)
    shed_penalty: float = 10.0
    dt: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "el_expected",
                           np.atleast_1d(np.asarray(self.el_expected, dtype=float)))
        object.__setattr__(self, "reserve_required",
                           np.atleast_1d(np.asarray(self.reserve_required, dtype=float)))
        if self.el_expected.shape != self.reserve_required.shape:
            raise ValueError("el_expected and reserve_required horizons differ")

    @property
    def horizon(self) -> int:
        return int(self.el_expected.size)

    @property
    def p_min(self) -> np.ndarray:
        return np.array([u.p_min for u in self.units])

    @property
    def p_max(self) -> np.ndarray:
        return np.array([u.p_max for u in self.units])

    def with_el(self, el_expected) -> "DispatchContext":
        return replace(self, el_expected=np.asarray(el_expected, dtype=float))


@dataclass(frozen=True)
class Violation:
    """One broken constraint: 1-based period, identifier, and how far off."""

    period: int
    constraint: str
    magnitude: float


def soc_step(soc: float, p_ch: float, p_dc: float, ess: EssConfig, dt: float = 1.0) -> float:
    """State of charge after one period of charging or discharging."""
    if p_ch > 0 and p_dc > 0:
        raise ValueError("simultaneous charge and discharge")
    if p_dc > 0:
        return soc - (p_dc * dt) / ess.eta_dc
    if p_ch > 0:
        return soc + ess.eta_ch * p_ch * dt
    return soc


def ess_reserve_limit(soc: float, p_dc: float, ess: EssConfig, dt: float = 1.0) -> float:
    """Reserve the storage can still offer: energy- and power-headroom bound."""
    return min(ess.eta_dc * (soc - ess.soc_min) / dt, ess.p_dc_max - p_dc)


def evaluate_cost(s: Schedule, prices: PriceTrack, el_expected, units, ess: EssConfig,
                  shed_penalty: float = 10.0) -> float:
    """Net operating cost of the microgrid for schedule ``s``.

    Revenue from serving the expected net demand at the real-time price is
    negative cost; storage discharge is paid for and charging is paid back;
    each committed turbine accrues its fixed, fuel, start-up and reserve
    charges; storage reserve and load shedding are priced per kWh.
    """
    el = np.asarray(el_expected, dtype=float)
    rt = prices.rt
    if el.shape != rt.shape or el.size != s.horizon or len(units) != s.n_units:
        raise ValueError("schedule, price and demand dimensions differ")
    dt = s.dt
    revenue = float(el @ rt) * dt
    ess_cost = float(np.sum(ess.discharge_price * s.p_dc - ess.charge_price * s.p_ch)) * dt
    fixed = np.array([u.fixed_cost for u in units])
    startc = np.array([u.startup_cost for u in units])
    fuel = np.array([u.fuel_slope for u in units])
    resc = np.array([u.reserve_cost for u in units])
    on = s.on.astype(float)
    mt_cost = float(np.sum(resc * s.r_mt)
                    + np.sum(startc * s.start)
                    + np.sum(on * (fixed + fuel * s.p_mt * dt)))
    reserve_cost = float(ess.reserve_price * s.p_res.sum()) * dt
    shed_cost = float(shed_penalty * s.p_ls.sum()) * dt
    return -revenue + ess_cost + mt_cost + reserve_cost + shed_cost


def check_feasible(s: Schedule, ctx: DispatchContext) -> list[Violation]:
    """Report every broken constraint; an empty list means feasible.

    Power constraints are held to 1e-6 kW; the terminal state of charge must
    return to its initial level exactly.
    """
    out: list[Violation] = []
    T, M = s.horizon, s.n_units
    ess = ctx.ess
    if ctx.horizon != T or len(ctx.units) != M:
        raise ValueError("schedule does not match the context dimensions")
    p_min, p_max = ctx.p_min, ctx.p_max

    def bad(t: int, name: str, magnitude: float) -> None:
        out.append(Violation(period=t + 1, constraint=name, magnitude=float(magnitude)))

    for t in range(T):
        supply = float(s.p_mt[t].sum() + s.p_dc[t] - s.p_ch[t] + s.p_ls[t])
        gap = supply - float(ctx.el_expected[t])
        if abs(gap) > _KW_TOL:
            bad(t, "balance", gap)

        for n in range(M):
            p = float(s.p_mt[t, n])
            if s.on[t, n]:
                if p < p_min[n] - _KW_TOL or p > p_max[n] + _KW_TOL:
                    bad(t, "mt_power", max(p_min[n] - p, p - p_max[n]))
            elif abs(p) > _KW_TOL:
                bad(t, "mt_power", abs(p))
            r = float(s.r_mt[t, n])
            if r < -_KW_TOL:
                bad(t, "mt_reserve", -r)
            cap = p_max[n] if s.on[t, n] else 0.0
            if p + r > cap + _KW_TOL:
                bad(t, "mt_reserve", p + r - cap)

        if not -_KW_TOL <= s.p_ch[t] <= ess.p_ch_max + _KW_TOL:
            bad(t, "ess_power", max(-s.p_ch[t], s.p_ch[t] - ess.p_ch_max))
        if not -_KW_TOL <= s.p_dc[t] <= ess.p_dc_max + _KW_TOL:
            bad(t, "ess_power", max(-s.p_dc[t], s.p_dc[t] - ess.p_dc_max))
        if min(s.p_ch[t], s.p_dc[t]) > _KW_TOL:
            bad(t, "ess_exclusive", min(s.p_ch[t], s.p_dc[t]))

        expected = soc_step(float(s.soc[t]), max(float(s.p_ch[t]), 0.0),
                            max(float(s.p_dc[t]), 0.0), ess, s.dt)
        if abs(float(s.soc[t + 1]) - expected) > _KW_TOL:
            bad(t, "soc_recursion", s.soc[t + 1] - expected)
        if not ess.soc_min - _KW_TOL <= s.soc[t + 1] <= ess.soc_max + _KW_TOL:
            bad(t, "soc_bounds", max(ess.soc_min - s.soc[t + 1], s.soc[t + 1] - ess.soc_max))

        res_cap = ess_reserve_limit(float(s.soc[t]), float(s.p_dc[t]), ess, s.dt)
        if s.p_res[t] < -_KW_TOL or s.p_res[t] > res_cap + _KW_TOL:
            bad(t, "ess_reserve", max(-s.p_res[t], s.p_res[t] - res_cap))

        total_reserve = float(s.r_mt[t].sum() + s.p_res[t])
        if total_reserve < ctx.reserve_required[t] - _KW_TOL:
            bad(t, "chance_reserve", ctx.reserve_required[t] - total_reserve)

        prev = s.on[t - 1] if t > 0 else np.zeros(M, dtype=s.on.dtype)
        expected_start = np.maximum(s.on[t].astype(int) - prev.astype(int), 0)
        if np.any(s.start[t].astype(int) != expected_start):
            bad(t, "start_link", float(np.abs(s.start[t] - expected_start).max()))

        shed_cap = max(float(ctx.el_expected[t]), 0.0)
        if s.p_ls[t] < -_KW_TOL or s.p_ls[t] > shed_cap + _KW_TOL:
            bad(t, "shed_range", max(-s.p_ls[t], s.p_ls[t] - shed_cap))

    if s.soc[0] != ess.soc_init:
        bad(-1, "soc_terminal", s.soc[0] - ess.soc_init)
    if s.soc[T] != ess.soc_init:
        bad(T - 1, "soc_terminal", s.soc[T] - ess.soc_init)
    return out


@njit(cache=True)
def _repair_kernel(on, p_raw, r_raw, ch_raw, dc_raw, res_raw, ls_in, el, req,
                   p_min, p_max, balance_order, reserve_order,
                   fixed_cost, startup_cost, fuel_slope, unit_res_cost,
                   ch_max, dc_max, eta_ch, eta_dc, soc_min, soc_max, soc_init,
                   charge_price, discharge_price, ess_res_price, shed_penalty,
                   dt, p, r, u, ls, res, soc, start, bad, short, op_cost):
    """Sequential projection and pricing, one candidate at a time.

    ``u`` is the signed net discharge power (positive discharging).  For each
    candidate a backward pass accumulates how much the storage could still
    recharge or discharge after every period, capped by what the balance can
    absorb given the commitment (discharging displaces generation down to the
    committed minimums, charging rides on committed headroom above demand);
    these suffix capabilities bound the state of charge so the terminal level
    always stays reachable and every forced storage action is balanceable.

    The forward pass then, per period: clamps all actions to their boxes,
    projects the storage action into the reachability window, moves committed
    units largest-capacity-first to close the balance gap, cuts incoming shed
    on surplus, lets the storage absorb the rest, sheds the final deficit
    (never more than the demand that exists), clamps reserve offers to their
    headroom and lifts them to the requirement (storage first, it is the
    cheaper provider), and accumulates the operating cost.  Mutates all
    output arrays in place.
    """
    cand_n, horizon, unit_n = on.shape
    chg_coef = eta_ch * dt
    dis_coef = dt / eta_dc
    chg_after = np.empty(horizon)
    dis_after = np.empty(horizon)
    prev_on = np.zeros(unit_n, dtype=np.bool_)
    for i in range(cand_n):
        # Backward pass: absorption-aware capability left after each period.
        dis_acc = 0.0
        chg_acc = 0.0
        for t in range(horizon - 1, -1, -1):
            dis_after[t] = dis_acc
            chg_after[t] = chg_acc
            cmin = 0.0
            cmax = 0.0
            for j in range(unit_n):
                if on[i, t, j]:
                    cmin += p_min[j]
                    cmax += p_max[j]
            elp = el[t] if el[t] > 0.0 else 0.0
            dstep = elp - cmin
            if dstep < 0.0:
                dstep = 0.0
            elif dstep > dc_max:
                dstep = dc_max
            cstep = cmax - elp
            if cstep < 0.0:
                cstep = 0.0
            elif cstep > ch_max:
                cstep = ch_max
            dis_acc += dstep * dis_coef
            chg_acc += cstep * chg_coef

        for j in range(unit_n):
            prev_on[j] = False
        cost = 0.0
        short_i = 0.0
        s = soc_init
        soc[i, 0] = s
        for t in range(horizon):
            shed_cap = el[t] if el[t] > 0.0 else 0.0

            # Box clamps: unit outputs, storage action, incoming shed.
            for j in range(unit_n):
                if on[i, t, j]:
                    v = p_raw[i, t, j]
                    if v < p_min[j]:
                        v = p_min[j]
                    elif v > p_max[j]:
                        v = p_max[j]
                else:
                    v = 0.0
                p[i, t, j] = v
            c = ch_raw[i, t]
            if c < 0.0:
                c = 0.0
            elif c > ch_max:
                c = ch_max
            d = dc_raw[i, t]
            if d < 0.0:
                d = 0.0
            elif d > dc_max:
                d = dc_max
            if c > 0.0 and d > 0.0:
                # exclusivity: the smaller flow is dropped, discharge on ties
                if d <= c:
                    d = 0.0
                else:
                    c = 0.0
            u_t = d - c
            l = ls_in[i, t]
            if l < 0.0:
                l = 0.0
            elif l > shed_cap:
                l = shed_cap

            # Reachability window on the end-of-period state of charge.
            lo_w = soc_init - chg_after[t]
            if lo_w < soc_min:
                lo_w = soc_min
            hi_w = soc_init + dis_after[t]
            if hi_w > soc_max:
                hi_w = soc_max
            lo_d = lo_w - s
            hi_d = hi_w - s
            # Bounds on u: the SOC moves by -u*dis_coef when discharging and
            # by -u*chg_coef when charging (u negative).
            if lo_d <= 0.0:
                u_hi = -lo_d * eta_dc / dt
            else:
                u_hi = -lo_d / chg_coef
            if hi_d >= 0.0:
                u_lo = -hi_d / chg_coef
            else:
                u_lo = -hi_d * eta_dc / dt
            if u_hi > dc_max:
                u_hi = dc_max
            if u_lo < -ch_max:
                u_lo = -ch_max
            if u_lo > u_hi:
                u_lo = u_hi
            if u_t < u_lo:
                u_t = u_lo
            elif u_t > u_hi:
                u_t = u_hi

            mt_sum = 0.0
            for j in range(unit_n):
                mt_sum += p[i, t, j]
            gap = el[t] - mt_sum - u_t - l
            if -_GAP_SNAP < gap < _GAP_SNAP:
                gap = 0.0

            # Committed units absorb the gap, largest capacity first.
            for k in range(unit_n):
                j = balance_order[k]
                if on[i, t, j]:
                    adj = gap
                    lo_j = p_min[j] - p[i, t, j]
                    hi_j = p_max[j] - p[i, t, j]
                    if adj < lo_j:
                        adj = lo_j
                    elif adj > hi_j:
                        adj = hi_j
                    p[i, t, j] += adj
                    gap -= adj

            # Surplus: shedding is pure waste, cut it first.
            if gap < 0.0 and l > 0.0:
                red = l if l < -gap else -gap
                l -= red
                gap += red

            # Storage absorbs the remainder within its window.
            u_n = u_t + gap
            if u_n < u_lo:
                u_n = u_lo
            elif u_n > u_hi:
                u_n = u_hi
            gap -= u_n - u_t
            if -_GAP_SNAP < gap < _GAP_SNAP:
                gap = 0.0

            # Last resort: shed the deficit.
            if gap > 0.0:
                room = shed_cap - l
                add = gap if gap < room else room
                if add > 0.0:
                    l += add
                    gap -= add
            if gap > _BALANCE_SLACK or gap < -_BALANCE_SLACK:
                bad[i] = True

            u[i, t] = u_n
            ls[i, t] = l
            d_final = u_n if u_n > 0.0 else 0.0
            c_final = -u_n if u_n < 0.0 else 0.0

            # Reserve offers: clamp to headroom, lift to the requirement.
            res_cap = eta_dc * (s - soc_min) / dt
            pow_cap = dc_max - d_final
            if pow_cap < res_cap:
                res_cap = pow_cap
            if res_cap < 0.0:
                res_cap = 0.0
            rv = res_raw[i, t]
            if rv < 0.0:
                rv = 0.0
            elif rv > res_cap:
                rv = res_cap
            r_tot = rv
            for j in range(unit_n):
                if on[i, t, j]:
                    head = p_max[j] - p[i, t, j]
                    if head < 0.0:
                        head = 0.0
                else:
                    head = 0.0
                rj = r_raw[i, t, j]
                if rj < 0.0:
                    rj = 0.0
                elif rj > head:
                    rj = head
                r[i, t, j] = rj
                r_tot += rj
            sh = req[t] - r_tot
            if -_GAP_SNAP < sh < _GAP_SNAP:
                sh = 0.0
            if sh > 0.0:
                add = res_cap - rv
                if add > sh:
                    add = sh
                if add > 0.0:
                    rv += add
                    sh -= add
                for k in range(unit_n):
                    if sh <= 0.0:
                        break
                    j = reserve_order[k]
                    if on[i, t, j]:
                        head = p_max[j] - p[i, t, j] - r[i, t, j]
                        if head > 0.0:
                            add = head if head < sh else sh
                            r[i, t, j] += add
                            sh -= add
                if sh > 0.0:
                    short_i += sh
            res[i, t] = rv

            # Start flags and the period's operating cost.
            for j in range(unit_n):
                started = on[i, t, j] and not prev_on[j]
                start[i, t, j] = 1 if started else 0
                if started:
                    cost += startup_cost[j]
                if on[i, t, j]:
                    cost += fixed_cost[j] + fuel_slope[j] * p[i, t, j] * dt
                cost += unit_res_cost[j] * r[i, t, j]
                prev_on[j] = on[i, t, j]
            cost += (discharge_price * d_final - charge_price * c_final) * dt
            cost += ess_res_price * rv * dt
            cost += shed_penalty * l * dt

            if u_n > 0.0:
                s_next = s - (u_n * dt) / eta_dc
            elif u_n < 0.0:
                s_next = s + (eta_ch * c_final) * dt
            else:
                s_next = s
            if t == horizon - 1:
                s_next = soc_init
            else:
                if s_next < lo_w:
                    s_next = lo_w
                elif s_next > hi_w:
                    s_next = hi_w
            soc[i, t + 1] = s_next
            s = s_next
        short[i] = short_i
        op_cost[i] = cost


def _repair_full(on, p_mt, r_mt, p_ch, p_dc, p_res, ctx: DispatchContext,
                 p_ls=None):
    """Run the repair kernel; returns (arrays, bad, short, operating cost)."""
    on = np.ascontiguousarray(on, dtype=bool)
    P, T, M = on.shape
    ess, dt = ctx.ess, ctx.dt
    p_min, p_max = ctx.p_min, ctx.p_max

    def _prep(a, shape):
        arr = np.ascontiguousarray(np.asarray(a, dtype=float))
        if arr.shape != shape:
            raise ValueError(f"expected shape {shape}, got {arr.shape}")
        return arr

    p_raw = _prep(p_mt, (P, T, M))
    r_raw = _prep(r_mt, (P, T, M))
    ch_raw = _prep(p_ch, (P, T))
    dc_raw = _prep(p_dc, (P, T))
    res_raw = _prep(p_res, (P, T))
    ls_in = np.zeros((P, T)) if p_ls is None else _prep(p_ls, (P, T))

    balance_order = np.array(sorted(range(M), key=lambda j: (-p_max[j], j)),
                             dtype=np.int64)
    reserve_order = np.array(sorted(range(M), key=lambda j: (ctx.units[j].reserve_cost, j)),
                             dtype=np.int64)
    fixed = np.array([un.fixed_cost for un in ctx.units])
    startc = np.array([un.startup_cost for un in ctx.units])
    fuel = np.array([un.fuel_slope for un in ctx.units])
    resc = np.array([un.reserve_cost for un in ctx.units])

    p = np.empty((P, T, M))
    r = np.empty((P, T, M))
    u = np.empty((P, T))
    ls = np.empty((P, T))
    res = np.empty((P, T))
    soc = np.empty((P, T + 1))
    start = np.empty((P, T, M), dtype=np.int8)
    bad = np.zeros(P, dtype=bool)
    short = np.empty(P)
    op_cost = np.empty(P)
    _repair_kernel(on, p_raw, r_raw, ch_raw, dc_raw, res_raw, ls_in,
                   np.ascontiguousarray(ctx.el_expected, dtype=float),
                   np.ascontiguousarray(ctx.reserve_required, dtype=float),
                   p_min, p_max, balance_order, reserve_order,
                   fixed, startc, fuel, resc,
                   ess.p_ch_max, ess.p_dc_max, ess.eta_ch, ess.eta_dc,
                   ess.soc_min, ess.soc_max, ess.soc_init,
                   ess.charge_price, ess.discharge_price, ess.reserve_price,
                   ctx.shed_penalty, dt, p, r, u, ls, res, soc, start, bad,
                   short, op_cost)
    arrays = {"on": on, "start": start, "p_mt": p, "r_mt": r,
              "p_ch": np.maximum(-u, 0.0), "p_dc": np.maximum(u, 0.0),
              "p_res": res, "p_ls": ls, "soc": soc}
    return arrays, bad, short, op_cost


def repair_arrays(on, p_mt, r_mt, p_ch, p_dc, p_res, ctx: DispatchContext,
                  p_ls=None) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Batched repair projection.

    All inputs carry a leading population axis: ``on``/``p_mt``/``r_mt`` are
    (P, T, M); ``p_ch``/``p_dc``/``p_res`` and the optional incoming shed
    ``p_ls`` are (P, T).

    Returns ``(arrays, unbalanced, reserve_short)``: the repaired arrays, a
    boolean mask of candidates whose power balance could not be restored even
    with full shedding (those are rejected outright), and each candidate's
    total reserve shortfall in kW after offers were lifted as far as the
    committed headroom and the storage allow.  A shortfall cannot be repaired
    without changing the commitment itself, so it is left to the caller to
    penalise.
    """
    arrays, bad, short, _ = _repair_full(on, p_mt, r_mt, p_ch, p_dc, p_res,
                                         ctx, p_ls=p_ls)
    return arrays, bad, short


def cost_arrays(arrays: dict[str, np.ndarray], rt_prices, ctx: DispatchContext) -> np.ndarray:
    """Batched net operating cost, one value per population member."""
    rt = np.asarray(rt_prices, dtype=float)
    dt = ctx.dt
    fixed = np.array([u.fixed_cost for u in ctx.units])
    startc = np.array([u.startup_cost for u in ctx.units])
    fuel = np.array([u.fuel_slope for u in ctx.units])
    resc = np.array([u.reserve_cost for u in ctx.units])
    revenue = float(ctx.el_expected @ rt) * dt
    on = arrays["on"].astype(float)
    mt_cost = ((resc * arrays["r_mt"]).sum(axis=(1, 2))
               + (startc * arrays["start"]).sum(axis=(1, 2))
               + (on * (fixed + fuel * arrays["p_mt"] * dt)).sum(axis=(1, 2)))
    ess_cost = (ctx.ess.discharge_price * arrays["p_dc"]
                - ctx.ess.charge_price * arrays["p_ch"]).sum(axis=1) * dt
    reserve_cost = ctx.ess.reserve_price * arrays["p_res"].sum(axis=1) * dt
    shed_cost = ctx.shed_penalty * arrays["p_ls"].sum(axis=1) * dt
    return -revenue + mt_cost + ess_cost + reserve_cost + shed_cost


def _schedule_from_arrays(arrays: dict[str, np.ndarray], i: int, dt: float) -> Schedule:
    return Schedule(
        on=arrays["on"][i].astype(np.int8),
        start=arrays["start"][i].astype(np.int8),
        p_mt=arrays["p_mt"][i].copy(),
        r_mt=arrays["r_mt"][i].copy(),
        p_ch=arrays["p_ch"][i].copy(),
        p_dc=arrays["p_dc"][i].copy(),
        p_res=arrays["p_res"][i].copy(),
        p_ls=arrays["p_ls"][i].copy(),
        soc=arrays["soc"][i].copy(),
        dt=dt,
    )


def repair(s: Schedule, ctx: DispatchContext) -> Schedule:
    """Project one candidate schedule onto the feasible set.

    Raises :class:`UnrepairableError` when the power balance cannot be
    restored even with full shedding (the candidate is rejected).  A reserve
    shortfall that would require a different commitment is not raised here;
    it shows up in :func:`check_feasible` as a ``chance_reserve`` violation.
    """
    arrays, bad, _ = repair_arrays(
        s.on[None].astype(bool), s.p_mt[None], s.r_mt[None],
        s.p_ch[None], s.p_dc[None], s.p_res[None], ctx, p_ls=s.p_ls[None])
    if bad[0]:
        raise UnrepairableError("power balance cannot be restored by shedding")
    return _schedule_from_arrays(arrays, 0, s.dt)
