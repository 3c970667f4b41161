"""Lower-level user problem: shifting flexible load toward cheap hours.

A fixed share ``ratio`` of each period's expected net demand is
time-shiftable.  The user chooses the shiftable profile ``p_cn`` to minimise
the electricity bill at the posted prices, subject to per-period bounds and
to conservation of the total shiftable energy over the cycle.  The
non-shiftable remainder ``p_un = (1 - ratio) * el`` is a fixed cost term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ipm import IpmConfig, LinearProgram, solve_lp

__all__ = ["DrConfig", "UserPlan", "InfeasibleBoundsError", "build_user_lp", "solve_user"]


class InfeasibleBoundsError(ValueError):
    """The shiftable-load bounds cannot absorb the required total energy."""


@dataclass(frozen=True)
class DrConfig:
    """Demand-response parameters.

    ``p_cn_min`` / ``p_cn_max`` are optional per-period bounds on the
    shiftable load; when omitted they default to 0 and twice the baseline
    shiftable load, allowing full shift-out and a bounded concentration.
    """

    ratio: float
    p_cn_min: np.ndarray | None = None
    p_cn_max: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must be in (0, 1)")
        for name in ("p_cn_min", "p_cn_max"):
            val = getattr(self, name)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if np.any(arr < 0):
                    raise ValueError(f"{name} must be non-negative")
                object.__setattr__(self, name, arr)
        if self.p_cn_min is not None and self.p_cn_max is not None:
            if np.any(self.p_cn_min > self.p_cn_max):
                raise ValueError("p_cn_min must not exceed p_cn_max")


@dataclass(frozen=True)
class UserPlan:
    """Result of one lower-level solve (all arrays per period, kW)."""

    p_cn: np.ndarray
    p_un: np.ndarray
    p_move: np.ndarray
    f2: float

    @property
    def total(self) -> np.ndarray:
        return self.p_un + self.p_cn


def _bounds(el: np.ndarray, cfg: DrConfig) -> tuple[np.ndarray, np.ndarray]:
    base = cfg.ratio * el
    lo = np.zeros_like(el) if cfg.p_cn_min is None else np.broadcast_to(cfg.p_cn_min, el.shape).astype(float)
    hi = 2.0 * base if cfg.p_cn_max is None else np.broadcast_to(cfg.p_cn_max, el.shape).astype(float)
    return lo.copy(), hi.copy()


def build_user_lp(el_expected, prices, cfg: DrConfig) -> LinearProgram:
    """LP over the shiftable profile: bill minimisation with energy conservation.

    The objective carries the fixed non-shiftable bill as a constant, so the
    LP objective value equals the full user cost.
    """
    el = np.maximum(np.asarray(el_expected, dtype=float), 0.0)
    omega = np.asarray(prices, dtype=float)
    if el.shape != omega.shape:
        raise ValueError("price and demand horizons differ")
    lo, hi = _bounds(el, cfg)
    target = cfg.ratio * float(el.sum())
    if hi.sum() < target - 1e-9 or lo.sum() > target + 1e-9:
        raise InfeasibleBoundsError(
            f"shiftable bounds cannot carry the total of {target:.3f} kW")
    p_un = (1.0 - cfg.ratio) * el
    return LinearProgram(
        c=omega,
        a_eq=np.ones((1, el.size)),
        b_eq=np.array([target]),
        lower=lo,
        upper=hi,
        c0=float(omega @ p_un),
    )


def solve_user(el_expected, prices, cfg: DrConfig, ipm: IpmConfig | None = None) -> UserPlan:
    """Optimal user plan at the posted prices."""
    el = np.maximum(np.asarray(el_expected, dtype=float), 0.0)
    lp = build_user_lp(el, prices, cfg)
    if np.all(lp.lower == lp.upper):
        p_cn = lp.lower.copy()
        f2 = float(np.asarray(prices, dtype=float) @ p_cn) + lp.c0
    else:
        result = solve_lp(lp, ipm)
        p_cn = result.x
        f2 = result.objective
    p_un = (1.0 - cfg.ratio) * el
    p_move = p_cn - cfg.ratio * el
    return UserPlan(p_cn=p_cn, p_un=p_un, p_move=p_move, f2=f2)
