"""Primal-dual interior point solver for small dense linear programs.

Problems are stated as::

    minimize    c @ x + c0
    subject to  a_eq @ x == b_eq
                a_ub @ x <= b_ub
                lower <= x <= upper      (entries may be +-inf)

Inequality rows receive slack variables internally, producing an
equality-plus-bounds standard form.  The solver follows the central path
with a Mehrotra-style predictor-corrector step: an affine scaling direction
fixes the centering parameter, a corrected direction is taken with 0.995
damping toward the boundary, and iteration stops once the complementarity
gap falls below the configured tolerance with feasibility residuals at
rounding level.  Dense linear algebra throughout; intended for problems of
at most a few hundred variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearProgram",
    "IpmConfig",
    "IpmResult",
    "IpmError",
    "IpmInfeasibleError",
    "IpmUnboundedError",
    "IpmIterationLimitError",
    "solve_lp",
]

_FEAS_TOL = 1e-8
_BLOWUP = 1e13
_BOUNDARY_DAMP = 0.995


class IpmError(RuntimeError):
    """Base class for solver failures."""


class IpmInfeasibleError(IpmError):
    """No point satisfies the constraints (dual iterates diverge)."""


class IpmUnboundedError(IpmError):
    """The objective decreases without bound (primal iterates diverge)."""


class IpmIterationLimitError(IpmError):
    """The iteration budget ran out before reaching the gap tolerance."""


def _as_matrix(a, n: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.size == 0:
        return np.zeros((0, n))
    if arr.shape[1] != n:
        raise ValueError(f"constraint matrix has {arr.shape[1]} columns, expected {n}")
    return arr


def _as_vector(b, m: int, name: str) -> np.ndarray:
    if b is None:
        b = np.zeros(0)
    arr = np.atleast_1d(np.asarray(b, dtype=float))
    if arr.size != m:
        raise ValueError(f"{name} has {arr.size} entries, expected {m}")
    return arr


@dataclass(frozen=True)
class LinearProgram:
    """Minimisation LP with equality rows, inequality rows and box bounds."""

    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    c0: float = 0.0

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.size
        a_eq = _as_matrix(self.a_eq, n)
        b_eq = _as_vector(self.b_eq, a_eq.shape[0], "b_eq")
        a_ub = _as_matrix(self.a_ub, n)
        b_ub = _as_vector(self.b_ub, a_ub.shape[0], "b_ub")
        lower = (np.full(n, -np.inf) if self.lower is None
                 else np.atleast_1d(np.asarray(self.lower, dtype=float)))
        upper = (np.full(n, np.inf) if self.upper is None
                 else np.atleast_1d(np.asarray(self.upper, dtype=float)))
        if lower.size != n or upper.size != n:
            raise ValueError("bounds must match the number of variables")
        if np.any(lower > upper):
            raise ValueError("lower bounds must not exceed upper bounds")
        for key, val in (("c", c), ("a_eq", a_eq), ("b_eq", b_eq),
                         ("a_ub", a_ub), ("b_ub", b_ub),
                         ("lower", lower), ("upper", upper)):
            object.__setattr__(self, key, val)

    @property
    def n_vars(self) -> int:
        return int(self.c.size)


@dataclass(frozen=True)
class IpmConfig:
    """Termination controls for :func:`solve_lp`."""

    gap_tolerance: float = 1e-5
    max_iters: int = 100
    initial_point_margin: float = 1.0

    def __post_init__(self) -> None:
        if self.gap_tolerance <= 0:
            raise ValueError("gap_tolerance must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.initial_point_margin <= 0:
            raise ValueError("initial_point_margin must be > 0")


@dataclass
class IpmResult:
    x: np.ndarray
    objective: float
    dual_gap: float
    iterations: int
    gap_trace: list[float] = field(default_factory=list)


def solve_lp(lp: LinearProgram, cfg: IpmConfig | None = None) -> IpmResult:
    """Solve ``lp`` to the configured complementarity gap.

    Raises :class:`IpmInfeasibleError`, :class:`IpmUnboundedError` or
    :class:`IpmIterationLimitError` when no solution is returned.
    """
    cfg = cfg or IpmConfig()
    n0 = lp.n_vars

    # Substitute out variables pinned by equal bounds; they have no interior.
    fixed = lp.lower == lp.upper
    x_full = np.zeros(n0)
    x_full[fixed] = lp.lower[fixed]
    free = ~fixed
    if not free.any():
        resid_eq = lp.a_eq @ x_full - lp.b_eq if lp.a_eq.size else np.zeros(0)
        resid_ub = lp.a_ub @ x_full - lp.b_ub if lp.a_ub.size else np.zeros(0)
        if (resid_eq.size and np.max(np.abs(resid_eq)) > _FEAS_TOL) or \
           (resid_ub.size and np.max(resid_ub) > _FEAS_TOL):
            raise IpmInfeasibleError("all variables fixed by bounds, constraints unsatisfied")
        obj = float(lp.c @ x_full) + lp.c0
        return IpmResult(x=x_full, objective=obj, dual_gap=0.0, iterations=0)

    c_red = lp.c[free]
    shift_eq = lp.a_eq[:, fixed] @ x_full[fixed] if lp.a_eq.size else np.zeros(lp.a_eq.shape[0])
    shift_ub = lp.a_ub[:, fixed] @ x_full[fixed] if lp.a_ub.size else np.zeros(lp.a_ub.shape[0])

    # Standard form: slack variables turn inequality rows into equalities.
    m_ub = lp.a_ub.shape[0]
    n = int(free.sum()) + m_ub
    a = np.zeros((lp.a_eq.shape[0] + m_ub, n))
    a[:lp.a_eq.shape[0], :free.sum()] = lp.a_eq[:, free]
    a[lp.a_eq.shape[0]:, :free.sum()] = lp.a_ub[:, free]
    if m_ub:
        a[lp.a_eq.shape[0]:, free.sum():] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq - shift_eq, lp.b_ub - shift_ub])
    c = np.concatenate([c_red, np.zeros(m_ub)])
    lower = np.concatenate([lp.lower[free], np.zeros(m_ub)])
    upper = np.concatenate([lp.upper[free], np.full(m_ub, np.inf)])
    m = a.shape[0]

    has_lo = np.isfinite(lower)
    has_up = np.isfinite(upper)
    if not np.all(has_lo | has_up):
        raise ValueError("every variable needs at least one finite bound")
    n_terms = int(has_lo.sum() + has_up.sum())

    margin = cfg.initial_point_margin
    n_free = int(free.sum())
    x_user = np.where(has_lo[:n_free] & has_up[:n_free],
                      0.5 * (lower[:n_free] + upper[:n_free]),
                      np.where(has_lo[:n_free], lower[:n_free] + margin,
                               upper[:n_free] - margin))
    # Alternating projection onto the equality rows and the box interior;
    # for a one-row energy-conservation LP this lands on a strictly feasible
    # interior point in a handful of rounds.
    a_eq_f = lp.a_eq[:, free]
    b_eq_f = lp.b_eq - shift_eq
    if a_eq_f.shape[0]:
        gram = a_eq_f @ a_eq_f.T + 1e-12 * np.eye(a_eq_f.shape[0])
        width = np.where(has_lo[:n_free] & has_up[:n_free],
                         upper[:n_free] - lower[:n_free], np.inf)
        pad = np.minimum(margin, 0.05 * width)
        pad = np.where(np.isfinite(pad), pad, margin)
        for _ in range(50):
            x_user = x_user + a_eq_f.T @ np.linalg.solve(gram, b_eq_f - a_eq_f @ x_user)
            x_user = np.where(has_lo[:n_free], np.maximum(x_user, lower[:n_free] + pad), x_user)
            x_user = np.where(has_up[:n_free], np.minimum(x_user, upper[:n_free] - pad), x_user)
    # Inequality slacks start at their exact values so those rows begin
    # feasible; floor keeps the point interior when the midpoint violates.
    slack0 = (lp.b_ub - shift_ub) - lp.a_ub[:, free] @ x_user if m_ub else np.zeros(0)
    slack0 = np.maximum(slack0, 1e-2 * margin)
    x = np.concatenate([x_user, slack0])
    x = np.where(has_lo, np.maximum(x, lower + 1e-12), x)
    x = np.where(has_up, np.minimum(x, upper - 1e-12), x)
    y = np.zeros(m)
    # Dual start absorbs the cost vector so two-sided variables begin
    # dual-feasible: c - z + v = 0 wherever both multipliers exist.
    z = np.where(has_lo, np.maximum(c, 0.0) + margin, 0.0)
    v = np.where(has_up, np.maximum(-c, 0.0) + margin, 0.0)

    gap_trace: list[float] = []
    status = "iteration-limit"

    for it in range(cfg.max_iters):
        # tiny floors only guard the divisions when an infeasible problem
        # drives a slack to exact zero before the divergence checks fire
        w = np.where(has_lo, np.maximum(x - lower, 1e-300), 1.0)
        s = np.where(has_up, np.maximum(upper - x, 1e-300), 1.0)
        rp = b - a @ x
        rd = c - a.T @ y - np.where(has_lo, z, 0.0) + np.where(has_up, v, 0.0)
        gap = float(np.sum(w * z * has_lo) + np.sum(s * v * has_up))
        gap_trace.append(gap)

        prim_ok = (rp.size == 0) or np.max(np.abs(rp)) <= _FEAS_TOL * (1 + np.max(np.abs(b), initial=0.0))
        dual_ok = np.max(np.abs(rd)) <= _FEAS_TOL * (1 + np.max(np.abs(c), initial=0.0))
        if gap < cfg.gap_tolerance and prim_ok and dual_ok:
            x_full[free] = x[:int(free.sum())]
            obj = float(lp.c @ x_full) + lp.c0
            return IpmResult(x=x_full, objective=obj, dual_gap=gap,
                             iterations=it, gap_trace=gap_trace)

        if np.max(np.abs(x)) > _BLOWUP:
            raise IpmUnboundedError("primal iterates diverged")
        if np.max(np.abs(y), initial=0.0) > _BLOWUP or np.max(z) > _BLOWUP or np.max(v, initial=0.0) > _BLOWUP:
            raise IpmInfeasibleError("dual iterates diverged")

        mu = gap / max(n_terms, 1)
        d = np.where(has_lo, z / w, 0.0) + np.where(has_up, v / s, 0.0)
        d = np.maximum(d, 1e-14)
        inv_d = 1.0 / d

        def newton(tl: np.ndarray, tu: np.ndarray) -> tuple[np.ndarray, ...]:
            """Direction for complementarity targets tl (lower) and tu (upper)."""
            g = rd.copy()
            g -= np.where(has_lo, tl / w, 0.0)
            g += np.where(has_lo, z, 0.0)
            g += np.where(has_up, tu / s, 0.0)
            g -= np.where(has_up, v, 0.0)
            if m:
                mat = (a * inv_d) @ a.T
                rhs = rp + a @ (inv_d * g)
                try:
                    dy = np.linalg.solve(mat, rhs)
                except np.linalg.LinAlgError:
                    dy = np.linalg.solve(mat + 1e-12 * np.eye(m), rhs)
            else:
                dy = np.zeros(0)
            dx = inv_d * (a.T @ dy - g)
            dz = np.where(has_lo, (tl - w * z - z * dx) / w, 0.0)
            dv = np.where(has_up, (tu - s * v + v * dx) / s, 0.0)
            return dx, dy, dz, dv

        def step_lengths(dx, dz, dv) -> tuple[float, float]:
            alpha_p = 1.0
            neg = has_lo & (dx < 0)
            if neg.any():
                alpha_p = min(alpha_p, float(np.min(-w[neg] / dx[neg])))
            pos = has_up & (dx > 0)
            if pos.any():
                alpha_p = min(alpha_p, float(np.min(s[pos] / dx[pos])))
            alpha_d = 1.0
            neg = has_lo & (dz < 0)
            if neg.any():
                alpha_d = min(alpha_d, float(np.min(-z[neg] / dz[neg])))
            neg = has_up & (dv < 0)
            if neg.any():
                alpha_d = min(alpha_d, float(np.min(-v[neg] / dv[neg])))
            return alpha_p, alpha_d

        # Predictor: pure Newton step on the complementarity products.
        dx_a, dy_a, dz_a, dv_a = newton(np.zeros(n), np.zeros(n))
        ap_a, ad_a = step_lengths(dx_a, dz_a, dv_a)
        w_a = w + ap_a * dx_a
        s_a = s - ap_a * dx_a
        gap_aff = float(np.sum(w_a * (z + ad_a * dz_a) * has_lo)
                        + np.sum(s_a * (v + ad_a * dv_a) * has_up))
        mu_aff = gap_aff / max(n_terms, 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3) if mu > 0 else 0.0

        # Corrector: recentre and compensate the predictor's second-order term.
        tl = np.where(has_lo, sigma * mu - dx_a * dz_a, 0.0)
        tu = np.where(has_up, sigma * mu + dx_a * dv_a, 0.0)
        dx, dy, dz, dv = newton(tl, tu)

        # A descent direction that no bound and no row blocks is a ray.
        scale = 1.0 + float(np.max(np.abs(dx), initial=0.0))
        blocked = bool(np.any(has_lo & (dx < -1e-12 * scale))
                       or np.any(has_up & (dx > 1e-12 * scale)))
        in_null = m == 0 or float(np.max(np.abs(a @ dx))) <= 1e-9 * scale
        if not blocked and in_null and float(c @ dx) < -1e-9 * scale:
            raise IpmUnboundedError("objective decreases along an unblocked ray")

        ap, ad = step_lengths(dx, dz, dv)
        ap = min(1.0, _BOUNDARY_DAMP * ap)
        ad = min(1.0, _BOUNDARY_DAMP * ad)

        # Guard: never accept a step that grows the complementarity gap.
        # The second-order correction can point uphill near degenerate
        # corners; a plain centering direction always descends (its gap
        # derivative is (sigma - 1) * mu < 0), so fall back to it.
        def descent_step(dx, dz, dv, ap, ad):
            for _ in range(30):
                gap_new = float(np.sum((w + ap * dx) * (z + ad * dz) * has_lo)
                                + np.sum((s - ap * dx) * (v + ad * dv) * has_up))
                if gap_new < gap or gap < cfg.gap_tolerance:
                    return ap, ad, True
                ap *= 0.5
                ad *= 0.5
            return ap, ad, False

        ap, ad, ok = descent_step(dx, dz, dv, ap, ad)
        if not ok:
            # Centering with one common step length: the gap derivative along
            # an equal primal-dual step is (sigma - 1) * gap < 0, so halving
            # must find a descent step.
            tl = np.where(has_lo, 0.5 * mu, 0.0)
            tu = np.where(has_up, 0.5 * mu, 0.0)
            dx, dy, dz, dv = newton(tl, tu)
            ap, ad = step_lengths(dx, dz, dv)
            alpha = min(1.0, _BOUNDARY_DAMP * min(ap, ad))
            ap, ad, _ = descent_step(dx, dz, dv, alpha, alpha)

        x = x + ap * dx
        y = y + ad * dy
        z = np.where(has_lo, z + ad * dz, 0.0)
        v = np.where(has_up, v + ad * dv, 0.0)

    # Classify the failure: a collapsed gap with a stuck primal residual is
    # the signature of infeasibility; otherwise the budget was simply short.
    rp = b - a @ x
    stuck = rp.size and np.max(np.abs(rp)) > 1e-6 * (1 + np.max(np.abs(b), initial=0.0))
    collapsed = gap_trace[-1] < 1e-3 * max(gap_trace[0], 1.0)
    if stuck and collapsed:
        raise IpmInfeasibleError("primal residual did not converge")
    raise IpmIterationLimitError(
        f"gap {gap_trace[-1]:.3e} above tolerance after {cfg.max_iters} iterations")
