"""Continuous probability models for photovoltaic, wind, and load power.

Photovoltaic output follows a Beta law on [0, p_max].  Wind speed follows a
Weibull law; pushed through the turbine power curve it yields a mixed
distribution with probability atoms at zero and at rated output plus a smooth
density on the ramp segment.  Load follows a normal law whose truncation to
the physical range is applied later, during discretisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "DomainError",
    "PvModel",
    "WtModel",
    "LoadModel",
    "pv_output_pdf",
    "wt_power_curve",
    "wt_output_pdf",
    "wt_output_atoms",
    "load_pdf",
    "equivalent_load",
]


class DomainError(ValueError):
    """A density was evaluated outside its support."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class PvModel:
    """Beta-distributed PV output on [0, p_max] kW.

    ``lambda1``/``lambda2`` are the Beta shape factors.  ``eta``, ``area``
    and ``r_max`` record the panel efficiency, radiation area (m^2) and peak
    irradiance (W/m^2) behind ``p_max``; they are informational once
    ``p_max`` is fixed.
    """

    lambda1: float
    lambda2: float
    p_max: float
    eta: float = 1.0
    area: float = 0.0
    r_max: float = 0.0

    def __post_init__(self) -> None:
        _require(self.lambda1 > 0, "lambda1 must be > 0")
        _require(self.lambda2 > 0, "lambda2 must be > 0")
        _require(self.p_max > 0, "p_max must be > 0")
        _require(0 < self.eta <= 1, "eta must be in (0, 1]")


@dataclass(frozen=True)
class WtModel:
    """Weibull wind speed (shape ``k``, scale ``w`` m/s) through a turbine curve.

    The curve is zero below ``v_in`` and above ``v_out``, ramps linearly to
    ``p_rated`` between ``v_in`` and ``v_rated``, and holds ``p_rated`` up to
    ``v_out``.
    """

    k: float
    w: float
    v_in: float
    v_rated: float
    v_out: float
    p_rated: float

    def __post_init__(self) -> None:
        _require(self.k > 0, "k must be > 0")
        _require(self.w > 0, "w must be > 0")
        _require(0 < self.v_in < self.v_rated < self.v_out,
                 "speeds must satisfy 0 < v_in < v_rated < v_out")
        _require(self.p_rated > 0, "p_rated must be > 0")

    @property
    def h(self) -> float:
        """Ramp steepness factor v_rated / v_in - 1 (> 0 by construction)."""
        return self.v_rated / self.v_in - 1.0

    def speed_survival(self, v: float) -> float:
        """P(wind speed >= v) for v >= 0."""
        if v <= 0:
            return 1.0
        return math.exp(-((v / self.w) ** self.k))


@dataclass(frozen=True)
class LoadModel:
    """Normally distributed load power (kW).

    ``sigma`` may be given directly or derived as ``fluctuation * mu`` when
    only a relative fluctuation is known.
    """

    mu: float
    sigma: float = field(default=-1.0)
    fluctuation: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.sigma < 0:
            object.__setattr__(self, "sigma", self.fluctuation * self.mu)
        _require(self.mu >= 0, "mu must be >= 0")
        _require(self.sigma >= 0, "sigma must be >= 0")


def pv_output_pdf(model: PvModel, p: float) -> float:
    """Beta density of the PV output at ``p`` kW, normalised over [0, p_max]."""
    if not 0.0 <= p <= model.p_max:
        raise DomainError(f"p={p} outside PV support [0, {model.p_max}]")
    l1, l2 = model.lambda1, model.lambda2
    log_norm = math.lgamma(l1 + l2) - math.lgamma(l1) - math.lgamma(l2)
    x = p / model.p_max
    # Endpoint exponents: x**0 == 1, otherwise the limit is 0 or diverges.
    if x == 0.0:
        if l1 == 1.0:
            return math.exp(log_norm) / model.p_max
        return 0.0 if l1 > 1.0 else math.inf
    if x == 1.0:
        if l2 == 1.0:
            return math.exp(log_norm) / model.p_max
        return 0.0 if l2 > 1.0 else math.inf
    log_pdf = log_norm + (l1 - 1.0) * math.log(x) + (l2 - 1.0) * math.log1p(-x)
    return math.exp(log_pdf) / model.p_max


def wt_power_curve(model: WtModel, v: float) -> float:
    """Turbine output (kW) at wind speed ``v`` m/s."""
    if v < model.v_in or v >= model.v_out:
        return 0.0
    if v < model.v_rated:
        return (v - model.v_in) / (model.v_rated - model.v_in) * model.p_rated
    return model.p_rated


def wt_output_pdf(model: WtModel, p: float) -> float:
    """Density of the WT output on the ramp segment, at ``p`` kW.

    Valid on [0, p_rated]; the probability mass of calm/storm cut-out (output
    exactly 0) and of rated operation (output exactly p_rated) is carried by
    :func:`wt_output_atoms`, not by this density.
    """
    if not 0.0 <= p <= model.p_rated:
        raise DomainError(f"p={p} outside WT support [0, {model.p_rated}]")
    h = model.h
    u = (1.0 + h * p / model.p_rated) * model.v_in / model.w
    scale = model.k * h * model.v_in / (model.w * model.p_rated)
    return scale * u ** (model.k - 1.0) * math.exp(-(u ** model.k))


def wt_output_atoms(model: WtModel) -> tuple[tuple[float, float], tuple[float, float]]:
    """Probability atoms of the WT output: ((0, mass), (p_rated, mass)).

    Output is exactly zero below cut-in or at/above cut-out, and exactly rated
    between rated and cut-out speed.
    """
    s_in = model.speed_survival(model.v_in)
    s_rated = model.speed_survival(model.v_rated)
    s_out = model.speed_survival(model.v_out)
    mass_zero = (1.0 - s_in) + s_out
    mass_rated = s_rated - s_out
    return (0.0, mass_zero), (model.p_rated, mass_rated)


def load_pdf(model: LoadModel, p: float) -> float:
    """Gaussian density of the load at ``p`` kW (untruncated)."""
    if model.sigma <= 0:
        raise ValueError("sigma must be > 0 to evaluate the load density")
    z = (p - model.mu) / model.sigma
    return math.exp(-0.5 * z * z) / (model.sigma * math.sqrt(2.0 * math.pi))


def equivalent_load(p_load: float, p_pv: float, p_wt: float) -> float:
    """Net demand after renewables: load - (pv + wt).  May be negative."""
    return p_load - (p_pv + p_wt)
