"""Scenario files: a single JSON document holding every study parameter.

Field names carry explicit units (``p_max_kw``, ``charge_price_per_kwh``)
so files stay diffable and hand-editable.  Validation reports the offending
field by its JSON path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .demand import DrConfig
from .ipm import IpmConfig
from .jaya import JayaParams
from .microgrid import EssConfig, MtUnit
from .stochastic import LoadModel, PvModel, WtModel

__all__ = ["ScenarioError", "ScenarioConfig", "load_scenario", "bundled_scenario_path"]


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate; names the field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class ScenarioConfig:
    """All device, tariff, uncertainty and solver parameters for one study."""

    horizon: int
    q: float
    gamma: float
    n_iter_max: int
    shed_penalty: float
    units: tuple[MtUnit, ...]
    ess: EssConfig
    pv_periods: tuple[PvModel | None, ...]
    wt_periods: tuple[WtModel | None, ...]
    load_periods: tuple[LoadModel, ...]
    load_p_max: float
    dr: DrConfig
    tou: np.ndarray
    ref_price: float
    ref_el: float
    jaya: JayaParams
    ipm: IpmConfig

    def __post_init__(self) -> None:
        object.__setattr__(self, "tou", np.asarray(self.tou, dtype=float))

    def with_overrides(self, gamma: float | None = None, ratio: float | None = None,
                       q: float | None = None, seed: int | None = None) -> "ScenarioConfig":
        """Copy with command-line style overrides applied."""
        out = self
        if gamma is not None:
            if not 0 < gamma <= 1:
                raise ScenarioError("gamma", "must be in (0, 1]")
            out = replace(out, gamma=gamma)
        if ratio is not None:
            out = replace(out, dr=replace(out.dr, ratio=ratio))
        if q is not None:
            if q <= 0:
                raise ScenarioError("q", "must be > 0")
            out = replace(out, q=q)
        if seed is not None:
            out = replace(out, jaya=replace(out.jaya, rng_seed=seed))
        return out


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return obj[key]


def _num(obj: dict, key: str, path: str, default=None):
    if key not in obj or obj[key] is None:
        if default is not None:
            return default
        raise ScenarioError(f"{path}.{key}", "missing required number")
    val = obj[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ScenarioError(f"{path}.{key}", f"expected a number, got {val!r}")
    return float(val)


def _opt_num(obj: dict, key: str, path: str):
    val = obj.get(key)
    if val is None:
        return None
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ScenarioError(f"{path}.{key}", f"expected a number or null, got {val!r}")
    return float(val)


def _build(factory, path: str, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from exc


def _periods(raw, horizon: int, path: str) -> list:
    if not isinstance(raw, list):
        raise ScenarioError(path, "expected a list of per-period entries")
    if len(raw) != horizon:
        raise ScenarioError(path, f"expected {horizon} entries, got {len(raw)}")
    return raw


def load_scenario(source) -> ScenarioConfig:
    """Load and validate a scenario from a path, JSON string, or dict."""
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(str(source), f"cannot read scenario file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(str(source), f"invalid JSON at line {exc.lineno}, "
                                             f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario document must be a JSON object")

    horizon = _need(doc, "horizon", "<root>")
    if not isinstance(horizon, int) or horizon < 1:
        raise ScenarioError("horizon", "must be an integer >= 1")
    q = _num(doc, "step_kw", "<root>")
    if q <= 0:
        raise ScenarioError("step_kw", "must be > 0 (discretisation step q)")
    gamma = _num(doc, "gamma", "<root>")
    if not 0 < gamma <= 1:
        raise ScenarioError("gamma", "must be in (0, 1]")
    n_iter_max = _need(doc, "n_iter_max", "<root>")
    if not isinstance(n_iter_max, int) or n_iter_max < 1:
        raise ScenarioError("n_iter_max", "must be an integer >= 1")
    shed_penalty = _num(doc, "shed_penalty_per_kwh", "<root>", default=10.0)
    if shed_penalty < 0:
        raise ScenarioError("shed_penalty_per_kwh", "must be >= 0")

    raw_units = _need(doc, "mt_units", "<root>")
    if not isinstance(raw_units, list) or not raw_units:
        raise ScenarioError("mt_units", "expected a non-empty list")
    units = tuple(
        _build(MtUnit, f"mt_units[{i}]",
               fixed_cost=_num(u, "fixed_cost", f"mt_units[{i}]"),
               startup_cost=_num(u, "startup_cost", f"mt_units[{i}]"),
               fuel_slope=_num(u, "fuel_slope_per_kwh", f"mt_units[{i}]"),
               reserve_cost=_num(u, "reserve_cost_per_kwh", f"mt_units[{i}]"),
               p_min=_num(u, "p_min_kw", f"mt_units[{i}]"),
               p_max=_num(u, "p_max_kw", f"mt_units[{i}]"))
        for i, u in enumerate(raw_units))

    e = _need(doc, "ess", "<root>")
    ess = _build(EssConfig, "ess",
                 p_ch_max=_num(e, "p_ch_max_kw", "ess"),
                 p_dc_max=_num(e, "p_dc_max_kw", "ess"),
                 eta_ch=_num(e, "eta_ch", "ess"),
                 eta_dc=_num(e, "eta_dc", "ess"),
                 soc_min=_num(e, "soc_min_kwh", "ess"),
                 soc_max=_num(e, "soc_max_kwh", "ess"),
                 soc_init=_num(e, "soc_init_kwh", "ess"),
                 charge_price=_num(e, "charge_price_per_kwh", "ess", default=0.0),
                 discharge_price=_num(e, "discharge_price_per_kwh", "ess", default=0.0),
                 reserve_price=_num(e, "reserve_price_per_kwh", "ess", default=0.0),
                 q_ch_max=_opt_num(e, "q_ch_max_kvar", "ess"),
                 q_dc_max=_opt_num(e, "q_dc_max_kvar", "ess"),
                 v_min=_opt_num(e, "v_min_v", "ess"),
                 v_max=_opt_num(e, "v_max_v", "ess"))

    pv = _need(doc, "pv", "<root>")
    pv_cap = _num(pv, "p_max_kw", "pv")
    pv_eta = _num(pv, "eta", "pv", default=1.0)
    pv_area = _num(pv, "area_m2", "pv", default=0.0)
    pv_rmax = _num(pv, "r_max_w_m2", "pv", default=0.0)
    pv_periods: list[PvModel | None] = []
    for t, entry in enumerate(_periods(_need(pv, "periods", "pv"), horizon, "pv.periods")):
        if entry is None:
            pv_periods.append(None)
            continue
        p_max_t = _num(entry, "p_max_kw", f"pv.periods[{t}]", default=pv_cap)
        if p_max_t > pv_cap + 1e-9:
            raise ScenarioError(f"pv.periods[{t}].p_max_kw",
                                f"exceeds the plant rating {pv_cap}")
        pv_periods.append(_build(PvModel, f"pv.periods[{t}]",
                                 lambda1=_num(entry, "lambda1", f"pv.periods[{t}]"),
                                 lambda2=_num(entry, "lambda2", f"pv.periods[{t}]"),
                                 p_max=p_max_t, eta=pv_eta, area=pv_area, r_max=pv_rmax))

    wt = _need(doc, "wt", "<root>")
    wt_vin = _num(wt, "v_in_ms", "wt")
    wt_vrated = _num(wt, "v_rated_ms", "wt")
    wt_vout = _num(wt, "v_out_ms", "wt")
    wt_prated = _num(wt, "p_rated_kw", "wt")
    wt_periods: list[WtModel | None] = []
    for t, entry in enumerate(_periods(_need(wt, "periods", "wt"), horizon, "wt.periods")):
        if entry is None:
            wt_periods.append(None)
            continue
        wt_periods.append(_build(WtModel, f"wt.periods[{t}]",
                                 k=_num(entry, "k", f"wt.periods[{t}]"),
                                 w=_num(entry, "scale_ms", f"wt.periods[{t}]"),
                                 v_in=wt_vin, v_rated=wt_vrated, v_out=wt_vout,
                                 p_rated=wt_prated))

    load = _need(doc, "load", "<root>")
    load_p_max = _num(load, "p_max_kw", "load")
    if load_p_max <= 0:
        raise ScenarioError("load.p_max_kw", "must be > 0")
    fluctuation = _num(load, "fluctuation", "load", default=0.0)
    if fluctuation < 0:
        raise ScenarioError("load.fluctuation", "must be >= 0")
    load_periods = []
    for t, entry in enumerate(_periods(_need(load, "periods", "load"), horizon, "load.periods")):
        if entry is None:
            raise ScenarioError(f"load.periods[{t}]", "load entries may not be null")
        mu = _num(entry, "mu_kw", f"load.periods[{t}]")
        sigma = _opt_num(entry, "sigma_kw", f"load.periods[{t}]")
        if sigma is None:
            load_periods.append(_build(LoadModel, f"load.periods[{t}]",
                                       mu=mu, fluctuation=fluctuation))
        else:
            load_periods.append(_build(LoadModel, f"load.periods[{t}]",
                                       mu=mu, sigma=sigma))

    dr_raw = _need(doc, "demand_response", "<root>")
    ratio = _num(dr_raw, "ratio", "demand_response")

    def _bound_array(key: str):
        val = dr_raw.get(key)
        if val is None:
            return None
        if not isinstance(val, list) or len(val) != horizon:
            raise ScenarioError(f"demand_response.{key}",
                                f"expected {horizon} per-period values or null")
        return np.asarray(val, dtype=float)

    dr = _build(DrConfig, "demand_response", ratio=ratio,
                p_cn_min=_bound_array("p_cn_min_kw"),
                p_cn_max=_bound_array("p_cn_max_kw"))

    prices = _need(doc, "prices", "<root>")
    tou_raw = _need(prices, "tou_per_kwh", "prices")
    if not isinstance(tou_raw, list) or len(tou_raw) != horizon:
        raise ScenarioError("prices.tou_per_kwh", f"expected {horizon} values")
    tou = np.asarray(tou_raw, dtype=float)
    if np.any(tou < 0):
        raise ScenarioError("prices.tou_per_kwh", "prices must be >= 0")
    ref_price = _num(prices, "ref_price_per_kwh", "prices")
    ref_el = _num(prices, "ref_el_kw", "prices")
    if ref_el <= 0:
        raise ScenarioError("prices.ref_el_kw", "must be > 0")
    if ref_price < 0:
        raise ScenarioError("prices.ref_price_per_kwh", "must be >= 0")

    j = doc.get("jaya", {})
    jaya = _build(JayaParams, "jaya",
                  population=int(_num(j, "population", "jaya", default=100.0)),
                  max_iters=int(_num(j, "max_iters", "jaya", default=1500.0)),
                  rng_seed=int(_num(j, "rng_seed", "jaya", default=0.0)))

    ip = doc.get("ipm", {})
    ipm = _build(IpmConfig, "ipm",
                 gap_tolerance=_num(ip, "gap_tolerance", "ipm", default=1e-5),
                 max_iters=int(_num(ip, "max_iters", "ipm", default=100.0)),
                 initial_point_margin=_num(ip, "initial_point_margin", "ipm", default=1.0))

    return ScenarioConfig(horizon=horizon, q=q, gamma=gamma, n_iter_max=n_iter_max,
                          shed_penalty=shed_penalty, units=units, ess=ess,
                          pv_periods=tuple(pv_periods), wt_periods=tuple(wt_periods),
                          load_periods=tuple(load_periods), load_p_max=load_p_max,
                          dr=dr, tou=tou, ref_price=ref_price, ref_el=ref_el,
                          jaya=jaya, ipm=ipm)


def bundled_scenario_path(name: str = "paper_base") -> Path:
    """Filesystem path of a scenario shipped with the package."""
    ref = resources.files("mgsched").joinpath(f"scenarios/{name}.json")
    if not ref.is_file():
        raise ScenarioError(name, "no bundled scenario with this name")
    return Path(str(ref))
