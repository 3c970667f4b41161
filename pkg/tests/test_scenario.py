import json

import numpy as np
import pytest

from mgsched.scenario import (ScenarioError, bundled_scenario_path,
                              load_scenario)


@pytest.fixture(scope="module")
def base_doc():
    with open(bundled_scenario_path()) as fh:
        return json.load(fh)


class TestBundledScenario:
    def test_loads(self):
        config = load_scenario(bundled_scenario_path())
        assert config.horizon == 24
        assert config.q == 2.5
        assert config.gamma == 0.95

    def test_mt_table(self):
        config = load_scenario(bundled_scenario_path())
        rows = [(u.fixed_cost, u.startup_cost, u.fuel_slope, u.reserve_cost,
                 u.p_min, u.p_max) for u in config.units]
        assert rows == [
            (1.2, 1.6, 0.35, 0.04, 5.0, 35.0),
            (1.2, 1.6, 0.35, 0.04, 5.0, 30.0),
            (1.0, 3.5, 0.26, 0.04, 10.0, 65.0),
        ]

    def test_ess_constants(self):
        ess = load_scenario(bundled_scenario_path()).ess
        assert (ess.p_ch_max, ess.p_dc_max) == (40.0, 40.0)
        assert (ess.eta_ch, ess.eta_dc) == (0.95, 0.95)
        assert (ess.soc_min, ess.soc_max, ess.soc_init) == (32.0, 160.0, 32.0)
        assert (ess.charge_price, ess.discharge_price) == (0.3, 0.5)
        assert ess.reserve_price == 0.02

    def test_tariff_layout(self):
        config = load_scenario(bundled_scenario_path())
        tou = config.tou
        # peak 11:00-15:00, troughs 06:00-07:00 and 18:00-19:00
        assert np.all(tou[11:15] == 0.83)
        assert tou[6] == 0.17 and tou[18] == 0.17
        others = [tou[t] for t in range(24) if t not in (6, 18) and not 11 <= t < 15]
        assert all(v == 0.62 for v in others)

    def test_reference_pricing_constants(self):
        config = load_scenario(bundled_scenario_path())
        assert config.ref_price == 0.6
        assert config.ref_el == 51.5
        assert config.n_iter_max == 20
        assert config.dr.ratio == 0.2
        assert config.load_p_max == 195.0

    def test_renewable_plant_constants(self):
        config = load_scenario(bundled_scenario_path())
        pv = next(m for m in config.pv_periods if m is not None)
        assert pv.eta == 0.093 and pv.area == 1300.0
        wt = next(m for m in config.wt_periods if m is not None)
        assert (wt.v_in, wt.v_rated, wt.v_out, wt.p_rated) == (3.0, 15.0, 25.0, 60.0)

    def test_solver_defaults(self):
        config = load_scenario(bundled_scenario_path())
        assert config.jaya.population == 100
        assert config.jaya.max_iters == 1500
        assert config.ipm.gap_tolerance == 1e-5


class TestValidation:
    def test_negative_step_names_field(self, base_doc):
        doc = dict(base_doc)
        doc["step_kw"] = -1.0
        with pytest.raises(ScenarioError, match="step_kw"):
            load_scenario(doc)

    def test_bad_gamma(self, base_doc):
        doc = dict(base_doc)
        doc["gamma"] = 1.5
        with pytest.raises(ScenarioError, match="gamma"):
            load_scenario(doc)

    def test_missing_field_named(self, base_doc):
        doc = {k: v for k, v in base_doc.items() if k != "ess"}
        with pytest.raises(ScenarioError, match="ess"):
            load_scenario(doc)

    def test_wrong_period_count(self, base_doc):
        doc = json.loads(json.dumps(base_doc))
        doc["load"]["periods"] = doc["load"]["periods"][:-1]
        with pytest.raises(ScenarioError, match="load.periods"):
            load_scenario(doc)

    def test_unit_bounds_checked(self, base_doc):
        doc = json.loads(json.dumps(base_doc))
        doc["mt_units"][0]["p_min_kw"] = 99.0
        with pytest.raises(ScenarioError, match=r"mt_units\[0\]"):
            load_scenario(doc)

    def test_pv_cap_respected(self, base_doc):
        doc = json.loads(json.dumps(base_doc))
        for entry in doc["pv"]["periods"]:
            if entry is not None:
                entry["p_max_kw"] = 500.0
                break
        with pytest.raises(ScenarioError, match="p_max_kw"):
            load_scenario(doc)

    def test_parse_error_carries_location(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"horizon": 24,,}')
        with pytest.raises(ScenarioError, match="line"):
            load_scenario(path)

    def test_unknown_bundled_name(self):
        with pytest.raises(ScenarioError):
            bundled_scenario_path("no_such_scenario")


class TestOverrides:
    def test_override_round_trip(self):
        config = load_scenario(bundled_scenario_path())
        out = config.with_overrides(gamma=0.5, ratio=0.3, q=5.0, seed=42)
        assert out.gamma == 0.5
        assert out.dr.ratio == 0.3
        assert out.q == 5.0
        assert out.jaya.rng_seed == 42
        # original untouched
        assert config.gamma == 0.95

    def test_invalid_override(self):
        config = load_scenario(bundled_scenario_path())
        with pytest.raises(ScenarioError):
            config.with_overrides(gamma=2.0)
