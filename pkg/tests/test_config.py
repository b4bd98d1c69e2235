import json

import pytest

from errors import ConfigError, UnknownPresetError
from models import UplinkConfig
from runner.config import (
    build_scenario,
    list_presets,
    load_scenario_file,
    parse_scenario_text,
    preset,
    table_iv_reference,
)


class TestPresets:
    def test_default_scenario(self, scenario):
        assert scenario.uplink.epsilon == 0.6
        assert scenario.uplink.density == 0.25
        assert scenario.fso.nu == 2.296
        assert scenario.fso.attenuation_db_per_km == 0.43
        assert scenario.irs.sizes == list(range(1, 11))
        assert scenario.sweep.mc_budget == 10_000
        assert scenario.fso.beam_expansion == 23.4
        assert scenario.sweep.transmit_snr_db == 100.0
        assert scenario.uplink.ue_density is None

    def test_alias_resolves(self):
        fragment = preset("tableIII")
        assert fragment.name == "table_iii"
        assert fragment.section == "uplink"
        assert fragment["alpha"] == 3.5

    def test_unknown_preset(self):
        with pytest.raises(UnknownPresetError) as excinfo:
            preset("table_ix")
        assert isinstance(excinfo.value, KeyError)
        assert "table_ix" in str(excinfo.value)

    def test_listing(self):
        names = list_presets()
        assert names == sorted(names)
        assert {"table_iii", "clear_air", "moderate_fog", "heterodyne"} <= set(names)

    def test_named_preset_layers_over_defaults(self):
        fog = build_scenario(presets=["moderate_fog", "heterodyne"])
        assert fog.fso.attenuation_db_per_km == 42.2
        assert fog.fso.detection == 1
        # untouched values keep their defaults
        assert fog.fso.nu == 2.296

    def test_raw_values_win(self):
        cfg = build_scenario({"uplink": {"epsilon": 0.2}}, presets=["tableIII"])
        assert cfg.uplink.epsilon == 0.2

    def test_reference_optima(self):
        rows = table_iv_reference()
        assert [r["jitter_ratio"] for r in rows] == [3.5, 4.0, 4.5, 5.0]
        assert [r["waist_cm"] for r in rows] == [2.1, 2.4, 2.7, 3.0]
        assert all(r["wl_over_a"] is not None for r in rows)
        assert rows[-1]["wl_over_a"] == 6.038

    def test_missing_store(self, monkeypatch, tmp_path):
        monkeypatch.setenv("FSO_DATA_DIR", str(tmp_path))
        with pytest.raises(ConfigError):
            list_presets()

    def test_preset_with_unknown_section(self, monkeypatch, tmp_path):
        store = {"defaults": [], "presets": {"bad": {"section": "plots", "values": {}}}}
        (tmp_path / "presets.json").write_text(json.dumps(store))
        monkeypatch.setenv("FSO_DATA_DIR", str(tmp_path))
        with pytest.raises(ConfigError):
            preset("bad")


class TestScenarioText:
    def test_flat_sections(self):
        text = '[uplink]\nepsilon = 0.8\n\n[sweep]\nvariable = "epsilon"\ngrid = [0.0, 0.5, 1.0]\n'
        sections = parse_scenario_text(text)
        assert sections == {"uplink": {"epsilon": 0.8}, "sweep": {"variable": "epsilon", "grid": [0.0, 0.5, 1.0]}}

    def test_unknown_section(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_scenario_text("[plots]\nstyle = 1\n")
        assert excinfo.value.field_errors[0]["field"] == "plots"

    def test_top_level_key(self):
        with pytest.raises(ConfigError):
            parse_scenario_text("seed = 3\n")

    def test_nested_table(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_scenario_text("[fso.pointing]\njitter_sigma = 1.0\n")
        assert excinfo.value.field_errors[0]["field"] == "fso.pointing"

    def test_syntax_error(self):
        with pytest.raises(ConfigError):
            parse_scenario_text("[uplink\nepsilon = 0.8\n")

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "scenario.toml"
        path.write_text("[fso]\naverage_snr_db = 20.0\n")
        cfg = build_scenario(load_scenario_file(str(path)))
        assert cfg.fso.to_spec().mu_r == pytest.approx(100.0, rel=1e-9)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_scenario_file(str(tmp_path / "absent.toml"))


class TestValidation:
    def test_out_of_range_value(self):
        with pytest.raises(ConfigError) as excinfo:
            build_scenario({"uplink": {"epsilon": 1.5}})
        assert any(e["field"] == "uplink.epsilon" for e in excinfo.value.field_errors)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            build_scenario({"fso": {"turbulence": "strong"}})

    def test_unknown_raw_section(self):
        with pytest.raises(ConfigError):
            build_scenario({"plots": {}})

    def test_mc_budget_floor(self):
        with pytest.raises(ConfigError):
            build_scenario({"sweep": {"mc_budget": 10}})

    @pytest.mark.parametrize(
        "sweep",
        [
            {"start": 0.0, "stop": 1.0},
            {"grid": [0.0, 1.0], "start": 0.0, "stop": 1.0, "step": 0.5},
            {"grid": [1.0, 0.0]},
            {"grid": []},
            {"start": 1.0, "stop": 0.0, "step": 0.5},
        ],
    )
    def test_bad_sweeps(self, sweep):
        with pytest.raises(ConfigError):
            build_scenario({"sweep": sweep})

    def test_range_expansion(self):
        cfg = build_scenario({"sweep": {"start": -1.0, "stop": 1.0, "step": 0.5}})
        assert cfg.sweep.values() == [-1.0, -0.5, 0.0, 0.5, 1.0]
        assert build_scenario().sweep.values() is None

    def test_irs_sizes_increase(self):
        with pytest.raises(ConfigError):
            build_scenario({"irs": {"sizes": [4, 2]}})


class TestScenarioConfig:
    def test_digest_is_stable(self, scenario):
        assert build_scenario().digest() == scenario.digest()
        assert len(scenario.digest()) == 64

    def test_overrides_revalidate(self, scenario):
        changed = scenario.with_overrides("uplink", epsilon=0.9)
        assert changed.uplink.epsilon == 0.9
        assert changed.digest() != scenario.digest()
        assert scenario.uplink.epsilon == 0.6
        with pytest.raises(ConfigError):
            scenario.with_overrides("uplink", epsilon=-0.1)

    def test_uplink_noise_from_bandwidth(self, scenario):
        cfg = scenario.uplink.to_config()
        assert cfg.noise_power == pytest.approx(UplinkConfig.noise_power_for_bandwidth(300e6))
        assert cfg.noise_power == pytest.approx(UplinkConfig.table_iii().noise_power)

    def test_fso_spec_from_sections(self, scenario):
        spec = scenario.fso.to_spec()
        assert spec.noise_var == 1e-7
        assert spec.pathloss.gain == pytest.approx(7.114e-5, rel=1e-3)
        assert spec.pointing.g2 == pytest.approx(1.5625, rel=1e-3)

    def test_interferer_density(self, scenario):
        assert scenario.uplink.to_config().interferer_density == 0.25
        sparse = scenario.with_overrides("uplink", ue_density=0.1)
        assert sparse.uplink.to_config().interferer_density == 0.1
        assert sparse.uplink.to_config().density == 0.25
