import glob
import json
import logging
import os

import numpy as np
import pytest

from fluxlat import cli, scenarios
from fluxlat.circuit import build_element
from fluxlat.config import (
    ConfigError,
    SCENARIOS,
    coupler_type,
    element_params,
    grid,
    load_config,
    representative,
    schema,
    validate_config,
)
from fluxlat.errors import IntegrationError, ValidationError
from fluxlat.plotting import emit_plots
from fluxlat.sweep import SweepResult

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


PARASITIC = {"scenario": "parasitic-drive", "parameters": {"d": [1e-3, 1e-2]}, "output": "pd"}


class TestSchema:
    def test_every_shipped_config_validates(self):
        paths = sorted(glob.glob(os.path.join(CONFIG_DIR, "*.json")))
        assert len(paths) == len(SCENARIOS)
        for path in paths:
            cfg = load_config(path)
            assert cfg["scenario"] in SCENARIOS

    def test_defaults_filled(self, tmp_path):
        cfg = load_config(write(tmp_path, {"scenario": "parasitic-drive", "parameters": {"d": [0.01]}}))
        assert (cfg["output"], cfg["format"], cfg["plot"]) == ("parasitic-drive", "csv", False)

    def test_key_without_unit_suffix_rejected(self):
        problems = validate_config({"scenario": "ftf-sweep", "parameters": {"g_ff": [0.1], "df_qq_ghz": [0.01]}})
        assert "/parameters: Additional properties are not allowed ('g_ff' was unexpected)" in problems
        assert "/parameters: 'g_ff_ghz' is a required property" in problems

    def test_all_problems_listed(self):
        problems = validate_config({
            "scenario": "cqcq-zz",
            "parameters": {"g_ghz": 0.1, "dcc_ghz": {"start": 1, "stop": 2},
                           "q1": {"kind": "fluxonium", "ec_ghz": 1, "ej": 3}},
            "format": "xml",
        })
        assert any(p.startswith("/format") for p in problems)
        assert "/parameters/dcc_ghz: 'num' is a required property" in problems
        assert "/parameters/q1: Additional properties are not allowed ('ej' was unexpected)" in problems

    def test_reference_override_errors_point_at_field(self):
        problems = validate_config({"scenario": "cqcq-zz",
                                    "parameters": {"g_ghz": 0.1, "dcc_ghz": [1.0], "q1": {"ref": "Q_A", "keep_levels": 1}}})
        assert problems == ["/parameters/q1/keep_levels: 1 is less than the minimum of 2"]

    def test_unknown_elements_reported(self):
        problems = validate_config({"scenario": "cqcq-zz",
                                    "parameters": {"g_ghz": 0.1, "dcc_ghz": [1.0], "c_alpha": "C9_X", "q1": "Q_Z"}})
        assert len(problems) == 2
        assert problems[0].startswith("/parameters/c_alpha: unknown element 'C9_X'")

    def test_untyped_coupler(self):
        problems = validate_config({"scenario": "cqcq-zz", "parameters": {
            "g_ghz": 0.1, "dcc_ghz": [1.0], "c_alpha": {"kind": "transmon", "ec_ghz": 0.3, "ej_ghz": 9.0}}})
        assert problems and "coupler type" in problems[0]

    def test_log_grid_needs_positive_bounds(self):
        problems = validate_config({"scenario": "parasitic-drive",
                                    "parameters": {"d": {"start": 0, "stop": 1, "num": 3, "spacing": "log"}}})
        assert problems == ["/parameters/d: log grid needs positive start and stop"]

    def test_unknown_scenario(self):
        assert validate_config({"scenario": "nope", "parameters": {}})

    def test_bad_json_and_missing_file(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("{")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "missing.json"))


class TestResolution:
    def test_grid(self):
        np.testing.assert_allclose(grid({"start": 0, "stop": 1, "num": 3}), [0, 0.5, 1])
        np.testing.assert_allclose(grid({"start": 1e-3, "stop": 1e-1, "num": 3, "spacing": "log"}), [1e-3, 1e-2, 1e-1])
        np.testing.assert_array_equal(grid([3, 1]), [3.0, 1.0])

    def test_element_override(self):
        p = element_params({"ref": "Q_A", "keep_levels": 7})
        assert p.keep_levels == 7 and p.EJ == representative()["elements"]["Q_A"]["ej_ghz"]

    def test_representative_frequencies(self):
        f = {name: build_element(element_params(name)).transition(0, 1) for name in ("C0_L", "C0_U", "C1_L", "C1_U")}
        assert f["C0_L"] == pytest.approx(3.0, abs=1e-4)
        assert f["C1_U"] == pytest.approx(7.0, abs=1e-4)
        qa = build_element(element_params("Q_A")).transition(0, 1)
        qb = build_element(element_params("Q_B")).transition(0, 1)
        assert qb - qa == pytest.approx(0.05, abs=1e-4)

    def test_coupler_type(self):
        assert coupler_type("C1_U") == "C1"
        assert coupler_type({"ref": "Q_A", "type": "C0"}) == "C0"
        with pytest.raises(ValidationError):
            coupler_type("Q_A")


class TestCli:
    def test_schema_command(self, capsys):
        assert cli.main(["schema"]) == 0
        assert json.loads(capsys.readouterr().out) == json.loads(json.dumps(schema()))

    def test_validate_command(self, tmp_path, capsys):
        assert cli.main(["validate", write(tmp_path, PARASITIC)]) == 0
        bad = write(tmp_path, {"scenario": "ftf-sweep", "parameters": {"g_ff": [0.1], "df_qq_ghz": [0.01]}}, "bad.json")
        assert cli.main(["validate", bad]) == 2
        assert "/parameters" in capsys.readouterr().err

    def test_run_csv(self, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["run", write(tmp_path, PARASITIC), "--out", str(out), "--threads", "1"]) == 0
        res = SweepResult.from_csv((out / "pd.csv").read_text(), ["d"])
        np.testing.assert_allclose(res.values["eps_total_a"], 0.4 * res.axes["d"], rtol=0.1)
        meta = json.loads((out / "pd.meta.json").read_text())
        assert meta["scenario"] == "parasitic-drive" and len(meta["config_hash"]) == 64
        assert json.loads((out / "pd.timing.json").read_text())["wall_time_s"] > 0

    def test_run_json_with_plots(self, tmp_path):
        cfg = {"scenario": "czz-margin", "parameters": {"c0l_f01_ghz": [2.6, 3.0, 3.4]}, "output": "czz",
               "format": "json"}
        out = tmp_path / "out"
        assert cli.run(write(tmp_path, cfg), str(out), plot=True) == 0
        res = SweepResult.from_json((out / "czz.json").read_text())
        assert np.all(np.diff(res.values["margin_ghz"]) > 0)
        svgs = sorted(p.name for p in out.glob("*.svg"))
        assert "czz_margin_ghz.svg" in svgs and len(svgs) == 4

    def test_run_invalid_config_exit_2(self, tmp_path):
        assert cli.run(write(tmp_path, {"scenario": "parasitic-drive", "parameters": {}}), str(tmp_path)) == 2

    def test_bad_threads_exit_2(self, tmp_path):
        assert cli.run(write(tmp_path, PARASITIC), str(tmp_path), threads=0) == 2

    def test_numerical_failure_exit_3(self, tmp_path, monkeypatch, capsys):
        def boom(p, threads=None):
            raise IntegrationError("propagator not unitary")

        monkeypatch.setitem(scenarios.RUNNERS, "parasitic-drive", boom)
        assert cli.run(write(tmp_path, PARASITIC), str(tmp_path)) == 3
        assert "IntegrationError" in capsys.readouterr().err

    def test_failed_points_recorded(self, tmp_path):
        cfg = {"scenario": "spectator-error", "parameters": {"zeta_cs_ghz": [0.0], "tau_ns": [5.0]}}
        # an out-of-range duration fails per point; the run completes and records it
        assert cli.run(write(tmp_path, cfg), str(tmp_path)) == 0
        meta = json.loads((tmp_path / "spectator-error.meta.json").read_text())
        assert meta["failures"][0]["tau_ns"] == 5.0


class TestPlots:
    def test_empty_metric_warns(self, tmp_path, caplog):
        res = SweepResult({"x": [0.0, 1.0]}, {"d_a": [1e-3, 2e-3], "eps_b": [np.nan, np.nan]})
        with caplog.at_level(logging.WARNING, logger="fluxlat.plotting"):
            paths = emit_plots(res, str(tmp_path / "p"))
        assert [os.path.basename(p) for p in paths] == ["p_d_a.svg"]
        assert "eps_b" in caplog.text

    def test_svg_deterministic(self, tmp_path):
        res = SweepResult({"x": [0.0, 1.0, 2.0], "y": [1.0, 2.0]}, {"d_a": [[1e-3, 2e-3], [3e-3, 4e-3], [5e-3, 6e-3]]})
        a = emit_plots(res, str(tmp_path / "a"))[0]
        b = emit_plots(res, str(tmp_path / "b"))[0]
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_leakage_map_plot_per_source(self, tmp_path):
        res = SweepResult({"k": [1e-3, 1e-2], "delta_ghz": [-0.1, 0.0, 0.1]},
                          {"rate_000": [[1e-6, 2e-6, 1e-6], [1e-5, 2e-4, 1e-5]],
                           "bucket_000": [[0, 0, 0], [1, 2, 1]]})
        paths = emit_plots(res, str(tmp_path / "leak"))
        assert [os.path.basename(p) for p in paths] == ["leak_leakage_000.svg"]


class TestSquaresExtraCouplings:
    BASE = {"dcc_ghz": [0.0, 0.1], "g_cc_ghz": 0.02}

    def run(self, **extra):
        return scenarios.run_squares_sweep({**self.BASE, **extra}, threads=1)[0]

    def test_extra_term_adds_to_builtin(self):
        split = self.run(g_cc_ghz=0.01, extra_couplings=[{"a": 0, "b": 4, "g_ghz": 0.01}])
        assert split.equals(self.run())

    def test_long_range_term_changes_metrics(self):
        base = self.run()
        more = self.run(extra_couplings=[{"a": 1, "b": 4, "g_ghz": 0.005}])
        assert not np.allclose(base.values["zeta_cs_right_ghz"], more.values["zeta_cs_right_ghz"], rtol=1e-6)

    def test_oscillator_terms_only_with_oscillator(self):
        p = {**self.BASE, "oscillator": {"element": "O1", "g_o_ghz": 0.1},
             "extra_couplings": [{"a": 2, "b": 5, "g_ghz": 0.01}]}
        res = scenarios.run_squares_sweep(p, threads=1)[0]
        assert res.metadata["failures"] == []
        without = self.run()
        np.testing.assert_array_equal(res.values["zeta_cc_ghz"][:, 0], without.values["zeta_cc_ghz"][:, 0])

    def test_schema(self):
        ok = {"scenario": "squares-sweep", "parameters": {**self.BASE, "extra_couplings": [{"a": 0, "b": 3, "g_ghz": 0.001}]}}
        assert validate_config(ok) == []
        bad = {"scenario": "squares-sweep", "parameters": {**self.BASE, "extra_couplings": [{"a": 0, "b": 9, "g": 0.1}]}}
        assert validate_config(bad)

    @pytest.mark.parametrize("pair", [(2, 2), (0, 5)])
    def test_bad_pair(self, pair):
        e = element_params
        with pytest.raises(ValidationError):
            scenarios.squares_spec(e("C1_U"), e("C0_L"), e("C1_U"), e("Q_A"), e("Q_B"), ("C1", "C0"),
                                   extra=[(*pair, 0.01)])
