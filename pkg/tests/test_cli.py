from __future__ import annotations

import json
import re

import pytest

from leveldecay.cli import (
    ConfigError,
    main,
    parse_scenario_text,
    sweep_point,
)
from leveldecay.coupling import CouplingFamily

BASE_CONFIG = """
# minimal valid scenario
name = demo
model.e1 = 0.0
model.e2 = 1.0
coupling.family = 3d-exp
coupling.g_sq = 2.0
coupling.lambda_cutoff = 1.0
"""

FLOAT_RE = re.compile(r"^-?\d\.\d{16}e[+-]\d{2,3}$")


def _write(tmp_path, text, name="scen.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestParsing:
    def test_minimal_config(self):
        scen = parse_scenario_text(BASE_CONFIG)
        assert scen.name == "demo"
        assert scen.params.e1 == 0.0 and scen.params.e2 == 1.0
        assert scen.params.coupling.family is CouplingFamily.THREE_DIM_EXP
        assert scen.horizon == pytest.approx(200.0)  # default 200 / gap
        assert scen.series_points == 2000
        assert scen.sweep is None

    def test_full_config(self):
        scen = parse_scenario_text(
            BASE_CONFIG
            + """
quadrature.abs_tol = 1e-9
quadrature.rel_tol = 1e-7
quadrature.max_subdivisions = 500
quadrature.pv_window = 0.25
quadrature.tail_cut = 50
horizon = 80
series.points = 401
volterra.step = 0.02
output_dir = results
sweep.parameter = g_sq
sweep.values = 0.5, 0.9, 1.1, 2.0
"""
        )
        assert scen.quadrature.abs_tol == 1e-9
        assert scen.quadrature.max_subdivisions == 500
        assert scen.horizon == 80.0
        assert scen.series_points == 401
        assert scen.volterra_step == 0.02
        assert scen.output_dir.name == "results"
        assert scen.sweep.parameter == "g_sq"
        assert scen.sweep.values == (0.5, 0.9, 1.1, 2.0)

    @pytest.mark.parametrize(
        "mutation",
        [
            "",  # missing everything
            BASE_CONFIG.replace("name = demo", ""),
            BASE_CONFIG.replace("model.e2 = 1.0", "model.e2 = -1.0"),
            BASE_CONFIG.replace("3d-exp", "4d-exp"),
            BASE_CONFIG.replace("coupling.g_sq = 2.0", "coupling.g_sq = -1"),
            BASE_CONFIG + "nonsense_key = 3\n",
            BASE_CONFIG + "sweep.parameter = g_sq\n",  # values missing
            BASE_CONFIG + "sweep.parameter = mass\nsweep.values = 1\n",
            BASE_CONFIG + "horizon = -5\n",
            BASE_CONFIG + "model.e1 = oops\n",
            BASE_CONFIG + "name = twice\n",  # duplicate key
        ],
    )
    def test_invalid_configs_rejected(self, mutation):
        with pytest.raises(ConfigError):
            parse_scenario_text(mutation)

    def test_comments_and_blank_lines_ignored(self):
        scen = parse_scenario_text(BASE_CONFIG + "\n  # trailing comment\n\n")
        assert scen.name == "demo"


class TestSpectrumCommand:
    def test_writes_artifacts(self, tmp_path):
        cfg = _write(tmp_path, BASE_CONFIG)
        out = tmp_path / "out"
        assert main(["spectrum", str(cfg), "--out", str(out)]) == 0
        density = (out / "demo_density.csv").read_text().splitlines()
        assert density[0] == "lambda,rho"
        for cell in density[1].split(","):
            assert FLOAT_RE.match(cell), cell
        summary = json.loads((out / "demo_spectral.json").read_text())
        assert set(summary) == {
            "e0", "weight", "threshold_lhs", "threshold_rhs",
            "normalization_defect", "degenerate",
        }
        assert summary["e0"] == pytest.approx(-0.2847792477167630, abs=1e-9)
        assert 0.0 < summary["weight"] < 1.0

    def test_divergent_threshold_encoded_as_null(self, tmp_path):
        cfg = _write(tmp_path, BASE_CONFIG.replace("3d-exp", "2d-exp"))
        out = tmp_path / "out"
        assert main(["spectrum", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "demo_spectral.json").read_text())
        assert summary["threshold_rhs"] is None

    def test_below_threshold_null_eigenvalue(self, tmp_path):
        cfg = _write(tmp_path, BASE_CONFIG.replace("coupling.g_sq = 2.0", "coupling.g_sq = 0.3"))
        out = tmp_path / "out"
        assert main(["spectrum", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "demo_spectral.json").read_text())
        assert summary["e0"] is None and summary["weight"] == 0.0

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = _write(tmp_path, BASE_CONFIG.replace("model.e2 = 1.0", "model.e2 = -2"))
        out = tmp_path / "out"
        assert main(["spectrum", str(cfg), "--out", str(out)]) == 3
        err = capsys.readouterr().err
        assert err.startswith("error: config:") and err.count("\n") == 1
        assert not list(out.glob("*.csv"))

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["spectrum", str(tmp_path / "nope.cfg")]) == 3

    def test_determinism_across_runs(self, tmp_path):
        cfg = _write(tmp_path, BASE_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["spectrum", str(cfg), "--out", str(out1)]) == 0
        assert main(["spectrum", str(cfg), "--out", str(out2)]) == 0
        for name in ("demo_density.csv", "demo_spectral.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


DECAY_CONFIG = BASE_CONFIG + "horizon = 10\nseries.points = 51\n"


class TestDecayCommand:
    def test_writes_both_series_and_summary(self, tmp_path):
        cfg = _write(tmp_path, DECAY_CONFIG)
        out = tmp_path / "out"
        assert main(["decay", str(cfg), "--out", str(out)]) == 0
        spectral = (out / "demo_spectral.csv").read_text().splitlines()
        volterra = (out / "demo_volterra.csv").read_text().splitlines()
        assert spectral[0] == volterra[0] == "t,re_c,im_c,p"
        assert len(spectral) == len(volterra) == 52
        # identical time columns
        t_s = [line.split(",")[0] for line in spectral[1:]]
        t_v = [line.split(",")[0] for line in volterra[1:]]
        assert t_s == t_v
        summary = json.loads((out / "demo_decay.json").read_text())
        assert set(summary) == {"p_infinity", "gamma_estimate", "max_deviation_vs_volterra"}
        assert summary["max_deviation_vs_volterra"] <= 1e-3
        assert summary["p_infinity"] == pytest.approx(0.2016841067692331, abs=1e-8)

    def test_zero_coupling_stays_excited(self, tmp_path):
        cfg = _write(
            tmp_path, DECAY_CONFIG.replace("coupling.g_sq = 2.0", "coupling.g_sq = 0.0")
        )
        out = tmp_path / "out"
        assert main(["decay", str(cfg), "--out", str(out)]) == 0
        for name in ("demo_spectral.csv", "demo_volterra.csv"):
            rows = (out / name).read_text().splitlines()[1:]
            assert all(float(r.split(",")[3]) == pytest.approx(1.0, abs=1e-9) for r in rows)
        summary = json.loads((out / "demo_decay.json").read_text())
        assert summary["p_infinity"] == 1.0

    def test_two_dim_survives_with_positive_limit(self, tmp_path):
        cfg = _write(
            tmp_path,
            DECAY_CONFIG.replace("3d-exp", "2d-exp").replace(
                "coupling.g_sq = 2.0", "coupling.g_sq = 0.5"
            ),
        )
        out = tmp_path / "out"
        assert main(["decay", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "demo_decay.json").read_text())
        assert summary["p_infinity"] > 0.0


class TestSweepCommand:
    SWEEP_CONFIG = BASE_CONFIG + "sweep.parameter = g_sq\nsweep.values = 0.5, 0.9, 1.1, 2.0\n"

    def test_threshold_pattern(self, tmp_path):
        cfg = _write(tmp_path, self.SWEEP_CONFIG)
        out = tmp_path / "out"
        assert main(["sweep", str(cfg), "--out", str(out)]) == 0
        rows = (out / "demo_sweep.csv").read_text().splitlines()
        assert rows[0] == "sweep_value,threshold_rhs,exists,e0,weight,p_infinity"
        exists = [r.split(",")[2] for r in rows[1:]]
        assert exists == ["false", "false", "true", "true"]

    def test_two_dim_always_exists(self, tmp_path):
        cfg = _write(
            tmp_path,
            self.SWEEP_CONFIG.replace("3d-exp", "2d-exp").replace(
                "sweep.values = 0.5, 0.9, 1.1, 2.0", "sweep.values = 0.001, 0.1, 1.0"
            ),
        )
        out = tmp_path / "out"
        assert main(["sweep", str(cfg), "--out", str(out)]) == 0
        rows = (out / "demo_sweep.csv").read_text().splitlines()[1:]
        assert all(r.split(",")[2] == "true" for r in rows)
        assert all(r.split(",")[1] == "inf" for r in rows)

    def test_marginal_point_skipped_with_note(self, tmp_path, capsys):
        cfg = _write(
            tmp_path,
            self.SWEEP_CONFIG.replace("sweep.values = 0.5, 0.9, 1.1, 2.0", "sweep.values = 1.0"),
        )
        out = tmp_path / "out"
        assert main(["sweep", str(cfg), "--out", str(out)]) == 0
        assert "skipped" in capsys.readouterr().err
        rows = (out / "demo_sweep.csv").read_text().splitlines()[1:]
        assert rows[0].split(",")[2] == "skipped"
        assert rows[0].split(",")[3] == ""

    def test_parallel_matches_serial(self, tmp_path):
        cfg = _write(tmp_path, self.SWEEP_CONFIG)
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        assert main(["sweep", str(cfg), "--out", str(out1), "--jobs", "1"]) == 0
        assert main(["sweep", str(cfg), "--out", str(out2), "--jobs", "2"]) == 0
        assert (out1 / "demo_sweep.csv").read_bytes() == (out2 / "demo_sweep.csv").read_bytes()

    def test_sweep_without_spec_rejected(self, tmp_path):
        cfg = _write(tmp_path, BASE_CONFIG)
        assert main(["sweep", str(cfg), "--out", str(tmp_path / "out")]) == 3

    def test_weight_reported_as_data_on_two_dim_grid(self):
        scen = parse_scenario_text(
            BASE_CONFIG.replace("3d-exp", "2d-exp")
            + "sweep.parameter = g_sq\nsweep.values = 0.1, 0.3, 0.6\n"
        )
        rows = [sweep_point(scen, v) for v in scen.sweep.values]
        weights = [r["weight"] for r in rows]
        assert all(0.0 < w < 1.0 for w in weights)
        # observed monotone increase; reported as data, never asserted in-library
        assert weights == sorted(weights)


class TestVerifyCommand:
    # run_matrix itself is exercised (twice) by the acceptance suite; here we
    # only check the command wiring: printed lines, report path, exit codes.
    def _fake_results(self, all_pass):
        from leveldecay.verification import CriterionResult

        return [
            CriterionResult(1, "alpha", True, "ok"),
            CriterionResult(2, "beta", all_pass, "ok" if all_pass else "broken"),
        ]

    def test_prints_lines_and_exits_zero(self, tmp_path, capsys, monkeypatch):
        import leveldecay.verification as verification

        monkeypatch.setattr(
            verification, "run_matrix", lambda out_dir: self._fake_results(True)
        )
        assert main(["verify", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "criterion 1 [PASS] alpha" in out
        assert "criterion 2 [PASS] beta" in out

    def test_failing_criterion_exits_two(self, tmp_path, capsys, monkeypatch):
        import leveldecay.verification as verification

        monkeypatch.setattr(
            verification, "run_matrix", lambda out_dir: self._fake_results(False)
        )
        assert main(["verify", "--out", str(tmp_path)]) == 2
        assert "criterion 2 [FAIL] beta" in capsys.readouterr().out


class TestFlags:
    def test_horizon_and_tol_overrides(self, tmp_path):
        cfg = _write(tmp_path, DECAY_CONFIG)
        out = tmp_path / "out"
        rc = main([
            "decay", str(cfg), "--out", str(out), "--horizon", "5", "--tol", "1e-9",
        ])
        assert rc == 0
        rows = (out / "demo_spectral.csv").read_text().splitlines()[1:]
        assert float(rows[-1].split(",")[0]) == pytest.approx(5.0)

    def test_level_gap_sweep(self, tmp_path):
        cfg = _write(
            tmp_path,
            BASE_CONFIG.replace("coupling.g_sq = 2.0", "coupling.g_sq = 1.5")
            + "sweep.parameter = level_gap\nsweep.values = 1.2, 1.8\n",
        )
        out = tmp_path / "out"
        assert main(["sweep", str(cfg), "--out", str(out)]) == 0
        rows = (out / "demo_sweep.csv").read_text().splitlines()[1:]
        assert [r.split(",")[2] for r in rows] == ["true", "false"]
