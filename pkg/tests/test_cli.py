import json

import numpy as np
import pytest

from chemowave.cli import (
    ScenarioError,
    load_scenario,
    main,
    run_scenario,
    scenario_from_dict,
    sweep,
)

SMALL_RUN = {
    "grid.L": "40.0",
    "grid.n_cells": "200",
    "params.m_plus": "0.02",
    "params.phi_plus": "1.02",
    "ic.center": "10.0",
    "ic.width": "2.0",
    "t_final": "6.0",
    "snapshots": "linear:1.0:6.0:12",
    "fit.t_min": "1.0",
    "fit.t_max": "5.0",
}


def write_cfg(tmp_path, lines, name="case.cfg"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


class TestLoadScenario:
    def test_minimal_config_gets_defaults(self, tmp_path):
        scn = load_scenario(write_cfg(tmp_path, ["regime = A"]))
        assert scn.regime.kind == "A"
        assert scn.profile_source == "neumann-evolved"
        assert scn.scheme.flux == "rusanov"
        assert scn.params.alpha == 1.0
        assert scn.params.d_plus == pytest.approx(0.0)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = write_cfg(tmp_path, ["regime = A", "this line has no equals"])
        with pytest.raises(ScenarioError, match=":2"):
            load_scenario(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_cfg(tmp_path, ["regime = A", "grid.spacing = 1"])
        with pytest.raises(ScenarioError, match="grid.spacing"):
            load_scenario(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = write_cfg(tmp_path, ["regime = A", "regime = B"])
        with pytest.raises(ScenarioError, match="duplicate"):
            load_scenario(path)

    def test_regime_profile_pairing(self):
        with pytest.raises(ScenarioError, match="pairs with"):
            scenario_from_dict({"regime": "A", "profile": "self-similar"})
        with pytest.raises(ScenarioError, match="pairs with"):
            scenario_from_dict({"regime": "B", "profile": "neumann-evolved"})
        # B with distinct boundary density auto-selects self-similar
        scn = scenario_from_dict({"regime": "B", "ic.rho_left": "1.1", "ic.center": "5.0"})
        assert scn.profile_source == "self-similar"
        scn = scenario_from_dict({"regime": "B"})
        assert scn.profile_source == "constant"

    def test_admissibility_rejected_with_condition_named(self):
        with pytest.raises(ScenarioError, match="positivity condition"):
            scenario_from_dict({
                "regime": "A",
                "params.mu": "2.0",
                "params.pressure.gamma": "1.0",
            })

    def test_correction_support_must_fit(self):
        with pytest.raises(ScenarioError, match="support"):
            scenario_from_dict({"regime": "A", "epsilon0": "0.01", "grid.L": "40.0"})

    def test_missing_file(self):
        with pytest.raises(ScenarioError):
            load_scenario("/nonexistent/path.cfg")


@pytest.fixture(scope="module")
def small_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    scn = scenario_from_dict(dict(SMALL_RUN, regime="A", output_dir=str(out)))
    return run_scenario(scn), out


class TestRunScenario:
    def test_manifest_and_artifacts(self, small_result):
        result, out = small_result
        manifest = json.loads((out / "manifest.json").read_text())
        for name in manifest["artifacts"]:
            assert (out / name).exists()
        assert manifest["config_hash"] == result.scenario.config_hash()
        assert manifest["n_steps"] > 0

    def test_decay_report_rows_present(self, small_result):
        result, out = small_result
        body = (out / "decay_report.csv").read_text().splitlines()
        header = body[0].split(",")
        assert header == [
            "series_name", "predicted_exponent", "fitted_exponent", "r2",
            "t_min", "t_max", "tolerance", "status",
        ]
        names = {line.split(",")[0] for line in body[1:]}
        assert {"Phi_L2", "Phi_x_L2", "Phi_xx_L2", "psi_L2", "psi_x_L2",
                "psi_xx_L2", "zeta_L2", "zeta_x_L2",
                "rho_gap_sup", "m_gap_sup", "phi_gap_sup"} <= names

    def test_csv_round_trip(self, small_result):
        _, out = small_result
        rows = np.genfromtxt(out / "norms.csv", delimiter=",", names=True,
                             dtype=None, encoding="utf-8")
        assert rows.size > 0
        assert set(rows.dtype.names) == {"t", "name", "value"}
        snap = (out / "snapshot_0000.csv").read_text().splitlines()
        assert snap[0].startswith("# t = ")
        assert snap[3] == "x,rho,m,phi"
        parsed = np.array([[float(v) for v in line.split(",")] for line in snap[4:]])
        assert parsed.shape[1] == 4

    def test_determinism(self, tmp_path):
        outs = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            scn = scenario_from_dict(dict(SMALL_RUN, regime="A", output_dir=str(out)))
            run_scenario(scn)
            outs.append(out)
        for name in ("norms.csv", "decay_report.csv", "snapshot_0000.csv",
                     "mass_identity.csv", "weighted.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_equilibrium_scenario_at_floor(self, tmp_path):
        scn = scenario_from_dict({
            "regime": "B",
            "ic.family": "constant",
            "grid.L": "40.0",
            "grid.n_cells": "200",
            "t_final": "5.0",
            "snapshots": "linear:0.5:5.0:11",
            "fit.t_min": "0.5",
            "fit.t_max": "4.0",
            "output_dir": str(tmp_path / "eq"),
        })
        result = run_scenario(scn)
        for rep in result.reports:
            assert rep.status == "at-floor"


class TestSweep:
    def test_epsilon_sweep(self, tmp_path):
        base = scenario_from_dict(dict(
            SMALL_RUN, regime="A", output_dir=str(tmp_path / "sweep"),
            **{"t_final": "3.0", "snapshots": "linear:0.5:3.0:11",
               "fit.t_min": "0.5", "fit.t_max": "2.5"},
        ))
        statuses = sweep(base, "epsilon0", ["0.05", "0.1"])
        assert statuses == {"0.05": "ok", "0.1": "ok"}
        combined = (tmp_path / "sweep" / "sweep_summary.csv").read_text().splitlines()
        assert combined[0].startswith("epsilon0,")
        assert any(line.startswith("0.05,Phi_L2") for line in combined[1:])

    def test_empty_values_rejected(self, tmp_path):
        base = scenario_from_dict(dict(SMALL_RUN, regime="A",
                                       output_dir=str(tmp_path / "s")))
        with pytest.raises(ScenarioError, match="non-empty"):
            sweep(base, "epsilon0", [])

    def test_child_failure_reported_and_continues(self, tmp_path):
        base = scenario_from_dict(dict(SMALL_RUN, regime="A",
                                       output_dir=str(tmp_path / "s")))
        statuses = sweep(base, "params.mu", ["1.0", "-3.0"])
        assert statuses["1.0"] == "ok"
        assert statuses["-3.0"].startswith("error")

    def test_unsweepable_axis(self, tmp_path):
        base = scenario_from_dict(dict(SMALL_RUN, regime="A",
                                       output_dir=str(tmp_path / "s")))
        with pytest.raises(ScenarioError, match="sweepable"):
            sweep(base, "output_dir", ["a"])

    def test_amplitude_sweep_exponents_stable(self, tmp_path):
        # in the linear regime the fitted exponents barely move with the
        # perturbation amplitude
        out = tmp_path / "amp"
        base = scenario_from_dict(dict(
            SMALL_RUN, regime="A", output_dir=str(out),
            **{"grid.n_cells": "400", "t_final": "12.0",
               "snapshots": "linear:1.0:12.0:23",
               "fit.t_min": "2.0", "fit.t_max": "10.0",
               "params.m_plus": "0.0", "params.phi_plus": "1.0"},
        ))
        statuses = sweep(base, "ic.amplitude", ["0.01", "0.02"])
        assert all(v == "ok" for v in statuses.values())
        fitted = {}
        for line in (out / "sweep_summary.csv").read_text().splitlines()[1:]:
            amp, name, value, _ = line.split(",")
            if value != "nan":
                fitted.setdefault(name, {})[amp] = float(value)
        compared = 0
        for name, vals in fitted.items():
            if len(vals) == 2:
                a, b = vals.values()
                assert abs(a - b) <= 0.05, (name, vals)
                compared += 1
        assert compared >= 5


class TestMain:
    def test_check_verb(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, ["regime = A"])
        assert main(["check", str(cfg)]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, ["regime = C"])
        assert main(["check", str(cfg)]) == 2

    def test_run_verb(self, tmp_path, capsys):
        lines = [f"{k} = {v}" for k, v in dict(
            SMALL_RUN, regime="A", output_dir=str(tmp_path / "out"),
        ).items()]
        cfg = write_cfg(tmp_path, lines)
        assert main(["run", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "run complete" in out

    def test_profile_verb(self, tmp_path, capsys):
        lines = [f"{k} = {v}" for k, v in dict(
            SMALL_RUN, regime="B", output_dir=str(tmp_path / "out"),
            **{"ic.rho_left": "1.05", "ic.center": "5.0", "ic.width": "0.5"},
        ).items()]
        cfg = write_cfg(tmp_path, lines)
        assert main(["profile", str(cfg)]) == 0
        body = (tmp_path / "out" / "profile.csv").read_text().splitlines()
        assert body[0] == "xi,rho_bar"
