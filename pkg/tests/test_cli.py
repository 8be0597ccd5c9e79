import json
from fractions import Fraction

import pytest

from fockdyn.cli import main
from fockdyn.dynamics import DiagnosticReport
from fockdyn.onebody import DeformationGroup
from fockdyn.scenarios import emit_plotdata, factor_type, preset, run_scenario


def load_summary(out, name):
    return json.loads((out / f"{name}_report.json").read_text())


def test_factor_types():
    assert factor_type(DeformationGroup.trivial())["type"] == "II_1"
    rec = factor_type(DeformationGroup.powers(Fraction(1, 3), 2))
    assert rec["type"] == "III_1/3"
    rec = factor_type(DeformationGroup.rationals_generated((2, 3, 5), 1))
    assert rec["type"] == "III_1" and "truncated" in rec["note"]
    assert "not computed" in rec["status"]
    assert "I_infinity" in rec["creation_algebra_note"]


def test_rotation_preset_pattern(tmp_path):
    code, summary = run_scenario(preset("rotation"), out_dir=tmp_path, plots=False)
    assert code == 0
    gates = {g["name"]: g for g in summary["gates"]}
    assert gates["ue_decay"]["passed"] and gates["uwm_bounded_away"]["passed"] and gates["fixed_point"]["passed"]
    assert summary["factor_type"]["type"] == "II_1"
    assert load_summary(tmp_path, "rotation")["passed"] is True


def test_catmap_preset_pattern(tmp_path):
    code, summary = run_scenario(preset("catmap"), out_dir=tmp_path, plots=False)
    assert code == 0
    assert summary["factor_type"]["type"] == "III_1/2"
    um = [r["value"] for r in summary["report"]["rows"] if r["statistic"] == "UM" and r["N"] == 1000]
    assert um and max(um) <= 1e-2
    assert "residuals" in summary["extras"]["qiso"]


def test_qshift_skips_qiso(tmp_path, capsys):
    assert main(["preset", "qshift", "--out", str(tmp_path), "--no-plots"]) == 0
    out = capsys.readouterr().out
    assert "qiso skipped" in out and "sqrt(2) - 1" in out
    summary = load_summary(tmp_path, "qshift")
    assert "skipped" in summary["extras"]["qiso"]
    assert all(g["name"] != "qiso" for g in summary["gates"])


def test_chacon_preset_writes_stage_csv(tmp_path):
    code, summary = run_scenario(preset("chacon"), out_dir=tmp_path, plots=False)
    assert code == 0
    assert (tmp_path / "chacon_stage.csv").read_text().startswith("piece_index,src_lo,src_hi,translation")
    ces = summary["extras"]["chacon"]["cesaro_abs_correlation"]
    assert ces[0] > ces[1] > ces[2]


def test_gate_failure_exit_code(tmp_path):
    # an impossible decay threshold must flip the exit status to 1
    rc = main(["preset", "rotation", "--out", str(tmp_path), "--no-plots", "--tolerance", "decay=1e-12"])
    assert rc == 1
    summary = load_summary(tmp_path, "rotation")
    assert summary["passed"] is False
    assert any(not g["passed"] for g in summary["gates"])


def test_config_and_budget_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nname = x\n[classical]\nkind = rotation\n[diagnostics]\nschedule = 10, 1\n")
    assert main(["run", str(bad)]) == 2
    assert "config" in capsys.readouterr().err
    assert main(["preset", "rotation", "--tolerance", "nope=1"]) == 2
    big = tmp_path / "big.ini"
    big.write_text("[scenario]\nname = big\n[classical]\nkind = chacon\nstage = 60\n[diagnostics]\nschedule = 10\n")
    assert main(["run", str(big), "--out", str(tmp_path)]) == 2
    assert "budget exceeded" in capsys.readouterr().err


def test_emit_plotdata(tmp_path):
    rep = DiagnosticReport([10, 100])
    for w in ("a", "b", "c"):
        for stat in ("UE", "UWM", "UM"):
            for state in ("vacuum", "xi"):
                rep.add(stat, w, state, [0.5, 0.25] if state == "xi" else [0.1, 0.2])
    files = emit_plotdata(rep, tmp_path / "pd", "demo")
    assert len(files) == 9
    text = (tmp_path / "pd" / "demo_UM_b.csv").read_text()
    # max over states
    assert text == "N,value\n10,0.5\n100,0.25\n"
    with pytest.raises(ValueError):
        emit_plotdata(DiagnosticReport([]), tmp_path / "empty", "demo")
    assert not (tmp_path / "empty").exists()


def test_plots_rendered_and_deterministic(tmp_path):
    cfg = preset("shift")
    cfg.schedule = [10, 100]
    run_scenario(cfg, out_dir=tmp_path / "a", plots=True)
    run_scenario(cfg, out_dir=tmp_path / "b", plots=True)
    pngs = sorted((tmp_path / "a" / "plots").glob("*.png"))
    assert pngs
    for p in pngs:
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        assert p.read_bytes() == (tmp_path / "b" / "plots" / p.name).read_bytes()


def test_gram_command(capsys):
    assert main(["gram", "--n", "2", "--q", "1/3", "--d", "2", "--exact"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["gram"][1][2] == "1/3"
    assert main(["gram", "--n", "1", "--q", "0.5", "--format", "csv"]) == 0
    assert capsys.readouterr().out == "1.0,0.0\n0.0,1.0\n"


def test_check_qiso_command(tmp_path, capsys):
    assert main(["check-qiso", "--q", "0.2", "--letters", "2", "--cutoff", "4", "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "qiso.json").read_text())
    assert {r["residual_name"] for r in rows} >= {"v_isometry", "r_fixedpoint", "theta_qccr"}
    capsys.readouterr()
    assert main(["check-qiso", "--q", "0.42"]) == 2
    assert "sqrt(2) - 1" in capsys.readouterr().err


@pytest.mark.parametrize("scenario,key", [("rotation", "lower_bound"), ("chacon", "heights"), ("catmap", "bounds")])
def test_witness_command(scenario, key, capsys):
    assert main(["witness", "--scenario", scenario]) == 0
    assert key in json.loads(capsys.readouterr().out)


def test_witness_unknown_scenario():
    assert main(["witness", "--scenario", "baker"]) == 2


def test_write_config_then_run(tmp_path):
    ini = tmp_path / "shift.ini"
    assert main(["preset", "shift", "--write-config", str(ini)]) == 0
    assert main(["run", str(ini), "--out", str(tmp_path / "o"), "--format", "csv", "--no-plots", "--seed", "4"]) == 0
    assert (tmp_path / "o" / "shift_report.csv").exists()
    assert not (tmp_path / "o" / "shift_report.json").exists()
