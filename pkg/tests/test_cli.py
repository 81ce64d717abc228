import json
from pathlib import Path

import numpy as np
import pytest

from qsyn import cli
from qsyn.lti import StateSpace, h2_norm_sq_grid, static
from qsyn.synth import build_problem
from qsyn.youla import coprime_factorize

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    doc = json.loads(out.out) if out.out.strip() else None
    return code, doc, out.err


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_check_pr_one_mode(capsys):
    code, doc, _ = run(capsys, "check-pr", CONFIGS / "one_mode.json")
    assert code == 0
    assert doc["pr"]["verdict"]
    assert max(doc["pr"]["jj_residual"], doc["pr"]["dual_residual"]) < 1e-9
    assert doc["ito_feedthrough"] == {"y_rows": True, "z_rows": True}


def test_check_pr_scaled_feedthrough(capsys, tmp_path):
    good = json.loads((CONFIGS / "one_mode.json").read_text())
    p = cli.parse_config(good).plant.sys
    # raw realization with D scaled by 1.01
    raw = {"state_space": {"A": p.A.tolist(), "B": p.B.tolist(), "C": p.C.tolist(), "D": (1.01 * p.D).tolist()},
           "partition": good["plant"]["partition"]}
    code, rep, _ = run(capsys, "check-pr", _write(tmp_path, {"plant": raw}))
    assert code == 1
    assert not rep["pr"]["verdict"]
    # the oscillator form rejects a non-orthogonal D while parsing
    good["plant"]["oqho"]["D"] = (1.01 * np.array(good["plant"]["oqho"]["D"])).tolist()
    code, _, err = run(capsys, "check-pr", _write(tmp_path, good, "scaled.json"))
    assert code == 2 and "plant" in err


def test_missing_field_names_it(capsys, tmp_path):
    doc = json.loads((CONFIGS / "one_mode.json").read_text())
    del doc["plant"]["oqho"]["R"]
    code, _, err = run(capsys, "check-pr", _write(tmp_path, doc))
    assert code == 2 and "plant.oqho.R" in err


def test_bad_json_reports_position(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"plant": ')
    code, _, err = run(capsys, "check-pr", path)
    assert code == 2 and "line 1" in err


def test_config_validation():
    doc = json.loads((CONFIGS / "one_mode.json").read_text())
    doc["plant"]["state_space"] = {"A": [], "B": [], "C": [], "D": []}
    with pytest.raises(cli.ConfigError, match="exactly one"):
        cli.parse_config(doc)
    doc = json.loads((CONFIGS / "one_mode.json").read_text())
    doc["plant"]["partition"]["m_r"] = 3
    with pytest.raises(cli.ConfigError, match="even"):
        cli.parse_config(doc)
    doc = json.loads((CONFIGS / "one_mode.json").read_text())
    doc["weights"]["W_out"] = {"preset": "bogus"}
    with pytest.raises(cli.ConfigError, match="bogus"):
        cli.parse_config(doc)
    doc = json.loads((CONFIGS / "one_mode.json").read_text())
    doc["pgd"] = {"step": 1}
    with pytest.raises(cli.ConfigError, match="step"):
        cli.parse_config(doc)


def test_usage_errors(capsys):
    assert cli.main([]) == 2
    assert cli.main(["synth-h2", str(CONFIGS / "toy_h2.json")]) == 2
    capsys.readouterr()


def test_synth_toy(capsys, tmp_path):
    out = tmp_path / "run"
    code, rep, _ = run(capsys, "synth-h2", CONFIGS / "toy_h2.json", "--out", out)
    assert code == 0
    assert rep["certificate"]["admissible"]
    assert all(rep["certificate"]["checks"].values())
    for name in ("report.json", "controller.json", "q.json", "G_freq.csv", "K_freq.csv"):
        assert (out / name).exists()
    header = (out / "K_freq.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["omega", "re_0_0", "im_0_0"] and len(header) == 9

    code, ev, _ = run(capsys, "eval", CONFIGS / "toy_h2.json", "--controller", out / "controller.json")
    assert code == 0 and ev["internally_stable"] and ev["controller_pr"]["verdict"]
    assert ev["costs"]["h2"] == pytest.approx(rep["costs"]["h2"], abs=1e-9)
    assert ev["costs"]["hinf"] == pytest.approx(rep["costs"]["hinf"], abs=1e-9)


def test_synth_overrides_are_recorded(capsys, tmp_path):
    code, rep, _ = run(capsys, "synth-h2", CONFIGS / "toy_h2.json", "--out", tmp_path,
                       "--seed", "9", "--grid-points", "60", "--max-iters", "5", "--alpha", "0.05", "--tol", "1e-6")
    assert code == 0 and rep["seed"] == 9
    assert rep["pgd"]["iterations"] <= 5


def test_synth_no_go_aborts(capsys, tmp_path):
    code, rep, _ = run(capsys, "synth-h2", CONFIGS / "nogo.json", "--out", tmp_path / "x")
    assert code == 1
    assert rep["no_go"]["positive"]
    assert "stabilize" in rep["status"]
    assert "pgd" not in rep and not (tmp_path / "x" / "report.json").exists()


def test_eval_zero_controller(capsys, tmp_path):
    # with F = L = 0 the central controller is K = 0, so E(0) = ||bT0||^2
    cfg = cli.load_config(str(CONFIGS / "toy_h2.json"))
    kfile = tmp_path / "k0.json"
    kfile.write_text(json.dumps(static(np.zeros((2, 2))).to_dict()))
    code, ev, _ = run(capsys, "eval", CONFIGS / "toy_h2.json", "--controller", kfile)
    f = coprime_factorize(cfg.plant.P22, np.zeros((2, 0)), np.zeros((0, 2)))
    prob = build_problem(cfg.plant, f, cfg.W_in, cfg.W_out, cfg.grid)
    assert code == 0
    assert ev["costs"]["h2"] == pytest.approx(h2_norm_sq_grid(prob.acl.bT0), abs=1e-12)


def test_eval_unstable_loop_warns(capsys, tmp_path):
    cfg = cli.load_config(str(CONFIGS / "nogo.json"))
    assert cfg.plant.P22.n == 2
    kfile = tmp_path / "k.json"
    k = StateSpace(-np.eye(2) + np.array([[0.0, 1.0], [-1.0, 0.0]]), 2 * np.eye(2), np.eye(2), np.zeros((2, 2)))
    kfile.write_text(json.dumps(k.to_dict()))
    code, ev, _ = run(capsys, "eval", CONFIGS / "nogo.json", "--controller", kfile)
    assert code == 1
    assert not ev["internally_stable"]
    assert "warning" in ev and np.isfinite(ev["costs"]["hinf"])


def test_eval_wrong_controller_size(capsys, tmp_path):
    kfile = tmp_path / "k.json"
    kfile.write_text(json.dumps(static(np.zeros((4, 4))).to_dict()))
    code, _, err = run(capsys, "eval", CONFIGS / "toy_h2.json", "--controller", kfile)
    assert code == 2 and "controller" in err


def test_report_sanitizes_non_finite():
    text = cli.dump_report({"b": float("inf"), "a": np.array([np.nan, 1.0])})
    assert json.loads(text) == {"a": ["nan", 1.0], "b": "inf"}
    assert text.index('"a"') < text.index('"b"')


def test_golden_report(capsys, tmp_path):
    code = cli.main(["synth-h2", str(CONFIGS / "toy_h2.json"), "--out", str(tmp_path)])
    capsys.readouterr()
    assert code == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    doc.pop("timing")
    assert cli.dump_report(doc) == (ROOT / "tests" / "golden" / "toy_h2_report.json").read_text()
