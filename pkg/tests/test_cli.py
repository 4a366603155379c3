import csv
import json

import pytest

from platoon_hinf.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK, main
from platoon_hinf.config import KEYS, controller_to_dict
from platoon_hinf.platoon import PlatoonConfig
from platoon_hinf.synthesis import Controller

QUICK = "order = 2\nrestarts = 2\nmax_iters = 300\n"


def write(path, text):
    path.write_text(text)
    return str(path)


def controller_file(tmp_path, K, cfg, name="K.json"):
    path = tmp_path / name
    path.write_text(json.dumps(controller_to_dict(K, cfg)))
    return str(path)


def run(tmp_path, command, config_text, controller=None, sub="out"):
    cfg = write(tmp_path / f"{sub}.ini", config_text)
    out = tmp_path / sub
    argv = [command, "--config", cfg, "--out", str(out)]
    if controller:
        argv += ["--controller", controller]
    return main(argv), out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture()
def acc_file(tmp_path, acc_design):
    return controller_file(tmp_path, acc_design.controller, acc_design.cfg)


def test_synth_is_byte_identical(tmp_path):
    rc1, out1 = run(tmp_path, "synth", QUICK, sub="a")
    rc2, out2 = run(tmp_path, "synth", QUICK, sub="b")
    assert rc1 == rc2
    assert (out1 / "controller.json").read_bytes() == (out2 / "controller.json").read_bytes()
    assert (out1 / "objectives.json").read_bytes() == (out2 / "objectives.json").read_bytes()


def test_synth_outputs(tmp_path):
    rc, out = run(tmp_path, "synth", QUICK + "h = 1.5\n")
    obj = json.loads((out / "objectives.json").read_text())
    assert rc == (EXIT_OK if obj["feasible"] else EXIT_INFEASIBLE)
    for key in ("gamma_s", "gamma_t", "t_norm", "stable", "feasible", "history"):
        assert key in obj
    doc = json.loads((out / "controller.json").read_text())
    assert doc["order"] == 2 and len(doc["den"]) == 3
    if obj["stable"]:
        for name in ("S", "T", "WS_S", "WT_T"):
            assert read_csv(out / f"{name}.csv")[0].keys() == {"freq_hz", "mag_db", "phase_deg"}


def test_verify_designed_controller(tmp_path, acc_file):
    rc, out = run(tmp_path, "verify", "", acc_file)
    assert rc == EXIT_OK
    doc = json.loads((out / "stringstability.json").read_text())
    assert doc["pass"] and doc["t_norm"] <= 1 + 1e-6
    assert len(read_csv(out / "T_mag.csv")) > 100


def test_verify_failure_exit_code(tmp_path, acc_file):
    # the design is fragile towards shorter headways (see acceptance criterion 6)
    rc, out = run(tmp_path, "verify", "h = 0.5\n", acc_file)
    doc = json.loads((out / "stringstability.json").read_text())
    assert rc == (EXIT_OK if doc["pass"] else EXIT_INFEASIBLE)


def test_zero_controller_passes_with_warning(tmp_path, caplog):
    K = controller_file(tmp_path, Controller.zero(3, 0.1), PlatoonConfig())
    rc, out = run(tmp_path, "verify", "", K)
    assert rc == EXIT_OK
    assert json.loads((out / "stringstability.json").read_text())["zero_controller"]
    assert any("zero controller" in r.message for r in caplog.records)


@pytest.mark.parametrize(
    "text,controller",
    [
        ("ts = 0.2\n", True),
        ("bogus_key = 1\n", False),
        ("h = -1\n", False),
        ("scenario = ramp\n", True),
    ],
)
def test_config_errors(tmp_path, acc_file, text, controller):
    command = "simulate" if controller else "synth"
    rc, _ = run(tmp_path, command, text, acc_file if controller else None)
    assert rc == EXIT_CONFIG


def test_missing_files(tmp_path, acc_file):
    assert main(["verify", "--config", str(tmp_path / "none.ini"), "--controller", acc_file]) == EXIT_CONFIG
    rc, _ = run(tmp_path, "verify", "", str(tmp_path / "none.json"))
    assert rc == EXIT_CONFIG
    rc, _ = run(tmp_path, "verify", "")
    assert rc == EXIT_CONFIG


def test_simulate_outputs(tmp_path, acc_file):
    rc, out = run(tmp_path, "simulate", "m = 3\n", acc_file)
    assert rc == EXIT_OK
    rows = read_csv(out / "trace.csv")
    assert len(rows) == 701 * 4
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["string_stable"] and not metrics["diverged"]
    assert len(metrics["max_abs_e"]) == 3


def test_lead_scale_is_linear(tmp_path, acc_file):
    _, o1 = run(tmp_path, "simulate", "m = 3\n", acc_file, sub="one")
    _, o2 = run(tmp_path, "simulate", "m = 3\nlead_scale = 2\n", acc_file, sub="two")
    e1 = json.loads((o1 / "metrics.json").read_text())["max_abs_e"]
    e2 = json.loads((o2 / "metrics.json").read_text())["max_abs_e"]
    assert e2 == pytest.approx([2 * x for x in e1], rel=1e-9)


def test_divergence_exit_code(tmp_path):
    K = controller_file(tmp_path, Controller.from_coefficients([-50.0], [0.0, 1.0], 0.1), PlatoonConfig())
    rc, out = run(tmp_path, "simulate", "duration = 500\n", K)
    assert rc == EXIT_DIVERGED
    assert json.loads((out / "metrics.json").read_text())["diverged"]
    assert (out / "trace.csv").exists()


def test_short_duration_is_vacuous(tmp_path, acc_file):
    rc, out = run(tmp_path, "simulate", "duration = 0.1\n", acc_file)
    assert rc == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["string_stable"]
    assert any("vacuous" in n for n in metrics["notes"])


def test_single_point_sweep_equals_verify(tmp_path, acc_file):
    _, v = run(tmp_path, "verify", "h = 1.2\n", acc_file, sub="v")
    _, s = run(tmp_path, "sweep", "sweep_h = 1.2\n", acc_file, sub="s")
    rows = read_csv(s / "sweep.csv")
    assert len(rows) == 1
    doc = json.loads((v / "stringstability.json").read_text())
    assert float(rows[0]["t_norm"]) == pytest.approx(doc["t_norm"], rel=1e-10)
    assert int(rows[0]["pass"]) == int(doc["pass"])


def test_sweep_grid_is_cartesian(tmp_path, acc_file):
    rc, out = run(tmp_path, "sweep", "sweep_h = 0.8, 1.2\nsweep_tau = 0.1,0.2,0.3\n", acc_file)
    assert rc == EXIT_OK
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 6
    assert {(r["h"], r["tau"]) for r in rows} == {
        (h, t) for h in ("0.8", "1.2") for t in ("0.1", "0.2", "0.3")
    }
    assert {r["row"] for r in read_csv(out / "sweep_traces.csv")} == {str(i) for i in range(6)}


def test_help_lists_every_key(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for key in KEYS:
        assert key in text
