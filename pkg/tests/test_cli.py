import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from muskat.cli import main
from muskat.curve import Curve, write_snapshot
from muskat.experiment import (
    SpecError,
    dump_spec,
    emit_plot_data,
    execute,
    load_spec,
    parse_spec,
    sweep,
    thread_budget,
)

DECAY = {
    "N": 64,
    "dt": 1e-2,
    "t_end": 0.1,
    "initial": {"kind": "single_mode", "k": 2, "amplitude": 1e-4},
    "params": {"mu1": 1, "mu2": 1, "rho1": 0, "rho2": 1, "kappa": 1, "g": 1},
}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_minimal_spec_fills_defaults(tmp_path):
    spec = load_spec(write_json(tmp_path / "c.json", {"N": 256, "dt": 1e-3, "t_end": 0.1, "initial": "flat", "params": {"g": 2.0}}))
    assert spec.scheme == "rk4" and spec.eps == 0.0 and spec.params.mu1 == 1.0 and spec.params.g == 2.0
    assert spec.initial.kind == "flat"


def test_odd_n_rejected_naming_field(tmp_path):
    with pytest.raises(SpecError, match="N"):
        load_spec(write_json(tmp_path / "c.json", {"N": 255}))


@pytest.mark.parametrize("data, field", [
    ({"colour": 1}, "colour"),
    ({"params": {"kappa": -1}}, "kappa"),
    ({"params": {"viscosity": 1}}, "viscosity"),
    ({"dt": 0.03, "t_end": 0.3, "output_every": 4}, "output_every"),
])
def test_bad_specs_rejected(data, field):
    with pytest.raises(SpecError, match=field):
        parse_spec(data)


def test_missing_or_invalid_file(tmp_path):
    with pytest.raises(SpecError, match="not found"):
        load_spec(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(SpecError, match="JSON"):
        load_spec(tmp_path / "bad.json")


def test_resolved_config_round_trips(tmp_path):
    spec = parse_spec({**DECAY, "t_end": 0.02})
    status, out = execute(spec, tmp_path / "run")
    assert status == 0
    resolved = load_spec(out / "resolved-config.json")
    assert resolved == spec.resolved()
    assert resolved.dt == 1e-2 and resolved.output_every == 2
    dump_spec(resolved, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == (out / "resolved-config.json").read_bytes()


def test_flat_run_artifacts(tmp_path):
    status, out = execute(parse_spec({"N": 32, "dt": 1e-2, "t_end": 0.05, "initial": "flat", "output_every": 1}), tmp_path / "flat")
    assert status == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert summary["max_displacement"] <= 1e-12
    assert len(list((out / "snapshots").glob("*.csv"))) == 6
    rows = read_csv(out / "diagnostics.csv")
    assert list(rows[0]) == ["t", "sup_F", "min_sigma", "H3_norm", "tangent_dev", "residual", "b_t", "mode_amplitude"]
    assert len(rows) == 6

    plot = emit_plot_data(out)
    files = sorted(p.name for p in plot.iterdir())
    assert len(files) == 6 + 1 + 1
    manifest = json.loads((plot / "manifest.json").read_text())
    assert {f["path"] for f in manifest["files"]} == set(files) - {"manifest.json"}
    for name in files:
        if name.startswith("profile_"):
            assert all(float(r["z2"]) == 0.0 for r in read_csv(plot / name))


def test_decay_run_amplitude_and_plot_slope(tmp_path):
    status, out = execute(parse_spec(DECAY), tmp_path / "decay")
    assert status == 0
    amp = [float(r["mode_amplitude"]) for r in read_csv(out / "diagnostics.csv")]
    assert all(b < a for a, b in zip(amp, amp[1:]))
    plot = emit_plot_data(out)
    rows = [r for r in read_csv(plot / "diagnostics_long.csv") if r["quantity"] == "log_mode_amplitude"]
    t = np.array([float(r["t"]) for r in rows])
    y = np.array([float(r["value"]) for r in rows])
    slope = np.polyfit(t, y, 1)[0]
    # linearized rate |k| kappa g drho / (mu1 + mu2) = 1
    assert slope == pytest.approx(-1.0, rel=1e-2)


def test_unstable_run_flags_initial_sigma(tmp_path):
    data = {**DECAY, "t_end": 0.02, "params": {"rho1": 1.0, "rho2": 0.0}}
    status, out = execute(parse_spec(data), tmp_path / "rt")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rt_unstable_initial"] and summary["min_sigma_initial"] < 0


def test_failed_run_writes_summary(tmp_path, monkeypatch):
    import muskat.experiment as ex

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(ex, "run", boom)
    status, out = execute(parse_spec({"N": 16, "t_end": 0.01}), tmp_path / "fail")
    assert status == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "failed" and "solver exploded" in summary["reason"]


def test_diagnostics_are_byte_identical_across_runs(tmp_path):
    spec = parse_spec({**DECAY, "t_end": 0.03})
    _, a = execute(spec, tmp_path / "a")
    _, b = execute(spec, tmp_path / "b")
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()


def test_emit_plot_data_names_missing_inputs(tmp_path):
    with pytest.raises(FileNotFoundError, match="diagnostics.csv"):
        emit_plot_data(tmp_path)


def test_from_file_initial_curve(tmp_path):
    c = Curve.from_functions(32, q2=lambda a: 0.1 * np.cos(a))
    path = write_snapshot(c, tmp_path / "init.csv")
    spec = parse_spec({"N": 64, "t_end": 0.0, "initial": {"kind": "from_file", "path": str(path)}})
    built = spec.initial.build(64)
    assert np.allclose(built.q2, 0.1 * np.cos(built.alpha), atol=1e-14)
    with pytest.raises(SpecError, match="initial"):
        parse_spec({"initial": {"kind": "from_file", "path": str(tmp_path / "missing.csv")}})


def test_thread_budget(monkeypatch):
    monkeypatch.setenv("MUSKAT_THREADS", "3")
    assert thread_budget() == 3
    monkeypatch.setenv("MUSKAT_THREADS", "0")
    assert thread_budget() >= 1
    monkeypatch.setenv("MUSKAT_THREADS", "many")
    with pytest.raises(SpecError):
        thread_budget()


def test_sweep_runs_each_value(tmp_path):
    base = parse_spec({**DECAY, "t_end": 0.02})
    rows = sweep(base, "params.rho2", [1.0, 2.0], tmp_path / "sw", workers=1)
    assert [r["status"] for r in rows] == ["completed", "completed"]
    assert len(read_csv(tmp_path / "sw" / "sweep.csv")) == 2


def test_cli_run_with_overrides(tmp_path):
    cfg = write_json(tmp_path / "c.json", DECAY)
    res = CliRunner().invoke(main, ["run", "--config", str(cfg), "--n", "32", "--t-end", "0.02",
                                    "--scheme", "euler", "--out", str(tmp_path / "o"), "--plot-data"])
    assert res.exit_code == 0, res.output
    resolved = json.loads((tmp_path / "o" / "resolved-config.json").read_text())
    assert resolved["N"] == 32 and resolved["scheme"] == "euler" and resolved["t_end"] == 0.02
    assert (tmp_path / "o" / "plot" / "manifest.json").exists()


def test_cli_rejects_odd_n(tmp_path):
    res = CliRunner().invoke(main, ["run", "--n", "33", "--out", str(tmp_path / "o")])
    assert res.exit_code != 0
    assert "N" in res.output


def test_cli_diagnose_snapshot(tmp_path):
    c = Curve.from_functions(32, q2=lambda a: 0.1 * np.cos(a))
    snap = write_snapshot(c, tmp_path / "s.csv", time=0.5)
    res = CliRunner().invoke(main, ["diagnose", str(snap), "--out", str(tmp_path / "d"), "--profiles"])
    assert res.exit_code == 0, res.output
    rec = json.loads((tmp_path / "d" / "record.json").read_text())
    assert rec["t"] == 0.5 and rec["min_sigma"] > 0
    prof = read_csv(tmp_path / "d" / "profiles.csv")
    assert len(prof) == 32 and min(float(r["F_max"]) for r in prof) > 0


def test_cli_sweep(tmp_path):
    cfg = write_json(tmp_path / "c.json", {**DECAY, "t_end": 0.02})
    res = CliRunner().invoke(main, ["sweep", "--config", str(cfg), "--param", "eps=0,0.001",
                                    "--out", str(tmp_path / "sw"), "--workers", "1"])
    assert res.exit_code == 0, res.output
    assert "eps=0.001" in res.output
