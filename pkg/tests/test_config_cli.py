import csv
import json
import math

import pytest

from oldroyd1d import cli
from oldroyd1d.config import RunConfig, load_config, parse_config, serialize_config
from oldroyd1d.errors import ValidationError

MINIMAL = """
[PhysParams]
gamma = 1.4
mu = 1
a = 0.5
tau = 0.1

[GridSpec]
N = 512
L = pi

[StepControl]
t_end = 1

[InitialDataSpec]
amplitude = 1e-3
"""


def test_minimal_config_echoes_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.grid.L == math.pi and cfg.grid.N == 512
    assert cfg.phys.B == 1.0 and cfg.phys.G is None
    echo = cfg.echo()
    assert echo["StepControl"]["cfl"] == 0.45
    assert echo["Output"]["cadence"] == 20.0
    assert cfg.warnings() == []


def test_out_of_range_slip_parameter():
    with pytest.raises(ValidationError, match=r"PhysParams\.a: a must lie in \[-1,1\]"):
        parse_config("[PhysParams]\na = 1.5\n")


def test_regime_warning_accepted():
    cfg = parse_config("[PhysParams]\ntau = 0.5\nmu = 0.6\n")
    assert cfg.phys.tau == 0.5
    assert len(cfg.warnings()) == 1 and "tau" in cfg.warnings()[0]


@pytest.mark.parametrize(
    "text,match",
    [
        ("[PhysParams]\nnu = 1\n", "PhysParams.nu: unknown key"),
        ("[Physics]\nmu = 1\n", "unknown section"),
        ("[GridSpec]\nN = 12.5\n", "GridSpec.N"),
        ("[GridSpec]\nN = 4\n", "N must be >= 8"),
        ("[StepControl]\ncfl = 1.5\n", "cfl"),
        ("[InitialDataSpec]\nfamily = triangle\n", "family"),
        ("[Output]\ncadence = 0.1\n", "fewer than 2 samples"),
        ("[Experiment]\ndt_rule = implicit\n", "dt_rule"),
        ("not an ini file", "malformed"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ValidationError, match=match):
        parse_config(text)


def test_overrides_and_inline_comments():
    cfg = parse_config("[PhysParams]\ntau = 0.2  # relaxation time\n", ["PhysParams.tau=0.05", "GridSpec.N=64"])
    assert cfg.phys.tau == 0.05 and cfg.grid.N == 64
    with pytest.raises(ValidationError):
        parse_config("", ["tau=0.1"])


def test_round_trip_exact(tmp_path):
    cfg = parse_config(MINIMAL, ["PhysParams.G=2.0", "Experiment.grids=64,128,256", "Output.snapshot_times=0.5"])
    text = serialize_config(cfg)
    path = tmp_path / "c.ini"
    path.write_text(text)
    again = load_config(path)
    assert again == cfg and serialize_config(again) == text
    assert parse_config(serialize_config(RunConfig())) == RunConfig()


def small(tmp_path, name, *extra):
    return ["--out", str(tmp_path / name), "--set", "GridSpec.N=64", "--set", "StepControl.t_end=0.3", *extra]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_equilibrium(tmp_path):
    assert cli.main(["run", *small(tmp_path, "eq", "--set", "InitialDataSpec.amplitude=0")]) == cli.EXIT_OK
    rows = read_csv(tmp_path / "eq" / "timeseries.csv")
    assert list(rows[0]) == ["t", "E", "supE", "D", "cumD", "E_phys", "cumDiss", "ledger_residual",
                             "minv", "maxv", "min2taS+mu", "stress_defect"]
    for r in rows:
        for key in ("E", "supE", "D", "cumD", "E_phys", "cumDiss", "ledger_residual", "stress_defect"):
            assert float(r[key]) == 0.0
    summary = json.loads((tmp_path / "eq" / "summary.json").read_text())
    assert summary["schema_version"] == 1 and summary["command"] == "run"
    assert summary["breakdown"] is None and summary["results"]["apriori_sup"] is None


def test_run_writes_snapshots_and_both_energy_weights(tmp_path):
    args = small(tmp_path, "snap", "--set", "Output.snapshot_times=0.1,0.3")
    assert cli.main(["run", *args]) == cli.EXIT_OK
    summary = json.loads((tmp_path / "snap" / "summary.json").read_text())
    assert [s["t"] for s in summary["results"]["snapshots"]] == [0.1, 0.3]
    assert set(summary["results"]["E_phys_final"]) == {"statement", "proof"}
    assert list(read_csv(tmp_path / "snap" / "snapshot_000.csv")[0]) == ["x", "v", "u", "S"]


def test_snapshot_off_cadence_rejected(tmp_path):
    args = small(tmp_path, "bad", "--set", "Output.snapshot_times=0.123")
    assert cli.main(["run", *args]) == cli.EXIT_VALIDATION


def test_validation_exit_code(tmp_path):
    assert cli.main(["run", *small(tmp_path, "v", "--set", "PhysParams.a=1.5")]) == cli.EXIT_VALIDATION
    assert cli.main(["run", *small(tmp_path, "v", "--set", "Nope.x=1")]) == cli.EXIT_VALIDATION


def test_sweep_tau_needs_three_values(tmp_path):
    args = small(tmp_path, "sw", "--set", "Experiment.taus=0.1,0.05")
    assert cli.main(["sweep-tau", *args]) == cli.EXIT_VALIDATION


def test_breakdown_writes_partial_outputs(tmp_path):
    args = ["--out", str(tmp_path / "bd"), "--set", "GridSpec.N=128",
            "--set", "InitialDataSpec.amplitude=10", "--set", "InitialDataSpec.preparation=ill-prepared"]
    assert cli.main(["run", *args]) == cli.EXIT_BREAKDOWN
    summary = json.loads((tmp_path / "bd" / "summary.json").read_text())
    assert summary["breakdown"]["invariant"] == "v>0"
    assert summary["breakdown"]["time"] > 0 and summary["results"]["completed"] is False
    assert len(read_csv(tmp_path / "bd" / "timeseries.csv")) >= 2


def test_internal_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg, outdir):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli.COMMANDS, "run", boom)
    assert cli.main(["run", *small(tmp_path, "x")]) == cli.EXIT_INTERNAL


def test_inspect_model_rest_state(capsys):
    assert cli.main(["inspect-model", "--set", "PhysParams.tau=0.1"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "characteristic speeds: -3.3763886032268" in out
    assert "3.3763886032268" in out.split("characteristic speeds:")[1].split(",")[2]


def test_inspect_model_inadmissible(capsys):
    rc = cli.main(["inspect-model", "--S", "-100"])
    assert rc == cli.EXIT_VALIDATION
    assert "2*tau*a*S+mu>0" in capsys.readouterr().out


def test_run_ns_and_converge(tmp_path):
    assert cli.main(["run-ns", *small(tmp_path, "ns")]) == cli.EXIT_OK
    rows = read_csv(tmp_path / "ns" / "ns_timeseries.csv")
    assert list(rows[0]) == ["t", "energy", "minv", "maxv", "limit_stress_L2"]
    args = small(tmp_path, "cv", "--set", "GridSpec.N=32", "--set", "InitialDataSpec.amplitude=0.01")
    assert cli.main(["converge", *args]) == cli.EXIT_OK
    orders = json.loads((tmp_path / "cv" / "summary.json").read_text())["results"]["orders"]
    assert set(orders) == {"v", "u", "S"}


def test_probe_layer_command(tmp_path):
    args = small(tmp_path, "pl", "--set", "InitialDataSpec.preparation=ill-prepared",
                 "--set", "Experiment.layer_taus=0.02,0.01")
    assert cli.main(["probe-layer", *args]) == cli.EXIT_OK
    rows = json.loads((tmp_path / "pl" / "summary.json").read_text())["results"]["rows"]
    assert len(rows) == 2 and not rows[0]["censored"]


def test_repeat_runs_are_byte_identical(tmp_path):
    out = tmp_path / "det"
    args = ["run", "--out", str(out), "--set", "GridSpec.N=64", "--set", "StepControl.t_end=0.5",
            "--set", "Output.snapshot_times=0.5"]
    files = ("timeseries.csv", "summary.json", "snapshot_000.csv", "config.ini")
    assert cli.main(args) == 0
    first = {f: (out / f).read_bytes() for f in files}
    assert cli.main(args) == 0
    assert all((out / f).read_bytes() == first[f] for f in files)
