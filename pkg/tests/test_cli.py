import csv
import io
import math

import numpy as np
import pytest

from kerrbus import analytics
from kerrbus.cli import main
from kerrbus.experiments import ExperimentConfig, run, trial_rng, trial_uniforms


def run_cli(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_uniform_streams_do_not_depend_on_trial_count():
    a = trial_uniforms(5, 10_000, 2)
    b = trial_uniforms(5, 100, 2)
    assert np.array_equal(a[:100], b)
    assert not np.array_equal(trial_uniforms(6, 100, 2), b)
    assert trial_rng(1, 7).random() == trial_rng(1, 7).random()
    assert trial_rng(1, 7).random() != trial_rng(1, 8).random()


def test_parity_csv_is_byte_identical(tmp_path):
    args = ["parity", "--alpha", "314.159", "--theta", "0.01", "--trials", "3000", "--seed", "7"]
    _, a = run_cli(tmp_path, *args, name="a.csv")
    _, b = run_cli(tmp_path, *args, name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    raw = a.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = read_rows(a)
    assert rows[0] == ["trial", "n_p", "parity", "fidelity"]
    assert len(rows) == 3001
    assert [int(r[0]) for r in rows[1:]] == list(range(3000))


def test_different_seed_changes_output(tmp_path):
    _, a = run_cli(tmp_path, "detector", "--trials", "500", "--seed", "1", name="a.csv")
    _, b = run_cli(tmp_path, "detector", "--trials", "500", "--seed", "2", name="b.csv")
    assert a.read_bytes() != b.read_bytes()


def test_floats_round_trip():
    buf = io.StringIO()
    from kerrbus.experiments import write_csv

    res = run(ExperimentConfig("detector", trials=20))
    write_csv(res, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert [float(r[1]) for r in rows[1:]] == [float(r[1]) for r in res.rows]


def test_schema_depends_only_on_experiment(tmp_path):
    _, a = run_cli(tmp_path, "parity-lossy", "--eta", "0.1", "--trials", "50", name="a.csv")
    _, b = run_cli(tmp_path, "parity-lossy", "--eta", "0.3", "--alpha", "500", "--trials", "50", name="b.csv")
    assert read_rows(a)[0] == read_rows(b)[0]


def test_summary_reports_standard_errors(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "source", "--alpha-a", "1.0", "--trials", "2000")
    assert code == 0
    text = capsys.readouterr().out
    assert "predicted 0.367879" in text and " se)" in text


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# detector run\nexperiment = detector\ntrials = 40\nalpha = 200\n", encoding="utf-8")
    code, out = run_cli(tmp_path, "--config", str(cfg), "--trials", "30")
    assert code == 0
    assert len(read_rows(out)) == 31
    assert "alpha sin(theta) = 1.99997" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args,key",
    [
        (["parity", "--alpha", "abc"], "alpha"),
        (["parity", "--trials", "0"], "trials"),
        (["parity", "--eta", "1.5"], "eta"),
        (["parity", "--measurement", "ruler"], "measurement"),
        (["parity", "--seed", "-1"], "seed"),
        (["sweep", "--vary", "eta="], "vary"),
        (["sweep", "--vary", "eta=0,1", "--vary", "theta=1", "--vary", "alpha=3"], "vary"),
        (["sweep", "--vary", "colour=1,2"], "vary"),
        (["sweep"], "vary"),
        ([], "experiment"),
    ],
)
def test_invalid_config_names_the_key(tmp_path, capsys, args, key):
    code, out = run_cli(tmp_path, *args)
    assert code != 0
    assert f"{key}:" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_key_in_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment = parity\nalfa = 3\n", encoding="utf-8")
    assert main(["--config", str(cfg)]) != 0
    assert "alfa:" in capsys.readouterr().err


def test_oracle_check_passes(tmp_path, capsys):
    code, out = run_cli(tmp_path, "oracle-check", "--alpha", "2", "--theta", "0.3")
    assert code == 0
    rows = read_rows(out)
    assert rows[0] == ["check", "value", "tolerance", "pass"]
    assert all(r[3] == "1" for r in rows[1:])
    assert {r[0] for r in rows[1:]} >= {"cross_kerr", "bus_phase", "displace", "loss_channel", "homodyne_pdf", "photon_pmf"}


def test_oracle_check_regime_violation(tmp_path, capsys):
    code, out = run_cli(tmp_path, "oracle-check", "--alpha", "5")
    assert code != 0
    assert "oracle regime" in capsys.readouterr().err


def test_sweep_is_row_major(tmp_path):
    code, out = run_cli(tmp_path, "sweep", "--target", "source", "--vary", "alpha_a=0.5,1.0",
                        "--vary", "theta=0.01,0.02", "--trials", "200")
    assert code == 0
    rows = read_rows(out)
    assert rows[0] == ["alpha_a", "theta", "quantity", "analytic", "empirical", "stderr"]
    assert [(float(r[0]), float(r[1])) for r in rows[1:]] == [(0.5, 0.01), (0.5, 0.02), (1.0, 0.01), (1.0, 0.02)]


def test_detector_sweep_decreases_monotonically(tmp_path):
    code, out = run_cli(tmp_path, "sweep", "--target", "detector", "--vary",
                        f"alpha_sin_theta=1,2,3,{math.pi!r},4", "--trials", "100000")
    assert code == 0
    rows = read_rows(out)[1:]
    empirical = [float(r[3]) for r in rows]
    assert all(a > b for a, b in zip(empirical, empirical[1:]))
    for r in rows:
        assert abs(float(r[3]) - float(r[2])) <= 3 * max(float(r[4]), 1e-5)


def test_eta_sweep_coherence_is_exact(tmp_path):
    theta = math.pi / 300
    code, out = run_cli(tmp_path, "sweep", "--target", "parity-lossy", "--vary", "eta=0:0.3:7",
                        "--alpha", "300", "--theta", repr(theta))
    assert code == 0
    for r in read_rows(out)[1:]:
        gamma = analytics.loss_params(float(r[0]), 300, theta).gamma
        assert float(r[3]) == pytest.approx(math.exp(-gamma), abs=1e-10)
        assert float(r[4]) == 0.0


def test_source_herald_rate(tmp_path):
    code, out = run_cli(tmp_path, "source", "--alpha-a", "1.0", "--trials", "100000")
    heralded = np.array([int(r[2]) for r in read_rows(out)[1:]])
    p = math.exp(-1)
    assert abs(heralded.mean() - p) <= 3 * math.sqrt(p * (1 - p) / len(heralded))


@pytest.mark.parametrize("experiment,extra", [
    ("cnot", ["--alpha", "1000", "--trials", "5"]),
    ("bellmeas", ["--alpha", "1000", "--trials", "20", "--input", "psi-"]),
    ("fusion", ["--alpha", "1000", "--trials", "10"]),
    ("parity", ["--measurement", "homodyne", "--alpha", "20000", "--theta", "0.05", "--trials", "20"]),
])
def test_protocol_runs(tmp_path, experiment, extra):
    code, out = run_cli(tmp_path, experiment, *extra)
    assert code == 0
    rows = read_rows(out)
    fid_col = rows[0].index("fidelity") if "fidelity" in rows[0] else rows[0].index("min_stabilizer")
    assert all(float(r[fid_col]) >= 1 - 1e-8 for r in rows[1:])


def test_figure_written_next_to_csv(tmp_path):
    fig = tmp_path / "hist.png"
    code, out = run_cli(tmp_path, "detector", "--trials", "2000", "--figure", str(fig))
    assert code == 0
    assert out.exists() and fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    sweep_fig = tmp_path / "sweep.svg"
    code, _ = run_cli(tmp_path, "sweep", "--target", "source", "--vary", "alpha_a=0.5:1.5:3",
                      "--trials", "300", "--figure", str(sweep_fig), name="s.csv")
    assert code == 0 and b"<svg" in sweep_fig.read_bytes()


def test_csv_to_stdout(capsys):
    assert main(["detector", "--trials", "3"]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("trial,x,estimate,correct\n")
    assert "misclassification" in captured.err
