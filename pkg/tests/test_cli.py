import json
import os

import pytest

from tensor_spectra import cli
from tensor_spectra.ensembles import Kind


def test_parse_simulate_example():
    c = cli.parse_config(["simulate", "--ensemble", "cue-tensor-cue", "--n", "20", "--samples", "8192", "--seed", "1"])
    spec = c.runs[0]
    assert (spec.kind, spec.size, spec.samples, spec.seed) == (Kind.CUE_TENSOR_CUE, 20, 2**13, 1)
    assert (c.bins, c.s_max, c.fmt, c.workers) == (40, 4.0, "csv", "auto")


def test_parse_fig2_expansion():
    c = cli.parse_config(["reproduce-fig2"])
    assert [(s.kind, s.size, s.samples) for s in c.runs] == [
        (Kind.CUE2_TENSOR, 2, 2**17), (Kind.CUE2_TENSOR, 3, 2**16), (Kind.CUE2_TENSOR, 8, 2**14)
    ]
    c = cli.parse_config(["reproduce-fig1", "--downscale", "3"])
    assert [(s.size, s.samples) for s in c.runs] == [(2, 2**14), (3, 2**13), (20, 2**10)]


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--ensemble", "bogus", "--n", "2"],
        ["simulate", "--ensemble", "cue"],
        ["simulate", "--ensemble", "cue2-tensor", "--n", "3"],
        ["simulate", "--ensemble", "cue", "--n", "3", "--frobnicate"],
        ["simulate", "--ensemble", "cue2-tensor", "--m", "31"],
        ["void", "--ensemble", "cue", "--n", "2", "--s-grid", "1,0.5"],
        ["simulate", "--ensemble", "cue", "--n", "2", "--workers", "0"],
        ["simulate", "--ensemble", "cue", "--n", "2", "--bins", "0"],
        [],
        ["paint"],
    ],
)
def test_usage_errors(argv, capsys):
    with pytest.raises(cli.UsageError):
        cli.parse_config(argv)
    assert cli.main(argv) == cli.EXIT_USAGE


def test_simulate_cpe_rows(tmp_path):
    out = tmp_path / "h.csv"
    argv = ["simulate", "--ensemble", "cpe", "--n", "64", "--samples", "4096", "--workers", "1", "-o", str(out)]
    assert cli.main(argv) == cli.EXIT_OK
    lines = out.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "bin_left,bin_right,density,count"
    assert len(body) == 41
    assert "# samples=4096" in lines and "# seed=0" in lines


def test_void_columns_and_json(tmp_path):
    out = tmp_path / "v.json"
    argv = ["void", "--ensemble", "cue2-tensor", "--m", "4", "--samples", "200", "--s-grid", "0,0.5,1",
            "--format", "json", "-o", str(out), "--workers", "1"]
    assert cli.main(argv) == cli.EXIT_OK
    doc = json.loads(out.read_text())
    assert set(doc) == {"config", "results", "meta"}
    assert doc["results"]["columns"] == ["s", "E_hat", "stderr", "samples"]
    assert doc["results"]["rows"][0][:2] == [0.0, 1.0]
    assert "wall_time" in doc["meta"] and "wall_time" not in doc["config"]


def test_float_round_trip():
    assert float(cli._fmt(0.1 + 0.2)) == 0.1 + 0.2
    assert cli._fmt(True) == "1"


def test_replay_from_echo(tmp_path):
    out = tmp_path / "a.csv"
    argv = ["simulate", "--ensemble", "cue-tensor-cue", "--n", "3", "--samples", "64", "--seed", "5",
            "--bins", "12", "--s-max", "3", "-o", str(out), "--workers", "1"]
    assert cli.main(argv) == 0
    text = out.read_text()
    replay = cli.config_from_echo(text.splitlines())
    again = cli.render_csv(cli.run(replay))
    assert again == text


def test_void_replay_from_echo():
    c = cli.parse_config(["void", "--ensemble", "cue", "--n", "3", "--samples", "50", "--s-max", "1", "--ds", "0.25"])
    assert c.s_grid == (0.0, 0.25, 0.5, 0.75, 1.0)
    text = cli.render_csv(cli.run(c))
    assert cli.render_csv(cli.run(cli.config_from_echo(text.splitlines()))) == text


@pytest.mark.parametrize("workers", ["2", "8"])
def test_worker_count_does_not_change_csv(workers):
    base = ["simulate", "--ensemble", "cue2-tensor", "--m", "5", "--samples", "96", "--seed", "3"]
    one = cli.render_csv(cli.run(cli.parse_config(base + ["--workers", "1"])))
    many = cli.render_csv(cli.run(cli.parse_config(base + ["--workers", workers])))
    assert one == many


def test_persist_is_atomic_on_failure(tmp_path, monkeypatch):
    report = cli.run(cli.parse_config(["simulate", "--ensemble", "cue", "--n", "2", "--samples", "8", "--workers", "1"]))
    target = tmp_path / "x.csv"

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        cli.persist(report, str(target))
    assert os.listdir(tmp_path) == []


def test_unwritable_output_exits_nonzero(tmp_path):
    argv = ["simulate", "--ensemble", "cue", "--n", "2", "--samples", "4", "--workers", "1",
            "-o", str(tmp_path / "missing" / "out.csv")]
    assert cli.main(argv) != 0


def test_numerical_failure_exit_code(monkeypatch):
    from tensor_spectra.errors import NumericalFailureError

    def fail(config):
        raise NumericalFailureError("no convergence")

    monkeypatch.setattr(cli, "_run_simulate", fail)
    assert cli.main(["simulate", "--ensemble", "cue", "--n", "2"]) == cli.EXIT_NUMERICAL


def test_lemmas_command_passes(capsys):
    assert cli.main(["lemmas"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "stirling_identity" in out and "rank_lemma" in out


def test_figure_check_failure_exit(monkeypatch):
    monkeypatch.setattr(cli, "KS_LIMIT", 0.0)
    assert cli.main(["reproduce-fig2", "--downscale", "10", "--workers", "1"]) == cli.EXIT_CHECK
