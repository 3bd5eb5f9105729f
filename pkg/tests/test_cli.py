import csv
import json
import math

import numpy as np
import pytest

from airy_lab.cli import main, write_csv
from airy_lab.config import ExperimentConfig, parse_config
from airy_lab.exceptions import ConfigError
from airy_lab.experiments import run_experiment
from airy_lab.parallel import ENV_THREADS, map_tasks, resolve_threads, task_sizes


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def numeric_part(summary):
    out = dict(summary)
    out.pop("runtime_s")
    return out


# ---------------------------------------------------------------- config ---


def test_minimal_okounkov_config_gets_defaults():
    cfg = parse_config("experiment = okounkov\nbeta = 2\nt = 1\nseed = 7\n")
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.experiment == "okounkov" and cfg.seed == 7
    assert cfg.beta == 2.0 and cfg.t == 1.0
    assert cfg.grids.n_grid == 4096
    assert cfg.grids.delta == pytest.approx(1 / 256)
    assert cfg.samples.n_samples == 100000


def test_sectioned_document():
    text = """
[experiment]
name = semigroup-check
seed = 3
threads = 2

[ensemble]
beta = inf
t1 = 0.25
t2 = 0
window = 0, 4

[grids]
delta_a = 0.0078125
z_step = 0.2

[samples]
n_paths = 16
replicates = 4

[query]
points = 0.5, 1.0
"""
    cfg = parse_config(text)
    assert math.isinf(cfg.beta) and cfg.threads == 2
    assert cfg.window == (0.0, 4.0)
    assert cfg.options["t1"] == 0.25 and cfg.options["t2"] == 0.0
    assert cfg.options["points"] == [0.5, 1.0]
    assert cfg.grids.n_grid == 1024 and cfg.grids.z_step == 0.2
    assert cfg.to_dict()["beta"] == "inf"
    assert cfg.to_dict()["window"] == [0.0, 4.0]


def test_beta_inf_accepted_for_path_experiments_only():
    assert math.isinf(parse_config("name = kernel\nseed = 1\nbeta = inf\n").beta)
    assert math.isinf(parse_config("name = trace-mc\nseed = 1\nbeta = inf\n").beta)
    with pytest.raises(ConfigError) as exc:
        parse_config("name = semicircle\nseed = 1\nbeta = inf\n")
    assert exc.value.field == "beta" and exc.value.line == 3


def test_negative_t_rejected_with_field_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("name = okounkov\nseed = 1\n\nt = -1\n")
    assert exc.value.field == "t" and exc.value.line == 4
    assert "field 't'" in str(exc.value) and "line 4" in str(exc.value)


@pytest.mark.parametrize(
    "text, field, line",
    [
        ("name = okounkov\nseed = 1\ncolour = red\n", "colour", 3),
        ("name = okounkov\nseed = 1\n[grids]\nbeta = 2\n", "beta", 4),
        ("name = okounkov\n", "seed", None),
        ("name = okounkov\nseed = -1\n", "seed", 2),
        ("name = okounkov\nseed = 1\nn_samples = 1.5\n", "n_samples", 3),
        ("name = clt\nseed = 1\n[query]\ncases = 1, 1, 2, 1\n", "cases", 4),
        ("name = kernel\nseed = 1\nwindow = 3, 1\n", "window", 3),
        ("name = semicircle\nseed = 1\nks = 2, 66\n", "ks", 3),
        ("name = nothing\nseed = 1\n", "name", 1),
        ("name = okounkov\nseed = 1\n[extras]\nx = 1\n", "extras", 3),
    ],
)
def test_config_errors(text, field, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field
    assert exc.value.line == line


def test_experiment_argument_must_match_document():
    assert parse_config("seed = 1\n", "okounkov").experiment == "okounkov"
    with pytest.raises(ConfigError):
        parse_config("name = okounkov\nseed = 1\n", "kernel")


def test_seed_override():
    cfg = parse_config("name = okounkov\nseed = 1\n").with_overrides(seed=2 ** 64 - 1)
    assert cfg.seed == 2 ** 64 - 1
    with pytest.raises(ConfigError):
        cfg.with_overrides(seed=2 ** 64)


# -------------------------------------------------------------- threads ---


def test_thread_resolution_order(monkeypatch):
    monkeypatch.setenv(ENV_THREADS, "3")
    assert resolve_threads(5, 2) == 5
    assert resolve_threads(None, 2) == 3
    monkeypatch.delenv(ENV_THREADS)
    assert resolve_threads(None, 2) == 2
    assert resolve_threads(None, None) >= 1


def test_task_results_independent_of_thread_count():
    def draw(count, rng):
        return rng.standard_normal(count)

    one = np.concatenate(map_tasks(draw, 1000, 64, seed=9, threads=1))
    four = np.concatenate(map_tasks(draw, 1000, 64, seed=9, threads=4))
    np.testing.assert_array_equal(one, four)
    assert task_sizes(10, 4) == [4, 4, 2]


# ------------------------------------------------------------------- run ---

OKOUNKOV = "name = okounkov\nseed = 11\nts = 1, 0.5\nn_samples = 2000\nn_grid = 512\n"
SEMICIRCLE = "name = semicircle\nseed = 4\nbeta = 2\nn = 200\nn_matrices = 50\n"


def test_okounkov_run_reports_prediction(tmp_path, capsys):
    code = main(["okounkov", "--config", write(tmp_path, "o.ini", OKOUNKOV),
                 "--out", str(tmp_path), "--threads", "1"])
    summary = json.loads((tmp_path / "okounkov.json").read_text())
    assert code == (0 if all(r["pass"] for r in summary["results"]) else 1)
    assert set(summary) == {"experiment", "params", "seed", "results", "runtime_s"}
    first = summary["results"][0]
    assert first["predicted"] == pytest.approx(0.80624, abs=1e-5)
    for r in summary["results"]:
        assert {"name", "estimate", "stderr", "count", "seed"} <= set(r)
        assert r["seed"] == [11, 0, 1]
    assert "wrote" in capsys.readouterr().out


def test_semicircle_run_predictions(tmp_path):
    main(["semicircle", "--config", write(tmp_path, "s.ini", SEMICIRCLE), "--out", str(tmp_path)])
    summary = json.loads((tmp_path / "semicircle.json").read_text())
    assert [r["predicted"] for r in summary["results"]] == [1.0, 2.0, 5.0]
    assert [r["count"] for r in summary["results"]] == [50, 50, 50]


@pytest.mark.parametrize("threads", ["1", "3"])
def test_rerun_is_bit_identical(tmp_path, threads):
    cfg = write(tmp_path, "s.ini", SEMICIRCLE)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        main(["semicircle", "--config", cfg, "--out", str(out), "--threads", threads])
        outs.append(numeric_part(json.loads((out / "semicircle.json").read_text())))
    assert outs[0] == outs[1]


def test_thread_count_does_not_change_results(tmp_path):
    cfg = write(tmp_path, "s.ini", SEMICIRCLE)
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / threads
        main(["semicircle", "--config", cfg, "--out", str(out), "--threads", threads])
        outs.append(json.loads((out / "semicircle.json").read_text())["results"])
    assert outs[0] == outs[1]


def test_seed_flag_changes_results(tmp_path):
    cfg = write(tmp_path, "s.ini", SEMICIRCLE)
    main(["semicircle", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["semicircle", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"])
    a = json.loads((tmp_path / "a" / "semicircle.json").read_text())
    b = json.loads((tmp_path / "b" / "semicircle.json").read_text())
    assert b["seed"] == 5 and a["results"][0]["estimate"] != b["results"][0]["estimate"]


def test_emit_samples_csv_format(tmp_path):
    main(["semicircle", "--config", write(tmp_path, "s.ini", SEMICIRCLE), "--out", str(tmp_path),
          "--emit-samples"])
    raw = (tmp_path / "semicircle_samples.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == ["moment_k2", "moment_k4", "moment_k6"]
    assert len(rows) == 51
    assert float(rows[1][0]) > 0


def test_csv_writes_seventeen_digits(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [(1 / 3, 2.0)])
    lines = path.read_text().split("\n")
    assert lines[0] == "a,b"
    assert lines[1] == "0.33333333333333331,2"
    assert float(lines[1].split(",")[0]) == 1 / 3


def test_failed_check_exits_one(tmp_path):
    # N = 5 is far from the limit: E moment_2 = 1 + 1/N at beta = 1
    text = "name = semicircle\nseed = 1\nbeta = 1\nn = 5\nn_matrices = 4000\nks = 2\n"
    assert main(["semicircle", "--config", write(tmp_path, "f.ini", text),
                 "--out", str(tmp_path)]) == 1


def test_config_error_exits_two_with_structured_message(tmp_path, capsys):
    code = main(["okounkov", "--config", write(tmp_path, "bad.ini", "seed = 1\nt = -2\n"),
                 "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and err["field"] == "t" and err["line"] == 2


def test_missing_config_file_exits_two(tmp_path, capsys):
    assert main(["okounkov", "--config", str(tmp_path / "none.ini")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


@pytest.mark.parametrize(
    "name, text",
    [
        ("clt", "n = 60\nn_matrices = 50\n"),
        ("ensemble-trace", "n = 100\nn_matrices = 10\n"),
        ("trace-agreement", "ns = 60, 100\nn_matrices = 10\n"),
        ("kernel", "x = 1\ny = 1.5\nt = 0.5\nn_paths = 64\n"),
        ("trace-mc", "beta = inf\nn_paths = 16\nn_w_grids = 2\nn_samples = 200\nx_step = 0.2\n"),
        ("excursion-identity", "n_samples = 500\nn_grid = 256\n"),
        ("semigroup-check", "beta = inf\nn_paths = 8\nreplicates = 3\npoints = 0.5, 1.5\n"
                            "z_step = 0.25\nn_grid = 256\n"),
    ],
)
def test_every_experiment_runs(name, text):
    cfg = parse_config(f"name = {name}\nseed = 2\n" + text)
    out = run_experiment(cfg, threads=1)
    assert out.results
    for r in out.results:
        assert r["seed"] is not None
        assert r["count"] is None or r["count"] > 0
    json.dumps(out.summary(), allow_nan=False)
