import csv
import io
import json

import pytest

from doptbb import cli
from doptbb.instance import load


def _run(capsys, *argv):
    assert cli.main(list(argv)) == 0
    return capsys.readouterr().out


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def inst_file(tmp_path, capsys):
    path = tmp_path / "i.txt"
    _run(capsys, "gen", "--n", "20", "--seed", "1", "-o", str(path))
    return path


def test_gen_default_recipe(inst_file):
    inst = load(inst_file)
    assert (inst.n, inst.m, inst.s) == (20, 5, 10)


def test_gen_uses_outdir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path / "out"))
    out = _run(capsys, "gen", "--n", "12", "--seed", "3").strip()
    assert out.startswith(str(tmp_path / "out"))
    assert load(out).n == 12


def test_solve_version_row(inst_file, capsys):
    rows = _csv(_run(capsys, "solve", str(inst_file), "--version", "6"))
    assert len(rows) == 1
    assert rows[0]["version"] == "6" and rows[0]["status"] == "optimal"
    assert int(rows[0]["nodes"]) >= 1


def test_solve_all_versions_agree(inst_file, capsys):
    rows = _csv(_run(capsys, "solve", str(inst_file), "--versions", "1-7", "--with-ls"))
    assert [r["version"] for r in rows] == [str(v) for v in range(1, 8)]
    assert len({r["best_z"] for r in rows}) == 1
    for r in rows:
        assert float(r["ls_z"]) <= float(r["best_z"]) <= float(r["root_relax"]) <= float(r["root_ub"])


def test_solve_flags_and_json(inst_file, capsys):
    out = _run(capsys, "solve", str(inst_file), "--vbt", "--lsc", "--hs", "--format", "json",
               "--gap-tol", "1e-6", "--int-tol", "1e-5", "--threads", "1")
    rows = json.loads(out)
    assert rows[0]["version"] == "custom"


def test_solve_limits_reported(inst_file, capsys):
    rows = _csv(_run(capsys, "solve", str(inst_file), "--version", "1", "--node-limit", "1",
                     "--relax-tol", "1e-4", "--relax-iters", "100"))
    assert rows[0]["status"] in ("node_limit", "optimal")


def test_solve_is_deterministic(inst_file, capsys):
    drop = ("seconds", "ls_seconds")
    a = _csv(_run(capsys, "solve", str(inst_file), "--versions", "1,6"))
    b = _csv(_run(capsys, "solve", str(inst_file), "--versions", "1,6"))
    strip = lambda rows: [{k: v for k, v in r.items() if k not in drop} for r in rows]
    assert strip(a) == strip(b)


def test_ls_grid(inst_file, capsys):
    rows = _csv(_run(capsys, "ls", str(inst_file)))
    assert len(rows) == 12
    assert {r["mode"] for r in rows} == {"fi", "fiplus", "bi"}


def test_bounds_report(inst_file, capsys):
    r = _csv(_run(capsys, "bounds", str(inst_file)))[0]
    assert float(r["relax"]) <= float(r["zeta_hat"])


def test_bench_det_long_format(capsys):
    rows = _csv(_run(capsys, "bench-det", "--n", "40", "--s", "20..30:10", "--reps", "1"))
    assert list(rows[0]) == ["strategy", "n", "m", "s", "mode", "seed", "seconds"]
    assert len(rows) == 2 * 5
    assert all(float(r["seconds"]) > 0 for r in rows)


def test_bench_det_ls_mode(capsys):
    rows = _csv(_run(capsys, "bench-det", "--n", "24", "--modes", "fi", "--strategies", "sm,chol",
                     "--reps", "1"))
    assert {r["strategy"] for r in rows} == {"sm", "chol"}


@pytest.mark.parametrize("text,expected", [
    ("100..250", [100, 150, 200, 250]),
    ("100..250:75", [100, 175, 250]),
    ("20,40", [20, 40]),
])
def test_parse_int_list(text, expected):
    assert cli.parse_int_list(text) == expected


def test_parse_versions():
    assert cli.parse_versions("1-7") == list(range(1, 8))
    assert cli.parse_versions("2,6") == [2, 6]


@pytest.mark.parametrize("argv", [
    ["solve", "missing.txt"],
    ["solve", "x.txt", "--versions", "0-3"],
    ["bench-det", "--n", "40", "--strategies", "lu"],
    ["frobnicate"],
])
def test_usage_errors_exit_nonzero(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code != 0


def test_bad_instance_file(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("3 2 9\n0 0 0\n1 1 1\n1 0\n0 1\n1 1\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["bounds", str(bad)])
    assert exc.value.code != 0
