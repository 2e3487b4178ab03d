import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from gc0lab import circuit as cc
from gc0lab.boolfun import BoolFun
from gc0lab.cli import run


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def call(capsys, *argv):
    rc = run(list(argv))
    out = capsys.readouterr().out
    return rc, out


def test_construct_then_eval(tmp_path, capsys):
    path = tmp_path / "c.json"
    rc, out = call(capsys, "construct", "--kind", "parity-tree", "--n", "8", "--d", "3", "--out", str(path))
    assert rc == 0 and path.exists()
    assert rows_of(out)[0]["depth"] == "3"
    rc, out = call(capsys, "eval", str(path), "--input", "ff", "7f", "0", "1")
    assert rc == 0
    assert [r["output"] for r in rows_of(out)] == ["0", "1", "0", "1"]


def test_eval_rejects_wide_input(tmp_path, capsys):
    path = tmp_path / "c.json"
    call(capsys, "construct", "--kind", "parity-gk", "--k", "2", "--w", "2", "--out", str(path))
    rc, _ = call(capsys, "eval", str(path), "--input", "1ff")
    assert rc == 2


def test_switch_example(capsys):
    rc, out = call(capsys, "switch", "--n", "12", "--k", "2", "--w", "2", "--p", "1/16", "--t", "3",
                   "--mode", "exhaustive")
    assert rc == 0
    (row,) = rows_of(out)
    from fractions import Fraction

    assert Fraction(row["estimate"]) <= Fraction(row["bound"])
    assert row["holds"] == "True"
    assert row["bound_formula"] == "(20*1/16*2)**3 * 2**2"


def test_rerun_is_byte_identical(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.csv"
        rc, _ = call(capsys, "multiswitch", "--n", "7", "--p", "0.1", "--t", "2", "--r", "1",
                     "--trials", "300", "--seed", "5", "--out", str(path))
        assert rc == 0
        outs.append(path.read_bytes())
        manifest = json.loads((tmp_path / f"r{i}.csv.manifest.json").read_text())
        assert {"git_describe", "config", "seed", "wall_time"} <= set(manifest)
        assert manifest["seed"] == 5
    assert outs[0] == outs[1]


def test_json_mirrors_csv(capsys):
    argv = ["parity-corr", "--n", "12", "--k", "1", "2"]
    rc, text = call(capsys, *argv)
    rc2, js = call(capsys, *argv, "--format", "json")
    assert rc == rc2 == 0
    doc = json.loads(js)
    assert doc["subcommand"] == "parity-corr"
    assert len(doc["rows"]) == len(rows_of(text))
    for r in doc["rows"]:
        assert "bound_formula" in r and "holds" in r


@pytest.mark.parametrize("argv", [
    ["switch", "--n", "12", "--p", "0.0625", "--mode", "exhaustive"],
    ["switch", "--bogus", "1"],
    ["eval", "missing.json", "--input", "1"],
    ["learn", "--trials", "0"],
    ["nosuchcommand"],
])
def test_config_errors_exit_2(argv, capsys):
    assert run(argv) == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": [10], "colour": "blue"}))
    assert run(["switch", "--config", str(cfg)]) == 2


def test_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": [9], "t": [2], "p": ["1/8"], "k": [1]}))
    rc, out = call(capsys, "switch", "--config", str(cfg), "--t", "3")
    assert rc == 0
    (row,) = rows_of(out)
    assert (row["n"], row["t"], row["k"]) == ("9", "3", "1")


def test_failed_check_exits_1(tmp_path, capsys):
    # a random function is not concentrated on one coefficient, so the 6 eps check fails
    table = BoolFun.from_values(8, np.random.default_rng(0).integers(0, 2, 256))
    C = cc.Circuit(8, (cc.Node(cc.TableG(cc.ORLIKE, 8, table), tuple(cc.Lit(i) for i in range(8))),), 0)
    path = tmp_path / "rand.json"
    cc.save(C, path)
    rc, out = call(capsys, "learn", "--circuit", str(path), "--budget", "1", "--eps", "0.2")
    assert rc == 1
    assert rows_of(out)[0]["holds"] == "False"


@pytest.mark.parametrize("argv", [
    ["pipeline", "--n", "10", "--count", "3", "--trials", "12", "--t", "3"],
    ["prg", "--kind", "dt", "--n", "10", "--t", "2", "--count", "3"],
    ["prg", "--kind", "gc0", "--n", "10", "--t", "3", "--count", "2", "--trials", "2000", "--eps", "0.2"],
    ["derand", "--n", "6", "--m", "2", "--ell", "4", "--independence", "2", "--t", "2", "--r", "1",
     "--trials", "100"],
    ["fourier", "--report", "esft", "--n", "8", "--count", "2"],
    ["fourier", "--report", "tail", "--n", "8", "--count", "2", "--trials", "100"],
    ["fourier", "--report", "properties", "--n", "7", "--count", "1", "--trials", "50"],
    ["fourier", "--report", "symmetric", "--n", "8", "--count", "2"],
    ["learn", "--target", "parity", "--n", "6", "--mask", "0b101", "--budget", "1", "--eps", "0.2"],
])
def test_subcommands_succeed_and_embed_formula(argv, capsys):
    rc, out = call(capsys, *argv)
    assert rc == 0, out
    rows = rows_of(out)
    assert rows
    assert all(r.get("bound_formula") for r in rows)


@pytest.mark.parametrize("corpus", ["gk_andw", "layered"])
def test_esft_formula_matches_value(corpus, capsys):
    rc, out = call(capsys, "fourier", "--report", "esft", "--n", "8", "--count", "2", "--corpus", corpus)
    for r in rows_of(out):
        expr = r["bound_formula"].replace("log2", "math.log2")
        assert eval(expr, {"math": math}) == pytest.approx(float(r["bound"]))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gc0lab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
