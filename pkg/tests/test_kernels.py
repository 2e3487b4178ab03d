import os
import subprocess
import sys

import numpy as np
import pytest

from gc0lab import kernels
from gc0lab.prg import Field

SNIPPET = """
import numpy as np
from gc0lab import _accel, kernels
from gc0lab.boolfun import BoolFun, dt_depth, wht
from gc0lab.prg import eps_biased
f = BoolFun.from_values(9, np.random.default_rng(1).integers(0, 2, 512))
h = eps_biased(9, 0.25).histogram()
print(_accel.HAVE_NUMBA, dt_depth(f), round(float(np.abs(wht(f).coeffs).sum()), 9), int(h @ np.arange(h.size)))
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("GC0LAB_DISABLE_NUMBA", None)
    if disable:
        env["GC0LAB_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", SNIPPET], capture_output=True, text=True, env=env, check=True)
    return res.stdout.split()


def test_env_var_selects_fallback_with_same_results():
    slow = _run(True)
    fast = _run(False)
    assert slow[0] == "False"
    assert slow[1:] == fast[1:]


@pytest.mark.parametrize("n", [1, 3, 6])
def test_subcube_kernels_agree(n):
    bits = np.random.default_rng(n).integers(0, 2, 1 << n).astype(np.uint8)
    a = kernels.subcube_tables_nb(bits, n)
    b = kernels.subcube_tables_np(bits, n)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_bucket_weight_kernels_agree():
    rng = np.random.default_rng(0)
    table = 1 - 2 * rng.integers(0, 2, 1 << 8).astype(np.int64)
    j, alpha = 3, 0b101
    xs = rng.integers(0, 1 << 5, 1000)
    ys = rng.integers(0, 1 << 3, 1000)
    zs = rng.integers(0, 1 << 3, 1000)
    assert kernels.bucket_weight_nb(table, j, alpha, xs, ys, zs) == pytest.approx(
        kernels.bucket_weight_np(table, j, alpha, xs, ys, zs))


def test_gf_mul_kernels_agree():
    F = Field(11)
    rng = np.random.default_rng(2)
    a = rng.integers(0, 1 << 11, 300)
    b = rng.integers(0, 1 << 11, 300)
    vec = kernels.gf_mul_vec(a, b, 11, F.low)
    for x, y, v in zip(a, b, vec):
        assert kernels.gf_mul_py(int(x), int(y), 11, F.low) == int(v) == F.mul(int(x), int(y))


def test_benchmark_script_runs():
    res = subprocess.run([sys.executable, "benchmarks/bench_kernels.py", "--repeat", "1"],
                         capture_output=True, text=True, cwd=os.path.dirname(os.path.dirname(__file__)))
    assert res.returncode == 0, res.stderr
    assert "fwht" in res.stdout
