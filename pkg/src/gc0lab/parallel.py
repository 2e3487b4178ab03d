"""Chunked Monte Carlo over independent substreams.

Trials are split into fixed-size chunks, each with its own spawned
SeedSequence, so results do not depend on the worker count
(GC0LAB_WORKERS, default 1).
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

CHUNK = 512


def workers() -> int:
    try:
        return max(1, int(os.environ.get("GC0LAB_WORKERS", "1")))
    except ValueError:
        return 1


def chunk_plan(trials: int, seed: int, chunk: int = CHUNK):
    sizes = [chunk] * (trials // chunk)
    if trials % chunk:
        sizes.append(trials % chunk)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(sizes, seqs))


def map_chunks(fn, args: tuple, trials: int, seed: int, chunk: int = CHUNK) -> list:
    """Call fn(*args, size, rng) per chunk; returns the per-chunk results in order.

    `fn` must be a module-level function when more than one worker is used.
    """
    plan = chunk_plan(trials, seed, chunk)
    nw = workers()
    if nw == 1 or len(plan) == 1:
        return [fn(*args, size, np.random.default_rng(ss)) for size, ss in plan]
    with ProcessPoolExecutor(max_workers=nw) as ex:
        futs = [ex.submit(_call, fn, args, size, ss) for size, ss in plan]
        return [f.result() for f in futs]


def _call(fn, args, size, ss):
    return fn(*args, size, np.random.default_rng(ss))
