"""Hot loops, each with a numba body and a pure-numpy twin.

The public names dispatch on `_accel.HAVE_NUMBA`; the `*_nb` / `*_np`
variants stay importable so tests and the benchmark can compare them.
"""
import numpy as np

from ._accel import njit, pick


# ---------------------------------------------------------------- subcubes
# A subcube of {0,1}^n is a ternary word: digit i in {0,1,2} at weight 3^i,
# 2 meaning variable i is free.  For every subcube we record whether f is
# constant on it (value 0/1, or 2 = not constant) and the minimal depth of a
# decision tree computing f on it.


@njit
def subcube_tables_nb(bits, n):
    N = 3 ** n
    pow3 = np.ones(n + 1, np.int64)
    for i in range(1, n + 1):
        pow3[i] = pow3[i - 1] * 3
    val = np.empty(N, np.int8)
    depth = np.zeros(N, np.int8)
    for idx in range(N):
        rem = idx
        x = 0
        first = -1
        for i in range(n):
            dg = rem % 3
            rem //= 3
            if dg == 2:
                if first < 0:
                    first = i
            elif dg == 1:
                x |= 1 << i
        if first < 0:
            val[idx] = bits[x]
            continue
        a = idx - 2 * pow3[first]
        b = idx - pow3[first]
        if val[a] == val[b] and val[a] != 2:
            val[idx] = val[a]
            continue
        val[idx] = 2
        best = 127
        rem = idx
        for i in range(n):
            dg = rem % 3
            rem //= 3
            if dg == 2:
                da = depth[idx - 2 * pow3[i]]
                db = depth[idx - pow3[i]]
                c = max(da, db) + 1
                if c < best:
                    best = c
        depth[idx] = best
    return depth, val


def subcube_tables_np(bits, n):
    N = 3 ** n
    pow3 = 3 ** np.arange(n, dtype=np.int64)
    idx = np.arange(N, dtype=np.int64)
    digits = np.empty((n, N), dtype=np.int8)
    rem = idx.copy()
    for i in range(n):
        digits[i] = rem % 3
        rem //= 3
    is_star = digits == 2
    nstars = is_star.sum(axis=0)
    val = np.full(N, 2, dtype=np.int8)
    depth = np.zeros(N, dtype=np.int8)

    level0 = np.flatnonzero(nstars == 0)
    x = np.zeros(level0.size, dtype=np.int64)
    for i in range(n):
        x |= digits[i, level0].astype(np.int64) << i
    val[level0] = bits[x]

    for s in range(1, n + 1):
        lev = np.flatnonzero(nstars == s)
        first = np.argmax(is_star[:, lev], axis=0)
        a = val[lev - 2 * pow3[first]]
        b = val[lev - pow3[first]]
        const = (a == b) & (a != 2)
        val[lev] = np.where(const, a, 2)
        best = np.full(lev.size, 127, dtype=np.int16)
        for i in range(n):
            m = is_star[i, lev]
            sub = lev[m]
            c = np.maximum(depth[sub - 2 * pow3[i]], depth[sub - pow3[i]]).astype(np.int16) + 1
            best[m] = np.minimum(best[m], c)
        depth[lev] = np.where(const, 0, best).astype(np.int8)
    return depth, val


def subcube_tables(bits, n):
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    return pick(subcube_tables_nb, subcube_tables_np)(bits, n)


# ------------------------------------------------------------------- fwht
@njit
def fwht_nb(a):
    N = a.size
    h = 1
    while h < N:
        for i in range(0, N, 2 * h):
            for j in range(i, i + h):
                x = a[j]
                y = a[j + h]
                a[j] = x + y
                a[j + h] = x - y
        h *= 2
    return a


def fwht_np(a):
    N = a.size
    h = 1
    while h < N:
        v = a.reshape(-1, 2, h)
        x = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] = x - v[:, 1, :]
        h *= 2
    return a


def fwht(a):
    """Unnormalised in-place Walsh-Hadamard transform."""
    return pick(fwht_nb, fwht_np)(a)


# ------------------------------------------------------------ GF(2^r) math
# Field elements are integers < 2^r (r <= 62 on these paths); `low` is the
# reduction polynomial without its x^r term.


@njit
def gf_mul_nb(a, b, r, low):
    res = 0
    top = 1 << (r - 1)
    mask = (1 << r) - 1
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        carry = a & top
        a = (a << 1) & mask
        if carry:
            a ^= low
    return res


def gf_mul_py(a, b, r, low):
    res = 0
    top = 1 << (r - 1)
    mask = (1 << r) - 1
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        carry = a & top
        a = (a << 1) & mask
        if carry:
            a ^= low
    return res


def gf_mul_vec(a, b, r, low):
    """Elementwise product of two uint64 arrays."""
    a = np.array(a, dtype=np.uint64)
    b = np.array(b, dtype=np.uint64)
    a, b = np.broadcast_arrays(a, b)
    a = a.copy()
    b = b.copy()
    res = np.zeros_like(a)
    top = np.uint64(1 << (r - 1))
    mask = np.uint64((1 << r) - 1)
    lowu = np.uint64(low)
    one = np.uint64(1)
    for _ in range(r):
        res ^= np.where(b & one, a, np.uint64(0))
        b >>= one
        carry = (a & top) != 0
        a = (a << one) & mask
        a ^= np.where(carry, lowu, np.uint64(0))
    return res


@njit
def _parity64(v):
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return v & 1


@njit
def aghp_words_nb(xs, ys, n, r, low):
    out = np.zeros(xs.size, np.int64)
    for s in range(xs.size):
        x = xs[s]
        y = ys[s]
        p = 1
        w = 0
        for i in range(n):
            w |= _parity64(p & y) << i
            p = gf_mul_nb(p, x, r, low)
        out[s] = w
    return out


def aghp_words_np(xs, ys, n, r, low):
    xs = np.asarray(xs, dtype=np.uint64)
    ys = np.asarray(ys, dtype=np.uint64)
    p = np.ones_like(xs)
    out = np.zeros(xs.size, dtype=np.int64)
    for i in range(n):
        out |= (np.bitwise_count(p & ys) & 1).astype(np.int64) << i
        if i + 1 < n:
            p = gf_mul_vec(p, xs, r, low)
    return out


def aghp_words(xs, ys, n, r, low):
    """Packed AGHP outputs (bit i = <x^i, y>) for paired seed arrays."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    return pick(aghp_words_nb, aghp_words_np)(xs, ys, n, r, low)


@njit
def aghp_histogram_nb(n, r, low):
    counts = np.zeros(1 << n, np.int64)
    size = 1 << r
    pw = np.zeros(n, np.int64)
    for x in range(size):
        p = 1
        for i in range(n):
            pw[i] = p
            p = gf_mul_nb(p, x, r, low)
        for y in range(size):
            w = 0
            for i in range(n):
                w |= _parity64(pw[i] & y) << i
            counts[w] += 1
    return counts


def aghp_histogram_np(n, r, low):
    counts = np.zeros(1 << n, dtype=np.int64)
    ys = np.arange(1 << r, dtype=np.uint64)
    for x in range(1 << r):
        p = 1
        w = np.zeros(ys.size, dtype=np.int64)
        for i in range(n):
            w |= (np.bitwise_count(np.uint64(p) & ys) & 1).astype(np.int64) << i
            p = gf_mul_py(p, x, r, low)
        counts += np.bincount(w, minlength=1 << n)
    return counts


def aghp_histogram(n, r, low):
    """Counts of each n-bit output over all 2^(2r) AGHP seeds."""
    return pick(aghp_histogram_nb, aghp_histogram_np)(n, r, low)


# ------------------------------------------------------------ KM estimates
@njit
def bucket_weight_nb(table, j, alpha, xs, ys, zs):
    acc = 0.0
    for s in range(xs.size):
        hi = xs[s] << j
        a = table[ys[s] | hi] * table[zs[s] | hi]
        if (_parity64(ys[s] & alpha) ^ _parity64(zs[s] & alpha)) & 1:
            a = -a
        acc += a
    return acc / xs.size


def bucket_weight_np(table, j, alpha, xs, ys, zs):
    hi = xs << j
    prod = table[ys | hi].astype(np.int64) * table[zs | hi]
    sign = (np.bitwise_count((ys ^ zs) & alpha) & 1).astype(np.int64)
    return float(np.mean(prod * (1 - 2 * sign)))


def bucket_weight(table, j, alpha, xs, ys, zs):
    """Monte Carlo estimate of sum_{S : S cap [j] = alpha} fhat(S)^2.

    `table` holds +-1 values, `xs` index the top n-j variables, `ys`/`zs`
    independent draws of the low j variables.
    """
    return pick(bucket_weight_nb, bucket_weight_np)(
        table, np.int64(j), np.int64(alpha), xs, ys, zs
    )
