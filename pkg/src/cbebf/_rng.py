"""Counter-based Gaussian stream: entry ``c`` of stream ``key`` is a pure function of (key, c).

SplitMix64 finalizer over the counter, then the inverse normal CDF (Wichura's AS241).
"""

import math

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK64 = (1 << 64) - 1


@numba.njit(inline="always")
def _mix64(z):
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


@numba.njit(inline="always")
def _ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                    + 67265.770927008700853) * r + 45921.953931549871457) * r
                  + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                    + 39307.89580009271061) * r + 21213.794301586595867) * r
                  + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                    + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                  + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                    + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                  + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@numba.njit(cache=True)
def gaussian_rows(key, rows, width, scale):
    """Row ``rows[i]`` of an infinite ``width``-column standard-normal table, times ``scale``."""
    out = np.empty((rows.shape[0], width))
    w = np.uint64(width)
    for i in range(rows.shape[0]):
        base = np.uint64(rows[i]) * w
        for j in range(width):
            z = _mix64((base + np.uint64(j) + np.uint64(1)) * _GOLDEN + key)
            u = (float(z >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16
            out[i, j] = _ndtri(u) * scale
    return out


@numba.njit(cache=True)
def uniform_stream(key, start, count):
    out = np.empty(count)
    for i in range(count):
        z = _mix64((np.uint64(start + i) + np.uint64(1)) * _GOLDEN + key)
        out[i] = (float(z >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16
    return out


def stream_key(seed):
    """Scramble a 64-bit seed into a stream key."""
    z = (int(seed) & _MASK64) ^ 0x5851F42D4C957F2D
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return np.uint64(z ^ (z >> 31))


def derive_seed(master, *path):
    """Child seed for ``path`` (e.g. trial index, iteration index) under ``master``."""
    words = [int(master) & _MASK64] + [int(p) for p in path]
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, np.uint64)[0])
