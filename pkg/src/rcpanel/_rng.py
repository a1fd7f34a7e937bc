"""Counter-based random streams shared by the compiled core and the fallback.

Every random quantity is a pure function of a 64-bit key and a position, so a
panel row, a replication or a Poisson point can be regenerated in isolation.
This is what makes threaded and serial runs bit-identical: no generator state
is ever shared.

Keys are derived with the SplitMix64 finalizer.  Uniforms use the top 53 bits
of a hashed counter.  Normals use a 256-layer ziggurat whose rare rejection
branch reads from a per-position sub-stream, so the ``j``-th normal of a
stream does not depend on any other position.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TAG_SALT = 0x632BE59BD9B4E019
ZIG_SALT = 0x5851F42D4C957F2D
TWO_M53 = 2.0**-53

# Purposes of per-row sub-streams.
PURPOSE_EPS = 0
PURPOSE_COEF = 1
PURPOSE_PRE = 2

_U64 = np.uint64


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def child(key: int, tag: int) -> int:
    """Derive an independent key from ``key`` and an integer tag."""
    return mix64(((key ^ mix64(tag + TAG_SALT)) + GOLDEN) & MASK64)


def derive_key(seed: int, *path: int) -> int:
    """Root key for ``seed`` followed by a chain of :func:`child` derivations."""
    key = mix64((int(seed) & MASK64) + GOLDEN)
    for tag in path:
        key = child(key, int(tag) & MASK64)
    return key


def row_key(base: int, row: int, purpose: int) -> int:
    return child(child(base, row), purpose)


# ---------------------------------------------------------------------------
# Vectorized versions on uint64 arrays (wrap-around arithmetic is intended).

@np.errstate(over="ignore")
def mix64_v(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=_U64)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@np.errstate(over="ignore")
def child_v(key, tag) -> np.ndarray:
    key = np.asarray(key, dtype=_U64)
    tag = np.asarray(tag, dtype=_U64)
    return mix64_v((key ^ mix64_v(tag + _U64(TAG_SALT))) + _U64(GOLDEN))


def row_keys(base: int, rows: np.ndarray, purpose: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=_U64)
    return child_v(child_v(_U64(base), rows), _U64(purpose))


@np.errstate(over="ignore")
def draw_v(key, counter) -> np.ndarray:
    """Raw 64-bit output at ``counter`` of stream ``key`` (broadcasting)."""
    key = np.asarray(key, dtype=_U64)
    counter = np.asarray(counter, dtype=_U64)
    return mix64_v(key + (counter + _U64(1)) * _U64(GOLDEN))


def uniform_open_v(key, counter) -> np.ndarray:
    """Uniform draws on (0, 1]."""
    bits = draw_v(key, counter) >> _U64(11)
    return (bits.astype(np.float64) + 1.0) * TWO_M53


# ---------------------------------------------------------------------------
# Ziggurat tables.

ZIG_LAYERS = 256
ZIG_R = 3.6541528853610088
ZIG_MANT = 2.0**52


def _ziggurat_tables():
    r = ZIG_R
    f = lambda x: math.exp(-0.5 * x * x)  # noqa: E731
    v = r * f(r) + math.sqrt(math.pi / 2.0) * math.erfc(r / math.sqrt(2.0))
    x = np.zeros(ZIG_LAYERS + 1)
    x[0] = v / f(r)
    x[1] = r
    for i in range(2, ZIG_LAYERS):
        arg = f(x[i - 1]) + v / x[i - 1]
        x[i] = math.sqrt(-2.0 * math.log(arg)) if arg < 1.0 else 0.0
    x[ZIG_LAYERS] = 0.0
    k = np.floor(ZIG_MANT * x[1:] / x[:-1]).astype(np.uint64)
    w = x[:-1] / ZIG_MANT
    fx = np.exp(-0.5 * x * x)
    return k, w, fx


ZIG_K, ZIG_W, ZIG_F = _ziggurat_tables()
_MANT_MASK = _U64((1 << 52) - 1)


def _zig_slow_scalar(key: int, j: int, first: int) -> float:
    """Rejection branch for the ``j``-th normal; ``first`` failed the fast test."""
    sub = child(key ^ ZIG_SALT, j)
    ctr = 0
    u = first
    while True:
        layer = u & 0xFF
        sign = (u >> 8) & 1
        rabs = (u >> 9) & ((1 << 52) - 1)
        x = rabs * float(ZIG_W[layer])
        if rabs < int(ZIG_K[layer]):
            return -x if sign else x
        if layer == 0:
            while True:
                u1 = float(uniform_open_v(sub, ctr))
                u2 = float(uniform_open_v(sub, ctr + 1))
                ctr += 2
                xx = -math.log(u1) / ZIG_R
                yy = -math.log(u2)
                if yy + yy > xx * xx:
                    val = ZIG_R + xx
                    return -val if sign else val
        u3 = float(uniform_open_v(sub, ctr))
        ctr += 1
        f_lo = float(ZIG_F[layer])
        f_hi = float(ZIG_F[layer + 1])
        if f_lo + u3 * (f_hi - f_lo) < math.exp(-0.5 * x * x):
            return -x if sign else x
        u = int(draw_v(sub, ctr))
        ctr += 1


def normal_v(key, counter) -> np.ndarray:
    """Standard normals at positions ``counter`` of streams ``key``."""
    key, counter = np.broadcast_arrays(np.asarray(key, dtype=_U64),
                                       np.asarray(counter, dtype=_U64))
    u = draw_v(key, counter)
    layer = (u & _U64(0xFF)).astype(np.intp)
    sign = ((u >> _U64(8)) & _U64(1)).astype(bool)
    rabs = (u >> _U64(9)) & _MANT_MASK
    x = rabs.astype(np.float64) * ZIG_W[layer]
    out = np.where(sign, -x, x)
    slow = rabs >= ZIG_K[layer]
    if np.any(slow):
        idx = np.flatnonzero(slow.ravel())
        kf, cf, uf = key.ravel(), counter.ravel(), u.ravel()
        flat = out.reshape(-1)
        for m in idx:
            flat[m] = _zig_slow_scalar(int(kf[m]), int(cf[m]), int(uf[m]))
    return out


def normal_stream(key: int, start: int, count: int) -> np.ndarray:
    return normal_v(_U64(key), np.arange(start, start + count, dtype=_U64))
