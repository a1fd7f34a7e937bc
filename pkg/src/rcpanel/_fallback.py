"""Pure numpy implementations of the compiled kernels.

Signatures match ``_kernels.pyx`` so the two are interchangeable.  Values agree
with the compiled core up to the last bits of transcendental functions and
summation order.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import _rng
from ._rng import _U64

INNOV_GAUSSIAN = 0
INNOV_STUDENT = 1
INNOV_RADEMACHER = 2

_ROW_BLOCK = 1 << 21  # cells per vectorized block


def init_tables(k, w, f):  # noqa: ARG001 - tables live in _rng
    return None


def _innov(kind, key, counter, nu, tscale):
    if kind == INNOV_GAUSSIAN:
        return _rng.normal_v(key, counter)
    if kind == INNOV_STUDENT:
        bits = _rng.draw_v(key, counter) >> _U64(11)
        u = (bits.astype(np.float64) + 0.5) * _rng.TWO_M53
        return special.stdtrit(nu, u) * tscale
    top = _rng.draw_v(key, counter) >> _U64(63)
    return np.where(top == 1, -1.0, 1.0)


def fill_normals(key, start, out):
    out[:] = _rng.normal_stream(key, start, out.shape[0])


def fill_innovations(kind, key, start, nu, tscale, out):
    ctr = np.arange(start, start + out.shape[0], dtype=_U64)
    out[:] = _innov(kind, _U64(key), ctr, nu, tscale)


def stationary_starts(base, row0, a, kind, nu, tscale, tol, max_terms, out):
    rows = np.arange(row0, row0 + a.shape[0], dtype=_U64)
    kr = _rng.child_v(_U64(base), rows)
    sd = np.sqrt(1.0 - a * a)
    if kind == INNOV_GAUSSIAN:
        out[:] = _rng.normal_v(_rng.child_v(kr, _U64(0)), _U64(0)) / sd
        return
    kp = _rng.child_v(kr, _U64(2))
    with np.errstate(divide="ignore"):
        m = np.ceil(np.log(tol * sd) / np.log(a)) - 1
    m = np.where(a == 0.0, 0, np.maximum(m, 0))
    exact = m + 1 <= max_terms
    n_terms = np.where(exact, m + 1, max_terms).astype(np.int64)
    acc = np.zeros(a.shape[0])
    p = np.ones(a.shape[0])
    for k in range(int(n_terms.max(initial=0))):
        live = k < n_terms
        e = _innov(kind, kp, _U64(k), nu, tscale)
        acc = np.where(live, acc + p * e, acc)
        p = np.where(live, p * a, p)
    if not np.all(exact):
        z = _rng.normal_v(_rng.child_v(kp, _U64(0xFFFF)), _U64(0))
        acc = np.where(exact, acc, acc + p * z / sd)
    out[:] = acc


def _gamma_mt(kc, tag, shape):
    kn = _rng.child_v(kc, _U64(tag))
    ku = _rng.child_v(kc, _U64(tag + 1))
    kb = _rng.child_v(kc, _U64(tag + 2))
    k = shape + 1.0 if shape < 1.0 else shape
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    g = np.zeros(kc.shape[0])
    pending = np.arange(kc.shape[0])
    m = 0
    while pending.size:
        z = _rng.normal_v(kn[pending], _U64(m))
        v = 1.0 + c * z
        ok = v > 0.0
        v3 = np.where(ok, v * v * v, 1.0)
        u = _rng.uniform_open_v(ku[pending], _U64(m))
        with np.errstate(invalid="ignore", divide="ignore"):
            acc = ok & (np.log(u) < 0.5 * z * z + d - d * v3 + d * np.log(v3))
        g[pending[acc]] = d * v3[acc]
        pending = pending[~acc]
        m += 1
    if shape < 1.0:
        g = g * np.power(_rng.uniform_open_v(kb, _U64(0)), 1.0 / shape)
    return g


def beta_sqrt(base, row0, alpha, beta, cap, out):
    rows = np.arange(row0, row0 + out.shape[0], dtype=_U64)
    kc = _rng.row_keys(base, rows, _rng.PURPOSE_COEF)
    g1 = _gamma_mt(kc, 10, alpha)
    g2 = _gamma_mt(kc, 20, beta)
    tot = g1 + g2
    with np.errstate(invalid="ignore"):
        u = np.where(tot > 0.0, g1 / tot, 0.0)
    out[:] = np.minimum(np.sqrt(u), cap)


def simulate_rows(base, row0, a, out, kind, nu, tscale, tol, max_terms):
    n_rows, n_cols = out.shape
    block = max(1, _ROW_BLOCK // max(n_cols, 1))
    for lo in range(0, n_rows, block):
        hi = min(n_rows, lo + block)
        rows = np.arange(row0 + lo, row0 + hi, dtype=_U64)
        ke = _rng.row_keys(base, rows, _rng.PURPOSE_EPS)
        ctr = np.arange(1, n_cols + 1, dtype=_U64)
        eps = _innov(kind, ke[:, None], ctr[None, :], nu, tscale)
        x = np.empty(hi - lo)
        stationary_starts(base, row0 + lo, a[lo:hi], kind, nu, tscale, tol,
                          max_terms, x)
        aa = a[lo:hi]
        for t in range(n_cols):
            x = aa * x + eps[:, t]
            out[lo:hi, t] = x


def _lag_products(xp, xq, t, n_cols, cuts):
    """Cumulative sums of X_p(u) X_q(u+t) at each cut, for stacked rows."""
    u_lo = 1 - t if t < 0 else 1
    u_hi = n_cols - t if t > 0 else n_cols
    if u_hi < u_lo:
        return np.zeros((len(cuts), xp.shape[0]))
    prods = xp[:, u_lo - 1:u_hi] * xq[:, u_lo - 1 + t:u_hi + t]
    csum = np.cumsum(prods, axis=1)
    out = np.zeros((len(cuts), xp.shape[0]))
    for c, cut in enumerate(cuts):
        end = min(int(cut), u_hi)
        if end >= u_lo:
            out[c] = csum[:, end - u_lo]
    return out


def summarize_rows(base, row_lo, row_hi, n_rows, a, n_cols, kind, nu, tscale, tol,
                   max_terms, lag_t, lag_s, cuts, row_sum, head, tail, prod):
    s_max = int(max(lag_s, default=0))
    n_head = head.shape[1]
    block = max(1, _ROW_BLOCK // max(n_cols, 1))
    for lo in range(row_lo, row_hi, block):
        hi = min(row_hi, lo + block)
        ext = min(n_rows, hi + s_max)
        x = np.empty((ext - lo, n_cols))
        simulate_rows(base, lo, a[lo:ext], x, kind, nu, tscale, tol, max_terms)
        own = x[: hi - lo]
        row_sum[lo:hi] = np.cumsum(own, axis=1)[:, -1] if n_cols else 0.0
        if n_head:
            head[lo:hi] = own[:, :n_head]
            tail[lo:hi] = own[:, n_cols - n_head:]
        for l, (t, s) in enumerate(zip(lag_t, lag_s)):
            t, s = int(t), int(s)
            if s == 0:
                prod[l, :, lo:hi] = _lag_products(own, own, t, n_cols, cuts)
            else:
                valid = min(hi, n_rows - s) - lo
                if valid > 0:
                    prod[l, :, lo:lo + valid] = _lag_products(
                        x[:valid], x[s:s + valid], t, n_cols, cuts)


def ou_integrals(keys1, keys2, x1, x2, iso, h, substeps, rec_idx, out):
    n_steps = int(rec_idx[-1]) if len(rec_idx) else 0
    for m in np.unique(substeps):
        sel = np.flatnonzero(substeps == m)
        m = int(m)
        hs = h / m
        k1, a1 = keys1[sel], x1[sel]
        phi1 = np.exp(-a1 * hs)
        sd1 = np.sqrt(-np.expm1(-2.0 * a1 * hs) / (2.0 * a1))
        y1 = _rng.normal_v(k1, _U64(0)) / np.sqrt(2.0 * a1)
        if iso:
            y2 = y1
        else:
            k2, a2 = keys2[sel], x2[sel]
            phi2 = np.exp(-a2 * hs)
            sd2 = np.sqrt(-np.expm1(-2.0 * a2 * hs) / (2.0 * a2))
            y2 = _rng.normal_v(k2, _U64(0)) / np.sqrt(2.0 * a2)
        f_prev = y1 * y2
        acc = np.zeros(sel.size)
        j = 0
        while j < len(rec_idx) and rec_idx[j] == 0:
            out[sel, j] = 0.0
            j += 1
        ctr = 1
        for step in range(1, n_steps + 1):
            for _ in range(m):
                y1 = phi1 * y1 + sd1 * _rng.normal_v(k1, _U64(ctr))
                if iso:
                    y2 = y1
                else:
                    y2 = phi2 * y2 + sd2 * _rng.normal_v(k2, _U64(ctr))
                ctr += 1
                f_new = y1 * y2
                acc = acc + 0.5 * hs * (f_prev + f_new)
                f_prev = f_new
            while j < len(rec_idx) and rec_idx[j] == step:
                out[sel, j] = acc
                j += 1
