# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Each function mirrors a routine in ``_fallback.py``.

The random streams are defined in ``_rng.py``; the constants and the
ziggurat tables below must stay identical to it.
"""

from libc.math cimport sqrt, log, exp, ceil, pow, expm1
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t, int64_t
from scipy.special.cython_special cimport stdtrit

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t TAG_SALT = 0x632BE59BD9B4E019ULL
cdef uint64_t ZIG_SALT = 0x5851F42D4C957F2DULL
cdef double TWO_M53 = 1.1102230246251565e-16
cdef double ZIG_R = 3.6541528853610088
cdef uint64_t MANT_MASK = (1ULL << 52) - 1

cdef double ZW[256]
cdef double ZF[257]
cdef uint64_t ZK[256]

INNOV_GAUSSIAN = 0
INNOV_STUDENT = 1
INNOV_RADEMACHER = 2


def init_tables(k, w, f):
    cdef int i
    for i in range(256):
        ZK[i] = <uint64_t>int(k[i])
        ZW[i] = float(w[i])
    for i in range(257):
        ZF[i] = float(f[i])


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t child(uint64_t key, uint64_t tag) noexcept nogil:
    return mix64((key ^ mix64(tag + TAG_SALT)) + GOLDEN)


cdef inline uint64_t draw(uint64_t key, uint64_t ctr) noexcept nogil:
    return mix64(key + (ctr + 1) * GOLDEN)


cdef inline double uniform_open(uint64_t key, uint64_t ctr) noexcept nogil:
    return (<double><int64_t>(draw(key, ctr) >> 11) + 1.0) * TWO_M53


cdef inline double uniform_mid(uint64_t key, uint64_t ctr) noexcept nogil:
    return (<double><int64_t>(draw(key, ctr) >> 11) + 0.5) * TWO_M53


cdef double zig_slow(uint64_t key, uint64_t j, uint64_t u) noexcept nogil:
    cdef uint64_t sub = child(key ^ ZIG_SALT, j)
    cdef uint64_t ctr = 0
    cdef int layer
    cdef uint64_t rabs
    cdef int sign
    cdef double x, xx, yy, u1, u2, u3
    while True:
        layer = <int>(u & 0xFF)
        sign = <int>((u >> 8) & 1)
        rabs = (u >> 9) & MANT_MASK
        x = <double><int64_t>rabs * ZW[layer]
        if rabs < ZK[layer]:
            return -x if sign else x
        if layer == 0:
            while True:
                u1 = uniform_open(sub, ctr)
                u2 = uniform_open(sub, ctr + 1)
                ctr += 2
                xx = -log(u1) / ZIG_R
                yy = -log(u2)
                if yy + yy > xx * xx:
                    x = ZIG_R + xx
                    return -x if sign else x
        u3 = uniform_open(sub, ctr)
        ctr += 1
        if ZF[layer] + u3 * (ZF[layer + 1] - ZF[layer]) < exp(-0.5 * x * x):
            return -x if sign else x
        u = draw(sub, ctr)
        ctr += 1


cdef inline double zig_normal(uint64_t key, uint64_t j) noexcept nogil:
    cdef uint64_t u = draw(key, j)
    cdef int layer = <int>(u & 0xFF)
    cdef uint64_t rabs = (u >> 9) & MANT_MASK
    cdef double x
    if rabs < ZK[layer]:
        # Branchless sign: a data-dependent branch here costs a third of the time.
        x = <double><int64_t>rabs * ZW[layer]
        return x * (1.0 - 2.0 * <double><int>((u >> 8) & 1))
    return zig_slow(key, j, u)


cdef inline double innovation(int kind, uint64_t key, uint64_t j,
                              double nu, double tscale) noexcept nogil:
    if kind == 0:
        return zig_normal(key, j)
    if kind == 1:
        return stdtrit(nu, uniform_mid(key, j)) * tscale
    return -1.0 if draw(key, j) >> 63 else 1.0


cdef double stationary_start(uint64_t base, int64_t row, double a, int kind,
                             double nu, double tscale, double tol,
                             int64_t max_terms) noexcept nogil:
    cdef uint64_t kr = child(base, <uint64_t>row)
    cdef double sd = sqrt(1.0 - a * a)
    cdef int64_t m, k
    cdef double p, acc
    cdef uint64_t kp
    if kind == 0:
        return zig_normal(child(kr, 0), 0) / sd
    kp = child(kr, 2)
    if a == 0.0:
        return innovation(kind, kp, 0, nu, tscale)
    m = <int64_t>ceil(log(tol * sd) / log(a)) - 1
    if m < 0:
        m = 0
    p = 1.0
    acc = 0.0
    if m + 1 <= max_terms:
        for k in range(m + 1):
            acc = acc + p * innovation(kind, kp, k, nu, tscale)
            p = p * a
        return acc
    for k in range(max_terms):
        acc = acc + p * innovation(kind, kp, k, nu, tscale)
        p = p * a
    return acc + p * zig_normal(child(kp, 0xFFFF), 0) / sd


cdef void gen_row(uint64_t base, int64_t row, double a, int64_t n_cols, int kind,
                  double nu, double tscale, double tol, int64_t max_terms,
                  double* out) noexcept nogil:
    cdef uint64_t ke = child(child(base, <uint64_t>row), 0)
    cdef double x = stationary_start(base, row, a, kind, nu, tscale, tol, max_terms)
    cdef int64_t t
    for t in range(n_cols):
        x = a * x + innovation(kind, ke, t + 1, nu, tscale)
        out[t] = x


def fill_normals(uint64_t key, uint64_t start, double[::1] out):
    cdef Py_ssize_t i, n = out.shape[0]
    with nogil:
        for i in range(n):
            out[i] = zig_normal(key, start + i)


def fill_innovations(int kind, uint64_t key, uint64_t start, double nu,
                     double tscale, double[::1] out):
    cdef Py_ssize_t i, n = out.shape[0]
    with nogil:
        for i in range(n):
            out[i] = innovation(kind, key, start + i, nu, tscale)


def stationary_starts(uint64_t base, int64_t row0, double[::1] a, int kind,
                      double nu, double tscale, double tol, int64_t max_terms,
                      double[::1] out):
    cdef Py_ssize_t r
    with nogil:
        for r in range(a.shape[0]):
            out[r] = stationary_start(base, row0 + r, a[r], kind, nu, tscale,
                                      tol, max_terms)


cdef double gamma_mt(uint64_t kc, uint64_t tag, double shape) noexcept nogil:
    cdef uint64_t kn = child(kc, tag)
    cdef uint64_t ku = child(kc, tag + 1)
    cdef uint64_t kb = child(kc, tag + 2)
    cdef double k = shape + 1.0 if shape < 1.0 else shape
    cdef double d = k - 1.0 / 3.0
    cdef double c = 1.0 / sqrt(9.0 * d)
    cdef double z, v, u, g
    cdef uint64_t m = 0
    while True:
        z = zig_normal(kn, m)
        v = 1.0 + c * z
        if v > 0.0:
            v = v * v * v
            u = uniform_open(ku, m)
            if log(u) < 0.5 * z * z + d - d * v + d * log(v):
                g = d * v
                break
        m += 1
    if shape < 1.0:
        g = g * pow(uniform_open(kb, 0), 1.0 / shape)
    return g


def beta_sqrt(uint64_t base, int64_t row0, double alpha, double beta,
              double cap, double[::1] out):
    """Coefficients a = sqrt(U), U ~ Beta(alpha, beta), for consecutive rows."""
    cdef Py_ssize_t r
    cdef uint64_t kc
    cdef double g1, g2, u, a
    with nogil:
        for r in range(out.shape[0]):
            kc = child(child(base, <uint64_t>(row0 + r)), 1)
            g1 = gamma_mt(kc, 10, alpha)
            g2 = gamma_mt(kc, 20, beta)
            u = g1 / (g1 + g2) if g1 + g2 > 0.0 else 0.0
            a = sqrt(u)
            out[r] = a if a < cap else cap


def simulate_rows(uint64_t base, int64_t row0, double[::1] a, double[:, ::1] out,
                  int kind, double nu, double tscale, double tol,
                  int64_t max_terms):
    cdef Py_ssize_t r
    cdef int64_t n_cols = out.shape[1]
    with nogil:
        for r in range(a.shape[0]):
            gen_row(base, row0 + r, a[r], n_cols, kind, nu, tscale, tol,
                    max_terms, &out[r, 0])


cdef void lag_products(double* xp, double* xq, int64_t t, int64_t n_cols,
                       int64_t[::1] cuts, double[:, :, ::1] prod, Py_ssize_t l,
                       Py_ssize_t j) noexcept nogil:
    cdef int64_t u_lo = 1 - t if t < 0 else 1
    cdef int64_t u_hi = n_cols - t if t > 0 else n_cols
    cdef int64_t u = u_lo
    cdef int64_t end
    cdef Py_ssize_t c
    cdef double acc = 0.0
    for c in range(cuts.shape[0]):
        end = cuts[c] if cuts[c] < u_hi else u_hi
        while u <= end:
            acc = acc + xp[u - 1] * xq[u + t - 1]
            u += 1
        prod[l, c, j] = acc


def summarize_rows(uint64_t base, int64_t row_lo, int64_t row_hi, int64_t n_rows,
                   double[::1] a, int64_t n_cols, int kind, double nu,
                   double tscale, double tol, int64_t max_terms,
                   int64_t[::1] lag_t, int64_t[::1] lag_s, int64_t[::1] cuts,
                   double[::1] row_sum, double[:, ::1] head, double[:, ::1] tail,
                   double[:, :, ::1] prod):
    """Simulate rows ``[row_lo, row_hi)`` and reduce them without storing the panel.

    Cross products for row ``j`` need row ``j + s``; those later rows are
    regenerated here, so chunks are independent.
    """
    cdef Py_ssize_t n_lags = lag_t.shape[0]
    cdef int64_t s_max = 0
    cdef Py_ssize_t l, h
    cdef int64_t i, j, stop, ring
    cdef int64_t n_head = head.shape[1]
    cdef double acc
    cdef double* buf
    cdef double* xi
    for l in range(n_lags):
        if lag_s[l] > s_max:
            s_max = lag_s[l]
    ring = s_max + 1
    buf = <double*>malloc(ring * n_cols * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    stop = row_hi + s_max
    if stop > n_rows:
        stop = n_rows
    try:
        with nogil:
            for i in range(row_lo, stop):
                xi = buf + (i % ring) * n_cols
                gen_row(base, i, a[i], n_cols, kind, nu, tscale, tol, max_terms, xi)
                if i < row_hi:
                    acc = 0.0
                    for h in range(n_cols):
                        acc = acc + xi[h]
                    row_sum[i] = acc
                    for h in range(n_head):
                        head[i, h] = xi[h]
                        tail[i, h] = xi[n_cols - n_head + h]
                    for l in range(n_lags):
                        if lag_s[l] == 0:
                            lag_products(xi, xi, lag_t[l], n_cols, cuts, prod, l, i)
                for l in range(n_lags):
                    if lag_s[l] > 0:
                        j = i - lag_s[l]
                        if j >= row_lo and j < row_hi:
                            lag_products(buf + (j % ring) * n_cols, xi, lag_t[l],
                                         n_cols, cuts, prod, l, j)
    finally:
        free(buf)


def ou_integrals(uint64_t[::1] keys1, uint64_t[::1] keys2, double[::1] x1, double[::1] x2,
                 int iso, double h, int64_t[::1] substeps, int64_t[::1] rec_idx,
                 double[:, ::1] out):
    """Trapezoid integrals of Y1*Y2 (or Y1^2) over exact O-U paths.

    ``out[p, j]`` is the integral over ``[0, rec_idx[j] * h]``.
    """
    cdef Py_ssize_t p, j, n_pts = x1.shape[0], n_rec = rec_idx.shape[0]
    cdef int64_t step, sub, m, ctr, n_steps = rec_idx[n_rec - 1] if n_rec else 0
    cdef double hs, phi1, phi2, sd1, sd2, y1, y2, f_prev, f_new, acc
    with nogil:
        for p in range(n_pts):
            m = substeps[p]
            hs = h / m
            phi1 = exp(-x1[p] * hs)
            sd1 = sqrt(-expm1(-2.0 * x1[p] * hs) / (2.0 * x1[p]))
            y1 = zig_normal(keys1[p], 0) / sqrt(2.0 * x1[p])
            if iso:
                phi2, sd2, y2 = 0.0, 0.0, y1
            else:
                phi2 = exp(-x2[p] * hs)
                sd2 = sqrt(-expm1(-2.0 * x2[p] * hs) / (2.0 * x2[p]))
                y2 = zig_normal(keys2[p], 0) / sqrt(2.0 * x2[p])
            f_prev = y1 * y2
            acc = 0.0
            j = 0
            while j < n_rec and rec_idx[j] == 0:
                out[p, j] = 0.0
                j += 1
            ctr = 1
            for step in range(1, n_steps + 1):
                for sub in range(m):
                    y1 = phi1 * y1 + sd1 * zig_normal(keys1[p], ctr)
                    if iso:
                        y2 = y1
                    else:
                        y2 = phi2 * y2 + sd2 * zig_normal(keys2[p], ctr)
                    ctr += 1
                    f_new = y1 * y2
                    acc += 0.5 * hs * (f_prev + f_new)
                    f_prev = f_new
                while j < n_rec and rec_idx[j] == step:
                    out[p, j] = acc
                    j += 1
