# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, fmax, fmin

cnp.import_array()

cdef double INV_PHI = 0.6180339887498949
cdef double TINY = 1e-300


def epoch_counts(const unsigned char[::1] e, Py_ssize_t cap):
    cdef cnp.int64_t[::1] counts = np.zeros(cap, dtype=np.int64)
    cdef Py_ssize_t n = e.shape[0], t, last = -1, length
    cdef long m = 0
    for t in range(n):
        if e[t]:
            if last >= 0:
                length = t - last
                counts[(length if length < cap else cap) - 1] += 1
            last = t
            m += 1
    if last >= 0:
        length = n - last
        counts[(length if length < cap else cap) - 1] += 1
    return np.asarray(counts), int(m)


cdef inline double _h2(double u) noexcept nogil:
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return -u * log2(u) - (1.0 - u) * log2(1.0 - u)


cdef inline double _interp(double x, const double[::1] grid, const double[::1] v,
                           Py_ssize_t* hint) noexcept nogil:
    # bracket search starting from the previous bracket: golden-section
    # iterates move little between calls, so this is usually a few steps
    cdef Py_ssize_t last = grid.shape[0] - 1, lo = hint[0], hi, step = 1
    if x <= grid[0]:
        hint[0] = 0
        return v[0]
    if x >= grid[last]:
        hint[0] = last - 1
        return v[last]
    if lo < 0 or lo >= last:
        lo = 0
    if grid[lo] <= x:
        hi = lo + 1
        while hi < last and grid[hi] <= x:
            lo = hi
            hi = lo + step
            step <<= 1
        if hi > last:
            hi = last
    else:
        hi = lo
        lo = hi - 1
        while lo > 0 and grid[lo] > x:
            hi = lo
            lo = hi - step
            step <<= 1
        if lo < 0:
            lo = 0
    while hi - lo > 1:
        step = (lo + hi) >> 1
        if grid[step] <= x:
            lo = step
        else:
            hi = step
    hint[0] = lo
    return v[lo] + (v[hi] - v[lo]) * (x - grid[lo]) / (grid[hi] - grid[lo])


cdef inline double _stage(double u, double b, const double[::1] grid,
                          const double[::1] v, double alpha, Py_ssize_t* hints) noexcept nogil:
    cdef double rest = 1.0 - u
    cdef double b0 = 0.0
    cdef double cont0 = 0.0
    if rest > TINY:
        b0 = fmin(fmax((b - u) / rest, 0.0), 1.0)
        cont0 = rest * _interp(b0, grid, v, &hints[0])
    return ((1.0 - alpha) * _h2(u) + (1.0 - alpha) * cont0
            + alpha * _interp(fmax(b - u, 0.0), grid, v, &hints[1]))


def belief_dp_stage(points, grid, v_next, double alpha, int iters):
    cdef const double[::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[::1] g = np.ascontiguousarray(grid, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(v_next, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], j
    cdef int it
    out_v = np.empty(n)
    out_u = np.empty(n)
    cdef double[::1] ov = out_v, ou = out_u
    cdef double b, lo, hi, c, d, fc, fd, u, fu, f0, fb
    cdef Py_ssize_t hints[2]
    with nogil:
        for j in range(n):
            b = pts[j]
            hints[0] = 0
            hints[1] = 0
            lo = 0.0
            hi = b
            c = hi - INV_PHI * (hi - lo)
            d = lo + INV_PHI * (hi - lo)
            fc = _stage(c, b, g, v, alpha, hints)
            fd = _stage(d, b, g, v, alpha, hints)
            for it in range(iters):
                if fc >= fd:
                    hi = d
                    d = c
                    fd = fc
                    c = hi - INV_PHI * (hi - lo)
                    fc = _stage(c, b, g, v, alpha, hints)
                else:
                    lo = c
                    c = d
                    fc = fd
                    d = lo + INV_PHI * (hi - lo)
                    fd = _stage(d, b, g, v, alpha, hints)
            u = 0.5 * (lo + hi)
            fu = _stage(u, b, g, v, alpha, hints)
            f0 = _stage(0.0, b, g, v, alpha, hints)
            fb = _stage(b, b, g, v, alpha, hints)
            if f0 > fu:
                u = 0.0
                fu = f0
            if fb > fu:
                u = b
                fu = fb
            ov[j] = fu
            ou[j] = u
    return out_v, out_u


cdef inline double _xlog2x(double p) noexcept nogil:
    return p * log2(p) if p > 0.0 else 0.0


def fb_tree_rate(q_in, double alpha, int k, bint want_grad):
    cdef const double[::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef Py_ssize_t nodes = (1 << k) - 1, j, c, off, i, width
    P_arr = np.zeros(nodes)
    F_arr = np.zeros(nodes)
    dt_arr = np.zeros(nodes)
    dp_arr = np.zeros(nodes)
    cdef double[::1] P = P_arr, F = F_arr, dt = dt_arr, dp = dp_arr
    cdef double total = 0.0, t, Pt, a = alpha, qi, lt, lpt, lp
    cdef Py_ssize_t child
    with nogil:
        P[0] = 1.0
        F[0] = 1.0
        for i in range(k):
            off = (1 << i) - 1
            width = 1 << i
            for c in range(width):
                j = off + c
                t = F[j] * q[j]
                Pt = fmax(P[j] - t, 0.0)
                if P[j] > 0.0:
                    # one log per quantity; x log x is 0 at x = 0
                    lt = log2(fmax(t, TINY))
                    lpt = log2(fmax(Pt, TINY))
                    lp = log2(P[j])
                    total += (1.0 - a) * (-(t * lt if t > 0.0 else 0.0)
                                          - (Pt * lpt if Pt > 0.0 else 0.0) + P[j] * lp)
                    dt[j] = lpt - lt
                    dp[j] = lp - lpt
                if i + 1 < k:
                    child = (1 << (i + 1)) - 1 + 2 * c
                    P[child] = (1.0 - a) * Pt
                    P[child + 1] = a * P[j]
                    F[child] = (1.0 - a) * (F[j] - t)
                    F[child + 1] = a * (F[j] - t)
    if not want_grad:
        return total, None
    grad_arr = np.zeros(nodes)
    gP_arr = np.zeros(nodes)
    gF_arr = np.zeros(nodes)
    cdef double[::1] grad = grad_arr, gP = gP_arr, gF = gF_arr
    cdef double ct, cp, gP0, gPe, gF0, gFe
    with nogil:
        for i in range(k - 1, -1, -1):
            off = (1 << i) - 1
            width = 1 << i
            for c in range(width):
                j = off + c
                qi = q[j]
                ct = (1.0 - a) * dt[j]
                cp = (1.0 - a) * dp[j]
                if i + 1 < k:
                    child = (1 << (i + 1)) - 1 + 2 * c
                    gP0 = gP[child]
                    gPe = gP[child + 1]
                    gF0 = gF[child]
                    gFe = gF[child + 1]
                else:
                    gP0 = 0.0
                    gPe = 0.0
                    gF0 = 0.0
                    gFe = 0.0
                grad[j] = F[j] * (ct - (1.0 - a) * gP0 - (1.0 - a) * gF0 - a * gFe)
                gP[j] = cp + (1.0 - a) * gP0 + a * gPe
                gF[j] = (ct * qi - (1.0 - a) * qi * gP0
                         + (1.0 - a) * (1.0 - qi) * gF0 + a * (1.0 - qi) * gFe)
    return total, grad_arr
