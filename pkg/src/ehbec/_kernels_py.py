"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the compiled versions are tested against.
"""

import numpy as np

INV_PHI = (5 ** 0.5 - 1) / 2
TINY = 1e-300


def epoch_counts(e, cap):
    times = np.flatnonzero(e)
    lengths = np.diff(np.append(times, e.size))
    counts = np.bincount(np.minimum(lengths, cap) - 1, minlength=cap)[:cap]
    return counts.astype(np.int64), int(times.size)


def _h2(u):
    u = np.clip(u, 0.0, 1.0)
    out = np.zeros_like(u)
    m = (u > 0) & (u < 1)
    um = u[m]
    out[m] = -um * np.log2(um) - (1 - um) * np.log2(1 - um)
    return out


def _stage_objective(u, b, grid, v_next, alpha):
    rest = 1.0 - u
    b0 = np.where(rest > TINY, (b - u) / np.maximum(rest, TINY), 0.0)
    be = np.maximum(b - u, 0.0)
    return ((1 - alpha) * _h2(u)
            + (1 - alpha) * rest * np.interp(np.clip(b0, 0.0, 1.0), grid, v_next)
            + alpha * np.interp(be, grid, v_next))


def belief_dp_stage(points, grid, v_next, alpha, iters):
    """Maximize the one-step belief recursion over the transmit mass ``u``.

    For each belief ``b`` in ``points``, maximizes over ``0 <= u <= b``
    the entropy contributed now plus the interpolated continuation values
    after outputs 0 and erasure. Returns ``(values, argmax_u)``.
    """
    b = np.asarray(points, dtype=float)
    lo = np.zeros_like(b)
    hi = b.copy()
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc = _stage_objective(c, b, grid, v_next, alpha)
    fd = _stage_objective(d, b, grid, v_next, alpha)
    for _ in range(iters):
        left = fc >= fd
        # left: keep [lo, d]; right: keep [c, hi]
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - INV_PHI * (hi - lo)
        new_d = lo + INV_PHI * (hi - lo)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_new = _stage_objective(np.where(left, new_c, new_d), b, grid, v_next, alpha)
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
    u = 0.5 * (lo + hi)
    best_v = _stage_objective(u, b, grid, v_next, alpha)
    best_u = u
    for cand in (np.zeros_like(b), b):
        vc = _stage_objective(cand, b, grid, v_next, alpha)
        better = vc > best_v
        best_v = np.where(better, vc, best_v)
        best_u = np.where(better, cand, best_u)
    return best_v, best_u


def _persp_terms(P, t):
    """``P h2(t/P)`` and its partials in ``t`` and ``P`` (bits)."""
    Pt = np.maximum(P - t, 0.0)
    val = np.where(P > 0, -_xlog2x(t) - _xlog2x(Pt) + _xlog2x(P), 0.0)
    live = P > 0
    lt = np.log2(np.maximum(t, TINY))
    lpt = np.log2(np.maximum(Pt, TINY))
    lp = np.log2(np.maximum(P, TINY))
    d_t = np.where(live, lpt - lt, 0.0)
    d_p = np.where(live, lp - lpt, 0.0)
    return val, d_t, d_p


def _xlog2x(p):
    return np.where(p > 0, p * np.log2(np.maximum(p, TINY)), 0.0)


def fb_tree_rate(q, alpha, k, want_grad):
    """Per-epoch rate ``H(Y^k) - k h2(alpha)`` of a feedback policy tree.

    ``q`` is laid out level by level; the node for history code ``c`` at
    slot ``i`` (1-based) is ``q[2**(i-1) - 1 + c]`` and its children after
    output 0 and erasure have codes ``2c`` and ``2c + 1``.
    """
    q = np.asarray(q, dtype=float)
    Ps, Fs, dts, dps = [], [], [], []
    P = np.ones(1)
    F = np.ones(1)
    total = 0.0
    for i in range(k):
        qi = q[2 ** i - 1: 2 ** (i + 1) - 1]
        t = F * qi
        val, d_t, d_p = _persp_terms(P, t)
        total += (1 - alpha) * float(val.sum())
        Ps.append(P)
        Fs.append(F)
        dts.append(d_t)
        dps.append(d_p)
        if i + 1 < k:
            P_next = np.empty(2 * P.size)
            F_next = np.empty(2 * P.size)
            P_next[0::2] = (1 - alpha) * np.maximum(P - t, 0.0)
            P_next[1::2] = alpha * P
            F_next[0::2] = (1 - alpha) * (F - t)
            F_next[1::2] = alpha * (F - t)
            P, F = P_next, F_next
    if not want_grad:
        return total, None
    grad = np.empty_like(q)
    gP_child = np.zeros(2 ** k)
    gF_child = np.zeros(2 ** k)
    for i in range(k - 1, -1, -1):
        qi = q[2 ** i - 1: 2 ** (i + 1) - 1]
        P, F = Ps[i], Fs[i]
        ct = (1 - alpha) * dts[i]
        cp = (1 - alpha) * dps[i]
        n = P.size
        gP0, gPe = gP_child[0:2 * n:2], gP_child[1:2 * n:2]
        gF0, gFe = gF_child[0:2 * n:2], gF_child[1:2 * n:2]
        gq = F * (ct - (1 - alpha) * gP0 - (1 - alpha) * gF0 - alpha * gFe)
        gP = cp + (1 - alpha) * gP0 + alpha * gPe
        gF = (ct * qi - (1 - alpha) * qi * gP0
              + (1 - alpha) * (1 - qi) * gF0 + alpha * (1 - qi) * gFe)
        grad[2 ** i - 1: 2 ** (i + 1) - 1] = gq
        gP_child = np.concatenate([gP, np.zeros(2 ** k - n)])
        gF_child = np.concatenate([gF, np.zeros(2 ** k - n)])
    return total, grad
