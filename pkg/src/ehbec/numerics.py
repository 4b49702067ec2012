"""Numerical kernels shared by the capacity modules.

Entropies are in bits throughout. Optimizers maximize; feasible sets are
either a box ``[lo, hi]^d`` or the probability simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

LN2 = math.log(2.0)
ROOT_TOL = 1e-10
VALUE_TOL = 1e-8
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class ConvergenceError(RuntimeError):
    """An optimizer could not certify a result it was asked to certify."""


@dataclass
class OptResult:
    argmax: np.ndarray
    value: float
    iterations: int = 0
    converged: bool = True
    restarts_used: int = 1
    # distinct stationary points seen across restarts, best first
    candidates: list = field(default_factory=list)


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def unit(cls, dim: int) -> "Box":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lo + u * (self.hi - self.lo)


@dataclass(frozen=True)
class Simplex:
    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        return project_simplex(x)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        # uniform cube -> Dirichlet(1) via normalized exponentials
        w = -np.log(np.clip(u, 1e-12, 1.0))
        return w / w.sum()


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def xlog2x(p):
    """Elementwise ``p * log2(p)`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def h2(p):
    """Binary entropy in bits. Accepts scalars or arrays."""
    if isinstance(p, (float, int, np.floating)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"h2 argument outside [0, 1]: {p!r}")
        if p == 0.0 or p == 1.0:
            return 0.0
        return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise ValueError(f"h2 argument outside [0, 1]: {p!r}")
    out = -xlog2x(arr) - xlog2x(1.0 - arr)
    return float(out) if out.ndim == 0 else out


def h2_clipped(p):
    """h2 with the argument clipped into [0, 1]; for rounding-noise inputs."""
    return h2(np.clip(p, 0.0, 1.0))


def entropy(dist: Sequence[float]) -> float:
    """Shannon entropy in bits of a probability vector."""
    d = np.asarray(dist, dtype=float).ravel()
    if np.any(d < -1e-12):
        raise ValueError("negative probability mass")
    d = np.clip(d, 0.0, None)
    total = d.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {total!r}, not 1")
    return float(-xlog2x(d / total).sum())


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def bisect(g: Callable[[float], float], lo: float, hi: float, abs_tol: float = ROOT_TOL) -> float:
    """Root of ``g`` on ``[lo, hi]`` given a sign change; runs to float resolution."""
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise ValueError("no sign change on bracket")
    while hi - lo > abs_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm == 0.0:
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pi_root_residual(x: float, alpha: float) -> float:
    return x ** (1.0 / (1.0 - alpha)) + x - 1.0


def solve_pi_root(alpha: float, abs_tol: float = 1e-15) -> float:
    """Optimal one-hot probability for the two-slot block without feedback.

    Solves ``x**(1/(1-alpha)) + x - 1 = 0`` for ``x`` in (0, 1) by bisection
    and returns ``x / (1 + x)``. The left side is increasing in ``x`` so the
    root is unique.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    x = bisect(lambda t: pi_root_residual(t, alpha), 0.0, 1.0, abs_tol)
    return x / (1.0 + x)


# ---------------------------------------------------------------------------
# one-dimensional maximization
# ---------------------------------------------------------------------------

def _checked(f: Callable[[float], float], x: float) -> float:
    v = float(f(x))
    if not math.isfinite(v):
        raise ValueError(f"objective is not finite at x={x!r}: {v!r}")
    return v


def golden_section(f, lo: float, hi: float, tol: float = ROOT_TOL, max_iter: int = 200):
    """Golden-section search for the maximum of a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, fx, iterations)``.
    """
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = _checked(f, c), _checked(f, d)
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = _checked(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = _checked(f, d)
    x = 0.5 * (a + b)
    return x, _checked(f, x), it


def maximize_concave_1d(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = ROOT_TOL,
    grid: int = 1001,
    vectorized: bool = False,
) -> OptResult:
    """Maximize a scalar function on ``[lo, hi]``.

    A ``grid``-point scan brackets the best grid cell, then golden-section
    search refines inside it. Endpoints are always compared, so boundary
    maxima of monotone functions are returned exactly. With ``vectorized``
    the scan calls ``f`` once on the whole grid array.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    xs = np.linspace(lo, hi, max(grid, 3))
    if vectorized:
        vals = np.asarray(f(xs), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("objective is not finite on the scan grid")
    else:
        vals = np.array([_checked(f, x) for x in xs])
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    x, fx, it = golden_section(f, a, b, tol)
    best_x, best_v = x, fx
    for cand, v in ((xs[i], vals[i]), (lo, vals[0]), (hi, vals[-1])):
        if v > best_v:
            best_x, best_v = cand, v
    return OptResult(np.array([best_x]), best_v, it + len(xs), True, 1)


# ---------------------------------------------------------------------------
# simplex projection and multi-start projected-gradient ascent
# ---------------------------------------------------------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, feasible, h: float = 1e-7) -> np.ndarray:
    """Central differences, one-sided where a box bound is active."""
    g = np.empty_like(x)
    lo = getattr(feasible, "lo", np.full_like(x, -np.inf))
    hi = getattr(feasible, "hi", np.full_like(x, np.inf))
    for i in range(len(x)):
        up, dn = x.copy(), x.copy()
        step_up = min(h, hi[i] - x[i])
        step_dn = min(h, x[i] - lo[i])
        up[i] += step_up
        dn[i] -= step_dn
        g[i] = (f(up) - f(dn)) / (step_up + step_dn)
    return g


def projected_ascent(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    feasible,
    grad: Callable[[np.ndarray], np.ndarray] | None = None,
    gtol: float = 1e-9,
    max_iter: int = 5000,
):
    """Projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking.

    Returns ``(x, fx, iterations, stationarity)`` where stationarity is the
    norm of the unit-step projected-gradient map at the final point.
    """
    if grad is None:
        grad = lambda z: fd_gradient(f, z, feasible)  # noqa: E731
    x = feasible.project(np.asarray(x0, dtype=float))
    fx = f(x)
    g = grad(x)
    step = 1.0
    x_prev = g_prev = None
    stat = np.inf
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        stat = float(np.linalg.norm(feasible.project(x + g) - x))
        if stat < gtol:
            break
        if x_prev is not None:
            s, y = x - x_prev, g - g_prev
            sy = float(s @ y)
            if sy < 0:
                step = float(s @ s) / -sy
            step = min(max(step, 1e-10), 1e6)
        accepted = False
        while step >= 1e-14:
            x_new = feasible.project(x + step * g)
            d = x_new - x
            f_new = f(x_new)
            if f_new >= fx + 1e-4 * float(g @ d):
                accepted = True
                break
            step *= 0.5
        if not accepted or f_new <= fx + 1e-16 * max(1.0, abs(fx)) and stall >= 20:
            # value has hit float resolution
            break
        stall = stall + 1 if f_new <= fx + 1e-16 * max(1.0, abs(fx)) else 0
        x_prev, g_prev = x, g
        x, fx = x_new, f_new
        g = grad(x)
        if not d.any():
            stat = float(np.linalg.norm(feasible.project(x + g) - x))
            break
    return x, float(fx), it, stat


def simplex_gap(x: np.ndarray, g: np.ndarray) -> float:
    """``max(g) - g.x``; bounds the suboptimality of ``x`` when ``f`` is concave."""
    return float(np.max(g) - g @ x)


def entropic_ascent(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    grad: Callable[[np.ndarray], np.ndarray],
    gtol: float = 1e-9,
    max_iter: int = 5000,
):
    """Exponentiated-gradient ascent on the simplex with backtracking.

    Multiplicative updates keep every coordinate positive, which matters
    for entropy objectives whose gradient blows up on the boundary.
    Returns ``(x, fx, iterations, gap)``.
    """
    x = np.clip(np.asarray(x0, dtype=float), 1e-300, None)
    x /= x.sum()
    fx = f(x)
    g = grad(x)
    step = 1.0
    gap = simplex_gap(x, g)
    it = 0
    for it in range(1, max_iter + 1):
        if gap < gtol:
            break
        accepted = False
        while step >= 1e-14:
            z = step * (g - g.max())
            x_new = x * np.exp(z)
            x_new /= x_new.sum()
            f_new = f(x_new)
            if f_new >= fx + 1e-4 * float(g @ (x_new - x)):
                accepted = True
                break
            step *= 0.5
        if not accepted or f_new <= fx:
            break
        x, fx = x_new, f_new
        g = grad(x)
        gap = simplex_gap(x, g)
        step *= 2.0
    return x, float(fx), it, gap


def start_points(feasible, restarts: int, seed: int) -> list[np.ndarray]:
    """Low-discrepancy start points (scrambled Halton) mapped into ``feasible``."""
    sampler = qmc.Halton(d=feasible.dim, scramble=True, seed=seed)
    units = sampler.random(restarts)
    return [feasible.from_unit(u) for u in units]


def maximize_multistart(
    f: Callable[[np.ndarray], float],
    feasible,
    restarts: int = 32,
    seed: int = 0,
    grad: Callable[[np.ndarray], np.ndarray] | None = None,
    gtol: float = 1e-9,
    max_iter: int = 5000,
    extra_starts: Sequence[np.ndarray] = (),
    stationarity_tol: float = 1e-6,
) -> OptResult:
    """Best of projected-gradient ascents from seeded starts.

    Box problems use projected steps; simplex problems use entropic
    (multiplicative) steps. ``extra_starts`` are tried before the
    low-discrepancy points. Ties are broken by the lowest start index, so
    results are deterministic. ``converged`` is false when no run ends with
    its stationarity measure below ``stationarity_tol``.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    starts = [np.asarray(s, dtype=float) for s in extra_starts]
    starts += start_points(feasible, restarts, seed)
    best = None
    total_it = 0
    any_stationary = False
    found: list[tuple[float, np.ndarray]] = []
    if isinstance(feasible, Simplex) and grad is None:
        grad = lambda z: fd_gradient(f, z, feasible)  # noqa: E731
    for x0 in starts:
        if isinstance(feasible, Simplex):
            x, fx, it, stat = entropic_ascent(f, x0, grad, gtol, max_iter)
        else:
            x, fx, it, stat = projected_ascent(f, x0, feasible, grad, gtol, max_iter)
        total_it += it
        if not math.isfinite(fx):
            continue
        if stat < stationarity_tol:
            any_stationary = True
            if not any(np.allclose(x, y, atol=1e-5) for _, y in found):
                found.append((fx, x))
        if best is None or fx > best[1]:
            best = (x, fx)
    if best is None:
        raise ValueError("objective was not finite at any start")
    found.sort(key=lambda t: -t[0])
    return OptResult(
        argmax=best[0],
        value=best[1],
        iterations=total_it,
        converged=any_stationary,
        restarts_used=len(starts),
        candidates=[(v, x) for v, x in found],
    )
