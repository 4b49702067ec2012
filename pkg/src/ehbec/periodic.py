"""Capacities with a recharge every odd slot, without and with output feedback.

Both problems live on blocks of two channel uses starting at an odd slot.
Without feedback the input pair (1, 1) is excluded; with feedback the
second input may depend on the first output.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import check_alpha
from .numerics import (
    Box,
    ConvergenceError,
    h2,
    maximize_multistart,
    solve_pi_root,
)

HALF_LOG2_3 = 0.5 * math.log2(3.0)


@dataclass(frozen=True)
class TwoBlockInputDist:
    """Mass ``pi`` on each of (0, 1) and (1, 0); the rest on (0, 0)."""

    pi: float

    def __post_init__(self):
        if not 0.0 <= self.pi <= 0.5:
            raise ValueError("pi must lie in [0, 0.5]")

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(0, 0): 1.0 - 2.0 * self.pi, (0, 1): self.pi, (1, 0): self.pi, (1, 1): 0.0}


@dataclass(frozen=True)
class FeedbackTwoBlockDist:
    """P(X1=1), P(X2=1 | X1=0, Y1=0), P(X2=1 | X1=0, Y1=e).

    After X1 = 1 the battery is empty, so X2 = 0 whatever Y1 was.
    """

    p1: float
    p20: float
    p2e: float

    def __post_init__(self):
        for name in ("p1", "p20", "p2e"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p20, self.p2e])


@dataclass
class CapacityResult:
    value: float
    maximizer: object
    method: str
    residual: float = 0.0
    details: dict = field(default_factory=dict)


def mutual_info_two_block(pi: float, alpha: float) -> float:
    """I(X^2; Y^2) in bits for the symmetric two-slot input law."""
    alpha = check_alpha(alpha)
    if not 0.0 <= pi <= 0.5:
        raise ValueError("pi must lie in [0, 0.5]")
    a = 1.0 - alpha
    return a * a * (h2(2.0 * pi) + 2.0 * pi) + 2.0 * alpha * a * h2(pi)


def mutual_info_derivative(pi: float, alpha: float) -> float:
    """d/dpi of :func:`mutual_info_two_block` on the open interval (0, 0.5)."""
    a = 1.0 - alpha
    return (a * a * (2.0 * math.log2((1.0 - 2.0 * pi) / (2.0 * pi)) + 2.0)
            + 2.0 * alpha * a * math.log2((1.0 - pi) / pi))


def capacity_ff(alpha: float) -> CapacityResult:
    """Capacity without feedback, in bits per channel use."""
    alpha = check_alpha(alpha)
    if alpha == 0.0:
        return CapacityResult(HALF_LOG2_3, TwoBlockInputDist(1.0 / 3.0), "closed_form")
    if alpha == 1.0:
        return CapacityResult(0.0, TwoBlockInputDist(0.5), "closed_form")
    pi = solve_pi_root(alpha)
    value = 0.5 * mutual_info_two_block(pi, alpha)
    return CapacityResult(value, TwoBlockInputDist(pi), "closed_form",
                          abs(mutual_info_derivative(pi, alpha)))


def directed_info_two_block(d: FeedbackTwoBlockDist, alpha: float) -> float:
    """I(X^2 -> Y^2) in bits under the causal-conditioning law ``d``."""
    alpha = check_alpha(alpha)
    a = 1.0 - alpha
    return a * (h2(d.p1) + a * (1.0 - d.p1) * h2(d.p20) + alpha * h2(d.p2e * (1.0 - d.p1)))


def _log2_ratio(p: float) -> float:
    # d h2 / dp, clamped so boundary points stay finite
    p = min(max(p, 1e-300), 1.0 - 1e-16)
    return math.log2((1.0 - p) / p)


def directed_info_gradient(x: np.ndarray, alpha: float) -> np.ndarray:
    p1, p20, p2e = (float(v) for v in x)
    a = 1.0 - alpha
    u = p2e * (1.0 - p1)
    return np.array([
        a * (_log2_ratio(p1) - a * h2(p20) - alpha * p2e * _log2_ratio(u)),
        a * a * (1.0 - p1) * _log2_ratio(p20),
        a * alpha * (1.0 - p1) * _log2_ratio(u),
    ])


def optimal_feedback_law(alpha: float) -> FeedbackTwoBlockDist:
    p1 = 1.0 / (1.0 + 2.0 ** (1.0 - alpha))
    return FeedbackTwoBlockDist(p1, 0.5, min(1.0 / (2.0 * (1.0 - p1)), 1.0))


def capacity_fb_closed(alpha: float) -> CapacityResult:
    alpha = check_alpha(alpha)
    value = 0.5 * (1.0 - alpha) * (math.log2(1.0 + 2.0 ** (1.0 - alpha)) + alpha)
    return CapacityResult(value, optimal_feedback_law(alpha), "closed_form")


def best_directed_info_given_p1(p1: float, alpha: float) -> float:
    """Directed information maximized over the second-slot parameters at fixed ``p1``.

    Uses ``p20 = 1/2`` and ``p2e = min(1/(2(1-p1)), 1)``; the clamp is active
    for ``p1 > 1/2``.
    """
    p2e = 1.0 if p1 >= 1.0 else min(1.0 / (2.0 * (1.0 - p1)), 1.0)
    return directed_info_two_block(FeedbackTwoBlockDist(p1, 0.5, p2e), alpha)


def capacity_fb_numeric(alpha: float, restarts: int = 32, seed: int = 0) -> CapacityResult:
    """Feedback capacity by multi-start ascent of the directed information over [0, 1]^3."""
    alpha = check_alpha(alpha)

    def f(x):
        return directed_info_two_block(FeedbackTwoBlockDist(*np.clip(x, 0.0, 1.0)), alpha)

    res = maximize_multistart(
        f, Box.unit(3), restarts=restarts, seed=seed,
        grad=lambda x: directed_info_gradient(x, alpha),
    )
    if not res.converged:
        raise ConvergenceError(f"feedback optimizer found no stationary point at alpha={alpha}")
    law = FeedbackTwoBlockDist(*(float(v) for v in res.argmax))
    out = CapacityResult(0.5 * res.value, law, "numeric")
    out.residual = float(np.linalg.norm(
        np.clip(res.argmax + directed_info_gradient(res.argmax, alpha), 0, 1) - res.argmax))
    # all distinct stationary points, for the uniqueness question
    out.details["stationary_points"] = [(0.5 * v, tuple(x)) for v, x in res.candidates]
    return out


@dataclass
class CurveRow:
    alpha: float
    c_ff: float
    c_fb: float


def capacity_curve(alphas: Sequence[float]) -> list[CurveRow]:
    rows = []
    for a in alphas:
        a = check_alpha(a)
        rows.append(CurveRow(a, capacity_ff(a).value, capacity_fb_closed(a).value))
    return rows


def default_grid(lo: float = 0.0, step: float = 0.01, hi: float = 1.0) -> list[float]:
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def curve_to_csv(rows: Sequence[CurveRow]) -> str:
    buf = io.StringIO()
    buf.write("alpha,C_ff,C_fb\n")
    for r in rows:
        buf.write(f"{r.alpha:.9g},{r.c_ff:.9g},{r.c_fb:.9g}\n")
    return buf.getvalue()


def curve_from_csv(text: str) -> list[CurveRow]:
    lines = text.strip().splitlines()
    if lines[0] != "alpha,C_ff,C_fb":
        raise ValueError("unexpected curve header")
    return [CurveRow(*(float(v) for v in line.split(","))) for line in lines[1:]]
