"""Illustrative channel with i.i.d. on/off states and a noisy state estimate.

The state S is 1 with probability ``p``; the receiver sees S through a
BEC(alpha). The data link is the two-mode BEC of the finite-state
formulation, with S in place of the battery. We compare the capacity when
the transmitter knows S only against the one when it also knows the
receiver's estimate. Values here are not comparable with the EH-BEC.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

from .channel import check_alpha
from .numerics import h2, maximize_concave_1d
from .periodic import CapacityResult

PRESCAN = 10_001


@dataclass(frozen=True)
class StateChannelParams:
    p: float
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("state probability p must lie in [0, 1]")
        check_alpha(self.alpha)


def _estimate_term(r: float, params: StateChannelParams) -> float:
    return params.alpha * (h2(params.p * r) - r * h2(params.p))


def objective_no_estimate(r: float, params: StateChannelParams) -> float:
    return params.p * (1.0 - params.alpha) * h2(r) + _estimate_term(r, params)


def objective_with_estimate(r: float, params: StateChannelParams) -> float:
    return params.p * (1.0 - params.alpha) + _estimate_term(r, params)


def _maximize(objective, params: StateChannelParams) -> CapacityResult:
    res = maximize_concave_1d(lambda r: objective(r, params), 0.0, 1.0,
                              grid=PRESCAN, vectorized=True)
    r = float(res.argmax[0])
    return CapacityResult((1.0 - params.alpha) * res.value, {"r": r}, "numeric")


def state_capacity_no_estimate(params: StateChannelParams) -> CapacityResult:
    return _maximize(objective_no_estimate, params)


def state_capacity_with_estimate(params: StateChannelParams) -> CapacityResult:
    return _maximize(objective_with_estimate, params)


@dataclass
class GapRow:
    p: float
    alpha: float
    c: float
    c_fb: float

    @property
    def gap(self) -> float:
        return self.c_fb - self.c


def state_gap_scan(p_grid: Sequence[float], alpha_grid: Sequence[float]) -> list[GapRow]:
    rows = []
    for p in p_grid:
        for a in alpha_grid:
            params = StateChannelParams(float(p), float(a))
            rows.append(GapRow(params.p, params.alpha,
                               state_capacity_no_estimate(params).value,
                               state_capacity_with_estimate(params).value))
    return rows


def gap_table_to_csv(rows: Sequence[GapRow]) -> str:
    buf = io.StringIO()
    buf.write("p,alpha,C,C_fb,gap\n")
    for r in rows:
        buf.write(f"{r.p:.9g},{r.alpha:.9g},{r.c:.9g},{r.c_fb:.9g},{r.gap:.9g}\n")
    return buf.getvalue()
