"""Energy-harvesting binary erasure channel with a unit battery.

Outputs are encoded as integers ``0``, ``1`` and ``ERASURE`` (2). The
scalar functions here also work elementwise on numpy arrays, which is how
the Monte Carlo simulator drives them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import kernels

ERASURE = 2
OUTPUT_SYMBOLS = (0, 1, ERASURE)
SYMBOL_CHARS = {0: "0", 1: "1", ERASURE: "e"}

B_MAX = 1


class ChannelState(NamedTuple):
    parity: int  # 1 = odd slot
    battery: int


INITIAL_STATE = ChannelState(1, 1)
# fixed order for serialization and enumeration
STATES = (ChannelState(1, 1), ChannelState(0, 1), ChannelState(0, 0))


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"erasure probability must lie in [0, 1], got {alpha!r}")
    return alpha


def bec_law(x: int, alpha: float) -> dict[int, float]:
    """Output distribution ``P(y | x)`` of a BEC with erasure probability ``alpha``."""
    alpha = check_alpha(alpha)
    if x not in (0, 1):
        raise ValueError(f"input must be 0 or 1, got {x!r}")
    law = {0: 0.0, 1: 0.0, ERASURE: alpha}
    law[x] = 1.0 - alpha
    return law


def effective_input(x, s: ChannelState):
    """The symbol the BEC actually sees: ``x`` with a charged battery, else 0."""
    if isinstance(x, np.ndarray) or isinstance(s.battery, np.ndarray):
        return np.where(np.asarray(s.battery) == 1, x, 0)
    return x if s.battery == 1 else 0


def step_state(s: ChannelState, x) -> ChannelState:
    """Next state of the period-2 recharge chain.

    Odd slots always start charged. An even slot is charged unless a 1
    was sent in the preceding odd slot.
    """
    parity = np.asarray(s.parity)
    x_eff = np.asarray(effective_input(x, s))
    battery = np.where(parity == 1, 1 - x_eff, 1)
    nxt = ChannelState(1 - parity, battery)
    if parity.ndim == 0 and battery.ndim == 0:
        return ChannelState(int(nxt.parity), int(nxt.battery))
    return nxt


def battery_update(b_prev: int, x_prev: int, e_now: int) -> int:
    """``min(b_prev - x_prev + e_now, 1)``; spending more than stored is an error."""
    if x_prev > b_prev:
        raise ValueError("input energy exceeds stored energy")
    return min(b_prev - x_prev + e_now, B_MAX)


def periodic_arrivals(n: int) -> np.ndarray:
    """One energy quantum at every odd slot (slot 1 is odd)."""
    return (np.arange(n) % 2 == 0).astype(np.uint8)


def is_feasible(x, e=None) -> bool:
    """Whether ``x`` respects the battery when driven by arrivals ``e``.

    The battery is empty before slot 1, so slot 1 needs ``e[0] = 1`` to
    transmit; ``e`` defaults to the periodic arrival pattern.
    """
    x = [int(v) for v in x]
    if e is None:
        e = periodic_arrivals(len(x))
    b, prev = 0, 0
    for t, xt in enumerate(x):
        b = battery_update(b, prev, int(e[t])) if t else min(int(e[0]), B_MAX)
        if xt > b:
            return False
        prev = xt
    return True


# ---------------------------------------------------------------------------
# energy sequences and epochs
# ---------------------------------------------------------------------------

@dataclass
class EpochDecomposition:
    m: int
    lengths: list[int]
    arrival_times: list[int]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EpochDecomposition":
        d = json.loads(text)
        return cls(int(d["m"]), [int(v) for v in d["lengths"]], [int(v) for v in d["arrival_times"]])


def parse_energy(text: str) -> np.ndarray:
    if set(text) - {"0", "1"}:
        raise ValueError("energy sequences are 0/1 strings")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def format_energy(e) -> str:
    return "".join("1" if v else "0" for v in np.asarray(e).ravel())


def _as_energy(e) -> np.ndarray:
    if isinstance(e, str):
        e = parse_energy(e)
    e = np.ascontiguousarray(e, dtype=np.uint8)
    if e.ndim != 1 or e.size == 0:
        raise ValueError("energy sequence must be a non-empty vector")
    if e[0] != 1:
        raise ValueError("energy sequence must start with an arrival (e_1 = 1)")
    return e


def epoch_decompose(e) -> EpochDecomposition:
    e = _as_energy(e)
    times = np.flatnonzero(e) + 1
    lengths = np.diff(np.append(times, e.size + 1))
    return EpochDecomposition(int(times.size), lengths.tolist(), times.tolist())


def reassemble(dec: EpochDecomposition, n: int | None = None) -> np.ndarray:
    n = sum(dec.lengths) if n is None else n
    e = np.zeros(n, dtype=np.uint8)
    e[np.asarray(dec.arrival_times, dtype=int) - 1] = 1
    return e


def epoch_counts(e, cap: int) -> tuple[np.ndarray, int]:
    """Counts of ``min(epoch length, cap) == k`` for ``k = 1..cap``, plus ``m``."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    e = _as_energy(e)
    return kernels.epoch_counts(e, cap)


def empirical_epoch_dist(e, cap: int) -> np.ndarray:
    """``pi(k) = #{i : min(l_i, cap) = k} / n``; sums to ``m / n``, not 1."""
    e = _as_energy(e)
    counts, _ = epoch_counts(e, cap)
    return counts / e.size


def geometric_epoch_dist(p: float, cap: int) -> np.ndarray:
    """Epoch-length law with the tail lumped into the last cell."""
    if not 0.0 < p <= 1.0:
        raise ValueError("arrival probability must lie in (0, 1]")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    k = np.arange(1, cap + 1)
    q = p * (1.0 - p) ** (k - 1)
    q[-1] = (1.0 - p) ** (cap - 1)
    return q


def sample_arrivals(p: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli(p) arrivals with the first slot forced to an arrival."""
    e = (rng.random(n) < p).astype(np.uint8)
    e[0] = 1
    return e
