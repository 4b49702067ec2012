"""Capacities with i.i.d. Bernoulli(p) arrivals known in advance at both ends.

Arrivals cut time into epochs; an epoch of length ``k`` carries at most one
transmitted 1. Capacity is a geometric mixture over ``k`` of the best
per-epoch output entropy, with or without output feedback inside the epoch.

Feedback policies are trees over erasure histories. While the battery is
still charged every past input was 0, so past outputs are in {0, e}; the
node for slot ``i`` and history code ``c`` (bit 1 = erasure, first slot
most significant) sits at flat index ``2**(i-1) - 1 + c``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .channel import ERASURE, check_alpha
from .numerics import (
    LN2,
    Box,
    ConvergenceError,
    OptResult,
    entropic_ascent,
    h2,
    maximize_concave_1d,
    maximize_multistart,
    projected_ascent,
    xlog2x,
)
from .periodic import CapacityResult

LOG2_3 = math.log2(3.0)
EXHAUSTIVE_MAX_K = 12
SUBSET_MAX_K = 22
FULL_SIMPLEX_MAX_K = 10
FB_ENUM_MAX_K = 10
FB_MULTISTART_MAX_K = 10
FB_TREE_MAX_K = 20
FB_POLISH_MAX_K = 14
DP_GRID = 4001
DP_ITERS = 64


# ---------------------------------------------------------------------------
# input laws
# ---------------------------------------------------------------------------

@dataclass
class EpochInputDist:
    """Weights over all-zeros (index 0) and the one-hot inputs at slots 1..k."""

    k: int
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.k < 1 or self.weights.shape != (self.k + 1,):
            raise ValueError("need k >= 1 and k + 1 weights")
        if np.any(self.weights < -1e-12) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")

    @classmethod
    def symmetric(cls, k: int, one_mass: float) -> "EpochInputDist":
        return cls(k, np.concatenate([[1.0 - one_mass], np.full(k, one_mass / k)]))

    def is_symmetric(self) -> bool:
        w = self.weights[1:]
        return bool(np.all(w == w[0]))


@dataclass
class FeedbackPolicyTree:
    """P(send 1 at slot i | nothing sent yet, erasure history) for every node."""

    k: int
    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.k < 1 or self.q.shape != (2 ** self.k - 1,):
            raise ValueError(f"a depth-{self.k} policy tree has {2 ** self.k - 1} parameters")
        if np.any(self.q < 0.0) or np.any(self.q > 1.0):
            raise ValueError("policy probabilities must lie in [0, 1]")

    @staticmethod
    def index(slot: int, history: str = "") -> int:
        """Flat index of the node at ``slot`` (1-based) after outputs ``history``."""
        if len(history) != slot - 1 or set(history) - {"0", "e"}:
            raise ValueError("history must be a string over {'0', 'e'} of length slot - 1")
        code = int(history.replace("e", "1"), 2) if history else 0
        return 2 ** (slot - 1) - 1 + code

    def at(self, slot: int, history: str = "") -> float:
        return float(self.q[self.index(slot, history)])

    @classmethod
    def zeros(cls, k: int) -> "FeedbackPolicyTree":
        return cls(k, np.zeros(2 ** k - 1))

    @classmethod
    def from_two_block(cls, p1: float, p20: float, p2e: float) -> "FeedbackPolicyTree":
        return cls(2, np.array([p1, p20, p2e]))

    @classmethod
    def open_loop(cls, d: EpochInputDist) -> "FeedbackPolicyTree":
        """The tree that ignores feedback and reproduces the law ``d``."""
        w = np.clip(d.weights[1:], 0.0, None)
        q = np.zeros(2 ** d.k - 1)
        remaining = 1.0
        for i in range(d.k):
            qi = 0.0 if remaining <= 1e-15 else min(w[i] / remaining, 1.0)
            q[2 ** i - 1: 2 ** (i + 1) - 1] = qi
            remaining -= w[i]
        return cls(d.k, q)


# ---------------------------------------------------------------------------
# feed-forward epoch entropy
# ---------------------------------------------------------------------------

def _bec_matrix(alpha: float) -> np.ndarray:
    # rows: input 0/1; columns: output 0, 1, e
    return np.array([[1 - alpha, 0.0, alpha], [0.0, 1 - alpha, alpha]])


@lru_cache(maxsize=16)
def _output_digits(k: int) -> np.ndarray:
    return np.array(list(itertools.product(range(3), repeat=k)), dtype=np.int8).reshape(-1, k)


def _epoch_channel_matrix(k: int, alpha: float) -> np.ndarray:
    """P(y^k | x^k) for the k + 1 admissible inputs, shape (3**k, k + 1)."""
    W = _bec_matrix(alpha)
    ys = _output_digits(k)
    inputs = np.zeros((k + 1, k), dtype=int)
    for j in range(1, k + 1):
        inputs[j, j - 1] = 1
    out = np.ones((ys.shape[0], k + 1))
    for t in range(k):
        out *= W[inputs[:, t][None, :], ys[:, t][:, None]]
    return out


@lru_cache(maxsize=64)
def _erasure_patterns(k: int) -> np.ndarray:
    return ((np.arange(2 ** k)[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


def _pattern_probs(k: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    M = _erasure_patterns(k)
    n_erased = M.sum(axis=1)
    return M, alpha ** n_erased * (1 - alpha) ** (k - n_erased)


def ff_rate_weights(weights: np.ndarray, alpha: float) -> float:
    """``H(Y^k) - k h2(alpha)`` by conditioning on the erasure pattern."""
    w = np.asarray(weights, dtype=float)
    k = w.size - 1
    M, pE = _pattern_probs(k, alpha)
    zero_mass = w[0] + M @ w[1:]
    h = -xlog2x(zero_mass) - (1.0 - M) @ xlog2x(w[1:])
    return float(pE @ h)


def ff_rate_weights_grad(weights: np.ndarray, alpha: float) -> np.ndarray:
    w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    k = w.size - 1
    M, pE = _pattern_probs(k, alpha)
    zero_mass = w[0] + M @ w[1:]
    lz = -np.log2(np.maximum(zero_mass, 1e-300)) - 1.0 / LN2
    lw = -np.log2(np.maximum(w[1:], 1e-300)) - 1.0 / LN2
    g = np.empty_like(w)
    g[0] = pE @ lz
    g[1:] = (pE * lz) @ M + ((pE[:, None] * (1.0 - M)).sum(axis=0)) * lw
    return g


def _binomial_pmf(k: int, alpha: float) -> np.ndarray:
    e = np.arange(k + 1)
    logc = np.array([math.lgamma(k + 1) - math.lgamma(i + 1) - math.lgamma(k - i + 1) for i in e])
    with np.errstate(divide="ignore"):
        la = np.where(e > 0, e * np.log(alpha) if alpha > 0 else -np.inf, 0.0)
        lb = np.where(k - e > 0, (k - e) * np.log1p(-alpha) if alpha < 1 else -np.inf, 0.0)
    return np.exp(logc + la + lb)


def ff_rate_symmetric(one_mass, k: int, alpha: float):
    """Rate of the law with total one-mass ``one_mass`` spread evenly over the k slots.

    With ``e`` slots erased the unerased outputs are all-zero or reveal one of
    ``k - e`` positions, so the rate is a binomial mixture of entropies.
    """
    s = np.asarray(one_mass, dtype=float)
    pmf = _binomial_pmf(k, alpha)
    live = np.arange(k, -1, -1)  # unerased slots for e = 0..k
    each = s[..., None] / k
    visible = live * each
    h = -xlog2x(1.0 - visible) - live * xlog2x(each)
    out = h @ pmf
    return float(out) if out.ndim == 0 else out


def epoch_output_entropy_ff(d: EpochInputDist, alpha: float) -> float:
    """H(Y^k) in bits for the feed-forward epoch law ``d``."""
    alpha = check_alpha(alpha)
    k = d.k
    if k <= EXHAUSTIVE_MAX_K:
        py = _epoch_channel_matrix(k, alpha) @ d.weights
        return float(-xlog2x(py).sum())
    if d.is_symmetric():
        return ff_rate_symmetric(1.0 - d.weights[0], k, alpha) + k * h2(alpha)
    if k <= SUBSET_MAX_K:
        return ff_rate_weights(d.weights, alpha) + k * h2(alpha)
    raise ValueError(f"k={k} too large for an asymmetric law")


def max_epoch_entropy_ff(k: int, alpha: float, verify: bool | None = None, seed: int = 0) -> OptResult:
    """Best feed-forward ``H(Y^k)`` under the at-most-one-1 constraint.

    The optimum is found on the symmetric family (equal one-hot weights),
    then, for ``k <= FULL_SIMPLEX_MAX_K``, checked against projected ascent
    over the whole simplex.
    """
    alpha = check_alpha(alpha)
    if k < 1:
        raise ValueError("k must be >= 1")
    res = maximize_concave_1d(lambda s: ff_rate_symmetric(s, k, alpha), 0.0, 1.0,
                              tol=1e-12, grid=201, vectorized=True)
    s = float(res.argmax[0])
    rate = float(res.value)
    weights = EpochInputDist.symmetric(k, s).weights
    if verify is None:
        verify = k <= FULL_SIMPLEX_MAX_K
    if verify and k > 1:
        rng = np.random.default_rng(seed)
        x0 = rng.dirichlet(np.ones(k + 1))
        _, full, _, _ = entropic_ascent(
            lambda w: ff_rate_weights(w, alpha), x0,
            lambda w: ff_rate_weights_grad(w, alpha), gtol=1e-9, max_iter=20000)
        if full > rate + 1e-6 or full < rate - 1e-6:
            raise ConvergenceError(
                f"symmetric optimum {rate!r} disagrees with full-simplex ascent {full!r} at k={k}")
    return OptResult(weights, rate + k * h2(alpha), res.iterations, True, 1)


# ---------------------------------------------------------------------------
# feedback epoch entropy
# ---------------------------------------------------------------------------

def epoch_output_entropy_fb(t: FeedbackPolicyTree, alpha: float) -> float:
    """H(Y^k) in bits under policy ``t``, by enumerating all 3**k outputs.

    Each output string is walked slot by slot, tracking the joint mass of
    "battery still charged" and "already spent".
    """
    alpha = check_alpha(alpha)
    k = t.k
    if k > FB_ENUM_MAX_K:
        raise ValueError(f"exhaustive enumeration limited to k <= {FB_ENUM_MAX_K}")
    ys = _output_digits(k)
    n = ys.shape[0]
    charged = np.ones(n)
    spent = np.zeros(n)
    code = np.zeros(n, dtype=np.int64)
    dead = np.zeros(n, dtype=bool)  # a 1 was observed; history left the tree
    for i in range(k):
        q = np.where(dead, 0.0, t.q[np.minimum(2 ** i - 1 + code, t.q.size - 1)])
        y = ys[:, i]
        send = charged * q
        keep = charged - send
        new_charged = np.where(y == 0, keep * (1 - alpha), np.where(y == ERASURE, keep * alpha, 0.0))
        new_spent = np.where(
            y == 1, send * (1 - alpha),
            np.where(y == 0, spent * (1 - alpha), (send + spent) * alpha))
        charged, spent = new_charged, new_spent
        dead |= y == 1
        code = 2 * code + (y == ERASURE)
    return float(-xlog2x(charged + spent).sum())


def fb_rate(t: FeedbackPolicyTree, alpha: float) -> float:
    """``H(Y^k) - k h2(alpha)`` under ``t`` by a single pass over the tree."""
    return kernels.fb_tree_rate(t.q, check_alpha(alpha), t.k, False)[0]


@lru_cache(maxsize=4)
def _dp_grid(size: int) -> np.ndarray:
    # quadratic spacing: the value functions are steepest near b = 0
    return np.linspace(0.0, 1.0, size) ** 2


@dataclass
class BeliefDP:
    """Value functions ``W_j(b)`` for ``j`` remaining slots on a belief grid.

    ``b`` is the receiver-side probability that the battery is still charged;
    the recursion is the same for every epoch length, so ``W_k(1)`` is the
    best feedback rate of a length-``k`` epoch.
    """

    alpha: float
    grid: np.ndarray
    values: list = field(default_factory=list)

    @classmethod
    def build(cls, alpha: float, horizon: int, grid_size: int = DP_GRID) -> "BeliefDP":
        dp = cls(alpha, _dp_grid(grid_size), [np.zeros(grid_size)])
        dp.extend(horizon)
        return dp

    def extend(self, horizon: int) -> None:
        while len(self.values) <= horizon:
            v, _ = kernels.belief_dp_stage(self.grid, self.grid, self.values[-1], self.alpha, DP_ITERS)
            # grid values are lower bounds; keep them monotone in the horizon
            self.values.append(np.maximum(v, self.values[-1]))

    def rate(self, k: int) -> float:
        self.extend(k)
        return float(self.values[k][-1])

    def policy(self, k: int) -> FeedbackPolicyTree:
        """Greedy policy tree for a length-``k`` epoch read off the value functions."""
        self.extend(k)
        if k > FB_TREE_MAX_K:
            raise ValueError(f"policy trees limited to k <= {FB_TREE_MAX_K}")
        a = self.alpha
        q = np.zeros(2 ** k - 1)
        b = np.ones(1)
        for i in range(k):
            _, u = kernels.belief_dp_stage(b, self.grid, self.values[k - i - 1], a, DP_ITERS)
            u = np.minimum(u, b)
            q[2 ** i - 1: 2 ** (i + 1) - 1] = np.where(b > 0, u / np.where(b > 0, b, 1.0), 0.0)
            nb = np.empty(2 * b.size)
            rest = 1.0 - u
            nb[0::2] = np.where(rest > 0, (b - u) / np.where(rest > 0, rest, 1.0), 0.0)
            nb[1::2] = b - u
            b = np.clip(nb, 0.0, 1.0)
        return FeedbackPolicyTree(k, np.clip(q, 0.0, 1.0))


def grid_epoch_rate_fb(k: int, alpha: float, points: int = 21) -> float:
    """Exhaustive maximum of the feedback rate over a product grid on the policy box.

    Subtrees interact only through the masses handed down to them, so the
    maximum over the full product grid is computed node by node.
    """
    qs = np.linspace(0.0, 1.0, points)
    a = check_alpha(alpha)

    def persp(P, t):
        return 0.0 if P <= 0 else -xlog2x(t) - xlog2x(max(P - t, 0.0)) + xlog2x(P)

    def best(level, P, F):
        if level > k or P <= 0:
            return 0.0
        out = -np.inf
        for qv in qs:
            t = F * qv
            v = (1 - a) * float(persp(P, t))
            v += best(level + 1, (1 - a) * max(P - t, 0.0), (1 - a) * (F - t))
            v += best(level + 1, a * P, a * (F - t))
            out = max(out, v)
        return out

    return best(1, 1.0, 1.0)


def default_fb_restarts(k: int) -> int:
    # 16 * 2**k for short epochs; above k = 4 the budget halves per slot
    # because each restart costs O(2**k)
    return max(4, min(16 * 2 ** k, 2 ** (13 - k)))


def max_epoch_entropy_fb(
    k: int,
    alpha: float,
    restarts: int | None = None,
    seed: int = 0,
    dp: BeliefDP | None = None,
) -> OptResult:
    """Best ``H(Y^k)`` over feedback policies under the at-most-one-1 constraint.

    Candidates, best kept: the belief-DP policy, the open-loop tree of the
    feed-forward optimum, and (``k <= FB_MULTISTART_MAX_K``) multi-start
    projected ascent on the policy box seeded with both. Every candidate is
    a concrete policy evaluated exactly, so the value is attained. Above
    ``FB_POLISH_MAX_K`` the best candidate is not polished; beyond
    ``FB_TREE_MAX_K`` only the DP value is available. For ``k <= 3`` the
    result is checked against an exhaustive 21-point-per-axis grid.
    """
    alpha = check_alpha(alpha)
    if k < 1:
        raise ValueError("k must be >= 1")
    if dp is None:
        dp = BeliefDP.build(alpha, k)
    hk = k * h2(alpha)
    ff = max_epoch_entropy_ff(k, alpha, verify=False)
    ff_rate = ff.value - hk
    if k > FB_TREE_MAX_K:
        rate = max(dp.rate(k), ff_rate)
        return OptResult(np.array([]), rate + hk, 0, True, 0)

    open_loop = FeedbackPolicyTree.open_loop(EpochInputDist(k, ff.argmax))
    cands = [dp.policy(k), open_loop]

    def f(x):
        return kernels.fb_tree_rate(x, alpha, k, False)[0]

    def g(x):
        return kernels.fb_tree_rate(x, alpha, k, True)[1]

    box = Box.unit(2 ** k - 1)
    iterations, used, converged = 0, len(cands), True
    if k <= FB_MULTISTART_MAX_K:
        res = maximize_multistart(
            f, box, restarts=default_fb_restarts(k) if restarts is None else restarts,
            seed=seed, grad=g, extra_starts=[c.q for c in cands], gtol=1e-10, max_iter=1000)
        best_q, iterations, used, converged = res.argmax, res.iterations, res.restarts_used, res.converged
    else:
        best_q = max((c.q for c in cands), key=f)
        # polishing gains ~1e-8 here while one step costs O(2**k)
        if k <= FB_POLISH_MAX_K:
            x, fx, iterations, _ = projected_ascent(f, best_q, box, g, gtol=1e-10, max_iter=500)
            if fx > f(best_q):
                best_q = x
    best_q = np.clip(best_q, 0.0, 1.0)
    rate = f(best_q)
    if k <= 3:
        grid_rate = grid_epoch_rate_fb(k, alpha)
        if rate < grid_rate - 1e-9:
            raise ConvergenceError(f"ascent {rate!r} below grid search {grid_rate!r} at k={k}")
    return OptResult(best_q, rate + hk, iterations, converged, used)


def per_epoch_rate(k: int, alpha: float, feedback: bool, **kw) -> float:
    """``max H(Y^k) - k h2(alpha)``: the rate one epoch of length ``k`` carries."""
    opt = max_epoch_entropy_fb(k, alpha, **kw) if feedback else max_epoch_entropy_ff(k, alpha)
    return opt.value - k * h2(alpha)


# ---------------------------------------------------------------------------
# series over epoch lengths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesSpec:
    p: float
    alpha: float
    tol: float = 1e-6
    k_max: int = 200

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("arrival probability must lie in (0, 1]")
        check_alpha(self.alpha)
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


def tail_bound(p: float, n_terms: int) -> float:
    """Bound on the terms past ``n_terms``, using ``H(Y^k) <= k log2 3``."""
    if p >= 1.0:
        return 0.0
    return LOG2_3 * (1.0 - p) ** n_terms * (1.0 + n_terms * p)


def terms_needed(p: float, tol: float) -> int:
    n = 1
    while tail_bound(p, n) > tol:
        n += 1
    return n


def series_capacity(spec: SeriesSpec, feedback: bool) -> CapacityResult:
    """Capacity in bits per channel use as a truncated sum over epoch lengths.

    Sums ``p^2 (1-p)^(k-1) (max H(Y^k) - k h2(alpha))`` for ``k = 1..N``;
    the ``k h2(alpha)`` pieces add up to the single ``h2(alpha)`` outside the
    sum, and every omitted term is nonnegative and below the reported bound.
    """
    p, alpha = spec.p, spec.alpha
    needed = 1 if p >= 1.0 else terms_needed(p, spec.tol)
    n_used = min(needed, spec.k_max)
    partial = needed > spec.k_max
    dp = BeliefDP.build(alpha, n_used) if feedback else None
    per_k, parts = [], []
    for k in range(1, n_used + 1):
        weight = p * p * (1.0 - p) ** (k - 1) if p < 1.0 else 1.0
        if feedback:
            max_h = max_epoch_entropy_fb(k, alpha, dp=dp).value
        else:
            max_h = max_epoch_entropy_ff(k, alpha, verify=False).value
        rate = max(max_h - k * h2(alpha), 0.0)
        parts.append(weight * rate)
        per_k.append({"k": k, "weight": weight, "maxH": max_h, "rate": rate})
    value = math.fsum(parts)
    bound = tail_bound(p, n_used)
    return CapacityResult(
        value, None, "series",
        residual=bound,
        details={"N_used": n_used, "tail_bound": bound, "per_k": per_k,
                 "partial": partial, "feedback": feedback},
    )


def partial_sums(result: CapacityResult) -> list[float]:
    out, acc = [], []
    for row in result.details["per_k"]:
        acc.append(row["weight"] * row["rate"])
        out.append(math.fsum(acc))
    return out


def series_to_json(result: CapacityResult) -> str:
    d = result.details
    payload = {
        "value": result.value,
        "N_used": d["N_used"],
        "tail_bound": d["tail_bound"],
        "per_k": d["per_k"],
    }
    if d.get("partial"):
        payload["partial"] = True
    return json.dumps(payload, sort_keys=True)
