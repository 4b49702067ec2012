"""Independent oracles for the periodic channel and Monte Carlo checks.

The brute-force oracles enumerate every (x^n, y^n) pair the channel can
produce from the initial state, drive the state machine of
:mod:`ehbec.channel` to get the channel law, and optimize the exact
n-letter mutual or directed information. Nothing here reuses the
two-slot formulas of :mod:`ehbec.periodic`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .channel import (
    ERASURE,
    INITIAL_STATE,
    check_alpha,
    effective_input,
    empirical_epoch_dist,
    epoch_decompose,
    geometric_epoch_dist,
    is_feasible,
    sample_arrivals,
    step_state,
)
from .numerics import (
    LN2,
    Box,
    ConvergenceError,
    Simplex,
    entropic_ascent,
    maximize_multistart,
    xlog2x,
)
from .periodic import CapacityResult

BRUTE_FORCE_N = (2, 4)
DI_RESTARTS = {2: 32, 4: 128}
BATCH = 1 << 18


# ---------------------------------------------------------------------------
# block enumeration
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def feasible_inputs(n: int) -> tuple[tuple[int, ...], ...]:
    """Input blocks that never spend energy the battery does not hold."""
    return tuple(x for x in itertools.product((0, 1), repeat=n) if is_feasible(x))


def _charged_before(x_prefix) -> bool:
    s = INITIAL_STATE
    for x in x_prefix:
        s = step_state(s, x)
    return s.battery == 1


def _outputs_for(x) -> list[tuple[int, ...]]:
    # each slot shows the effective input or an erasure
    s, options = INITIAL_STATE, []
    for xt in x:
        options.append((effective_input(xt, s), ERASURE))
        s = step_state(s, xt)
    return list(itertools.product(*options))


@lru_cache(maxsize=8)
def feedback_histories(n: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """``(x^{t-1}, y^{t-1})`` histories after which sending a 1 is possible.

    One causal-conditioning parameter ``P(X_t = 1 | history)`` is attached
    to each; everywhere else the input is forced to 0.
    """
    out = []
    for t in range(n):
        for x in itertools.product((0, 1), repeat=t):
            if not is_feasible(x) or not _charged_before(x):
                continue
            out.extend((x, y) for y in _outputs_for(x))
    return tuple(out)


@dataclass(frozen=True)
class _Block:
    n: int
    X: np.ndarray        # (atoms, n) inputs
    Y: np.ndarray        # (atoms, n) outputs
    x_index: np.ndarray  # atom -> row of feasible_inputs(n)
    param: np.ndarray    # (atoms, n) feedback parameter index, -1 where forced to 0
    groups: tuple        # per slot: dense labels for y^t, y^{t-1}, (x^t, y^t), (x^t, y^{t-1})
    y_label: np.ndarray  # atom -> index into the 3**n output strings


def _dense(keys: list[tuple]) -> np.ndarray:
    index: dict = {}
    return np.array([index.setdefault(k, len(index)) for k in keys])


@lru_cache(maxsize=8)
def _block(n: int) -> _Block:
    hist = {h: i for i, h in enumerate(feedback_histories(n))}
    X, Y, xi, P = [], [], [], []
    for i, x in enumerate(feasible_inputs(n)):
        for y in _outputs_for(x):
            X.append(x)
            Y.append(y)
            xi.append(i)
            P.append([hist.get((x[:t], y[:t]), -1) for t in range(n)])
    X, Y = np.array(X), np.array(Y)
    groups = []
    for t in range(1, n + 1):
        rows = list(zip(map(tuple, X), map(tuple, Y)))
        groups.append((
            _dense([y[:t] for _, y in rows]),
            _dense([y[:t - 1] for _, y in rows]),
            _dense([(x[:t], y[:t]) for x, y in rows]),
            _dense([(x[:t], y[:t - 1]) for x, y in rows]),
        ))
    y_label = (Y * 3 ** np.arange(n - 1, -1, -1)).sum(axis=1)
    return _Block(n, X, Y, np.array(xi), np.array(P), tuple(groups), y_label)


def _check_n(n: int) -> int:
    if n not in BRUTE_FORCE_N:
        raise ValueError(f"block length must be one of {BRUTE_FORCE_N}, got {n!r}")
    return n


def _channel_probs(b: _Block, alpha: float) -> np.ndarray:
    erased = (b.Y == ERASURE).sum(axis=1)
    return alpha ** erased * (1.0 - alpha) ** (b.n - erased)


def _group_entropy(labels: np.ndarray, p: np.ndarray) -> float:
    return float(-xlog2x(np.bincount(labels, weights=p)).sum())


# ---------------------------------------------------------------------------
# input laws
# ---------------------------------------------------------------------------

@dataclass
class BlockInputLaw:
    """Feed-forward (``probs`` over :func:`feasible_inputs`) or feedback
    (``params`` over :func:`feedback_histories`) law on blocks of ``n`` uses."""

    n: int
    probs: np.ndarray | None = None
    params: np.ndarray | None = None

    def __post_init__(self):
        if (self.probs is None) == (self.params is None):
            raise ValueError("give exactly one of probs (feed-forward) or params (feedback)")
        if self.probs is not None:
            self.probs = np.asarray(self.probs, dtype=float)
            if self.probs.shape != (len(feasible_inputs(self.n)),):
                raise ValueError(f"need one probability per feasible block ({len(feasible_inputs(self.n))})")
            if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-9:
                raise ValueError("probs must be a probability vector")
        else:
            self.params = np.asarray(self.params, dtype=float)
            if self.params.shape != (len(feedback_histories(self.n)),):
                raise ValueError(f"need one parameter per history ({len(feedback_histories(self.n))})")
            if np.any(self.params < 0) or np.any(self.params > 1):
                raise ValueError("params must lie in [0, 1]")

    @property
    def feedback(self) -> bool:
        return self.params is not None

    @classmethod
    def from_sequences(cls, n: int, masses: dict) -> "BlockInputLaw":
        """Feed-forward law from ``{x^n: mass}``; infeasible blocks are rejected."""
        idx = {x: i for i, x in enumerate(feasible_inputs(n))}
        probs = np.zeros(len(idx))
        for x, m in masses.items():
            x = tuple(int(v) for v in x)
            if len(x) != n:
                raise ValueError(f"block {x} does not have length {n}")
            if x not in idx:
                if m > 0:
                    raise ValueError(f"block {x} violates the battery constraint")
                continue
            probs[idx[x]] = m
        return cls(n, probs=probs)

    @classmethod
    def uniform(cls, n: int) -> "BlockInputLaw":
        k = len(feasible_inputs(n))
        return cls(n, probs=np.full(k, 1.0 / k))

    @classmethod
    def all_zeros(cls, n: int) -> "BlockInputLaw":
        return cls.from_sequences(n, {(0,) * n: 1.0})

    def atom_input_probs(self) -> np.ndarray:
        """``P(x^n || y^{n-1})`` for every enumerated (x^n, y^n) atom."""
        b = _block(self.n)
        if not self.feedback:
            return self.probs[b.x_index]
        q = np.where(b.param >= 0, self.params[np.maximum(b.param, 0)], 0.0)
        return np.prod(np.where(b.X == 1, q, 1.0 - q), axis=1)

    def joint(self, alpha: float) -> np.ndarray:
        return self.atom_input_probs() * _channel_probs(_block(self.n), check_alpha(alpha))

    def output_law(self, alpha: float) -> np.ndarray:
        """Exact ``P(y^n)`` over the 3**n output strings (base-3, first slot most significant)."""
        b = _block(self.n)
        return np.bincount(b.y_label, weights=self.joint(alpha), minlength=3 ** self.n)


def mutual_info_block(law: BlockInputLaw, alpha: float) -> float:
    """``I(X^n; Y^n)`` in bits from the enumerated joint law."""
    b = _block(law.n)
    p = law.joint(alpha)
    hx = _group_entropy(b.x_index, p)
    hy = _group_entropy(b.y_label, p)
    return hx + hy + float(xlog2x(p).sum())


def directed_info_block(law: BlockInputLaw, alpha: float) -> float:
    """``sum_t I(X^t; Y_t | Y^{t-1})`` in bits from the enumerated joint law."""
    return _directed_info(_block(law.n), law.joint(alpha))


def _directed_info(b: _Block, p: np.ndarray) -> float:
    out = 0.0
    for y_t, y_prev, xy_t, xy_prev in b.groups:
        out += (_group_entropy(y_t, p) - _group_entropy(y_prev, p)
                - _group_entropy(xy_t, p) + _group_entropy(xy_prev, p))
    return out


def _directed_info_grad_atoms(b: _Block, p: np.ndarray) -> np.ndarray:
    def logm(labels):
        return np.log2(np.maximum(np.bincount(labels, weights=p), 1e-300))[labels]

    g = np.zeros_like(p)
    for y_t, y_prev, xy_t, xy_prev in b.groups:
        g += -logm(y_t) + logm(y_prev) + logm(xy_t) - logm(xy_prev)
    return g


def _di_value_and_grad(theta: np.ndarray, n: int, alpha: float):
    b = _block(n)
    theta = np.clip(theta, 0.0, 1.0)
    chan = _channel_probs(b, alpha)
    q = np.where(b.param >= 0, theta[np.maximum(b.param, 0)], 0.0)
    factors = np.where(b.X == 1, q, 1.0 - q)
    p = np.prod(factors, axis=1) * chan
    g_atom = _directed_info_grad_atoms(b, p)
    grad = np.zeros(theta.size)
    for t in range(n):
        live = b.param[:, t] >= 0
        others = np.prod(np.delete(factors, t, axis=1), axis=1) * chan
        sign = np.where(b.X[:, t] == 1, 1.0, -1.0)
        np.add.at(grad, b.param[live, t], (g_atom * others * sign)[live])
    return _directed_info(b, p), grad


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def _channel_matrix(n: int, alpha: float) -> np.ndarray:
    b = _block(n)
    W = np.zeros((len(feasible_inputs(n)), 3 ** n))
    np.add.at(W, (b.x_index, b.y_label), _channel_probs(b, alpha))
    return W


def _mi_from_matrix(w: np.ndarray, W: np.ndarray, hw: np.ndarray) -> np.ndarray:
    # I = H(Y) - sum_x w_x H(Y | x); works on a stack of laws
    py = w @ W
    return -xlog2x(py).sum(axis=-1) - w @ hw


def solve_block_mi(n: int, alpha: float, restarts: int = 8, seed: int = 0) -> CapacityResult:
    """Best ``I(X^n; Y^n) / n`` over feed-forward laws on feasible blocks.

    Entropic ascent on the simplex with a duality-gap certificate, plus a
    grid search for ``n = 2`` and the product-law value for ``n = 4``.
    """
    n = _check_n(n)
    alpha = check_alpha(alpha)
    W = _channel_matrix(n, alpha)
    hw = -xlog2x(W).sum(axis=1)

    def f(w):
        return float(_mi_from_matrix(np.clip(w, 0.0, None), W, hw))

    def g(w):
        py = np.clip(w, 0.0, None) @ W
        ly = np.log2(np.maximum(py, 1e-300))
        return -(W * ly).sum(axis=1) - hw - 1.0 / LN2

    k = W.shape[0]
    res = maximize_multistart(f, Simplex(k), restarts=restarts, seed=seed, grad=g,
                              extra_starts=[np.full(k, 1.0 / k)], gtol=1e-12, max_iter=20000)
    w = res.argmax
    _, _, _, gap = entropic_ascent(f, w, g, gtol=1e-12, max_iter=1)
    out = CapacityResult(res.value / n, BlockInputLaw(n, probs=w / w.sum()), "brute_force",
                         residual=gap / n)
    if n == 2:
        m = 400
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = i + j <= m
        pts = np.stack([m - i[keep] - j[keep], i[keep], j[keep]], axis=1) / m
        # rows of feasible_inputs(2) are (0,0), (0,1), (1,0)
        grid = float(_mi_from_matrix(pts, W, hw).max()) / n
        out.details["grid_value"] = grid
        if grid > out.value + 1e-12:
            raise ConvergenceError(f"ascent {out.value!r} below grid search {grid!r} at alpha={alpha}")
    else:
        half = solve_block_mi(2, alpha, restarts, seed)
        w2 = half.maximizer.probs
        inputs = feasible_inputs(n)
        two = feasible_inputs(2)
        prod = np.array([w2[two.index(x[:2])] * w2[two.index(x[2:])] for x in inputs])
        out.details["product_value"] = f(prod) / n
    out.details["duality_gap"] = gap
    return out


def brute_force_mi(n: int, alpha: float) -> float:
    """``max (1/n) I(X^n; Y^n)`` over battery-feasible block laws, in bits per use."""
    return solve_block_mi(n, alpha).value


def _product_feedback_params(n: int, two: np.ndarray) -> np.ndarray:
    # repeat the two-slot law in every block, ignoring earlier blocks
    hist2 = {h: i for i, h in enumerate(feedback_histories(2))}
    out = []
    for x, y in feedback_histories(n):
        t0 = len(x) - len(x) % 2
        out.append(two[hist2[(x[t0:], y[t0:])]])
    return np.array(out)


def solve_block_di(n: int, alpha: float, restarts: int | None = None, seed: int = 0) -> CapacityResult:
    """Best ``I(X^n -> Y^n) / n`` over causal-conditioning laws.

    For ``n = 2`` the result is checked against a 21-point-per-axis grid.
    For ``n = 4`` the repeated best two-slot law is one of the starts, so
    the value is a certified lower bound; global optimality is not.
    """
    n = _check_n(n)
    alpha = check_alpha(alpha)
    m = len(feedback_histories(n))
    if restarts is None:
        restarts = DI_RESTARTS[n]

    def f(x):
        return _di_value_and_grad(x, n, alpha)[0]

    def g(x):
        return _di_value_and_grad(x, n, alpha)[1]

    extra = [np.full(m, 0.5)]
    if n > 2:
        extra.append(_product_feedback_params(n, solve_block_di(2, alpha, seed=seed).maximizer.params))
    res = maximize_multistart(f, Box.unit(m), restarts=restarts, seed=seed, grad=g,
                              extra_starts=extra, gtol=1e-10,
                              max_iter=2000 if n == 2 else 400)
    theta = np.clip(res.argmax, 0.0, 1.0)
    out = CapacityResult(f(theta) / n, BlockInputLaw(n, params=theta), "brute_force")
    out.details["converged"] = res.converged
    out.details["restarts"] = res.restarts_used
    if n == 2:
        axis = np.linspace(0.0, 1.0, 21)
        grid = max(f(np.array(t)) for t in itertools.product(axis, repeat=m)) / n
        out.details["grid_value"] = grid
        if out.value < grid - 1e-12:
            raise ConvergenceError(f"ascent {out.value!r} below grid search {grid!r} at alpha={alpha}")
    if not res.converged and n == 2:
        raise ConvergenceError(f"directed-information ascent did not converge at alpha={alpha}")
    return out


def brute_force_di(n: int, alpha: float, restarts: int | None = None, seed: int = 0) -> float:
    """``max (1/n) I(X^n -> Y^n)`` over causal-conditioning laws, in bits per use."""
    return solve_block_di(n, alpha, restarts, seed).value


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    empirical: float
    analytic: float
    stderr: float
    bound: float
    passed: bool


@dataclass
class SimReport:
    kind: str
    samples: int
    seed: int
    checks: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def add(self, name: str, empirical: float, analytic: float, stderr: float, bound: float) -> Check:
        c = Check(name, float(empirical), float(analytic), float(stderr), float(bound),
                  bool(abs(empirical - analytic) <= bound))
        self.checks.append(c)
        return c

    def add_at_least(self, name: str, empirical: float, threshold: float, stderr: float) -> Check:
        """One-sided check ``empirical >= threshold``; ``bound`` is stored as 0."""
        c = Check(name, float(empirical), float(threshold), float(stderr), 0.0,
                  bool(empirical >= threshold))
        self.checks.append(c)
        return c

    def to_json(self) -> str:
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SimReport":
        d = json.loads(text)
        d.pop("passed", None)
        d["checks"] = [Check(**c) for c in d["checks"]]
        return cls(**d)


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, batch]))


def _require_seed(seed) -> int:
    if seed is None:
        raise ValueError("a seed is required")
    return int(seed)


# ---------------------------------------------------------------------------
# channel simulation
# ---------------------------------------------------------------------------

def sample_block(law: BlockInputLaw, alpha: float, size: int, rng: np.random.Generator):
    """Draw ``size`` (x^n, y^n) pairs through the channel state machine.

    Returns the intended inputs and the outputs, both of shape ``(size, n)``.
    """
    alpha = check_alpha(alpha)
    n = law.n
    x = np.zeros((size, n), dtype=np.int64)
    y = np.zeros((size, n), dtype=np.int64)
    if not law.feedback:
        rows = np.array(feasible_inputs(n))
        x[:] = rows[rng.choice(rows.shape[0], size=size, p=law.probs / law.probs.sum())]
    else:
        hist = {h: i for i, h in enumerate(feedback_histories(n))}
    state = type(INITIAL_STATE)(np.full(size, INITIAL_STATE.parity), np.full(size, INITIAL_STATE.battery))
    code = np.zeros(size, dtype=np.int64)  # base-6 history of (x, y) pairs
    for t in range(n):
        if law.feedback:
            table = np.full(6 ** t, -1)
            for (hx, hy), i in hist.items():
                if len(hx) == t:
                    c = 0
                    for a, b in zip(hx, hy):
                        c = 6 * c + 3 * a + b
                    table[c] = i
            idx = table[code]
            q = np.where(idx >= 0, law.params[np.maximum(idx, 0)], 0.0)
            x[:, t] = rng.random(size) < q
        x_eff = effective_input(x[:, t], state)
        y[:, t] = np.where(rng.random(size) < alpha, ERASURE, x_eff)
        code = 6 * code + 3 * x[:, t] + y[:, t]
        state = step_state(state, x[:, t])
    return x, y


def simulate_channel(law: BlockInputLaw, alpha: float, samples: int, seed) -> SimReport:
    """Empirical output law against the exact enumerated one, atom by atom (3 sigma)."""
    seed = _require_seed(seed)
    alpha = check_alpha(alpha)
    if samples < 10_000:
        raise ValueError("need at least 10^4 samples")
    n = law.n
    counts = np.zeros(3 ** n)
    powers = 3 ** np.arange(n - 1, -1, -1)
    ones_seen = 0
    for batch, start in enumerate(range(0, samples, BATCH)):
        size = min(BATCH, samples - start)
        _, y = sample_block(law, alpha, size, _batch_rng(seed, batch))
        counts += np.bincount(y @ powers, minlength=3 ** n)
        ones_seen += int((y == 1).sum())
    freq = counts / samples
    exact = law.output_law(alpha)
    stderr = np.sqrt(freq * (1.0 - freq) / (samples - 1))
    rep = SimReport("channel", samples, seed, details={"n": n, "alpha": alpha, "ones_seen": ones_seen})
    for label in range(3 ** n):
        digits = np.base_repr(label, 3).zfill(n).replace("2", "e")
        rep.add(f"P(y={digits})", freq[label], exact[label], stderr[label], 3.0 * stderr[label])
    return rep


def output_error_scaling(law: BlockInputLaw, alpha: float, samples: int, seeds: int, seed: int = 0) -> float:
    """``rms(samples) / rms(2 * samples)`` for the empirical output law.

    RMS errors are pooled over ``seeds`` repetitions; an unbiased simulator
    gives about sqrt(2).
    """
    exact = law.output_law(alpha)
    powers = 3 ** np.arange(law.n - 1, -1, -1)
    err = {samples: 0.0, 2 * samples: 0.0}
    for size in err:
        for s in range(seeds):
            _, y = sample_block(law, alpha, size, _batch_rng(seed + s, size))
            freq = np.bincount(y @ powers, minlength=3 ** law.n) / size
            err[size] += float(((freq - exact) ** 2).sum())
    return math.sqrt(err[samples] / err[2 * samples])


# ---------------------------------------------------------------------------
# epoch typicality
# ---------------------------------------------------------------------------

TYPICALITY_BLOCKS = 100


def epoch_typicality_check(p: float, n: int, epsilon: float, N: int, seed) -> SimReport:
    """Whether one sampled E^n lies in the typical set for (epsilon, N).

    The check for each ``k <= N`` is ``|pi(k) - p q(k)| <= epsilon p q(k)``;
    standard errors come from batch means over contiguous blocks.
    """
    seed = _require_seed(seed)
    if not 0.0 < p <= 1.0:
        raise ValueError("arrival probability must lie in (0, 1]")
    if n < 10_000:
        raise ValueError("need n >= 10^4")
    if epsilon <= 0 or N < 1:
        raise ValueError("need epsilon > 0 and N >= 1")
    e = sample_arrivals(p, n, _batch_rng(seed, 0))
    pi = empirical_epoch_dist(e, N)
    target = p * geometric_epoch_dist(p, N)
    dec = epoch_decompose(e)
    k = np.minimum(np.asarray(dec.lengths), N) - 1
    block = (np.asarray(dec.arrival_times) - 1) * TYPICALITY_BLOCKS // n
    per_block = np.bincount(block * N + k, minlength=TYPICALITY_BLOCKS * N).reshape(TYPICALITY_BLOCKS, N)
    per_block = per_block / (n / TYPICALITY_BLOCKS)
    stderr = per_block.std(axis=0, ddof=1) / math.sqrt(TYPICALITY_BLOCKS)
    rep = SimReport("typicality", n, seed, details={"p": p, "epsilon": epsilon, "N": N, "m": dec.m})
    for i in range(N):
        rep.add(f"pi({i + 1})", pi[i], target[i], stderr[i], epsilon * target[i])
    return rep


def typicality_frequency(p: float, n: int, epsilon: float, N: int, seeds: int, seed: int = 0,
                         threshold: float = 0.95) -> SimReport:
    """Fraction of ``seeds`` independent sequences that are typical."""
    hits = 0
    for s in range(seeds):
        hits += epoch_typicality_check(p, n, epsilon, N, seed + s).passed
    rep = SimReport("typicality_frequency", n, seed,
                    details={"p": p, "epsilon": epsilon, "N": N, "seeds": seeds, "typical": hits})
    freq = hits / seeds
    stderr = math.sqrt(freq * (1.0 - freq) / max(seeds - 1, 1))
    rep.add_at_least("membership", freq, threshold, stderr)
    return rep
