"""Independent reference computations used by the tests."""

import itertools
import math

import numpy as np

ALPHA_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)


def blahut_arimoto(W, iters=50000, tol=1e-13):
    """Capacity in bits of the channel with rows ``W[x]``; returns (lower, upper)."""
    W = np.asarray(W, dtype=float)
    p = np.full(W.shape[0], 1.0 / W.shape[0])
    lo = hi = 0.0
    for _ in range(iters):
        q = p @ W
        with np.errstate(divide="ignore", invalid="ignore"):
            D = np.where(W > 0, W * np.log2(W / q), 0.0).sum(axis=1)
        lo, hi = math.log2(p @ np.exp2(D)), float(D.max())
        if hi - lo < tol:
            break
        p = p * np.exp2(D)
        p /= p.sum()
    return lo, hi


def bec_block_matrix(inputs, alpha):
    """``P(y^k | x^k)`` for a memoryless BEC; outputs ordered base 3 (2 = erasure)."""
    k = len(inputs[0])
    ys = list(itertools.product((0, 1, 2), repeat=k))
    W = np.zeros((len(inputs), len(ys)))
    for i, x in enumerate(inputs):
        for j, y in enumerate(ys):
            pr = 1.0
            for xt, yt in zip(x, y):
                pr *= alpha if yt == 2 else ((1 - alpha) if yt == xt else 0.0)
            W[i, j] = pr
    return W


def one_hot_inputs(k):
    return [(0,) * k] + [tuple(int(i == j) for i in range(k)) for j in range(k)]


def plain_h2(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def policy_q(q, slot, history):
    """Documented flat layout: slot i, history over {0, e} -> 2**(i-1) - 1 + code."""
    code = int("".join("1" if h == 2 else "0" for h in history), 2) if history else 0
    return q[2 ** (slot - 1) - 1 + code]


def fb_epoch_entropy(q, k, alpha):
    """H(Y^k) under a feedback policy, summing over the slot of the single 1."""
    total = 0.0
    for y in itertools.product((0, 1, 2), repeat=k):
        py = 0.0
        for j in range(k + 1):  # j = k: nothing sent
            pr = 1.0
            for i in range(k):
                xi = 1 if i == j else 0
                if i <= j and i < k:
                    if i < j:
                        if y[i] == 1:  # an unsent prefix cannot show a 1
                            pr = 0.0
                            break
                        pr *= 1 - policy_q(q, i + 1, y[:i])
                    elif j < k:
                        pr *= policy_q(q, i + 1, y[:i])
                pr *= alpha if y[i] == 2 else ((1 - alpha) if y[i] == xi else 0.0)
                if pr == 0.0:
                    break
            py += pr
        if py > 0:
            total -= py * math.log2(py)
    return total
