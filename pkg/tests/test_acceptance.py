"""Release gate: one PASS/FAIL line per acceptance criterion.

Run under pytest (the lines are printed even when output is captured) or
directly with ``python3 tests/test_acceptance.py``. Tolerances and runtime
limits are the published acceptance values; nothing is loosened here.
"""

import math
import sys
import time

import numpy as np
import pytest

from ehbec import kernels
from ehbec.iid import (
    BeliefDP,
    SeriesSpec,
    max_epoch_entropy_fb,
    per_epoch_rate,
    series_capacity,
)
from ehbec.numerics import Box, fd_gradient, h2
from ehbec.periodic import (
    FeedbackTwoBlockDist,
    capacity_curve,
    capacity_fb_closed,
    capacity_fb_numeric,
    capacity_ff,
    default_grid,
    directed_info_gradient,
    directed_info_two_block,
    mutual_info_two_block,
)
from ehbec.statechannel import StateChannelParams, objective_no_estimate, objective_with_estimate, state_gap_scan
from ehbec.verifier import (
    BlockInputLaw,
    brute_force_di,
    brute_force_mi,
    simulate_channel,
    solve_block_di,
    typicality_frequency,
)

ALPHAS = (0.1, 0.25, 0.5, 0.75, 0.9)


def _line(k, checks, elapsed, limit):
    checks = list(checks) + [(f"runtime {elapsed:.1f}s < {limit}s", elapsed < limit)]
    failed = [name for name, ok in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    detail = "; ".join(name for name, _ in checks) if not failed else "failed: " + "; ".join(failed)
    return status, f"criterion {k}: {status} ({detail})"


def _emit(capsys, text):
    if capsys is None:
        print(text)
    else:
        with capsys.disabled():
            print("\n" + text)


def criterion_1():
    t = time.perf_counter()
    r = capacity_ff(0.5)
    el = time.perf_counter() - t
    return [(f"C={r.value:.6f} vs 0.4339+-5e-4", abs(r.value - 0.4339) <= 5e-4),
            (f"pi*={r.maximizer.pi:.7f} vs 0.381966+-1e-5", abs(r.maximizer.pi - 0.381966) <= 1e-5)], el, 1


def criterion_2():
    t = time.perf_counter()
    closed = capacity_fb_closed(0.5).value
    num = capacity_fb_numeric(0.5)
    el = time.perf_counter() - t
    return [(f"closed={closed:.6f} vs 0.4429+-5e-4", abs(closed - 0.4429) <= 5e-4),
            (f"numeric={num.value:.6f} vs 0.4429+-5e-4", abs(num.value - 0.4429) <= 5e-4),
            (f"p20={num.maximizer.p20:.5f} vs 0.5+-1e-3", abs(num.maximizer.p20 - 0.5) <= 1e-3)], el, 5


def criterion_3():
    t = time.perf_counter()
    rows = capacity_curve(default_grid())
    el = time.perf_counter() - t
    gaps = np.array([r.c_fb - r.c_ff for r in rows])
    alphas = np.array([r.alpha for r in rows])
    inner = (alphas >= 0.05) & (alphas <= 0.95)
    return [(f"{len(rows)} points", len(rows) == 101),
            ("C_fb >= C everywhere", bool(np.all(gaps >= 0))),
            (f"min gap on [0.05,0.95] = {gaps[inner].min():.2e} > 1e-4", bool(gaps[inner].min() > 1e-4)),
            (f"end gaps {gaps[0]:.1e},{gaps[-1]:.1e} < 1e-9", bool(abs(gaps[0]) < 1e-9 and abs(gaps[-1]) < 1e-9))], el, 30


def criterion_4():
    t = time.perf_counter()
    e2 = e2f = e4 = 0.0
    for a in ALPHAS:
        mi2 = brute_force_mi(2, a)
        e2 = max(e2, abs(mi2 - capacity_ff(a).value))
        e2f = max(e2f, abs(brute_force_di(2, a) - capacity_fb_closed(a).value))
        e4 = max(e4, abs(brute_force_mi(4, a) - mi2))
    el = time.perf_counter() - t
    return [(f"max |mi(2)-C| = {e2:.1e} <= 1e-5", e2 <= 1e-5),
            (f"max |di(2)-C_fb| = {e2f:.1e} <= 1e-5", e2f <= 1e-5),
            (f"max |mi(4)-mi(2)| = {e4:.1e} <= 1e-4", e4 <= 1e-4)], el, 120


def criterion_5():
    t = time.perf_counter()
    e_ff = e_fb = 0.0
    for a in np.linspace(0.05, 0.95, 19):
        a = float(a)
        e_ff = max(e_ff, abs(per_epoch_rate(2, a, False) / 2 - capacity_ff(a).value))
        e_fb = max(e_fb, abs(per_epoch_rate(2, a, True) / 2 - capacity_fb_closed(a).value))
    tol = 1e-6
    e_p1 = 0.0
    for a in (0.0, 0.25, 0.5, 0.75, 1.0):
        for fb in (False, True):
            e_p1 = max(e_p1, abs(series_capacity(SeriesSpec(1.0, a, tol), fb).value - (1 - a)))
    spec = SeriesSpec(0.5, 0.5, tol)
    ff = series_capacity(spec, False).value
    fb = series_capacity(spec, True).value
    floor = 0.5 ** 2 * 0.5 * 0.0175 - 2 * tol
    el = time.perf_counter() - t
    return [(f"19-point grid: max ff err {e_ff:.1e}, fb err {e_fb:.1e} <= 1e-5", e_ff <= 1e-5 and e_fb <= 1e-5),
            (f"p=1 err {e_p1:.1e} <= tol", e_p1 <= tol),
            (f"series gap {fb - ff:.3e} >= {floor:.3e}", fb - ff >= floor)], el, 300


def criterion_6(rng=None):
    rng = rng or np.random.default_rng(6)
    t = time.perf_counter()
    worst = -math.inf
    for a in ALPHAS:
        dp = BeliefDP.build(a, 6)
        for k in range(1, 7):
            for fb in (False, True):
                r = per_epoch_rate(k, a, fb, dp=dp) if fb else per_epoch_rate(k, a, fb)
                worst = max(worst, r - k * (1 - a))
    grid = [round(0.1 * i, 10) for i in range(11)]
    table_ok = True
    for row in state_gap_scan(grid, grid):
        boundary = row.p in (0.0, 1.0) or row.alpha in (0.0, 1.0)
        table_ok &= row.gap >= -1e-9 and ((abs(row.gap) < 1e-9) if boundary else (row.gap > 1e-9))
    # concavity: h2, the two-slot objective in pi, the state objectives in r
    p, q, lam = rng.random((3, 10_000))
    conc = bool(np.all(h2(lam * p + (1 - lam) * q) >= lam * h2(p) + (1 - lam) * h2(q) - 1e-12))
    for _ in range(300):
        a, u, v = rng.random(3)
        conc &= (mutual_info_two_block((u + v) / 4, a)
                 >= (mutual_info_two_block(u / 2, a) + mutual_info_two_block(v / 2, a)) / 2 - 1e-12)
        sp = StateChannelParams(float(rng.random()), float(a))
        for obj in (objective_no_estimate, objective_with_estimate):
            conc &= obj((u + v) / 2, sp) >= (obj(u, sp) + obj(v, sp)) / 2 - 1e-12
    # gradients: two-slot directed information and feedback policy trees
    grad_ok = True
    for _ in range(100):
        x = rng.uniform(0.05, 0.95, 3)
        a = float(rng.uniform(0.05, 0.95))
        fd = fd_gradient(lambda z: directed_info_two_block(FeedbackTwoBlockDist(*z), a), x, Box.unit(3), h=1e-6)
        grad_ok &= bool(np.allclose(directed_info_gradient(x, a), fd, rtol=1e-4, atol=1e-7))
        qv = rng.uniform(0.05, 0.95, 15)
        fd = fd_gradient(lambda z: kernels.fb_tree_rate(z, a, 4, False)[0], qv, Box.unit(15), h=1e-7)
        grad_ok &= bool(np.allclose(kernels.fb_tree_rate(qv, a, 4, True)[1], fd, rtol=1e-4, atol=1e-6))
    el = time.perf_counter() - t
    return [(f"converse k<=6: max rate - k(1-a) = {worst:.1e} <= 1e-9", worst <= 1e-9),
            ("gap table >= 0, zero exactly on boundary rows", bool(table_ok)),
            ("concavity checks", bool(conc)),
            ("gradient checks", bool(grad_ok))], el, 120


def criterion_7():
    t = time.perf_counter()
    typ = typicality_frequency(0.5, 1_000_000, 0.05, 8, seeds=100, seed=0)
    freq = typ.checks[0].empirical
    uni = simulate_channel(BlockInputLaw.uniform(2), 0.5, 1_000_000, seed=0)
    law = solve_block_di(2, 0.5).maximizer
    fbk = simulate_channel(law, 0.5, 1_000_000, seed=1)
    el = time.perf_counter() - t
    return [(f"typical {freq:.0%} of 100 seeds >= 95%", freq >= 0.95),
            (f"uniform n=2 law: {9 - len(uni.failures())}/9 atoms within 3 sigma", uni.passed),
            (f"optimal feedback n=2 law: {9 - len(fbk.failures())}/9 atoms within 3 sigma", fbk.passed)], el, 180


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7]


@pytest.mark.parametrize("k", range(1, 8))
def test_acceptance_criterion(k, capsys):
    checks, el, limit = CRITERIA[k - 1]()
    status, text = _line(k, checks, el, limit)
    _emit(capsys, text)
    assert status == "PASS", text


if __name__ == "__main__":
    bad = 0
    for k, fn in enumerate(CRITERIA, 1):
        status, text = _line(k, *fn())
        _emit(None, text)
        bad += status != "PASS"
    sys.exit(1 if bad else 0)
