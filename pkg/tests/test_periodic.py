import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import ALPHA_GRID, bec_block_matrix, blahut_arimoto

from ehbec.periodic import (
    HALF_LOG2_3,
    CurveRow,
    FeedbackTwoBlockDist,
    TwoBlockInputDist,
    best_directed_info_given_p1,
    capacity_curve,
    capacity_fb_closed,
    capacity_fb_numeric,
    capacity_ff,
    curve_from_csv,
    curve_to_csv,
    default_grid,
    directed_info_two_block,
    mutual_info_two_block,
)

# Blahut-Arimoto on the 3-input, 9-output two-slot channel (duality gap < 1e-14)
BA_C_FF = {
    0.1: 0.7249184713988786,
    0.25: 0.6199759176939413,
    0.5: 0.4339011960191359,
    0.75: 0.2300947962922557,
    0.9: 0.09620577633248731,
}


def test_blahut_arimoto_oracle_values_are_reproducible():
    lo, hi = blahut_arimoto(bec_block_matrix([(0, 0), (0, 1), (1, 0)], 0.5))
    assert hi - lo < 1e-12
    assert lo / 2 == pytest.approx(BA_C_FF[0.5], abs=1e-12)


def test_input_dist_types():
    d = TwoBlockInputDist(0.3)
    assert d.as_dict()[(1, 1)] == 0.0
    assert sum(d.as_dict().values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        TwoBlockInputDist(0.6)
    with pytest.raises(ValueError):
        FeedbackTwoBlockDist(0.5, 1.2, 0.1)


def test_mutual_info_examples():
    assert mutual_info_two_block((3 - math.sqrt(5)) / 2, 0.5) == pytest.approx(0.867793, abs=1e-5)
    assert mutual_info_two_block(0.0, 0.3) == 0.0
    assert mutual_info_two_block(1 / 3, 0.0) == pytest.approx(math.log2(3), abs=1e-12)
    with pytest.raises(ValueError):
        mutual_info_two_block(0.7, 0.5)


def test_mutual_info_matches_enumerated_law():
    # I(X^2;Y^2) from the explicit channel matrix at the symmetric law
    for a in (0.2, 0.6):
        for pi in (0.1, 0.3, 0.45):
            W = bec_block_matrix([(0, 0), (0, 1), (1, 0)], a)
            w = np.array([1 - 2 * pi, pi, pi])
            py = w @ W
            with np.errstate(divide="ignore", invalid="ignore"):
                mi = float(np.nansum(w[:, None] * W * np.log2(np.where(W > 0, W / py, 1.0))))
            assert mutual_info_two_block(pi, a) == pytest.approx(mi, abs=1e-12)


@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 1))
def test_mutual_info_concave_in_pi(p, q, a):
    mid = mutual_info_two_block((p + q) / 2, a)
    assert mid >= (mutual_info_two_block(p, a) + mutual_info_two_block(q, a)) / 2 - 1e-12


def test_capacity_ff_examples():
    r = capacity_ff(0.5)
    assert r.value == pytest.approx(0.433897, abs=1e-5)
    assert round(r.value, 4) == 0.4339
    assert r.maximizer.pi == pytest.approx(0.381966, abs=1e-6)
    assert r.method == "closed_form"
    assert capacity_ff(1.0).value == 0.0
    assert capacity_ff(0.0).value == pytest.approx(0.792481, abs=1e-6)
    assert capacity_ff(0.0).value == HALF_LOG2_3


@pytest.mark.parametrize("a", ALPHA_GRID)
def test_capacity_ff_matches_blahut_arimoto(a):
    assert capacity_ff(a).value == pytest.approx(BA_C_FF[a], abs=1e-12)


def test_capacity_ff_alpha0_against_grid():
    grid = np.linspace(0, 0.5, 100001)
    best = max(mutual_info_two_block(float(g), 0.0) for g in grid[::10]) / 2
    assert capacity_ff(0.0).value >= best - 1e-12
    assert capacity_ff(0.0).value == pytest.approx(best, abs=1e-6)


def test_directed_info_examples():
    d = FeedbackTwoBlockDist(0.414214, 0.5, 0.853553)
    assert directed_info_two_block(d, 0.5) == pytest.approx(0.885772, abs=1e-5)
    assert directed_info_two_block(FeedbackTwoBlockDist(0, 0, 0), 0.7) == 0.0
    for p2e in (0.0, 0.3, 1.0):
        d = FeedbackTwoBlockDist(0.3, 0.6, p2e)
        assert directed_info_two_block(d, 0.0) == pytest.approx(
            directed_info_two_block(FeedbackTwoBlockDist(0.3, 0.6, 0.5), 0.0), abs=1e-15)


def test_directed_info_from_causal_joint():
    # independent evaluation: sum_t I(X^t; Y_t | Y^{t-1}) from the explicit joint law
    import itertools

    a = 0.35
    d = FeedbackTwoBlockDist(0.3, 0.7, 0.6)
    joint = {}
    for x1, y1, x2, y2 in itertools.product((0, 1), (0, 1, 2), (0, 1), (0, 1, 2)):
        px1 = d.p1 if x1 else 1 - d.p1
        py1 = a if y1 == 2 else (1 - a if y1 == x1 else 0)
        q = 0.0 if x1 == 1 else (d.p20 if y1 == 0 else d.p2e if y1 == 2 else 0.0)
        px2 = q if x2 else 1 - q
        py2 = a if y2 == 2 else (1 - a if y2 == x2 else 0)
        p = px1 * py1 * px2 * py2
        if p > 0:
            joint[(x1, x2, y1, y2)] = p

    def H(keyf):
        m = {}
        for k, p in joint.items():
            m[keyf(k)] = m.get(keyf(k), 0) + p
        return -sum(p * math.log2(p) for p in m.values() if p > 0)

    di = (H(lambda k: k[2]) - H(lambda k: (k[0], k[2])) + H(lambda k: k[0])
          + H(lambda k: (k[2], k[3])) - H(lambda k: k[2])
          - H(lambda k: (k[0], k[1], k[2], k[3])) + H(lambda k: (k[0], k[1], k[2])))
    assert directed_info_two_block(d, a) == pytest.approx(di, abs=1e-12)


def test_capacity_fb_closed_examples():
    assert capacity_fb_closed(0.5).value == pytest.approx(0.442886, abs=1e-5)
    assert round(capacity_fb_closed(0.5).value, 4) == 0.4429
    assert capacity_fb_closed(0.0).value == pytest.approx(HALF_LOG2_3, abs=1e-15)
    assert capacity_fb_closed(1.0).value == 0.0
    m = capacity_fb_closed(0.5).maximizer
    assert (m.p1, m.p20, m.p2e) == pytest.approx((0.414214, 0.5, 0.853553), abs=1e-6)
    # the closed form is the directed information at its maximizer
    assert directed_info_two_block(m, 0.5) / 2 == pytest.approx(capacity_fb_closed(0.5).value, abs=1e-15)


def test_p2e_clamp_continuity():
    xs = np.linspace(0.45, 0.55, 2001)
    vals = np.array([best_directed_info_given_p1(float(x), 0.4) for x in xs])
    assert np.max(np.abs(np.diff(vals))) < 1e-3
    assert best_directed_info_given_p1(0.6, 0.4) == pytest.approx(
        directed_info_two_block(FeedbackTwoBlockDist(0.6, 0.5, 1.0), 0.4))


def test_capacity_fb_numeric_examples():
    r = capacity_fb_numeric(0.5)
    assert r.value == pytest.approx(0.442886, abs=1e-5)
    assert r.maximizer.p20 == pytest.approx(0.5, abs=1e-3)
    r = capacity_fb_numeric(0.25)
    assert r.value == pytest.approx(capacity_fb_closed(0.25).value, abs=1e-6)
    assert r.details["stationary_points"]


def test_capacity_fb_numeric_grid_agreement():
    for a in np.linspace(0.01, 0.99, 99):
        r = capacity_fb_numeric(float(a))
        assert abs(r.value - capacity_fb_closed(float(a)).value) < 1e-6
        assert r.maximizer.p20 == pytest.approx(0.5, abs=1e-3)


def test_feedback_dominance_fine_grid():
    for a in np.linspace(0, 1, 999):
        a = float(a)
        gap = capacity_fb_closed(a).value - capacity_ff(a).value
        assert gap >= -1e-12
        if 0.05 <= a <= 0.95:
            assert gap > 1e-6
        assert capacity_ff(a).value <= 1 - a + 1e-9
        assert capacity_fb_closed(a).value <= 1 - a + 1e-9


def test_curve_examples():
    rows = capacity_curve(default_grid())
    assert len(rows) == 101
    assert rows[50].alpha == 0.5
    assert (rows[50].c_ff, rows[50].c_fb) == pytest.approx((0.4339, 0.4429), abs=5e-5)
    for r in rows:
        assert r.c_fb >= r.c_ff
    assert abs(rows[0].c_fb - rows[0].c_ff) < 1e-9
    assert abs(rows[-1].c_fb - rows[-1].c_ff) < 1e-9
    ff = [r.c_ff for r in rows]
    fb = [r.c_fb for r in rows]
    assert all(np.diff(ff) <= 0) and all(np.diff(fb) <= 0)


def test_curve_csv_roundtrip():
    rows = capacity_curve(default_grid(0, 0.05, 1))
    text = curve_to_csv(rows)
    assert text.splitlines()[0] == "alpha,C_ff,C_fb"
    back = curve_from_csv(text)
    for r, b in zip(rows, back):
        assert float(f"{r.c_ff:.9g}") == b.c_ff
        assert float(f"{r.c_fb:.9g}") == b.c_fb
    assert isinstance(back[0], CurveRow)
    with pytest.raises(ValueError):
        curve_from_csv("a,b\n1,2")


def test_alpha_validation():
    with pytest.raises(ValueError):
        capacity_ff(-0.1)
    with pytest.raises(ValueError):
        capacity_fb_closed(1.5)
