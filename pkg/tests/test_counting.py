import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelsets.counting import (
    COUNT_COLUMNS,
    PATCH_COLUMNS,
    CountRow,
    OrderedFamily,
    box_dimension,
    count_in_family,
    dyadic_decomposition,
    dyadic_family,
    extract_patch,
    fit_error_exponent,
    in_dyadic_family,
    koch_curve,
    patch_exponents,
    patch_frequency,
    patch_statistics,
    patch_window,
    write_count_csv,
    write_patch_csv,
)
from modelsets.cutproject import Scheme, Window, density, generate
from modelsets.errors import DegenerateFit, IncompleteSupport, OutOfRange
from modelsets.lattice import Grid, Region

from conftest import ammann_beenker, control_zn, fibonacci


# --- families and counting ----------------------------------------------------


def test_family_nested_and_volumes():
    for fam in (OrderedFamily("balls", 2), OrderedFamily("boxes", 2), OrderedFamily("boxes", 3, "centered")):
        assert fam.volume(2.0) > fam.volume(1.0)
        assert fam.parameter_for_volume(fam.volume(3.0)) == pytest.approx(3.0)
        inner = fam.region(1.0)
        lo, hi = inner.bounding_box()
        assert fam.region(2.0).contains_box(lo, np.nextafter(hi, -np.inf))
    assert OrderedFamily("balls", 1).volume(3) == 6.0


def test_control_counts_exact():
    rows = count_in_family(*control_zn(2), OrderedFamily("boxes", 2), [1, 2, 3, 7, 10])
    assert [r.error for r in rows] == [0.0] * 5
    assert [r.count for r in rows] == [1, 4, 9, 49, 100]


def test_fibonacci_bounded_discrepancy():
    rows = count_in_family(*fibonacci(), OrderedFamily("balls", 1), [50, 100, 200, 400])
    assert all(abs(r.error) <= 3 for r in rows)


def test_ammann_beenker_soft_bound():
    rows = count_in_family(*ammann_beenker(), OrderedFamily("balls", 2), [25, 50, 100])
    assert all(abs(r.error) <= r.vol**0.75 for r in rows)


def test_counts_match_generation(fib):
    rows = count_in_family(*fib, OrderedFamily("balls", 1), [10, 30])
    for r in rows:
        assert r.count == len(generate(*fib, Region.ball([0], r.T)).points)


def _rows(vols, errs):
    return [CountRow(v, v, 0, e) for v, e in zip(vols, errs)]


def test_fit_synthetic():
    vols = [10.0, 100.0, 1000.0, 10000.0]
    assert fit_error_exponent(_rows(vols, [v**0.5 for v in vols])).slope == pytest.approx(0.5, abs=1e-9)
    assert fit_error_exponent(_rows(vols, [3.0] * 4)).slope == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DegenerateFit):
        fit_error_exponent(_rows(vols, [0.0, 0.0, 1.0, 2.0]))


def test_count_csv():
    buf = io.StringIO()
    write_count_csv([CountRow(1.0, 2.0, 3, 0.0), CountRow(2.0, 8.0, 7, -1.0)], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(COUNT_COLUMNS)
    assert lines[1].endswith(",")  # zero error has no log
    assert lines[2].split(",")[-1] == "0.0"


# --- dyadic decomposition -------------------------------------------------------


def test_dyadic_examples():
    assert dyadic_decomposition(5, 3) == [(0, 4), (4, 5)]
    assert dyadic_decomposition(7, 3) == [(0, 4), (4, 6), (6, 7)]
    assert dyadic_decomposition(8, 3) == [(0, 8)]
    with pytest.raises(OutOfRange):
        dyadic_decomposition(9, 3)
    with pytest.raises(OutOfRange):
        dyadic_decomposition(0, 3)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(lambda T: st.tuples(st.integers(1, 2**T), st.just(T))))
def test_dyadic_properties(args):
    N, T = args
    pairs = dyadic_decomposition(N, T)
    covered = []
    for a, b in pairs:
        assert in_dyadic_family((a, b), T)
        covered.extend(range(a, b))
    assert covered == list(range(N))
    assert len(pairs) <= max(T, 1) or N == 2**T


def test_dyadic_family_membership():
    fam = dyadic_family(3)
    assert len(fam) == 8 + 4 + 2 + 1
    assert all(in_dyadic_family(p, 3) for p in fam)
    assert not in_dyadic_family((1, 3), 3)


# --- patches ---------------------------------------------------------------------


def test_patch_on_z():
    scheme, grid, window = Scheme(1, 1), Grid(np.eye(2), None), Window.box([0.0], [1.0])
    ms = generate(scheme, grid, window, Region.box([-10], [10]))
    p = extract_patch(ms, np.array([3.0]), 1.5)
    assert p.key == ((-1, 0), (0, 0), (1, 0))
    assert extract_patch(ms, np.array([0.0]), 0).key == ((0, 0),)


def test_patch_incomplete(fib):
    ms = generate(*fib, Region.box([0], [10]))
    with pytest.raises(IncompleteSupport):
        extract_patch(ms, ms.points[0], 2.0)


def test_patch_keys_translation_invariant(fib):
    scheme, grid, window = fib
    ms = generate(scheme, grid, window, Region.box([-60], [60]))
    R = 3.0
    idx = [i for i, x in enumerate(ms.points[:, 0]) if -50 < x < 50]
    pts = ms.points[:, 0]
    for i in idx[:40]:
        for j in idx[:40]:
            same_key = extract_patch(ms, i, R) == extract_patch(ms, j, R)
            near_i = np.sort(pts[np.abs(pts - pts[i]) <= R + 1e-9] - pts[i])
            near_j = np.sort(pts[np.abs(pts - pts[j]) <= R + 1e-9] - pts[j])
            same_set = near_i.shape == near_j.shape and np.allclose(near_i, near_j, atol=1e-9)
            assert same_key == same_set


def test_patch_window_r0_is_window(fib):
    scheme, grid, window = fib
    ms = generate(scheme, grid, window, Region.box([-5], [5]))
    pw = patch_window(scheme, grid, window, extract_patch(ms, int(np.argmin(np.abs(ms.points[:, 0]))), 0))
    assert pw.volume == pytest.approx(1.0)
    pred, emp = patch_frequency(scheme, grid, window, extract_patch(ms, 2, 0), 200)
    assert pred == pytest.approx(density(scheme, grid, window))


@pytest.mark.parametrize("R", [1.2, 3.0, 5.0])
def test_fibonacci_patch_windows_partition(R):
    scheme, grid, window = fibonacci()
    st = patch_statistics(scheme, grid, window, R, 2000)
    vols = [c.window_volume for c in st.classes]
    assert sum(vols) == pytest.approx(1.0, abs=1e-9)
    assert st.predicted_sum() == pytest.approx(1 / math.sqrt(5), abs=1e-6)
    # windows are disjoint boxes covering [0,1)
    boxes = []
    for c in st.classes:
        boxes += patch_window(scheme, grid, window, c.patch).boxes
    boxes.sort(key=lambda b: b[0][0])
    assert boxes[0][0][0] == 0.0 and boxes[-1][1][0] == 1.0
    for (lo1, hi1), (lo2, hi2) in zip(boxes, boxes[1:]):
        assert hi1[0] == pytest.approx(lo2[0], abs=1e-12)
    assert sum(c.multiplicity for c in st.classes) == st.total


def test_fibonacci_patch_class_counts():
    scheme, grid, window = fibonacci()
    # gaps are phi and phi^2, so R = 1.2 sees only the centre
    assert len(patch_statistics(scheme, grid, window, 1.2, 500).classes) == 1
    assert len(patch_statistics(scheme, grid, window, 3.0, 500).classes) == 3


def test_fibonacci_most_frequent_patch():
    scheme, grid, window = fibonacci()
    st = patch_statistics(scheme, grid, window, 3.0, 2000)
    top = st.classes[0]
    assert top.empirical == pytest.approx(top.predicted, rel=0.03)


def test_ammann_beenker_patch_partition():
    scheme, grid, window = ammann_beenker()
    st = patch_statistics(scheme, grid, window, 2.5, 60)
    assert len(st.classes) > 1
    assert st.predicted_sum() == pytest.approx(0.125, abs=1e-6)


def test_patch_window_degenerate_window(fib):
    scheme, grid, _ = fib
    tiny = Window.box([0.0], [1e-12])
    pw = patch_window(scheme, grid, tiny, extract_patch(generate(scheme, grid, Window.box([0.0], [1.0]),
                                                                   Region.box([-5], [5])), 3, 0))
    assert pw.volume == pytest.approx(1e-12, abs=1e-15)


def test_patch_window_qmc_for_balls():
    scheme, grid = Scheme(2, 2), ammann_beenker()[1]
    window = Window.ball([0.0, 0.0], 0.6)
    st = patch_statistics(scheme, grid, window, 0.0, 30)
    assert len(st.classes) == 1
    pw = patch_window(scheme, grid, window, st.classes[0].patch)
    assert not pw.exact
    assert pw.volume == pytest.approx(math.pi * 0.36, abs=5 * pw.volume_error + 1e-3)


def test_patch_csv(fib):
    st = patch_statistics(*fib, 3.0, 300)
    buf = io.StringIO()
    write_patch_csv(st, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(PATCH_COLUMNS)
    assert len(lines) == 1 + len(st.classes)


# --- box dimension and exponents ------------------------------------------------------


SCALES = [1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128]


def test_square_boundary_dimension():
    assert box_dimension(Window.box([0, 0], [1, 1]), SCALES).estimate == pytest.approx(1.0, abs=0.1)


def test_interval_boundary_dimension():
    assert box_dimension(Window.box([0.1], [0.7]), SCALES).estimate == pytest.approx(0.0, abs=0.1)


def test_koch_dimension():
    est = box_dimension(koch_curve(4), [1 / 3, 1 / 9, 1 / 27, 1 / 81])
    assert est.estimate == pytest.approx(math.log(4) / math.log(3), abs=0.1)


def test_box_dimension_needs_scales():
    with pytest.raises(DegenerateFit):
        box_dimension(koch_curve(2), [0.5, 0.25, 0.125])
    with pytest.raises(DegenerateFit):
        box_dimension(koch_curve(2), [0.125, 0.25, 0.5, 0.6])


def test_patch_exponents():
    assert patch_exponents(2, 1) == {"lambda0": 0.5, "theta0": 0.25}
    e = patch_exponents(1, 1)
    assert e["lambda0"] == pytest.approx(1 / 3) and e["theta0"] == pytest.approx(1 / 3)
    e = patch_exponents(3, 1e-9)
    assert e["lambda0"] == pytest.approx(1.0) and e["theta0"] == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(OutOfRange):
        patch_exponents(0, 1)
    with pytest.raises(OutOfRange):
        patch_exponents(2, 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.floats(1e-6, 1.0))
def test_exponent_identity(m, frac):
    e = patch_exponents(m, frac * m)
    assert e["lambda0"] + 2 * e["theta0"] == pytest.approx(1.0, abs=1e-12)
