import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelsets.errors import DimensionTooLarge, ModelSetError, NotUnimodular, RegionTooLarge, SingularBasis
from modelsets.lattice import (
    Grid,
    Region,
    alpha,
    apply_element,
    brute_force_points,
    covolume,
    dump_points,
    embed_top_left,
    enumerate_lattice,
    enumerate_points,
    load_points,
    minkowski_constant,
    successive_minima,
    unit_ball_volume,
)
from modelsets.numfield import NumberField, OrderBasis, minkowski_lattice

from conftest import random_sl

SQRT2 = math.sqrt(2)


def sqrt2_lattice(k=1):
    return minkowski_lattice(OrderBasis.power_basis(NumberField((-2, 0, 1))), k)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == 2.0
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_covolume_examples():
    assert covolume(Grid.standard(3)) == 1.0
    assert covolume(Grid(np.diag([2.0, 0.5]), None)) == 1.0
    assert covolume(sqrt2_lattice()) == pytest.approx(2 * SQRT2)
    with pytest.raises(SingularBasis):
        covolume(Grid(np.array([[1.0, 2.0], [2.0, 4.0]]), None))


def test_covolume_translation_invariant():
    L = sqrt2_lattice()
    assert covolume(L.translated([0.3, -7.0])) == covolume(L)


def test_enumerate_small_box():
    pts = enumerate_points(Grid.standard(2), Region.box([-1.5, -1.5], [1.5, 1.5]))
    assert sorted(map(tuple, pts)) == [(float(a), float(b)) for a in (-1, 0, 1) for b in (-1, 0, 1)]


def test_enumerate_translated_unit_box():
    pts = enumerate_points(Grid(np.eye(2), [0.5, 0.5]), Region.box([0, 0], [1, 1]))
    assert pts.tolist() == [[0.5, 0.5]]


def test_enumerate_sqrt2_box_matches_brute_force():
    L = sqrt2_lattice()
    region = Region.box([-3, -3], [3, 3])
    assert np.array_equal(enumerate_points(L, region), brute_force_points(L, region, 10))


def test_box_is_half_open_ball_closed():
    Z = Grid.standard(1)
    assert enumerate_points(Z, Region.box([0], [3])).ravel().tolist() == [0.0, 1.0, 2.0]
    assert enumerate_points(Z, Region.ball([0], 2)).ravel().tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]


def test_enumerate_sorted_and_unique():
    L = sqrt2_lattice(2)
    pts = enumerate_points(L, Region.ball(np.zeros(4), 6))
    assert len(np.unique(pts, axis=0)) == len(pts)
    assert np.array_equal(pts[np.lexsort(pts.T[::-1])], pts)


def test_region_too_large():
    with pytest.raises(RegionTooLarge):
        enumerate_points(Grid.standard(3), Region.ball(np.zeros(3), 100), cap=1000)


def _random_grid(rng, n):
    B = rng.normal(size=(n, n))
    while abs(np.linalg.det(B)) < 0.3:
        B = rng.normal(size=(n, n))
    return Grid(B, rng.normal(size=n))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.booleans())
def test_enumeration_matches_brute_force(backend_seed, n, use_ball):
    rng = np.random.default_rng(backend_seed)
    grid = _random_grid(rng, n)
    if use_ball:
        region = Region.ball(rng.normal(size=n), rng.uniform(0.5, 2.5))
    else:
        lo = rng.normal(size=n) - 1
        region = Region.box(lo, lo + rng.uniform(0.5, 3, size=n))
    # coefficient bound large enough to cover the region
    lo, hi = region.bounding_box()
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    bound = int(np.abs(grid.coeffs_of(corners)).max()) + 2
    if bound > 15 or (2 * bound + 1) ** n > 3 * 10**5:
        return
    fast, coeffs = enumerate_lattice(grid, region)
    assert np.array_equal(fast, brute_force_points(grid, region, bound))
    assert np.array_equal(grid.points_from_coeffs(coeffs), fast)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumeration_backends_agree(seed):
    from modelsets import _backend

    rng = np.random.default_rng(seed)
    grid = _random_grid(rng, 3)
    region = Region.ball(np.zeros(3), 4.0)
    previous = _backend.set_backend("numba")
    try:
        a = enumerate_lattice(grid, region)
        _backend.set_backend("numpy")
        b = enumerate_lattice(grid, region)
    finally:
        _backend.set_backend(previous)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_dump_roundtrip():
    pts = enumerate_points(sqrt2_lattice(), Region.ball([0, 0], 5))
    buf = io.StringIO()
    dump_points(pts, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "n 2"
    back = load_points(io.StringIO(text))
    assert np.allclose(back, pts, rtol=1e-11, atol=1e-11)


def test_membership():
    L = sqrt2_lattice().translated([0.25, 0])
    pts = enumerate_points(L, Region.ball([0, 0], 4))
    assert L.contains(pts).all()
    assert not L.contains(pts + 1e-3).any()


# --- group action ------------------------------------------------------------


def test_apply_identity_and_diagonal():
    Z = Grid.standard(2)
    assert apply_element(Z, np.eye(2)) == Z
    g = apply_element(Z, np.diag([2.0, 0.5]))
    assert np.array_equal(g.basis, np.diag([2.0, 0.5]))
    assert covolume(g) == 1.0
    with pytest.raises(NotUnimodular):
        apply_element(Z, np.diag([2.0, 2.0]))


def test_rotation_embedded_top_left_keeps_internal_coordinates():
    L = sqrt2_lattice(2)
    a = math.pi / 6
    R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    g = apply_element(L, embed_top_left(R, 4))
    assert covolume(g) == pytest.approx(covolume(L), rel=1e-12)
    assert np.allclose(g.basis[2:], L.basis[2:], atol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_apply_composes(seed):
    rng = np.random.default_rng(seed)
    L = Grid(np.eye(2) + 0.2 * rng.normal(size=(2, 2)), rng.normal(size=2))
    g1, g2 = random_sl(rng, 2, 0.8), random_sl(rng, 2, 0.8)
    v1, v2 = rng.normal(size=2), rng.normal(size=2)
    one = apply_element(apply_element(L, g1, v1), g2, v2)
    both = apply_element(L, g2 @ g1, g2 @ v1 + v2)
    region = Region.ball([0, 0], 4)
    a, b = enumerate_points(one, region), enumerate_points(both, region)
    assert a.shape == b.shape and np.allclose(a, b, atol=1e-9)


# --- successive minima and alpha --------------------------------------------


def test_minima_examples():
    assert np.allclose(successive_minima(Grid.standard(4)), 1.0)
    assert np.allclose(successive_minima(Grid(np.diag([0.5, 2.0]), None)), [0.5, 2.0])


def _brute_minima(grid, bound=6):
    n = grid.n
    coeffs = np.array([c for c in itertools.product(range(-bound, bound + 1), repeat=n) if any(c)])
    vecs = coeffs @ grid.basis.T
    norms = np.linalg.norm(vecs, axis=1)
    order = np.argsort(norms)
    chosen, out = [], []
    for i in order:
        trial = np.array(chosen + [coeffs[i]], dtype=float)
        if np.linalg.matrix_rank(trial) > len(chosen):
            chosen.append(coeffs[i])
            out.append(norms[i])
        if len(out) == n:
            break
    return np.array(out)


def test_minima_sqrt2_by_brute_force():
    lam = successive_minima(sqrt2_lattice())
    assert np.allclose(lam, _brute_minima(sqrt2_lattice()))
    # (1, 1) has norm sqrt2; the next independent vector (sqrt2, -sqrt2) has norm 2
    assert np.allclose(lam, [SQRT2, 2.0])


def test_minima_dimension_cap():
    with pytest.raises(DimensionTooLarge):
        successive_minima(Grid.standard(9))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_minkowski_second_theorem(seed, n):
    rng = np.random.default_rng(seed)
    L = _random_grid(rng, n).linear_part()
    lam = successive_minima(L)
    assert np.all(np.diff(lam) >= -1e-12)
    vol = unit_ball_volume(n) * np.prod(lam)
    c = covolume(L)
    assert 2**n / math.factorial(n) * c <= vol * (1 + 1e-9)
    assert vol <= 2**n * c * (1 + 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_minima_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(2, 2))
    if abs(np.linalg.det(B)) < 0.5:
        return
    L = Grid(B, None)
    if np.abs(np.linalg.inv(B)).max() * 3 > 6:
        return
    assert np.allclose(successive_minima(L), _brute_minima(L, 8))


def test_alpha_examples():
    assert alpha(Grid.standard(2))[0] == pytest.approx(1.0)
    assert alpha(Grid.standard(3)) == (pytest.approx(1.0), "exact")
    assert alpha(Grid(np.diag([0.1, 10.0]), None))[0] == pytest.approx(10.0)
    assert alpha(Grid(np.diag([2.0, 0.5]), None))[0] == pytest.approx(2.0)
    with pytest.raises(DimensionTooLarge):
        alpha(Grid.standard(4))
    assert alpha(Grid.standard(4), "approx") == (1.0, "approx")
    with pytest.raises(ModelSetError):
        alpha(Grid(np.eye(2), [0.1, 0]))


def alpha_oracle(grid, bound=4):
    """max covol(L')^{-1} over sublattices spanned by tuples of short integer vectors."""
    n = grid.n
    # one representative per +-pair
    coeffs = np.array([c for c in itertools.product(range(-bound, bound + 1), repeat=n)
                       if any(c) and c[np.flatnonzero(c)[0]] > 0], dtype=float)
    V = coeffs @ grid.basis.T
    best = 1.0 / np.linalg.norm(V, axis=1).min()
    for r in range(2, n + 1):
        idx = np.array(list(itertools.combinations(range(len(V)), r)))
        M = V[idx]  # (N, r, n)
        gram = np.einsum("kin,kjn->kij", M, M)
        vol2 = np.linalg.det(gram)
        # independence decided exactly on the integer coefficients
        C = coeffs[idx]
        ok = np.linalg.det(np.einsum("kin,kjn->kij", C, C)) > 0.5
        best = max(best, 1.0 / math.sqrt(vol2[ok].min()))
    return best


@pytest.mark.parametrize("seed", range(6))
def test_alpha_exact_matches_tuple_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 2 if seed % 2 == 0 else 3
    g = random_sl(rng, n, 0.7)
    L = Grid(g * np.exp(rng.uniform(-0.5, 0.5)), None)
    bound = 3 if n == 2 else 2
    # the oracle only searches small coefficients; reduce first so short vectors have small coefficients
    from modelsets.kernels import lll

    L = Grid(lll(L.basis)[0], None)
    assert alpha(L)[0] == pytest.approx(alpha_oracle(L, bound), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_alpha_exact_vs_approx_minkowski_factor(seed, n):
    rng = np.random.default_rng(seed)
    g = random_sl(rng, n, 1.5)
    g = g / np.linalg.det(g) ** (1.0 / n)
    L = Grid(g, None)
    exact, _ = alpha(L)
    approx, _ = alpha(L, "approx")
    assert 1.0 - 1e-9 <= exact / approx <= minkowski_constant(n) * (1 + 1e-9)
