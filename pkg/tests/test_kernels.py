"""Both kernel backends must return the same answers."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import cdist

from modelsets import _backend, kernels


def both(fn, *args):
    out = {}
    previous = _backend.get_backend()
    try:
        for name in ("numba", "numpy"):
            _backend.set_backend(name)
            out[name] = fn(*args)
    finally:
        _backend.set_backend(previous)
    return out["numba"], out["numpy"]


def test_set_backend_validates():
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_lll_backends_and_properties(seed, n):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n)) * rng.uniform(0.1, 10, size=n)
    (Ba, Ua), (Bb, Ub) = both(kernels.lll, B)
    assert np.array_equal(Ua, Ub)
    assert np.allclose(Ba, Bb, rtol=0, atol=0)
    assert abs(round(np.linalg.det(Ua))) == 1
    assert np.allclose(B @ Ua, Ba, atol=1e-9 * np.abs(B).max())
    # size reduction and Lovasz condition on the Gram-Schmidt data
    Q, R = np.linalg.qr(Ba)
    mu = R / np.diag(R)[:, None]
    assert np.all(np.abs(np.triu(mu, 1)) <= 0.5 + 1e-9)
    d = np.diag(R) ** 2
    for k in range(1, n):
        assert d[k] >= (0.99 - mu[k - 1, k] ** 2) * d[k - 1] - 1e-9 * d.max()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_fincke_pohst_backends(seed, n):
    rng = np.random.default_rng(seed)
    R = np.triu(rng.normal(size=(n, n)))
    R[np.diag_indices(n)] = np.abs(np.diag(R)) + 0.3
    z = rng.normal(size=n) * 2
    a, b = both(kernels.fincke_pohst, R, z, rng.uniform(0.5, 6.0))
    sa = a[np.lexsort(a.T[::-1])] if len(a) else a
    sb = b[np.lexsort(b.T[::-1])] if len(b) else b
    assert np.array_equal(sa, sb)


def test_fincke_pohst_exact_on_z2():
    R = np.eye(2)
    a, b = both(kernels.fincke_pohst, R, np.zeros(2), 1.0)
    expect = {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}
    assert set(map(tuple, a)) == expect == set(map(tuple, b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_nn_backends_match_brute_force(seed, d):
    rng = np.random.default_rng(seed)
    ref = rng.normal(size=(rng.integers(1, 300), d)) * rng.uniform(0.1, 20)
    q = rng.normal(size=(50, d)) * rng.uniform(0.1, 30)
    a, b = both(kernels.nn_distances, q, ref)
    exact = cdist(q, ref).min(axis=1)
    assert np.allclose(a, exact, rtol=1e-12, atol=1e-12)
    assert np.allclose(b, exact, rtol=1e-12, atol=1e-12)


def test_nn_empty_reference():
    a, b = both(kernels.nn_distances, np.zeros((3, 2)), np.zeros((0, 2)))
    assert np.all(np.isinf(a)) and np.all(np.isinf(b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 200))
def test_count_cells_backends(seed, d, K):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 2, size=(rng.integers(1, 500), d))
    a, b = both(kernels.count_cells, pts, K)
    assert a == b == len({tuple(np.floor(p * K).astype(int)) for p in pts})


@pytest.mark.parametrize("d", [1, 2, 3])
def test_nn_far_queries_and_single_point(d):
    rng = np.random.default_rng(d)
    for ref in (np.zeros((1, d)), rng.normal(size=(4, d)) * 1e-3):
        q = rng.normal(size=(20, d)) * 1e5
        a, b = both(kernels.nn_distances, q, ref)
        exact = cdist(q, ref).min(axis=1)
        assert np.allclose(a, exact) and np.allclose(b, exact)
