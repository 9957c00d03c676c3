"""Hot numeric kernels with numba and pure-numpy implementations.

Each public function dispatches on :func:`modelsets._backend.get_backend`.
Both paths return identical results; callers sort or post-filter where the
traversal order differs.
"""

import numpy as np
from scipy.spatial import cKDTree

from ._backend import get_backend, njit

# ---------------------------------------------------------------------------
# LLL reduction (columns are basis vectors)
# ---------------------------------------------------------------------------


def _lll_loop(Bt, delta):
    # rows of Bt are the basis vectors
    n = Bt.shape[0]
    B = Bt.copy()
    U = np.eye(n, dtype=np.int64)
    Bs = np.zeros_like(B)
    mu = np.zeros((n, n))
    bnorm = np.zeros(n)

    stale = True
    k = 1
    while k < n:
        if stale:
            for i in range(n):
                v = B[i].copy()
                for j in range(i):
                    mu[i, j] = np.dot(B[i], Bs[j]) / bnorm[j]
                    v -= mu[i, j] * Bs[j]
                Bs[i] = v
                bnorm[i] = np.dot(v, v)
            stale = False
        for j in range(k - 1, -1, -1):
            q = np.floor(mu[k, j] + 0.5)
            if q != 0.0:
                B[k] -= q * B[j]
                U[k] -= np.int64(q) * U[j]
                for l in range(j):
                    mu[k, l] -= q * mu[j, l]
                mu[k, j] -= q
        if bnorm[k] >= (delta - mu[k, k - 1] ** 2) * bnorm[k - 1]:
            k += 1
        else:
            tmp = B[k].copy()
            B[k] = B[k - 1]
            B[k - 1] = tmp
            tmpu = U[k].copy()
            U[k] = U[k - 1]
            U[k - 1] = tmpu
            stale = True
            k = max(k - 1, 1)
    return B, U


_lll_numba = njit(_lll_loop)


def lll(B, delta=0.99):
    """LLL-reduce the columns of ``B``. Returns ``(B_red, U)`` with ``B_red = B @ U``."""
    B = np.ascontiguousarray(B, dtype=np.float64)
    if B.shape[1] <= 1:
        return B.copy(), np.eye(B.shape[1], dtype=np.int64)
    Bt = np.ascontiguousarray(B.T)
    run = _lll_numba if get_backend() == "numba" else _lll_loop
    Bt_red, Ut = run(Bt, float(delta))
    return np.ascontiguousarray(Bt_red.T), np.ascontiguousarray(Ut.T)


# ---------------------------------------------------------------------------
# Fincke-Pohst enumeration of {k in Z^n : |R (k - z)|^2 <= r2}
# ---------------------------------------------------------------------------


@njit
def _fincke_pohst_numba(R, z, r2):
    n = R.shape[0]
    cap = 1024
    out = np.empty((cap, n), dtype=np.int64)
    cnt = 0
    k = np.zeros(n, dtype=np.int64)
    ub = np.zeros(n, dtype=np.int64)
    c = np.zeros(n)
    part = np.zeros(n + 1)
    i = n - 1
    c[i] = z[i]
    rad = np.sqrt(r2) / abs(R[i, i])
    k[i] = np.int64(np.ceil(c[i] - rad))
    ub[i] = np.int64(np.floor(c[i] + rad))
    while True:
        if k[i] > ub[i]:
            i += 1
            if i == n:
                break
            k[i] += 1
            continue
        term = R[i, i] * (k[i] - c[i])
        s = part[i + 1] + term * term
        if s > r2:
            k[i] += 1
            continue
        if i == 0:
            if cnt == cap:
                cap *= 2
                grown = np.empty((cap, n), dtype=np.int64)
                grown[:cnt] = out[:cnt]
                out = grown
            out[cnt] = k
            cnt += 1
            k[0] += 1
            continue
        part[i] = s
        i -= 1
        acc = 0.0
        for j in range(i + 1, n):
            acc += R[i, j] * (k[j] - z[j])
        c[i] = z[i] - acc / R[i, i]
        rem = r2 - part[i + 1]
        if rem < 0.0:
            rem = 0.0
        rad = np.sqrt(rem) / abs(R[i, i])
        k[i] = np.int64(np.ceil(c[i] - rad))
        ub[i] = np.int64(np.floor(c[i] + rad))
    return out[:cnt].copy()


def _fincke_pohst_numpy(R, z, r2):
    # breadth-first: expand all partial assignments one level at a time
    n = R.shape[0]
    K = np.zeros((1, 0), dtype=np.int64)
    P = np.zeros(1)
    for i in range(n - 1, -1, -1):
        if K.shape[0] == 0:
            break
        tail = K - z[i + 1:]
        c = z[i] - (tail @ R[i, i + 1:]) / R[i, i] if n - i - 1 else np.full(K.shape[0], z[i])
        rad = np.sqrt(np.maximum(r2 - P, 0.0)) / abs(R[i, i])
        lo = np.ceil(c - rad).astype(np.int64)
        hi = np.floor(c + rad).astype(np.int64)
        width = np.maximum(hi - lo + 1, 0)
        rows = np.repeat(np.arange(K.shape[0]), width)
        offs = np.arange(rows.size) - np.repeat(np.cumsum(width) - width, width)
        ki = lo[rows] + offs
        term = R[i, i] * (ki - c[rows])
        s = P[rows] + term * term
        keep = s <= r2
        K = np.concatenate([ki[keep, None], K[rows[keep]]], axis=1)
        P = s[keep]
    if K.shape[1] != n:
        return np.zeros((0, n), dtype=np.int64)
    return K


def fincke_pohst(R, z, r2):
    """All integer ``k`` with ``|R (k - z)|^2 <= r2`` for upper-triangular ``R``."""
    R = np.ascontiguousarray(R, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    if get_backend() == "numba":
        return _fincke_pohst_numba(R, z, float(r2))
    return _fincke_pohst_numpy(R, z, float(r2))


# ---------------------------------------------------------------------------
# Nearest-neighbour distances
# ---------------------------------------------------------------------------


@njit
def _nn_grid_numba(query, ref, h):
    nq, d = query.shape
    nr = ref.shape[0]
    out = np.full(nq, np.inf)
    if nr == 0:
        return out
    lo = np.empty(d)
    dims = np.empty(d, dtype=np.int64)
    for j in range(d):
        lo[j] = ref[:, j].min()
        dims[j] = np.int64((ref[:, j].max() - lo[j]) / h) + 1
    stride = np.ones(d, dtype=np.int64)
    for j in range(1, d):
        stride[j] = stride[j - 1] * dims[j - 1]
    ncell = stride[d - 1] * dims[d - 1]
    keys = np.empty(nr, dtype=np.int64)
    for p in range(nr):
        key = 0
        for j in range(d):
            key += np.int64((ref[p, j] - lo[j]) / h) * stride[j]
        keys[p] = key
    order = np.argsort(keys, kind="mergesort")
    start = np.zeros(ncell + 1, dtype=np.int64)
    for p in range(nr):
        start[keys[p] + 1] += 1
    for c in range(ncell):
        start[c + 1] += start[c]

    qc = np.empty(d, dtype=np.int64)
    off = np.empty(d, dtype=np.int64)
    for q in range(nq):
        reach = 0
        # start from the cell of the query's projection onto the grid box;
        # projection is non-expansive, so the r * h stopping bound still holds
        for j in range(d):
            c = np.floor((query[q, j] - lo[j]) / h)
            c = min(max(c, 0.0), float(dims[j] - 1))
            qc[j] = np.int64(c)
            reach = max(reach, max(qc[j], dims[j] - 1 - qc[j]))
        best = np.inf
        r = 0
        while r <= reach:
            # visit cells at Chebyshev distance exactly r
            for j in range(d):
                off[j] = -r
            while True:
                ring = False
                inside = True
                key = 0
                for j in range(d):
                    if abs(off[j]) == r:
                        ring = True
                    cj = qc[j] + off[j]
                    if cj < 0 or cj >= dims[j]:
                        inside = False
                    key += cj * stride[j]
                if ring and inside:
                    for t in range(start[key], start[key + 1]):
                        p = order[t]
                        acc = 0.0
                        for j in range(d):
                            diff = query[q, j] - ref[p, j]
                            acc += diff * diff
                        if acc < best:
                            best = acc
                j = 0
                while j < d:
                    off[j] += 1
                    if off[j] <= r:
                        break
                    off[j] = -r
                    j += 1
                if j == d:
                    break
            if best < np.inf and np.sqrt(best) <= r * h:
                break
            r += 1
        out[q] = np.sqrt(best)
    return out


def _cell_size(ref):
    n, d = ref.shape
    extent = np.maximum(ref.max(axis=0) - ref.min(axis=0), 1e-12)
    h = float((np.prod(extent) * 2.0 / n) ** (1.0 / d))
    # bound total cell count to a few per point
    while np.prod(np.floor(extent / h) + 1) > 8 * n + 64:
        h *= 1.5
    return max(h, 1e-9)


def nn_distances(query, ref):
    """Distance from each query point to its nearest point of ``ref``.

    The numba path uses a uniform cell grid; the numpy path a k-d tree.
    Returns ``inf`` everywhere when ``ref`` is empty.
    """
    query = np.ascontiguousarray(query, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    if query.ndim == 1:
        query = query[:, None]
    if ref.ndim == 1:
        ref = ref[:, None]
    if ref.shape[0] == 0:
        return np.full(query.shape[0], np.inf)
    if query.shape[0] == 0:
        return np.zeros(0)
    if get_backend() == "numba":
        return _nn_grid_numba(query, ref, _cell_size(ref))
    dist, _ = cKDTree(ref).query(query)
    return np.asarray(dist, dtype=np.float64)


# ---------------------------------------------------------------------------
# Cube-cover counting for box dimension
# ---------------------------------------------------------------------------


@njit
def _count_cells_numba(points, K):
    n, d = points.shape
    if n == 0:
        return 0
    cells = np.empty((n, d), dtype=np.int64)
    for p in range(n):
        for j in range(d):
            cells[p, j] = np.int64(np.floor(points[p, j] * K))
    lo = np.empty(d, dtype=np.int64)
    span = np.empty(d, dtype=np.int64)
    for j in range(d):
        lo[j] = cells[:, j].min()
        span[j] = cells[:, j].max() - lo[j] + 1
    keys = np.empty(n, dtype=np.int64)
    for p in range(n):
        key = 0
        for j in range(d - 1, -1, -1):
            key = key * span[j] + (cells[p, j] - lo[j])
        keys[p] = key
    keys.sort()
    count = 1
    for p in range(1, n):
        if keys[p] != keys[p - 1]:
            count += 1
    return count


def count_cells(points, K):
    """Number of distinct half-open cubes ``Q_K(l)`` hit by ``points``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] == 0:
        return 0
    if get_backend() == "numba":
        return int(_count_cells_numba(points, int(K)))
    cells = np.floor(points * K).astype(np.int64)
    return int(np.unique(cells, axis=0).shape[0])
