"""Grids in R^n, affine actions, lattice-point enumeration, successive minima and alpha."""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionTooLarge, ModelSetError, NotUnimodular, RegionTooLarge, SingularBasis

MEMBERSHIP_TOL = 1e-9
DEFAULT_CAP = 10**8
BALL_TOL = 1e-9


def unit_ball_volume(n):
    if n == 0:
        return 1.0
    if n == 1:
        return 2.0
    # V_n = 2 pi / n * V_{n-2}
    return 2.0 * math.pi / n * unit_ball_volume(n - 2)


@dataclass(frozen=True, eq=False)
class Grid:
    """A translate ``basis @ Z^n + translation``; columns of ``basis`` generate the lattice."""

    basis: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise ModelSetError("basis must be square")
        t = np.zeros(basis.shape[0]) if self.translation is None else np.array(self.translation, dtype=np.float64)
        if t.shape != (basis.shape[0],):
            raise ModelSetError("translation has wrong shape")
        basis.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "translation", t)

    @classmethod
    def standard(cls, n):
        return cls(np.eye(n), np.zeros(n))

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def is_lattice(self):
        return not np.any(self.translation)

    def linear_part(self):
        return Grid(self.basis, np.zeros(self.n))

    def translated(self, v):
        return Grid(self.basis, self.translation + np.asarray(v, dtype=np.float64))

    def points_from_coeffs(self, coeffs):
        """``basis @ k + translation`` for each row ``k``, with a fixed summation order."""
        coeffs = np.asarray(coeffs)
        out = np.broadcast_to(self.translation, (coeffs.shape[0], self.n)).copy()
        for j in range(self.n):
            out += coeffs[:, j:j + 1] * self.basis[:, j]
        return out

    def coeffs_of(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.linalg.solve(self.basis, (points - self.translation).T).T

    def contains(self, points):
        """Membership test: integral lattice coordinates to ``MEMBERSHIP_TOL``."""
        c = self.coeffs_of(points)
        return np.all(np.abs(c - np.round(c)) < MEMBERSHIP_TOL, axis=1)

    def __eq__(self, other):
        return (isinstance(other, Grid) and np.array_equal(self.basis, other.basis)
                and np.array_equal(self.translation, other.translation))

    __hash__ = None


def covolume(grid):
    basis = grid.basis
    det = abs(np.linalg.det(basis))
    scale = max(np.abs(basis).max(), 1e-300)
    if det < 1e-12 * scale**grid.n:
        raise SingularBasis(f"|det| = {det:g}")
    return float(det)


def apply_element(grid, A, v=None):
    """Act by ``x -> A x + v`` with ``det A = 1``."""
    A = np.asarray(A, dtype=np.float64)
    v = np.zeros(grid.n) if v is None else np.asarray(v, dtype=np.float64)
    if A.shape != (grid.n, grid.n):
        raise ModelSetError(f"A must be {grid.n}x{grid.n}")
    if abs(np.linalg.det(A) - 1.0) >= 1e-9:
        raise NotUnimodular(f"det A = {np.linalg.det(A)!r}")
    return Grid(A @ grid.basis, A @ grid.translation + v)


def embed_top_left(g, n):
    """Block-diagonal ``diag(g, Id)`` in dimension n."""
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    E = np.eye(n)
    E[:g.shape[0], :g.shape[1]] = g
    return E


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Region:
    """Bounded region in R^n: half-open ``box``, closed ``ball``, or ``product``.

    A product region is a ball or box on the coordinates ``phys`` times a
    half-open box on the remaining coordinates.
    """

    kind: str
    lo: np.ndarray = None
    hi: np.ndarray = None
    center: np.ndarray = None
    radius: float = None
    phys: tuple = None
    inner: "Region" = None

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        if lo.shape != hi.shape:
            raise ModelSetError("box bounds disagree in shape")
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=np.atleast_1d(np.asarray(center, dtype=np.float64)), radius=float(radius))

    @classmethod
    def product(cls, inner, phys, int_lo, int_hi):
        """``inner`` on coordinates ``phys`` times the box ``[int_lo, int_hi)`` elsewhere."""
        n = len(phys) + len(int_lo)
        lo = np.empty(n)
        hi = np.empty(n)
        ilo, ihi = inner.bounding_box()
        rest = [i for i in range(n) if i not in phys]
        lo[list(phys)], hi[list(phys)] = ilo, ihi
        lo[rest], hi[rest] = int_lo, int_hi
        return cls("product", lo=lo, hi=hi, phys=tuple(phys), inner=inner)

    @property
    def dim(self):
        return len(self.center) if self.kind == "ball" else len(self.lo)

    def bounding_box(self):
        """Box ``[lo, hi)`` containing the region (closed balls get a hair of slack)."""
        if self.kind == "ball":
            pad = self.radius * (1 + 1e-12) + BALL_TOL
            return self.center - pad, self.center + pad
        return self.lo, self.hi

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.kind == "box":
            return np.all((x >= self.lo) & (x < self.hi), axis=1)
        if self.kind == "ball":
            return np.sqrt(np.sum((x - self.center) ** 2, axis=1)) <= self.radius + BALL_TOL
        phys = list(self.phys)
        rest = [i for i in range(x.shape[1]) if i not in self.phys]
        ok = np.all((x[:, rest] >= self.lo[rest]) & (x[:, rest] < self.hi[rest]), axis=1)
        return ok & self.inner.contains(x[:, phys])

    def volume(self):
        if self.kind == "ball":
            return unit_ball_volume(self.dim) * self.radius**self.dim
        if self.kind == "box":
            return float(np.prod(np.maximum(self.hi - self.lo, 0.0)))
        rest = [i for i in range(self.dim) if i not in self.phys]
        return self.inner.volume() * float(np.prod(np.maximum(self.hi[rest] - self.lo[rest], 0.0)))

    def contains_box(self, lo, hi):
        """Whether the closed box ``[lo, hi]`` lies inside this region."""
        lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
        if self.kind == "ball":
            far = np.maximum(np.abs(lo - self.center), np.abs(hi - self.center))
            return float(np.sqrt(np.sum(far**2))) <= self.radius + BALL_TOL
        if self.kind == "box":
            return bool(np.all(lo >= self.lo) and np.all(hi < self.hi))
        raise ModelSetError("containment test not defined for product regions")


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _ellipsoid_search(basis, translation, center, scales, radius, cap):
    """Integer k with ``|diag(1/scales) (basis k + translation - center)| <= radius``."""
    S = basis / scales[:, None]
    shift = (translation - center) / scales
    n = basis.shape[0]
    det = abs(np.linalg.det(S))
    predicted = unit_ball_volume(n) * radius**n / det
    if predicted > cap:
        raise RegionTooLarge(f"predicted {predicted:.3g} candidates exceeds cap {cap:.3g}")
    S_red, U = kernels.lll(S)
    Q, R = np.linalg.qr(S_red)
    # |S_red k + shift| = |R (k - z)| with z = -R^{-1} Q^T shift
    z = -np.linalg.solve(R, Q.T @ shift)
    k_red = kernels.fincke_pohst(R, z, radius * radius * (1 + 1e-9) + 1e-12)
    return k_red @ U.T


def enumerate_lattice(grid, region, cap=DEFAULT_CAP):
    """Grid points in ``region`` with their integer coordinates.

    Returns ``(points, coeffs)`` sorted lexicographically by point.
    """
    n = grid.n
    if region.dim != n:
        raise ModelSetError(f"region dimension {region.dim} != grid dimension {n}")
    if n == 0:
        return np.zeros((1, 0)), np.zeros((1, 0), dtype=np.int64)
    if region.kind == "ball":
        scales = np.ones(n)
        coeffs = _ellipsoid_search(grid.basis, grid.translation, region.center, scales,
                                   region.radius * (1 + 1e-12) + BALL_TOL, cap)
    else:
        lo, hi = region.bounding_box()
        if np.any(hi <= lo):
            return np.zeros((0, n)), np.zeros((0, n), dtype=np.int64)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        coeffs = _ellipsoid_search(grid.basis, grid.translation, center, half, math.sqrt(n), cap)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.int64)
    points = grid.points_from_coeffs(coeffs)
    keep = region.contains(points)
    points, coeffs = points[keep], coeffs[keep]
    order = np.lexsort(points.T[::-1])
    return points[order], coeffs[order]


def enumerate_points(grid, region, cap=DEFAULT_CAP):
    """Exactly the grid points in ``region``, sorted lexicographically."""
    return enumerate_lattice(grid, region, cap)[0]


def brute_force_points(grid, region, bound):
    """Reference enumeration over all coefficients ``|k_i| <= bound``."""
    axes = [np.arange(-bound, bound + 1)] * grid.n
    coeffs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.n)
    pts = grid.points_from_coeffs(coeffs)
    keep = region.contains(pts)
    pts = pts[keep]
    return pts[np.lexsort(pts.T[::-1])]


def dump_points(points, fh):
    """Write the point-list format: ``n <n>`` then one point per line."""
    points = np.atleast_2d(points)
    fh.write(f"n {points.shape[1]}\n")
    for p in points:
        fh.write(" ".join(f"{x:.12g}" for x in p) + "\n")


def load_points(fh):
    header = fh.readline().split()
    if len(header) != 2 or header[0] != "n":
        raise ModelSetError("bad point-list header")
    n = int(header[1])
    rows = [list(map(float, line.split())) for line in fh if line.strip()]
    return np.array(rows, dtype=np.float64).reshape(-1, n)


# ---------------------------------------------------------------------------
# Successive minima and alpha
# ---------------------------------------------------------------------------

MAX_MINIMA_DIM = 8


def short_vectors(grid, radius, cap=DEFAULT_CAP):
    """Nonzero lattice vectors of norm <= radius, sorted by norm."""
    pts, coeffs = enumerate_lattice(grid.linear_part(), Region.ball(np.zeros(grid.n), radius), cap)
    norms = np.linalg.norm(pts, axis=1)
    nz = np.any(coeffs != 0, axis=1)
    pts, coeffs, norms = pts[nz], coeffs[nz], norms[nz]
    order = np.argsort(norms, kind="stable")
    return pts[order], coeffs[order], norms[order]


def _minima_with_vectors(grid):
    n = grid.n
    if n > MAX_MINIMA_DIM:
        raise DimensionTooLarge(f"successive minima limited to n <= {MAX_MINIMA_DIM}")
    covolume(grid)
    reduced, _ = kernels.lll(grid.basis)
    bound = float(np.linalg.norm(reduced, axis=0).max())
    pts, coeffs, norms = short_vectors(grid, bound)
    chosen, minima, vecs = [], [], []
    for p, c, r in zip(pts, coeffs, norms):
        trial = np.array(chosen + [c], dtype=np.float64)
        if np.linalg.matrix_rank(trial) == len(chosen) + 1:
            chosen.append(c)
            minima.append(float(r))
            vecs.append(p)
            if len(chosen) == n:
                break
    return np.array(minima), np.array(vecs)


def successive_minima(grid):
    """Euclidean successive minima of a lattice (translation ignored)."""
    if not grid.is_lattice:
        raise ModelSetError("successive minima need a lattice (zero translation)")
    return _minima_with_vectors(grid)[0]


def minkowski_constant(n):
    """``max_j 2^j / vol(B^j)`` for j <= n: exact/approx alpha ratio bound for unimodular lattices."""
    return max(2.0**j / unit_ball_volume(j) for j in range(1, n + 1))


def alpha(grid, method="exact"):
    """``max covol(L')^{-1}`` over nonzero subgroups; returns ``(value, method)``.

    ``exact`` (n <= 3) uses rank-1 minima, the duality
    ``min covol of rank-(n-1) sublattices = covol(L) * lambda_1(L*)``, and
    the full lattice. ``approx`` is ``(lambda_1 ... lambda_{i0})^{-1}`` with
    ``i0`` the last index with ``lambda_i <= 1``.
    """
    if not grid.is_lattice:
        raise ModelSetError("alpha needs a lattice (zero translation)")
    if method == "approx":
        lam = successive_minima(grid)
        small = lam[lam <= 1.0]
        return float(1.0 / np.prod(small)) if small.size else 1.0, "approx"
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    n = grid.n
    if n > 3:
        raise DimensionTooLarge("exact alpha limited to n <= 3")
    covol = covolume(grid)
    candidates = [1.0 / successive_minima(grid)[0], 1.0 / covol]
    if n == 3:
        dual = Grid(np.linalg.inv(grid.basis).T, np.zeros(n))
        candidates.append(1.0 / (covol * successive_minima(dual)[0]))
    return float(max(candidates)), "exact"
