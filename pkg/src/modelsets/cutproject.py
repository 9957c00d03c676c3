"""Cut-and-project sets: schemes, windows, generation and density."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IncompleteSupport, ModelSetError, ZeroVolumeWindow
from .lattice import (
    DEFAULT_CAP,
    Grid,
    Region,
    apply_element,
    covolume,
    enumerate_lattice,
    unit_ball_volume,
)


@dataclass(frozen=True)
class Scheme:
    """Coordinate-aligned splitting R^n = V_phys + V_int."""

    d: int
    m: int
    phys: tuple = None
    internal: tuple = None

    def __post_init__(self):
        n = self.d + self.m
        phys = tuple(range(self.d)) if self.phys is None else tuple(int(i) for i in self.phys)
        internal = tuple(i for i in range(n) if i not in phys) if self.internal is None else tuple(
            int(i) for i in self.internal)
        if len(phys) != self.d or len(internal) != self.m or sorted(phys + internal) != list(range(n)):
            raise ModelSetError("phys and internal coordinates must partition range(n)")
        object.__setattr__(self, "phys", phys)
        object.__setattr__(self, "internal", internal)

    @property
    def n(self):
        return self.d + self.m

    def pi_phys(self, x):
        return np.asarray(x)[..., list(self.phys)]

    def pi_int(self, x):
        return np.asarray(x)[..., list(self.internal)]

    def embed_phys(self, g):
        """Top-left embedding of ``g`` acting on the physical coordinates."""
        E = np.eye(self.n)
        idx = np.array(self.phys)
        E[np.ix_(idx, idx)] = np.atleast_2d(g)
        return E


def align_splitting(grid, phys_basis, int_basis):
    """Re-express ``grid`` in coordinates where the given subspaces are coordinate-aligned.

    ``phys_basis`` (n x d) and ``int_basis`` (n x m) span complementary
    subspaces. The returned grid lives in coordinates ``(a, b)`` with
    ``x = phys_basis @ a + int_basis @ b``, so the first d coordinates are
    physical.
    """
    C = np.hstack([np.asarray(phys_basis, float), np.asarray(int_basis, float)])
    Cinv = np.linalg.inv(C)
    return Grid(Cinv @ grid.basis, Cinv @ grid.translation)


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


def _as_rows(y, m):
    y = np.asarray(y, dtype=np.float64)
    return y if y.ndim == 2 else y.reshape(-1, m)


def _polygon_halfplanes(vertices):
    v = np.asarray(vertices, dtype=np.float64)
    area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    if area2 < 0:
        v = v[::-1]
    edges = np.roll(v, -1, axis=0) - v
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)  # outward for CCW
    offsets = np.sum(normals * v, axis=1)
    return v, normals, offsets


@dataclass(frozen=True, eq=False)
class Window:
    """Bounded window in R^m: ``box``, ``ball``, convex ``polygon`` or ``union``.

    Boxes are half-open ``[lo, hi)``. Polygon edges whose outward normal points
    to negative x (or straight down) are included, the others excluded, which
    matches the box convention. Balls are closed. Union pieces are assumed
    disjoint.
    """

    kind: str
    m: int
    lo: np.ndarray = None
    hi: np.ndarray = None
    center: np.ndarray = None
    radius: float = None
    vertices: np.ndarray = None
    pieces: tuple = field(default=())

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        return cls("box", len(lo), lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        return cls("ball", len(center), center=center, radius=float(radius))

    @classmethod
    def polygon(cls, vertices):
        v, _, _ = _polygon_halfplanes(vertices)
        return cls("polygon", 2, vertices=v)

    @classmethod
    def union(cls, pieces, m=None):
        pieces = tuple(pieces)
        if m is None:
            if not pieces:
                raise ModelSetError("empty union needs an explicit dimension")
            m = pieces[0].m
        if any(p.m != m for p in pieces):
            raise ModelSetError("union pieces must share a dimension")
        return cls("union", m, pieces=pieces)

    @classmethod
    def whole(cls):
        """The window of a degenerate scheme with m = 0 (volume 1)."""
        return cls.box(np.zeros(0), np.zeros(0))

    def contains(self, y):
        y = _as_rows(y, self.m)
        if self.kind == "box":
            return np.all((y >= self.lo) & (y < self.hi), axis=1)
        if self.kind == "ball":
            return np.sum((y - self.center) ** 2, axis=1) <= self.radius**2
        if self.kind == "polygon":
            _, normals, offsets = _polygon_halfplanes(self.vertices)
            s = y @ normals.T - offsets
            closed = (normals[:, 0] < 0) | ((normals[:, 0] == 0) & (normals[:, 1] < 0))
            inside = np.where(closed, s <= 0, s < 0)
            return np.all(inside, axis=1)
        out = np.zeros(y.shape[0], dtype=bool)
        for p in self.pieces:
            out |= p.contains(y)
        return out

    def volume(self):
        if self.kind == "box":
            return float(np.prod(np.maximum(self.hi - self.lo, 0.0)))
        if self.kind == "ball":
            return unit_ball_volume(self.m) * self.radius**self.m
        if self.kind == "polygon":
            v = self.vertices
            return 0.5 * abs(float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])))
        return float(sum(p.volume() for p in self.pieces))

    def bounding_box(self):
        if self.kind == "box":
            return self.lo.copy(), self.hi.copy()
        if self.kind == "ball":
            pad = self.radius * (1 + 1e-12) + 1e-12
            return self.center - pad, self.center + pad
        if self.kind == "polygon":
            # polygon right/top edges are excluded, so [min, max) suffices up to a hair
            lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
            return lo, hi + 1e-12 * np.maximum(1.0, np.abs(hi))
        if not self.pieces:
            return np.zeros(self.m), np.zeros(self.m)
        los, his = zip(*(p.bounding_box() for p in self.pieces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def translated(self, shift):
        shift = np.asarray(shift, dtype=np.float64)
        if self.kind == "box":
            return Window.box(self.lo + shift, self.hi + shift)
        if self.kind == "ball":
            return Window.ball(self.center + shift, self.radius)
        if self.kind == "polygon":
            return Window.polygon(self.vertices + shift)
        return Window.union([p.translated(shift) for p in self.pieces], self.m)

    def is_empty(self):
        return self.volume() == 0.0

    def is_regular(self):
        """Bounded with nonempty interior; boundaries of all supported kinds are null."""
        return self.volume() > 0.0

    def interior_point(self):
        """A point of the interior (used to recenter windows at the origin)."""
        if self.kind == "box":
            return 0.5 * (self.lo + self.hi)
        if self.kind == "ball":
            return self.center.copy()
        if self.kind == "polygon":
            return self.vertices.mean(axis=0)
        biggest = max(self.pieces, key=lambda p: p.volume())
        return biggest.interior_point()

    def boundary_distance(self, y):
        """Distance from each point to the window boundary."""
        y = _as_rows(y, self.m)
        if self.kind == "box":
            inside = np.all((y >= self.lo) & (y <= self.hi), axis=1)
            to_face = np.minimum(np.abs(y - self.lo), np.abs(y - self.hi)).min(axis=1) if self.m else np.full(
                len(y), np.inf)
            outside = np.sqrt(np.sum(np.maximum(0, np.maximum(self.lo - y, y - self.hi)) ** 2, axis=1))
            return np.where(inside, to_face, outside)
        if self.kind == "ball":
            return np.abs(np.sqrt(np.sum((y - self.center) ** 2, axis=1)) - self.radius)
        if self.kind == "polygon":
            v = self.vertices
            w = np.roll(v, -1, axis=0)
            best = np.full(len(y), np.inf)
            for a, b in zip(v, w):
                ab = b - a
                t = np.clip(((y - a) @ ab) / (ab @ ab), 0.0, 1.0)
                best = np.minimum(best, np.linalg.norm(y - (a + t[:, None] * ab), axis=1))
            return best
        best = np.full(len(y), np.inf)
        for p in self.pieces:
            best = np.minimum(best, p.boundary_distance(y))
        return best

    def boundary_points(self, spacing):
        """Points on the boundary with consecutive gaps at most ``spacing`` (m <= 2)."""
        if self.m == 0:
            return np.zeros((0, 0))
        if self.m == 1:
            if self.kind == "box":
                return np.array([self.lo, self.hi])
            if self.kind == "ball":
                return np.array([self.center - self.radius, self.center + self.radius])
            return np.vstack([p.boundary_points(spacing) for p in self.pieces])
        if self.m != 2:
            raise ModelSetError("boundary sampling implemented for m <= 2")
        if self.kind == "box":
            (x0, y0), (x1, y1) = self.lo, self.hi
            corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
            return densify_polyline(corners, spacing, closed=True)
        if self.kind == "polygon":
            return densify_polyline(self.vertices, spacing, closed=True)
        if self.kind == "ball":
            k = max(16, int(np.ceil(2 * np.pi * self.radius / spacing)))
            ang = np.linspace(0, 2 * np.pi, k, endpoint=False)
            return self.center + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return np.vstack([p.boundary_points(spacing) for p in self.pieces])

    def describe(self):
        if self.kind == "box":
            return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}
        if self.kind == "polygon":
            return {"kind": "polygon", "vertices": self.vertices.tolist()}
        return {"kind": "union", "pieces": [p.describe() for p in self.pieces]}


def densify_polyline(vertices, spacing, closed=False):
    v = np.asarray(vertices, dtype=np.float64)
    if closed:
        v = np.vstack([v, v[:1]])
    out = []
    for a, b in zip(v[:-1], v[1:]):
        k = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(k)[:, None] / k
        out.append(a + t * (b - a))
    out.append(v[-1:])
    return np.vstack(out)


def center_window(window):
    """Translate so an interior point sits at the origin; returns ``(window, shift)``."""
    shift = -window.interior_point()
    return window.translated(shift), shift


# ---------------------------------------------------------------------------
# Model sets
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ModelSet:
    """Points of Lambda(L, W) inside ``region`` with integer lattice coordinates of their lifts."""

    scheme: Scheme
    grid: Grid
    window: Window
    region: Region
    points: np.ndarray
    lifts: np.ndarray

    def __len__(self):
        return len(self.points)

    def lift_vectors(self):
        return self.grid.points_from_coeffs(self.lifts)

    def internal_coords(self):
        return self.scheme.pi_int(self.lift_vectors())

    def covers_ball(self, center, radius):
        lo = np.asarray(center, dtype=np.float64) - radius
        hi = np.asarray(center, dtype=np.float64) + radius
        if self.region.kind == "ball":
            return float(np.linalg.norm(np.asarray(center) - self.region.center)) + radius <= self.region.radius
        return self.region.contains_box(lo, hi)

    def within(self, region):
        """Restrict to a sub-region of physical space."""
        keep = region.contains(self.points) if len(self.points) else np.zeros(0, dtype=bool)
        return ModelSet(self.scheme, self.grid, self.window, region, self.points[keep], self.lifts[keep])


def _phys_region(region, d):
    if region.dim != d:
        raise ModelSetError(f"physical region must have dimension {d}")
    return region


def generate(scheme, grid, window, phys_region, cap=DEFAULT_CAP):
    """All points of Lambda(grid, window) in ``phys_region`` with their lifts."""
    if grid.n != scheme.n:
        raise ModelSetError("grid dimension does not match scheme")
    phys_region = _phys_region(phys_region, scheme.d)
    n, d = scheme.n, scheme.d
    empty = ModelSet(scheme, grid, window, phys_region, np.zeros((0, d)), np.zeros((0, n), dtype=np.int64))
    if window.kind == "union" and not window.pieces:
        return empty
    wlo, whi = window.bounding_box()
    if np.any(whi <= wlo):
        return empty
    region = Region.product(phys_region, scheme.phys, wlo, whi)
    pts, coeffs = enumerate_lattice(grid, region, cap)
    keep = window.contains(scheme.pi_int(pts)) if len(pts) else np.zeros(0, dtype=bool)
    pts, coeffs = pts[keep], coeffs[keep]
    phys = scheme.pi_phys(pts)
    order = np.lexsort(phys.T[::-1]) if d else np.arange(len(phys))
    return ModelSet(scheme, grid, window, phys_region, phys[order], coeffs[order])


def density(scheme, grid, window):
    """``vol(W) / covol(L)``."""
    vol = window.volume()
    if vol <= 0:
        raise ZeroVolumeWindow("window has zero volume")
    return vol / covolume(grid)


def empirical_density(model_set, T):
    """``#(Lambda in B(0,T)) / vol(B(0,T))``; regenerates when the set does not cover the ball."""
    d = model_set.scheme.d
    ball = Region.ball(np.zeros(d), T)
    ms = model_set
    if not ms.covers_ball(np.zeros(d), T):
        ms = generate(ms.scheme, ms.grid, ms.window, ball)
    count = int(np.count_nonzero(ball.contains(ms.points))) if len(ms.points) else 0
    return count / ball.volume()


def apply_phys(scheme, grid, g, v=None):
    """Act on a grid by ``g`` in SL_d (or (g, v) in ASL_d) embedded top-left."""
    E = scheme.embed_phys(g)
    shift = None
    if v is not None:
        shift = np.zeros(scheme.n)
        shift[list(scheme.phys)] = v
    return apply_element(grid, E, shift)


# ---------------------------------------------------------------------------
# Irreducibility diagnostics
# ---------------------------------------------------------------------------


@dataclass
class IrreducibilityReport:
    D: str
    I: str
    Reg: str
    probe_radius: float
    gap_threshold: float
    witnesses: dict

    def passed(self):
        return self.D == self.I == self.Reg == "pass"

    def as_dict(self):
        return {
            "D": self.D, "I": self.I, "Reg": self.Reg,
            "D_note": f"heuristic at radius {self.probe_radius:g}, gap threshold {self.gap_threshold:.4g}",
            "witnesses": self.witnesses,
        }


def _rational_dependence(int_rows, max_den=12, tol=1e-9):
    """Coordinate j of V_int whose values on the basis all lie in (1/q) Z for small q."""
    for j, row in enumerate(int_rows):
        for q in range(1, max_den + 1):
            scaled = row * q
            if np.all(np.abs(scaled - np.round(scaled)) < tol):
                return {"internal_coordinate": j, "denominator": q}
    return None


def _max_gap(points, lo, hi, rng_seed=0):
    """Largest distance from a probe point of [lo, hi) to the nearest of ``points``."""
    m = len(lo)
    if len(points) == 0:
        return float(np.linalg.norm(hi - lo))
    if m == 1:
        x = np.sort(np.concatenate([points[:, 0], []]))
        x = x[(x >= lo[0]) & (x < hi[0])]
        edges = np.concatenate([[lo[0]], x, [hi[0]]])
        inner = np.diff(edges)
        # gaps between samples count half (distance to nearest), edge gaps in full
        cand = [inner[0], inner[-1]] + list(0.5 * inner[1:-1])
        return float(max(cand))
    rng = np.random.default_rng(rng_seed)
    probes = lo + (hi - lo) * rng.random((4096, m))
    return float(kernels.nn_distances(probes, points).max())


def check_irreducibility(scheme, grid, probe_radius, window=None, gap_threshold=None, cap=DEFAULT_CAP):
    """Finite-radius report on conditions (D), (I) and (Reg).

    (I) fails iff a nonzero lattice vector with ``pi_phys = 0`` (to 1e-9
    relative) turns up within ``probe_radius``. (D) is a heuristic gap scan of
    ``pi_int`` over a reference box, plus an exact rational-dependence check
    on internal coordinates of the basis.
    """
    n, d, m = scheme.n, scheme.d, scheme.m
    lat = grid.linear_part()
    witnesses = {}

    # (I)
    probe_radius = float(probe_radius)
    tol = 1e-9 * max(1.0, probe_radius)
    lo = np.full(n, -probe_radius)
    hi = np.full(n, probe_radius)
    lo[list(scheme.phys)] = -tol
    hi[list(scheme.phys)] = tol
    region = Region.box(lo, hi)
    pts, coeffs = enumerate_lattice(lat, region, cap)
    nz = np.any(coeffs != 0, axis=1)
    I = "pass"
    if np.any(nz):
        I = "fail"
        # report the shortest offending vector
        k = np.argmin(np.linalg.norm(pts[nz], axis=1))
        witnesses["I"] = coeffs[nz][k].tolist()

    # (D)
    if window is not None and not window.is_empty():
        ref_lo, ref_hi = window.bounding_box()
    else:
        ref_lo, ref_hi = np.full(m, -0.5), np.full(m, 0.5)
    D = "pass"
    threshold = gap_threshold
    if m == 0:
        threshold = 0.0 if threshold is None else threshold
    else:
        dep = _rational_dependence(scheme.pi_int(lat.basis.T).T)
        phys_ball = Region.ball(np.zeros(d), probe_radius)
        box = Region.product(phys_ball, scheme.phys, ref_lo, ref_hi)
        pts, _ = enumerate_lattice(grid, box, cap)
        y = scheme.pi_int(pts)
        distinct = np.unique(np.round(y, 12), axis=0) if len(y) else y
        ref_vol = float(np.prod(ref_hi - ref_lo))
        # multiplicity counts: a discrete projection piles many lifts onto few values
        spacing = (ref_vol / max(len(y), 1)) ** (1.0 / m)
        if threshold is None:
            threshold = 4.0 * spacing
        gap = _max_gap(distinct, ref_lo, ref_hi)
        witnesses["D_gap"] = gap
        witnesses["D_expected_spacing"] = spacing
        if dep is not None:
            D = "fail"
            witnesses["D_rational_dependence"] = dep
        elif gap > threshold:
            D = "fail"

    Reg = "pass" if window is None or window.is_regular() else "fail"
    return IrreducibilityReport(D, I, Reg, float(probe_radius), float(threshold), witnesses)


def dump_model_set(ms, fh):
    """Header ``cps d=<d> m=<m>``, then d physical coordinates and n lift integers per line."""
    fh.write(f"cps d={ms.scheme.d} m={ms.scheme.m}\n")
    for p, u in zip(ms.points, ms.lifts):
        fh.write(" ".join([repr(float(x)) for x in p] + [str(int(k)) for k in u]) + "\n")


def load_model_set(fh):
    """Inverse of :func:`dump_model_set`: returns ``(d, m, points, lifts)``."""
    header = fh.readline().split()
    if len(header) != 3 or header[0] != "cps":
        raise ModelSetError("bad model-set header")
    d = int(header[1].split("=")[1])
    m = int(header[2].split("=")[1])
    pts, lifts = [], []
    for line in fh:
        parts = line.split()
        if not parts:
            continue
        pts.append([float(x) for x in parts[:d]])
        lifts.append([int(x) for x in parts[d:]])
    return d, m, np.array(pts, dtype=np.float64).reshape(-1, d), np.array(lifts, dtype=np.int64).reshape(-1, d + m)


def require_cover(model_set, center, radius):
    if not model_set.covers_ball(center, radius):
        raise IncompleteSupport(f"model set region does not cover B({center}, {radius})")
