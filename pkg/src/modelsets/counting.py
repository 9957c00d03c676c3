"""Counting in ordered families, patches and patch windows, box dimension, dyadic intervals."""

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.stats import qmc

from . import kernels
from .cutproject import Window, density, generate
from .errors import DegenerateFit, IncompleteSupport, ModelSetError, OutOfRange
from .lattice import DEFAULT_CAP, Region, covolume, enumerate_lattice, unit_ball_volume

COUNT_COLUMNS = ("T", "vol", "count", "error", "log_vol", "log_abs_error")
PATCH_COLUMNS = ("key_hash", "multiplicity", "predicted_freq", "empirical_freq", "rel_error")


# ---------------------------------------------------------------------------
# Ordered families and counting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderedFamily:
    """Nested regions ``Omega_T`` in R^d.

    ``balls``: closed ``B(0, T)``. ``boxes``: ``[0, T)^d`` (``anchor="corner"``)
    or ``[-T, T)^d`` (``anchor="centered"``).
    """

    kind: str
    d: int
    anchor: str = "corner"

    def __post_init__(self):
        if self.kind not in ("balls", "boxes"):
            raise ModelSetError(f"unknown family kind {self.kind!r}")

    def region(self, T):
        if self.kind == "balls":
            return Region.ball(np.zeros(self.d), T)
        if self.anchor == "corner":
            return Region.box(np.zeros(self.d), np.full(self.d, float(T)))
        return Region.box(np.full(self.d, -float(T)), np.full(self.d, float(T)))

    def volume(self, T):
        if self.kind == "balls":
            return unit_ball_volume(self.d) * T**self.d
        side = T if self.anchor == "corner" else 2 * T
        return float(side) ** self.d

    def parameter_for_volume(self, vol):
        """The ``T`` with ``volume(T) = vol``."""
        if vol <= 0:
            raise OutOfRange("volume must be positive")
        if self.kind == "balls":
            return (vol / unit_ball_volume(self.d)) ** (1.0 / self.d)
        side = vol ** (1.0 / self.d)
        return side if self.anchor == "corner" else side / 2


@dataclass
class CountRow:
    T: float
    vol: float
    count: int
    error: float


def count_in_family(scheme, grid, window, family, T_list, cap=DEFAULT_CAP):
    """Exact counts in ``Omega_T`` and signed errors ``count - D * vol``."""
    T_list = list(T_list)
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be increasing")
    D = density(scheme, grid, window)
    ms = generate(scheme, grid, window, family.region(T_list[-1]), cap)
    rows = []
    for T in T_list:
        region = family.region(T)
        count = int(np.count_nonzero(region.contains(ms.points))) if len(ms.points) else 0
        vol = family.volume(T)
        rows.append(CountRow(float(T), vol, count, count - D * vol))
    return rows


@dataclass
class ExponentFit:
    slope: float
    stderr: float
    n_points: int


def fit_error_exponent(rows):
    """Least-squares slope of ``log|error|`` against ``log vol`` (zero errors dropped)."""
    pairs = [(r.vol, abs(r.error)) for r in rows if abs(r.error) > 1e-12]
    if len(pairs) < 3:
        raise DegenerateFit(f"need >= 3 nonzero errors, have {len(pairs)}")
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    if np.ptp(x) == 0:
        raise DegenerateFit("all volumes equal")
    res = stats.linregress(x, y)
    return ExponentFit(float(res.slope), float(res.stderr), len(pairs))


def write_count_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COUNT_COLUMNS)
    for r in rows:
        log_err = repr(math.log(abs(r.error))) if abs(r.error) > 1e-12 else ""
        w.writerow([repr(r.T), repr(r.vol), r.count, repr(float(r.error)), repr(math.log(r.vol)), log_err])


# ---------------------------------------------------------------------------
# Dyadic decomposition
# ---------------------------------------------------------------------------


def dyadic_decomposition(N, T):
    """Cover ``[0, N)`` by intervals ``[u 2^t, (u+1) 2^t)`` following the binary digits of N."""
    if not (0 < N <= 2**T):
        raise OutOfRange(f"need 0 < N <= 2^T, got N={N}, T={T}")
    pairs = []
    start = 0
    for t in range(T, -1, -1):
        if N & (1 << t):
            pairs.append((start, start + (1 << t)))
            start += 1 << t
    return pairs


def dyadic_family(T):
    """All pairs ``(u 2^t, (u+1) 2^t)`` with ``0 <= t <= T`` inside ``[0, 2^T]``."""
    return [(u << t, (u + 1) << t) for t in range(T + 1) for u in range(1 << (T - t))]


def in_dyadic_family(pair, T):
    a, b = pair
    width = b - a
    return 0 <= a < b <= 2**T and width & (width - 1) == 0 and a % width == 0


# ---------------------------------------------------------------------------
# Patches
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Patch:
    """R-patch around a point: exact integer keys of relative lattice coordinates."""

    center_lift: tuple
    radius: float
    key: tuple

    def __eq__(self, other):
        return isinstance(other, Patch) and self.radius == other.radius and self.key == other.key

    def __hash__(self):
        return hash((self.radius, self.key))

    def key_hash(self):
        return hashlib.sha1(repr(self.key).encode()).hexdigest()[:12]


def _neighbour_lists(points, centers, R):
    from scipy.spatial import cKDTree

    tree = cKDTree(points)
    return tree.query_ball_point(centers, R + 1e-9)


def patch_keys(model_set, R, centers_idx=None):
    """Keys of the R-patches at the given point indices (default: all points)."""
    pts = model_set.points
    lifts = model_set.lifts
    idx = np.arange(len(pts)) if centers_idx is None else np.asarray(centers_idx)
    for i in idx:
        if not model_set.covers_ball(pts[i], R):
            raise IncompleteSupport(f"B(x, {R}) around point {i} leaves the generated region")
    if len(idx) == 0:
        return []
    nbrs = _neighbour_lists(pts, pts[idx], R)
    keys = []
    for i, nb in zip(idx, nbrs):
        nb = [j for j in nb if np.linalg.norm(pts[j] - pts[i]) <= R + 1e-9]
        diffs = sorted(tuple(int(v) for v in lifts[j] - lifts[i]) for j in nb)
        keys.append(Patch(tuple(int(v) for v in lifts[i]), float(R), tuple(diffs)))
    return keys


def extract_patch(model_set, point, R):
    """R-patch at ``point`` (a point of the set, or its index)."""
    if np.ndim(point) == 0:
        i = int(point)
    else:
        dist = np.linalg.norm(model_set.points - np.asarray(point, dtype=np.float64), axis=1)
        i = int(np.argmin(dist))
        if dist[i] > 1e-9:
            raise ModelSetError("point is not in the model set")
    return patch_keys(model_set, R, [i])[0]


# --- patch windows --------------------------------------------------------

_CANDIDATE_CACHE = {}


def patch_candidates(scheme, grid, window, R, cap=DEFAULT_CAP):
    """Lattice vectors with physical norm <= R and internal part in ``W - W`` (cached)."""
    key = (float(R), scheme, grid.basis.tobytes(), repr(window.describe()))
    if key in _CANDIDATE_CACHE:
        return _CANDIDATE_CACHE[key]
    wlo, whi = window.bounding_box()
    span = whi - wlo
    lat = grid.linear_part()
    region = Region.product(Region.ball(np.zeros(scheme.d), R), scheme.phys, -span, span)
    pts, coeffs = enumerate_lattice(lat, region, cap)
    y = scheme.pi_int(pts)
    keep = np.all(np.abs(y) < span, axis=1) & np.any(coeffs != 0, axis=1)
    out = (coeffs[keep], y[keep])
    _CANDIDATE_CACHE[key] = out
    return out


def _box_intersect(a, b):
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    return (lo, hi) if np.all(hi > lo) else None


def _box_subtract(a, b):
    """``a \\ b`` as disjoint half-open boxes."""
    inter = _box_intersect(a, b)
    if inter is None:
        return [a]
    out = []
    lo, hi = a[0].copy(), a[1].copy()
    for j in range(len(lo)):
        if lo[j] < inter[0][j]:
            plo, phi = lo.copy(), hi.copy()
            phi[j] = inter[0][j]
            out.append((plo, phi))
            lo[j] = inter[0][j]
        if inter[1][j] < hi[j]:
            plo, phi = lo.copy(), hi.copy()
            plo[j] = inter[1][j]
            out.append((plo, phi))
            hi[j] = inter[1][j]
    return out


def _box_pieces(window):
    if window.kind == "box":
        return [(window.lo.copy(), window.hi.copy())]
    if window.kind == "union" and all(p.kind == "box" for p in window.pieces):
        return [(p.lo.copy(), p.hi.copy()) for p in window.pieces]
    return None


@dataclass
class PatchWindow:
    """``W_Delta`` as disjoint boxes (exact) or as a membership predicate with QMC volume."""

    volume: float
    volume_error: float
    boxes: list = field(default=None, repr=False)
    exact: bool = True

    def as_window(self, m):
        if self.boxes is None:
            raise ModelSetError("only box-decomposed patch windows convert to windows")
        return Window.union([Window.box(lo, hi) for lo, hi in self.boxes], m)


def patch_window(scheme, grid, window, patch, cap=DEFAULT_CAP, qmc_points=2**16):
    """Window ``W_Delta`` whose model set is exactly the centres with patch ``patch``."""
    coeffs, shifts = patch_candidates(scheme, grid, window, patch.radius, cap)
    key = set(patch.key)
    key.discard(tuple([0] * scheme.n))
    present = [tuple(int(v) for v in c) in key for c in coeffs]
    missing = key - {tuple(int(v) for v in c) for c in coeffs}
    if missing:
        raise IncompleteSupport("patch key has vectors outside the candidate set")
    pieces = _box_pieces(window)
    if pieces is not None:
        boxes = pieces
        for inside, y in zip(present, shifts):
            translated = [(lo - y, hi - y) for lo, hi in pieces]
            if inside:
                new = []
                for b in boxes:
                    for t in translated:
                        ib = _box_intersect(b, t)
                        if ib is not None:
                            new.append(ib)
                boxes = new
            else:
                for t in translated:
                    boxes = [piece for b in boxes for piece in _box_subtract(b, t)]
            if not boxes:
                break
        vol = float(sum(np.prod(hi - lo) for lo, hi in boxes))
        return PatchWindow(vol, 0.0, boxes, True)

    # general windows: scrambled Sobol estimate over the bounding box
    wlo, whi = window.bounding_box()
    sampler = qmc.Sobol(d=scheme.m, scramble=True, seed=0)
    u = wlo + (whi - wlo) * sampler.random(qmc_points)
    ok = window.contains(u)
    for inside, y in zip(present, shifts):
        hit = window.contains(u + y)
        ok &= hit if inside else ~hit
    frac = ok.mean()
    box_vol = float(np.prod(whi - wlo))
    err = box_vol * math.sqrt(max(frac * (1 - frac), 1e-300) / qmc_points)
    return PatchWindow(box_vol * frac, err, None, False)


@dataclass
class PatchClass:
    patch: Patch
    multiplicity: int
    predicted: float
    empirical: float
    window_volume: float

    @property
    def rel_error(self):
        return (self.empirical - self.predicted) / self.predicted if self.predicted else float("nan")


@dataclass
class PatchStats:
    R: float
    T: float
    total: int
    density: float
    classes: list

    def predicted_sum(self):
        return math.fsum(c.predicted for c in self.classes)

    def empirical_sum(self):
        return math.fsum(c.empirical for c in self.classes)


def patch_frequency(scheme, grid, window, patch, T, family=None, cap=DEFAULT_CAP):
    """Predicted ``vol(W_Delta) / covol`` and empirical frequency over ``Omega_T``."""
    family = family or OrderedFamily("balls", scheme.d)
    pw = patch_window(scheme, grid, window, patch, cap)
    predicted = pw.volume / covolume(grid)
    region = family.region(T)
    lo, hi = region.bounding_box()
    outer = Region.box(lo - patch.radius - 1, hi + patch.radius + 1)
    ms = generate(scheme, grid, window, outer, cap)
    centers = np.flatnonzero(region.contains(ms.points))
    keys = patch_keys(ms, patch.radius, centers)
    hits = sum(1 for k in keys if k == patch)
    return predicted, hits / family.volume(T)


def patch_statistics(scheme, grid, window, R, T, family=None, cap=DEFAULT_CAP):
    """Tabulate all R-patch classes with centres in ``Omega_T``."""
    family = family or OrderedFamily("balls", scheme.d)
    region = family.region(T)
    lo, hi = region.bounding_box()
    outer = Region.box(lo - R - 1, hi + R + 1)
    ms = generate(scheme, grid, window, outer, cap)
    centers = np.flatnonzero(region.contains(ms.points))
    keys = patch_keys(ms, R, centers)
    tally = {}
    for k in keys:
        tally.setdefault(k, []).append(k)
    vol = family.volume(T)
    covol = covolume(grid)
    classes = []
    for k in sorted(tally, key=lambda p: p.key):
        pw = patch_window(scheme, grid, window, k, cap)
        classes.append(PatchClass(k, len(tally[k]), pw.volume / covol, len(tally[k]) / vol, pw.volume))
    classes.sort(key=lambda c: (-c.multiplicity, c.patch.key))
    return PatchStats(float(R), float(T), len(keys), density(scheme, grid, window), classes)


def write_patch_csv(stats_, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PATCH_COLUMNS)
    for c in stats_.classes:
        w.writerow([c.patch.key_hash(), c.multiplicity, repr(c.predicted), repr(c.empirical), repr(c.rel_error)])


# ---------------------------------------------------------------------------
# Box dimension and patch exponents
# ---------------------------------------------------------------------------


def koch_curve(iterations, start=(0.0, 0.0), end=(1.0, 0.0)):
    """Vertices of the Koch polyline after ``iterations`` refinements."""
    pts = np.array([start, end], dtype=np.float64)
    rot = np.array([[0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, 0.5]])
    for _ in range(iterations):
        a, b = pts[:-1], pts[1:]
        step = (b - a) / 3
        p1 = a + step
        p3 = a + 2 * step
        p2 = p1 + step @ rot.T
        new = np.empty((4 * len(a) + 1, 2))
        new[0:-1:4], new[1::4], new[2::4], new[3::4] = a, p1, p2, p3
        new[-1] = pts[-1]
        pts = new
    return pts


def cover_count(points, K):
    """Number of cubes ``Q_K(l)`` meeting the sampled set."""
    return kernels.count_cells(points, K)


@dataclass
class BoxDimension:
    estimate: float
    stderr: float
    scales: np.ndarray
    counts: np.ndarray


def box_dimension(boundary, r_list):
    """Slope of ``log N`` against ``-log r`` with cube covers at ``K = floor(1/r)``.

    ``boundary`` is a :class:`Window` (its boundary is sampled) or a polyline
    given as an ``(N, m)`` vertex array, or a callable ``spacing -> points``.
    """
    r_list = np.asarray(r_list, dtype=np.float64)
    if len(r_list) < 4 or np.any(np.diff(r_list) >= 0):
        raise DegenerateFit("need >= 4 strictly decreasing scales")
    counts = []
    for r in r_list:
        K = int(math.floor(1.0 / r))
        spacing = 1.0 / (8.0 * K)
        if isinstance(boundary, Window):
            pts = boundary.boundary_points(spacing)
        elif callable(boundary):
            pts = boundary(spacing)
        else:
            from .cutproject import densify_polyline

            verts = np.asarray(boundary, dtype=np.float64)
            pts = densify_polyline(verts, spacing) if len(verts) > 1 else verts
        counts.append(cover_count(pts, K))
    counts = np.asarray(counts)
    x = -np.log([1.0 / math.floor(1.0 / r) for r in r_list])
    y = np.log(counts)
    res = stats.linregress(x, y)
    return BoxDimension(float(res.slope), float(res.stderr), r_list, counts)


def patch_exponents(m, delta):
    """``lambda0 = m / (m + 2 delta)`` and ``theta0 = delta / (m + 2 delta)``."""
    if m < 1 or not (0 < delta <= m):
        raise OutOfRange("need m >= 1 and 0 < delta <= m")
    denom = m + 2.0 * delta
    return {"lambda0": m / denom, "theta0": delta / denom}
