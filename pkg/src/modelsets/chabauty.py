"""Chabauty-Fell distance between finite truncations of closed discrete sets."""

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cutproject import apply_phys, generate
from .errors import BoundaryHit, InsufficientTruncation
from .lattice import Region

log = logging.getLogger(__name__)

DEFAULT_EPS_FLOOR = 1e-4
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Truncation:
    """Points of a closed set inside ``B(0, valid_radius)``, complete there."""

    points: np.ndarray
    valid_radius: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        object.__setattr__(self, "points", pts)
        if len(pts):
            norms = np.linalg.norm(pts, axis=1)
            if norms.max() > self.valid_radius * (1 + 1e-12):
                raise ValueError("truncation has points beyond its valid radius")
            srt = pts[np.lexsort(pts.T[::-1])]
            if np.any(np.all(srt[1:] == srt[:-1], axis=1)):
                raise ValueError("truncation has duplicate points")

    @classmethod
    def clip(cls, points, radius):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        keep = np.linalg.norm(pts, axis=1) <= radius if len(pts) else np.zeros(0, bool)
        return cls(pts[keep], float(radius))

    @property
    def norms(self):
        return np.linalg.norm(self.points, axis=1)


def _holds(eps, norms, nn, partner_radius):
    """Y cap B(0, 1/eps) inside the eps-neighbourhood of the partner.

    Points whose nearest partner might lie beyond the partner's truncation
    are undecided and skipped.
    """
    inside = norms <= 1.0 / eps
    bad = inside & (nn > eps)
    decidable = norms + eps <= partner_radius
    return not np.any(bad & decidable)


def cf_distance(Y0, Y1, eps_floor=DEFAULT_EPS_FLOOR, resolution=None):
    """Chabauty-Fell distance, reported in ``[eps_floor, 1]``.

    Bisection over eps with step ``resolution`` (defaults to ``eps_floor``).
    Both truncations must be complete to radius ``1 / eps_floor``.
    """
    for Y in (Y0, Y1):
        if Y.valid_radius < 1.0 / eps_floor:
            raise InsufficientTruncation(
                f"valid radius {Y.valid_radius:g} < 1/eps_floor = {1.0 / eps_floor:g}")
    resolution = eps_floor if resolution is None else resolution
    n0, n1 = Y0.norms, Y1.norms
    nn01 = kernels.nn_distances(Y0.points, Y1.points) if len(Y0.points) else np.zeros(0)
    nn10 = kernels.nn_distances(Y1.points, Y0.points) if len(Y1.points) else np.zeros(0)

    def ok(eps):
        return _holds(eps, n0, nn01, Y1.valid_radius) and _holds(eps, n1, nn10, Y0.valid_radius)

    if ok(eps_floor):
        return float(eps_floor)
    lo, hi = eps_floor, 1.0
    if not ok(hi * (1 - 1e-15)):
        return 1.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def truncation_of(scheme, grid, window, radius):
    ms = generate(scheme, grid, window, Region.ball(np.zeros(scheme.d), radius))
    return Truncation(ms.points, radius), ms


def continuity_probe(scheme, window, grid, perturbations, radius=None, eps_floor=1e-2, resolution=None):
    """Distances ``d(Psi(g_k L), Psi(L))`` for a sequence of physical-space maps.

    ``perturbations`` holds ``(A, v)`` pairs with ``A`` in SL_d and ``v`` in
    R^d (``v`` may be None). Raises :class:`BoundaryHit` when an enumerated
    lift of the base grid projects within 1e-6 of the window boundary.
    """
    radius = 1.0 / eps_floor if radius is None else radius
    base, ms = truncation_of(scheme, grid, window, radius)
    wlo, whi = window.bounding_box()
    pad = 2 * BOUNDARY_TOL
    probe = generate(scheme, grid, _padded(window, pad), Region.ball(np.zeros(scheme.d), radius))
    y = probe.internal_coords()
    if len(y) and np.any(window.boundary_distance(y) < BOUNDARY_TOL):
        raise BoundaryHit("a lift projects onto the window boundary; Psi is not continuous here")
    out = []
    for A, v in perturbations:
        moved = apply_phys(scheme, grid, A, v)
        trunc, _ = truncation_of(scheme, moved, window, radius)
        out.append(cf_distance(trunc, base, eps_floor, resolution))
    return out


def _padded(window, pad):
    from .cutproject import Window

    lo, hi = window.bounding_box()
    return Window.box(lo - pad, hi + pad)


def triangle_violations(truncations, eps_floor=DEFAULT_EPS_FLOOR):
    """Log and return triples violating the triangle inequality (diagnostic only)."""
    k = len(truncations)
    D = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            D[i, j] = D[j, i] = cf_distance(truncations[i], truncations[j], eps_floor)
    bad = []
    for i in range(k):
        for j in range(k):
            for l in range(k):
                if D[i, l] > D[i, j] + D[j, l] + 1e-12:
                    bad.append((i, j, l, D[i, l], D[i, j] + D[j, l]))
                    log.info("triangle inequality violated on (%d, %d, %d): %.4g > %.4g", i, j, l,
                             D[i, l], D[i, j] + D[j, l])
    return bad
