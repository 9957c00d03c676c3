"""Siegel-Veech transforms over point sets and grids, and the lift to R^n."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteSupport, ModelSetError
from .lattice import BALL_TOL, DEFAULT_CAP, Region, enumerate_lattice, unit_ball_volume

MODES = ("linear", "affine")
ZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Compactly supported test function on R^d with a closed-form integral.

    Kinds: ``ball`` (indicator of a closed ball), ``box`` (indicator of a
    half-open box), ``tent`` (product of 1-d tents ``max(0, 1 - |x_i - c_i| / h)``),
    ``zero``.
    """

    __test__ = False  # not a pytest class

    kind: str
    dim: int
    center: np.ndarray = None
    radius: float = 0.0
    lo: np.ndarray = None
    hi: np.ndarray = None
    scale: float = 1.0

    @classmethod
    def ball(cls, radius, center=None, dim=None):
        center = np.zeros(dim or 1) if center is None else np.atleast_1d(np.asarray(center, dtype=np.float64))
        return cls("ball", len(center), center=center, radius=float(radius))

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        return cls("box", len(lo), lo=lo, hi=hi)

    @classmethod
    def tent(cls, half_width, center=None, dim=None, scale=1.0):
        center = np.zeros(dim or 1) if center is None else np.atleast_1d(np.asarray(center, dtype=np.float64))
        return cls("tent", len(center), center=center, radius=float(half_width), scale=float(scale))

    @classmethod
    def zero(cls, dim):
        return cls("zero", dim, center=np.zeros(dim))

    @classmethod
    def from_json(cls, spec, dim):
        kind = spec["kind"]
        if kind == "ball":
            return cls.ball(spec["radius"], spec.get("center"), dim)
        if kind == "box":
            return cls.box(spec["lo"], spec["hi"])
        if kind == "tent":
            return cls.tent(spec["half_width"], spec.get("center"), dim, spec.get("scale", 1.0))
        if kind == "zero":
            return cls.zero(dim)
        raise ModelSetError(f"unknown test function kind {kind!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        if self.kind == "ball":
            return (np.sqrt(np.sum((x - self.center) ** 2, axis=1)) <= self.radius + BALL_TOL).astype(np.float64)
        if self.kind == "box":
            return np.all((x >= self.lo) & (x < self.hi), axis=1).astype(np.float64)
        if self.kind == "tent":
            t = np.clip(1.0 - np.abs(x - self.center) / self.radius, 0.0, None)
            return self.scale * np.prod(t, axis=1)
        return np.zeros(x.shape[0])

    def integral(self):
        if self.kind == "ball":
            return unit_ball_volume(self.dim) * self.radius**self.dim
        if self.kind == "box":
            return float(np.prod(np.maximum(self.hi - self.lo, 0.0)))
        if self.kind == "tent":
            return self.scale * self.radius**self.dim
        return 0.0

    def support(self):
        """Physical region containing the support (None for the zero function)."""
        if self.kind == "zero":
            return None
        if self.kind == "ball":
            return Region.ball(self.center, self.radius)
        if self.kind == "box":
            return Region.box(self.lo, self.hi)
        return Region.box(self.center - self.radius, self.center + self.radius)

    def is_indicator(self):
        return self.kind in ("ball", "box", "zero")


@dataclass(frozen=True, eq=False)
class FunctionSum:
    """Finite linear combination ``sum c_i f_i`` of test functions."""

    terms: tuple

    @property
    def dim(self):
        return self.terms[0][1].dim

    def __call__(self, x):
        return sum(c * f(x) for c, f in self.terms)

    def integral(self):
        return sum(c * f.integral() for c, f in self.terms)

    def support(self):
        los, his = [], []
        for _, f in self.terms:
            s = f.support()
            if s is not None:
                lo, hi = s.bounding_box()
                los.append(lo)
                his.append(hi)
        if not los:
            return None
        return Region.box(np.min(los, axis=0), np.max(his, axis=0))


def _check_mode(mode):
    if mode not in MODES:
        raise ModelSetError(f"mode must be one of {MODES}")


def _support_covered(f, valid_region):
    supp = f.support()
    if supp is None or valid_region is None:
        return True
    lo, hi = supp.bounding_box()
    if supp.kind == "ball":
        if valid_region.kind == "ball":
            gap = np.linalg.norm(supp.center - valid_region.center) + supp.radius
            return gap <= valid_region.radius + BALL_TOL
        return valid_region.contains_box(lo, hi) or bool(
            np.all(lo >= valid_region.lo) and np.all(supp.center + supp.radius < valid_region.hi))
    if valid_region.kind == "box":
        return bool(np.all(lo >= valid_region.lo) and np.all(hi <= valid_region.hi))
    return valid_region.contains_box(lo, hi)


def _points_and_region(ps, valid_region):
    if hasattr(ps, "points") and hasattr(ps, "region"):
        return np.asarray(ps.points), (ps.region if valid_region is None else valid_region)
    return np.asarray(ps, dtype=np.float64), valid_region


def sv_transform(f, ps, mode="affine", valid_region=None):
    """Sum of ``f`` over the point set (omitting the origin in linear mode).

    ``ps`` is a :class:`~modelsets.cutproject.ModelSet` (its region is the
    region of completeness) or a raw ``(N, d)`` array with ``valid_region``.
    """
    _check_mode(mode)
    pts, region = _points_and_region(ps, valid_region)
    if not _support_covered(f, region):
        raise IncompleteSupport("support of f exceeds the region where the point set is complete")
    if pts.size == 0:
        return 0.0
    pts = pts.reshape(len(pts), -1)
    if mode == "linear":
        pts = pts[np.any(np.abs(pts) > ZERO_TOL, axis=1)]
    vals = f(pts)
    return float(math.fsum(vals))


def sv_transform_p(f_list, ps, p=None, mode="affine", valid_region=None):
    """Transform of the product function ``f(v_1..v_p) = prod f_i(v_i)`` over p-tuples.

    Summing over independent tuples factorises, so this is the product of
    the single transforms.
    """
    p = len(f_list) if p is None else p
    if len(f_list) != p:
        raise ModelSetError("need exactly p factor functions")
    out = 1.0
    for f in f_list:
        out *= sv_transform(f, ps, mode, valid_region)
    return out


@dataclass(frozen=True, eq=False)
class LiftedFunction:
    """``F(x) = 1_W(pi_int x) * f(pi_phys x)`` on R^n."""

    f: object
    window: object
    scheme: object

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.scheme.n)
        inside = self.window.contains(self.scheme.pi_int(x)) if self.scheme.m else np.ones(len(x), bool)
        out = np.zeros(len(x))
        if np.any(inside):
            out[inside] = self.f(self.scheme.pi_phys(x[inside]))
        return out

    def integral(self):
        return self.window.volume() * self.f.integral()

    def support_region(self):
        """Region in R^n containing supp F, or None when F vanishes."""
        supp = self.f.support()
        if supp is None or self.window.is_empty():
            return None
        wlo, whi = self.window.bounding_box()
        if np.any(whi <= wlo):
            return None
        return Region.product(supp, self.scheme.phys, wlo, whi)


def lift(f, window, scheme):
    return LiftedFunction(f, window, scheme)


def grid_transform(F, grid, mode="affine", cap=DEFAULT_CAP):
    """Sum of ``F`` over grid points (omitting the zero vector in linear mode)."""
    _check_mode(mode)
    region = F.support_region()
    if region is None:
        return 0.0
    pts, coeffs = enumerate_lattice(grid, region, cap)
    if len(pts) == 0:
        return 0.0
    if mode == "linear":
        pts = pts[np.any(np.abs(pts) > ZERO_TOL, axis=1)]
    return float(math.fsum(F(pts)))
