"""Seeded horospherical sampling of grids and Siegel-Veech moment estimators.

Each sample ``i`` draws from its own Philox stream keyed by ``(seed, i)``,
so results do not depend on how samples are scheduled across threads.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cutproject import density
from .lattice import DEFAULT_CAP, Grid, covolume
from .transforms import grid_transform, lift

CSV_COLUMNS = ("run_id", "t", "count", "mean", "stderr", "reference", "z_score")


@dataclass(frozen=True)
class SamplerSpec:
    d: int
    t: float = 0.0
    sample_count: int = 1
    seed: int = 0
    torus_randomize: bool = False
    omega_lo: tuple = None
    omega_hi: tuple = None

    def __post_init__(self):
        k = self.d * (self.d - 1) // 2
        lo = (0.0,) * k if self.omega_lo is None else tuple(float(x) for x in self.omega_lo)
        hi = (1.0,) * k if self.omega_hi is None else tuple(float(x) for x in self.omega_hi)
        if len(lo) != k or len(hi) != k:
            raise ValueError(f"omega needs {k} coordinates for d = {self.d}")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("omega must be nonempty")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.t < 0:
            raise ValueError("flow time must be nonnegative")
        object.__setattr__(self, "omega_lo", lo)
        object.__setattr__(self, "omega_hi", hi)


@dataclass
class EstimatorResult:
    mean: float
    stderr: float
    count: int
    reference: float = float("nan")
    values: np.ndarray = field(default=None, repr=False)

    @property
    def z_score(self):
        if self.stderr == 0:
            return 0.0 if self.mean == self.reference else math.copysign(math.inf, self.mean - self.reference)
        return (self.mean - self.reference) / self.stderr


def sample_rng(seed, index):
    """Counter-based generator for sample ``index`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def diagonal_flow(d, t):
    """``diag(e^{a_1 t}, ..., e^{a_d t})`` with exponents evenly spaced from 1/2 to -1/2."""
    if d == 1:
        return np.eye(1)
    a = np.linspace(0.5, -0.5, d)
    return np.diag(np.exp(a * t))


def flow_stretch(d, t):
    """Largest expansion factor of ``g_t``: the physical scale the sampler probes."""
    return 1.0 if d == 1 else math.exp(0.5 * t)


def default_flow_time(support_radius, cap=DEFAULT_CAP):
    """Largest ``t`` with ``e^t * support_radius <= cap`` (0 when none)."""
    if support_radius <= 0:
        return 0.0
    return max(0.0, math.log(cap / support_radius))


def unipotent(d, params):
    """Upper unitriangular matrix filled row by row from ``params``."""
    U = np.eye(d)
    U[np.triu_indices(d, 1)] = params
    return U


def _sample_one(base, spec, scheme_phys, index):
    rng = sample_rng(spec.seed, index)
    n, d = base.n, spec.d
    k = d * (d - 1) // 2
    params = np.asarray(spec.omega_lo) + (np.asarray(spec.omega_hi) - np.asarray(spec.omega_lo)) * rng.random(k)
    g = diagonal_flow(d, spec.t) @ unipotent(d, params)
    E = np.eye(n)
    idx = np.asarray(scheme_phys)
    E[np.ix_(idx, idx)] = g
    basis = E @ base.basis
    translation = E @ base.translation
    if spec.torus_randomize:
        xi = rng.random(n)
        translation = translation + basis @ xi
    return Grid(basis, translation)


def horosphere_sample(base, spec, phys=None, threads=1):
    """Grids ``g_t u_s base`` (plus a uniform torus translate when requested)."""
    phys = tuple(range(spec.d)) if phys is None else tuple(phys)
    idx = range(spec.sample_count)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda i: _sample_one(base, spec, phys, i), idx))
    return [_sample_one(base, spec, phys, i) for i in idx]


def _transform_values(f, window, scheme, grids, mode, cap, threads):
    F = lift(f, window, scheme)
    work = lambda g: grid_transform(F, g, mode, cap)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return np.array(list(pool.map(work, grids)))
    return np.array([work(g) for g in grids])


def reference_mean(f, window, scheme, base):
    """``D * integral(f)`` with ``D = vol(W) / covol``."""
    if f.integral() == 0:
        return 0.0
    return density(scheme, base, window) * f.integral()


def _summary(values, reference):
    count = len(values)
    mean = float(math.fsum(values) / count)
    sd = float(np.std(values, ddof=1)) if count > 1 else 0.0
    return EstimatorResult(mean, sd / math.sqrt(count), count, reference, values)


def estimate_mean_sv(f, window, scheme, base, spec, mode="affine", cap=DEFAULT_CAP, threads=1):
    """Monte-Carlo mean of the transform over sampled grids, with the reference ``D * int f``."""
    grids = horosphere_sample(base, spec, scheme.phys, threads)
    values = _transform_values(f, window, scheme, grids, mode, cap, threads)
    return _summary(values, reference_mean(f, window, scheme, base))


@dataclass
class SecondMoment:
    second_moment: float
    variance: float
    mean: float
    reference: float
    rogers_ratio: float
    relative_excess: float
    count: int


def estimate_second_moment(f, window, scheme, base, spec, mode="affine", cap=DEFAULT_CAP, threads=1):
    """Second moment and variance of the transform; ``rogers_ratio = variance / int f``.

    ``relative_excess = (E[f^2] - ref^2) / ref^2`` with ``ref = D * int f``.
    """
    grids = horosphere_sample(base, spec, scheme.phys, threads)
    values = _transform_values(f, window, scheme, grids, mode, cap, threads)
    ref = reference_mean(f, window, scheme, base)
    count = len(values)
    second = float(math.fsum(values * values) / count)
    mean = float(math.fsum(values) / count)
    var = float(np.var(values, ddof=1)) if count > 1 else 0.0
    integral = f.integral()
    ratio = var / integral if integral > 0 else 0.0
    excess = (second - ref * ref) / (ref * ref) if ref > 0 else 0.0
    return SecondMoment(second, var, mean, ref, ratio, excess, count)


def birkhoff_average(f, window, scheme, base, t_grid, mode="affine", cap=DEFAULT_CAP):
    """Running averages of the transform along the orbit sampled at ``t_grid``.

    For d >= 2 the orbit is the diagonal flow ``g_t``; for d = 1, where SL_1
    is trivial, it is the translation flow ``x -> x - t``.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    F = lift(f, window, scheme)
    d, n = scheme.d, scheme.n
    idx = np.asarray(scheme.phys)
    values = []
    for t in t_grid:
        if d == 1:
            shift = np.zeros(n)
            shift[idx] = -t
            g = Grid(base.basis, base.translation + shift)
        else:
            E = np.eye(n)
            E[np.ix_(idx, idx)] = diagonal_flow(d, t)
            g = Grid(E @ base.basis, E @ base.translation)
        values.append(grid_transform(F, g, mode, cap))
    values = np.asarray(values)
    return np.cumsum(values) / np.arange(1, len(values) + 1)


def covolume_drift(grids, base):
    """Largest ``|covol(g) / covol(base) - 1|`` across sampled grids."""
    c0 = covolume(base)
    return max(abs(covolume(g) / c0 - 1.0) for g in grids)


def write_estimates_csv(rows, fh):
    """Rows are ``(run_id, t, EstimatorResult)``; numbers printed with repr precision."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for run_id, t, res in rows:
        w.writerow([run_id, repr(float(t)), res.count, repr(res.mean), repr(res.stderr),
                    repr(float(res.reference)), repr(float(res.z_score))])
