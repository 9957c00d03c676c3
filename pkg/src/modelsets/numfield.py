"""Real number fields and Minkowski-embedded lattices of orders."""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ModelSetError, NonSquareFree
from .lattice import Grid

ROOT_RESIDUAL = 1e-10
ROOT_SEPARATION = 1e-8


def _has_repeated_roots(coeffs):
    from sympy import Poly, gcd, symbols

    x = symbols("x")
    p = Poly(list(reversed(coeffs)), x)
    return gcd(p, p.diff(x)).degree() > 0


def _polish(coeffs, z, steps=8):
    dp = P.polyder(coeffs)
    for _ in range(steps):
        fz = P.polyval(z, coeffs)
        dz = P.polyval(z, dp)
        if dz == 0:
            break
        step = fz / dz
        z = z - step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return z


def _roots(min_poly):
    coeffs = [int(c) for c in min_poly]
    if len(coeffs) < 2 or coeffs[-1] != 1:
        raise ModelSetError("min_poly must be monic of degree >= 1 (ascending coefficients)")
    if _has_repeated_roots(coeffs):
        raise NonSquareFree(f"polynomial {coeffs} has repeated roots")
    c = np.asarray(coeffs, dtype=np.float64)
    raw = P.polyroots(c)  # companion-matrix eigenvalues
    polished = np.array([_polish(c, complex(z)) for z in raw])
    scale = np.maximum(1.0, np.abs(polished))
    real_mask = np.abs(polished.imag) <= 1e-9 * scale
    reals = np.sort(np.array([_polish(c, z.real) for z in polished[real_mask]]))
    cplx = polished[~real_mask]
    cplx = cplx[cplx.imag > 0]
    cplx = cplx[np.lexsort((cplx.imag, cplx.real))]
    return reals, cplx


def real_embeddings(min_poly):
    """Real roots of a monic integer polynomial (ascending coefficients), sorted ascending."""
    reals, _ = _roots(min_poly)
    return [float(x) for x in reals]


@dataclass(frozen=True)
class NumberField:
    min_poly: tuple
    real_roots: tuple = field(init=False)
    complex_roots: tuple = field(init=False)

    def __post_init__(self):
        poly = tuple(int(c) for c in self.min_poly)
        object.__setattr__(self, "min_poly", poly)
        reals, cplx = _roots(poly)
        object.__setattr__(self, "real_roots", tuple(float(x) for x in reals))
        object.__setattr__(self, "complex_roots", tuple(complex(z) for z in cplx))
        self._check()

    @property
    def degree(self):
        return len(self.min_poly) - 1

    @property
    def signature(self):
        return len(self.real_roots), len(self.complex_roots)

    @property
    def totally_real(self):
        return not self.complex_roots

    def _check(self):
        r, s = self.signature
        if r + 2 * s != self.degree:
            raise ModelSetError(f"root count {r}+2*{s} does not match degree {self.degree}")
        c = np.asarray(self.min_poly, dtype=np.float64)
        roots = list(self.real_roots) + list(self.complex_roots)
        for z in roots:
            if abs(P.polyval(z, c)) >= ROOT_RESIDUAL * max(1.0, abs(z)) ** self.degree:
                raise ModelSetError(f"root {z} not polished")
        allr = np.array(roots + [z.conjugate() for z in self.complex_roots])
        if len(allr) > 1:
            gaps = np.abs(allr[:, None] - allr[None, :])[~np.eye(len(allr), dtype=bool)]
            if gaps.min() <= ROOT_SEPARATION:
                raise NonSquareFree("roots not separated")

    def embedding_roots(self):
        """Generator images in lattice coordinate order.

        Real embeddings come first, largest root first, so that for
        ``x^2 - 2`` the first embedding is the identity ``sqrt2 -> +sqrt2``.
        Complex embeddings follow, one per conjugate pair.
        """
        return list(reversed(self.real_roots)) + list(self.complex_roots)


def _parse_rational(x):
    return Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(10**12)


@dataclass(frozen=True)
class OrderBasis:
    """Integral basis of an order; ``basis[:, j]`` is the power-basis coordinate vector of element j."""

    field: NumberField
    basis: tuple

    def __post_init__(self):
        D = self.field.degree
        rows = tuple(tuple(_parse_rational(x) for x in row) for row in self.basis)
        if len(rows) != D or any(len(r) != D for r in rows):
            raise ModelSetError(f"order basis must be {D}x{D}")
        object.__setattr__(self, "basis", rows)
        self._check_closed()

    @classmethod
    def power_basis(cls, field):
        D = field.degree
        return cls(field, tuple(tuple(int(i == j) for j in range(D)) for i in range(D)))

    def matrix(self):
        return np.array([[float(x) for x in row] for row in self.basis])

    def _check_closed(self):
        from sympy import Matrix, Rational, rem, symbols, Poly

        D = self.field.degree
        M = Matrix(D, D, lambda i, j: Rational(self.basis[i][j].numerator, self.basis[i][j].denominator))
        if M.det() == 0:
            raise ModelSetError("order basis is singular")
        Minv = M.inv()
        x = symbols("x")
        f = Poly(list(reversed(self.field.min_poly)), x)
        elems = [Poly(list(reversed(list(M[:, j]))), x) for j in range(D)]
        for a in range(D):
            for b in range(a, D):
                prod = rem(elems[a] * elems[b], f)
                coeffs = list(reversed(prod.all_coeffs()))
                coeffs += [0] * (D - len(coeffs))
                coords = Minv * Matrix(coeffs[:D])
                if any(not c.is_integer for c in coords):
                    raise ModelSetError("order basis is not closed under multiplication")

    def embedding_matrix(self):
        """Rows: coordinates (sigma_1, ..., sigma_{r+s}); columns: basis elements.

        Complex embeddings contribute (sqrt2 Re, sqrt2 Im) row pairs.
        """
        roots = self.field.embedding_roots()
        B = self.matrix()
        D = self.field.degree
        rows = []
        for z in roots:
            powers = np.array([z**i for i in range(D)])
            vals = powers @ B
            if isinstance(z, complex) and abs(z.imag) > 0:
                rows.append(np.sqrt(2.0) * vals.real)
                rows.append(np.sqrt(2.0) * vals.imag)
            else:
                rows.append(np.real(vals))
        return np.array(rows, dtype=np.float64)


def minkowski_lattice(order, k=1, normalize=False):
    """Lattice ``c * {(sigma_1(x), ..., sigma_{r+s}(x)) : x in order^k}``.

    Coordinates are embedding-major: for each embedding block, the k copies
    in order (a complex block stores (Re, Im) per copy). With ``normalize``
    the dilation ``c`` makes the covolume 1, otherwise ``c = 1``.
    """
    if k < 1:
        raise ModelSetError("k must be positive")
    M = order.embedding_matrix()
    D = M.shape[0]
    roots = order.field.embedding_roots()
    # row blocks of M: each embedding owns 1 (real) or 2 (complex) rows
    blocks = []
    row = 0
    for z in roots:
        width = 2 if isinstance(z, complex) and abs(z.imag) > 0 else 1
        blocks.append(list(range(row, row + width)))
        row += width
    n = k * D
    B = np.zeros((n, n))
    out_row = 0
    for rows in blocks:
        for copy in range(k):
            for r in rows:
                B[out_row, copy * D:(copy + 1) * D] = M[r]
                out_row += 1
    c = 1.0
    if normalize:
        c = abs(np.linalg.det(B)) ** (-1.0 / n)
    return Grid(c * B, np.zeros(n))
