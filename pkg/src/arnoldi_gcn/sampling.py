"""Sample points for polynomial fitting of spectral filters.

Four schemes are supported: equispaced interior points, Chebyshev points,
and Gauss-Legendre / Gauss-Jacobi quadrature nodes.  The quadrature nodes
come from the Golub-Welsch construction: they are the eigenvalues of the
symmetric tridiagonal Jacobi matrix of the orthogonal polynomial family.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Scheme(str, enum.Enum):
    EQUISPACED = "equispaced"
    CHEBYSHEV = "chebyshev"
    LEGENDRE = "legendre"
    JACOBI = "jacobi"


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if not lo < hi:
            raise ValueError(f"interval needs lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.upper + self.lower)

    def contains(self, x, slack: float = 0.0) -> bool:
        return self.lower - slack <= x <= self.upper + slack

    def from_reference(self, t):
        """Affine map of points in [-1, 1] onto this interval."""
        return self.center + 0.5 * self.width * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    interval: Interval
    scheme: Scheme

    def __len__(self):
        return len(self.points)


def _check_count(r):
    if int(r) != r or r < 1:
        raise ValueError(f"sample count must be a positive integer, got {r!r}")
    return int(r)


def _as_interval(interval) -> Interval:
    if isinstance(interval, Interval):
        return interval
    lo, hi = interval
    return Interval(lo, hi)


def equispaced_nodes(interval, r: int) -> SampleSet:
    """``l + k (u - l) / (r + 1)`` for ``k = 1..r``; endpoints excluded."""
    r = _check_count(r)
    iv = _as_interval(interval)
    k = np.arange(1, r + 1, dtype=float)
    pts = iv.lower + k * (iv.width / (r + 1))
    return SampleSet(pts, iv, Scheme.EQUISPACED)


def chebyshev_nodes(interval, r: int) -> SampleSet:
    r = _check_count(r)
    iv = _as_interval(interval)
    k = np.arange(1, r + 1, dtype=float)
    t = np.cos((2 * k - 1) * np.pi / (2 * r))
    # cos(pi/2) comes out as 6e-17; pin the exact zero of odd-order sets
    if r % 2 == 1:
        t[r // 2] = 0.0
    return SampleSet(np.sort(iv.from_reference(t)), iv, Scheme.CHEBYSHEV)


# --------------------------------------------------------------------------
# symmetric tridiagonal eigenproblem


class _NoConvergence(RuntimeError):
    pass


def _implicit_ql(diagonal, offdiagonal, vectors=False, max_sweeps=None):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    Returns ``(values, vecs)`` with ``vecs`` None unless requested; values
    are unsorted.  Raises _NoConvergence past ``max_sweeps`` total sweeps.
    """
    d = np.array(diagonal, dtype=float)
    n = len(d)
    e = np.zeros(n)
    e[: n - 1] = offdiagonal
    z = np.eye(n) if vectors else None
    if max_sweeps is None:
        max_sweeps = 50 * max(n, 1)
    sweeps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise _NoConvergence(f"QL did not converge in {max_sweeps} sweeps")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if vectors:
                    zi = z[:, i].copy()
                    zi1 = z[:, i + 1]
                    z[:, i] = c * zi - s * zi1
                    z[:, i + 1] = s * zi + c * zi1
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def _sturm_count(d, e2, x):
    """Number of eigenvalues strictly less than ``x``."""
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = 1e-300
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def _bisection_eigenvalues(d, e):
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    n = len(d)
    ae = np.abs(e)
    radius = np.zeros(n)
    radius[:-1] += ae
    radius[1:] += ae
    lo0 = float(np.min(d - radius))
    hi0 = float(np.max(d + radius))
    scale = max(abs(lo0), abs(hi0), 1e-300)
    e2 = e * e
    out = np.empty(n)
    for k in range(n):
        lo, hi = lo0, hi0
        while hi - lo > 4e-16 * scale:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _sturm_count(d, e2, mid) > k:
                hi = mid
            else:
                lo = mid
        out[k] = 0.5 * (lo + hi)
    return out


def tridiag_eigenvalues(diagonal, offdiagonal) -> np.ndarray:
    """All eigenvalues of a symmetric tridiagonal matrix, ascending.

    Implicit QL is tried first; bisection on Sturm sequences takes over if
    QL exceeds ``50 n`` sweeps.
    """
    d = np.asarray(diagonal, dtype=float)
    e = np.asarray(offdiagonal, dtype=float)
    if d.ndim != 1 or e.ndim != 1 or len(e) != max(len(d) - 1, 0):
        raise ValueError(
            f"offdiagonal must have length len(diagonal) - 1, got {len(d)} and {len(e)}"
        )
    if len(d) == 0:
        return d.copy()
    try:
        vals, _ = _implicit_ql(d, e)
    except _NoConvergence:
        vals = _bisection_eigenvalues(d, e)
    return np.sort(vals)


# --------------------------------------------------------------------------
# Gauss quadrature


def _legendre_jacobi_matrix(r):
    k = np.arange(1, r, dtype=float)
    return np.zeros(r), k / np.sqrt(4 * k * k - 1), 2.0


def _jacobi_jacobi_matrix(r, a=0.0, b=1.0):
    """Recurrence matrix for the weight (1 - x)^a (1 + x)^b on [-1, 1].

    Only ``a = 0, b = 1`` is used; the general form keeps the formula honest.
    """
    n = np.arange(r, dtype=float)
    s = 2 * n + a + b
    diag = (b * b - a * a) / (s * (s + 2))
    k = np.arange(1, r, dtype=float)
    s = 2 * k + a + b
    off = np.sqrt(
        4 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1) * (s - 1))
    )
    mass = 2 ** (a + b + 1) * math.gamma(a + 1) * math.gamma(b + 1) / math.gamma(a + b + 2)
    return diag, off, mass


_JACOBI_MATRICES = {
    Scheme.LEGENDRE: _legendre_jacobi_matrix,
    Scheme.JACOBI: _jacobi_jacobi_matrix,
}


def gauss_rule(scheme, r: int):
    """Nodes and weights on [-1, 1] for the Legendre or Jacobi weight.

    Weights are the squared first eigenvector components times the weight's
    total mass.  Used by the quadrature self-checks only.
    """
    r = _check_count(r)
    diag, off, mass = _JACOBI_MATRICES[Scheme(scheme)](r)
    vals, vecs = _implicit_ql(diag, off, vectors=True)
    order = np.argsort(vals)
    return vals[order], mass * vecs[0, order] ** 2


def gauss_legendre_nodes(interval, r: int) -> SampleSet:
    r = _check_count(r)
    iv = _as_interval(interval)
    diag, off, _ = _legendre_jacobi_matrix(r)
    t = tridiag_eigenvalues(diag, off)
    return SampleSet(np.sort(iv.from_reference(t)), iv, Scheme.LEGENDRE)


def gauss_jacobi_nodes(interval, r: int) -> SampleSet:
    """Gauss nodes for the weight ``(1 + x)`` mapped onto ``interval``."""
    r = _check_count(r)
    iv = _as_interval(interval)
    diag, off, _ = _jacobi_jacobi_matrix(r)
    t = tridiag_eigenvalues(diag, off)
    return SampleSet(np.sort(iv.from_reference(t)), iv, Scheme.JACOBI)


_GENERATORS = {
    Scheme.EQUISPACED: equispaced_nodes,
    Scheme.CHEBYSHEV: chebyshev_nodes,
    Scheme.LEGENDRE: gauss_legendre_nodes,
    Scheme.JACOBI: gauss_jacobi_nodes,
}


def sample(scheme, interval, r: int) -> SampleSet:
    """Dispatch on scheme name (``"chebyshev"``) or :class:`Scheme` member."""
    return _GENERATORS[Scheme(scheme)](interval, r)
