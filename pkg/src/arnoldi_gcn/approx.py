"""Polynomial fits of sampled filters.

Two routes are provided.  ``solve_vandermonde_qr`` solves the monomial
least-squares system directly and inherits the exponential conditioning of
the Vandermonde matrix.  ``arnoldi_fit`` orthonormalizes the Krylov basis
``1, w, w^2, ...`` over the samples instead (Vandermonde with Arnoldi), so the
least-squares problem it solves is well conditioned; the resulting
polynomial is evaluated by replaying the Hessenberg recurrence.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .sampling import Interval, SampleSet

MONOMIAL_TRUST_DEGREE = 15


class FitMethod(str, enum.Enum):
    VANDERMONDE_QR = "vandermonde"
    ARNOLDI = "arnoldi"


@dataclass(frozen=True)
class VandermondeMatrix:
    entries: np.ndarray
    samples: SampleSet
    degree: int


@dataclass(frozen=True)
class ArnoldiBasis:
    """Arnoldi basis over the samples.

    ``q_columns`` is r x (K+1) with columns of norm sqrt(r) (the first is all
    ones); ``h_table`` is the (K+2) x (K+1) Hessenberg matrix with
    ``diag(w) Q[:, m] = sum_l h[l, m] Q[:, l] + h[m+1, m] q_{m+1}``.  The last
    row holds the norm of the discarded residual column.
    """

    q_columns: np.ndarray
    h_table: np.ndarray
    samples: SampleSet
    requested_degree: int
    breakdown: Optional[int] = None

    @property
    def degree(self) -> int:
        return self.q_columns.shape[1] - 1

    @property
    def tridiagonal(self) -> np.ndarray:
        k1 = self.degree + 1
        return self.h_table[:k1, :k1]


@dataclass
class PolynomialApproximant:
    fit_method: FitMethod
    basis_coefficients: Optional[np.ndarray] = None
    monomial_coefficients: Optional[np.ndarray] = None
    basis: Optional[ArnoldiBasis] = None
    filter_name: str = ""
    monomial_trusted: bool = True
    degenerate: bool = False
    residual: float = 0.0

    def __post_init__(self):
        if self.basis_coefficients is None and self.monomial_coefficients is None:
            raise ValueError("approximant needs basis or monomial coefficients")
        if self.fit_method is FitMethod.ARNOLDI and self.basis is None:
            raise ValueError("Arnoldi approximant requires its basis")

    @property
    def degree(self) -> int:
        c = self.basis_coefficients if self.basis_coefficients is not None else self.monomial_coefficients
        return len(c) - 1


@dataclass(frozen=True)
class ConditionReport:
    matrix_label: str
    condition_number: float
    theoretical_lower_bound: Optional[float] = None


def _points(samples):
    return samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)


# ---------------------------------------------------------------- Vandermonde


def build_vandermonde(samples: SampleSet, degree: int) -> VandermondeMatrix:
    w = _points(samples)
    r = len(w)
    if degree < 0 or degree > r:
        raise ValueError(f"degree {degree} needs 0 <= K <= r = {r}")
    V = np.empty((r, degree + 1))
    V[:, 0] = 1.0
    for j in range(1, degree + 1):
        V[:, j] = V[:, j - 1] * w
    return VandermondeMatrix(V, samples, degree)


def solve_vandermonde_qr(V: VandermondeMatrix, g_values, filter_name: str = "") -> PolynomialApproximant:
    """Monomial coefficients from Householder QR of V.

    A square or tall V is solved in the least-squares sense; when K = r the
    system is underdetermined and the minimum-norm solution is taken from the
    QR factorization of V^T.
    """
    A = V.entries
    g = np.asarray(g_values, dtype=float)
    r, k1 = A.shape
    if g.shape != (r,):
        raise ValueError(f"expected {r} filter values, got {g.shape}")
    if k1 <= r:
        Qv, Rv = np.linalg.qr(A)
        degenerate = bool(np.any(np.abs(np.diag(Rv)) < 1e-300))
        rhs = Qv.T @ g
        if degenerate:
            c = np.linalg.lstsq(Rv, rhs, rcond=None)[0]
        else:
            with np.errstate(all="ignore"):
                c = solve_triangular(Rv, rhs, check_finite=False)
    else:
        Qt, Rt = np.linalg.qr(A.T)
        degenerate = bool(np.any(np.abs(np.diag(Rt)) < 1e-300))
        if degenerate:
            y = np.linalg.lstsq(Rt.T, g, rcond=None)[0]
        else:
            with np.errstate(all="ignore"):
                y = solve_triangular(Rt, g, trans="T", check_finite=False)
        c = Qt @ y
    with np.errstate(all="ignore"):
        res = float(np.linalg.norm(A @ c - g))
    return PolynomialApproximant(
        fit_method=FitMethod.VANDERMONDE_QR,
        monomial_coefficients=c,
        filter_name=filter_name,
        degenerate=degenerate,
        residual=res,
    )


# --------------------------------------------------------------------- Arnoldi


def arnoldi_basis(samples: SampleSet, degree: int, reorthogonalize: bool = True) -> ArnoldiBasis:
    """Orthogonalize ``1, w, w^2, ..., w^K`` over the samples.

    Projections are divided by r (the squared column norm) so that columns
    stay orthogonal at norm sqrt(r).  If the next column collapses (K >= r),
    the basis is truncated there and ``breakdown`` records the index.
    """
    w = _points(samples)
    r = len(w)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    tol = 1e-14 * max(1.0, float(np.max(np.abs(w))) if r else 1.0)
    Q = np.zeros((r, degree + 1))
    H = np.zeros((degree + 2, degree + 1))
    Q[:, 0] = 1.0
    passes = 2 if reorthogonalize else 1
    breakdown = None
    for m in range(degree + 1):
        q = w * Q[:, m]
        for _ in range(passes):
            for l in range(m + 1):
                h = Q[:, l] @ q / r
                H[l, m] += h
                q = q - h * Q[:, l]
        H[m + 1, m] = np.linalg.norm(q) / math.sqrt(r)
        if m == degree:
            break
        if H[m + 1, m] < tol:
            breakdown = m + 1
            Q = Q[:, : m + 1]
            H = H[: m + 2, : m + 1]
            break
        Q[:, m + 1] = q / H[m + 1, m]
    return ArnoldiBasis(Q, H, samples, degree, breakdown)


def _lstsq_qr(A, b):
    Qa, Ra = np.linalg.qr(A)
    return solve_triangular(Ra, Qa.T @ b, check_finite=False)


def monomial_from_basis(basis: ArnoldiBasis, basis_coefficients) -> np.ndarray:
    """Convert basis coefficients d to monomial coefficients c with R c = d."""
    R = krylov_r_matrix(basis)
    return solve_triangular(R, np.asarray(basis_coefficients, dtype=float), check_finite=False)


def krylov_r_matrix(basis: ArnoldiBasis, ncols: Optional[int] = None) -> np.ndarray:
    """``[e1, T e1, ..., T^K e1]`` from the Hessenberg table.

    ``ncols`` may exceed the basis size after a breakdown; the extra columns
    keep applying T, which is exact once the Krylov space is invariant.
    """
    T = basis.tridiagonal
    k1 = T.shape[0]
    ncols = k1 if ncols is None else ncols
    R = np.zeros((k1, ncols))
    col = np.zeros(k1)
    col[0] = 1.0
    R[:, 0] = col
    for j in range(1, ncols):
        col = T @ col
        R[:, j] = col
    return R


def arnoldi_fit(samples: SampleSet, g_values, degree: int, filter_name: str = "",
                emit_monomial: bool = False) -> PolynomialApproximant:
    g = np.asarray(g_values, dtype=float)
    w = _points(samples)
    if g.shape != w.shape:
        raise ValueError(f"expected {len(w)} filter values, got {g.shape}")
    if len(np.unique(w)) != len(w):
        raise ValueError("samples must be pairwise distinct")
    basis = arnoldi_basis(samples, degree)
    d = _lstsq_qr(basis.q_columns, g)
    res = float(np.linalg.norm(basis.q_columns @ d - g))
    mono = monomial_from_basis(basis, d) if emit_monomial else None
    return PolynomialApproximant(
        fit_method=FitMethod.ARNOLDI,
        basis_coefficients=d,
        monomial_coefficients=mono,
        basis=basis,
        filter_name=filter_name,
        monomial_trusted=basis.degree <= MONOMIAL_TRUST_DEGREE,
        residual=res,
    )


def basis_columns(basis: ArnoldiBasis, points) -> np.ndarray:
    """Basis polynomials at ``points`` by replaying the recurrence; len(points) x (K+1)."""
    x = np.asarray(points, dtype=float)
    H = basis.h_table
    k1 = basis.degree + 1
    W = np.empty((x.size, k1))
    W[:, 0] = 1.0
    for m in range(k1 - 1):
        v = x * W[:, m]
        for l in range(m + 1):
            v = v - H[l, m] * W[:, l]
        W[:, m + 1] = v / H[m + 1, m]
    return W


def evaluate_approximant(approx: PolynomialApproximant, points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation points must be finite")
    if approx.basis is not None and approx.basis_coefficients is not None:
        return basis_columns(approx.basis, x.ravel()) @ approx.basis_coefficients
    c = approx.monomial_coefficients
    out = np.zeros_like(x.ravel())
    for ck in c[::-1]:
        out = out * x.ravel() + ck
    return out


# ---------------------------------------------------------------- conditioning


def jacobi_singular_values(matrix, tol: float = 1e-15, max_sweeps: int = 80) -> np.ndarray:
    """Singular values (descending) by one-sided Jacobi rotations."""
    A = np.array(matrix, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("need a nonempty 2-d matrix")
    if A.shape[0] < A.shape[1]:
        A = A.T.copy()
    n = A.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = A[:, p]
                aq = A[:, q]
                alpha = ap @ ap
                beta = aq @ aq
                gamma = ap @ aq
                if alpha == 0.0 or beta == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                A[:, p], A[:, q] = c * ap - s * aq, s * ap + c * aq
        if not rotated:
            break
    return np.sort(np.linalg.norm(A, axis=0))[::-1]


def condition_number(matrix, label: str = "", lower_bound: Optional[float] = None) -> ConditionReport:
    """2-norm condition number; infinite when the smallest singular value underflows."""
    sv = jacobi_singular_values(matrix)
    smax, smin = sv[0], sv[-1]
    if smin < 1e-300:
        kappa = math.inf
    else:
        kappa = max(1.0, float(smax / smin))
    return ConditionReport(label, kappa, lower_bound)


def vandermonde_kappa_bound(r: int, interval: Interval) -> Optional[float]:
    """Lower bound on kappa(V) for r samples in ``interval``.

    ``2^(r-1) / a^r`` when the samples sit in [-a, a] with a < 1, and
    ``2^(r-2)`` when they sit in (0, 2].  None for other intervals.
    """
    lo, hi = interval.lower, interval.upper
    if lo > 0.0 and hi <= 2.0:
        return 2.0 ** (r - 2)
    a = max(abs(lo), abs(hi))
    if a < 1.0:
        return 2.0 ** (r - 1) * (1.0 / a) ** r
    return None


def verify_qr_equivalence(basis: ArnoldiBasis, V: VandermondeMatrix) -> float:
    """Relative Frobenius residual of ``V / sqrt(r) = (Q / sqrt(r)) R``."""
    r, ncols = V.entries.shape
    if basis.q_columns.shape[0] != r or basis.requested_degree != V.degree:
        raise ValueError(f"shape mismatch: V {V.entries.shape} vs Q {basis.q_columns.shape}")
    scale = math.sqrt(r)
    Vs = V.entries / scale
    R = krylov_r_matrix(basis, ncols)
    diff = Vs - (basis.q_columns / scale) @ R
    return float(np.linalg.norm(diff) / np.linalg.norm(Vs))


def basis_orthonormality_condition(basis: ArnoldiBasis) -> ConditionReport:
    Qn = basis.q_columns / math.sqrt(basis.q_columns.shape[0])
    rep = condition_number(Qn.T @ Qn, label="arnoldi_gram")
    return ConditionReport(rep.matrix_label, rep.condition_number, 1.0)


def max_grid_error(approx: PolynomialApproximant, fn, interval: Interval, n: int = 1000) -> float:
    x = np.linspace(interval.lower, interval.upper, n)
    with np.errstate(all="ignore"):
        err = np.abs(evaluate_approximant(approx, x) - fn(x))
    return float(np.max(err)) if np.all(np.isfinite(err)) else math.inf
