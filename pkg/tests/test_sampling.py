import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_jacobi, eval_legendre

from arnoldi_gcn.sampling import (
    Interval,
    Scheme,
    chebyshev_nodes,
    equispaced_nodes,
    gauss_jacobi_nodes,
    gauss_legendre_nodes,
    gauss_rule,
    sample,
    tridiag_eigenvalues,
    _bisection_eigenvalues,
)


def test_equispaced_examples():
    assert np.allclose(equispaced_nodes((0, 2), 3).points, [0.5, 1.0, 1.5], atol=1e-15)
    assert equispaced_nodes((-1, 1), 1).points.tolist() == [0.0]
    pts = equispaced_nodes((-0.9, 0.9), 9).points
    assert np.allclose(pts, -0.72 + 0.18 * np.arange(9), atol=1e-15)


def test_chebyshev_examples():
    assert chebyshev_nodes((-1, 1), 1).points.tolist() == [0.0]
    h = math.sqrt(2) / 2
    assert np.allclose(chebyshev_nodes((-1, 1), 2).points, [-h, h], atol=1e-15)
    assert np.allclose(chebyshev_nodes((0, 2), 2).points, [1 - h, 1 + h], atol=1e-15)


@pytest.mark.parametrize("r", [1, 2, 7, 40, 64])
def test_closed_forms(r):
    lo, hi = -0.3, 1.7
    k = np.arange(1, r + 1)
    eq = lo + k * (hi - lo) / (r + 1)
    ch = np.sort((hi + lo) / 2 + (hi - lo) / 2 * np.cos((2 * k - 1) * np.pi / (2 * r)))
    assert np.max(np.abs(equispaced_nodes((lo, hi), r).points - eq)) <= 1e-15
    assert np.max(np.abs(chebyshev_nodes((lo, hi), r).points - ch)) <= 1e-15


def test_zero_count_rejected():
    for fn in (equispaced_nodes, chebyshev_nodes, gauss_legendre_nodes, gauss_jacobi_nodes):
        with pytest.raises(ValueError):
            fn((-1, 1), 0)


def test_bad_interval():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval(0.0, math.inf)


def test_tridiag_examples():
    assert np.allclose(tridiag_eigenvalues([3, 7], [0]), [3, 7], atol=1e-14)
    assert np.allclose(tridiag_eigenvalues([0, 0], [1]), [-1, 1], atol=1e-14)
    vals = tridiag_eigenvalues([0, 0, 0], [1 / math.sqrt(3), 2 / math.sqrt(15)])
    assert np.allclose(vals, [-math.sqrt(0.6), 0, math.sqrt(0.6)], atol=1e-14)
    # oracle: the values are roots of P3
    assert np.max(np.abs(eval_legendre(3, vals))) < 1e-13


def test_tridiag_length_mismatch():
    with pytest.raises(ValueError):
        tridiag_eigenvalues([1, 2, 3], [1])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_tridiag_matches_dense_eigensolver(n, seed):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(n)
    e = rng.standard_normal(n - 1)
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    ref = np.linalg.eigvalsh(T)
    scale = max(np.linalg.norm(T, 2), 1e-300)
    assert np.max(np.abs(tridiag_eigenvalues(d, e) - ref)) <= 1e-12 * scale
    assert np.max(np.abs(_bisection_eigenvalues(d, e) - ref)) <= 1e-12 * scale


def test_bisection_fallback_used_when_ql_capped(monkeypatch):
    import arnoldi_gcn.sampling as s

    real = s._implicit_ql
    monkeypatch.setattr(s, "_implicit_ql", lambda d, e, vectors=False: real(d, e, vectors, max_sweeps=0))
    vals = s.tridiag_eigenvalues([0, 0, 0], [1 / math.sqrt(3), 2 / math.sqrt(15)])
    assert np.allclose(vals, [-math.sqrt(0.6), 0, math.sqrt(0.6)], atol=1e-14)


def test_legendre_examples():
    assert np.allclose(gauss_legendre_nodes((-1, 1), 1).points, [0.0], atol=1e-15)
    pts = gauss_legendre_nodes((-1, 1), 2).points
    assert np.allclose(pts, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.max(np.abs((3 * pts**2 - 1) / 2)) < 1e-15
    mapped = gauss_legendre_nodes((1e-5, 2), 2).points
    assert np.allclose(mapped, 1.000005 + 0.999995 * np.array([-1, 1]) / math.sqrt(3), atol=1e-15)


def test_jacobi_examples():
    assert abs(gauss_jacobi_nodes((-1, 1), 1).points[0] - 1 / 3) < 1e-15
    pts = gauss_jacobi_nodes((-1, 1), 2).points
    assert len(set(pts)) == 2 and np.all(np.abs(pts) < 1)
    # scipy's P^(0,1)_2 is an independent evaluation of the degree-2 polynomial
    assert np.max(np.abs(eval_jacobi(2, 0, 1, pts))) < 1e-12
    assert abs(gauss_jacobi_nodes((-0.9, 0.9), 1).points[0] - 0.3) < 1e-15


@pytest.mark.parametrize("r", [3, 10, 25])
def test_jacobi_nodes_are_polynomial_roots(r):
    pts = gauss_jacobi_nodes((-1, 1), r).points
    scale = np.max(np.abs(eval_jacobi(r, 0, 1, np.linspace(-1, 1, 101))))
    assert np.max(np.abs(eval_jacobi(r, 0, 1, pts))) < 1e-10 * scale


@pytest.mark.parametrize("r", [2, 5, 10, 20])
def test_legendre_rule_integrates_monomials(r):
    x, w = gauss_rule(Scheme.LEGENDRE, r)
    for j in range(2 * r):
        exact = 0.0 if j % 2 else 2.0 / (j + 1)
        assert abs(np.sum(w * x**j) - exact) < 1e-10


@pytest.mark.parametrize("r", [1, 4, 9])
def test_jacobi_rule_integrates_weighted_monomials(r):
    x, w = gauss_rule(Scheme.JACOBI, r)
    for j in range(2 * r):
        # int_{-1}^{1} (1 + x) x^j dx
        exact = (1 - (-1) ** (j + 1)) / (j + 1) + (1 - (-1) ** (j + 2)) / (j + 2)
        assert abs(np.sum(w * x**j) - exact) < 1e-10


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("r", [1, 2, 5, 17, 40, 64])
def test_distinct_sorted_and_inside(scheme, r):
    iv = Interval(-0.9, 0.9)
    pts = sample(scheme, iv, r).points
    assert len(pts) == r
    assert np.all(pts >= iv.lower) and np.all(pts <= iv.upper)
    if r > 1:
        assert np.min(np.diff(pts)) > 1e-14 * iv.width


@pytest.mark.parametrize("scheme", [Scheme.EQUISPACED, Scheme.CHEBYSHEV, Scheme.LEGENDRE])
@pytest.mark.parametrize("r", [1, 4, 11, 40])
def test_symmetric_schemes_reflect(scheme, r):
    a = sample(scheme, (0.1, 1.3), r).points
    b = sample(scheme, (-1.3, -0.1), r).points
    assert np.max(np.abs(a + b[::-1])) <= 1e-14


def test_scheme_names():
    assert {s.value for s in Scheme} == {"equispaced", "chebyshev", "legendre", "jacobi"}
    assert sample("legendre", (-1, 1), 3).scheme is Scheme.LEGENDRE
