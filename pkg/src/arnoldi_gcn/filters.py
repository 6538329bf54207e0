"""Explicit spectral filter functions.

``g0``-``g3`` are random-walk style filters on the normalized adjacency
spectrum; ``g4``-``g7`` are Gaussian low/high/band-pass shapes on the
Laplacian spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .sampling import Interval, SampleSet

SIMPLE_DOMAIN = Interval(-0.9, 0.9)
COMPLEX_DOMAIN = Interval(1e-5, 2.0)
DEFAULT_ALPHA = 0.1

# where each family is finite; the oracle checks eigenvalues against these
_SIMPLE_VALID = (-1.0, 1.0, False)  # open interval
_COMPLEX_VALID = (0.0, 2.0, True)  # entire functions, closed on the spectrum of L~


class FilterDomainError(ValueError):
    def __init__(self, index, value, domain):
        self.index = index
        self.value = value
        super().__init__(
            f"point {index} ({value!r}) lies outside the filter domain "
            f"[{domain.lower}, {domain.upper}]"
        )


@dataclass(frozen=True)
class FilterSpec:
    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    domain: Interval
    alpha: Optional[float] = None
    # (lower, upper, closed) bounds on which ``evaluate`` is finite
    valid: tuple = field(default=None, compare=False)

    @property
    def family(self) -> str:
        """``"simple"`` for normalized-adjacency filters, else ``"complex"``."""
        return "simple" if self.domain.lower < 0 else "complex"

    def __call__(self, omega):
        return self.evaluate(np.asarray(omega, dtype=float))


def _g0(alpha):
    return lambda w: (1.0 - alpha) / (1.0 - w)


def _g1(w):
    return 1.0 / (1.0 - w)


def _g2(w):
    return w / (1.0 - w)


def _g3(w):
    return w * w / (1.0 - w)


def _g4(w):
    return np.exp(-10.0 * w * w)


def _g5(w):
    return 1.0 - np.exp(-10.0 * w * w)


def _g6(w):
    return np.exp(-10.0 * (w - 1.0) ** 2)


def _g7(w):
    return 1.0 - np.exp(-10.0 * (w - 1.0) ** 2)


_BUILTINS = {
    "g1": _g1,
    "g2": _g2,
    "g3": _g3,
    "g4": _g4,
    "g5": _g5,
    "g6": _g6,
    "g7": _g7,
}

FILTER_LABELS = {
    "g0": "scaled random walk",
    "g1": "random walk",
    "g2": "self-depressed random walk",
    "g3": "neighbor-depressed random walk",
    "g4": "low pass",
    "g5": "high pass",
    "g6": "band pass",
    "g7": "band rejection",
}

BUILTIN_NAMES = tuple(sorted(FILTER_LABELS))


def builtin_filter(name: str, alpha: Optional[float] = None) -> FilterSpec:
    """Look up one of the eight built-in filters.

    ``alpha`` only applies to ``g0`` (default 0.1) and must lie in (0, 1).
    """
    if name not in FILTER_LABELS:
        raise ValueError(f"unknown filter {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")
    if name == "g0":
        if alpha is None:
            alpha = DEFAULT_ALPHA
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        fn = _g0(alpha)
    else:
        if alpha is not None:
            raise ValueError(f"filter {name} takes no alpha parameter")
        fn = _BUILTINS[name]
    simple = name in ("g0", "g1", "g2", "g3")
    return FilterSpec(
        name=name,
        evaluate=fn,
        domain=SIMPLE_DOMAIN if simple else COMPLEX_DOMAIN,
        alpha=alpha,
        valid=_SIMPLE_VALID if simple else _COMPLEX_VALID,
    )


def custom_filter(name: str, fn: Callable, domain) -> FilterSpec:
    """Wrap a user callable; ``fn`` must accept numpy arrays."""
    if not isinstance(domain, Interval):
        domain = Interval(*domain)
    return FilterSpec(name=name, evaluate=fn, domain=domain,
                      valid=(domain.lower, domain.upper, True))


def eval_filter(spec: FilterSpec, points) -> np.ndarray:
    """Evaluate ``spec`` pointwise; every point must lie in ``spec.domain``."""
    if isinstance(points, SampleSet):
        points = points.points
    pts = np.asarray(points, dtype=float).ravel()
    bad = np.flatnonzero((pts < spec.domain.lower) | (pts > spec.domain.upper) | ~np.isfinite(pts))
    if bad.size:
        i = int(bad[0])
        raise FilterDomainError(i, float(pts[i]), spec.domain)
    return np.asarray(spec.evaluate(pts), dtype=float)


def in_valid_range(spec: FilterSpec, values, slack: float = 0.0):
    """Boolean mask of values on which ``spec`` is finite (with ``slack``)."""
    lo, hi, closed = spec.valid or (spec.domain.lower, spec.domain.upper, True)
    v = np.asarray(values, dtype=float)
    if closed:
        return (v >= lo - slack) & (v <= hi + slack)
    return (v > lo) & (v < hi)
