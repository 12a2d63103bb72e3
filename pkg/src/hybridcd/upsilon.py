"""Scalar functions of the Upsilon-calculus and the optimal constants C(r).

``upsilon(x) = exp(x) - 1 - x`` replaces the square ``x**2 / 2`` of the
classical carre du champ calculus. The two-parameter family

    nu_{r,s}(w) = r * upsilon'(w) * w + upsilon(-w) - s * upsilon(w)

controls the dimension constants of complete and Ricci-flat graphs through

    C(r) = inf_w nu_{r,r-1}(w) / w**2 .
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "upsilon",
    "upsilon_prime",
    "nu",
    "nu_ratio",
    "RatioMinimizationResult",
    "golden_section",
    "c_of_r",
    "C_LOG_REPORTED",
]

#: Reported numerical value of the constant C_log; C(2) = 2 * C_log.
C_LOG_REPORTED = 0.795

_SEARCH_HALF_WIDTH = 50.0
_TAYLOR_CUTOFF = 1e-3
_TAYLOR_TERMS = 6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def upsilon(x):
    """Return ``exp(x) - 1 - x`` (nonnegative, overflows to ``inf``)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.expm1(x) - x
    return out if out.ndim else float(out)


def upsilon_prime(x):
    """Return ``exp(x) - 1``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.expm1(x)
    return out if out.ndim else float(out)


def nu(r, s, w):
    """Evaluate ``nu_{r,s}(w) = r*upsilon'(w)*w + upsilon(-w) - s*upsilon(w)``."""
    w = np.asarray(w, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = r * upsilon_prime(w) * w + upsilon(-w) - s * upsilon(w)
    return out if np.ndim(out) else float(out)


def _taylor_coefficients(r: float, terms: int = _TAYLOR_TERMS) -> np.ndarray:
    # coefficient of w**k in nu_{r,r-1}(w), k = 2 .. terms + 1
    ks = np.arange(2, terms + 2)
    fact_k = np.array([math.factorial(k) for k in ks], dtype=float)
    fact_km1 = np.array([math.factorial(k - 1) for k in ks], dtype=float)
    return r / fact_km1 + (-1.0) ** ks / fact_k - (r - 1.0) / fact_k


def nu_ratio(r: float, w):
    """Return ``nu_{r,r-1}(w) / w**2`` with its removable value ``1 + r/2`` at 0.

    A Taylor series of the numerator is used for ``|w| < 1e-3`` to avoid
    cancellation.
    """
    w = np.asarray(w, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    out = np.empty_like(w)
    small = np.abs(w) < _TAYLOR_CUTOFF
    if np.any(small):
        coef = _taylor_coefficients(r)
        # Horner in w for sum_k coef[k] * w**k
        acc = np.zeros(small.sum())
        ws = w[small]
        for c in coef[::-1]:
            acc = acc * ws + c
        out[small] = acc
    big = ~small
    if np.any(big):
        wb = w[big]
        out[big] = nu(r, r - 1.0, wb) / wb**2
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class RatioMinimizationResult:
    """Outcome of the bracketed minimisation of ``nu_{r,r-1}(w) / w**2``."""

    value: float
    argmin: float
    bracket: tuple[float, float]
    tolerance: float
    r: float = float("nan")
    evaluations: int = 0


def golden_section(f, a: float, b: float, tol: float = 1e-8, max_iter: int = 500):
    """Minimise a unimodal scalar function on ``[a, b]`` by golden-section search.

    Returns ``(x_best, f_best, n_evals)`` where ``f_best`` is the smallest value
    seen at any probe point.
    """
    if not b > a:
        raise ValueError("golden_section needs a < b")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    n = 2
    while (b - a) > tol and n < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
            x_new, f_new = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
            x_new, f_new = d, fd
        n += 1
        if f_new < best_f:
            best_x, best_f = x_new, f_new
    return best_x, best_f, n


def _coarse_grid(half_width: float, points_per_side: int = 400) -> np.ndarray:
    mags = np.geomspace(1e-4, half_width, points_per_side)
    return np.concatenate([-mags[::-1], [0.0], mags])


def c_of_r(r: float, tol: float = 1e-8) -> RatioMinimizationResult:
    """Estimate ``C(r) = inf_w nu_{r,r-1}(w) / w**2`` for ``r >= 0``.

    A log-spaced scan of ``[-50, 50]`` locates the basin; golden-section search
    between the neighbouring grid points refines the minimiser to ``tol``.
    """
    if not r >= 0:
        raise ValueError(f"C(r) is defined for r >= 0, got r={r!r}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    r = float(r)
    grid = _coarse_grid(_SEARCH_HALF_WIDTH)
    vals = nu_ratio(r, grid)
    i = int(np.nanargmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    x, fx, n = golden_section(lambda w: nu_ratio(r, w), lo, hi, tol=tol)
    if vals[i] < fx:
        x, fx = float(grid[i]), float(vals[i])
    return RatioMinimizationResult(
        value=float(fx),
        argmin=float(x),
        bracket=(float(lo), float(hi)),
        tolerance=tol,
        r=r,
        evaluations=n + grid.size,
    )
