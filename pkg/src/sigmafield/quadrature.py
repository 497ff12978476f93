"""Adaptive quadrature and truncation sweeps for improper integrals.

Bounded-interval integrals go through QUADPACK (scipy.integrate.quad);
unbounded integrals are only ever handled by explicit truncation sweeps
that double the cutoff until a Cauchy criterion is met or a hard cap is
reached.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import QuadratureError

SWEEP_CAP = float(2 ** 20)


@dataclass(frozen=True)
class QuadratureConfig:
    """Per-interval adaptive quadrature settings.

    rel_tol / abs_tol feed QUADPACK's epsrel / epsabs; max_panels bounds
    the number of subinterval bisections.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_panels: int = 200


DEFAULT_QUADRATURE = QuadratureConfig()


def integrate_interval(fn: Callable[[float], float], a: float, b: float,
                       cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Integrate fn over [a, b] adaptively.

    Raises QuadratureError if the result is not finite.
    """
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _err = integrate.quad(fn, a, b, epsabs=cfg.abs_tol,
                                   epsrel=cfg.rel_tol, limit=cfg.max_panels)
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite quadrature result on [{a}, {b}]")
    return val


def integrate_interval_cos(fn: Callable[[float], float], a: float, b: float,
                           omega: float,
                           cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Integrate fn(u) * cos(omega * u) over [a, b].

    Uses QUADPACK's oscillatory rule so the panel width may cover many
    oscillation periods.
    """
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _err = integrate.quad(fn, a, b, weight="cos", wvar=omega,
                                   epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                   limit=cfg.max_panels)
    if not math.isfinite(val):
        raise QuadratureError(
            f"non-finite oscillatory quadrature result on [{a}, {b}]")
    return val


@dataclass(frozen=True)
class SweepResult:
    """Outcome of a doubling truncation sweep.

    value is the accumulated integral up to `cutoff`; converged reports
    whether the Cauchy criterion was met before the cap; last_rel_change
    is the achieved tolerance (relative change of the final doubling).
    """

    value: float
    converged: bool
    cutoff: float
    last_rel_change: float


def truncation_sweep(panel: Callable[[float, float], float],
                     start: float = 16.0,
                     rel_tol: float = 1e-8,
                     cap: float = SWEEP_CAP) -> SweepResult:
    """Sum panel(a, b) over [0, start], [start, 2*start], ... doubling b.

    `panel` must return the integral contribution of the half-open slab
    [a, b). The sweep stops when the latest panel changes the running
    total by less than rel_tol (relative), or flags non-convergence at
    the cap. Divergent integrands (panels that keep growing) come back
    with converged=False.
    """
    total = panel(0.0, start)
    if not math.isfinite(total):
        raise QuadratureError("non-finite sweep seed panel")
    hi = start
    rel_change = math.inf
    while hi < cap:
        lo, hi = hi, min(2.0 * hi, cap)
        contrib = panel(lo, hi)
        if not math.isfinite(contrib):
            raise QuadratureError(f"non-finite sweep panel on [{lo}, {hi}]")
        total += contrib
        scale = max(abs(total), 1e-300)
        rel_change = abs(contrib) / scale
        if rel_change < rel_tol:
            return SweepResult(total, True, hi, rel_change)
    return SweepResult(total, False, hi, rel_change)


def gauss_legendre_panel(fn, a: float, b: float, order: int = 24) -> float:
    """Fixed-order Gauss-Legendre integral of a vectorized fn over [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.dot(w, fn(mid + half * x)))
