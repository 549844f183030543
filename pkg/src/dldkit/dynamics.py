"""Accuracy-curve analysis: polynomial fits, derivatives, early-learning endpoint."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InsufficientPoints(Exception):
    pass


class IllConditioned(Exception):
    pass


# Condition-number bound on the Vandermonde matrix before we refuse to fit.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class EpochSeries:
    """Per-epoch metric values; epochs are 1-indexed and strictly increasing."""

    epochs: tuple[int, ...]
    values: tuple[float, ...]
    metric: str = "acc"

    def __post_init__(self):
        if len(self.epochs) != len(self.values):
            raise ValueError("epochs and values must have equal length")
        if any(b <= a for a, b in zip(self.epochs, self.epochs[1:])):
            raise ValueError("epochs must be strictly increasing")
        if not all(np.isfinite(v) for v in self.values):
            raise ValueError("values must be finite")

    def prefix(self, last_epoch: int) -> "EpochSeries":
        keep = [i for i, e in enumerate(self.epochs) if e <= last_epoch]
        return EpochSeries(
            tuple(self.epochs[i] for i in keep),
            tuple(self.values[i] for i in keep),
            self.metric,
        )

    def scaled(self, factor: float) -> "EpochSeries":
        return EpochSeries(
            self.epochs, tuple(v * factor for v in self.values), self.metric
        )


@dataclass(frozen=True)
class PolyFit:
    """coefficients[k] multiplies epoch**k."""

    coefficients: tuple[float, ...]
    domain: tuple[int, int]
    residual_rms: float

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, t: float) -> float:
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc


@dataclass
class TracePoint:
    epoch: int
    fitted_value: float
    first_deriv: float
    second_deriv: float
    triggered: bool


@dataclass
class ELReport:
    el: int | None
    eta: float
    degree: int
    trace: list[TracePoint] = field(default_factory=list)
    degenerate: bool = False


def fit_poly(series: EpochSeries, degree: int) -> PolyFit:
    """Least-squares polynomial fit over the series' epochs."""
    n = len(series.epochs)
    if n < degree + 1:
        raise InsufficientPoints(f"need {degree + 1} points for degree {degree}, got {n}")
    t = np.asarray(series.epochs, dtype=float)
    y = np.asarray(series.values, dtype=float)
    vander = np.vander(t, degree + 1, increasing=True)
    cond = np.linalg.cond(vander)
    if cond > COND_LIMIT:
        raise IllConditioned(f"Vandermonde condition {cond:.3g} exceeds {COND_LIMIT:.0e}")
    coeffs, *_ = np.linalg.lstsq(vander, y, rcond=None)
    resid = y - vander @ coeffs
    rms = float(np.sqrt(np.mean(resid**2)))
    return PolyFit(tuple(coeffs.tolist()), (int(t[0]), int(t[-1])), rms)


def poly_derivative(fit: PolyFit, order: int = 1) -> PolyFit:
    """Analytic derivative; degree drops by ``order`` (never below 0)."""
    coeffs = list(fit.coefficients)
    for _ in range(order):
        coeffs = [k * c for k, c in enumerate(coeffs)][1:]
        if not coeffs:
            coeffs = [0.0]
    return PolyFit(tuple(coeffs), fit.domain, fit.residual_rms)


def detect_el(
    series: EpochSeries,
    eta: float = 0.001,
    degree: int = 4,
    min_epochs: int = 6,
) -> ELReport:
    """First epoch where the fitted accuracy curve flattens out.

    A degree-``degree`` polynomial is fit to the whole series; candidate
    epochs from ``min_epochs`` upward are scanned in order and the endpoint is
    the first e with |second derivative at e| < eta. During training this is
    re-run on the history accumulated so far, which keeps detection causal.

    The candidate floor is raised to degree+2 so an exact-interpolation fit
    (zero residual, arbitrary curvature) can never trigger detection.
    """
    start = max(min_epochs, degree + 2)
    if len(series.epochs) < start:
        raise InsufficientPoints(
            f"need at least {start} epochs, got {len(series.epochs)}"
        )
    fit = fit_poly(series, degree)
    d1 = poly_derivative(fit, 1)
    d2 = poly_derivative(fit, 2)
    report = ELReport(el=None, eta=eta, degree=degree)
    for e in series.epochs:
        if e < start:
            continue
        triggered = abs(d2(e)) < eta
        report.trace.append(TracePoint(e, fit(e), d1(e), d2(e), triggered))
        if triggered and report.el is None:
            report.el = e
            report.degenerate = e == start
            break
    return report
