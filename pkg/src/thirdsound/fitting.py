"""Finite-size fits of sweep outputs.

The volume-sweep curves are fitted to the Calabrese-Cardy-type finite-size
form

    MI(f) ~ kappa1 * ln[(N/pi) * sin(pi f) + kappa2] + kappa3,

where f is the subsystem pixel fraction and N the total pixel count.  A
literal subsystem-volume argument of the sine is an integer multiple of pi
for every mask on the lattice, so the pixel-fraction argument is used and
recorded in output metadata (see the CLI's `sine_argument_convention`
field).

Area-sweep outputs get an ordinary linear fit with an R^2 diagnostic and a
super-linearity flag.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

SINE_ARGUMENT_CONVENTION = "pixel_fraction"

_KAPPA1_STARTS = (0.1, 1.0, 10.0)
_KAPPA2_STARTS = (0.0, 1.0, 10.0)
_MAX_ITER = 200


@dataclass(frozen=True)
class CalabreseFit:
    kappa1: float
    kappa2: float
    kappa3: float
    rms: float
    converged: bool
    n_points: int

    def predict(self, fractions, n_total: int) -> np.ndarray:
        return calabrese_model(np.asarray(fractions, dtype=float), n_total,
                               self.kappa1, self.kappa2, self.kappa3)


@dataclass(frozen=True)
class AreaLawFit:
    slope: float
    intercept: float
    r_squared: float
    rms: float
    superlinear: bool
    n_points: int


def calabrese_model(fractions: np.ndarray, n_total: int,
                    kappa1: float, kappa2: float, kappa3: float) -> np.ndarray:
    arg = (n_total / np.pi) * np.sin(np.pi * fractions) + kappa2
    return kappa1 * np.log(arg) + kappa3


def _rms(residual: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residual ** 2)))


def fit_calabrese_curve(fractions, mi_values, n_total: int) -> CalabreseFit:
    """Damped Gauss-Newton fit from a deterministic multi-start grid."""
    f = np.asarray(fractions, dtype=float)
    y = np.asarray(mi_values, dtype=float)
    if f.size < 5:
        raise ValueError("the finite-size fit needs at least 5 sweep points")
    if np.any((f <= 0) | (f >= 1)):
        raise ValueError("subsystem fractions must lie strictly inside (0, 1)")
    base = (n_total / np.pi) * np.sin(np.pi * f)

    def residual(params):
        k1, k2, k3 = params
        arg = base + k2
        if np.any(arg <= 0):
            return None
        return k1 * np.log(arg) + k3 - y

    best = None
    for k1_0, k2_0 in itertools.product(_KAPPA1_STARTS, _KAPPA2_STARTS):
        arg0 = base + k2_0
        if np.any(arg0 <= 0):
            continue
        k3_0 = float(np.mean(y - k1_0 * np.log(arg0)))
        params = np.array([k1_0, k2_0, k3_0])
        r = residual(params)
        converged = False
        for _ in range(_MAX_ITER):
            k1, k2, _ = params
            arg = base + k2
            jac = np.column_stack([np.log(arg), k1 / arg, np.ones_like(arg)])
            try:
                step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            # backtrack until the step keeps the log argument positive and
            # decreases the residual
            lam, accepted = 1.0, False
            for _ in range(40):
                trial = params + lam * step
                r_trial = residual(trial)
                if r_trial is not None and _rms(r_trial) < _rms(r):
                    params, r, accepted = trial, r_trial, True
                    break
                lam *= 0.5
            if not accepted:
                converged = True
                break
            if np.linalg.norm(lam * step) < 1e-12 * (1.0 + np.linalg.norm(params)):
                converged = True
                break
        candidate = (_rms(r), converged, params)
        if best is None or candidate[0] < best[0]:
            best = candidate
    if best is None:
        raise NumericalError("no admissible start: log argument non-positive everywhere")
    rms, converged, params = best
    return CalabreseFit(kappa1=float(params[0]), kappa2=float(params[1]),
                        kappa3=float(params[2]), rms=rms, converged=converged,
                        n_points=f.size)


def calabrese_fit(sweep) -> CalabreseFit:
    """Fit a volume SweepResult; the abscissa is converted to the subsystem
    pixel fraction of the full grid."""
    if not sweep.points:
        raise ValueError("empty sweep")
    grid = sweep.points[0].pair.a.grid
    n_total = grid.n_pixels
    fractions = np.array([p.stats.pixel_count for p in sweep.points]) / n_total
    return fit_calabrese_curve(fractions, sweep.mi_values, n_total)


def fit_area_line(areas, mi_values) -> AreaLawFit:
    x = np.asarray(areas, dtype=float)
    y = np.asarray(mi_values, dtype=float)
    if x.size < 4:
        raise ValueError("the area-law fit needs at least 4 sweep points")
    coeffs_lin = np.polyfit(x, y, 1)
    res_lin = y - np.polyval(coeffs_lin, x)
    ss_res = float(np.sum(res_lin ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if np.unique(x).size >= 3:
        coeffs_quad = np.polyfit(x, y, 2)
        ss_quad = float(np.sum((y - np.polyval(coeffs_quad, x)) ** 2))
        superlinear = ss_quad > 0 and ss_res / ss_quad > 10.0
    else:
        superlinear = False
    return AreaLawFit(slope=float(coeffs_lin[0]), intercept=float(coeffs_lin[1]),
                      r_squared=r_squared, rms=_rms(res_lin),
                      superlinear=superlinear, n_points=x.size)


def area_law_fit(sweep) -> AreaLawFit:
    """Linear MI-versus-boundary-area fit of an area SweepResult; uses the
    raw (pre-aggregation) points so congruent shapes each contribute."""
    points = sweep.raw_points or sweep.points
    areas = [p.abscissa for p in points]
    mis = [p.mi for p in points]
    return fit_area_line(areas, mis)
