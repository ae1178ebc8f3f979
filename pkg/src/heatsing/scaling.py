"""Exponent fits, envelope checks, removability classification, moments.

The main theorems bound ball masses by power laws with unspecified
constants, so every check here is a bounded-ratio or fitted-exponent
statement over a radius window rather than a pointwise comparison.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlphaOutOfRangeError,
    DegenerateWindowError,
    EnsembleTooSmallError,
    GridMismatchError,
    GridTooCoarseError,
    NonpositiveMassError,
)
from .functionals import ExitOccupationCurve, occupation_time, tail_integral
from .heatmass import BallMassCurve
from .paths import RebasedIncrement

__all__ = [
    "BoundReport",
    "ExponentFit",
    "MomentEstimate",
    "Removability",
    "classify_removability",
    "fit_exponent",
    "moment_estimate",
    "occupation_moment_profile",
    "verify_lower_bound",
    "verify_upper_bound",
]

MIN_FIT_POINTS = 8
MIN_ENSEMBLE = 200
MAX_MOMENT_ORDER = 3
REMOVABILITY_MARGIN = 0.1
DEFAULT_RATIO_CAP = 50.0
STOCHASTIC_RATIO_CAP = 200.0


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power-law fit of a mass curve over a radius window.

    ``model`` is "power" for M = exp(a) r^kappa or "power-loglog" for
    M = exp(a) r^kappa (log log(1/r))^beta.  ``log_amplitude`` is the
    natural-log intercept a.
    """

    kappa: float
    log_amplitude: float
    model: str
    beta: float | None
    rms_residual: float
    window: tuple[float, float]
    n_points: int


def fit_exponent(radii, masses, window=None, model: str = "power") -> ExponentFit:
    """Fit log M = a + kappa log r (+ beta log log log correction) on a window.

    Parameters
    ----------
    radii, masses : arrays
        Tabulated curve; any order, masses must be positive on the window.
    window : (r_min, r_max) or None
        Radius window; defaults to the full range.
    model : {"power", "power-loglog"}
        The loglog model adds a free regressor log(log log(1/r)) and needs
        r < 1/e throughout the window.
    """
    radii = np.asarray(radii, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if window is None:
        window = (radii.min(), radii.max())
    r_min, r_max = float(window[0]), float(window[1])
    if not r_min < r_max:
        raise DegenerateWindowError(f"empty window [{r_min}, {r_max}]")
    sel = (radii >= r_min * (1.0 - 1e-12)) & (radii <= r_max * (1.0 + 1e-12))
    if sel.sum() < MIN_FIT_POINTS:
        raise DegenerateWindowError(
            f"only {int(sel.sum())} radii in window, need >= {MIN_FIT_POINTS}")
    r = radii[sel]
    m = masses[sel]
    if np.any(m <= 0):
        raise NonpositiveMassError("masses must be positive for a log-log fit")
    log_r = np.log(r)
    cols = [log_r, np.ones_like(log_r)]
    if model == "power-loglog":
        loglog = np.log(1.0 / r)
        if np.any(loglog <= 1.0):
            raise DegenerateWindowError(
                "power-loglog model needs r < 1/e throughout the window")
        cols.append(np.log(np.log(loglog)))
    elif model != "power":
        raise ValueError(f"unknown model {model!r}")
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, np.log(m), rcond=None)
    resid = np.log(m) - design @ coef
    return ExponentFit(
        kappa=float(coef[0]),
        log_amplitude=float(coef[1]),
        model=model,
        beta=float(coef[2]) if model == "power-loglog" else None,
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(r_min, r_max),
        n_points=int(sel.sum()),
    )


@dataclass(frozen=True)
class BoundReport:
    """Ratio of a mass curve to a theoretical envelope over a radius window."""

    kind: str
    radii: np.ndarray
    ratios: np.ndarray
    ratio_cap: float
    params: dict

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def passed(self) -> bool:
        if not np.all(np.isfinite(self.ratios)) or self.min_ratio <= 0:
            return False
        return self.max_ratio / self.min_ratio <= self.ratio_cap

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "ratio_cap": self.ratio_cap,
            "pass": bool(self.passed),
            "window": [float(self.radii.min()), float(self.radii.max())],
            **self.params,
        }


def _theta_shift(radii: np.ndarray, theta: float) -> int:
    """Index shift k with theta = q^k on a geometric grid, or GridMismatchError."""
    q = radii[1] / radii[0]
    k = math.log(theta) / math.log(q)
    k_int = round(k)
    if k_int < 1 or abs(q**k_int - theta) > 1e-9 * theta:
        raise GridMismatchError(
            f"theta={theta} is not an integer power of the grid ratio q={q}")
    return k_int


def verify_lower_bound(mass: BallMassCurve, exits: ExitOccupationCurve,
                       theta: float = 0.5,
                       ratio_cap: float = DEFAULT_RATIO_CAP) -> BoundReport:
    """Bounded-ratio check of M_total(r) against sigma(theta r) + r^N.

    ``theta`` must be an integer power of the grid ratio so sigma(theta r)
    is tabulated exactly (no re-interpolation).
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if len(mass.radii) != len(exits.radii) or not np.allclose(
            mass.radii, exits.radii, rtol=1e-12):
        raise GridMismatchError("mass and exit curves use different radius grids")
    dim = int(mass.metadata.get("dim", 3))
    k = _theta_shift(mass.radii, theta)
    n = len(mass.radii) - k
    if n < 2:
        raise GridMismatchError("grid too short for the requested theta shift")
    radii = mass.radii[:n]
    envelope = exits.sigma[k : k + n] + radii**dim
    ratios = mass.m_total[:n] / envelope
    return BoundReport(kind="lower", radii=radii, ratios=ratios,
                       ratio_cap=ratio_cap, params={"theta": theta, "dim": dim})


def verify_upper_bound(mass: BallMassCurve, exits: ExitOccupationCurve,
                       dim: int, c0: float,
                       ratio_cap: float = DEFAULT_RATIO_CAP) -> BoundReport:
    """Bounded-ratio check of M_total(r) against min(tail(r), r^2) + r^N.

    Radii whose tail integral is not computable (fewer than 4 tabulated
    radii above them) are dropped from the window; GridTooCoarseError
    propagates if none remain.
    """
    if len(mass.radii) != len(exits.radii) or not np.allclose(
            mass.radii, exits.radii, rtol=1e-12):
        raise GridMismatchError("mass and exit curves use different radius grids")
    radii, ratios = [], []
    for i, r in enumerate(mass.radii):
        above = np.sum(exits.radii >= r * (1.0 - 1e-12))
        if above < 4:
            continue
        tail = tail_integral(exits, r, dim, c0)
        envelope = min(tail, r**2) + r**dim
        radii.append(r)
        ratios.append(mass.m_total[i] / envelope)
    if len(radii) < 2:
        raise GridTooCoarseError("no radii with a computable tail integral")
    return BoundReport(kind="upper", radii=np.asarray(radii),
                       ratios=np.asarray(ratios), ratio_cap=ratio_cap,
                       params={"c0": c0, "dim": dim})


class Removability(enum.Enum):
    CRITERION_SATISFIED = "criterion-satisfied"
    CRITERION_VIOLATED = "criterion-violated"


def classify_removability(mass: BallMassCurve, alpha: float, dim: int,
                          window=None) -> Removability:
    """Check the fitted mass exponent against the removability threshold.

    The threshold is k* = max(2, 1/alpha); the criterion is satisfied when
    the fitted exponent exceeds k* by a fixed margin, meaning the mass decays
    strictly faster than the critical order.  Only applicable for
    alpha in (1/dim, 1).
    """
    if not (1.0 / dim < alpha < 1.0):
        raise AlphaOutOfRangeError(
            f"alpha={alpha} outside (1/{dim}, 1); ball masses cannot decide "
            "removability there")
    fit = fit_exponent(mass.radii, mass.m_total, window=window)
    threshold = max(2.0, 1.0 / alpha)
    if fit.kappa >= threshold + REMOVABILITY_MARGIN:
        return Removability.CRITERION_SATISFIED
    return Removability.CRITERION_VIOLATED


@dataclass(frozen=True)
class MomentEstimate:
    """Sample moment of the occupation time with a jackknife standard error."""

    radius: float
    order: int
    value: float
    stderr: float
    count: int


def _jackknife_mean(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    total = values.sum()
    leave_one_out = (total - values) / (n - 1)
    var = (n - 1) / n * np.sum((leave_one_out - leave_one_out.mean()) ** 2)
    return mean, float(np.sqrt(var))


def moment_estimate(paths: Sequence[RebasedIncrement], r: float, n: int,
                    s0: float | None = None) -> MomentEstimate:
    """Monte Carlo estimate of E[tau(r)^n] over an ensemble of increments."""
    if n < 1 or n > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must lie in [1, {MAX_MOMENT_ORDER}]")
    taus = np.array([occupation_time(eta, r, s0) for eta in paths])
    if len(taus) < MIN_ENSEMBLE:
        raise EnsembleTooSmallError(
            f"ensemble of {len(taus)} paths; need >= {MIN_ENSEMBLE}")
    mean, err = _jackknife_mean(taus**n)
    return MomentEstimate(radius=r, order=n, value=mean, stderr=err, count=len(taus))


def occupation_moment_profile(paths: Iterable[RebasedIncrement], radii,
                              n: int = 1, s0: float | None = None,
                              min_ensemble: int = MIN_ENSEMBLE) -> list[MomentEstimate]:
    """Moment estimates over several radii in a single pass over the ensemble.

    Streams the increments, so large ensembles never need to be held in
    memory at once.
    """
    if n < 1 or n > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must lie in [1, {MAX_MOMENT_ORDER}]")
    radii = np.asarray(getattr(radii, "radii", radii), dtype=float)
    rows = []
    for eta in paths:
        rows.append([occupation_time(eta, r, s0) for r in radii])
    taus = np.asarray(rows)
    if len(taus) < min_ensemble:
        raise EnsembleTooSmallError(
            f"ensemble of {len(taus)} paths; need >= {min_ensemble}")
    out = []
    for j, r in enumerate(radii):
        mean, err = _jackknife_mean(taus[:, j] ** n)
        out.append(MomentEstimate(radius=float(r), order=n, value=mean,
                                  stderr=err, count=len(taus)))
    return out
