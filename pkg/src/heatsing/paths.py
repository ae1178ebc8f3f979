"""Singularity trajectories and the backward increment around the terminal time.

Three trajectory families cover the experiments: a fixed point, a path that
approaches its terminal position at an exact Holder rate, and a sampled
stochastic path evaluated by linear interpolation.  ``rebase`` turns any of
them into the backward increment

    eta(s) = xi(T - s) - xi(T),   s in [0, s0],

which is the object all exit-time, occupation-time, and mass computations
consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError
from .fbm import SamplePath

__all__ = [
    "ConstantTrajectory",
    "HolderTrajectory",
    "RebasedIncrement",
    "SampledTrajectory",
    "Trajectory",
    "rebase",
]

# Scan grid used to bracket crossings of analytically-defined increments.
_ANALYTIC_SCAN_POINTS = 2048
_ANALYTIC_SCAN_FLOOR = 1e-13


class Trajectory:
    """Common interface: a horizon, a dimension, and a vectorized evaluator."""

    horizon: float
    dim: int

    def eval(self, t):
        """Position at time(s) t in [0, horizon]; shape (..., dim)."""
        raise NotImplementedError

    def rebase(self, s0: float | None = None) -> "RebasedIncrement":
        """Backward increment eta(s) = xi(T-s) - xi(T) on [0, s0]."""
        raise NotImplementedError

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.horizon * (1.0 + 1e-12)):
            bad = np.atleast_1d(t)
            bad = bad[(bad < 0) | (bad > self.horizon)]
            raise OutOfDomainError(f"time outside [0, {self.horizon}]: {bad[:4]}")
        return t

    def _check_s0(self, s0: float | None) -> float:
        if s0 is None:
            return self.horizon
        if not (0.0 < s0 <= self.horizon * (1.0 + 1e-12)):
            raise OutOfDomainError(f"s0 must lie in (0, {self.horizon}], got {s0}")
        return float(min(s0, self.horizon))


@dataclass(frozen=True)
class ConstantTrajectory(Trajectory):
    """A singular point that never moves."""

    point: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "point", np.atleast_1d(np.asarray(self.point, dtype=float)))
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def dim(self) -> int:
        return len(self.point)

    def eval(self, t):
        t = self._check_domain(t)
        return np.broadcast_to(self.point, t.shape + (self.dim,)).copy()

    def rebase(self, s0=None):
        s0 = self._check_s0(s0)
        return RebasedIncrement(
            dim=self.dim, s0=s0,
            _evaluator=lambda s: np.zeros(np.shape(s) + (self.dim,)),
            scan_grid=np.array([0.0, s0]),
            tol_s=s0 * 1e-12)


@dataclass(frozen=True)
class HolderTrajectory(Trajectory):
    """Path with |xi(T) - xi(t)| = speed * (T - t)^alpha exactly.

    xi(t) = anchor + speed * (T - t)^alpha * direction, so the terminal
    position is ``anchor`` and the approach rate is exactly Holder-alpha.
    """

    anchor: np.ndarray
    speed: float
    alpha: float
    direction: np.ndarray
    horizon: float

    def __post_init__(self):
        anchor = np.atleast_1d(np.asarray(self.anchor, dtype=float))
        direction = np.atleast_1d(np.asarray(self.direction, dtype=float))
        if anchor.shape != direction.shape:
            raise ValueError("anchor and direction must have the same dimension")
        norm = np.linalg.norm(direction)
        if not np.isclose(norm, 1.0, rtol=1e-9):
            raise ValueError(f"direction must be a unit vector, |e| = {norm}")
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "direction", direction)

    @property
    def dim(self) -> int:
        return len(self.anchor)

    def eval(self, t):
        t = self._check_domain(t)
        gap = np.clip(self.horizon - t, 0.0, None)
        return self.anchor + self.speed * gap[..., None] ** self.alpha * self.direction

    def rebase(self, s0=None):
        s0 = self._check_s0(s0)

        def evaluator(s):
            s = np.clip(np.asarray(s, dtype=float), 0.0, None)
            return self.speed * s[..., None] ** self.alpha * self.direction

        grid = _geometric_scan(s0)
        return RebasedIncrement(dim=self.dim, s0=s0, _evaluator=evaluator,
                                scan_grid=grid, tol_s=s0 * 1e-12)


@dataclass(frozen=True)
class SampledTrajectory(Trajectory):
    """Linear interpolation of a discretized path (e.g. a sampled fBm)."""

    path: SamplePath

    @property
    def dim(self) -> int:
        return self.path.dim

    @property
    def horizon(self) -> float:
        return self.path.horizon

    def eval(self, t):
        t = self._check_domain(t)
        dt = self.path.dt
        n = len(self.path.times) - 1
        idx = np.clip((t / dt).astype(int), 0, n - 1)
        frac = np.clip((t - idx * dt) / dt, 0.0, 1.0)[..., None]
        vals = self.path.values
        # Two-weight form is exact at both endpoints of a segment.
        return (1.0 - frac) * vals[idx] + frac * vals[idx + 1]

    def rebase(self, s0=None):
        s0 = self._check_s0(s0)
        dt = self.path.dt
        terminal = self.path.values[-1]
        n_full = int(np.floor(s0 / dt * (1.0 + 1e-12)))
        s_nodes = np.arange(n_full + 1) * dt
        # eta at s = k*dt is values[n-k] - values[n]
        vals = self.path.values[len(self.path.times) - 1 - n_full :][::-1] - terminal
        if s_nodes[-1] < s0 * (1.0 - 1e-12):
            tail_val = self.eval(np.asarray(self.horizon - s0)) - terminal
            s_nodes = np.append(s_nodes, s0)
            vals = np.vstack([vals, tail_val])
        return RebasedIncrement(dim=self.dim, s0=s0, scan_grid=s_nodes,
                                node_values=np.ascontiguousarray(vals),
                                tol_s=dt / 100.0)


def _geometric_scan(s0: float) -> np.ndarray:
    """Scan grid on [0, s0] resolving crossing times over many decades."""
    k = np.arange(_ANALYTIC_SCAN_POINTS)
    ratio = _ANALYTIC_SCAN_FLOOR ** (1.0 / (_ANALYTIC_SCAN_POINTS - 1))
    return np.concatenate([[0.0], s0 * ratio ** k[::-1]])


@dataclass
class RebasedIncrement:
    """The backward increment eta on [0, s0], with eta(0) = 0.

    ``scan_grid`` is the grid on which downstream crossing searches bracket
    sign changes; for sampled paths it coincides with the path nodes and
    ``node_values`` holds eta there, in which case eta is exactly the
    piecewise-linear interpolant of those nodes.
    """

    dim: int
    s0: float
    scan_grid: np.ndarray
    tol_s: float
    node_values: np.ndarray | None = None
    _evaluator: object = None
    _node_norms: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -1e-15) or np.any(s > self.s0 * (1.0 + 1e-12)):
            raise OutOfDomainError(f"s outside [0, {self.s0}]")
        if self.node_values is not None:
            grid = self.scan_grid
            idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 2)
            lo = grid[idx]
            frac = np.clip((s - lo) / (grid[idx + 1] - lo), 0.0, 1.0)[..., None]
            v = self.node_values
            return (1.0 - frac) * v[idx] + frac * v[idx + 1]
        return self._evaluator(s)

    def norm(self, s):
        """|eta(s)|, vectorized."""
        return np.linalg.norm(self(s), axis=-1)

    @property
    def node_norms(self) -> np.ndarray:
        """|eta| on the scan grid, cached."""
        if self._node_norms is None:
            if self.node_values is not None:
                self._node_norms = np.linalg.norm(self.node_values, axis=-1)
            else:
                self._node_norms = self.norm(self.scan_grid)
        return self._node_norms

    @property
    def max_norm(self) -> float:
        return float(self.node_norms.max())


def rebase(traj: Trajectory, s0: float | None = None) -> RebasedIncrement:
    """Module-level convenience wrapper around ``traj.rebase(s0)``."""
    return traj.rebase(s0)
