"""First exit times, occupation times, and the occupation tail integral.

All three consume a :class:`~heatsing.paths.RebasedIncrement`.  Crossings of
the level |eta(s)| = r are bracketed on the increment's scan grid and then
refined: by bisection on the evaluator for analytic increments, and by exact
roots of the piecewise-linear interpolant where node values are available
(|eta|^2 is quadratic on each segment, so the sub-level interval per segment
is known in closed form; this also catches segments that dip into the ball
without either endpoint inside).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarseError
from .paths import RebasedIncrement

__all__ = [
    "ExitOccupationCurve",
    "RadiusGrid",
    "exit_occupation_curve",
    "first_exit_time",
    "occupation_time",
    "tail_integral",
]


@dataclass(frozen=True)
class RadiusGrid:
    """Strictly decreasing, geometrically spaced analysis radii."""

    radii: np.ndarray

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        if len(radii) < 8:
            raise ValueError("radius grid needs at least 8 radii")
        if radii[-1] <= 0 or np.any(np.diff(radii) >= 0):
            raise ValueError("radii must be positive and strictly decreasing")
        ratios = radii[1:] / radii[:-1]
        if not np.allclose(ratios, ratios[0], rtol=1e-9):
            raise ValueError("radii must be geometrically spaced")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def geometric(cls, r_max: float, ratio: float, count: int) -> "RadiusGrid":
        if not (0.0 < ratio < 1.0):
            raise ValueError("ratio must lie in (0, 1)")
        return cls(radii=r_max * ratio ** np.arange(count))

    @property
    def ratio(self) -> float:
        return float(self.radii[1] / self.radii[0])

    def __len__(self) -> int:
        return len(self.radii)


def _effective_span(eta: RebasedIncrement, s0: float | None):
    """Scan grid and norms restricted to [0, s0]."""
    if s0 is None or s0 >= eta.s0 * (1.0 - 1e-15):
        return eta.s0, eta.scan_grid, eta.node_norms
    if not 0.0 < s0 <= eta.s0:
        raise ValueError(f"s0 must lie in (0, {eta.s0}]")
    grid = eta.scan_grid
    keep = grid < s0 * (1.0 - 1e-15)
    grid = np.append(grid[keep], s0)
    return s0, grid, eta.norm(grid)


def _bisect_crossing(eta: RebasedIncrement, lo: float, hi: float, r: float) -> float:
    """Locate |eta| = r inside a bracket with |eta(lo)| <= r < |eta(hi)|."""
    tol = eta.tol_s
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if eta.norm(mid) > r:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def first_exit_time(eta: RebasedIncrement, r: float, s0: float | None = None) -> float:
    """First s in [0, s0] with |eta(s)| > r; s0 if the level is never exceeded.

    The crossing is bracketed by a scan over the increment's grid and then
    refined on the interpolant to the increment's time tolerance.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    s0, grid, norms = _effective_span(eta, s0)
    above = norms > r
    if not above.any():
        return s0
    i = int(np.argmax(above))
    if i == 0:
        return 0.0
    return _bisect_crossing(eta, grid[i - 1], grid[i], r)


def _segment_inside_lengths(nodes: np.ndarray, values: np.ndarray,
                            norms: np.ndarray, r: float) -> float:
    """Occupation of {|eta| <= r} for the piecewise-linear interpolant, exactly.

    Per segment eta(u) = P + u D, so |eta|^2 - r^2 is quadratic in u and the
    inside interval is the root interval clipped to [0, 1].
    """
    p = values[:-1]
    d = np.diff(values, axis=0)
    widths = np.diff(nodes)
    chord = np.linalg.norm(d, axis=-1)
    lo_bound = np.maximum(norms[:-1], norms[1:]) - chord
    candidates = lo_bound <= r
    both_inside = (norms[:-1] <= r) & (norms[1:] <= r)
    # Convexity of |eta| per segment: both endpoints inside => segment inside.
    total = float(widths[both_inside].sum())
    sel = candidates & ~both_inside
    if not sel.any():
        return total
    p, d, w = p[sel], d[sel], widths[sel]
    aa = np.sum(d * d, axis=-1)
    bb = 2.0 * np.sum(p * d, axis=-1)
    cc = np.sum(p * p, axis=-1) - r * r
    frac = np.zeros(len(aa))
    moving = aa > 0.0
    disc = bb[moving] ** 2 - 4.0 * aa[moving] * cc[moving]
    has_roots = disc > 0.0
    sq = np.sqrt(np.where(has_roots, disc, 0.0))
    u1 = (-bb[moving] - sq) / (2.0 * aa[moving])
    u2 = (-bb[moving] + sq) / (2.0 * aa[moving])
    inside = np.clip(np.minimum(u2, 1.0) - np.maximum(u1, 0.0), 0.0, 1.0)
    frac[moving] = np.where(has_roots, inside, 0.0)
    frac[~moving] = (cc[~moving] <= 0.0).astype(float)
    return total + float(w @ frac)


def occupation_time(eta: RebasedIncrement, r: float, s0: float | None = None) -> float:
    """Lebesgue measure of {s in [0, s0] : |eta(s)| <= r}.

    Points with |eta(s)| = r count as inside.  Sampled increments use the
    exact per-segment root intervals; analytic increments use a scan over
    the grid with bisection-refined crossings.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    s0, grid, norms = _effective_span(eta, s0)
    if eta.node_values is not None:
        full = eta.scan_grid
        if len(grid) == len(full) and grid[-1] == full[-1]:
            values = eta.node_values
        else:
            values = eta(grid)
        return _segment_inside_lengths(grid, values, norms, r)
    # Generic sweep: count full inside segments, bisect sign changes.
    inside = norms <= r
    total = 0.0
    state = bool(inside[0])
    s_prev = grid[0]
    for k in range(1, len(grid)):
        if inside[k] != inside[k - 1]:
            cross = (_bisect_crossing(eta, grid[k - 1], grid[k], r)
                     if inside[k - 1] else
                     _bisect_entry(eta, grid[k - 1], grid[k], r))
            if state:
                total += cross - s_prev
            s_prev = cross
            state = bool(inside[k])
    if state:
        total += grid[-1] - s_prev
    return total


def _bisect_entry(eta: RebasedIncrement, lo: float, hi: float, r: float) -> float:
    """Locate |eta| = r with |eta(lo)| > r >= |eta(hi)| (entering the ball)."""
    tol = eta.tol_s
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if eta.norm(mid) > r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ExitOccupationCurve:
    """sigma(r) and tau(r) tabulated on a decreasing radius grid."""

    radii: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    s0: float

    def __post_init__(self):
        for name in ("radii", "sigma", "tau"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        slack = 1e-9 * self.s0
        if np.any(np.diff(self.radii) >= 0):
            raise ValueError("radii must be strictly decreasing")
        if np.any(self.sigma <= 0) or np.any(self.sigma > self.tau + slack):
            raise ValueError("need 0 < sigma <= tau")
        if np.any(self.tau > self.s0 + slack):
            raise ValueError("tau cannot exceed s0")
        for arr in (self.sigma, self.tau):
            if np.any(np.diff(arr) > slack):  # decreasing radii => nonincreasing values
                raise ValueError("sigma and tau must be nondecreasing in r")


def exit_occupation_curve(eta: RebasedIncrement, radii,
                          s0: float | None = None) -> ExitOccupationCurve:
    """Tabulate sigma and tau over a radius grid."""
    radii = np.asarray(getattr(radii, "radii", radii), dtype=float)
    s0_eff = eta.s0 if s0 is None else s0
    sigma = np.array([first_exit_time(eta, r, s0) for r in radii])
    tau = np.array([occupation_time(eta, r, s0) for r in radii])
    return ExitOccupationCurve(radii=radii, sigma=sigma, tau=tau, s0=s0_eff)


def _panel_weight_integrals(l1: np.ndarray, l2: np.ndarray, dim: int):
    """Exact integrals of l^(-dim-1) and (l - l1) l^(-dim-1) over [l1, l2]."""
    a = (l1 ** (-dim) - l2 ** (-dim)) / dim
    if dim == 1:
        b = np.log(l2 / l1) - l1 * a
    else:
        b = (l1 ** (1 - dim) - l2 ** (1 - dim)) / (dim - 1) - l1 * a
    return a, b


def tail_integral(curve: ExitOccupationCurve, r: float, dim: int, c0: float) -> float:
    """r^N * integral_r^inf tau(l) l^(-N-1) dl with tau frozen at tau(c0) = s0 beyond c0.

    The finite part uses trapezoid interpolation of the tabulated tau against
    the exact antiderivative of the weight on each panel; the tail beyond c0,
    where the path never leaves the ball, is analytic.

    Requires at least 4 tabulated radii inside [r, c0] (GridTooCoarseError
    otherwise) and r < c0.
    """
    if not (0.0 < r < c0):
        raise ValueError(f"need 0 < r < c0, got r={r}, c0={c0}")
    asc = curve.radii[::-1]
    tau_asc = curve.tau[::-1]
    lo = np.searchsorted(asc, r * (1.0 - 1e-12), side="left")
    hi = np.searchsorted(asc, c0 * (1.0 + 1e-12), side="right")
    ls = asc[lo:hi]
    taus = tau_asc[lo:hi]
    if len(ls) < 4:
        raise GridTooCoarseError(
            f"only {len(ls)} tabulated radii in [{r}, {c0}]; need >= 4")
    if ls[0] > r * (1.0 + 1e-12):
        # r falls between tabulated radii: extend the first panel by linear
        # interpolation of tau.
        if lo == 0:
            raise GridTooCoarseError(f"query radius {r} below the tabulated range")
        t_r = np.interp(r, asc, tau_asc)
        ls = np.concatenate([[r], ls])
        taus = np.concatenate([[t_r], taus])
    ls = np.concatenate([ls, [c0]])
    taus = np.concatenate([taus, [curve.s0]])
    l1, l2 = ls[:-1], ls[1:]
    t1, t2 = taus[:-1], taus[1:]
    keep = l2 > l1 * (1.0 + 1e-15)
    l1, l2, t1, t2 = l1[keep], l2[keep], t1[keep], t2[keep]
    a, b = _panel_weight_integrals(l1, l2, dim)
    slopes = (t2 - t1) / (l2 - l1)
    finite = float(np.sum(t1 * a + slopes * b))
    analytic_tail = curve.s0 * c0 ** (-dim) / dim
    return r**dim * (finite + analytic_tail)
