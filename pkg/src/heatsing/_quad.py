"""Panel-based Gauss quadrature helpers.

All integrators here take a *vectorized* integrand ``f(s) -> array`` and a
list of panel boundaries.  Error estimates come from comparing the base-order
result with the doubled-order result on each panel; panels that disagree are
bisected until the global target is met.
"""

from functools import lru_cache

import numpy as np

from .errors import ToleranceNotMetError


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1], cached per order."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@lru_cache(maxsize=16)
def gauss_hermite_e(order: int):
    """Probabilists' Hermite rule: sum(w * f(x)) ~ E[f(Z)], Z standard normal."""
    x, w = np.polynomial.hermite_e.hermegauss(order)
    return x, w / np.sqrt(2.0 * np.pi)


def panel_nodes(boundaries, order: int):
    """Flattened Gauss-Legendre nodes/weights for a sequence of panels.

    Parameters
    ----------
    boundaries : array, shape (m+1,)
        Ascending panel edges.
    order : int
        Gauss-Legendre order per panel.

    Returns
    -------
    nodes, weights : arrays of shape (m * order,)
    """
    b = np.asarray(boundaries, dtype=float)
    x, w = gauss_legendre(order)
    lo = b[:-1, None]
    half = 0.5 * (b[1:, None] - lo)
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def geometric_panels(hi: float, n_panels: int, ratio: float = 0.5, lo: float = 0.0):
    """Panel edges on [lo, hi] accumulating geometrically at ``lo``.

    Edges are lo + (hi-lo) * ratio**k for k = 0..n_panels-1, plus the
    endpoints, so the panel closest to ``lo`` has width (hi-lo)*ratio**(n-1).
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError("panel ratio must lie in (0, 1)")
    k = np.arange(n_panels)
    edges = lo + (hi - lo) * ratio**k
    return np.concatenate([[lo], edges[::-1]])


def _panel_estimates(f, lo, hi, order: int):
    """Two-order integral estimates for a batch of panels [lo_i, hi_i].

    Evaluates the integrand once on all coarse nodes and once on all fine
    nodes of the batch; returns (coarse, fine) per panel.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    out = []
    for g in (max(order // 2, 2), order):
        x, w = gauss_legendre(g)
        nodes = lo[:, None] + half[:, None] * (x[None, :] + 1.0)
        vals = np.asarray(f(nodes.ravel())).reshape(len(lo), g)
        out.append(half * (vals @ w))
    return out[0], out[1]


def integrate_adaptive(f, boundaries, order: int = 8, rel_tol: float = 1e-6,
                       max_rounds: int = 14, abs_floor: float = 1e-300):
    """Adaptive composite Gauss-Legendre integration.

    Returns (value, error_estimate).  Panels whose half-order and full-order
    estimates disagree beyond their share of the budget are bisected, and
    only the new half-panels are re-evaluated.  Raises ToleranceNotMetError
    if the global discrepancy still exceeds the target after ``max_rounds``
    refinement sweeps.
    """
    edges = np.asarray(boundaries, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    coarse, fine = _panel_estimates(f, lo, hi, order)
    for _ in range(max_rounds):
        err = np.abs(fine - coarse)
        total = fine.sum()
        target = rel_tol * max(abs(total), abs_floor)
        if err.sum() <= target:
            return total, float(err.sum())
        bad = err > target / max(len(err), 1)
        if not bad.any():
            bad[np.argmax(err)] = True
        keep = ~bad
        mid = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([lo[bad], mid])
        new_hi = np.concatenate([mid, hi[bad]])
        new_coarse, new_fine = _panel_estimates(f, new_lo, new_hi, order)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        coarse = np.concatenate([coarse[keep], new_coarse])
        fine = np.concatenate([fine[keep], new_fine])
    err = float(np.abs(fine - coarse).sum())
    total = fine.sum()
    if err > rel_tol * max(abs(total), abs_floor):
        raise ToleranceNotMetError(
            f"adaptive quadrature stalled: err={err:.3e}, value={total:.3e}, "
            f"rel_tol={rel_tol:.1e}")
    return total, err
