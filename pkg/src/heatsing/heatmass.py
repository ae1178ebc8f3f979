"""Heat kernel, Gaussian ball masses, and masses of the moving-source solution.

The solution of u_t - Laplace(u) = delta(x - xi(t)) with bounded positive
initial data splits into a smooth background (the heat evolution of the
initial data) and the source part

    F(x, T) = integral_0^T G(x, xi(t), T - t) dt.

The mass of F on a ball B_r around xi(T) reduces, after rebasing the path,
to a time integral of Gaussian ball probabilities:

    integral_0^T  P(|Y_s - eta(s)| <= r) ds,   Y_s ~ N(0, 2s I).

The ball probability is computed by tensor quadrature in spherical
coordinates.  Internally everything is rescaled to standard-normal units
where the Gaussian has unit width, so panel layouts are size-independent:
radial panels have unit width around the bump, angular panels grow
geometrically away from the axis where exp(z cos(phi)) concentrates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._quad import geometric_panels, integrate_adaptive, gauss_hermite_e, gauss_legendre, panel_nodes
from .errors import (
    AtSingularPointError,
    NonpositiveTimeError,
    ToleranceNotMetError,
    UnsupportedInitialDataError,
)
from .paths import RebasedIncrement, Trajectory

__all__ = [
    "BallMassCurve",
    "BumpTestFunction",
    "ConstantData",
    "GaussianBumpData",
    "HeatKernelParams",
    "MassUpperSplit",
    "QuadratureConfig",
    "background_mass",
    "gaussian_ball_mass",
    "heat_kernel",
    "mass_upper_split",
    "singular_mass",
    "source_density",
    "total_mass_curve",
    "unit_ball_volume",
    "weak_form_scale",
    "weak_residual",
]

# Distance, in standard-normal units, beyond which the ball probability is
# clamped to 0 or 1; the neglected tail is below exp(-84).
_CLAMP = 13.0


@dataclass(frozen=True)
class HeatKernelParams:
    """Spatial dimension and time horizon of one experiment."""

    dim: int = 3
    horizon: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or int(self.dim) != self.dim:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dim < 3:
            warnings.warn(f"dim={self.dim} is outside the theory range (dim >= 3)",
                          stacklevel=2)


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy knobs shared by the mass quadratures.

    The time mesh is geometric with ``n_panels`` panels accumulating at
    s = 0 with ratio ``panel_ratio``; panels whose two-order estimates
    disagree are bisected adaptively.  Ball probabilities use tensor
    Gauss-Legendre rules with the given radial/angular orders.
    """

    n_panels: int = 64
    panel_ratio: float = 0.5
    gauss_order: int = 8
    ball_radial_order: int = 12
    ball_angular_order: int = 12
    rel_tol: float = 1e-6
    max_refine: int = 3

    def __post_init__(self):
        if self.n_panels < 16:
            raise ValueError("n_panels must be >= 16")
        if self.gauss_order < 4:
            raise ValueError("gauss_order must be >= 4")
        if not (0.0 < self.rel_tol <= 1e-2):
            raise ValueError("rel_tol must lie in (0, 1e-2]")
        if not (0.0 < self.panel_ratio < 1.0):
            raise ValueError("panel_ratio must lie in (0, 1)")


_DEFAULT_QUAD = QuadratureConfig()


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in R^dim."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def _sphere_surface(m: int) -> float:
    """Surface area of the unit m-sphere embedded in R^(m+1)."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


def heat_kernel(x, y, t: float):
    """Gaussian heat kernel G(x, y, t) = (4 pi t)^(-N/2) exp(-|x-y|^2 / 4t)."""
    if not t > 0:
        raise NonpositiveTimeError(f"heat kernel needs t > 0, got {t}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    dim = x.shape[-1]
    sq = np.sum((x - y) ** 2, axis=-1)
    val = (4.0 * math.pi * t) ** (-dim / 2.0) * np.exp(-sq / (4.0 * t))
    return float(val) if np.isscalar(sq) or sq.ndim == 0 else val


def _radial_edges(lo: float, hi: float) -> np.ndarray:
    """Unit-width panels covering [lo, hi]; the Gaussian bump has unit scale."""
    n = max(int(math.ceil(hi - lo)), 1)
    return np.linspace(lo, hi, n + 1)


def _angular_edges(z_max: float) -> np.ndarray:
    """Geometric angular panels resolving exp(z cos(phi)) near phi = 0."""
    if z_max <= 4.0:
        return np.array([0.0, 0.5 * math.pi, math.pi])
    edges = [0.0]
    phi = 1.0 / math.sqrt(z_max)
    while phi < math.pi:
        edges.append(phi)
        phi *= 2.0
    edges.append(math.pi)
    return np.asarray(edges)


def _bisect_edges(edges: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(edges) - 1)
    out[::2] = edges
    out[1::2] = 0.5 * (edges[:-1] + edges[1:])
    return out


def _ball_mass_std_once(a: float, r_edges, a_edges, dim: int,
                        rad_order: int, ang_order: int) -> float:
    r_nodes, r_w = panel_nodes(r_edges, rad_order)
    a_nodes, a_w = panel_nodes(a_edges, ang_order)
    r_w = r_w * r_nodes ** (dim - 1)
    a_w = a_w * np.sin(a_nodes) ** (dim - 2)
    expo = -0.5 * (r_nodes[:, None] ** 2 + a * a
                   - 2.0 * a * r_nodes[:, None] * np.cos(a_nodes)[None, :])
    const = _sphere_surface(dim - 2) * (2.0 * math.pi) ** (-dim / 2.0)
    return const * float(r_w @ np.exp(expo) @ a_w)


def _ball_mass_std(a: float, b: float, dim: int, rel_tol: float,
                   rad_order: int, ang_order: int, max_refine: int = 3):
    """P(|Z - a e1| <= b) for Z standard normal in R^dim; returns (value, err)."""
    if b <= 0.0:
        return 0.0, 0.0
    if b - a >= _CLAMP:
        return 1.0, 0.0
    if a - b >= _CLAMP:
        return 0.0, 0.0
    if dim == 1:
        # Interval probability; the polar-coordinate rule starts at dim 2.
        val = 0.5 * (math.erf((b + a) / math.sqrt(2.0))
                     + math.erf((b - a) / math.sqrt(2.0)))
        return val, 0.0
    lo = max(0.0, a - _CLAMP)
    hi = min(b, a + _CLAMP)
    r_edges = _radial_edges(lo, hi)
    a_edges = _angular_edges(a * hi)
    coarse = _ball_mass_std_once(a, r_edges, a_edges, dim,
                                 max(rad_order // 2, 3), max(ang_order // 2, 3))
    for _ in range(max_refine + 1):
        fine = _ball_mass_std_once(a, r_edges, a_edges, dim, rad_order, ang_order)
        err = abs(fine - coarse)
        if err <= rel_tol * max(abs(fine), 1e-300):
            return fine, err
        r_edges = _bisect_edges(r_edges)
        a_edges = _bisect_edges(a_edges)
        coarse = fine
    raise ToleranceNotMetError(
        f"ball mass quadrature stalled at a={a:.3e}, b={b:.3e}, dim={dim}")


def gaussian_ball_mass(r: float, d: float, s: float, dim: int = 3,
                       quad: QuadratureConfig | None = None) -> float:
    """Probability that an isotropic Gaussian lies in a ball.

    Returns P(|Y| <= r) for Y normal in R^dim with mean at distance ``d``
    from the origin and covariance 2s per axis, computed by tensor
    quadrature over the radius and the polar angle.

    Parameters
    ----------
    r : float
        Ball radius, > 0.
    d : float
        Distance of the Gaussian center from the ball center, >= 0.
    s : float
        Diffusion time; the Gaussian has variance 2s per axis.
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    if d < 0:
        raise ValueError(f"center distance must be >= 0, got {d}")
    if not s > 0:
        raise NonpositiveTimeError(f"time must be positive, got {s}")
    quad = quad or _DEFAULT_QUAD
    scale = 1.0 / math.sqrt(2.0 * s)
    val, _ = _ball_mass_std(d * scale, r * scale, dim, quad.rel_tol,
                            quad.ball_radial_order, quad.ball_angular_order,
                            quad.max_refine)
    return val


def _ball_mass_vec(r: float, d: np.ndarray, s: np.ndarray, dim: int,
                   quad: QuadratureConfig) -> np.ndarray:
    """Vectorized ball mass over (d_i, s_i) pairs sharing one radius."""
    scale = 1.0 / np.sqrt(2.0 * s)
    a = d * scale
    b = r * scale
    out = np.empty_like(a)
    full = b - a >= _CLAMP
    out[full] = 1.0
    empty = a - b >= _CLAMP
    out[empty] = 0.0
    rest = ~(full | empty)
    idx = np.nonzero(rest)[0]
    for i in idx:
        out[i], _ = _ball_mass_std(a[i], b[i], dim, quad.rel_tol,
                                   quad.ball_radial_order,
                                   quad.ball_angular_order, quad.max_refine)
    return out


def singular_mass(eta: RebasedIncrement, r: float,
                  params: HeatKernelParams | None = None,
                  quad: QuadratureConfig | None = None) -> float:
    """Mass of the source part on the ball of radius r around the endpoint.

    Computes integral_0^T of the Gaussian ball mass at center distance
    |eta(s)| and time s, over a geometric mesh graded toward s = 0 with
    adaptive panel bisection.
    """
    val, _ = singular_mass_with_error(eta, r, params, quad)
    return val


def singular_mass_with_error(eta: RebasedIncrement, r: float,
                             params: HeatKernelParams | None = None,
                             quad: QuadratureConfig | None = None):
    """Like :func:`singular_mass` but also returns the quadrature error estimate."""
    quad = quad or _DEFAULT_QUAD
    params = params or HeatKernelParams(dim=eta.dim, horizon=eta.s0)
    if eta.s0 < params.horizon * (1.0 - 1e-12):
        raise ValueError("rebased increment must cover [0, horizon]")
    if not r > 0:
        raise ValueError("radius must be positive")

    def integrand(s):
        return _ball_mass_vec(r, eta.norm(s), s, params.dim, quad)

    panels = geometric_panels(params.horizon, quad.n_panels, quad.panel_ratio)
    return integrate_adaptive(integrand, panels, quad.gauss_order, quad.rel_tol)


def source_density(x, traj: Trajectory, horizon: float | None = None,
                   quad: QuadratureConfig | None = None) -> float:
    """Pointwise value of the source part F at (x, horizon).

    F(x, T) = integral_0^T G(x, xi(t), T - t) dt, by graded-mesh quadrature
    in the backward time s = T - t.  Raises AtSingularPointError when x
    coincides with the singular point xi(T).
    """
    quad = quad or _DEFAULT_QUAD
    T = traj.horizon if horizon is None else float(horizon)
    if not 0 < T <= traj.horizon * (1.0 + 1e-12):
        raise ValueError(f"horizon must lie in (0, {traj.horizon}]")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dim = traj.dim
    if np.linalg.norm(x - traj.eval(T)) == 0.0:
        raise AtSingularPointError("F is singular exactly at the singular point")

    def integrand(s):
        pos = traj.eval(np.clip(T - s, 0.0, traj.horizon))
        sq = np.sum((x - pos) ** 2, axis=-1)
        return np.exp(-0.5 * dim * np.log(4.0 * math.pi * s) - sq / (4.0 * s))

    panels = geometric_panels(T, quad.n_panels, quad.panel_ratio)
    val, _ = integrate_adaptive(integrand, panels, quad.gauss_order, quad.rel_tol)
    return val


@dataclass(frozen=True)
class ConstantData:
    """Initial data u0 = value > 0 everywhere."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("constant initial data must be positive")


@dataclass(frozen=True)
class GaussianBumpData:
    """Initial data u0(y) = amplitude * exp(-|y - center|^2 / (2 width^2))."""

    amplitude: float
    width: float
    center: np.ndarray

    def __post_init__(self):
        if not (self.amplitude > 0 and self.width > 0):
            raise ValueError("amplitude and width must be positive")
        object.__setattr__(self, "center",
                           np.atleast_1d(np.asarray(self.center, dtype=float)))


def background_mass(u0, r: float, horizon: float, center,
                    quad: QuadratureConfig | None = None) -> float:
    """Mass of the background part (heat evolution of u0) on B_r(center) at time T.

    Constant data integrates exactly to value * omega_N * r^N because the
    heat semigroup preserves constants.  A Gaussian bump evolves to another
    Gaussian (variances add), whose ball mass is a quadrature.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dim = len(center)
    if not r > 0:
        raise ValueError("radius must be positive")
    if isinstance(u0, ConstantData):
        return u0.value * unit_ball_volume(dim) * r**dim
    if isinstance(u0, GaussianBumpData):
        if len(u0.center) != dim:
            raise ValueError("bump center and ball center dimensions differ")
        v = u0.width**2 + 2.0 * horizon  # per-axis variance after evolution
        dist = float(np.linalg.norm(center - u0.center))
        prefactor = u0.amplitude * (2.0 * math.pi * u0.width**2) ** (dim / 2.0)
        return prefactor * gaussian_ball_mass(r, dist, v / 2.0, dim, quad)
    raise UnsupportedInitialDataError(f"unsupported initial data: {type(u0).__name__}")


def _background_density(u0, x: np.ndarray, t: float, dim: int):
    """Heat evolution of the initial data, evaluated pointwise."""
    if isinstance(u0, ConstantData):
        return np.full(x.shape[:-1], u0.value)
    if isinstance(u0, GaussianBumpData):
        v = u0.width**2 + 2.0 * t
        sq = np.sum((x - u0.center) ** 2, axis=-1)
        return u0.amplitude * (u0.width**2 / v) ** (dim / 2.0) * np.exp(-sq / (2.0 * v))
    raise UnsupportedInitialDataError(f"unsupported initial data: {type(u0).__name__}")


@dataclass(frozen=True)
class BallMassCurve:
    """Per-radius mass of the total solution and its two parts."""

    radii: np.ndarray
    m_sing: np.ndarray
    m_bg: np.ndarray
    err_est: np.ndarray
    s0: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("radii", "m_sing", "m_bg", "err_est"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.diff(self.radii) >= 0):
            raise ValueError("radii must be strictly decreasing")
        if np.any(self.m_sing < 0) or np.any(self.m_bg < 0):
            raise ValueError("masses must be nonnegative")

    @property
    def m_total(self) -> np.ndarray:
        return self.m_sing + self.m_bg


def total_mass_curve(traj: Trajectory, u0, radii,
                     params: HeatKernelParams | None = None,
                     quad: QuadratureConfig | None = None,
                     metadata: dict | None = None) -> BallMassCurve:
    """Singular + background masses over a decreasing radius grid."""
    radii = np.asarray(getattr(radii, "radii", radii), dtype=float)
    params = params or HeatKernelParams(dim=traj.dim, horizon=traj.horizon)
    center = traj.eval(params.horizon)
    eta = traj.rebase(params.horizon)
    m_sing = np.empty_like(radii)
    m_bg = np.empty_like(radii)
    err = np.empty_like(radii)
    for i, r in enumerate(radii):
        m_sing[i], err[i] = singular_mass_with_error(eta, r, params, quad)
        m_bg[i] = background_mass(u0, r, params.horizon, center, quad)
    return BallMassCurve(radii=radii, m_sing=m_sing, m_bg=m_bg, err_est=err,
                         s0=params.horizon, metadata=metadata or {})


@dataclass(frozen=True)
class MassUpperSplit:
    """Diagnostic upper-envelope split of the singular mass.

    ``beyond_s0`` bounds the contribution from s > s0 by the plain kernel,
    ``far_field`` the s in [0, s0] with |eta(s)| > 2r, and ``near_field``
    is the exact contribution of the occupation set of radius 2r.  The sum
    dominates the singular mass.
    """

    beyond_s0: float
    far_field: float
    near_field: float

    @property
    def total(self) -> float:
        return self.beyond_s0 + self.far_field + self.near_field


def mass_upper_split(eta: RebasedIncrement, r: float, s0: float,
                     params: HeatKernelParams | None = None,
                     quad: QuadratureConfig | None = None) -> MassUpperSplit:
    """Three-term upper envelope of the singular mass (diagnostic only)."""
    quad = quad or _DEFAULT_QUAD
    params = params or HeatKernelParams(dim=eta.dim, horizon=eta.s0)
    dim, T = params.dim, params.horizon
    if not 0 < s0 <= T:
        raise ValueError("s0 must lie in (0, horizon]")
    omega = unit_ball_volume(dim)
    if s0 >= T:
        beyond = 0.0
    elif dim == 2:
        beyond = omega * r**dim * (4.0 * math.pi) ** (-1.0) * math.log(T / s0)
    else:
        p = 1.0 - dim / 2.0
        beyond = omega * r**dim * (4.0 * math.pi) ** (-dim / 2.0) \
            * (s0**p - T**p) / (dim / 2.0 - 1.0)
    # Fixed-mesh sums: the indicator makes the integrands discontinuous, so
    # adaptive refinement is not meaningful here.
    nodes, wts = panel_nodes(geometric_panels(s0, quad.n_panels, quad.panel_ratio),
                             quad.gauss_order)
    norms = eta.norm(nodes)
    far = norms > 2.0 * r
    far_vals = omega * r**dim * (4.0 * math.pi * nodes[far]) ** (-dim / 2.0) \
        * np.exp(-norms[far] ** 2 / (16.0 * nodes[far]))
    far_field = float(wts[far] @ far_vals)
    near = ~far
    near_field = float(wts[near] @ _ball_mass_vec(r, norms[near], nodes[near], dim, quad))
    return MassUpperSplit(beyond_s0=beyond, far_field=far_field, near_field=near_field)


@dataclass(frozen=True)
class BumpTestFunction:
    """Tensor product of smooth compactly supported bumps with exact derivatives.

    phi(x, t) = amplitude * B((t - tc)/tw) * prod_i B((x_i - ci)/wi), with
    B(z) = exp(-1/(1 - z^2)) on |z| < 1.  Time derivative and Laplacian are
    hard-coded so the weak-form residual carries no differentiation error.
    """

    space_center: np.ndarray
    space_width: np.ndarray
    time_center: float
    time_width: float
    amplitude: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.space_center, dtype=float))
        w = np.broadcast_to(np.asarray(self.space_width, dtype=float), c.shape).copy()
        if np.any(w <= 0) or self.time_width <= 0:
            raise ValueError("widths must be positive")
        object.__setattr__(self, "space_center", c)
        object.__setattr__(self, "space_width", w)

    @property
    def dim(self) -> int:
        return len(self.space_center)

    @property
    def time_support(self):
        return (self.time_center - self.time_width, self.time_center + self.time_width)

    @property
    def space_support(self):
        return (self.space_center - self.space_width, self.space_center + self.space_width)

    @staticmethod
    def _bump(z):
        out = np.zeros_like(z)
        inside = np.abs(z) < 1.0
        zi = z[inside]
        out[inside] = np.exp(-1.0 / (1.0 - zi**2))
        return out

    @staticmethod
    def _bump_d1(z):
        out = np.zeros_like(z)
        inside = np.abs(z) < 1.0
        zi = z[inside]
        q = 1.0 - zi**2
        out[inside] = np.exp(-1.0 / q) * (-2.0 * zi / q**2)
        return out

    @staticmethod
    def _bump_d2(z):
        out = np.zeros_like(z)
        inside = np.abs(z) < 1.0
        zi = z[inside]
        q = 1.0 - zi**2
        out[inside] = np.exp(-1.0 / q) * (4.0 * zi**2 / q**4 - 2.0 / q**2
                                          - 8.0 * zi**2 / q**3)
        return out

    def _parts(self, x, t):
        zx = (x - self.space_center) / self.space_width
        zt = (np.asarray(t, dtype=float) - self.time_center) / self.time_width
        bx = self._bump(zx)
        return zx, zt, bx, self._bump(zt)

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        _, _, bx, bt = self._parts(x, t)
        return self.amplitude * bt * np.prod(bx, axis=-1)

    def dt(self, x, t):
        x = np.asarray(x, dtype=float)
        zx, zt, bx, _ = self._parts(x, t)
        return self.amplitude * self._bump_d1(zt) / self.time_width * np.prod(bx, axis=-1)

    def laplacian(self, x, t):
        x = np.asarray(x, dtype=float)
        zx, zt, bx, bt = self._parts(x, t)
        d2 = self._bump_d2(zx) / self.space_width**2
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bx > 0.0, d2 / np.where(bx > 0.0, bx, 1.0), 0.0)
        prod_all = np.prod(bx, axis=-1)
        return self.amplitude * bt * prod_all * np.sum(ratio, axis=-1)

    def heat_adjoint(self, x, t):
        """phi_t + Laplace(phi), the integrand weight of the weak form."""
        return self.dt(x, t) + self.laplacian(x, t)


def _space_time_nodes(phi: BumpTestFunction, order: int = 10, panels: int = 4):
    """Tensor quadrature nodes over the support of phi."""
    t_lo, t_hi = phi.time_support
    t_nodes, t_w = panel_nodes(np.linspace(t_lo, t_hi, panels + 1), order)
    axes = []
    for i in range(phi.dim):
        lo = phi.space_center[i] - phi.space_width[i]
        hi = phi.space_center[i] + phi.space_width[i]
        axes.append(panel_nodes(np.linspace(lo, hi, panels + 1), order))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(len(x))
    for i, (_, wi) in enumerate(axes):
        shape = [1] * phi.dim
        shape[i] = -1
        w = w * np.broadcast_to(wi.reshape(shape),
                                [len(a[0]) for a in axes]).ravel()
    return t_nodes, t_w, x, w


def weak_residual(traj: Trajectory | None, u0, phi: BumpTestFunction,
                  part: str = "background",
                  quad: QuadratureConfig | None = None) -> float:
    """Quadrature of the weak-form integral of u against phi_t + Laplace(phi).

    For ``part="background"`` u is the heat evolution of the initial data,
    a classical solution, so the result is ~0.  For ``part="source"`` u is
    the moving-source part F and the result approximates
    -integral phi(xi(t), t) dt.  The source integral is evaluated in
    Duhamel form: the spatial integral against the heat kernel becomes
    Gaussian smoothing of the weight, so no singular integrand ever appears.
    """
    quad = quad or _DEFAULT_QUAD
    if part == "background":
        dim = phi.dim
        t_nodes, t_w, x, w = _space_time_nodes(phi)
        total = 0.0
        for tn, tw in zip(t_nodes, t_w):
            u = _background_density(u0, x, tn, dim)
            total += tw * float(w @ (u * phi.heat_adjoint(x, tn)))
        return total
    if part == "source":
        if traj is None:
            raise ValueError("source part needs a trajectory")
        return _source_weak_integral(traj, phi, quad, absolute=False)
    raise ValueError(f"unknown part {part!r}; use 'background' or 'source'")


def weak_form_scale(traj: Trajectory | None, u0, phi: BumpTestFunction,
                    part: str = "background",
                    quad: QuadratureConfig | None = None) -> float:
    """Size of the weak-form integrand, integral of |u| (|phi_t| + |Laplace(phi)|).

    A natural yardstick for the residual: residual / scale measures the
    cancellation achieved by the identity.
    """
    quad = quad or _DEFAULT_QUAD
    if part == "background":
        dim = phi.dim
        t_nodes, t_w, x, w = _space_time_nodes(phi)
        total = 0.0
        for tn, tw in zip(t_nodes, t_w):
            u = _background_density(u0, x, tn, dim)
            weight = np.abs(phi.dt(x, tn)) + np.abs(phi.laplacian(x, tn))
            total += tw * float(w @ (u * weight))
        return total
    if part == "source":
        if traj is None:
            raise ValueError("source part needs a trajectory")
        return _source_weak_integral(traj, phi, quad, absolute=True)
    raise ValueError(f"unknown part {part!r}; use 'background' or 'source'")


def _source_weak_integral(traj: Trajectory, phi: BumpTestFunction,
                          quad: QuadratureConfig, absolute: bool) -> float:
    """integral of F * g over space-time, with g = phi_t + Laplace(phi).

    Fubini over the Duhamel representation turns this into

        integral_t integral_0^t E[ g(xi(t-u) + sqrt(2u) Z, t) ] du dt,

    evaluated with Gauss-Hermite smoothing in space, a geometric mesh in u,
    and Gauss-Legendre in t over the time support of phi.
    """
    dim = traj.dim
    gh_x, gh_w = gauss_hermite_e(10)
    grids = np.meshgrid(*([gh_x] * dim), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=-1)
    zw = np.ones(len(z))
    for i in range(dim):
        shape = [1] * dim
        shape[i] = -1
        zw = zw * np.broadcast_to(gh_w.reshape(shape), [len(gh_x)] * dim).ravel()

    t_lo, t_hi = phi.time_support
    t_lo = max(t_lo, 0.0)
    t_hi = min(t_hi, traj.horizon)
    if t_hi <= t_lo:
        return 0.0
    t_nodes, t_w = panel_nodes(np.linspace(t_lo, t_hi, 5), 8)

    total = 0.0
    for tn, tw in zip(t_nodes, t_w):
        u_nodes, u_w = panel_nodes(geometric_panels(tn, 40, 0.5), 4)
        centers = traj.eval(np.clip(tn - u_nodes, 0.0, traj.horizon))
        inner = np.empty(len(u_nodes))
        for k in range(len(u_nodes)):
            pts = centers[k] + math.sqrt(2.0 * u_nodes[k]) * z
            if absolute:
                g = np.abs(phi.dt(pts, tn)) + np.abs(phi.laplacian(pts, tn))
            else:
                g = phi.heat_adjoint(pts, tn)
            inner[k] = float(zw @ g)
        total += tw * float(u_w @ inner)
    return total
