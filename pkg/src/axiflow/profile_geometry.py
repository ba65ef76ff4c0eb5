"""Meridian-profile geometry for convex surfaces of revolution.

A surface is represented by the graph u(x) >= 0 of its meridian over an
interval (a, b); rotating the graph about the x-axis gives the surface.
All pointwise quantities (principal curvatures, normal speed, enclosed
volume, diameter) are computed from the discrete profile here.  The two
endpoint nodes carry u = 0 and are never differentiated in this chart:
the graph parametrization degenerates there and the pole charts own them.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import NonConcave, NonPositiveProfile, NotFound

# A node fails concavity only if its second divided difference exceeds
# +CONCAVITY_TOL * max|u| / (b-a)^2 (roundoff-safe strict test).
CONCAVITY_TOL = 1e-8
# Relative spacing deviation below which a grid counts as uniform and the
# volume quadrature switches from trapezoid to Simpson.
UNIFORM_REL_TOL = 1e-12
# Tolerance for the evenness assertion on curves flagged even.
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class FlowParams:
    """Exponents of the contraction speed kappa_rad^alpha1 * kappa_axi^alpha2.

    ``beta`` is always the derived combination (alpha1 + 3*alpha2 - 1)/2
    that appears in both scalar flow equations; it is never set
    independently.
    """

    alpha1: float
    alpha2: float

    def __post_init__(self):
        if not (self.alpha1 > 0.0):
            raise ValueError(f"alpha1 must be positive, got {self.alpha1}")
        if not (self.alpha2 > 0.0):
            raise ValueError(f"alpha2 must be positive, got {self.alpha2}")

    @property
    def beta(self):
        return 0.5 * (self.alpha1 + 3.0 * self.alpha2 - 1.0)

    @property
    def speed_degree(self):
        """Homogeneity degree alpha1 + alpha2 of the speed on spheres."""
        return self.alpha1 + self.alpha2


@dataclass(frozen=True)
class ProfileCurve:
    """Discrete meridian profile at one instant.

    nodes   strictly increasing axis positions, nodes[0] = a, nodes[-1] = b
    values  heights u_i >= 0; exactly zero at both end nodes, positive inside
    t       time stamp
    even    if True the curve is asserted symmetric about (a+b)/2
    """

    t: float
    nodes: np.ndarray
    values: np.ndarray
    even: bool = False

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        values = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if nodes.size < 2:
            raise ValueError("a profile needs at least its two endpoint nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("nodes must be strictly increasing")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise ValueError("u must vanish exactly at the endpoint nodes")
        if np.any(values[1:-1] <= 0.0):
            raise NonPositiveProfile("interior profile heights must be positive")
        if self.even:
            defect = evenness_defect(self)
            scale = max(float(values.max()), 1e-300)
            if defect > SYMMETRY_TOL * scale:
                raise ValueError(
                    f"curve flagged even but defect {defect:.3e} exceeds "
                    f"{SYMMETRY_TOL:.1e} * {scale:.3e}"
                )

    @property
    def a(self):
        return float(self.nodes[0])

    @property
    def b(self):
        return float(self.nodes[-1])

    @property
    def u_max(self):
        return float(self.values.max())

    def concavity_scale(self):
        """Magnitude scale for second-difference tolerances."""
        width = self.b - self.a
        return float(np.abs(self.values).max()) / (width * width)


@dataclass(frozen=True)
class CurvatureField:
    """Per-interior-node curvatures and normal speed of a profile."""

    nodes: np.ndarray       # interior axis positions
    kappa_rad: np.ndarray
    kappa_axi: np.ndarray
    speed: np.ndarray       # kappa_rad^alpha1 * kappa_axi^alpha2

    def __post_init__(self):
        n = self.nodes.shape
        if not (self.kappa_rad.shape == self.kappa_axi.shape == self.speed.shape == n):
            raise ValueError("curvature field arrays must share one shape")


def interior_derivatives(x, y):
    """First and second derivatives at interior nodes by three-point
    divided differences on a possibly nonuniform grid.

    The groupings below are chosen so a mirrored grid produces bitwise
    mirrored results, which is what keeps even data exactly even under
    the symmetric scheme.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h_l = x[1:-1] - x[:-2]
    h_r = x[2:] - x[1:-1]
    d_l = (y[1:-1] - y[:-2]) / h_l
    d_r = (y[2:] - y[1:-1]) / h_r
    span = h_l + h_r
    dy = (d_r * h_l + d_l * h_r) / span
    d2y = 2.0 * (d_r - d_l) / span
    return dy, d2y


def _interior_state(curve):
    """Interior heights and derivatives; raises on broken preconditions."""
    if curve.nodes.size < 5:
        raise ValueError("need at least 5 nodes to difference the interior")
    u = curve.values[1:-1]
    if np.any(u <= 0.0):
        raise NonPositiveProfile("interior profile heights must be positive")
    u_x, u_xx = interior_derivatives(curve.nodes, curve.values)
    tol = CONCAVITY_TOL * curve.concavity_scale()
    if np.any(u_xx > tol):
        worst = float(u_xx.max())
        raise NonConcave(
            f"second difference {worst:.3e} exceeds concavity tolerance {tol:.3e}"
        )
    return u, u_x, u_xx


def curvatures_at(curve, params):
    """Principal curvatures and normal speed at the interior nodes.

    kappa_rad = 1 / (u sqrt(1+u_x^2)),  kappa_axi = -u_xx / (1+u_x^2)^(3/2).
    Endpoint nodes are excluded; the pole charts handle them.
    """
    u, u_x, u_xx = _interior_state(curve)
    w = 1.0 + u_x * u_x
    kappa_rad = 1.0 / (u * np.sqrt(w))
    # within the concavity tolerance a tiny positive u_xx is allowed; clamp
    # so fractional powers stay defined
    kappa_axi = np.maximum(-u_xx, 0.0) / w**1.5
    speed = kappa_rad**params.alpha1 * kappa_axi**params.alpha2
    return CurvatureField(
        nodes=curve.nodes[1:-1].copy(),
        kappa_rad=kappa_rad,
        kappa_axi=kappa_axi,
        speed=speed,
    )


def speed_field(curve, params):
    """Graph velocity u_t = -(-u_xx)^a2 / (u^a1 (1+u_x^2)^beta) per interior node.

    Equals -sqrt(1+u_x^2) * kappa_rad^a1 * kappa_axi^a2 up to roundoff; the
    two forms are the same identity written in graph and normal coordinates.
    """
    u, u_x, u_xx = _interior_state(curve)
    w = 1.0 + u_x * u_x
    neg_uxx = np.maximum(-u_xx, 0.0)
    return -(neg_uxx**params.alpha2) / (u**params.alpha1 * w**params.beta)


def volume(curve):
    """Enclosed volume V = pi * integral of u^2 dx.

    Composite Simpson when the grid is uniform to within UNIFORM_REL_TOL
    relative spacing, trapezoid otherwise (second-order in both cases).
    """
    x = curve.nodes
    f = curve.values * curve.values
    h = np.diff(x)
    mean_h = float(h.mean())
    if np.all(np.abs(h - mean_h) <= UNIFORM_REL_TOL * mean_h):
        return float(np.pi * simpson(f, x=x))
    return float(np.pi * np.trapezoid(f, x))


def diameter(curve):
    """Max Euclidean distance between meridian boundary points (x_i, +-u_i).

    Exact over the grid by a quadratic scan.  The maximum over all pairs is
    always realized between a point of the upper curve and one of the lower
    (reflected) curve, so scanning upper x lower suffices; this dominates
    both the axis chord b-a and the vertical chord 2 max u.
    """
    x = curve.nodes
    u = curve.values
    dx = x[:, None] - x[None, :]
    s = u[:, None] + u[None, :]
    return float(np.sqrt((dx * dx + s * s).max()))


def evenness_defect(curve):
    """Max over interior nodes of |u(p+s) - u(p-s)| with p the midpoint.

    Reflected points are evaluated by monotone-cubic interpolation; data
    that is symmetric node-for-node therefore reports exactly zero.
    """
    x = curve.nodes
    u = curve.values
    if x.size < 3:
        return 0.0
    p = 0.5 * (x[0] + x[-1])
    reflected = np.clip(2.0 * p - x[1:-1], x[0], x[-1])
    # fast exact path: on a mirror-symmetric grid the reflected points are
    # the mirrored nodes themselves
    mirrored = x[::-1][1:-1]
    if np.array_equal(reflected, mirrored):
        u_ref = u[::-1][1:-1]
    else:
        u_ref = PchipInterpolator(x, u)(reflected)
    return float(np.abs(u[1:-1] - u_ref).max())


def mean_value_point(curve):
    """Smallest x in (a, b) with u^2(x) = V / (pi (b-a)).

    The mean-value level always has a crossing for continuous positive
    profiles; the leftmost one is returned so outputs are reproducible
    (even profiles admit two symmetric solutions).
    """
    x = curve.nodes
    u2 = curve.values * curve.values
    v = volume(curve)
    if v <= 0.0:
        raise NotFound("profile volume is not positive")
    target = v / (np.pi * (curve.b - curve.a))
    above = np.nonzero(u2 >= target)[0]
    if above.size == 0:
        raise NotFound("no node reaches the mean-value level")
    k = int(above[0])
    if k == 0:
        raise NotFound("mean-value level crossed at the left endpoint")
    interp = PchipInterpolator(x, u2)
    root = brentq(
        lambda s: float(interp(s)) - target, x[k - 1], x[k],
        xtol=1e-14 * (curve.b - curve.a), rtol=8.881784197001252e-16,
    )
    return float(root)
