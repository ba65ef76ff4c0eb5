"""Inverted-graph charts regularizing the poles.

Near a tip the graph u(x) behaves like sqrt(distance) and its evolution
equation degenerates, so the surface is re-parametrized there as the
graph v(y) of axial offset against radial distance y from the axis:
x = tip + v(y) at the left pole, x = tip - v(y) at the right.  v is even
in y, has v(0) = 0 at the tip, and is smooth and convex wherever the
body is strictly convex, so plain centered differences work.

The transversal second derivative needed by the curvature formulas is
recovered from axisymmetry: v(y, z) = w(sqrt(y^2+z^2)) gives
v_zz(y, 0) = v_y / y exactly, with the removable limit v_yy(0) at the
tip itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegenerateChart, EmptyOverlap, NonMonotoneCap
from .profile_geometry import (
    CONCAVITY_TOL,
    SYMMETRY_TOL,
    curvatures_at,
    interior_derivatives,
)

# |y| below this fraction of the chart width uses the series limit of
# v_y / y instead of the direct quotient (removable 0/0).
AXIS_SERIES_FRAC = 1e-6


@dataclass(frozen=True)
class PoleChart:
    """Inverted-graph sample of the surface around one pole.

    pole     'left' or 'right'
    t        time stamp
    c        chart half-width; ynodes span [-c, c] and contain 0
    ynodes   symmetric strictly increasing radial offsets
    vvalues  axial offsets from the pole tangent plane, v(0) = 0
    """

    pole: str
    t: float
    c: float
    ynodes: np.ndarray
    vvalues: np.ndarray

    def __post_init__(self):
        if self.pole not in ("left", "right"):
            raise ValueError("pole must be 'left' or 'right'")
        y = np.ascontiguousarray(self.ynodes, dtype=float)
        v = np.ascontiguousarray(self.vvalues, dtype=float)
        object.__setattr__(self, "ynodes", y)
        object.__setattr__(self, "vvalues", v)
        if y.ndim != 1 or y.shape != v.shape or y.size < 5:
            raise ValueError("chart needs matching 1-d arrays of >= 5 nodes")
        if not np.all(np.diff(y) > 0.0):
            raise ValueError("ynodes must be strictly increasing")
        if not (self.c > 0.0) or abs(y[0] + self.c) > 1e-12 * self.c or abs(
            y[-1] - self.c
        ) > 1e-12 * self.c:
            raise ValueError("ynodes must span [-c, c]")
        j0 = int(np.argmin(np.abs(y)))
        if abs(y[j0]) > 1e-12 * self.c:
            raise ValueError("ynodes must contain 0")
        object.__setattr__(self, "_j0", j0)
        vscale = max(float(np.abs(v).max()), 1e-300)
        if abs(np.abs(y[::-1]) - np.abs(y)).max() > 1e-12 * self.c:
            raise ValueError("ynodes must be symmetric about 0")
        if np.abs(v - v[::-1]).max() > SYMMETRY_TOL * vscale:
            raise ValueError("v must be even in y")
        if v[j0] > float(v.min()) + SYMMETRY_TOL * vscale:
            raise ValueError("v(0) must be the chart minimum")
        # orthogonal axis crossing: centered slope at the tip
        slope0 = (v[j0 + 1] - v[j0 - 1]) / (y[j0 + 1] - y[j0 - 1])
        if abs(slope0) > SYMMETRY_TOL * max(1.0, vscale / self.c):
            raise ValueError(f"v_y(0) = {slope0:.3e} is not zero within tolerance")
        _, d2 = interior_derivatives(y, v)
        if np.any(d2 < -CONCAVITY_TOL * vscale / (self.c * self.c)):
            raise ValueError("v must be discretely convex")

    @property
    def tip_index(self):
        return self._j0


def chart_derivatives(chart):
    """(v_y, v_yy, v_zz) at interior chart nodes.

    v_zz uses the axisymmetric identity v_y / y off axis, the umbilic
    limit v_yy at y = 0, and the series value for |y| < 1e-6 c to avoid
    0/0 noise.  Raises DegenerateChart when v_yy <= 0 anywhere.
    """
    y = chart.ynodes
    v_y, v_yy = interior_derivatives(y, chart.vvalues)
    if np.any(v_yy <= 0.0):
        raise DegenerateChart("v_yy <= 0: the chart is not strictly convex")
    yi = y[1:-1]
    j0 = chart.tip_index - 1  # index into interior arrays
    v_yy0 = v_yy[j0]
    near_axis = np.abs(yi) < AXIS_SERIES_FRAC * chart.c
    safe_y = np.where(near_axis, 1.0, yi)
    v_zz = np.where(near_axis, v_yy0, v_y / safe_y)
    if np.any(v_zz <= 0.0):
        raise DegenerateChart("v_y / y <= 0: the chart is not strictly convex")
    return v_y, v_yy, v_zz


def pole_curvatures(chart):
    """(kappa_rad, kappa_axi) per interior chart node.

    kappa_rad = v_zz / sqrt(1+v_y^2), kappa_axi = v_yy / (1+v_y^2)^(3/2);
    at y = 0 the two agree exactly (umbilic tip).
    """
    v_y, v_yy, v_zz = chart_derivatives(chart)
    w = 1.0 + v_y * v_y
    kappa_rad = v_zz / np.sqrt(w)
    kappa_axi = v_yy / w**1.5
    return kappa_rad, kappa_axi


def pole_speed(chart, params):
    """Graph velocity v_t = v_zz^a1 v_yy^a2 / (1+v_y^2)^mu per interior node.

    At the tip this reduces to v_yy(0)^(a1+a2).
    """
    v_y, v_yy, v_zz = chart_derivatives(chart)
    w = 1.0 + v_y * v_y
    return v_zz**params.alpha1 * v_yy**params.alpha2 / w**params.beta


def build_pole_chart(curve, pole, width, n_half=None):
    """Invert the profile cap around one pole into a PoleChart.

    The cap inverse w = u^{-1} is built by monotone piecewise-cubic
    interpolation of axis position against squared height: the profile
    meets the axis like sqrt(distance), so axis position is a smooth,
    monotone, convex function of u^2 all the way into the tip, and the
    interpolant preserves that shape.  ``width`` must sit strictly below
    the cap maximum.
    """
    x = curve.nodes
    u = curve.values
    if pole == "left":
        xi = x - x[0]
        heights = u
    elif pole == "right":
        xi = (x[-1] - x)[::-1]
        heights = u[::-1]
    else:
        raise ValueError("pole must be 'left' or 'right'")

    k_top = int(np.argmax(heights))
    rising = np.nonzero(np.diff(heights[: k_top + 1]) <= 0.0)[0]
    k_cap = k_top if rising.size == 0 else int(rising[0])
    if heights[k_cap] <= width:
        raise NonMonotoneCap(
            f"cap is monotone only up to height {heights[k_cap]:.6g}, "
            f"below the requested width {width:.6g}"
        )
    stop = int(np.searchsorted(heights[: k_cap + 1], width, side="right"))
    stop = min(k_cap, stop)
    cap_h = heights[: stop + 1]
    cap_xi = xi[: stop + 1]

    if n_half is None:
        n_half = max(16, stop)
    yh = width * np.arange(1, n_half + 1, dtype=float) / n_half
    ynodes = np.concatenate([-yh[::-1], [0.0], yh])
    inverse = PchipInterpolator(cap_h * cap_h, cap_xi)
    vh = inverse(yh * yh)
    vvalues = np.concatenate([vh[::-1], [0.0], vh])
    return PoleChart(pole=pole, t=curve.t, c=width, ynodes=ynodes, vvalues=vvalues)


def chart_axis_positions(chart, tip):
    """Axis positions of the chart nodes given the tip's axis coordinate."""
    if chart.pole == "left":
        return tip + chart.vvalues
    return tip - chart.vvalues


def stitch_consistency(curve, chart, params, band=(0.9, 1.0)):
    """Max relative disagreement of (kappa_rad, kappa_axi, speed) between
    the two charts over the overlap annulus.

    The annulus is the set of chart nodes whose radius lies in
    band * chart width; these heights are covered reliably by both
    parametrizations.  Used as a runtime diagnostic and test assertion.
    """
    if abs(curve.t - chart.t) > 1e-12 * max(1.0, abs(curve.t)):
        raise EmptyOverlap(
            f"curve time {curve.t!r} and chart time {chart.t!r} differ"
        )
    y = chart.ynodes[1:-1]
    mask = (np.abs(y) >= band[0] * chart.c) & (np.abs(y) <= band[1] * chart.c)
    if not mask.any():
        raise EmptyOverlap("no chart nodes inside the comparison band")

    kr_c, ka_c = pole_curvatures(chart)
    w = 1.0 + chart_derivatives(chart)[0] ** 2
    sp_c = kr_c**params.alpha1 * ka_c**params.alpha2

    tip = curve.a if chart.pole == "left" else curve.b
    x_pts = chart_axis_positions(chart, tip)[1:-1][mask]

    fld = curvatures_at(curve, params)
    x_u = fld.nodes
    inside = (x_pts >= x_u[0]) & (x_pts <= x_u[-1])
    if not inside.any():
        raise EmptyOverlap("chart band lies outside the profile interior")
    x_pts = x_pts[inside]

    defect = 0.0
    for chart_vals, u_vals in (
        (kr_c[mask][inside], fld.kappa_rad),
        (ka_c[mask][inside], fld.kappa_axi),
        (sp_c[mask][inside], fld.speed),
    ):
        u_interp = np.interp(x_pts, x_u, u_vals)
        denom = np.maximum(np.abs(chart_vals), np.abs(u_interp))
        denom = np.maximum(denom, 1e-300)
        defect = max(defect, float((np.abs(chart_vals - u_interp) / denom).max()))
    return defect
