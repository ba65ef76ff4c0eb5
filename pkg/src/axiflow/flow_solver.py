"""Time integration of the coupled graph/pole-chart representation.

The surface is advanced by explicit Euler steps of the two scalar flow
equations: the graph equation on the mid region, where u is bounded away
from zero, and the inverted-graph equation on a cap around each pole.
The step size comes from the linearized diffusion coefficients of both
equations (the classical explicit stability limit), the charts hand the
poles' motion to the interval endpoints, and the chart-owned profile
nodes are rebuilt from the charts after every step with a smooth blend
across the seam.

Internally the solver works on "frames": plain arrays in offset
coordinates about a fixed axis origin, with the grid offsets built
antisymmetric bitwise.  All kernel arithmetic is mirror-symmetric, so an
even initial profile stays even to machine precision for the entire run.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import minimize_scalar

from . import _kernel as K
from .errors import (
    ConvexityLost,
    DegenerateState,
    FitFailed,
    NonPositiveProfile,
    StitchBroken,
    TooFewNodes,
)
from .pole_chart import AXIS_SERIES_FRAC, PoleChart
from .profile_geometry import CONCAVITY_TOL, FlowParams, ProfileCurve
from .shapes import MESH_SIGMA, symmetric_offsets

# Fraction of u_max covered by each pole chart.  25% keeps the charts
# minimal but puts the seam where the graph chart's relative resolution
# is too coarse for the acceptance tolerances at 400 nodes; 40% moves the
# seam to heights where both charts are comfortably second-order accurate
# (measured seam disagreement ~5e-4 at 400 nodes) at a ~2x CFL cost.
CHART_FRAC = 0.40
# The chart-owned region ends at BLEND_FRAC * c; the top of the chart is
# the blend band where evolved and reconstructed values are mixed with a
# smooth partition weight.  A 10% band concentrates the small disagreement
# between the two representations into too few nodes and shows up as a
# curvature kink ~2e-3 on sphere runs; 20% with a C^2 weight keeps the
# kink below ~6e-4.
BLEND_FRAC = 0.80
# Default chart half-resolution as a fraction of the profile node count.
# The cap reconstruction is piecewise cubic in the chart samples, so its
# stencil-switch error jumps scale like the fourth power of the chart
# spacing; N/5 keeps them below the graph chart's own truncation error.
CHART_NODE_FRAC = 0.20


@dataclass(frozen=True)
class StopCriteria:
    """Stopping thresholds for a run."""

    diameter_floor: float
    volume_floor: float
    t_max: float

    @classmethod
    def defaults_for(cls, state):
        """Spec defaults: 1% of initial diameter, 1e-6 of initial volume,
        ten times the circumscribed-sphere extinction bound."""
        from .profile_geometry import diameter, volume

        diam0 = diameter(state.curve)
        vol0 = volume(state.curve)
        p = state.params.speed_degree
        radius = 0.5 * diam0
        return cls(
            diameter_floor=0.01 * diam0,
            volume_floor=1e-6 * vol0,
            t_max=10.0 * radius ** (p + 1.0) / (p + 1.0),
        )


@dataclass(frozen=True)
class RunSettings:
    """Numerical knobs of a run; defaults match the acceptance setup."""

    cfl: float = 0.5
    record_every: int = 100
    regrid_every: int | None = None     # optional step-count trigger
    regrid_shrink: float = 0.98         # regrid when (b-a) falls below this fraction
    snapshot_dt: float | None = None
    stitch_tol: float = 1e-2            # per-step seam-disagreement abort level
    parabolicity_floor: float = 0.0
    min_nodes: int = 10
    tip_guard: float = 0.35             # regrid when a tip eats this much of its gap
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must lie in (0, 1]")


@dataclass
class _Frame:
    """Mutable discretization state owned by the integrator."""

    p0: float
    d: np.ndarray          # node offsets about p0; d[0], d[-1] are the tips
    u: np.ndarray
    t: float
    even: bool
    params: FlowParams
    # charts (shared radius grid)
    c: float
    nh: int
    y: np.ndarray          # 2 nh + 1 radii, guards at +-c
    ss: np.ndarray         # nh + 1 squared radii from the tip outward
    dy: float
    vl: np.ndarray
    vr: np.ndarray
    # ownership plan
    lo: int
    hi: int
    nbl: int
    nbr: int
    wl: np.ndarray
    wr: np.ndarray
    hint_l: int
    hint_r: int
    abort_tol: float
    series_eps: float
    # node offsets as laid by the last full regrid; cap relays restore
    # this canonical relative layout instead of preserving the squeeze
    canon: np.ndarray = field(default=None, repr=False)
    cap_frac_l: np.ndarray = field(default=None, repr=False)
    cap_frac_r: np.ndarray = field(default=None, repr=False)
    # scratch buffers
    ut: np.ndarray = field(default=None, repr=False)
    etal: np.ndarray = field(default=None, repr=False)
    etar: np.ndarray = field(default=None, repr=False)
    # diagnostics from the latest step
    last_dmin: float = np.inf
    last_defect: float = 0.0

    def __post_init__(self):
        if self.ut is None:
            self.ut = np.empty(self.hi - self.lo)
        if self.etal is None:
            self.etal = np.empty(self.y.size - 2)
        if self.etar is None:
            self.etar = np.empty(self.y.size - 2)
        if self.canon is None:
            self.canon = self.d.copy()
        if self.cap_frac_l is None or self.cap_frac_r is None:
            self._canonical_cap_fractions()

    def _canonical_cap_fractions(self):
        g = self.canon
        span_l = g[self.lo] - g[0]
        self.cap_frac_l = (g[1 : self.lo] - g[0]) / span_l
        span_r = g[-1] - g[self.hi - 1]
        self.cap_frac_r = (g[-1] - g[self.hi : -1]) / span_r

    @property
    def n(self):
        return self.d.size

    @property
    def width(self):
        return float(self.d[-1] - self.d[0])


@dataclass(frozen=True)
class FlowState:
    """Composite representation of one surface at one instant."""

    curve: ProfileCurve
    left: PoleChart
    right: PoleChart
    params: FlowParams
    t: float
    frame: _Frame = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for chart, name in ((self.left, "left"), (self.right, "right")):
            if chart.pole != name:
                raise ValueError(f"{name} chart has pole={chart.pole!r}")
            if abs(chart.t - self.t) > 1e-12 * max(1.0, abs(self.t)):
                raise ValueError("chart and state time stamps differ")
            if not chart.c < self.curve.u_max:
                raise ValueError("chart width must sit below the profile maximum")
        if abs(self.curve.t - self.t) > 1e-12 * max(1.0, abs(self.t)):
            raise ValueError("curve and state time stamps differ")


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    volume: float
    diameter: float
    kr_min: float
    kr_max: float
    ka_min: float
    ka_max: float
    speed_max: float
    a: float
    b: float
    u_max: float
    uxx_min: float
    uxx_max: float
    min_diffusion: float
    evenness: float
    umbilic_defect: float   # max node |kappa_rad / kappa_axi - 1|


@dataclass(frozen=True)
class Snapshot:
    t: float
    curve: ProfileCurve


@dataclass
class Trajectory:
    """Time series of a run plus optional profile snapshots."""

    records: list
    snapshots: list
    stop_reason: str
    params: FlowParams

    def __post_init__(self):
        times = [r.t for r in self.records]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("record times must be strictly increasing")

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def times(self):
        return self.column("t")

    @property
    def volumes(self):
        return self.column("volume")


# ---------------------------------------------------------------------------
# frame construction


def _smoothstep(s):
    # quintic smootherstep: C^2 at both ends, so the partition weight does
    # not inject second-derivative jumps at the band edges
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def _plan_ownership(u, c):
    """Index ranges and blend weights for the chart/graph split.

    Nodes with height below BLEND_FRAC*c belong to the charts, heights
    above c to the graph equation, the band in between is blended.  The
    left and right scans mirror each other so even data yields an exactly
    symmetric plan.
    """
    n = u.size
    bl_lo = BLEND_FRAC * c
    bl_hi = c
    above_lo = u > bl_lo
    above_hi = u > bl_hi
    if not above_lo.any():
        raise TooFewNodes("no profile nodes above the chart blend band")
    lo = int(np.argmax(above_lo))
    hi = n - int(np.argmax(above_lo[::-1]))
    lo_hi = int(np.argmax(above_hi))
    hi_hi = n - int(np.argmax(above_hi[::-1]))
    nbl = lo_hi - lo
    nbr = hi - hi_hi
    if hi - lo < 5:
        raise TooFewNodes("fewer than 5 graph-evolved nodes between the caps")
    wl = _smoothstep((u[lo : lo + nbl] - bl_lo) / (bl_hi - bl_lo))
    wr = _smoothstep((u[hi - nbr : hi][::-1] - bl_lo) / (bl_hi - bl_lo))
    return lo, hi, nbl, nbr, wl, wr, lo_hi, hi_hi - 1


def _chart_half_from_samples(xi, s, c, nh):
    """Chart half profile v(y) on radii c*(1..nh)/nh from flank samples.

    xi, s are pole-local axis offsets and squared heights along one rising
    flank (starting at the tip).  Monotone cubic interpolation of xi
    against s preserves the flank's monotonicity and convexity.
    """
    keep = np.nonzero(np.diff(s) > 0.0)[0]
    stop = int(keep[-1]) + 2 if keep.size else 1
    s_m = s[:stop]
    xi_m = xi[:stop]
    if s_m[-1] <= c * c:
        raise TooFewNodes("flank samples do not reach the chart width")
    yh = c * np.arange(1, nh + 1, dtype=float) / nh
    vh = PchipInterpolator(s_m, xi_m)(yh * yh)
    return vh


def _assemble_side_samples(frame, side):
    """(xi, s) samples along one flank: tip, chart cap, then graph nodes."""
    d, u, nh, c = frame.d, frame.u, frame.nh, frame.c
    lo, hi = frame.lo, frame.hi
    yh = frame.y[nh + 1 : -1]
    cap_mask = yh <= BLEND_FRAC * c  # strictly inside the blend band
    if side == "left":
        xi_chart = frame.vl[nh + 1 : -1][cap_mask]
        k_top = lo + int(np.argmax(u[lo:hi]))
        xi_u = d[lo : k_top + 1] - d[0]
        s_u = u[lo : k_top + 1] ** 2
    else:
        xi_chart = frame.vr[nh + 1 : -1][cap_mask]
        k_top = hi - 1 - int(np.argmax(u[lo:hi][::-1]))
        xi_u = (d[-1] - d[k_top:hi])[::-1]
        s_u = (u[k_top:hi] ** 2)[::-1]
    s_chart = yh[cap_mask] ** 2
    xi = np.concatenate([[0.0], xi_chart, xi_u])
    s = np.concatenate([[0.0], s_chart, s_u])
    order = np.argsort(xi, kind="stable")
    xi = xi[order]
    s = s[order]
    good = np.concatenate([[True], np.diff(xi) > 1e-14 * max(xi[-1], 1e-300)])
    return xi[good], s[good]


def _frame_from_arrays(p0, d, u, t, even, params, c, vl_half, vr_half, nh):
    """Assemble a frame given offsets/heights and chart half profiles."""
    u_max = float(u.max())
    yh = c * np.arange(1, nh + 1, dtype=float) / nh
    y = np.concatenate([-yh[::-1], [0.0], yh])
    ss = np.concatenate([[0.0], yh * yh])
    vl = np.concatenate([vl_half[::-1], [0.0], vl_half])
    vr = np.concatenate([vr_half[::-1], [0.0], vr_half])
    lo, hi, nbl, nbr, wl, wr, hint_l, hint_r = _plan_ownership(u, c)
    width = float(d[-1] - d[0])
    scale = u_max / (width * width)
    return _Frame(
        p0=p0, d=d, u=u, t=t, even=even, params=params,
        c=c, nh=nh, y=y, ss=ss, dy=c / nh, vl=vl, vr=vr,
        lo=lo, hi=hi, nbl=nbl, nbr=nbr, wl=wl, wr=wr,
        hint_l=hint_l, hint_r=hint_r,
        abort_tol=CONCAVITY_TOL * scale,
        series_eps=AXIS_SERIES_FRAC * c,
    )


def _default_nh(n):
    return max(24, int(round(CHART_NODE_FRAC * n)))


def initial_state(curve, params, n_nodes=None, chart_frac=CHART_FRAC,
                  nh=None, sigma=MESH_SIGMA):
    """Build a FlowState from an initial profile.

    The profile is resampled onto the canonical tip-graded grid (cubic
    spline in squared height, which reproduces spheres and spheroids
    exactly) and the pole charts are built by inverting the caps.  Even
    inputs are symmetrized to machine precision so the exact-evenness
    guarantee of the scheme applies from step zero.
    """
    n = int(n_nodes or curve.nodes.size)
    if n < 10:
        raise TooFewNodes("need at least 10 nodes")
    nh = nh or _default_nh(n)
    p0 = 0.5 * (curve.a + curve.b)
    width = curve.b - curve.a
    d = width * symmetric_offsets(n, sigma)
    spline = CubicSpline(curve.nodes - p0, curve.values**2)
    u = np.sqrt(np.maximum(spline(d), 0.0))
    u[0] = 0.0
    u[-1] = 0.0
    if curve.even:
        u = 0.5 * (u + u[::-1])
    if np.any(u[1:-1] <= 0.0):
        raise NonPositiveProfile("resampled initial profile is not positive")

    c = chart_frac * float(u.max())
    xi_l = d - d[0]
    k_top = int(np.argmax(u))
    vl_half = _chart_half_from_samples(xi_l[: k_top + 1], u[: k_top + 1] ** 2, c, nh)
    if curve.even:
        vr_half = vl_half.copy()
    else:
        xi_r = (d[-1] - d)[::-1]
        s_r = (u**2)[::-1]
        k_top_r = int(np.argmax(s_r))
        vr_half = _chart_half_from_samples(xi_r[: k_top_r + 1], s_r[: k_top_r + 1], c, nh)

    frame = _frame_from_arrays(
        p0, d, u, curve.t, curve.even, params, c, vl_half, vr_half, nh,
    )
    return _materialize(frame)


def _materialize(frame):
    """Public FlowState view of a frame."""
    nodes = frame.p0 + frame.d
    curve = ProfileCurve(
        t=frame.t, nodes=nodes, values=frame.u.copy(), even=frame.even
    )
    left = PoleChart(
        pole="left", t=frame.t, c=frame.c,
        ynodes=frame.y.copy(), vvalues=frame.vl.copy(),
    )
    right = PoleChart(
        pole="right", t=frame.t, c=frame.c,
        ynodes=frame.y.copy(), vvalues=frame.vr.copy(),
    )
    return FlowState(
        curve=curve, left=left, right=right, params=frame.params,
        t=frame.t, frame=frame,
    )


def _frame_of(state):
    """The state's own frame, or one rebuilt from its public arrays."""
    if state.frame is not None:
        return state.frame
    curve = state.curve
    p0 = 0.5 * (curve.a + curve.b)
    d = curve.nodes - p0
    u = curve.values.copy()
    c = min(state.left.c, state.right.c)
    nh = _default_nh(d.size)
    yh = c * np.arange(1, nh + 1, dtype=float) / nh
    vl_half = PchipInterpolator(state.left.ynodes, state.left.vvalues)(yh)
    vr_half = PchipInterpolator(state.right.ynodes, state.right.vvalues)(yh)
    return _frame_from_arrays(
        p0, d, u, state.t, curve.even, state.params, c, vl_half, vr_half, nh,
    )


# ---------------------------------------------------------------------------
# stepping


_STATUS_ERRORS = {
    K.NONPOSITIVE_U: (NonPositiveProfile, "profile height hit zero in the graph chart"),
    K.CONVEXITY_LOST: (ConvexityLost, "second differences crossed the abort tolerance"),
    K.DEGENERATE_U: (DegenerateState, "flat arc with alpha2 < 1: diffusion undefined"),
    K.DEGENERATE_CHART: (DegenerateState, "pole chart lost convexity (v_yy <= 0)"),
    K.DEGENERATE_CHART_VZZ: (DegenerateState, "pole chart lost convexity (v_zz <= 0)"),
    K.TIP_CROSSED: (ConvexityLost, "a tip overran its first interior node"),
}


def _raise_status(status):
    exc, msg = _STATUS_ERRORS[status]
    raise exc(msg)


def _coeffs(frame):
    """Velocities of both equations; returns (stability dt, min diffusion,
    eta at both tips)."""
    p = frame.params
    st, stab_u, dmin_u = K.u_coeffs(
        frame.d, frame.u, frame.lo, frame.hi,
        p.alpha1, p.alpha2, p.beta, frame.abort_tol, frame.ut,
    )
    if st != K.OK:
        _raise_status(st)
    st, stab_l, dmin_l, eta0_l = K.chart_coeffs(
        frame.y, frame.vl, frame.nh, frame.dy,
        p.alpha1, p.alpha2, p.beta, frame.series_eps, frame.etal,
    )
    if st != K.OK:
        _raise_status(st)
    st, stab_r, dmin_r, eta0_r = K.chart_coeffs(
        frame.y, frame.vr, frame.nh, frame.dy,
        p.alpha1, p.alpha2, p.beta, frame.series_eps, frame.etar,
    )
    if st != K.OK:
        _raise_status(st)
    stab = min(stab_u, stab_l, stab_r)
    dmin = min(dmin_u, dmin_l, dmin_r)
    if not stab > 0.0:
        raise DegenerateState("no positive stable step size exists")
    return stab, dmin, eta0_l, eta0_r


def _advance(frame, dt, eta0_l, eta0_r, stitch_tol):
    """Apply one explicit Euler update with precomputed velocities."""
    K.apply_u(frame.u, frame.lo, frame.hi, frame.ut, dt)
    K.apply_chart(frame.vl, frame.etal, dt, eta0_l)
    K.apply_chart(frame.vr, frame.etar, dt, eta0_r)
    frame.d[0] += dt * eta0_l
    frame.d[-1] -= dt * eta0_r
    if not (frame.d[0] < frame.d[1] and frame.d[-2] < frame.d[-1]):
        raise ConvexityLost("a tip overran its first interior node")

    st, defect = K.reconstruct_caps(
        frame.d, frame.u, frame.n, frame.vl, frame.vr, frame.ss, frame.nh,
        frame.lo, frame.hi, frame.nbl, frame.nbr, frame.wl, frame.wr,
    )
    if st != K.OK:
        _raise_status(st)
    frame.last_defect = defect
    if defect > stitch_tol:
        raise StitchBroken(
            f"seam disagreement {defect:.3e} exceeded tolerance {stitch_tol:.1e}"
        )
    xi_l, frame.hint_l = K.donor_left(frame.d, frame.u, frame.hint_l, frame.c)
    xi_r, frame.hint_r = K.donor_right(frame.d, frame.u, frame.hint_r, frame.c)
    frame.vl[0] = xi_l
    frame.vl[-1] = xi_l
    frame.vr[0] = xi_r
    frame.vr[-1] = xi_r
    frame.t += dt


def _refresh_plan(frame):
    """Recompute the chart/graph ownership against the current heights.

    The blend weight is a continuous function of height with flat (C^2)
    ends, so nodes crossing the band boundaries enter and leave at weight
    exactly 0 or 1 and the refresh never jumps the evolved field; it just
    lets the band migrate up the index space as the surface sinks.
    """
    lo, hi, nbl, nbr, wl, wr, hint_l, hint_r = _plan_ownership(frame.u, frame.c)
    frame.lo, frame.hi = lo, hi
    frame.nbl, frame.nbr = nbl, nbr
    frame.wl, frame.wr = wl, wr
    frame.hint_l, frame.hint_r = hint_l, hint_r
    if frame.ut.size != hi - lo:
        frame.ut = np.empty(hi - lo)
    frame._canonical_cap_fractions()


def _relay_caps(frame):
    """Re-distribute the chart-owned cap nodes between the advanced tips
    and the first graph-evolved nodes.

    Cap values are rebuilt from the charts immediately, so this touches
    nothing the graph equation evolves; it exists so tip motion never
    forces a full resample of the evolved field.
    """
    _refresh_plan(frame)
    d = frame.d
    d[1 : frame.lo] = d[0] + frame.cap_frac_l * (d[frame.lo] - d[0])
    d[frame.hi : -1] = d[-1] - frame.cap_frac_r * (d[-1] - d[frame.hi - 1])
    st, _ = K.reconstruct_caps(
        frame.d, frame.u, frame.n, frame.vl, frame.vr, frame.ss, frame.nh,
        frame.lo, frame.hi, 0, 0, frame.wl, frame.wr,
    )
    if st != K.OK:
        _raise_status(st)


def stable_dt(state, cfl):
    """Largest stable explicit step scaled by ``cfl``.

    cfl * min over all nodes and charts of (local spacing)^2 / (2 D) with
    D the linearized diffusion coefficient of the governing equation in
    that chart.
    """
    if not (0.0 < cfl <= 1.0):
        raise ValueError("cfl must lie in (0, 1]")
    frame = _frame_of(state)
    stab, dmin, _, _ = _coeffs(frame)
    if dmin < 0.0:
        raise DegenerateState("negative diffusion coefficient")
    return cfl * stab

def parabolicity_monitor(state):
    """Minimum linearized diffusion coefficient over all nodes and charts."""
    frame = _frame_of(state)
    _, dmin, _, _ = _coeffs(frame)
    return dmin


def step(state, dt, stitch_tol=1e-2):
    """One explicit Euler step of size dt (dt must not exceed
    stable_dt(state, 1)); returns the advanced FlowState."""
    frame = _frame_of(state)
    frame = _copy_frame(frame)
    stab, _, eta0_l, eta0_r = _coeffs(frame)
    if dt > stab * (1.0 + 1e-9):
        raise ValueError(f"dt={dt:.3e} exceeds the stability limit {stab:.3e}")
    _advance(frame, dt, eta0_l, eta0_r, stitch_tol)
    worst = K.convexity_excess(frame.d, frame.u, frame.lo, frame.hi)
    if worst > frame.abort_tol:
        raise ConvexityLost(
            f"post-step second difference {worst:.3e} exceeds tolerance"
        )
    return _materialize(frame)


def _copy_frame(frame):
    new = replace(
        frame,
        d=frame.d.copy(), u=frame.u.copy(),
        vl=frame.vl.copy(), vr=frame.vr.copy(),
        wl=frame.wl, wr=frame.wr,
        ut=frame.ut.copy(), etal=frame.etal.copy(), etar=frame.etar.copy(),
    )
    return new


# ---------------------------------------------------------------------------
# regridding


def regrid(state, n_nodes=None, min_nodes=10, chart_frac=None, sigma=MESH_SIGMA):
    """Resample onto a fresh canonical grid on the current interval.

    The surface is reassembled from its authoritative pieces (graph nodes
    where the graph equation ruled, chart samples in the caps), squared
    heights are interpolated with a cubic spline, and both charts are
    rebuilt at the default width.  Raises TooFewNodes when the interval
    cannot hold ``min_nodes``.
    """
    frame = _frame_of(state)
    new = _regrid_frame(frame, n_nodes=n_nodes, min_nodes=min_nodes,
                        chart_frac=chart_frac, sigma=sigma)
    return _materialize(new)


def _regrid_frame(frame, n_nodes=None, min_nodes=10, chart_frac=None,
                  nh=None, sigma=MESH_SIGMA):
    n = int(n_nodes or frame.n)
    width = frame.width
    tip_scale = max(abs(frame.p0 + frame.d[0]), abs(frame.p0 + frame.d[-1]), 1e-30)
    if n < min_nodes:
        raise TooFewNodes(f"{n} nodes is below the minimum {min_nodes}")
    if width <= 1e3 * np.finfo(float).eps * tip_scale * min_nodes:
        raise TooFewNodes("interval too narrow to resolve at machine precision")
    nh = nh or _default_nh(n)
    chart_frac = chart_frac if chart_frac is not None else CHART_FRAC

    xi_l, s_l = _assemble_side_samples(frame, "left")
    xi_r, s_r = _assemble_side_samples(frame, "right")

    # full composite in left-tip coordinates for the height resample
    xi_full = np.concatenate([xi_l, (width - xi_r)[::-1]])
    s_full = np.concatenate([s_l, s_r[::-1]])
    order = np.argsort(xi_full, kind="stable")
    xi_full = xi_full[order]
    s_full = s_full[order]
    good = np.concatenate(
        [[True], np.diff(xi_full) > 1e-13 * width]
    )
    spline = CubicSpline(xi_full[good], s_full[good])

    dm = 0.5 * (frame.d[0] + frame.d[-1])
    d_new = dm + width * symmetric_offsets(n, sigma)
    d_new[0] = frame.d[0]
    d_new[-1] = frame.d[-1]
    if frame.even:
        half = n // 2
        s_eval = spline(d_new[: half + 1] - d_new[0])
        u_new = np.empty(n)
        u_new[: half + 1] = np.sqrt(np.maximum(s_eval, 0.0))
        u_new[n - half :] = u_new[:half][::-1]
    else:
        u_new = np.sqrt(np.maximum(spline(d_new - d_new[0]), 0.0))
    u_new[0] = 0.0
    u_new[-1] = 0.0
    if np.any(u_new[1:-1] <= 0.0):
        raise NonPositiveProfile("regridded profile lost positivity")

    c_new = chart_frac * float(u_new.max())
    vl_half = _chart_half_from_samples(xi_l, s_l, c_new, nh)
    if frame.even:
        vr_half = vl_half.copy()
    else:
        vr_half = _chart_half_from_samples(xi_r, s_r, c_new, nh)

    new = _frame_from_arrays(
        frame.p0, d_new, u_new, frame.t, frame.even, frame.params,
        c_new, vl_half, vr_half, nh,
    )
    return new


# ---------------------------------------------------------------------------
# observation


def _chart_observables(y, v, c, nh, a1, a2, beta, owned_only=True):
    """Vectorized curvatures/speed on interior chart nodes.

    With ``owned_only`` the samples are restricted to the chart-owned
    radii (|y| <= BLEND_FRAC c): the outer ring only exists to carry the
    seam boundary condition and its curvature carries donor jitter
    amplified by the chart spacing.
    """
    h_l = y[1:-1] - y[:-2]
    h_r = y[2:] - y[1:-1]
    d_l = (v[1:-1] - v[:-2]) / h_l
    d_r = (v[2:] - v[1:-1]) / h_r
    span = h_l + h_r
    vy = (d_r * h_l + d_l * h_r) / span
    vyy = 2.0 * (d_r - d_l) / span
    yi = y[1:-1]
    near = np.abs(yi) < AXIS_SERIES_FRAC * c
    vyy0 = vyy[nh - 1]
    vzz = np.where(near, vyy0, vy / np.where(near, 1.0, yi))
    w = 1.0 + vy * vy
    # observation must not raise; clamp transients so powers stay defined
    kr = np.maximum(vzz, 0.0) / np.sqrt(w)
    ka = np.maximum(vyy, 0.0) / w**1.5
    speed = kr**a1 * ka**a2
    if owned_only:
        keep = np.abs(yi) <= BLEND_FRAC * c
        return kr[keep], ka[keep], speed[keep]
    return kr, ka, speed


def _observe(frame):
    """TrajectoryRecord of the current frame."""
    p = frame.params
    d, u = frame.d, frame.u
    lo, hi = frame.lo, frame.hi
    h_l = d[lo:hi] - d[lo - 1 : hi - 1]
    h_r = d[lo + 1 : hi + 1] - d[lo:hi]
    d_l = (u[lo:hi] - u[lo - 1 : hi - 1]) / h_l
    d_r = (u[lo + 1 : hi + 1] - u[lo:hi]) / h_r
    span = h_l + h_r
    ux = (d_r * h_l + d_l * h_r) / span
    uxx = 2.0 * (d_r - d_l) / span
    w = 1.0 + ux * ux
    kr = 1.0 / (u[lo:hi] * np.sqrt(w))
    ka = np.maximum(-uxx, 0.0) / w**1.5
    speed = kr**p.alpha1 * ka**p.alpha2

    kr_all = [kr]
    ka_all = [ka]
    sp_all = [speed]
    for v in (frame.vl, frame.vr):
        ckr, cka, csp = _chart_observables(
            frame.y, v, frame.c, frame.nh, p.alpha1, p.alpha2, p.beta
        )
        kr_all.append(ckr)
        ka_all.append(cka)
        sp_all.append(csp)
    kr_all = np.concatenate(kr_all)
    ka_all = np.concatenate(ka_all)
    sp_all = np.concatenate(sp_all)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ka_all > 0.0, kr_all / np.maximum(ka_all, 1e-300), np.inf)

    vol = float(np.pi * np.trapezoid(u * u, d))
    diam = float(K.diameter_scan(d, u))
    even_defect = float(np.abs(u - u[::-1]).max())
    return TrajectoryRecord(
        t=frame.t,
        volume=vol,
        diameter=diam,
        kr_min=float(kr_all.min()),
        kr_max=float(kr_all.max()),
        ka_min=float(ka_all.min()),
        ka_max=float(ka_all.max()),
        speed_max=float(sp_all.max()),
        a=frame.p0 + float(frame.d[0]),
        b=frame.p0 + float(frame.d[-1]),
        u_max=float(u.max()),
        uxx_min=float(uxx.min()),
        uxx_max=float(uxx.max()),
        min_diffusion=float(frame.last_dmin),
        evenness=even_defect,
        umbilic_defect=float(np.abs(ratio - 1.0).max()),
    )


# ---------------------------------------------------------------------------
# the run loop


def run(initial, stop, settings=None):
    """Integrate until a stopping criterion fires; returns the Trajectory.

    Steps use stable_dt with the settings' cfl, clipped so snapshot times
    and t_max are landed exactly.  Regrids fire on the 2% domain-shrink
    trigger (or the optional step-count cadence), records are appended at
    the configured cadence, and any solver error propagates with the
    trajectory so far attached as exc.trajectory.
    """
    settings = settings or RunSettings()
    frame = _copy_frame(_frame_of(initial))
    records = []
    snapshots = []
    reason = None

    def snap():
        snapshots.append(Snapshot(t=frame.t, curve=_materialize(frame).curve))

    # initial observation
    try:
        _, dmin0, _, _ = _coeffs(frame)
        frame.last_dmin = dmin0
    except Exception as exc:
        exc.trajectory = Trajectory([], [], "error", initial.params)
        raise
    records.append(_observe(frame))
    snap()

    vol_now = records[0].volume
    diam_now = records[0].diameter
    if diam_now < stop.diameter_floor:
        reason = "diameter_floor"
    elif vol_now < stop.volume_floor:
        reason = "volume_floor"
    elif frame.t >= stop.t_max:
        reason = "t_max"

    width_ref = frame.width
    gap_l_ref = float(frame.d[1] - frame.d[0])
    gap_r_ref = float(frame.d[-1] - frame.d[-2])
    steps_since_regrid = 0
    steps = 0
    next_snap = None
    if settings.snapshot_dt is not None:
        next_snap = frame.t + settings.snapshot_dt

    try:
        while reason is None:
            if steps >= settings.max_steps:
                reason = "max_steps"
                break

            needs_regrid = frame.width < settings.regrid_shrink * width_ref
            if settings.regrid_every is not None:
                needs_regrid |= steps_since_regrid >= settings.regrid_every
            if needs_regrid:
                try:
                    frame = _regrid_frame(frame)
                except TooFewNodes:
                    reason = "resolution_floor"
                    break
                width_ref = frame.width
                gap_l_ref = float(frame.d[1] - frame.d[0])
                gap_r_ref = float(frame.d[-1] - frame.d[-2])
                steps_since_regrid = 0
            elif (
                (frame.d[1] - frame.d[0]) < (1.0 - settings.tip_guard) * gap_l_ref
                or (frame.d[-1] - frame.d[-2]) < (1.0 - settings.tip_guard) * gap_r_ref
            ):
                # tip relief: re-lay the chart-owned cap nodes only
                _relay_caps(frame)
                gap_l_ref = float(frame.d[1] - frame.d[0])
                gap_r_ref = float(frame.d[-1] - frame.d[-2])

            stab, dmin, eta0_l, eta0_r = _coeffs(frame)
            frame.last_dmin = dmin
            if dmin < settings.parabolicity_floor:
                raise DegenerateState(
                    f"diffusion coefficient {dmin:.3e} fell below the floor "
                    f"{settings.parabolicity_floor:.3e}"
                )
            dt = settings.cfl * stab
            hit_snap = False
            hit_tmax = False
            if next_snap is not None and frame.t + dt >= next_snap:
                dt = next_snap - frame.t
                hit_snap = True
            if frame.t + dt >= stop.t_max:
                dt = stop.t_max - frame.t
                hit_snap = False
                hit_tmax = True
                if dt <= 0.0:
                    reason = "t_max"
                    break
            _advance(frame, dt, eta0_l, eta0_r, settings.stitch_tol)
            steps += 1
            steps_since_regrid += 1

            if hit_snap:
                frame.t = next_snap  # kill accumulation roundoff at snap times
                next_snap += settings.snapshot_dt
                snap()
            if hit_tmax:
                frame.t = stop.t_max

            if steps % settings.record_every == 0 or hit_snap or hit_tmax:
                rec = _observe(frame)
                records.append(rec)
                if rec.diameter < stop.diameter_floor:
                    reason = "diameter_floor"
                elif rec.volume < stop.volume_floor:
                    reason = "volume_floor"
                elif hit_tmax:
                    reason = "t_max"
    except (ConvexityLost, StitchBroken, DegenerateState, NonPositiveProfile) as exc:
        exc.trajectory = Trajectory(records, snapshots, "error:" + type(exc).__name__,
                                    initial.params)
        raise

    if records[-1].t < frame.t:
        records.append(_observe(frame))
    if not snapshots or snapshots[-1].t < frame.t:
        snap()
    return Trajectory(records, snapshots, reason, initial.params)


# ---------------------------------------------------------------------------
# extinction fit


def estimate_extinction(traj, min_tail=10):
    """Fit V(t) ~ C (omega - t)^q on the trajectory tail.

    omega is located by a one-dimensional search minimizing the residual
    of the log-log linear fit; returns (omega, q).  Raises FitFailed when
    fewer than ``min_tail`` trailing records have strictly decreasing V.
    """
    t = traj.times
    v = traj.volumes
    dec = np.nonzero(~(np.diff(v) < 0.0))[0]
    start = int(dec[-1]) + 1 if dec.size else 0
    t = t[start:]
    v = v[start:]
    if t.size < min_tail:
        raise FitFailed(
            f"only {t.size} trailing records with decreasing volume "
            f"(need >= {min_tail})"
        )
    # prefer the deep tail where the power law dominates
    deep = v <= 0.25 * v[0]
    if int(deep.sum()) >= min_tail:
        t = t[deep]
        v = v[deep]

    t_end = t[-1]
    span = t_end - t[0]
    logv = np.log(v)

    def residual(log_dt):
        omega = t_end + np.exp(log_dt)
        x = np.log(omega - t)
        slope, icpt = np.polyfit(x, logv, 1)
        return float(((slope * x + icpt - logv) ** 2).sum())

    res = minimize_scalar(
        residual,
        bounds=(np.log(span * 1e-12), np.log(span * 10.0)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    omega = t_end + float(np.exp(res.x))
    x = np.log(omega - t)
    q, _ = np.polyfit(x, logv, 1)
    return omega, float(q)
