"""Hot loops of the time stepper.

Everything here operates on plain float64 arrays in pole-local/offset
coordinates and is compiled with numba when available.  The arithmetic
is grouped so that mirror-symmetric inputs produce bitwise mirrored
outputs; that is what keeps even initial data exactly even for the whole
run.  No scipy enters these paths: the cap reconstruction and the seam
donor use local quadratic (three-point Lagrange) interpolation, which is
exact for the leading behavior of a smooth convex cap in squared-height
coordinates.

Status codes returned by the kernels (0 = ok):
  1  nonpositive interior height
  2  convexity lost in the graph chart beyond the abort tolerance
  3  graph-chart diffusion coefficient undefined (flat arc with a2 < 1)
  4  pole chart has v_yy <= 0
  5  pole chart has v_zz <= 0
  6  a tip crossed its first interior node
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional speedup
    def njit(*args, **kwargs):
        def wrap(func):
            return func
        if args and callable(args[0]):
            return args[0]
        return wrap

OK = 0
NONPOSITIVE_U = 1
CONVEXITY_LOST = 2
DEGENERATE_U = 3
DEGENERATE_CHART = 4
DEGENERATE_CHART_VZZ = 5
TIP_CROSSED = 6

BIG = 1e300


@njit(cache=True, inline="always")
def _pw(x, p):
    """x**p with fast paths for the exponents that dominate in practice."""
    if p == 1.0:
        return x
    if p == 2.0:
        return x * x
    if p == 0.5:
        return math.sqrt(x)
    if p == 1.5:
        return x * math.sqrt(x)
    if p == 3.0:
        return x * x * x
    if p == 2.5:
        return x * x * math.sqrt(x)
    if p == 0.0:
        return 1.0
    return x**p


@njit(cache=True)
def u_coeffs(d, u, lo, hi, a1, a2, beta, abort_tol, ut):
    """Graph-chart velocities and stability data on the evolved slice.

    Fills ut[0:hi-lo] with u_t and returns
    (status, min over nodes of delta^2/(2 D), min D) where D is the
    linearized diffusion coefficient a2 (-u_xx)^(a2-1) / (u^a1 w^beta).
    """
    stab = BIG
    dmin = BIG
    for i in range(lo, hi):
        ui = u[i]
        if ui <= 0.0:
            return NONPOSITIVE_U, 0.0, 0.0
        h_l = d[i] - d[i - 1]
        h_r = d[i + 1] - d[i]
        d_l = (u[i] - u[i - 1]) / h_l
        d_r = (u[i + 1] - u[i]) / h_r
        span = h_l + h_r
        ux = (d_r * h_l + d_l * h_r) / span
        neg = -2.0 * (d_r - d_l) / span
        if neg <= 0.0:
            if neg < -abort_tol:
                return CONVEXITY_LOST, 0.0, 0.0
            neg = 0.0
        w = 1.0 + ux * ux
        denom = _pw(ui, a1) * _pw(w, beta)
        if neg == 0.0:
            if a2 < 1.0:
                return DEGENERATE_U, 0.0, 0.0
            ut[i - lo] = 0.0
            dcoef = 1.0 / denom if a2 == 1.0 else 0.0
        else:
            spd = _pw(neg, a2)
            ut[i - lo] = -spd / denom
            dcoef = a2 * spd / (neg * denom)
        if dcoef < dmin:
            dmin = dcoef
        if dcoef > 0.0:
            delta = h_l if h_l < h_r else h_r
            ratio = delta * delta / (2.0 * dcoef)
            if ratio < stab:
                stab = ratio
    return OK, stab, dmin


@njit(cache=True)
def chart_coeffs(y, v, j0, dy, a1, a2, beta, series_eps, eta):
    """Pole-chart velocities eta = v_t on interior nodes.

    Fills eta[0:m-2] (interior nodes 1..m-2) and returns
    (status, min delta^2/(2 D), min D, eta at the tip node).
    v_zz uses v_y / y off axis and the umbilic limit v_yy(0) at and very
    near the axis.
    """
    m = y.shape[0]
    # tip curvature first: v_zz there is defined by the umbilic limit
    h_l = y[j0] - y[j0 - 1]
    h_r = y[j0 + 1] - y[j0]
    d_l = (v[j0] - v[j0 - 1]) / h_l
    d_r = (v[j0 + 1] - v[j0]) / h_r
    vyy0 = 2.0 * (d_r - d_l) / (h_l + h_r)
    if vyy0 <= 0.0:
        return DEGENERATE_CHART, 0.0, 0.0, 0.0

    stab = BIG
    dmin = BIG
    eta0 = 0.0
    for j in range(1, m - 1):
        h_l = y[j] - y[j - 1]
        h_r = y[j + 1] - y[j]
        d_l = (v[j] - v[j - 1]) / h_l
        d_r = (v[j + 1] - v[j]) / h_r
        span = h_l + h_r
        vy = (d_r * h_l + d_l * h_r) / span
        vyy = 2.0 * (d_r - d_l) / span
        if vyy <= 0.0:
            return DEGENERATE_CHART, 0.0, 0.0, 0.0
        yj = y[j]
        if yj < 0.0:
            ay = -yj
        else:
            ay = yj
        if ay < series_eps:
            vzz = vyy0
        else:
            vzz = vy / yj
        if vzz <= 0.0:
            return DEGENERATE_CHART_VZZ, 0.0, 0.0, 0.0
        w = 1.0 + vy * vy
        e = _pw(vzz, a1) * _pw(vyy, a2) / _pw(w, beta)
        eta[j - 1] = e
        if j == j0:
            eta0 = e
        dcoef = a2 * e / vyy
        if dcoef < dmin:
            dmin = dcoef
        if dcoef > 0.0:
            ratio = dy * dy / (2.0 * dcoef)
            if ratio < stab:
                stab = ratio
    return OK, stab, dmin, eta0


@njit(cache=True)
def apply_u(u, lo, hi, ut, dt):
    for i in range(lo, hi):
        u[i] += dt * ut[i - lo]


@njit(cache=True)
def apply_chart(v, eta, dt, eta0):
    """Advance interior chart nodes in the tip-anchored frame.

    Subtracting eta0 keeps v at the tip exactly zero; the tip's own
    motion is applied to the axis intercept by the caller.
    """
    m = v.shape[0]
    for j in range(1, m - 1):
        v[j] += dt * (eta[j - 1] - eta0)


@njit(cache=True, inline="always")
def _quad(x0, y0, x1, y1, x2, y2, x):
    """Quadratic Lagrange interpolation through three points."""
    l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
    l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
    l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
    return y0 * l0 + y1 * l1 + y2 * l2


@njit(cache=True, inline="always")
def _cubic(x0, y0, x1, y1, x2, y2, x3, y3, x):
    """Cubic Lagrange interpolation through four points.

    Needed wherever the interpolated value feeds a second difference:
    a cubic's O(h^4) error stays second order after the division by the
    squared spacing, a quadratic's O(h^3) would not.
    """
    l0 = (x - x1) * (x - x2) * (x - x3) / ((x0 - x1) * (x0 - x2) * (x0 - x3))
    l1 = (x - x0) * (x - x2) * (x - x3) / ((x1 - x0) * (x1 - x2) * (x1 - x3))
    l2 = (x - x0) * (x - x1) * (x - x3) / ((x2 - x0) * (x2 - x1) * (x2 - x3))
    l3 = (x - x0) * (x - x1) * (x - x2) / ((x3 - x0) * (x3 - x1) * (x3 - x2))
    return y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3


@njit(cache=True)
def reconstruct_caps(d, u, n, vl, vr, ss, nh, lo, hi, nbl, nbr, wl, wr):
    """Rebuild the chart-owned profile nodes from the evolved charts.

    vl, vr are the full chart arrays; their upper halves (tip value 0
    followed by nh samples at radii of squared height ss[1:]) describe
    axial offset against squared height.  Nodes strictly below the blend
    band take the chart value outright; blend nodes mix
    w * (PDE value) + (1-w) * (chart value).  Returns
    (status, max blend disagreement relative to the chart height scale).
    """
    defect = 0.0
    uscale = ss[nh]  # c^2; heights near the seam are ~c

    # left side: nodes 1 .. lo+nbl-1, xi ascending from the left tip
    k = 1
    for i in range(1, lo + nbl):
        xi = d[i] - d[0]
        if xi <= 0.0:
            return TIP_CROSSED, 0.0
        while k < nh and vl[nh + k] < xi:
            k += 1
        kk = k
        if kk < 2:
            kk = 2
        if kk > nh - 1:
            kk = nh - 1
        s = _cubic(
            vl[nh + kk - 2], ss[kk - 2],
            vl[nh + kk - 1], ss[kk - 1],
            vl[nh + kk], ss[kk],
            vl[nh + kk + 1], ss[kk + 1],
            xi,
        )
        if s < 0.0:
            s = 0.0
        uc = math.sqrt(s)
        if i < lo:
            u[i] = uc
        else:
            w = wl[i - lo]
            diff = u[i] - uc
            if diff < 0.0:
                diff = -diff
            rel = diff * diff / uscale
            if rel > defect:
                defect = rel
            u[i] = w * u[i] + (1.0 - w) * uc

    # right side: mirrored arithmetic, xi ascending from the right tip
    k = 1
    for i in range(n - 2, hi - nbr - 1, -1):
        xi = d[n - 1] - d[i]
        if xi <= 0.0:
            return TIP_CROSSED, 0.0
        while k < nh and vr[nh + k] < xi:
            k += 1
        kk = k
        if kk < 2:
            kk = 2
        if kk > nh - 1:
            kk = nh - 1
        s = _cubic(
            vr[nh + kk - 2], ss[kk - 2],
            vr[nh + kk - 1], ss[kk - 1],
            vr[nh + kk], ss[kk],
            vr[nh + kk + 1], ss[kk + 1],
            xi,
        )
        if s < 0.0:
            s = 0.0
        uc = math.sqrt(s)
        if i >= hi:
            u[i] = uc
        else:
            w = wr[hi - 1 - i]
            diff = u[i] - uc
            if diff < 0.0:
                diff = -diff
            rel = diff * diff / uscale
            if rel > defect:
                defect = rel
            u[i] = w * u[i] + (1.0 - w) * uc

    return OK, math.sqrt(defect)


@njit(cache=True)
def donor_left(d, u, hint, target):
    """Axis offset from the left tip at which the profile reaches
    ``target`` height, by local cubic inverse interpolation on the rising
    flank.  Returns (xi, refreshed hint index)."""
    n = u.shape[0]
    k = hint
    if k < 3:
        k = 3
    if k > n - 2:
        k = n - 2
    while k > 3 and u[k - 1] >= target:
        k -= 1
    while k < n - 2 and u[k] < target:
        k += 1
    xi = _cubic(
        u[k - 2], d[k - 2] - d[0],
        u[k - 1], d[k - 1] - d[0],
        u[k], d[k] - d[0],
        u[k + 1], d[k + 1] - d[0],
        target,
    )
    return xi, k


@njit(cache=True)
def donor_right(d, u, hint, target):
    """Mirror of donor_left for the falling flank at the right tip."""
    n = u.shape[0]
    k = hint
    if k < 1:
        k = 1
    if k > n - 4:
        k = n - 4
    while k < n - 4 and u[k + 1] >= target:
        k += 1
    while k > 1 and u[k] < target:
        k -= 1
    xi = _cubic(
        u[k + 2], d[n - 1] - d[k + 2],
        u[k + 1], d[n - 1] - d[k + 1],
        u[k], d[n - 1] - d[k],
        u[k - 1], d[n - 1] - d[k - 1],
        target,
    )
    return xi, k


@njit(cache=True)
def diameter_scan(x, u):
    """Exact grid diameter by a quadratic scan of upper-vs-lower pairs."""
    n = x.shape[0]
    best = 0.0
    for i in range(n):
        for j in range(n):
            dx = x[i] - x[j]
            s = u[i] + u[j]
            val = dx * dx + s * s
            if val > best:
                best = val
    return math.sqrt(best)


@njit(cache=True)
def convexity_excess(d, u, lo, hi):
    """Largest (most positive) second divided difference on the slice."""
    worst = -BIG
    for i in range(lo, hi):
        h_l = d[i] - d[i - 1]
        h_r = d[i + 1] - d[i]
        d_l = (u[i] - u[i - 1]) / h_l
        d_r = (u[i + 1] - u[i]) / h_r
        val = 2.0 * (d_r - d_l) / (h_l + h_r)
        if val > worst:
            worst = val
    return worst
