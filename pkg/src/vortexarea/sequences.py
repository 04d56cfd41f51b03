"""Explicit approximating maps of the vortex map and the areas of their graphs.

Every map here satisfies u(r, -theta) = conj(u(r, theta)), so each is built on
theta in [0, pi] and mirrored.  Grids are tensor (r, theta) grids whose nodes
include every seam of the piecewise definition, so the midpoint quadrature of
``map_graph_area_polar`` never straddles a kink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .area import map_graph_area_polar, vortex_graph_area
from .catenoid import catenoid_area, catenoid_parameters, flap_area
from .errors import ValidationError
from .model import ConvexProfile, PolarMapField, ProblemParams, ScalarField, SequenceParams, half_circle
from .plateau import regularize_boundary

CYLINDER = "cylinder"
TWO_DISCS = "two-discs"
CATENOID_FLAP = "catenoid-flap"
RECOVERY = "recovery"
WHICH = (CYLINDER, TWO_DISCS, CATENOID_FLAP, RECOVERY)


def piecewise_nodes(breaks, cells):
    """Nodes of uniform pieces between consecutive breakpoints; ``cells`` is an int or one per piece."""
    breaks = np.asarray(breaks, float)
    if np.any(np.diff(breaks) <= 0):
        raise ValidationError("breakpoints must increase", breaks=breaks.tolist())
    counts = np.broadcast_to(np.asarray(cells, int), (breaks.size - 1,))
    parts = [np.linspace(a, b, int(n) + 1)[:-1] for a, b, n in zip(breaks[:-1], breaks[1:], counts)]
    return np.concatenate(parts + [breaks[-1:]])


def mirror_theta(theta_half):
    """Full-period nodes from nodes on [0, pi] that start at 0 and end at pi."""
    return np.concatenate([theta_half, 2 * np.pi - theta_half[-2:0:-1]])


def _mirrored_field(r, theta_half, u1, u2):
    inner = slice(-2, 0, -1)
    return PolarMapField(
        r,
        mirror_theta(theta_half),
        np.concatenate([u1, u1[:, inner]], axis=1),
        np.concatenate([u2, -u2[:, inner]], axis=1),
    )


def _angle(f):
    return np.cos(f), np.sin(f)


def _check(p: SequenceParams, l):
    if not (isinstance(l, (int, float)) and math.isfinite(l) and l > 0):
        raise ValidationError("l must be positive", l=l)
    p.check_radius(l)


def cylinder_sequence(p: SequenceParams, l, cells=64) -> PolarMapField:
    """S^1-valued map whose graph fills the lateral cylinder over the wedge |theta| < theta_k."""
    _check(p, l)
    rk, tk = p.r_k, p.theta_k
    r = piecewise_nodes([0.0, rk, l], [cells, 4 * cells])
    th = piecewise_nodes([0.0, tk, np.pi], [cells, 4 * cells])
    R, T = np.meshgrid(r, th, indexing="ij")
    wedge = T < tk
    inside = R < rk
    f = np.where(wedge, (tk - np.pi) / tk * T, T - np.pi)
    # outside the disc B_{r_k} the twist is complete, inside it is scaled by r / r_k
    scale = np.where(inside, R / rk, 1.0)
    f = scale * f + np.pi
    return _mirrored_field(r, th, *_angle(f))


def two_discs_sequence(p: SequenceParams, l, cells=64) -> PolarMapField:
    """Radial cutoff times the vortex map."""
    _check(p, l)
    k = p.k
    a, b = 1.0 / k**2, 1.0 / k
    if not b < l:
        raise ValidationError("need 1/k < l", k=k, l=l)
    r = piecewise_nodes([0.0, a, b, l], [4, cells, 4 * cells])
    th = piecewise_nodes([0.0, np.pi], 4 * cells)
    R, T = np.meshgrid(r, th, indexing="ij")
    phi = p.ramp(R)
    return _mirrored_field(r, th, phi * np.cos(T), phi * np.sin(T))


def _segment_then_arc(lam, rho):
    """Constant-speed path from (1, 0) along the axis to (rho, 0), then over the upper half of the circle of radius rho."""
    seg = 1.0 - rho
    d = lam * (seg + np.pi * rho)
    on_seg = d <= seg
    phi = np.where(on_seg, 0.0, (d - seg) / np.where(rho > 0, rho, 1.0))
    x = np.where(on_seg, 1.0 - d, rho * np.cos(phi))
    y = np.where(on_seg, 0.0, rho * np.sin(phi))
    return x, y


def catenoid_flap_sequence(p: SequenceParams, l, cells=64) -> PolarMapField:
    """Map whose slices sweep a unit circle, a doubly covered flap segment and a catenoid circle."""
    _check(p, l)
    c = catenoid_parameters(l)
    rk, tk, tb = p.r_k, p.theta_k, p.theta_bar_k
    r = piecewise_nodes([0.0, rk, l], [cells, 4 * cells])
    th = piecewise_nodes([0.0, tk, tb, np.pi], [2 * cells, cells, 4 * cells])
    R, T = np.meshgrid(r, th, indexing="ij")
    # angle reached on the circle |x| = r_k, used to fill the disc radially
    A = np.where(T >= tb, T, np.where(T >= tk, tb * (T - tk) / (tb - tk), np.pi * (tk - T) / tk))
    u1, u2 = _angle(np.pi + (R / rk) * (A - np.pi))
    outer = R >= rk
    rho = c.rho_bar((np.maximum(R, rk) - rk) / (l - rk) * l)
    x, y = _segment_then_arc((tk - T) / tk, rho)
    w1, w2 = _angle(A)
    in_wedge = outer & (T < tk)
    in_arc = outer & (T >= tk)
    u1 = np.where(in_wedge, x, np.where(in_arc, w1, u1))
    u2 = np.where(in_wedge, y, np.where(in_arc, w2, u2))
    return _mirrored_field(r, th, u1, u2)


# ---------------------------------------------------------------------------
# recovery sequence built from a minimizing pair


def linearized_profile(h: ConvexProfile, k):
    """h_k: h on [1/k, 2l - 1/k], linear from h(0) = 1 to h(1/k) near each end."""
    l = h.l
    if not 1.0 / k < l:
        raise ValidationError("need 1/k < l", k=k, l=l)

    def hk(w1):
        w1 = np.asarray(w1, float)
        d = np.minimum(w1, 2 * l - w1)
        near = d < 1.0 / k
        lin = k * (h(1.0 / k) - h(0.0)) * d + h(0.0)
        return np.where(near, lin, h(w1))

    return hk


def _boundary_trace(w2, k):
    """psi*_k(0, w2), the truncated half circle (sqrt(1 - w2^2) - 2/k) v 0."""
    return np.maximum(half_circle(w2) - 2.0 / k, 0.0)


def _retract(x, y):
    """Radial projection onto the unit half circle, the graph of psi*(0, .)."""
    n = np.hypot(x, y)
    return x / n, y / n


@dataclass(frozen=True)
class RecoveryGrid:
    cells_inner: int = 32
    cells_outer: int = 64
    refine: int = 2


def recovery_sequence(h_star: ConvexProfile, psi_star: ScalarField, p: SequenceParams, grid: RecoveryGrid | None = None):
    """Map built from a minimizing pair: sector wedge, blend annulus, retraction disc and gluing wedge.

    On the wedge 0 <= theta <= theta_k, r >= r_k the map is (s_k, psi*_k(T_k)) where
    T_k(r, theta) = (tau_k(r), -s_k(r, theta)) parametrizes the reflected
    subgraph of h*_k; psi*_k is the truncation of psi* at level m = k.
    """
    grid = grid or RecoveryGrid()
    l = h_star.l
    _check(p, l)
    k = p.k
    rk, tk, tb = p.r_k, p.theta_k, p.theta_bar_k
    hk = linearized_profile(h_star, k)
    psik = regularize_boundary(psi_star, k)
    chart = psi_star.chart
    # radial nodes through the chart columns of [0, l]; angular nodes through the chart rows
    w1_half = chart.w1[chart.w1 <= l + 1e-14]
    w1_fine = piecewise_nodes(w1_half, grid.refine)
    r_outer = rk + (l - rk) / l * w1_fine
    r = np.concatenate([piecewise_nodes([0.0, 0.5 * rk, rk], grid.cells_inner)[:-1], r_outer])
    sig = piecewise_nodes(chart.sigma, grid.refine)
    th_wedge = np.sort(tk * (1.0 - sig))
    th = np.concatenate([th_wedge[:-1], piecewise_nodes([tk, tb, np.pi], [grid.cells_inner, 4 * grid.cells_outer])])
    R, T = np.meshgrid(r, th, indexing="ij")
    u1 = np.empty(R.shape)
    u2 = np.empty(R.shape)

    wedge = T <= tk
    glue = (T > tk) & (T < tb)
    rest = T >= tb
    small = R < 0.5 * rk
    ring = (R >= 0.5 * rk) & (R < rk)
    big = R >= rk

    # outside the wedges: the vortex map, twisted toward (-1, 0) inside B_{r_k/2}
    m = rest & ~small
    u1[m], u2[m] = _angle(T[m])
    m = rest & small
    u1[m], u2[m] = _angle(2 * R[m] / rk * (T[m] - np.pi) + np.pi)

    # wedge beyond r_k: the reflected subgraph parametrization
    m = wedge & big
    tau = l / (l - rk) * (R[m] - rk)
    hv = hk(tau)
    s = (1.0 + hv) / tk * T[m] - hv
    u1[m] = s
    u2[m] = psik.sample(tau, -s)

    # wedge, r_k/2 <= r < r_k: blend between the trace curve and its retraction
    m = wedge & ring
    s = 2.0 * T[m] / tk - 1.0
    px, py = s, _boundary_trace(-s, k)
    qx, qy = _retract(px, py)
    b = 2.0 * R[m] / rk - 1.0
    u1[m] = (1 - b) * qx + b * px
    u2[m] = (1 - b) * qy + b * py

    # wedge inside B_{r_k/2}: retracted trace curve swept with r theta
    m = wedge & small
    q = 4.0 * R[m] * T[m] / (rk * tk)
    u1[m], u2[m] = _retract(q - 1.0, _boundary_trace(1.0 - q, k))

    # gluing wedge theta_k < theta < theta_bar_k
    lam = (tb - T) / (tb - tk)
    m = glue & small
    q = 4.0 * R[m] / rk
    ax, _ = _retract(q - 1.0, _boundary_trace(1.0 - q, k))
    alpha = np.arccos(np.clip(ax, -1.0, 1.0))
    beta = lam[m] * alpha + (1 - lam[m]) * (2 * R[m] / rk * (tb - np.pi) + np.pi)
    u1[m], u2[m] = _angle(beta)
    m = glue & ~small
    u1[m], u2[m] = _angle((1 - lam[m]) * tb)
    return _mirrored_field(r, th, u1, u2)


# ---------------------------------------------------------------------------
# limits


def vortex_term(l):
    return vortex_graph_area(ProblemParams(l))


def limit_prediction(which, l, F_star=None):
    """Limit of the graph areas as k grows.

    The catenoid-flap map covers, over 0 < |x| < l, half of the catenoid spanning
    the two unit circles at distance 2l, and the flap of half length l twice;
    with the full-length closed forms that is catenoid/2 + flap.
    """
    v = vortex_term(l)
    if which == CYLINDER:
        return v + 2 * np.pi * l
    if which == TWO_DISCS:
        return v + np.pi
    if which == CATENOID_FLAP:
        c = catenoid_parameters(l)
        return v + 0.5 * catenoid_area(c) + flap_area(c)
    if which == RECOVERY:
        if F_star is None:
            raise ValidationError("the recovery limit needs F_star")
        return v + F_star
    raise ValidationError(f"unknown sequence {which!r}", which=which)


def sequence_area(which, l, k, cells=64, params: SequenceParams | None = None, optimum=None):
    """{area, limit_prediction, relative_gap} for one member of a sequence.

    ``optimum`` is an optimizer result (needed for the recovery sequence; it is
    computed when omitted).  A two-discs optimum uses the two-discs map.
    """
    p = params or SequenceParams.default(k)
    if which == RECOVERY:
        if optimum is None:
            from .optimize import optimize_profile

            optimum = optimize_profile(l)
        F = optimum.F_star
        if optimum.psi_star is None:
            u = two_discs_sequence(p, l, cells)
        else:
            u = recovery_sequence(optimum.h_star, optimum.psi_star, p, RecoveryGrid(cells_inner=max(8, cells // 2), cells_outer=cells))
        limit = limit_prediction(RECOVERY, l, F)
    else:
        build = {CYLINDER: cylinder_sequence, TWO_DISCS: two_discs_sequence, CATENOID_FLAP: catenoid_flap_sequence}
        if which not in build:
            raise ValidationError(f"unknown sequence {which!r}", which=which)
        u = build[which](p, l, cells)
        limit = limit_prediction(which, l)
    area = map_graph_area_polar(u)
    return {"area": area, "limit_prediction": limit, "relative_gap": (area - limit) / limit}, u


def recovery_sequence_area(l, k, optimum=None, cells=64, params: SequenceParams | None = None):
    out, _ = sequence_area(RECOVERY, l, k, cells, params, optimum)
    return out
