"""Quadrature engines for graph areas and the penalized functionals F_2l and F_l.

Scalar graphs are discretized as continuous piecewise-linear functions on the
mapped grid.  Each grid cell is split along both diagonals and the two
triangulations are averaged, which keeps the discrete area mirror symmetric.
The area of a piecewise-linear graph over a triangle is the area of the 3-D
triangle through its lifted vertices, so the discrete area is the exact area of
a polyhedral surface.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .errors import ConstraintViolation, GridTooCoarse, InvalidRange, ValidationError
from .model import (
    BoundaryTrace,
    ConvexProfile,
    MappedChart,
    PolarMapField,
    ProblemParams,
    ScalarField,
    half_circle,
)

# ---------------------------------------------------------------------------
# vortex map


def vortex_jacobian(x1, x2):
    """D_i u_j of u(x) = x/|x|, returned as an array (..., 2, 2)."""
    x = np.stack(np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float)), axis=-1)
    r = np.linalg.norm(x, axis=-1)[..., None, None]
    eye = np.eye(2)
    return eye / r - x[..., :, None] * x[..., None, :] / r**3


def vortex_gradient_sq(x1, x2):
    """Sum over i, j of (D_i u_j)^2, computed by squaring the sampled matrix."""
    d = vortex_jacobian(x1, x2)
    return np.sum(d * d, axis=(-2, -1))


@lru_cache(maxsize=1)
def verify_vortex_gradient(n=2000, seed=7):
    """Largest deviation of r^2 |grad u|^2 from 1 over random samples and a finite-difference check.

    Raises if the identity |grad u|^2 = 1/r^2 fails, so the closed form below is
    only used after it has been confirmed.
    """
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(-6, 3, n))
    t = rng.uniform(0, 2 * np.pi, n)
    x1, x2 = r * np.cos(t), r * np.sin(t)
    dev = float(np.max(np.abs(r * r * vortex_gradient_sq(x1, x2) - 1.0)))

    # independent route: central differences of u itself
    h = 1e-6 * r
    u = lambda a, b: np.stack([a, b]) / np.hypot(a, b)
    d1 = (u(x1 + h, x2) - u(x1 - h, x2)) / (2 * h)
    d2 = (u(x1, x2 + h) - u(x1, x2 - h)) / (2 * h)
    fd = np.sum(d1 * d1, axis=0) + np.sum(d2 * d2, axis=0)
    dev_fd = float(np.max(np.abs(r * r * fd - 1.0)))
    if dev > 1e-12 or dev_fd > 1e-6:
        raise AssertionError(f"|grad u|^2 = 1/r^2 failed: {dev}, {dev_fd}")
    return dev, dev_fd


def _vortex_primitive(r):
    return r * math.sqrt(1.0 + r * r) + math.asinh(r)


def vortex_graph_area(p: ProblemParams, method="closed"):
    """Area of the graph of x/|x| over the annulus eps < |x| < l.

    ``method="closed"`` uses pi [r sqrt(1+r^2) + asinh r] between the radii;
    ``method="quadrature"`` integrates 2 pi r sqrt(1 + |grad u|^2) adaptively with
    the gradient taken from the sampled Jacobian.
    """
    l, eps = float(p.l), float(p.epsilon)
    if eps > l:
        raise InvalidRange("epsilon must not exceed l", l=l, epsilon=eps)
    if eps == l:
        return 0.0
    if method == "closed":
        verify_vortex_gradient()
        return math.pi * (_vortex_primitive(l) - _vortex_primitive(eps))
    if method == "quadrature":
        alpha = 0.3717

        def f(r):
            g = vortex_gradient_sq(r * math.cos(alpha), r * math.sin(alpha))
            return 2 * math.pi * math.sqrt(r * r + r * r * float(g))

        val, _ = integrate.quad(f, eps, l, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val
    raise ValidationError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# polar quadrature


def map_graph_area_polar(u: PolarMapField):
    """Area of the graph of u over the polar grid.

    Midpoint rule per cell: derivatives at the cell centre come from centred
    differences of the four corner samples, and the integrand is
    sqrt(r^2 (1 + |u_r|^2) + |u_theta|^2 + (u1_r u2_theta - u1_theta u2_r)^2),
    which equals r times the usual polar integrand and stays finite at r = 0.
    The theta direction is periodic.
    """
    nr, nt = u.r.size, u.theta.size
    if nr < 4 or nt < 4:
        raise GridTooCoarse("need at least 4 nodes in r and theta", n_r=nr, n_theta=nt)
    th = np.append(u.theta, u.theta[0] + 2 * np.pi)
    a = np.concatenate([u.u1, u.u1[:, :1]], axis=1)
    b = np.concatenate([u.u2, u.u2[:, :1]], axis=1)
    dr = np.diff(u.r)[:, None]
    dt = np.diff(th)[None, :]
    rc = 0.5 * (u.r[1:] + u.r[:-1])[:, None]

    def d_r(f):
        return 0.5 * ((f[1:, 1:] + f[1:, :-1]) - (f[:-1, 1:] + f[:-1, :-1])) / dr

    def d_t(f):
        return 0.5 * ((f[1:, 1:] + f[:-1, 1:]) - (f[1:, :-1] + f[:-1, :-1])) / dt

    ar, at, br, bt = d_r(a), d_t(a), d_r(b), d_t(b)
    jac = ar * bt - at * br
    integrand = np.sqrt(rc * rc * (1.0 + ar * ar + br * br) + at * at + bt * bt + jac * jac)
    return float(np.sum(integrand * dr * dt))


# ---------------------------------------------------------------------------
# triangulated graph areas


@lru_cache(maxsize=16)
def grid_triangles(n1, n2):
    """Vertex indices (T, 3) of the averaged criss-cross triangulation, counterclockwise."""
    ny = n2 + 1
    i, j = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    a = (i * ny + j).ravel()
    b = ((i + 1) * ny + j).ravel()
    c = (i * ny + j + 1).ravel()
    d = ((i + 1) * ny + j + 1).ravel()
    tri = np.concatenate(
        [np.stack([a, b, d], 1), np.stack([a, d, c], 1), np.stack([a, b, c], 1), np.stack([b, d, c], 1)]
    )
    tri.setflags(write=False)
    return tri


class GraphMesh:
    """Energy E(z) = sum_T w_T |T_lifted| of nodal heights z on fixed node positions.

    Every triangle has weight 1/2 (two triangulations averaged).  E is convex in
    z; gradient and Hessian with respect to z and the gradient with respect to
    the w2 node positions are provided.
    """

    weight = 0.5

    def __init__(self, x, y, n1, n2):
        self.n1, self.n2 = n1, n2
        self.x = np.asarray(x, float).ravel()
        self.y = np.asarray(y, float).ravel()
        self.tri = grid_triangles(n1, n2)
        p0, p1, p2 = self.tri[:, 0], self.tri[:, 1], self.tri[:, 2]
        self.dx1 = self.x[p1] - self.x[p0]
        self.dy1 = self.y[p1] - self.y[p0]
        self.dx2 = self.x[p2] - self.x[p0]
        self.dy2 = self.y[p2] - self.y[p0]
        self.nz = self.dx1 * self.dy2 - self.dy1 * self.dx2
        # n_xy = G z with G = [[dy2-dy1, -dy2, dy1], [dx1-dx2, dx2, -dx1]]
        self.G = np.empty((self.tri.shape[0], 2, 3))
        self.G[:, 0, 0] = self.dy2 - self.dy1
        self.G[:, 0, 1] = -self.dy2
        self.G[:, 0, 2] = self.dy1
        self.G[:, 1, 0] = self.dx1 - self.dx2
        self.G[:, 1, 1] = self.dx2
        self.G[:, 1, 2] = -self.dx1
        self.N = self.x.size

    @classmethod
    def from_chart(cls, chart: MappedChart):
        n1, n2 = chart.w1.size - 1, chart.sigma.size - 1
        return cls(chart.node_w1(), chart.node_w2(), n1, n2)

    def _q(self, z):
        zt = np.asarray(z, float).ravel()[self.tri]
        q = np.einsum("tij,tj->ti", self.G, zt)
        s = np.sqrt(q[:, 0] ** 2 + q[:, 1] ** 2 + self.nz**2)
        return q, s

    def triangle_areas(self, z):
        return 0.5 * self._q(z)[1]

    def area(self, z):
        return float(np.sum(self.weight * self.triangle_areas(z)))

    def planar_area(self):
        return float(np.sum(self.weight * 0.5 * np.abs(self.nz)))

    def grad(self, z):
        q, s = self._q(z)
        safe = np.where(s > 0, s, 1.0)
        loc = 0.5 * self.weight * np.einsum("tij,ti->tj", self.G, q) / safe[:, None]
        loc[s == 0] = 0.0
        return np.bincount(self.tri.ravel(), weights=loc.ravel(), minlength=self.N)

    def hessian(self, z):
        q, s = self._q(z)
        safe = np.where(s > 0, s, 1.0)
        # (w/2) G^T (I/s - q q^T/s^3) G
        m = np.eye(2)[None] / safe[:, None, None] - q[:, :, None] * q[:, None, :] / safe[:, None, None] ** 3
        m[s == 0] = 0.0
        loc = 0.5 * self.weight * np.einsum("tki,tkl,tlj->tij", self.G, m, self.G)
        rows = np.repeat(self.tri, 3, axis=1).ravel()
        cols = np.tile(self.tri, (1, 3)).ravel()
        return sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(self.N, self.N))

    def grad_y(self, z):
        """dE/dy at every node for fixed heights z."""
        zt = np.asarray(z, float).ravel()[self.tri]
        P = np.stack([self.x[self.tri], self.y[self.tri], zt], axis=-1)  # (T, 3 vertices, 3 coords)
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        n = np.cross(e1, e2)
        nn = np.linalg.norm(n, axis=1)
        nhat = n / np.where(nn > 0, nn, 1.0)[:, None]
        out = np.zeros(self.N)
        for v in range(3):
            opp = P[:, (v + 2) % 3] - P[:, (v + 1) % 3]
            g = 0.5 * np.cross(nhat, opp)
            out += np.bincount(self.tri[:, v], weights=self.weight * g[:, 1], minlength=self.N)
        return out

    def lumped_mass(self):
        loc = self.weight * 0.5 * np.abs(self.nz) / 3.0
        return np.bincount(self.tri.ravel(), weights=np.repeat(loc, 3), minlength=self.N)


def scalar_graph_area(psi: ScalarField):
    """Area of the graph of psi over the region covered by its chart."""
    return GraphMesh.from_chart(psi.chart).area(psi.values)


# ---------------------------------------------------------------------------
# boundary integrals

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def side_mismatch(w2_nodes, trace_values, bc: BoundaryTrace):
    """Integral over the node span of |psi_lin - phi| dw2, psi_lin the piecewise-linear trace.

    Each segment is integrated in the variable gamma with w2 = sin(gamma), which
    removes the square-root endpoint behaviour of the half-circle data.
    """
    w = np.asarray(w2_nodes, float)
    v = np.asarray(trace_values, float)
    lo = np.arcsin(np.clip(w[:-1], -1, 1))
    hi = np.arcsin(np.clip(w[1:], -1, 1))
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    g = mid[:, None] + half[:, None] * _GL_X[None, :]
    s = np.sin(g)
    span = w[1:] - w[:-1]
    t = np.where(span[:, None] > 0, (s - w[:-1, None]) / np.where(span > 0, span, 1.0)[:, None], 0.0)
    lin = v[:-1, None] * (1 - t) + v[1:, None] * t
    f = np.abs(lin - bc.side(s)) * np.cos(g)
    return float(np.sum(half * (f @ _GL_W)))


def _abs_linear_integral(a, b, length):
    """Integral of |linear| over segments with end values a, b."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    same = a * b >= 0
    denom = np.where(same, 1.0, np.abs(a) + np.abs(b))
    val = np.where(same, 0.5 * np.abs(a + b), 0.5 * (a * a + b * b) / denom)
    return float(np.sum(val * length))


def wall_integral(a, bc: BoundaryTrace):
    """Integral of phi over (a, 1) on one side wall."""
    a = float(np.clip(a, -1.0, 1.0))
    if bc.truncation_m is None:
        return 0.5 * (0.5 * math.pi - a * math.sqrt(max(0.0, 1 - a * a)) - math.asin(a))
    val, _ = integrate.quad(lambda w: float(bc.side(w)), a, 1.0, epsabs=1e-13, limit=200)
    return val


def _check_admissible(psi: ScalarField, tol):
    v = psi.values
    if np.any(v < -tol) or np.any(v > 1.0 + tol):
        raise ConstraintViolation("psi must take values in [0, 1]", min=float(v.min()), max=float(v.max()))
    col = psi.chart.collapsed
    if np.any(col) and np.any(np.abs(v[col]) > tol):
        raise ConstraintViolation("psi must vanish outside the subgraph of h")


def _f_terms(psi: ScalarField, bc: BoundaryTrace, walls):
    """Area plus penalty terms; ``walls`` lists the column indices carrying Dirichlet data."""
    c = psi.chart
    v = psi.values
    w1 = c.w1
    top = c.upper
    terms = {"area": GraphMesh.from_chart(c).area(v)}
    w2 = c.node_w2()
    side = 0.0
    wall = 0.0
    for i in walls:
        if not c.collapsed[i]:
            side += side_mismatch(w2[i], v[i], bc)
        wall += wall_integral(top[i], bc)
    terms["side"] = side
    terms["wall"] = wall
    dw1 = np.diff(w1)
    terms["bottom"] = _abs_linear_integral(v[:-1, 0], v[1:, 0], dw1)
    seg = np.hypot(dw1, np.diff(top))
    on_bottom = c.collapsed[:-1] & c.collapsed[1:]
    terms["top"] = _abs_linear_integral(v[:-1, -1], v[1:, -1], np.where(on_bottom, 0.0, seg))
    return terms


def _degenerate_value(bc: BoundaryTrace, n_walls):
    if bc.truncation_m is None:
        return n_walls * 0.5 * math.pi
    return n_walls * wall_integral(-1.0, bc)


def functional_F2l(h: ConvexProfile, psi: ScalarField | None, bc: BoundaryTrace | None = None, tol=1e-9, detail=False):
    """Penalized area of (h, psi) on (0, 2l) x (-1, 1).

    Sum of the graph area over SG_h, the mismatch with the side data on the
    Dirichlet boundary, the trace of psi on G_h and the wall term over L_h.  The
    branch h == -1 is evaluated analytically and equals pi.
    """
    bc = bc or BoundaryTrace()
    if h.degenerate:
        if psi is not None and np.any(np.abs(psi.values) > tol):
            raise ConstraintViolation("psi must vanish when h == -1")
        val = _degenerate_value(bc, 2)
        return (val, {"wall": val}) if detail else val
    if psi is None:
        raise ValidationError("psi is required for a non-degenerate profile")
    _check_profile_matches(h, psi.chart)
    _check_admissible(psi, tol)
    terms = _f_terms(psi, bc, walls=(0, psi.chart.w1.size - 1))
    val = math.fsum(terms.values())
    return (val, terms) if detail else val


def _check_profile_matches(h, chart):
    if chart.is_rectangle:
        raise ValidationError("psi must live on the chart of the subgraph of h")
    expected = h(chart.w1)
    if np.max(np.abs(expected - chart.upper)) > 1e-12:
        raise ConstraintViolation("psi chart does not match the profile h")


def restrict_half(psi: ScalarField) -> ScalarField:
    """Restriction of a field on (0, 2l) to the columns over [0, l]."""
    c = psi.chart
    n1 = c.w1.size - 1
    if n1 % 2:
        raise ValidationError("restriction to the half domain needs an even number of cells", n1=n1)
    m = n1 // 2 + 1
    half = MappedChart(c.w1[:m], c.sigma, c.lower[:m], c.upper[:m], c.profile, c.tol_col)
    return ScalarField(half, psi.values[:m])


def mirror_field(psi_half: ScalarField) -> ScalarField:
    """Even reflection of a field on [0, l] across w1 = l."""
    c = psi_half.chart
    l = float(c.w1[-1])
    w1 = np.concatenate([c.w1, 2 * l - c.w1[-2::-1]])
    lower = np.concatenate([c.lower, c.lower[-2::-1]])
    upper = np.concatenate([c.upper, c.upper[-2::-1]])
    full = MappedChart(w1, c.sigma, lower, upper, c.profile, c.tol_col)
    return ScalarField(full, np.concatenate([psi_half.values, psi_half.values[-2::-1]]))


def functional_Fl(h: ConvexProfile, psi: ScalarField | None, bc: BoundaryTrace | None = None, tol=1e-9, detail=False):
    """Penalized area on (0, l) x (-1, 1) with a free edge at w1 = l.

    ``psi`` may live on the half chart or on the full chart (then it is
    restricted).  Doubling a symmetric configuration gives F_2l.
    """
    bc = bc or BoundaryTrace()
    if h.degenerate:
        if psi is not None and np.any(np.abs(psi.values) > tol):
            raise ConstraintViolation("psi must vanish when h == -1")
        val = _degenerate_value(bc, 1)
        return (val, {"wall": val}) if detail else val
    if psi is None:
        raise ValidationError("psi is required for a non-degenerate profile")
    l = h.l
    if abs(psi.chart.w1[-1] - 2 * l) < 1e-12 * max(1.0, l):
        psi = restrict_half(psi)
    elif abs(psi.chart.w1[-1] - l) > 1e-12 * max(1.0, l):
        raise ValidationError("psi must cover (0, l) or (0, 2l)")
    _check_profile_matches(h, psi.chart)
    _check_admissible(psi, tol)
    terms = _f_terms(psi, bc, walls=(0,))
    val = math.fsum(terms.values())
    return (val, terms) if detail else val


def relaxed_area(p: ProblemParams, F_star: float):
    """Area of the graph of the vortex map on B_l plus the optimal penalized area."""
    return vortex_graph_area(ProblemParams(p.l, 0.0)) + float(F_star)


def half_cylinder_field(chart: MappedChart) -> ScalarField:
    """psi_s(w1, w2) = sqrt(1 - w2^2) sampled on a chart."""
    return ScalarField(chart, half_circle(chart.node_w2()))
