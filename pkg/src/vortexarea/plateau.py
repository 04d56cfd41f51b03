"""Minimal graphs over the subgraph of a profile: the inner non-parametric Plateau problem."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .area import GraphMesh
from .errors import DegenerateProfile, NoConvergence, ValidationError
from .model import BoundaryTrace, MappedChart, ScalarField, SolverOptions, half_circle

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    iters: int
    residual: float
    area: float
    newton_steps: int
    gradient_steps: int
    energies: list
    active_bounds: int = 0

    def to_dict(self):
        return {
            "iters": self.iters,
            "residual": self.residual,
            "area": self.area,
            "newton_steps": self.newton_steps,
            "gradient_steps": self.gradient_steps,
            "active_bounds": self.active_bounds,
        }


def dirichlet_data(chart: MappedChart, bc: BoundaryTrace):
    """Pinned nodes and their values for the subgraph problem.

    Side columns carry phi, the bottom row and the top row (the image of G_h)
    are zero, and collapsed columns are zero throughout.
    """
    n1, n2 = chart.w1.size - 1, chart.sigma.size - 1
    fixed = np.zeros(chart.shape, bool)
    values = np.zeros(chart.shape)
    fixed[0, :] = fixed[n1, :] = True
    fixed[:, 0] = fixed[:, n2] = True
    fixed[chart.collapsed, :] = True
    w2 = chart.node_w2()
    for i in (0, n1):
        if not chart.collapsed[i]:
            values[i] = bc.side(w2[i])
    values[:, 0] = 0.0
    values[:, n2] = 0.0
    values[chart.collapsed, :] = 0.0
    if not chart.collapsed[0]:
        values[0, 1:n2] = bc.side(w2[0, 1:n2])
    if not chart.collapsed[n1]:
        values[n1, 1:n2] = bc.side(w2[n1, 1:n2])
    return fixed, values


def _residual(mesh, g, free, mass):
    r = np.zeros_like(g)
    r[free] = -g[free] / np.where(mass[free] > 0, mass[free], 1.0)
    return r


def chart_mass(chart: MappedChart):
    """Lumped nodal area measured in chart coordinates (w1, s), independent of h."""
    n1, n2 = chart.w1.size - 1, chart.sigma.size - 1
    ref = GraphMesh(chart.node_w1(), np.broadcast_to(chart.sigma[None, :], chart.shape), n1, n2)
    return ref.lumped_mass()


def minimize_graph_area(mesh: GraphMesh, z0, fixed, opts: SolverOptions, label="solve", mass=None,
                        lower=None, upper=None):
    """Damped Newton with gradient fallback and backtracking on the discrete area.

    ``fixed`` is a boolean mask of pinned nodes whose values are taken from z0.
    Optional scalar bounds ``lower`` <= z <= ``upper`` on the free nodes are
    handled by a projected Newton iteration on the epsilon-active set; the
    residual is then the KKT residual, zero on active bounds.  The residual is
    the area gradient divided by ``mass`` (default: the lumped physical nodal
    area).  Returns (z, report).  The energy is convex in the free values, so
    Newton directions are descent directions whenever the Hessian solve
    succeeds, and every accepted step lowers the area.
    """
    z = np.array(z0, float).ravel()
    fixed = np.asarray(fixed, bool).ravel()
    free = ~fixed
    idx = np.flatnonzero(free)
    lo = -np.inf if lower is None else float(lower)
    hi = np.inf if upper is None else float(upper)
    z[idx] = np.clip(z[idx], lo, hi)
    mass = mesh.lumped_mass() if mass is None else np.asarray(mass, float).ravel()
    m_free = np.where(mass[idx] > 0, mass[idx], 1.0)
    E = mesh.area(z)
    energies = [E]
    newton = grad_steps = 0
    if idx.size == 0:
        return z, SolveReport(0, 0.0, E, 0, 0, energies)

    def kkt(z, g):
        # |g|/mass on free nodes; bound nodes whose gradient points outward are exempt
        gf = g[idx]
        zf = z[idx]
        pg = zf - np.clip(zf - gf / m_free, lo, hi)
        eps = min(1e-10, float(np.max(np.abs(pg))))
        active = ((zf <= lo + eps) & (gf > 0)) | ((zf >= hi - eps) & (gf < 0))
        r = np.where(active, 0.0, gf / m_free)
        return float(np.max(np.abs(r))), active

    g = mesh.grad(z)
    res, active = kkt(z, g)
    it = 0
    stall = 0
    while res > opts.tol_res and it < opts.max_iter:
        it += 1
        gf = g[idx]
        inact = np.flatnonzero(~active)
        sub = idx[inact]
        direction = np.zeros(idx.size)
        ok = False
        if sub.size:
            H = mesh.hessian(z)[sub][:, sub].tocsc()
            try:
                d = spla.spsolve(H, -gf[inact])
                if np.all(np.isfinite(d)) and gf[inact] @ d < 0:
                    direction[inact] = d
                    ok = True
            except (RuntimeError, ValueError):  # singular factorization
                ok = False
        if ok:
            newton += 1
        else:
            direction = np.where(active, 0.0, -gf / m_free)
            grad_steps += 1
        t = 1.0
        accepted = False
        slope = float(gf @ direction)
        if -slope < 1e-12 * max(1.0, abs(E)):
            # the area is stationary to round-off: finish with an active-set Newton polish
            zp, rp = _polish_active_set(mesh, z, idx, m_free, lo, hi, opts.tol_res)
            if rp < res:
                z, res = zp, rp
                E = mesh.area(z)
                energies.append(E)
                g = mesh.grad(z)
                res, active = kkt(z, g)
            if res <= opts.tol_res:
                break
            stall += 1
            if stall > 3:
                break
            continue
        else:
            for _ in range(60):
                zt = z.copy()
                zt[idx] = np.clip(z[idx] + t * direction, lo, hi)
                Et = mesh.area(zt)
                if Et <= E + 1e-4 * float(gf @ (zt[idx] - z[idx])) and Et <= E:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            stall += 1
            if stall > 3:
                break
            continue
        stall = 0
        z, E = zt, Et
        energies.append(E)
        g = mesh.grad(z)
        res, active = kkt(z, g)
        log.debug("%s it=%d E=%.15g res=%.3e step=%.3g active=%d", label, it, E, res, t, int(active.sum()))
    if res > opts.tol_res:
        raise NoConvergence(
            "minimal graph iteration did not reach the residual tolerance",
            iter=it,
            residual=res,
            tol_res=opts.tol_res,
        )
    rep = SolveReport(it, res, E, newton, grad_steps, energies)
    rep.active_bounds = int(np.sum(active)) if idx.size else 0
    return z, rep


def _polish_active_set(mesh, z, idx, m_free, lo, hi, tol, max_rounds=40):
    """Primal active-set Newton near a stationary point of the bounded area.

    Nodes on a bound with an outward gradient are held there; Newton runs on
    the others, nodes that leave the box are clipped and added, and bound nodes
    whose gradient points inward by more than ``tol`` are released.  Returns
    the best iterate and its residual.
    """
    z = z.copy()
    zf = z[idx]
    g = mesh.grad(z)[idx]
    act = ((zf <= lo) & (g > 0)) | ((zf >= hi) & (g < 0))
    best, best_res = z.copy(), np.inf
    for _ in range(max_rounds):
        inact = np.flatnonzero(~act)
        if inact.size:
            sub = idx[inact]
            try:
                d = spla.spsolve(mesh.hessian(z)[sub][:, sub].tocsc(), -g[inact])
            except (RuntimeError, ValueError):
                break
            if not np.all(np.isfinite(d)):
                break
            z[sub] = np.clip(z[sub] + d, lo, hi)
        zf = z[idx]
        g = mesh.grad(z)[idx]
        on_lo, on_hi = zf <= lo, zf >= hi
        r = g / m_free
        inward = (on_lo & (r < -tol)) | (on_hi & (r > tol))
        act = (on_lo | on_hi) & ~inward
        res = float(np.max(np.abs(np.where(act, 0.0, r))))
        if res < best_res:
            best, best_res = z.copy(), res
        if res <= tol:
            break
    return best, best_res


def harmonic_interpolant(mesh: GraphMesh, values, fixed):
    """Discrete harmonic extension of the pinned values (P1 stiffness of the mesh)."""
    z = np.array(values, float).ravel()
    fixed = np.asarray(fixed, bool).ravel()
    idx = np.flatnonzero(~fixed)
    if idx.size == 0:
        return z
    K = mesh.hessian(np.zeros(mesh.N)).tocsr()
    rhs = -(K[idx][:, np.flatnonzero(fixed)] @ z[fixed])
    z[idx] = spla.spsolve(K[idx][:, idx].tocsc(), rhs)
    return z


def solve_minimal_graph(chart: MappedChart, bc: BoundaryTrace | None = None, opts: SolverOptions | None = None,
                        init=None, boundary_values=None):
    """Minimal graph over the chart region.

    For a subgraph chart the Dirichlet data are phi on the side walls and zero
    on the bottom and on G_h.  For a rectangle chart pass ``boundary_values``, a
    callable (w1, w2) -> value used on the whole boundary.  ``init`` is an
    optional warm start of nodal values; otherwise the harmonic interpolant of
    the boundary data is used.  Returns (ScalarField, SolveReport).
    """
    bc = bc or BoundaryTrace()
    opts = opts or SolverOptions()
    n1, n2 = chart.w1.size - 1, chart.sigma.size - 1
    if n1 < 16 or n2 < 16:
        raise ValidationError("grid must be at least 17 x 17 nodes", nodes=(n1 + 1, n2 + 1))
    if np.all(chart.collapsed):
        raise DegenerateProfile("h == -1 has an empty subgraph")
    mesh = GraphMesh.from_chart(chart)
    if boundary_values is not None:
        fixed = np.zeros(chart.shape, bool)
        fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
        values = np.zeros(chart.shape)
        w1, w2 = chart.node_w1(), chart.node_w2()
        values[fixed] = boundary_values(w1[fixed], w2[fixed])
    else:
        fixed, values = dirichlet_data(chart, bc)
    if init is None:
        z0 = harmonic_interpolant(mesh, values, fixed)
    else:
        z0 = np.array(init, float).reshape(chart.shape)
        z0[fixed] = values[fixed]
        z0 = z0.ravel()
    bounds = {} if boundary_values is not None else {"lower": 0.0, "upper": 1.0}
    z, report = minimize_graph_area(mesh, z0, fixed, opts, mass=chart_mass(chart), **bounds)
    return ScalarField(chart, z.reshape(chart.shape)), report


def mean_curvature_residual(psi: ScalarField):
    """Discrete mean-curvature operator div(grad psi / sqrt(1 + |grad psi|^2)) at nodes.

    Minus the area gradient divided by the lumped nodal area in chart
    coordinates, i.e. the physical divergence weighted by the column metric
    upper - lower (1 + h for a subgraph).  This is the variational residual of
    the discrete area; boundary nodes are set to zero.
    """
    mesh = GraphMesh.from_chart(psi.chart)
    g = mesh.grad(psi.values)
    mass = chart_mass(psi.chart)
    out = -g / np.where(mass > 0, mass, 1.0)
    out = out.reshape(psi.chart.shape)
    out[0, :] = out[-1, :] = out[:, 0] = out[:, -1] = 0.0
    out[psi.chart.collapsed, :] = 0.0
    return out


def resample_field(psi: ScalarField, chart: MappedChart):
    """Values of psi transported to another chart with the same grid size by chart coordinates."""
    if psi.chart.shape == chart.shape and np.array_equal(psi.chart.w1, chart.w1):
        return np.array(psi.values)
    w1 = chart.node_w1()
    s = np.broadcast_to(chart.sigma[None, :], chart.shape)
    src = psi.chart
    w2 = np.interp(w1, src.w1, src.lower) + s * (np.interp(w1, src.w1, src.upper) - np.interp(w1, src.w1, src.lower))
    return psi.sample(w1, w2)


def regularize_boundary(psi_star: ScalarField, m):
    """((psi - 1/m) v 0) ^ phi_m with phi_m = (sqrt(1 - w2^2) - 2/m) v 0."""
    if not m >= 1:
        raise ValidationError("m must be >= 1", m=m)
    w2 = psi_star.chart.node_w2()
    phi_m = np.maximum(half_circle(w2) - 2.0 / m, 0.0)
    v = np.minimum(np.maximum(psi_star.values - 1.0 / m, 0.0), phi_m)
    return ScalarField(psi_star.chart, v)
