"""Outer minimization over convex symmetric profiles, branch comparison and threshold search."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize as sopt

from .area import GraphMesh, functional_F2l, relaxed_area
from .catenoid import catenoid_parameters
from .errors import NoCatenoid, NoConvergence, NoSignChange, ValidationError, VortexError
from .model import (
    BoundaryTrace,
    ConvexProfile,
    ProblemParams,
    RectDomain,
    ScalarField,
    SolverOptions,
    build_chart,
    project_convex_symmetric,
    second_differences,
    uniform_knots,
)
from .plateau import solve_minimal_graph

log = logging.getLogger(__name__)

CATENOID = "catenoid-type"
TWO_DISCS = "two-discs"
SNAP = 1e-6


@dataclass(frozen=True)
class OptimizeOptions:
    grid: int = 65
    method: str = "gradient"
    max_outer: int = 200
    ftol: float = 1e-11
    min_step: float = 1e-4
    polish: bool = True
    init: str = "catenoid"
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if int(self.grid) < 17:
            raise ValidationError("grid must have at least 17 nodes per side", grid=self.grid)
        if self.method not in ("gradient", "coordinate"):
            raise ValidationError("method must be 'gradient' or 'coordinate'", method=self.method)
        if self.init not in ("catenoid", "flat"):
            raise ValidationError("init must be 'catenoid' or 'flat'", init=self.init)


@dataclass
class OptimizeResult:
    l: float
    h_star: ConvexProfile
    psi_star: Optional[ScalarField]
    F_star: float
    branch: str
    F_nontrivial: float
    h_nontrivial: ConvexProfile
    psi_nontrivial: ScalarField
    evaluations: int
    trajectory: list

    def summary(self):
        return {
            "l": self.l,
            "F": self.F_star,
            "branch": self.branch,
            "F_nontrivial": self.F_nontrivial,
            "relaxed_area": relaxed_area(ProblemParams(self.l), self.F_star),
            "h_nontrivial": self.h_nontrivial.to_dict(),
            "evaluations": self.evaluations,
        }


def _check_knots(n_knots):
    n = int(n_knots)
    if n < 5 or n % 2 == 0:
        raise ValidationError("n_knots must be odd and >= 5", n_knots=n_knots)
    return n


class ProfileProblem:
    """F_nontrivial(p): inner minimal-graph solve for the profile with free half-values p.

    The full knot vector is (1, p_1, ..., p_m, p_{m-1}, ..., p_1, 1) with
    m = (n_knots - 1)/2.  Because the inner problem is itself a minimization, the
    derivative of its optimal value with respect to p is the partial derivative
    of the discrete area with respect to the node positions at fixed nodal
    heights, so gradients cost one extra assembly and no adjoint solve.
    """

    def __init__(self, l, n_knots, opts: OptimizeOptions):
        self.l = float(l)
        self.n = _check_knots(n_knots)
        self.m = (self.n - 1) // 2
        self.opts = opts
        self.knots = uniform_knots(self.l, self.n)
        self.grid = RectDomain.from_nodes(self.l, opts.grid)
        self.bc = BoundaryTrace()
        self.warm = None
        self.cache = {}
        self.evaluations = 0
        self.best = None
        self.trajectory = []
        # d full / d p
        P = np.zeros((self.n, self.m))
        for q in range(self.m):
            P[q + 1, q] += 1.0
            if self.n - 2 - q != q + 1:
                P[self.n - 2 - q, q] += 1.0
        self.P = P
        # hat-function weights of the grid columns with respect to the knots
        w1 = self.grid.w1
        B = np.zeros((w1.size, self.n))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = 1.0
            B[:, k] = np.interp(w1, self.knots, e)
        self.B = B
        D = np.zeros((self.n - 2, self.n))
        for i in range(self.n - 2):
            D[i, i : i + 3] = (1.0, -2.0, 1.0)
        self.D = D

    def full(self, p):
        v = np.ones(self.n)
        v[1:-1] = (self.P @ np.asarray(p, float))[1:-1]
        return v

    def half(self, values):
        return np.asarray(values, float)[1 : self.m + 1].copy()

    def profile(self, p):
        # knot values within SNAP of -1 are set to -1 so that nearly empty columns are collapsed
        # instead of carrying needle-shaped cells
        v = self.full(p)
        v = np.where(v < -1.0 + SNAP, -1.0, v)
        return project_convex_symmetric(v, knots=self.knots)

    def evaluate(self, p):
        """(F, dF/dp, psi) at the projected profile."""
        key = np.asarray(p, float).tobytes()
        if key in self.cache:
            return self.cache[key]
        h = self.profile(p)
        chart = build_chart(h, self.grid, self.opts.solver.tol_col)
        psi = None
        if self.warm is not None:
            # warm start on the new chart: same chart coordinates, heights scaled with thinning columns
            old_values, old_metric = self.warm
            ratio = np.minimum(1.0, chart.metric / np.where(old_metric > 0, old_metric, 1.0))
            init = old_values * ratio[:, None]
            try:
                psi, rep = solve_minimal_graph(chart, self.bc, replace(self.opts.solver, max_iter=100), init=init)
            except NoConvergence:
                psi = None
        if psi is None:
            try:
                psi, rep = solve_minimal_graph(chart, self.bc, self.opts.solver)
            except NoConvergence as exc:
                exc.context["h"] = h.values.tolist()
                raise
        F = functional_F2l(h, psi, self.bc)
        mesh = GraphMesh.from_chart(chart)
        gy = mesh.grad_y(psi.values).reshape(chart.shape)
        dF_dcol = gy @ chart.sigma
        grad = (self.B.T @ dF_dcol) @ self.P
        self.warm = (psi.values, chart.metric)
        self.evaluations += 1
        out = (F, grad, psi, h)
        if len(self.cache) > 64:
            self.cache.clear()
        self.cache[key] = out
        if self.best is None or F < self.best[0]:
            self.best = (F, h, psi)
            self.trajectory.append(F)
        log.debug("l=%.4f eval=%d F=%.12f", self.l, self.evaluations, F)
        return out

    def fun(self, p):
        return self.evaluate(p)[0]

    def jac(self, p):
        return self.evaluate(p)[1]

    def constraint_matrix(self):
        """Second differences of the full vector as an affine function A p + b >= 0."""
        e = np.zeros(self.n)
        e[0] = e[-1] = 1.0
        return self.D @ self.P, self.D @ e


def initial_values(l, n_knots, how="catenoid"):
    """Knot values of the starting profile: 2 rho_bar - 1 when a catenoid exists, else 1."""
    knots = uniform_knots(l, n_knots)
    if how == "catenoid":
        try:
            c = catenoid_parameters(l)
            return project_convex_symmetric(np.clip(2.0 * c.rho_bar(knots) - 1.0, -1, 1), knots=knots).values
        except NoCatenoid:
            pass
    return np.ones(int(n_knots))


def _run_gradient(prob: ProfileProblem, p0):
    A, b = prob.constraint_matrix()
    cons = [{"type": "ineq", "fun": lambda p: A @ p + b, "jac": lambda p: A}]
    res = sopt.minimize(
        prob.fun,
        p0,
        jac=prob.jac,
        method="SLSQP",
        bounds=[(-1.0, 1.0)] * prob.m,
        constraints=cons,
        options={"maxiter": prob.opts.max_outer, "ftol": prob.opts.ftol},
    )
    return res


def _run_coordinate(prob: ProfileProblem, p0):
    """Coordinate descent with a shrinking step, then a Nelder-Mead polish."""
    p = prob.half(prob.profile(p0).values)
    F = prob.fun(p)
    step = 0.25
    sweeps = 0
    while step >= prob.opts.min_step and sweeps < prob.opts.max_outer:
        sweeps += 1
        improved = False
        for q in range(prob.m):
            for sgn in (-1.0, 1.0):
                trial = p.copy()
                trial[q] += sgn * step
                trial = prob.half(prob.profile(trial).values)
                Ft = prob.fun(trial)
                if Ft < F:
                    p, F, improved = trial, Ft, True
                    break
        if not improved:
            step *= 0.5
    if prob.opts.polish:
        sopt.minimize(
            lambda x: prob.fun(prob.half(prob.profile(x).values)),
            p,
            method="Nelder-Mead",
            options={"xatol": prob.opts.min_step, "fatol": 1e-10, "maxfev": 40 * prob.m},
        )


def optimize_profile(l, n_knots=17, opts: OptimizeOptions | None = None, init_values=None) -> OptimizeResult:
    """Best convex symmetric profile with pinned ends, compared against h == -1.

    F_star = min(F_nontrivial, pi); the two-discs branch is reported with the
    degenerate profile and no field.
    """
    opts = opts or OptimizeOptions()
    if not (isinstance(l, (int, float)) and math.isfinite(l) and l > 0):
        raise ValidationError("l must be positive", l=l)
    prob = ProfileProblem(l, n_knots, opts)
    v0 = initial_values(l, prob.n, opts.init) if init_values is None else np.asarray(init_values, float)
    if v0.shape != (prob.n,):
        raise ValidationError("initial values must match the knot count", n_knots=prob.n)
    p0 = prob.half(prob.profile(prob.half(v0)).values)
    # the flat profile is always a candidate; it realizes the cylinder value 2 pi l
    prob.fun(np.ones(prob.m))
    prob.fun(p0)
    if opts.method == "gradient":
        res = _run_gradient(prob, p0)
        log.info("l=%.4f SLSQP: %s (nit=%s)", l, res.message, res.get("nit"))
    else:
        _run_coordinate(prob, p0)
    F_nt, h_nt, psi_nt = prob.best
    if F_nt < math.pi:
        F_star, branch, h_star, psi_star = F_nt, CATENOID, h_nt, psi_nt
    else:
        h_star = ConvexProfile.minus_one(l, prob.n)
        F_star, branch, psi_star = functional_F2l(h_star, None), TWO_DISCS, None
    return OptimizeResult(
        float(l), h_star, psi_star, float(F_star), branch, float(F_nt), h_nt, psi_nt, prob.evaluations, list(prob.trajectory)
    )


def threshold_gap(l, n_knots=17, opts: OptimizeOptions | None = None, init_values=None):
    """g(l) = pi - F_nontrivial(l) together with the optimizer result."""
    r = optimize_profile(l, n_knots, opts, init_values)
    return math.pi - r.F_nontrivial, r


@dataclass
class ThresholdResult:
    l0: float
    lo: float
    hi: float
    g_lo: float
    g_hi: float
    history: list

    def to_dict(self):
        return {"l0": self.l0, "bracket": [self.lo, self.hi], "g_lo": self.g_lo, "g_hi": self.g_hi, "history": self.history}


def find_threshold(lo, hi, tol_l=0.01, n_knots=17, opts: OptimizeOptions | None = None) -> ThresholdResult:
    """Bisection for the sign change of g(l) = pi - F_nontrivial(l) on (lo, hi)."""
    if not (0 < lo < hi):
        raise ValidationError("need 0 < lo < hi", lo=lo, hi=hi)
    if not tol_l > 0:
        raise ValidationError("tol_l must be positive", tol_l=tol_l)
    opts = opts or OptimizeOptions()
    g_lo, r_lo = threshold_gap(lo, n_knots, opts)
    g_hi, r_hi = threshold_gap(hi, n_knots, opts)
    history = [{"l": lo, "g": g_lo}, {"l": hi, "g": g_hi}]
    if (g_lo > 0) == (g_hi > 0):
        raise NoSignChange("g has the same sign at both ends", lo=lo, hi=hi, g_lo=g_lo, g_hi=g_hi)
    a, b, ga, gb = lo, hi, g_lo, g_hi
    warm = r_lo.h_nontrivial.values
    while b - a > tol_l:
        mid = 0.5 * (a + b)
        gm, rm = threshold_gap(mid, n_knots, opts, init_values=warm)
        # a cold start guards against a warm start stuck on the wrong side
        gc, rc = threshold_gap(mid, n_knots, opts)
        if gc > gm:
            gm, rm = gc, rc
        history.append({"l": mid, "g": gm})
        if (gm > 0) == (ga > 0):
            a, ga = mid, gm
            warm = rm.h_nontrivial.values
        else:
            b, gb = mid, gm
    return ThresholdResult(0.5 * (a + b), a, b, ga, gb, history)


def _value_row(args):
    l, n_knots, opts = args
    try:
        r = optimize_profile(l, n_knots, opts)
        return {"l": l, "F": r.F_star, "branch": r.branch, "relaxed_area": relaxed_area(ProblemParams(l), r.F_star)}
    except VortexError as exc:
        return {"l": l, "F": float("nan"), "branch": "error", "relaxed_area": float("nan"), "error": exc.to_dict()}


def value_curve(l_list, n_knots=17, opts: OptimizeOptions | None = None, threads=1):
    """Rows (l, F, branch, relaxed_area) sorted by l; failed rows are kept with NaN values."""
    ls = sorted(float(x) for x in l_list)
    if any(not (x > 0) for x in ls):
        raise ValidationError("all l must be positive")
    opts = opts or OptimizeOptions()
    jobs = [(x, n_knots, opts) for x in ls]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_value_row, jobs))
    else:
        rows = [_value_row(j) for j in jobs]
    return rows
