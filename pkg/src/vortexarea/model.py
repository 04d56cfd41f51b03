"""Domain types shared by the solvers: parameters, profiles, charts and sampled fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ConstraintViolation,
    DegenerateProfile,
    InvalidRange,
    ValidationError,
)

TOL_CONV = 1e-10
TOL_COL = 1e-8


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a positive finite number", **{name: value})


@dataclass(frozen=True)
class ProblemParams:
    """Disc radius l and inner cutoff radius epsilon of the polar quadrature."""

    l: float
    epsilon: float = 0.0

    def __post_init__(self):
        _positive("l", self.l)
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise InvalidRange("epsilon must be >= 0", epsilon=self.epsilon)
        if self.epsilon > self.l:
            raise InvalidRange("epsilon must not exceed l", l=self.l, epsilon=self.epsilon)


@dataclass(frozen=True)
class SolverOptions:
    tol_res: float = 1e-8
    max_iter: int = 500
    tol_col: float = TOL_COL

    def __post_init__(self):
        _positive("tol_res", self.tol_res)
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be >= 1", max_iter=self.max_iter)


# ---------------------------------------------------------------------------
# profiles


def second_differences(values):
    v = np.asarray(values, dtype=float)
    return v[:-2] - 2.0 * v[1:-1] + v[2:]


def uniform_knots(l, n_knots):
    _positive("l", l)
    if int(n_knots) < 3:
        raise ValidationError("need at least 3 knots", n_knots=n_knots)
    return np.linspace(0.0, 2.0 * l, int(n_knots))


@dataclass(frozen=True)
class ConvexProfile:
    """Convex, symmetric, piecewise-linear h on [0, 2l].

    ``degenerate`` marks the separate branch h == -1, which is never reached as a
    limit of knot values.
    """

    knots: np.ndarray
    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        k = _frozen(self.knots)
        v = _frozen(self.values)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise ValidationError("knots and values must be 1-D arrays of equal length", n=k.size)
        if not np.all(np.diff(k) > 0):
            raise ValidationError("knots must be strictly increasing")
        if abs(k[0]) > 1e-14:
            raise ValidationError("knots must start at 0", first=float(k[0]))

    @property
    def l(self):
        return 0.5 * float(self.knots[-1])

    @classmethod
    def constant(cls, l, n_knots, c):
        return cls(uniform_knots(l, n_knots), np.full(int(n_knots), float(c)))

    @classmethod
    def minus_one(cls, l, n_knots=3):
        return cls(uniform_knots(l, n_knots), np.full(int(n_knots), -1.0), degenerate=True)

    def __call__(self, w1):
        return np.interp(w1, self.knots, self.values)

    def slope(self, w1):
        """Right derivative of the interpolant (left derivative at the last knot)."""
        w1 = np.asarray(w1, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, w1, side="right") - 1, 0, self.knots.size - 2)
        return (self.values[idx + 1] - self.values[idx]) / (self.knots[idx + 1] - self.knots[idx])

    def violations(self, tol_conv=TOL_CONV):
        """List of violated invariants (empty if the profile is admissible)."""
        out = []
        v = self.values
        if self.degenerate:
            if not np.all(v == -1.0):
                out.append("degenerate profile must be identically -1")
            return out
        if np.any(v < -1.0) or np.any(v > 1.0):
            out.append("values outside [-1, 1]")
        if not np.array_equal(v, v[::-1]):
            out.append("values not symmetric")
        mirrored = self.knots[-1] - self.knots[::-1]
        if not np.allclose(mirrored, self.knots, rtol=0, atol=1e-12 * max(1.0, self.knots[-1])):
            out.append("knots not symmetric")
        if v[0] != 1.0 or v[-1] != 1.0:
            out.append("endpoints not pinned at 1")
        if v.size > 2:
            d = second_differences(v)
            if np.any(d < -tol_conv):
                out.append("interpolant not convex")
        return out

    def validate(self, tol_conv=TOL_CONV):
        bad = self.violations(tol_conv)
        if bad:
            raise ConstraintViolation("; ".join(bad), values=self.values.tolist())
        return self

    def to_dict(self):
        return {
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "degenerate": bool(self.degenerate),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(np.asarray(d["knots"], float), np.asarray(d["values"], float), bool(d.get("degenerate", False)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed profile: {exc}") from exc


def lower_convex_envelope(x, y):
    """Lower convex envelope of the points (x_i, y_i), evaluated at the x_i."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hull = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


def project_convex_symmetric(raw_values, l=None, knots=None, tol_conv=TOL_CONV):
    """Map raw knot values to an admissible profile.

    Clip to [-1, 1], pin the endpoints at 1, average with the mirror image and
    take the lower convex envelope.  Inputs that are already admissible come back
    unchanged, so the map is idempotent.
    """
    v = np.clip(np.asarray(raw_values, dtype=float), -1.0, 1.0)
    if knots is None:
        if l is None:
            raise ValidationError("need l or knots")
        knots = uniform_knots(l, v.size)
    v = v.copy()
    v[0] = v[-1] = 1.0
    v = 0.5 * (v + v[::-1])
    if v.size > 2 and np.any(second_differences(v) < -tol_conv):
        env = lower_convex_envelope(knots, v)
        v = 0.5 * (env + env[::-1])
        v[0] = v[-1] = 1.0
    return ConvexProfile(knots, v)


# ---------------------------------------------------------------------------
# grids and charts


@dataclass(frozen=True)
class RectDomain:
    """Uniform (n1+1) x (n2+1) node grid on [x0, x1] x [y0, y1]."""

    n1: int
    n2: int
    x0: float = 0.0
    x1: float = 2.0
    y0: float = -1.0
    y1: float = 1.0

    def __post_init__(self):
        if int(self.n1) < 2 or int(self.n2) < 2:
            raise ValidationError("grid needs n1, n2 >= 2", n1=self.n1, n2=self.n2)
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValidationError("empty rectangle")

    @classmethod
    def for_length(cls, l, n1, n2=None):
        """The rectangle (0, 2l) x (-1, 1)."""
        _positive("l", l)
        return cls(int(n1), int(n2 if n2 is not None else n1), 0.0, 2.0 * l, -1.0, 1.0)

    @classmethod
    def from_nodes(cls, l, nodes):
        """Square node count ``nodes`` (e.g. 129) on (0, 2l) x (-1, 1)."""
        return cls.for_length(l, int(nodes) - 1)

    @property
    def l(self):
        return 0.5 * (self.x1 - self.x0)

    @property
    def w1(self):
        return np.linspace(self.x0, self.x1, self.n1 + 1)

    @property
    def w2(self):
        return np.linspace(self.y0, self.y1, self.n2 + 1)


@dataclass(frozen=True, eq=False)
class MappedChart:
    """Column chart (w1, s) -> (w1, lower(w1) + s (upper(w1) - lower(w1))), s in [0, 1].

    For the subgraph of h the lower curve is -1 and the upper curve is h, so
    s = (w2 + 1)/(1 + h(w1)) and the metric determinant is 1 + h(w1).  For a
    plain rectangle both curves are constant.
    """

    w1: np.ndarray
    sigma: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    profile: Optional[ConvexProfile] = None
    tol_col: float = TOL_COL
    collapsed: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("w1", "sigma", "lower", "upper"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.lower.shape != self.w1.shape or self.upper.shape != self.w1.shape:
            raise ValidationError("curve arrays must match w1")
        object.__setattr__(self, "collapsed", _frozen(self.upper - self.lower < self.tol_col, bool))

    @property
    def shape(self):
        return (self.w1.size, self.sigma.size)

    @property
    def metric(self):
        return self.upper - self.lower

    def to_physical(self, w1, s):
        lo = np.interp(w1, self.w1, self.lower)
        hi = np.interp(w1, self.w1, self.upper)
        return np.asarray(w1, dtype=float), lo + np.asarray(s, dtype=float) * (hi - lo)

    def to_chart(self, w1, w2):
        lo = np.interp(w1, self.w1, self.lower)
        hi = np.interp(w1, self.w1, self.upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (np.asarray(w2, dtype=float) - lo) / (hi - lo)
        return np.asarray(w1, dtype=float), s

    def node_w2(self):
        """Physical w2 coordinate of every node, shape (n1+1, n2+1)."""
        return self.lower[:, None] + self.sigma[None, :] * self.metric[:, None]

    def node_w1(self):
        return np.broadcast_to(self.w1[:, None], self.shape)

    @property
    def is_rectangle(self):
        return self.profile is None


def cosine_nodes(n):
    """n + 1 nodes on [0, 1] clustered at both ends, s_j = (1 - cos(pi j/n))/2.

    With the lower curve at -1 and the upper at 1 these are the nodes w2 = -cos(pi j/n),
    on which the half-circle data sqrt(1 - w2^2) = sin(pi j/n) is smooth in j; uniform
    nodes leave an O(h^1.5) chord error at w2 = +-1.
    """
    s = 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))
    s[0], s[-1] = 0.0, 1.0
    return s


def build_chart(h: ConvexProfile, grid: RectDomain, tol_col=TOL_COL, spacing="cosine") -> MappedChart:
    """Chart covering the closure of SG_h = {-1 < w2 < h(w1)}.

    ``spacing`` places the s nodes: "cosine" (default, see ``cosine_nodes``) or "uniform".
    """
    if spacing not in ("cosine", "uniform"):
        raise ValidationError("spacing must be 'cosine' or 'uniform'", spacing=spacing)
    if h.degenerate:
        raise DegenerateProfile("h == -1 has an empty subgraph")
    w1 = grid.w1
    if abs(w1[-1] - h.knots[-1]) > 1e-12 * max(1.0, w1[-1]):
        raise ValidationError("grid width does not match profile", grid_width=float(w1[-1]), profile_width=float(h.knots[-1]))
    upper = h(w1)
    sigma = cosine_nodes(grid.n2) if spacing == "cosine" else np.linspace(0.0, 1.0, grid.n2 + 1)
    chart = MappedChart(w1, sigma, np.full_like(w1, -1.0), upper, h, tol_col)
    if np.all(chart.collapsed):
        raise DegenerateProfile("every column of the subgraph is collapsed")
    return chart


def rectangle_chart(grid: RectDomain) -> MappedChart:
    w1 = grid.w1
    return MappedChart(w1, np.linspace(0.0, 1.0, grid.n2 + 1), np.full_like(w1, grid.y0), np.full_like(w1, grid.y1))


# ---------------------------------------------------------------------------
# fields and boundary data


def half_circle(w2):
    w2 = np.asarray(w2, dtype=float)
    return np.sqrt(np.clip(1.0 - w2 * w2, 0.0, None))


@dataclass(frozen=True)
class BoundaryTrace:
    """Dirichlet data: half circle on the sides, zero at the bottom and on G_h.

    With ``truncation_m`` set the side data becomes (phi - 2/m) v 0.
    """

    truncation_m: Optional[float] = None

    def __post_init__(self):
        if self.truncation_m is not None and not self.truncation_m >= 1:
            raise ValidationError("truncation level m must be >= 1", m=self.truncation_m)

    def side(self, w2):
        phi = half_circle(w2)
        if self.truncation_m is not None:
            phi = np.maximum(phi - 2.0 / self.truncation_m, 0.0)
        return phi


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal samples of psi on a chart, shape (n1+1, n2+1)."""

    chart: MappedChart
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.chart.shape:
            raise ValidationError("field shape does not match chart", shape=v.shape, chart=self.chart.shape)
        object.__setattr__(self, "values", v)

    @property
    def mask(self):
        return np.broadcast_to(~self.chart.collapsed[:, None], self.chart.shape)

    def sample(self, w1, w2, outside=0.0):
        """Bilinear interpolation in chart coordinates; ``outside`` beyond the top curve."""
        c = self.chart
        w1 = np.asarray(w1, dtype=float)
        w2 = np.asarray(w2, dtype=float)
        _, s = c.to_chart(w1, w2)
        n1 = c.w1.size - 1
        n2 = c.sigma.size - 1
        x = (w1 - c.w1[0]) / (c.w1[-1] - c.w1[0]) * n1
        i = np.clip(np.floor(x).astype(int), 0, n1 - 1)
        tx = np.clip(x - i, 0.0, 1.0)
        inside = np.isfinite(s) & (s >= -1e-12) & (s <= 1.0 + 1e-12)
        y = np.clip(np.nan_to_num(s, nan=0.0), 0.0, 1.0)
        j = np.clip(np.searchsorted(c.sigma, y, side="right") - 1, 0, n2 - 1)
        ty = (y - c.sigma[j]) / (c.sigma[j + 1] - c.sigma[j])
        v = self.values
        out = (
            (1 - tx) * (1 - ty) * v[i, j]
            + tx * (1 - ty) * v[i + 1, j]
            + (1 - tx) * ty * v[i, j + 1]
            + tx * ty * v[i + 1, j + 1]
        )
        return np.where(inside, out, outside)


@dataclass(frozen=True, eq=False)
class PolarMapField:
    """Samples of a map u: B_l -> R^2 on a tensor (r, theta) grid.

    ``theta`` holds n nodes of one period starting at theta[0]; the cell after the
    last node wraps to theta[0] + 2 pi.
    """

    r: np.ndarray
    theta: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("r", "theta", "u1", "u2"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        shape = (self.r.size, self.theta.size)
        if self.u1.shape != shape or self.u2.shape != shape:
            raise ValidationError("map samples must have shape (n_r, n_theta)", shape=shape)
        if np.any(np.diff(self.r) <= 0) or self.r[0] < 0:
            raise ValidationError("r nodes must be nonnegative and increasing")
        if np.any(np.diff(self.theta) <= 0) or self.theta[-1] - self.theta[0] >= 2 * np.pi:
            raise ValidationError("theta nodes must be increasing within one period")
        if np.any(np.hypot(self.u1, self.u2) > 1.0 + self.tol):
            raise ConstraintViolation("map leaves the closed unit disc")


@dataclass(frozen=True)
class SequenceParams:
    """Index k and the parameters r_k, theta_k, theta_bar_k of an approximating map."""

    k: int
    r_k: float
    theta_k: float
    theta_bar_k: float

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValidationError("k must be >= 1", k=self.k)
        _positive("r_k", self.r_k)
        if not (0 < self.theta_k < self.theta_bar_k < np.pi / 4):
            raise ValidationError(
                "need 0 < theta_k < theta_bar_k < pi/4", theta_k=self.theta_k, theta_bar_k=self.theta_bar_k
            )

    @classmethod
    def default(cls, k):
        k = int(k)
        if k < 2:
            raise ValidationError("default schedule needs k >= 2", k=k)
        return cls(k, 1.0 / k, 1.0 / k**2, 2.0 / k**2)

    def check_radius(self, l):
        if not self.r_k < 0.5 * l:
            raise ValidationError("need r_k < l/2", r_k=self.r_k, l=l)

    def ramp(self, r):
        """Cutoff equal to 0 on [0, 1/k^2], 1 on [1/k, inf), slope between 0 and 2k."""
        k = self.k
        a, b = 1.0 / k**2, 1.0 / k
        x = np.clip((np.asarray(r, dtype=float) - a) / (b - a), 0.0, 1.0)
        if 1.5 / (b - a) <= 2 * k:
            return x * x * (3.0 - 2.0 * x)
        return x

    def ramp_slope(self, r):
        k = self.k
        a, b = 1.0 / k**2, 1.0 / k
        x = np.asarray(r, dtype=float)
        t = np.clip((x - a) / (b - a), 0.0, 1.0)
        inside = (x > a) & (x < b)
        if 1.5 / (b - a) <= 2 * k:
            return np.where(inside, 6.0 * t * (1.0 - t) / (b - a), 0.0)
        return np.where(inside, 1.0 / (b - a), 0.0)


@dataclass(frozen=True)
class CatenoidProfile:
    """rho_bar(t) = a cosh((t - l)/a) on [0, 2l] with rho_bar(0) = rho_bar(2l) = 1."""

    a: float
    l: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("l", self.l)

    def rho_bar(self, t):
        return self.a * np.cosh((np.asarray(t, dtype=float) - self.l) / self.a)

    def rho_bar_prime(self, t):
        return np.sinh((np.asarray(t, dtype=float) - self.l) / self.a)
