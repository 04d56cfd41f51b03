import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexarea.area import scalar_graph_area
from vortexarea.catenoid import catenoid_parameters
from vortexarea.errors import DegenerateProfile, NoConvergence, ValidationError
from vortexarea.model import (
    ConvexProfile,
    RectDomain,
    ScalarField,
    SolverOptions,
    build_chart,
    half_circle,
    project_convex_symmetric,
    rectangle_chart,
)
from vortexarea.plateau import (
    mean_curvature_residual,
    regularize_boundary,
    solve_minimal_graph,
)


def scherk(x, y):
    return np.log(np.cos(x) / np.cos(y))


def scherk_error(nodes):
    c = rectangle_chart(RectDomain(nodes - 1, nodes - 1, -1.2, 1.2, -1.2, 1.2))
    psi, _ = solve_minimal_graph(c, boundary_values=scherk)
    exact = scherk(c.node_w1(), c.node_w2())
    return float(np.max(np.abs(psi.values - exact)[1:-1, 1:-1]))


def test_affine_data_reproduces_the_plane():
    c = rectangle_chart(RectDomain(32, 32, 0, 1, 0, 2))
    plane = lambda x, y: 0.3 + 1.5 * x - 0.7 * y
    psi, rep = solve_minimal_graph(c, boundary_values=plane)
    assert np.max(np.abs(psi.values - plane(c.node_w1(), c.node_w2()))) < 1e-12
    # round-off in the area gradient is divided by the nodal area (~1e-3 here)
    assert np.max(np.abs(mean_curvature_residual(psi))) < 1e-10


def test_scherk_oracle_second_order():
    e65, e129 = scherk_error(65), scherk_error(129)
    assert e129 <= 5e-3
    assert 3.2 <= e65 / e129 <= 4.8


def test_half_catenoid_oracle():
    c = catenoid_parameters(0.4)
    chart = rectangle_chart(RectDomain(128, 128, 0.0, 0.8, -0.9 * c.a, 0.9 * c.a))
    f = lambda t, w: np.sqrt(c.rho_bar(t) ** 2 - w * w)
    psi, _ = solve_minimal_graph(chart, boundary_values=f)
    err = np.abs(psi.values - f(chart.node_w1(), chart.node_w2()))[1:-1, 1:-1]
    assert err.max() <= 1e-2


def test_residual_of_scherk_samples_is_second_order():
    # measured on the fixed sub-square |x|, |y| <= 0.6
    out = []
    for n in (33, 65, 129):
        c = rectangle_chart(RectDomain(n - 1, n - 1, -1.2, 1.2, -1.2, 1.2))
        x, y = c.node_w1(), c.node_w2()
        r = mean_curvature_residual(ScalarField(c, scherk(x, y)))
        inner = (np.abs(x) <= 0.6 + 1e-12) & (np.abs(y) <= 0.6 + 1e-12)
        out.append(np.max(np.abs(r[inner])))
    assert out[-1] < 1e-4
    assert 3.8 <= out[0] / out[1] <= 4.2 and 3.8 <= out[1] / out[2] <= 4.2


def test_paraboloid_is_not_minimal():
    c = rectangle_chart(RectDomain(16, 16, 0, 1, -1, 1))
    r = mean_curvature_residual(ScalarField(c, c.node_w2() ** 2))
    assert np.all(np.abs(r[1:-1, 1:-1]) > 1e-3)


def test_solver_errors():
    l = 0.5
    with pytest.raises(DegenerateProfile):
        build_chart(ConvexProfile.minus_one(l, 5), RectDomain.from_nodes(l, 17))
    c = build_chart(ConvexProfile.constant(l, 5, 1.0), RectDomain.from_nodes(l, 9))
    with pytest.raises(ValidationError):
        solve_minimal_graph(c)
    c = build_chart(ConvexProfile.constant(l, 5, 0.0), RectDomain.from_nodes(l, 33))
    with pytest.raises(NoConvergence) as exc:
        solve_minimal_graph(c, opts=SolverOptions(tol_res=1e-14, max_iter=1))
    assert exc.value.context["iter"] == 1


def _check_solution(h, psi, rep):
    c = psi.chart
    v = psi.values
    assert v.min() >= 0.0 and v.max() <= 1.0
    # strictly below the half cylinder inside the subgraph
    inner = ~c.collapsed
    inner[0] = inner[-1] = False
    assert np.all(v[inner, 1:-1] <= half_circle(c.node_w2()[inner, 1:-1]) + 1e-9)
    assert np.max(np.abs(v - v[::-1])) <= 1e-10
    e = np.array(rep.energies)
    assert np.all(np.diff(e) <= 1e-14 * e[0])
    assert rep.residual <= SolverOptions().tol_res


def test_solution_properties_on_optimum(optimum_04):
    r = optimum_04
    psi = r.psi_star
    _check_solution(r.h_star, *solve_minimal_graph(psi.chart, init=psi.values))


@settings(max_examples=8, deadline=None)
@given(st.lists(st.floats(-0.8, 1.0, allow_nan=False), min_size=2, max_size=2), st.floats(0.2, 1.0))
def test_solution_properties_random_profiles(vals, l):
    half = np.array([1.0] + vals)
    h = project_convex_symmetric(np.concatenate([half, half[-2::-1]]), l=l)
    c = build_chart(h, RectDomain.from_nodes(l, 33))
    psi, rep = solve_minimal_graph(c)
    _check_solution(h, psi, rep)


def test_regularize_boundary(optimum_04):
    psi = optimum_04.psi_star
    zero = ScalarField(psi.chart, np.zeros(psi.chart.shape))
    for m in (1, 4, 32):
        assert np.all(regularize_boundary(zero, m).values == 0)
    with pytest.raises(ValidationError):
        regularize_boundary(psi, 0.5)
    m = 8
    out = regularize_boundary(psi, m).values
    assert np.all(out[psi.values <= 1 / m] == 0)


def _regularized_gaps(psi, ms):
    target = scalar_graph_area(psi)
    return [abs(scalar_graph_area(regularize_boundary(psi, m)) - target) / target for m in ms]


def test_regularized_area_converges_at_rate_one_over_m(optimum_04):
    gaps = _regularized_gaps(optimum_04.psi_star, (4, 8, 16, 32, 64, 128))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    # the truncation strip next to the zero set has width ~ 1/m
    assert all(1.7 <= a / b <= 2.3 for a, b in zip(gaps, gaps[1:]))


def test_regularized_area_gap_at_m32_below_two_percent(optimum_04):
    # the gap is about 3.1 % at 65, 129 and 257 nodes; kept at the stated bound
    assert _regularized_gaps(optimum_04.psi_star, (32,))[0] < 0.02
