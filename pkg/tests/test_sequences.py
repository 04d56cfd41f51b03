import math

import numpy as np
import pytest

from vortexarea.area import map_graph_area_polar, vortex_graph_area
from vortexarea.catenoid import catenoid_area, catenoid_parameters, flap_area
from vortexarea.errors import NoCatenoid, ValidationError
from vortexarea.model import ProblemParams, SequenceParams
from vortexarea.sequences import (
    CATENOID_FLAP,
    CYLINDER,
    RECOVERY,
    TWO_DISCS,
    catenoid_flap_sequence,
    cylinder_sequence,
    limit_prediction,
    piecewise_nodes,
    recovery_sequence,
    recovery_sequence_area,
    sequence_area,
    two_discs_sequence,
)
from vortexarea.sequences import _segment_then_arc


def vortex(l):
    return vortex_graph_area(ProblemParams(l))


def polar_area_two_ways(u):
    """Midpoint quadrature written out independently; returns (with, without) the Jacobian term."""
    th = np.append(u.theta, u.theta[0] + 2 * np.pi)
    fa = np.concatenate([u.u1, u.u1[:, :1]], axis=1)
    fb = np.concatenate([u.u2, u.u2[:, :1]], axis=1)
    out = []
    for with_jac in (True, False):
        total = 0.0
        for i in range(u.r.size - 1):
            dr = u.r[i + 1] - u.r[i]
            rc = 0.5 * (u.r[i] + u.r[i + 1])
            dt = np.diff(th)
            ar = 0.5 * (fa[i + 1, 1:] + fa[i + 1, :-1] - fa[i, 1:] - fa[i, :-1]) / dr
            br = 0.5 * (fb[i + 1, 1:] + fb[i + 1, :-1] - fb[i, 1:] - fb[i, :-1]) / dr
            at = 0.5 * (fa[i + 1, 1:] + fa[i, 1:] - fa[i + 1, :-1] - fa[i, :-1]) / dt
            bt = 0.5 * (fb[i + 1, 1:] + fb[i, 1:] - fb[i + 1, :-1] - fb[i, :-1]) / dt
            j2 = (ar * bt - at * br) ** 2 if with_jac else 0.0
            total += float(np.sum(np.sqrt(rc * rc * (1 + ar * ar + br * br) + at * at + bt * bt + j2) * dr * dt))
        out.append(total)
    return out


def nodes(u, r, theta):
    i = int(np.argmin(np.abs(u.r - r)))
    j = int(np.argmin(np.abs(u.theta - theta)))
    assert abs(u.r[i] - r) < 1e-12 and abs(u.theta[j] - theta) < 1e-12
    return u.u1[i, j], u.u2[i, j]


def test_piecewise_nodes():
    n = piecewise_nodes([0.0, 0.1, 1.0], [2, 3])
    assert np.allclose(n, [0, 0.05, 0.1, 0.4, 0.7, 1.0])
    with pytest.raises(ValidationError):
        piecewise_nodes([0.0, 0.0, 1.0], 2)


def test_cylinder_sequence_pointwise():
    p = SequenceParams(50, 0.02, 0.02, 0.04)
    u = cylinder_sequence(p, 1.0)
    assert nodes(u, 0.0, 0.0) == pytest.approx((-1.0, 0.0), abs=1e-15)
    assert nodes(u, 0.02, np.pi) == pytest.approx((-1.0, 0.0), abs=1e-15)
    R, T = np.meshgrid(u.r, u.theta, indexing="ij")
    outside = (R >= p.r_k) & (np.minimum(T, 2 * np.pi - T) >= p.theta_k)
    assert np.allclose(u.u1[outside], np.cos(T[outside]), atol=1e-12)
    assert np.allclose(u.u2[outside], np.sin(T[outside]), atol=1e-12)
    assert np.max(np.abs(np.hypot(u.u1, u.u2) - 1)) < 1e-12


def test_cylinder_sequence_area():
    p = SequenceParams(50, 0.02, 0.02, 0.04)
    out, u = sequence_area(CYLINDER, 1.0, 50, params=p)
    assert abs(out["relative_gap"]) <= 0.02
    assert out["limit_prediction"] == pytest.approx(vortex(1.0) + 2 * math.pi, rel=1e-14)


def test_two_discs_sequence():
    p = SequenceParams.default(64)
    u = two_discs_sequence(p, 2.0)
    R, T = np.meshgrid(u.r, u.theta, indexing="ij")
    far = R >= 1 / 64
    assert np.allclose(u.u1[far], np.cos(T[far]), atol=1e-14) and np.allclose(u.u2[far], np.sin(T[far]), atol=1e-14)
    near = R <= 1 / 64**2
    assert np.all(u.u1[near] == 0) and np.all(u.u2[near] == 0)
    assert np.all(np.hypot(u.u1, u.u2) <= 1 + 1e-14)
    out, _ = sequence_area(TWO_DISCS, 2.0, 64)
    assert abs(out["relative_gap"]) <= 0.02


def test_catenoid_flap_sequence_pointwise():
    p = SequenceParams(50, 0.02, 0.01, 0.02)
    l = 0.4
    u = catenoid_flap_sequence(p, l)
    c = catenoid_parameters(l)
    R, T = np.meshgrid(u.r, u.theta, indexing="ij")
    tt = np.minimum(T, 2 * np.pi - T)
    outside = (R > p.r_k) & (tt >= p.theta_bar_k)
    assert np.allclose(u.u1[outside], np.cos(T[outside]), atol=1e-12)
    assert np.allclose(u.u2[outside], np.sin(T[outside]), atol=1e-12)
    assert np.all(np.hypot(u.u1, u.u2) <= 1 + 1e-12)
    # along the wedge the slice path leaves (1, 0) down the axis to (rho, 0), then follows |y| = rho
    i = int(np.searchsorted(u.r, 0.3))
    rho = float(c.rho_bar((u.r[i] - p.r_k) / (l - p.r_k) * l))
    col = u.theta <= p.theta_k + 1e-15
    x, y = u.u1[i, col], u.u2[i, col]
    on_circle = np.abs(np.hypot(x, y) - rho) < 1e-12
    on_axis = (np.abs(y) < 1e-14) & (x >= rho - 1e-12) & (x <= 1 + 1e-12)
    assert np.all(on_circle | on_axis)
    assert on_circle.sum() > 0.9 * col.sum()
    lam = np.linspace(0, 1, 100001)
    px, py = _segment_then_arc(lam, np.full_like(lam, rho))
    seg = py == 0
    assert px[seg].max() == 1.0 and px[seg & (px >= 0)].min() == pytest.approx(rho, abs=1e-4)
    assert np.max(np.diff(px[seg & (px > 0)][::-1])) < 1e-4
    with pytest.raises(NoCatenoid):
        catenoid_flap_sequence(SequenceParams.default(64), 1.0)


def test_catenoid_flap_area_against_half_catenoid_plus_flap():
    p = SequenceParams(50, 0.02, 0.01, 0.02)
    out, _ = sequence_area(CATENOID_FLAP, 0.4, 50, params=p)
    c = catenoid_parameters(0.4)
    assert out["limit_prediction"] == pytest.approx(vortex(0.4) + 0.5 * catenoid_area(c) + flap_area(c), rel=1e-14)
    assert abs(out["relative_gap"]) <= 0.03
    out, _ = sequence_area(CATENOID_FLAP, 0.4, 64)
    assert abs(out["relative_gap"]) <= 0.03


@pytest.mark.parametrize("which,l", [(CYLINDER, 1.0), (TWO_DISCS, 2.0), (CATENOID_FLAP, 0.4)])
def test_gap_shrinks_along_doubling_schedule(which, l):
    gaps = [abs(sequence_area(which, l, k)[0]["relative_gap"]) for k in (8, 16, 32, 64)]
    assert all(b <= a + 0.01 for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < gaps[0]


@pytest.mark.parametrize("which,l", [(CYLINDER, 1.0), (TWO_DISCS, 2.0), (CATENOID_FLAP, 0.4)])
def test_polar_quadrature_dual_route(which, l):
    _, u = sequence_area(which, l, 16, cells=16)
    with_jac, without = polar_area_two_ways(u)
    assert map_graph_area_polar(u) == pytest.approx(with_jac, rel=1e-12)
    if which == CYLINDER:
        # an S^1-valued map has a vanishing Jacobian; the discrete term is a chord effect of order h^2
        assert with_jac - without < 1e-3 * with_jac


def test_recovery_sequence(optimum_04):
    r = optimum_04
    k = 64
    p = SequenceParams.default(k)
    u = recovery_sequence(r.h_star, r.psi_star, p)
    assert np.all(np.hypot(u.u1, u.u2) <= 1 + 1e-9)
    R, T = np.meshgrid(u.r, u.theta, indexing="ij")
    tt = np.minimum(T, 2 * np.pi - T)
    plain = (R >= 0.5 * p.r_k) & (tt >= p.theta_bar_k)
    assert np.allclose(u.u1[plain], np.cos(T[plain]), atol=1e-12)
    assert np.allclose(u.u2[plain], np.sin(T[plain]), atol=1e-12)
    j = int(np.argmin(np.abs(u.theta - p.theta_k)))
    big = u.r >= p.r_k
    assert np.allclose(u.u1[big, j], 1.0, atol=1e-12) and np.allclose(u.u2[big, j], 0.0, atol=1e-12)
    out = recovery_sequence_area(0.4, k, optimum=r)
    assert out["limit_prediction"] == pytest.approx(limit_prediction(RECOVERY, 0.4, r.F_star), rel=1e-15)
    assert abs(out["relative_gap"]) <= 0.03


def test_limit_prediction_validation():
    with pytest.raises(ValidationError):
        limit_prediction(RECOVERY, 0.4)
    with pytest.raises(ValidationError):
        limit_prediction("spiral", 0.4)
    with pytest.raises(ValidationError):
        cylinder_sequence(SequenceParams.default(2), 0.25)
