"""Catenoid between the two unit circles at w1 = 0 and w1 = 2l, and the flap under it."""

from __future__ import annotations

import math

from scipy import integrate, optimize

from .errors import NoCatenoid
from .model import CatenoidProfile, _positive

# minimum of cosh(m)/m, attained where m tanh(m) = 1
M_CRIT = optimize.brentq(lambda m: m * math.tanh(m) - 1.0, 0.5, 2.0, xtol=1e-15)
RATIO_MIN = math.cosh(M_CRIT) / M_CRIT
L_CRIT = 1.0 / RATIO_MIN


def catenoid_parameters(l) -> CatenoidProfile:
    """Solve a cosh(l/a) = 1 on the stable branch (larger a, i.e. m = l/a below M_CRIT)."""
    _positive("l", l)
    target = 1.0 / l
    if target < RATIO_MIN:
        raise NoCatenoid("no catenoid spans the two circles", l=l, l_crit=L_CRIT)
    f = lambda m: math.cosh(m) / m - target
    if f(M_CRIT) >= 0:
        m = M_CRIT
    else:
        lo, hi = min(l, M_CRIT) * 0.5, M_CRIT
        while f(lo) < 0:
            lo *= 0.5
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * hi:
                break
        m = 0.5 * (lo + hi)
    return CatenoidProfile(l / m, l)


def catenoid_area(c: CatenoidProfile):
    """2 pi int_0^{2l} rho sqrt(1 + rho'^2) dt in closed form."""
    a, l = c.a, c.l
    return 2 * math.pi * a * l + math.pi * a * a * math.sinh(2 * l / a)


def flap_area(c: CatenoidProfile):
    """int_0^{2l} (1 - rho) dt in closed form."""
    a, l = c.a, c.l
    return 2 * l - 2 * a * a * math.sinh(l / a)


def catenoid_area_quadrature(c: CatenoidProfile):
    f = lambda t: 2 * math.pi * float(c.rho_bar(t)) * math.sqrt(1 + float(c.rho_bar_prime(t)) ** 2)
    return integrate.quad(f, 0, 2 * c.l, epsabs=1e-13, epsrel=1e-12)[0]


def flap_area_quadrature(c: CatenoidProfile):
    return integrate.quad(lambda t: 1 - float(c.rho_bar(t)), 0, 2 * c.l, epsabs=1e-13, epsrel=1e-12)[0]
