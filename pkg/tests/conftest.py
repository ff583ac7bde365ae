import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from hardy.radial import bump_density, unit_sphere_area


def one(t):
    return 1.0


def zero(t):
    return 0.0


def newton_potential_direct(n, phi, r_support, r):
    """Independent oracle for the Green potential: direct quadrature of the
    Newton kernel over (source radius, polar angle), no radial ODE formula."""
    om_n1 = unit_sphere_area(n)
    om_n2 = unit_sphere_area(n - 1)
    pref = om_n2 / ((n - 2) * om_n1)

    def integrand(theta, s):
        d2 = r * r + s * s - 2 * r * s * math.cos(theta)
        return phi(s) * s ** (n - 1) * math.sin(theta) ** (n - 2) * d2 ** ((2 - n) / 2)

    val, _ = dblquad(integrand, 0.0, r_support, 0.0, math.pi,
                     epsabs=1e-12, epsrel=1e-10)
    return pref * val


@pytest.fixture(scope="session")
def radial3():
    from hardy.radial import make_radial_problem
    return make_radial_problem(3, bump_density(1.0), 1.0)


@pytest.fixture(scope="session")
def radial_all():
    from hardy.radial import make_radial_problem
    return {n: make_radial_problem(n, bump_density(1.0), 1.0) for n in (3, 4, 5)}


def euler_zero_count(lam, eps):
    """Zeros on (eps, 1] of the solution of -y'' = lam/(4 t^2) y vanishing
    at eps: phases nu*log(t/eps) with nu = sqrt(lam-1)/2 cross pi at
    t = eps * exp(k pi / nu)."""
    if lam <= 1.0:
        return 0
    nu = math.sqrt(lam - 1.0) / 2.0
    return int(math.floor(nu * math.log(1.0 / eps) / math.pi))
