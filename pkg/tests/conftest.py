import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from alleezone.reactions import cubic_pair, polynomial_pair


def alt_coeffs(theta=0.25, scale=0.1, bump=8.0):
    """g = scale * u (u - theta) (1 - u) (1 + bump u): weak Allee effect near 0
    but a strong push towards 1, which opens a gap between the two connected
    critical lengths."""
    g = scale * P.polymul(P.polymul([0.0, 1.0], [-theta, 1.0]), P.polymul([1.0, -1.0], [1.0, bump]))
    return [0.0, 1.0, -1.0], list(g)


@pytest.fixture(scope="session")
def cubic():
    return cubic_pair(0.25)


@pytest.fixture(scope="session")
def alt_pair():
    f, g = alt_coeffs()
    return polynomial_pair(f, g)


def cubic_theta_star(theta):
    # root of -theta q^2/2 + (1+theta) q^3/3 - q^4/4 = 0 in (theta, 1)
    a = (1.0 + theta) / 3.0
    return 2.0 * (a - np.sqrt(a * a - theta / 2.0))


def midpoint_arc(coeffs, a, top, n=1_000_000):
    """Brute-force midpoint rule for int_a^top dq / sqrt(2 int_q^top r) after
    q = top - t^2, using the exact polynomial primitive."""
    prim = P.polyint(coeffs)
    tt = np.sqrt(top - a)
    t = (np.arange(n) + 0.5) * tt / n
    d = P.polyval(top, prim) - P.polyval(top - t * t, prim)
    return float(np.sum(2.0 * t / np.sqrt(2.0 * d)) * tt / n)


def fd_residual(pair, profile, h, tail=10.0):
    """Max |U'' + r(x, U)| by central differences on a grid through the
    interfaces, with the arithmetic mean of f and g at interface nodes."""
    zone = profile.zone
    ref = zone.interfaces[-1]
    k0 = int(np.floor(ref / h + 1e-9))
    x = ref + h * np.arange(-k0, int(np.ceil(tail / h)) + 1)
    U = lambda y: profile(np.abs(y))
    d2 = (U(x + h) - 2 * U(x) + U(x - h)) / h**2
    u = U(x)
    inside = np.array([zone.in_zone(v) for v in x])
    r = np.where(inside, pair.f(u), pair.g(u))
    for p in zone.interfaces:
        on = np.abs(x - p) < 1e-9
        r = np.where(on, 0.5 * (pair.f(u) + pair.g(u)), r)
    return float(np.max(np.abs(d2 + r)))
