"""Reaction pairs: a monostable growth law ``f`` inside the protection zone and
a bistable (strong Allee) law ``g`` outside it.

Every nonlinearity is stored on a bounded core interval and continued
linearly (value and slope matched) beyond it, which makes it globally
Lipschitz without changing anything on the range bounded solutions visit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

__all__ = [
    "Reaction",
    "PolynomialReaction",
    "TabulatedReaction",
    "ReactionPair",
    "cubic_pair",
    "polynomial_pair",
    "tabulated_pair",
    "pair_from_config",
    "validate",
    "theta_star",
    "primitive_F",
    "primitive_G",
    "arc_length",
    "l_alpha",
    "L0_bound",
]

# Gauss-Legendre nodes for short-interval integrals (exact for degree <= 15).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class Reaction:
    """Scalar nonlinearity with value, derivative and primitive from 0.

    Subclasses implement ``_core``, ``_core_d`` and ``_core_int`` on
    ``[lo, hi]``; the public methods add the linear continuation.
    """

    lo: float
    hi: float

    def _core(self, u):
        raise NotImplementedError

    def _core_d(self, u):
        raise NotImplementedError

    def _core_int(self, q):
        raise NotImplementedError

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, self.lo, self.hi)
        out = self._core(uc) + self._core_d(uc) * (u - uc)
        return out if out.ndim else float(out)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        out = self._core_d(np.clip(u, self.lo, self.hi))
        return out if out.ndim else float(out)

    def integral(self, q):
        """Primitive ``int_0^q r(v) dv``."""
        q = np.asarray(q, dtype=float)
        qc = np.clip(q, self.lo, self.hi)
        d = q - qc
        out = self._core_int(qc) + self._core(qc) * d + 0.5 * self._core_d(qc) * d * d
        return out if out.ndim else float(out)

    def integral_between(self, a, b):
        """``int_a^b r``; short intervals go through Gauss-Legendre to dodge
        cancellation in the difference of primitives."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        short = np.abs(half) < 5e-3
        if np.all(short):
            nodes = mid[..., None] + half[..., None] * _GL_X
            out = half * np.sum(_GL_W * self(nodes), axis=-1)
        else:
            out = self.integral(b) - self.integral(a)
            if np.any(short):
                nodes = mid[..., None] + half[..., None] * _GL_X
                gl = half * np.sum(_GL_W * self(nodes), axis=-1)
                out = np.where(short, gl, out)
        return out if np.ndim(out) else float(out)


class PolynomialReaction(Reaction):
    def __init__(self, coeffs, lo: float = -1.0, hi: float = 2.0):
        self.poly = Polynomial(np.asarray(coeffs, dtype=float))
        self._d = self.poly.deriv()
        self._i = self.poly.integ(lbnd=0.0)
        self.lo, self.hi = float(lo), float(hi)
        self._rev = self.poly.coef[::-1].copy()

    def _core(self, u):
        return self.poly(u)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim and u.size and self.lo <= u.min() and u.max() <= self.hi:
            # hot path in the time stepper: plain Horner, no continuation needed
            out = np.full_like(u, self._rev[0])
            for c in self._rev[1:]:
                out *= u
                out += c
            return out
        return super().__call__(u)

    def _core_d(self, u):
        return self._d(u)

    def _core_int(self, q):
        return self._i(q)

    @property
    def coeffs(self) -> list[float]:
        return [float(c) for c in self.poly.coef]


class TabulatedReaction(Reaction):
    """Cubic-spline interpolant of sampled values on ``[u_0, u_end]``."""

    def __init__(self, u, values):
        u = np.asarray(u, dtype=float)
        values = np.asarray(values, dtype=float)
        if u.ndim != 1 or u.shape != values.shape or u.size < 4:
            raise ValueError("table needs at least 4 matching (u, value) samples")
        if np.any(np.diff(u) <= 0):
            raise ValueError("table u-column must be strictly increasing")
        self.spline = CubicSpline(u, values, bc_type="not-a-knot")
        self._d = self.spline.derivative()
        self._i = self.spline.antiderivative()
        if u[0] > 0.0:
            raise ValueError("table must start at u <= 0")
        self._i0 = float(self._i(0.0))
        self.lo, self.hi = float(u[0]), float(u[-1])
        self.table_u = u
        self.table_v = values

    def _core(self, u):
        return self.spline(u)

    def _core_d(self, u):
        return self._d(u)

    def _core_int(self, q):
        return self._i(q) - self._i0


def _one_sided_slope(r: Reaction, x0: float, h: float = 1e-6, side: int = 1) -> float:
    # second-order one-sided difference
    return side * (-3.0 * r(x0) + 4.0 * r(x0 + side * h) - r(x0 + 2 * side * h)) / (2.0 * h)


@dataclass(frozen=True, eq=False)
class ReactionPair:
    """Monostable ``f`` (zone) and bistable ``g`` (outside) plus derived constants."""

    f: Reaction
    g: Reaction
    config: dict[str, Any] = field(default_factory=dict)
    theta_hint: float | None = None

    @cached_property
    def theta(self) -> float:
        if self.theta_hint is not None:
            return float(self.theta_hint)
        s = np.linspace(1e-6, 1.0 - 1e-6, 20001)
        gs = self.g(s)
        idx = np.flatnonzero((gs[:-1] < 0) & (gs[1:] >= 0))
        if idx.size == 0:
            raise ValueError("g has no sign change from - to + inside (0, 1)")
        i = int(idx[0])
        return float(brentq(self.g, s[i], s[i + 1], xtol=1e-15))

    @cached_property
    def theta_star(self) -> float:
        return theta_star(self)

    @cached_property
    def fp0(self) -> float:
        if isinstance(self.f, PolynomialReaction):
            return self.f.derivative(0.0)
        return _one_sided_slope(self.f, 0.0)

    @cached_property
    def gp0(self) -> float:
        if isinstance(self.g, PolynomialReaction):
            return self.g.derivative(0.0)
        return _one_sided_slope(self.g, 0.0)

    @cached_property
    def fp1(self) -> float:
        if isinstance(self.f, PolynomialReaction):
            return self.f.derivative(1.0)
        return _one_sided_slope(self.f, 1.0, side=-1)

    @cached_property
    def gp1(self) -> float:
        if isinstance(self.g, PolynomialReaction):
            return self.g.derivative(1.0)
        return _one_sided_slope(self.g, 1.0, side=-1)

    @cached_property
    def lipschitz_M(self) -> float:
        """Bound on |f'|, |g'| over u >= 0 (the continuation slopes included),
        hence also on |f(u)|/u and |g(u)|/u."""
        hi = max(self.f.hi, self.g.hi)
        u = np.linspace(0.0, hi, 20001)
        return float(max(np.max(np.abs(self.f.derivative(u))), np.max(np.abs(self.g.derivative(u)))))

    @property
    def a(self) -> float:
        """f'(0)."""
        return self.fp0

    @property
    def b(self) -> float:
        """-g'(0)."""
        return -self.gp0

    def reaction_fraction(self, u, zone_weight):
        """``w f(u) + (1-w) g(u)`` for a zone weight ``w`` in [0, 1]."""
        return zone_weight * self.f(u) + (1.0 - zone_weight) * self.g(u)


def cubic_pair(theta: float = 0.25) -> ReactionPair:
    """f(u) = u(1-u), g(u) = u(u-theta)(1-u)."""
    theta = float(theta)
    f = PolynomialReaction([0.0, 1.0, -1.0])
    g = PolynomialReaction([0.0, -theta, 1.0 + theta, -1.0])
    return ReactionPair(f, g, {"kind": "cubic", "theta": theta}, theta_hint=theta)


def polynomial_pair(f_coeffs, g_coeffs) -> ReactionPair:
    """Pair from ascending-power coefficient lists."""
    f = PolynomialReaction(f_coeffs)
    g = PolynomialReaction(g_coeffs)
    return ReactionPair(
        f, g, {"kind": "polynomial", "f": f.coeffs, "g": g.coeffs}
    )


def tabulated_pair(table) -> ReactionPair:
    """Pair from rows ``[u, f(u), g(u)]`` covering ``[0, 2]``."""
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[1] != 3:
        raise ValueError("table must be an array of [u, f, g] triples")
    if t[0, 0] > 0.0 or t[-1, 0] < 2.0:
        raise ValueError("table must cover u in [0, 2]")
    f = TabulatedReaction(t[:, 0], t[:, 1])
    g = TabulatedReaction(t[:, 0], t[:, 2])
    return ReactionPair(f, g, {"kind": "tabulated", "table": t.tolist()})


def pair_from_config(cfg: dict[str, Any]) -> ReactionPair:
    kind = cfg.get("kind", "cubic")
    if kind == "cubic":
        return cubic_pair(cfg.get("theta", 0.25))
    if kind == "polynomial":
        return polynomial_pair(cfg["f"], cfg["g"])
    if kind == "tabulated":
        return tabulated_pair(cfg["table"])
    raise ValueError(f"unknown reaction kind {kind!r}")


# validation codes, stable so callers can match on them
G_ZEROS = "g-zeros: g(0), g(theta), g(1) not all zero"
G_SIGN = "g-sign: bistable sign pattern violated"
G_SLOPE = "g-slope: need g'(0) < 0 and g'(1) < 0"
UNBALANCE = "unbalance: int_0^1 g <= 0"
F_ZEROS = "f-zeros: f(0), f(1) not both zero"
F_SLOPE = "f-slope: need f'(0) > 0 and f'(1) < 0"
F_SIGN = "f-sign: (1-u) f(u) > 0 fails for some u > 0, u != 1"
H_ORDER = "H: g < f on (0,1) fails"
NO_THETA = "theta: g has no interior zero in (0, 1)"


def validate(pair: ReactionPair, n: int = 10_000, zero_tol: float = 1e-10) -> list[str]:
    """Check the standing hypotheses on ``(f, g)``; return the violated ones."""
    out: list[str] = []
    f, g = pair.f, pair.g
    try:
        th = pair.theta
    except ValueError:
        th = None
        out.append(NO_THETA)

    u = np.linspace(0.0, 2.0, 2 * n + 1)[1:]
    unit = u[u < 1.0]

    if th is not None:
        if max(abs(g(0.0)), abs(g(th)), abs(g(1.0))) > zero_tol:
            out.append(G_ZEROS)
        gu = g(u)
        below = (u < th) & (np.abs(u - th) > 1e-9)
        mid = (u > th) & (u < 1.0) & (np.abs(u - th) > 1e-9) & (np.abs(u - 1.0) > 1e-9)
        above = u > 1.0 + 1e-9
        if np.any(gu[below] >= 0) or np.any(gu[mid] <= 0) or np.any(gu[above] >= 0):
            out.append(G_SIGN)
    if not (pair.gp0 < 0 and pair.gp1 < 0):
        out.append(G_SLOPE)
    unbalance, _ = quad(g, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    if unbalance <= 0:
        out.append(UNBALANCE)

    if max(abs(f(0.0)), abs(f(1.0))) > zero_tol:
        out.append(F_ZEROS)
    if not (pair.fp0 > 0 and pair.fp1 < 0):
        out.append(F_SLOPE)
    away = np.abs(u - 1.0) > 1e-9
    if np.any(((1.0 - u) * f(u))[away] <= 0):
        out.append(F_SIGN)

    if np.any(g(unit) >= f(unit)):
        out.append(H_ORDER)
    return out


def theta_star(pair: ReactionPair, xtol: float = 1e-14) -> float:
    """Unique zero of ``beta -> int_0^beta g`` in ``(theta, 1)``."""
    th = pair.theta
    lo, hi = th, 1.0
    flo, fhi = pair.g.integral(lo), pair.g.integral(hi)
    if not (flo < 0 < fhi):
        raise ValueError("int_0^beta g has no sign change on (theta, 1); pair is not admissible")
    return float(brentq(pair.g.integral, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


def primitive_F(pair: ReactionPair, q):
    """F(q) = -2 int_0^q f."""
    return -2.0 * pair.f.integral(q)


def primitive_G(pair: ReactionPair, q):
    """G(q) = -2 int_0^q g."""
    return -2.0 * pair.g.integral(q)


def arc_length(r: Reaction, a: float, top: float, epsrel: float = 1e-11) -> float:
    """Travel time ``int_a^top dq / sqrt(2 int_q^top r)`` of the orbit of
    ``q'' + r(q) = 0`` that turns at ``q = top``.

    Requires ``r(top) > 0`` (simple turning point) and ``int_q^top r > 0`` on
    ``[a, top)``. The inverse-square-root singularity at ``top`` is removed by
    ``q = top - t**2``.
    """
    if a >= top:
        return 0.0
    rt = float(r(top))
    if rt <= 0:
        raise ValueError("turning point must satisfy r(top) > 0")
    t_end = np.sqrt(top - a)

    def integrand(t):
        if t * t < 1e-14 * max(top, 1e-300):
            return 2.0 / np.sqrt(2.0 * rt)
        w = t * t
        if w < 1e-2:
            # width passed exactly; top - w would round it away for tiny t
            d = 0.5 * w * float(np.dot(_GL_W, r(top - 0.5 * w * (1.0 - _GL_X))))
        else:
            d = r.integral(top) - r.integral(top - w)
        return 2.0 * t / np.sqrt(2.0 * d)

    val, _ = quad(integrand, 0.0, t_end, epsabs=0.0, epsrel=epsrel, limit=400)
    return float(val)


def l_alpha(pair: ReactionPair, alpha: float) -> float:
    """Half-width of the compactly supported bump of ``v'' + g(v) = 0`` peaking at ``alpha``."""
    ts = pair.theta_star
    if not (ts < alpha < 1.0):
        raise ValueError(f"alpha must lie in (theta*, 1) = ({ts:.6g}, 1); got {alpha}")
    return arc_length(pair.g, 0.0, alpha)


def L0_bound(pair: ReactionPair) -> float:
    """Upper bound for the ground-state zone length in the connected case."""
    return arc_length(pair.f, 0.0, pair.theta_star)


def reaction_summary(pair: ReactionPair) -> dict[str, float]:
    return {
        "theta": pair.theta,
        "theta_star": pair.theta_star,
        "fp0": pair.fp0,
        "gp0": pair.gp0,
        "lipschitz_M": pair.lipschitz_M,
    }
