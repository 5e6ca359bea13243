"""Principal eigenvalue of ``-phi'' + h(x) phi`` for the piecewise-constant
potential ``h = -f'(0)`` in the zone and ``-g'(0)`` outside.

The half-line problems reduce to transcendental relations between the zone
length and the eigenvalue; those are solved by bisection. A finite-difference
eigensolver on a truncated symmetric domain is kept as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import bisect

from .reactions import ReactionPair
from .zones import Connected, ProtectionZone, Separate

__all__ = [
    "EigenResult",
    "connected_relation",
    "separate_relation",
    "lambda1_connected",
    "lambda1_separate",
    "lambda1",
    "critical_Lstar",
    "critical_Lstar_tilde",
    "lambda1_truncated",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigenResult:
    lambda1: float
    L: float
    zone: ProtectionZone
    theta1: float
    theta2: float
    a: float | None = None
    # (kind, amplitude, rate, shift, x_start, x_end) per piece; see eigenfunction()
    pieces: tuple = field(default=(), repr=False)

    def eigenfunction(self, x):
        """Evaluate the principal eigenfunction, normalised to ``max = 1``."""
        x = np.abs(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for kind, amp, rate, shift, lo, hi in self.pieces:
            m = (x >= lo) & (x <= hi) if np.isfinite(hi) else (x >= lo)
            y = x[m] - shift
            if kind == "cos":
                out[m] = amp * np.cos(rate * y)
            elif kind == "cosh":
                out[m] = amp * np.cosh(rate * y)
            else:
                out[m] = amp * np.exp(-rate * y)
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sign(x)
        x = np.abs(x)
        out = np.zeros_like(x)
        for kind, amp, rate, shift, lo, hi in self.pieces:
            m = (x >= lo) & (x <= hi) if np.isfinite(hi) else (x >= lo)
            y = x[m] - shift
            if kind == "cos":
                out[m] = -amp * rate * np.sin(rate * y)
            elif kind == "cosh":
                out[m] = amp * rate * np.sinh(rate * y)
            else:
                out[m] = -amp * rate * np.exp(-rate * y)
        out = s * out
        return out if out.ndim else float(out)


def _thetas(pair: ReactionPair, lam):
    return np.sqrt(-(pair.gp0 + lam)), np.sqrt(pair.fp0 + lam)


def connected_relation(pair: ReactionPair, lam: float) -> float:
    """Zone length whose principal eigenvalue is ``lam`` (connected zone)."""
    t1, t2 = _thetas(pair, lam)
    return float(np.arctan(t1 / t2) / t2)


def separate_relation(pair: ReactionPair, lam: float, L1: float) -> float:
    """Zone length ``L2 - L1`` whose principal eigenvalue is ``lam``."""
    t1, t2 = _thetas(pair, lam)
    return float((np.arctan(t1 / t2 * np.tanh(t1 * L1)) + np.arctan(t1 / t2)) / t2)


def _lambda_bracket(pair: ReactionPair) -> tuple[float, float]:
    a, b = pair.fp0, -pair.gp0
    eps = 1e-13 * (a + b)
    return -a + eps, b - eps


def _solve_lambda(length_of, L: float, pair: ReactionPair) -> float:
    lo, hi = _lambda_bracket(pair)
    # length_of is strictly decreasing in lambda
    if length_of(lo) <= L:
        return lo
    if length_of(hi) >= L:
        return hi
    return float(bisect(lambda lam: length_of(lam) - L, lo, hi, xtol=1e-300, rtol=4 * _EPS, maxiter=2000))


def lambda1_connected(pair: ReactionPair, L: float) -> EigenResult:
    if not L > 0:
        raise ValueError("L must be positive")
    lam = _solve_lambda(lambda s: connected_relation(pair, s), L, pair)
    t1, t2 = _thetas(pair, lam)
    edge = float(np.cos(t2 * L))
    pieces = (("cos", 1.0, t2, 0.0, 0.0, L), ("exp", edge, t1, L, L, np.inf))
    return EigenResult(lam, L, Connected(L), float(t1), float(t2), None, pieces)


def lambda1_separate(pair: ReactionPair, zone: Separate) -> EigenResult:
    L1, L2 = zone.L1, zone.L2
    L = L2 - L1
    lam = _solve_lambda(lambda s: separate_relation(pair, s, L1), L, pair)
    t1, t2 = _thetas(pair, lam)
    t1, t2 = float(t1), float(t2)
    peak = L2 - np.arctan(t1 / t2) / t2
    left = np.cos(t2 * (L1 - peak)) / np.cosh(t1 * L1)
    right = np.cos(t2 * (L2 - peak))
    pieces = (
        ("cosh", left, t1, 0.0, 0.0, L1),
        ("cos", 1.0, t2, peak, L1, L2),
        ("exp", right, t1, L2, L2, np.inf),
    )
    return EigenResult(lam, L, zone, t1, t2, float(peak), pieces)


def lambda1(pair: ReactionPair, zone: ProtectionZone) -> EigenResult:
    if isinstance(zone, Connected):
        return lambda1_connected(pair, zone.L)
    return lambda1_separate(pair, zone)


def critical_Lstar(pair: ReactionPair) -> float:
    a, b = pair.fp0, -pair.gp0
    return float(np.arctan(np.sqrt(b / a)) / np.sqrt(a))


def critical_Lstar_tilde(pair: ReactionPair, L1: float) -> float:
    """Separate-zone length at which the principal eigenvalue vanishes.

    The relation is explicit at ``lambda = 0``, so no root search is needed.
    """
    if not L1 > 0:
        raise ValueError("L1 must be positive")
    return separate_relation(pair, 0.0, L1)


def _potential(pair: ReactionPair, zone: ProtectionZone, x: np.ndarray, h: float) -> np.ndarray:
    """Cell-averaged potential on the node cells ``[x - h/2, x + h/2]``."""
    if isinstance(zone, Connected):
        segs = [(-zone.L, zone.L)]
    else:
        segs = [(-zone.L2, -zone.L1), (zone.L1, zone.L2)]
    lo, hi = x - h / 2, x + h / 2
    frac = np.zeros_like(x)
    for s0, s1 in segs:
        frac += np.clip(np.minimum(hi, s1) - np.maximum(lo, s0), 0.0, None) / h
    return -pair.fp0 * frac - pair.gp0 * (1.0 - frac)


def lambda1_truncated(pair: ReactionPair, zone: ProtectionZone | None, R: float, h: float) -> float:
    """Smallest eigenvalue of the second-order FD discretisation on ``(-R, R)``
    with zero Dirichlet data; ``zone=None`` gives the zone-free potential."""
    if not (R > 0 and h > 0):
        raise ValueError("R and h must be positive")
    n = int(round(2 * R / h))
    hh = 2 * R / n
    x = -R + hh * np.arange(1, n)
    if zone is None:
        pot = np.full_like(x, -pair.gp0)
    else:
        pot = _potential(pair, zone, x, hh)
    d = 2.0 / hh**2 + pot
    e = np.full(x.size - 1, -1.0 / hh**2)
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0), lapack_driver="stebz")
    return float(w[0])
