"""Stationary solutions by phase-plane mechanics.

Orbits of ``q'' + f(q) = 0`` conserve ``p**2 + 2 int_0^q f`` and orbits of
``q'' + g(q) = 0`` conserve ``p**2 + 2 int_0^q g``. The homoclinic orbit of the
g-system (energy zero) is ``Gamma_0``; a ground state leaves the last zone
interface on ``Gamma_0`` and decays along it. Arc lengths are quadratures in
``q`` wherever ``p != 0``; ODE stepping is used only to cross turning points
and to sample profiles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .reactions import Reaction, ReactionPair, arc_length, primitive_G
from .spectral import connected_relation, separate_relation
from .zones import Connected, ProtectionZone, Separate

__all__ = [
    "HomoclinicTail",
    "tail_V",
    "GroundStateProfile",
    "ShootResult",
    "gamma_intersections",
    "connected_length_of",
    "connected_ground_states",
    "connected_ground_state",
    "estimate_Lstar2",
    "separate_arc_lengths",
    "separate_shoot",
    "separate_ground_states",
    "estimate_Lstar2_tilde",
    "ground_states",
]

_RTOL = 1e-13
_ATOL = 1e-15


def _hamiltonian_rhs(r: Reaction) -> Callable:
    def rhs(_x, y):
        n = y.size // 2
        return np.concatenate((y[n:], -r(y[:n])))

    return rhs


def _flow(r: Reaction, q0, p0, x_span: float, dense: bool = False):
    """Integrate ``q' = p, p' = -r(q)`` over ``x_span`` for one or many states."""
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if x_span <= 0:
        return q0.copy(), p0.copy(), None
    sol = solve_ivp(
        _hamiltonian_rhs(r),
        (0.0, x_span),
        np.concatenate((q0, p0)),
        method="DOP853",
        rtol=_RTOL,
        atol=_ATOL,
        dense_output=dense,
    )
    if not sol.success:
        raise RuntimeError(f"phase-plane integration failed: {sol.message}")
    n = q0.size
    return sol.y[:n, -1], sol.y[n:, -1], sol.sol


class HomoclinicTail:
    """The even, positive solution ``V`` of ``V'' + g(V) = 0`` with ``V(0) = theta*``
    and ``V(+-inf) = 0``.

    Near the top the second-order system is integrated directly; past
    ``V = theta*/2`` the decaying branch is continued as
    ``(log V)' = -sqrt(G(V)) / V``, which is contracting and keeps relative
    accuracy deep into the tail.
    """

    def __init__(self, pair: ReactionPair, v_floor: float = 1e-12):
        self.pair = pair
        ts = pair.theta_star
        self.theta_star = ts
        half = 0.5 * ts

        def hit_half(_x, y):
            return y[0] - half

        hit_half.terminal = True
        hit_half.direction = -1
        top = solve_ivp(
            _hamiltonian_rhs(pair.g), (0.0, 1e3), [ts, 0.0], method="DOP853",
            rtol=_RTOL, atol=_ATOL, dense_output=True, events=hit_half,
        )
        self.x_half = float(top.t_events[0][0])
        self._top = top.sol

        g = pair.g

        def ratio(v):
            # G(v) / v**2 without cancellation for small v
            return max(-2.0 * g.integral(v) / (v * v), 0.0)

        def rhs(_x, w):
            v = math.exp(w[0])
            return [-math.sqrt(ratio(v))]

        w_floor = math.log(v_floor)

        def hit_floor(_x, w):
            return w[0] - w_floor

        hit_floor.terminal = True
        tail = solve_ivp(
            rhs, (self.x_half, self.x_half + 1e5), [math.log(half)], method="DOP853",
            rtol=_RTOL, atol=1e-13, dense_output=True, events=hit_floor,
        )
        self._tail = tail.sol
        self.x_end = float(tail.t_events[0][0])
        self.v_end = v_floor
        self._rate_end = math.sqrt(ratio(v_floor))
        self._upper = arc_length(g, half, ts)

    def __call__(self, x):
        y = np.abs(np.asarray(x, dtype=float))
        out = np.empty_like(y)
        a = y <= self.x_half
        b = (~a) & (y <= self.x_end)
        c = y > self.x_end
        if np.any(a):
            out[a] = self._top(y[a])[0]
        if np.any(b):
            out[b] = np.exp(self._tail(y[b])[0])
        if np.any(c):
            out[c] = self.v_end * np.exp(-self._rate_end * (y[c] - self.x_end))
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        y = np.abs(x)
        v = self(y)
        gg = np.maximum(primitive_G(self.pair, v), 0.0)
        d = -np.sqrt(gg)
        top = y <= self.x_half
        if np.any(top):
            d = np.where(top, self._top(np.where(top, y, 0.0))[1], d)
        out = np.where(x < 0, -d, d)
        return out if out.ndim else float(out)

    def position(self, q: float) -> float:
        """The ``x >= 0`` with ``V(x) = q``, by quadrature along ``Gamma_0``."""
        ts = self.theta_star
        if not 0 < q <= ts:
            raise ValueError("q must lie in (0, theta*]")
        half = 0.5 * ts
        if q >= half:
            return arc_length(self.pair.g, q, ts)
        # below theta*/2 the integrand is smooth in s = log q
        pair = self.pair

        def integrand(s):
            v = math.exp(s)
            return v / math.sqrt(primitive_G(pair, v))

        low, _ = quad(integrand, math.log(q), math.log(half), epsabs=0.0, epsrel=1e-12, limit=200)
        return self._upper + low

    def samples(self, n: int = 400) -> np.ndarray:
        """Geometric x-grid from 0 to where V drops below the floor."""
        x = np.concatenate(([0.0], np.geomspace(1e-3, self.x_end, n - 1)))
        return np.column_stack((x, self(x)))


_TAILS: dict[int, HomoclinicTail] = {}


def tail_V(pair: ReactionPair) -> HomoclinicTail:
    key = id(pair)
    tail = _TAILS.get(key)
    if tail is None or tail.pair is not pair:
        tail = HomoclinicTail(pair)
        _TAILS[key] = tail
    return tail


@dataclass
class GroundStateProfile:
    zone: ProtectionZone
    peak: float
    match_points: list[tuple[float, float, float]]
    tail_shift: float
    kind: str
    start_value: float
    pieces: list[tuple[float, float, str, Any]] = field(repr=False, default_factory=list)
    tail: HomoclinicTail | None = field(repr=False, default=None)
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def x_cut(self) -> float:
        return self.tail_shift + self.tail.x_end

    def _eval(self, x, which: int):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        outer = self.zone.outer
        for x0, x1, _label, sol in self.pieces:
            m = (x >= x0) & (x <= x1)
            if np.any(m):
                out[m] = sol(x[m])[which]
        m = x > outer
        if np.any(m):
            y = x[m] - self.tail_shift
            out[m] = self.tail(y) if which == 0 else self.tail.derivative(y)
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self._eval(x, 0)

    def derivative(self, x):
        return self._eval(x, 1)

    def labels(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lab = np.full(x.shape, "g", dtype="<U1")
        for x0, x1, label, _sol in self.pieces:
            lab[(x >= x0) & (x <= x1)] = label
        return lab

    @property
    def samples(self) -> np.ndarray:
        return self.sample(0.01)

    def sample(self, h: float, x_max: float | None = None) -> np.ndarray:
        x_max = self.x_cut if x_max is None else x_max
        x = np.arange(0.0, x_max + 0.5 * h, h)
        return np.column_stack((x, self(x)))

    def interface_jumps(self) -> list[tuple[float, float]]:
        """(value jump, derivative jump) at each interface, one-sided limits."""
        jumps = []
        bounds = [p[1] for p in self.pieces]
        for i, xb in enumerate(bounds):
            left = self.pieces[i][3](xb)
            if i + 1 < len(self.pieces):
                right = self.pieces[i + 1][3](xb)
                rv, rd = right[0], right[1]
            else:
                y = xb - self.tail_shift
                rv, rd = self.tail(y), self.tail.derivative(y)
            jumps.append((abs(left[0] - rv), abs(left[1] - rd)))
        return jumps

    def summary(self) -> dict[str, Any]:
        return {
            "zone": self.zone.to_config(),
            "kind": self.kind,
            "peak": self.peak,
            "start_value": self.start_value,
            "tail_shift": self.tail_shift,
            "match_points": [list(m) for m in self.match_points],
            **self.diagnostics,
        }


def gamma_intersections(pair: ReactionPair, beta: float, tol: float = 1e-12) -> list[tuple[float, float]]:
    """Points where the f-orbit turning at ``(beta, 0)`` meets ``Gamma_0``.

    The curves are mirror-symmetric in ``p``, so a crossing at ``q`` yields the
    pair ``(q, -p), (q, +p)``; the ``p < 0`` point comes first.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    ts = pair.theta_star
    if abs(beta - ts) <= tol:
        return [(ts, 0.0)]
    if beta > ts:
        return []
    f, g = pair.f, pair.g

    def mismatch(q):
        return f.integral_between(q, beta) + g.integral(q)

    q = brentq(mismatch, 0.0, beta, xtol=1e-16 * beta + 1e-300, rtol=4 * np.finfo(float).eps)
    p = math.sqrt(max(primitive_G(pair, q), 0.0))
    return [(q, -p), (q, p)]


def _meeting_point(pair: ReactionPair, level: float, q_hi: float) -> float:
    """``q`` in ``(0, q_hi]`` where ``2 int_0^q (f - g)`` equals ``level``.

    An f-orbit of energy ``level`` crosses ``Gamma_0`` exactly there; the map
    is increasing because ``f > g`` on ``(0, 1)``.
    """
    f, g = pair.f, pair.g

    def h(q):
        return 2.0 * (f.integral(q) - g.integral(q)) - level

    return brentq(h, 0.0, q_hi, xtol=1e-16 * q_hi + 1e-300, rtol=4 * np.finfo(float).eps)


def _arc_to_gamma0(pair: ReactionPair, q1: float, p1: float) -> float:
    """Distance travelled by the f-orbit through ``(q1, p1)`` until it reaches
    the ``p < 0`` half of ``Gamma_0``; ``nan`` if it escapes past ``q = 1``.

    Assumes ``(q1, p1)`` lies strictly inside ``Gamma_0``.
    """
    f = pair.f
    level = p1 * p1 + 2.0 * f.integral(q1)
    if p1 == 0.0:
        top = q1
    else:
        if 2.0 * f.integral(1.0) <= level:
            return math.nan
        top = brentq(lambda q: 2.0 * f.integral(q) - level, q1, 1.0,
                     xtol=1e-16, rtol=4 * np.finfo(float).eps)
    qm = _meeting_point(pair, level, q1)
    down = arc_length(f, qm, top)
    if p1 == 0.0:
        return down
    rest = arc_length(f, q1, top)
    return down + rest if p1 > 0 else down - rest


def connected_length_of(pair: ReactionPair, beta: float, branch: int = 0) -> float:
    """Zone half-length of the connected ground state with ``U(0) = beta``."""
    ts = pair.theta_star
    if not 0 < beta < ts:
        raise ValueError("beta must lie in (0, theta*)")
    if branch != 0:
        raise ValueError(
            "only the p < 0 intersection is reachable by a positive decreasing profile"
        )
    hits = gamma_intersections(pair, beta)
    if len(hits) == 1:
        return 0.0  # tangency at theta*
    q = hits[0][0]
    return arc_length(pair.f, q, beta)


def _scan_grid(top: float, n: int) -> np.ndarray:
    return top * np.arange(1, n + 1) / (n + 1)


def _refine_sup(fun, grid, values, limit_left: float, n_peaks: int = 3, xatol: float = 1e-12) -> tuple[float, float]:
    """Supremum of ``fun`` given scan values, the ``x -> grid[0]^-`` limit
    ``limit_left``, and golden/Brent refinement around the best local maxima."""
    vals = np.where(np.isfinite(values), values, -np.inf)
    best_x, best = 0.0, limit_left
    padded = np.concatenate(([limit_left], vals, [-np.inf]))
    peaks = [i for i in range(1, len(padded) - 1) if padded[i] >= padded[i - 1] and padded[i] >= padded[i + 1]]
    peaks.sort(key=lambda i: -padded[i])
    for i in peaks[:n_peaks]:
        k = i - 1
        lo = grid[k - 1] if k > 0 else grid[0] * 1e-3
        hi = grid[k + 1] if k + 1 < len(grid) else grid[k]
        res = minimize_scalar(lambda s: -fun(s), bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol * max(1.0, grid[-1])})
        cand = [(float(-res.fun), float(res.x)), (float(vals[k]), float(grid[k]))]
        for v, xv in cand:
            if np.isfinite(v) and v > best:
                best, best_x = v, xv
    return best, best_x


def connected_lengths(pair: ReactionPair, betas) -> np.ndarray:
    return np.array([connected_length_of(pair, float(b)) for b in betas])


def estimate_Lstar2(pair: ReactionPair, n_scan: int = 512) -> float:
    """Numeric supremum of zone lengths admitting a connected ground state.

    The scan covers ``beta`` in ``(0, theta*)``; the small-amplitude limit
    ``beta -> 0`` (the linearised length) is included as a candidate.
    """
    grid = _scan_grid(pair.theta_star, n_scan)
    vals = connected_lengths(pair, grid)
    limit = connected_relation(pair, 0.0)
    best, _ = _refine_sup(lambda s: connected_length_of(pair, s), grid, vals, limit)
    return best


def _assemble(pair: ReactionPair, zone: ProtectionZone, start: float, pieces, state_out,
              kind: str, match_points) -> GroundStateProfile:
    tail = tail_V(pair)
    outer = zone.outer
    q, p = state_out
    d = tail.position(min(q, tail.theta_star))
    shift = outer - d if p <= 0 else outer + d
    xs = np.linspace(0.0, outer, 2001)
    vals = np.concatenate([sol(xs[(xs >= x0) & (xs <= x1)])[0] for x0, x1, _l, sol in pieces])
    prof = GroundStateProfile(
        zone=zone, peak=max(float(np.max(vals)), tail.theta_star if shift > outer else 0.0),
        match_points=match_points, tail_shift=float(shift), kind=kind,
        start_value=float(start), pieces=pieces, tail=tail,
    )
    return prof


def _connected_profile(pair: ReactionPair, L: float, beta: float) -> GroundStateProfile:
    qL, pL, sol = _flow(pair.f, beta, 0.0, L, dense=True)
    zone = Connected(L)
    pieces = [(0.0, L, "f", sol)]
    prof = _assemble(pair, zone, beta, pieces, (float(qL[0]), float(pL[0])), "connected",
                     [(L, float(qL[0]), float(pL[0]))])
    prof.peak = beta
    prof.diagnostics["gamma0_residual"] = float(pL[0] ** 2 - primitive_G(pair, qL[0]))
    return prof


def connected_ground_states(pair: ReactionPair, L: float, n_scan: int = 256) -> list[GroundStateProfile]:
    """All connected ground states for zone half-length ``L`` found by a scan
    over the peak value followed by bracketed root-finding."""
    if not L > 0:
        raise ValueError("L must be positive")
    grid = _scan_grid(pair.theta_star, n_scan)
    vals = connected_lengths(pair, grid) - L
    limit = connected_relation(pair, 0.0) - L
    roots = []
    # bracket between the beta -> 0 limit and the first scan point
    if limit > 0 > vals[0] or limit < 0 < vals[0]:
        lo = grid[0] * 1e-6
        if (connected_length_of(pair, lo) - L) * vals[0] < 0:
            roots.append(brentq(lambda s: connected_length_of(pair, s) - L, lo, grid[0], xtol=1e-15))
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(lambda s: connected_length_of(pair, s) - L, grid[i], grid[i + 1], xtol=1e-15))
    roots += _right_end_root(lambda s: connected_length_of(pair, s) - L, grid[-1], vals[-1], pair.theta_star)
    return [_connected_profile(pair, L, float(b)) for b in roots]


def _right_end_root(fun, last: float, last_val: float, top: float) -> list[float]:
    """Zone length tends to 0 as the start value tends to theta*, so a positive
    last scan value brackets one more root in ``(last, theta*)``."""
    if not (np.isfinite(last_val) and last_val > 0):
        return []
    end = top * (1 - 1e-14)
    val = fun(end)
    if not (np.isfinite(val) and val < 0):
        return []
    return [brentq(fun, last, end, xtol=1e-15)]


def connected_ground_state(pair: ReactionPair, L: float) -> GroundStateProfile | None:
    found = connected_ground_states(pair, L)
    return found[0] if found else None


def _g_states(pair: ReactionPair, L1: float, gammas) -> tuple[np.ndarray, np.ndarray]:
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    q1, p1, _ = _flow(pair.g, gammas, np.zeros_like(gammas), L1)
    return q1, p1


def separate_arc_lengths(pair: ReactionPair, L1: float, gammas) -> np.ndarray:
    """Zone length ``L2 - L1`` of the separate ground state through each
    starting value ``gamma = U(0)``; ``nan`` where no such state exists."""
    q1, p1 = _g_states(pair, L1, gammas)
    return np.array([_arc_to_gamma0(pair, float(q), float(p)) for q, p in zip(q1, p1)])


def estimate_Lstar2_tilde(pair: ReactionPair, L1: float, n_scan: int = 512) -> float:
    """Numeric supremum of separate-zone lengths admitting a ground state."""
    if not L1 > 0:
        raise ValueError("L1 must be positive")
    grid = _scan_grid(pair.theta_star, n_scan)
    vals = separate_arc_lengths(pair, L1, grid)
    limit = separate_relation(pair, 0.0, L1)

    def one(s):
        v = separate_arc_lengths(pair, L1, [s])[0]
        return v if np.isfinite(v) else -np.inf

    best, _ = _refine_sup(one, grid, vals, limit)
    return best


@dataclass
class ShootResult:
    gamma: float
    residual: float
    divergent: bool
    state_L1: tuple[float, float]
    state_L2: tuple[float, float]
    profile: GroundStateProfile | None = None


def _separate_type(pair: ReactionPair, gamma: float, p1: float, p2: float) -> str:
    k = 1 + 4 * int(gamma > pair.theta) + 2 * int(p1 < 0) + int(p2 > 0)
    return f"separate-type-{k}"


def separate_shoot(pair: ReactionPair, zone: Separate, gamma: float) -> ShootResult:
    """Integrate from ``(gamma, 0)`` through both pieces and report
    ``p**2 - G(q)`` at ``x = L2`` (zero exactly on ``Gamma_0``)."""
    ts = pair.theta_star
    if not 0 < gamma < ts:
        raise ValueError("gamma must lie in (0, theta*)")
    L1, L2 = zone.L1, zone.L2
    q1, p1, sol_g = _flow(pair.g, gamma, 0.0, L1, dense=True)
    q1, p1 = float(q1[0]), float(p1[0])

    def leave_low(_x, y):
        return y[0]

    def leave_high(_x, y):
        return y[0] - 1.0

    leave_low.terminal = leave_high.terminal = True
    f_sol = solve_ivp(
        _hamiltonian_rhs(pair.f), (L1, L2), [q1, p1], method="DOP853",
        rtol=_RTOL, atol=_ATOL, dense_output=True, events=(leave_low, leave_high),
    )
    divergent = f_sol.status == 1
    q2, p2 = float(f_sol.y[0, -1]), float(f_sol.y[1, -1])
    if divergent:
        return ShootResult(gamma, math.nan, True, (q1, p1), (q2, p2))
    residual = p2 * p2 - primitive_G(pair, q2)

    def shifted(sol, x0):
        return lambda x: sol(np.asarray(x) - x0)

    pieces = [(0.0, L1, "g", sol_g), (L1, L2, "f", f_sol.sol)]
    profile = None
    if 0 < q2 <= ts:
        profile = _assemble(
            pair, zone, gamma, pieces, (q2, p2), _separate_type(pair, gamma, p1, p2),
            [(L1, q1, p1), (L2, q2, p2)],
        )
        profile.diagnostics["gamma0_residual"] = residual
    return ShootResult(gamma, residual, False, (q1, p1), (q2, p2), profile)


def separate_ground_states(pair: ReactionPair, zone: Separate, n_scan: int = 256) -> list[GroundStateProfile]:
    """Ground states of the separate-zone stationary problem.

    Roots of ``gamma -> (arc length) - L`` are located by quadrature and then
    confirmed by direct shooting."""
    L1, L = zone.L1, zone.length
    grid = _scan_grid(pair.theta_star, n_scan)
    vals = separate_arc_lengths(pair, L1, grid) - L

    def fun(s):
        return separate_arc_lengths(pair, L1, [s])[0] - L

    roots = []
    limit = separate_relation(pair, 0.0, L1) - L
    if np.isfinite(vals[0]) and limit * vals[0] < 0:
        lo = grid[0] * 1e-6
        if fun(lo) * vals[0] < 0:
            roots.append(brentq(fun, lo, grid[0], xtol=1e-15))
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            roots.append(grid[i])
        elif a * b < 0:
            roots.append(brentq(fun, grid[i], grid[i + 1], xtol=1e-15))
    roots += _right_end_root(fun, grid[-1], vals[-1], pair.theta_star)
    out = []
    for gam in roots:
        shot = separate_shoot(pair, zone, float(gam))
        if shot.profile is not None:
            out.append(shot.profile)
    return out


def ground_states(pair: ReactionPair, zone: ProtectionZone) -> list[GroundStateProfile]:
    if isinstance(zone, Connected):
        return connected_ground_states(pair, zone.L)
    return separate_ground_states(pair, zone)
