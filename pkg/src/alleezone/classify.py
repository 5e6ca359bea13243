"""Long-time outcome of a run, decided by early-exit certificates.

Vanishing is certified once ``u <= delta * phi_1`` holds at every node (a
decaying supersolution then sits on top); spreading once ``u >= alpha`` on a
block of width ``2 l_alpha`` outside the zone (a growing compact subsolution
then sits below). Anything else at the time budget is Undetermined.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import phaseplane
from .reactions import PolynomialReaction, ReactionPair, l_alpha
from .solver import InitialData, Simulation, Snapshot, Trajectory, _Recorder, make_initial
from .spectral import lambda1
from .zones import ProtectionZone

__all__ = [
    "VANISHING",
    "SPREADING",
    "UNDETERMINED",
    "ConsistencyError",
    "vanishing_delta",
    "VanishingCheck",
    "SpreadingCheck",
    "vanishing_certificate",
    "spreading_certificate",
    "ClassificationReport",
    "classify",
    "ThresholdReport",
    "threshold_bisect",
    "sweep",
]

VANISHING = "Vanishing"
SPREADING = "Spreading"
UNDETERMINED = "Undetermined"
_RANK = {VANISHING: 0, UNDETERMINED: 1, SPREADING: 2}


class ConsistencyError(RuntimeError):
    """Recorded outcomes are not monotone in sigma."""


def _largest_linear_level(r, c: float, tabulated: bool) -> float:
    """Largest ``s <= 1`` with ``r(v) <= c v`` for all ``v`` in ``(0, s]``."""
    v = np.concatenate((np.geomspace(1e-9, 1e-3, 2000, endpoint=False), np.linspace(1e-3, 1.0, 20001)))
    bad = np.flatnonzero(r(v) > c * v)
    if bad.size == 0:
        return 1.0
    k = int(bad[0])
    if k == 0:
        return 0.0
    if tabulated:
        return 0.9 * float(v[k - 1])
    return float(brentq(lambda s: r(s) - c * s, v[k - 1], v[k], xtol=1e-15))


_DELTA_CACHE: dict[tuple[int, float], float] = {}


def vanishing_delta(pair: ReactionPair, lam: float) -> float:
    """Largest ``delta <= 1`` with ``f(s) <= (f'(0) + lam/2) s`` and
    ``g(s) <= (g'(0) + lam/2) s`` on ``(0, delta]``; requires ``lam > 0``."""
    if not lam > 0:
        raise ValueError("needs a positive principal eigenvalue")
    key = (id(pair), float(lam))
    if key in _DELTA_CACHE:
        return _DELTA_CACHE[key]
    cfg = pair.config
    if cfg.get("kind") == "cubic":
        # f = s(1-s) never binds; g/s = (s-theta)(1-s) gives a quadratic
        th = float(cfg["theta"])
        disc = (1 + th) ** 2 - 2 * lam
        delta = min(1.0, 0.5 * ((1 + th) - math.sqrt(disc))) if disc > 0 else 1.0
    else:
        tab = not (isinstance(pair.f, PolynomialReaction) and isinstance(pair.g, PolynomialReaction))
        delta = min(
            _largest_linear_level(pair.f, pair.fp0 + 0.5 * lam, tab),
            _largest_linear_level(pair.g, pair.gp0 + 0.5 * lam, tab),
        )
    _DELTA_CACHE[key] = delta
    return delta


@dataclass
class VanishingCheck:
    passed: bool
    applicable: bool
    delta: float = math.nan
    lambda1: float = math.nan
    worst_ratio: float = math.nan
    worst_x: float = math.nan

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class SpreadingCheck:
    passed: bool
    alpha: float
    l_alpha: float
    r: float = math.nan
    right: float = math.nan

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def vanishing_certificate(pair: ReactionPair, zone: ProtectionZone, x, u) -> VanishingCheck:
    eig = lambda1(pair, zone)
    lam = eig.lambda1
    if not lam > 0:
        return VanishingCheck(False, False, lambda1=lam)
    delta = vanishing_delta(pair, lam)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    bound = delta * eig.eigenfunction(x)
    pos = u > 0
    if not np.any(pos):
        return VanishingCheck(True, True, delta, lam, 0.0, math.nan)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(pos, u / bound, 0.0)
    i = int(np.argmax(ratio))
    return VanishingCheck(bool(np.all(u <= bound)), True, delta, lam, float(ratio[i]), float(x[i]))


def spreading_certificate(pair: ReactionPair, zone: ProtectionZone, x, u, alpha: float | None = None) -> SpreadingCheck:
    """Look for ``r >= outer interface`` with ``u >= alpha`` at every node of
    ``[r, r + 2 l_alpha]``."""
    if alpha is None:
        alpha = 0.5 * (pair.theta_star + 1.0)
    la = l_alpha(pair, alpha)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    outer = zone.outer
    ok = (u >= alpha) & (x >= outer)
    if not np.any(ok):
        return SpreadingCheck(False, alpha, la)
    # runs of consecutive good nodes
    idx = np.flatnonzero(ok)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    ends = np.concatenate((idx[breaks], [idx[-1]]))
    span = x[ends] - x[starts]
    j = np.flatnonzero(span >= 2 * la)
    if j.size == 0:
        return SpreadingCheck(False, alpha, la)
    k = int(j[0])
    return SpreadingCheck(True, alpha, la, float(x[starts[k]]), float(x[ends[k]]))


@dataclass
class ClassificationReport:
    outcome: str
    certificate: str
    certificate_data: dict[str, Any]
    T_reached: float
    zone: ProtectionZone
    sigma: float
    distance_to_ground_state: float | None = None
    state: Snapshot | None = field(default=None, repr=False)
    trajectory: Trajectory | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome,
            "certificate": self.certificate,
            "certificate_data": self.certificate_data,
            "T_reached": self.T_reached,
            "zone": self.zone.to_config(),
            "sigma": self.sigma,
            "distance_to_ground_state": self.distance_to_ground_state,
        }


def ground_state_distance(pair: ReactionPair, zone: ProtectionZone, x, u, window: float = 20.0) -> float | None:
    """Sup-norm distance on ``[0, outer + window]`` to the closest ground state
    of this zone; ``None`` when the zone admits none."""
    profiles = phaseplane.ground_states(pair, zone)
    if not profiles:
        return None
    x = np.asarray(x, dtype=float)
    m = x <= zone.outer + window
    return float(min(np.max(np.abs(u[m] - p(x[m]))) for p in profiles))


def classify(
    pair: ReactionPair,
    zone: ProtectionZone,
    initial: InitialData,
    T_max: float = 400.0,
    check_every: float = 1.0,
    alpha: float | None = None,
    keep_trajectory: bool = True,
    **sim_kw,
) -> ClassificationReport:
    sim = Simulation(pair, zone, initial, **sim_kw)
    can_vanish = lambda1(pair, zone).lambda1 > 0
    k = max(1, int(round(check_every / sim.dt)))
    rec = _Recorder(sim, [], int(round(0.1 / sim.dt)))
    snaps: list[Snapshot] = []

    def check(s: Simulation):
        if s.n_steps % k:
            return None
        if keep_trajectory:
            snaps.append(s.snapshot())
        if can_vanish:
            v = vanishing_certificate(pair, zone, s.x, s.u)
            if v.passed:
                return VANISHING, "supersolution-dominated", v.to_dict()
        sp = spreading_certificate(pair, zone, s.x, s.u, alpha)
        if sp.passed:
            return SPREADING, "spreading-block", sp.to_dict()
        return None

    verdict = check(sim)
    hit: list[Any] = [verdict]

    def callback(s):
        if hit[0] is None:
            hit[0] = check(s)
        return hit[0] is not None

    if verdict is None:
        rec.run(T_max, callback)
    traj = None
    if keep_trajectory:
        rec.snaps = snaps
        traj = rec.trajectory()
    state = sim.snapshot()
    if hit[0] is not None:
        outcome, cert, data = hit[0]
        return ClassificationReport(outcome, cert, data, sim.t, zone, initial.sigma, None, state, traj)
    dist = ground_state_distance(pair, zone, state.x, state.u)
    return ClassificationReport(UNDETERMINED, "timeout", {}, sim.t, zone, initial.sigma, dist, state, traj)


@dataclass
class ThresholdReport:
    name: str
    sigma_low: float
    sigma_high: float
    iterations: int
    trace: list[tuple[float, str]]
    degenerate: bool = False
    bracketed: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "sigma_low": self.sigma_low,
            "sigma_high": self.sigma_high,
            "iterations": self.iterations,
            "trace": [[s, o] for s, o in self.trace],
            "degenerate": self.degenerate,
            "bracketed": self.bracketed,
        }


def _check_monotone(cache: dict[float, str]) -> None:
    last = -1
    last_s = None
    for s in sorted(cache):
        r = _RANK[cache[s]]
        if r < last:
            raise ConsistencyError(
                f"outcome {cache[s]} at sigma={s} below {list(_RANK)[last]} at sigma={last_s}")
        last, last_s = r, s


def threshold_bisect(
    pair: ReactionPair,
    zone: ProtectionZone,
    shape: str = "rectangle",
    hbar: float = 2.0,
    sigma_range: tuple[float, float] = (0.01, 4.0),
    tol: float | None = None,
    T_max: float = 400.0,
    **kw,
) -> tuple[ThresholdReport, ThresholdReport]:
    """Brackets for the vanishing threshold and the spreading threshold.

    All classify results are shared between the two searches; brackets are
    tightened from every cached outcome. If the lowest amplitude already fails
    to vanish the vanishing threshold is reported as the sentinel 0.
    """
    lo, hi = map(float, sigma_range)
    if not 0 <= lo < hi:
        raise ValueError("sigma_range must satisfy 0 <= low < high")
    if tol is None:
        tol = 1e-3 * (hi - lo)
    if not tol > 0:
        raise ValueError("tol must be positive")
    cache: dict[float, str] = {}
    order: list[tuple[float, str]] = []

    def outcome(s: float) -> str:
        if s not in cache:
            rep = classify(pair, zone, make_initial(shape, s, hbar), T_max=T_max, keep_trajectory=False, **kw)
            cache[s] = rep.outcome
            order.append((s, rep.outcome))
            _check_monotone(cache)
        return cache[s]

    def search(name: str, below) -> ThresholdReport:
        start = len(order)
        outcome(lo)
        outcome(hi)
        a = max([s for s, o in cache.items() if below(o)], default=None)
        b = min([s for s, o in cache.items() if not below(o)], default=None)
        if a is None:
            return ThresholdReport(name, 0.0, min(cache), len(order) - start, order[start:], degenerate=True)
        if b is None:
            return ThresholdReport(name, max(cache), math.inf, len(order) - start, order[start:], bracketed=False)
        while b - a > tol:
            m = 0.5 * (a + b)
            if below(outcome(m)):
                a = m
            else:
                b = m
        return ThresholdReport(name, a, b, len(order) - start, order[start:])

    low = search("sigma_lower", lambda o: o == VANISHING)
    high = search("sigma_upper", lambda o: o != SPREADING)
    return low, high


def _sweep_cell(args) -> dict[str, Any]:
    pair, zone, shape, sigma, hbar, T_max, kw = args
    rep = classify(pair, zone, make_initial(shape, sigma, hbar), T_max=T_max, keep_trajectory=False, **kw)
    row: dict[str, Any] = dict(zone.to_config())
    row.update(sigma=sigma, outcome=rep.outcome, certificate=rep.certificate, T_exit=rep.T_reached)
    return row


def sweep(
    pair: ReactionPair,
    zones: Sequence[ProtectionZone],
    sigmas: Iterable[float],
    shape: str = "rectangle",
    hbar: float = 2.0,
    T_max: float = 400.0,
    jobs: int = 1,
    **kw,
) -> list[dict[str, Any]]:
    """Classify every (zone, sigma) cell; rows come back sorted by key."""
    sigmas = list(sigmas)
    cells = [(pair, z, shape, float(s), hbar, T_max, kw) for z in zones for s in sigmas]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]

    def key(r):
        return (r["type"], r.get("L1", 0.0), r.get("L", r.get("L2", 0.0)), r["sigma"])

    return sorted(rows, key=key)
