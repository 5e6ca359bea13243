"""Monotone IMEX finite differences for ``u_t = u_xx + r(x, u)`` on a
truncated half-line with a reflecting left end.

Each step is one backward-Euler diffusion solve (a tridiagonal M-matrix,
factorised once per grid) followed by an explicit reaction update. With
``dt <= 0.9 / M`` the reaction map ``u -> u + dt r(u)`` is increasing, so the
whole step preserves order and nonnegativity.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs

from .reactions import ReactionPair
from .spectral import lambda1
from .zones import Connected, ProtectionZone

__all__ = [
    "ConfigurationError",
    "ResourceError",
    "InitialData",
    "make_initial",
    "build_grid",
    "Simulation",
    "step",
    "Snapshot",
    "Trajectory",
    "simulate",
    "DecayBounds",
    "check_decay_bounds",
]


class ConfigurationError(ValueError):
    """Scheme parameters that would break monotonicity or are malformed."""


class ResourceError(RuntimeError):
    """Domain extension would exceed the node cap; ``partial`` holds what ran."""

    def __init__(self, message: str, partial: "Trajectory | None" = None):
        super().__init__(message)
        self.partial = partial


_SHAPES = ("rectangle", "tent", "custom")


@dataclass(frozen=True)
class InitialData:
    shape: str
    sigma: float
    hbar: float
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown initial shape {self.shape!r}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be a finite nonnegative number")
        if not self.hbar > 0:
            raise ValueError("support radius hbar must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.shape == "rectangle":
            return np.where(x <= self.hbar, self.sigma, 0.0)
        if self.shape == "tent":
            return self.sigma * np.maximum(0.0, 1.0 - x / self.hbar)
        xs, vs = np.asarray(self.table, dtype=float).T
        return np.where(x <= self.hbar, self.sigma * np.interp(x, xs, vs, right=0.0), 0.0)

    @property
    def support_radius(self) -> float:
        return self.hbar

    @property
    def sup(self) -> float:
        if self.shape == "custom":
            return self.sigma * float(max(v for _x, v in self.table))
        return self.sigma

    def with_sigma(self, sigma: float) -> "InitialData":
        return InitialData(self.shape, float(sigma), self.hbar, self.table)

    def to_config(self) -> dict[str, Any]:
        cfg: dict[str, Any] = {"shape": self.shape, "sigma": self.sigma, "hbar": self.hbar}
        if self.table is not None:
            cfg["table"] = [list(r) for r in self.table]
        return cfg

    @classmethod
    def from_config(cls, cfg: dict[str, Any]) -> "InitialData":
        return make_initial(cfg.get("shape", "rectangle"), cfg.get("sigma", 1.0),
                            cfg.get("hbar", 2.0), cfg.get("table"))


def make_initial(shape: str, sigma: float, hbar: float, table=None) -> InitialData:
    """Member of a monotone initial family ``sigma * profile``.

    ``custom`` takes rows ``[x, value]`` with ``x`` increasing from 0 and
    ``value >= 0``; its support radius is the last ``x``.
    """
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rows = None
    if shape == "custom":
        if table is None:
            raise ValueError("custom initial data needs a table")
        rows = tuple((float(a), float(b)) for a, b in table)
        xs = np.array([r[0] for r in rows])
        vs = np.array([r[1] for r in rows])
        if xs[0] != 0 or np.any(np.diff(xs) <= 0) or np.any(vs < 0):
            raise ValueError("custom table needs increasing x from 0 and nonnegative values")
        hbar = float(xs[-1])
    return InitialData(shape, sigma, float(hbar), rows)


def build_grid(zone: ProtectionZone | None, h: float, x_max: float) -> tuple[np.ndarray, tuple[int, ...]]:
    """Nodes on ``[0, x_max]``; every interface is a node.

    Each segment between consecutive interfaces gets its own uniform spacing
    ``<= h``; beyond the outer interface the spacing is exactly ``h``.
    Returns the nodes and the interface node indices.
    """
    if not h > 0:
        raise ConfigurationError("grid step h must be positive")
    cuts = [0.0] + (list(zone.interfaces) if zone is not None else [])
    parts = []
    idx = []
    count = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        parts.append(a + (b - a) * np.arange(n) / n)
        count += n
        idx.append(count)
    start = cuts[-1]
    n_out = max(1, math.ceil((x_max - start) / h - 1e-9))
    parts.append(start + h * np.arange(n_out + 1))
    return np.concatenate(parts), tuple(idx)


def _zone_weights(zone: ProtectionZone | None, n: int, iface: tuple[int, ...]) -> np.ndarray:
    w = np.zeros(n)
    if zone is None:
        return w
    if isinstance(zone, Connected):
        w[: iface[0]] = 1.0
        w[iface[0]] = 0.5
    else:
        i1, i2 = iface
        w[i1 + 1: i2] = 1.0
        w[i1] = w[i2] = 0.5
    return w


@dataclass(frozen=True)
class Snapshot:
    t: float
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)


class Simulation:
    """Mutable time stepper. ``zone=None`` puts ``g`` everywhere."""

    def __init__(
        self,
        pair: ReactionPair,
        zone: ProtectionZone | None,
        initial: InitialData,
        h: float = 0.02,
        dt: float | None = None,
        x_max: float | None = None,
        x_max_policy: str = "extend",
        max_nodes: int = 400_000,
        right_bc: str = "dirichlet",
        c_est: float | None = None,
        T_hint: float = 0.0,
    ):
        M = pair.lipschitz_M
        dt_cap = 0.9 / M if M > 0 else math.inf
        if dt is None:
            dt = min(0.005, dt_cap)
        if not dt > 0:
            raise ConfigurationError("dt must be positive")
        if dt > dt_cap * (1 + 1e-12):
            raise ConfigurationError(f"dt = {dt} exceeds the monotonicity limit 0.9/M = {dt_cap}")
        if x_max_policy not in ("extend", "a_priori", "fixed"):
            raise ConfigurationError(f"unknown X_max policy {x_max_policy!r}")
        if right_bc not in ("dirichlet", "neumann"):
            raise ConfigurationError(f"unknown right boundary condition {right_bc!r}")
        self.pair, self.zone, self.initial = pair, zone, initial
        self.h, self.dt, self.M = float(h), float(dt), M
        self.policy, self.max_nodes, self.right_bc = x_max_policy, int(max_nodes), right_bc
        outer = zone.outer if zone is not None else 0.0
        if x_max is None:
            if x_max_policy == "a_priori":
                c = c_est if c_est is not None else 1.5 * math.sqrt(2.0 * max(pair.fp0, 0.0))
                x_max = max(outer, initial.hbar) + c * T_hint + 20.0
            else:
                x_max = max(outer, initial.hbar) + 30.0
        if x_max <= outer:
            raise ConfigurationError("X_max must exceed the outer zone interface")
        self.x, self.iface = build_grid(zone, self.h, float(x_max))
        if self.x.size > self.max_nodes:
            raise ResourceError(f"initial grid needs {self.x.size} nodes > cap {self.max_nodes}")
        self.u = np.maximum(initial(self.x), 0.0)
        if right_bc == "dirichlet":
            self.u[-1] = 0.0
        self.n_steps = 0
        self.t = 0.0
        self._setup()

    def _setup(self):
        x = self.x
        hs = np.diff(x)
        n = x.size
        m = n - 1 if self.right_bc == "dirichlet" else n
        hl = np.concatenate(([np.inf], hs))[:m]
        hr = np.concatenate((hs, [np.inf]))[:m]
        vol = 0.5 * (np.where(np.isfinite(hl), hl, 0.0) + np.where(np.isfinite(hr), hr, 0.0))
        left = np.where(np.isfinite(hl), 1.0 / (hl * vol), 0.0)
        right = np.where(np.isfinite(hr), 1.0 / (hr * vol), 0.0)
        dt = self.dt
        d = 1.0 + dt * (left + right)
        du = -dt * right[:-1]
        dl = -dt * left[1:]
        self._lu = dgttrf(dl, d, du)
        if self._lu[-1] != 0:
            raise ConfigurationError("diffusion matrix factorisation failed")
        self._m = m
        self.volumes = np.concatenate((vol, [0.0] * (n - m)))
        self.w = _zone_weights(self.zone, n, self.iface)
        self._zone_slice = np.flatnonzero(self.w > 0)

    def reaction(self, u: np.ndarray) -> np.ndarray:
        r = self.pair.g(u)
        k = self._zone_slice
        if k.size:
            w = self.w[k]
            r[k] = w * self.pair.f(u[k]) + (1.0 - w) * r[k]
        return r

    def step(self) -> "Simulation":
        dl, d, du, du2, ipiv, _ = self._lu
        m = self._m
        sol, info = dgttrs(dl, d, du, du2, ipiv, self.u[:m])
        if info != 0:
            raise RuntimeError("tridiagonal solve failed")
        u = self.u
        u[:m] = sol
        u[:m] += self.dt * self.reaction(u[:m])
        np.maximum(u, 0.0, out=u)
        self.n_steps += 1
        self.t = self.n_steps * self.dt
        if self.policy == "extend" and self.right_bc == "dirichlet":
            self._maybe_extend()
        return self

    def _maybe_extend(self):
        x = self.x
        j = int(np.searchsorted(x, x[-1] - 10.0))
        if self.u[j] <= 1e-8:
            return
        grow = max(20.0, 0.25 * x[-1])
        n_new = math.ceil(grow / self.h)
        if x.size + n_new > self.max_nodes:
            raise ResourceError(
                f"domain extension to {x.size + n_new} nodes exceeds cap {self.max_nodes}")
        self.x = np.concatenate((x, x[-1] + self.h * np.arange(1, n_new + 1)))
        self.u = np.concatenate((self.u, np.zeros(n_new)))
        self._setup()

    def advance(self, t_target: float) -> "Simulation":
        n_target = int(math.floor(t_target / self.dt + 1e-9))
        while self.n_steps < n_target:
            self.step()
        return self

    def snapshot(self) -> Snapshot:
        return Snapshot(self.t, self.x.copy(), self.u.copy())

    def front_position(self) -> float:
        idx = np.flatnonzero(self.u > self.pair.theta)
        return float(self.x[idx[-1]]) if idx.size else 0.0

    def mass(self) -> float:
        return float(np.dot(self.volumes, self.u))


def step(state: Simulation) -> Simulation:
    return state.step()


@dataclass(frozen=True)
class Trajectory:
    pair: ReactionPair = field(repr=False)
    zone: ProtectionZone | None
    initial: InitialData
    h: float
    dt: float
    snapshots: tuple[Snapshot, ...] = field(repr=False)
    times: np.ndarray = field(repr=False)
    sup_norm: np.ndarray = field(repr=False)
    front: np.ndarray = field(repr=False)
    T_reached: float = 0.0
    status: str = "ok"

    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def write_snapshots_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "u"])
            for s in self.snapshots:
                for xi, ui in zip(s.x, s.u):
                    w.writerow([repr(float(s.t)), repr(float(xi)), repr(float(ui))])

    def write_timeseries_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "sup_norm", "front_position"])
            for row in zip(self.times, self.sup_norm, self.front):
                w.writerow([repr(float(v)) for v in row])


class _Recorder:
    def __init__(self, sim: Simulation, snap_times: Sequence[float], every: int):
        self.sim = sim
        self.snap_times = sorted(set(float(t) for t in snap_times))
        self.every = max(1, every)
        self.snaps: list[Snapshot] = []
        self.times: list[float] = []
        self.sup: list[float] = []
        self.front: list[float] = []
        self._next = 0
        self.record()

    def record(self):
        sim = self.sim
        if sim.n_steps % self.every == 0:
            self.times.append(sim.t)
            self.sup.append(float(sim.u.max()))
            self.front.append(sim.front_position())
        while self._next < len(self.snap_times) and sim.t >= self.snap_times[self._next] - 1e-9:
            if not self.snaps or self.snaps[-1].t != sim.t:
                self.snaps.append(sim.snapshot())
            self._next += 1

    def run(self, T: float, callback=None):
        sim = self.sim
        n_end = int(math.floor(T / sim.dt + 1e-9))
        while sim.n_steps < n_end:
            sim.step()
            self.record()
            if callback is not None and callback(sim):
                break

    def trajectory(self, status: str = "ok") -> Trajectory:
        sim = self.sim
        snaps = list(self.snaps)
        if not snaps or snaps[-1].t != sim.t:
            snaps.append(sim.snapshot())
        return Trajectory(
            sim.pair, sim.zone, sim.initial, sim.h, sim.dt, tuple(snaps),
            np.array(self.times), np.array(self.sup), np.array(self.front), sim.t, status,
        )


def simulate(
    pair: ReactionPair,
    zone: ProtectionZone | None,
    initial: InitialData,
    T: float,
    snapshot_times: Sequence[float] | None = None,
    snapshot_every: float = 1.0,
    record_every: float = 0.1,
    **sim_kw,
) -> Trajectory:
    """Run to time ``T`` and return snapshots plus the sup-norm/front series.

    On a node-cap hit the raised ``ResourceError`` carries the partial record.
    """
    if not T >= 0:
        raise ConfigurationError("T must be nonnegative")
    sim_kw.setdefault("T_hint", T)
    sim = Simulation(pair, zone, initial, **sim_kw)
    if snapshot_times is None:
        k = int(math.floor(T / snapshot_every + 1e-9))
        snapshot_times = [i * snapshot_every for i in range(k + 1)] + [T]
    rec = _Recorder(sim, snapshot_times, int(round(record_every / sim.dt)))
    try:
        rec.run(T)
    except ResourceError as err:
        raise ResourceError(str(err), rec.trajectory("resource_cap")) from None
    return rec.trajectory()


@dataclass
class DecayBounds:
    kappa1: float
    kappa2: float
    kappa2_apriori: float
    M: float
    epsilon0: float
    x1: float
    rate: float
    s0: float
    gaussian_ok: bool
    exponential_ok: bool | None
    failures: list[tuple[str, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _linear_decay_level(pair: ReactionPair, c: float) -> float:
    """Largest ``s0 <= 1`` with ``g(v) <= -c v`` on ``(0, s0]``."""
    v = np.geomspace(1e-10, 1.0, 20001)
    bad = np.flatnonzero(pair.g(v) > -c * v)
    if bad.size == 0:
        return 1.0
    return float(v[bad[0] - 1]) if bad[0] > 0 else 0.0


def check_decay_bounds(traj: Trajectory, pair: ReactionPair, zone: ProtectionZone | None,
                       vanished: bool = False, floor_rel: float = 1e-12) -> DecayBounds:
    """Fit the Gaussian envelope constant and, when the principal eigenvalue
    is positive and the run vanished, the exponential spatial envelope.

    Gaussian: ``u <= kappa2 exp(M t - (x - hbar)_+^2 / (4t))`` for ``t >= 1``;
    the fitted ``kappa2`` must not exceed the heat-kernel value
    ``sup u0 * max(1, hbar / sqrt(pi))``. Nodes below ``floor_rel * sup u0``
    are skipped: backward Euler leaves an exponential, not Gaussian, far tail
    whose size is far below the scheme's own absolute error.

    Exponential: beyond the first node ``x1 >= max(outer, hbar)`` where every
    snapshot stays below ``s0``, ``u <= kappa1 exp(-rate (x - x1))`` with
    ``rate = sqrt(-g'(0) - eps0)``; passes when the fitted ``kappa1 <= s0``.
    """
    M = pair.lipschitz_M
    hbar = traj.initial.hbar
    snaps = [s for s in traj.snapshots if s.t >= 1.0]
    failures: list[tuple[str, float, float]] = []
    k2_prior = traj.initial.sup * max(1.0, hbar / math.sqrt(math.pi))
    log_k2 = -math.inf
    arg = (math.nan, math.nan)
    floor = max(floor_rel * traj.initial.sup, 1e-300)
    for s in snaps:
        pos = s.u > floor
        if not np.any(pos):
            continue
        xp = s.x[pos]
        val = np.log(s.u[pos]) - M * s.t + np.maximum(xp - hbar, 0.0) ** 2 / (4 * s.t)
        i = int(np.argmax(val))
        if val[i] > log_k2:
            log_k2, arg = float(val[i]), (s.t, float(xp[i]))
    kappa2 = math.exp(log_k2) if log_k2 > -math.inf else 0.0
    gaussian_ok = bool(log_k2 <= math.log(k2_prior) + 1e-9) if k2_prior > 0 else kappa2 == 0.0
    if not gaussian_ok:
        failures.append(("gaussian", *arg))

    b = -pair.gp0
    lam = lambda1(pair, zone).lambda1 if zone is not None else b
    eps0 = 0.5 * min(b, lam) if lam > 0 else 0.0
    rate = math.sqrt(max(b - eps0, 0.0))
    s0 = _linear_decay_level(pair, b - eps0)
    kappa1, x1 = math.nan, math.nan
    exp_ok: bool | None = None
    if vanished and lam > 0 and snaps:
        outer = zone.outer if zone is not None else 0.0
        start = max(outer, hbar)
        x_ref = snaps[0].x
        peak = np.zeros(x_ref.size)
        for s in snaps:
            n = min(x_ref.size, s.x.size)
            peak[:n] = np.maximum(peak[:n], s.u[:n])
        ok_from = np.flatnonzero((x_ref >= start) & (peak <= s0))
        # first node from which the bound level holds all the way out
        above = np.flatnonzero((x_ref >= start) & (peak > s0))
        if above.size:
            ok_from = ok_from[ok_from > above[-1]]
        if ok_from.size:
            x1 = float(x_ref[ok_from[0]])
            log_k1 = -math.inf
            arg = (math.nan, math.nan)
            for s in snaps:
                m = (s.x >= x1) & (s.u > 1e-300)
                if not np.any(m):
                    continue
                val = np.log(s.u[m]) + rate * (s.x[m] - x1)
                i = int(np.argmax(val))
                if val[i] > log_k1:
                    log_k1, arg = float(val[i]), (s.t, float(s.x[m][i]))
            kappa1 = math.exp(log_k1) if log_k1 > -math.inf else 0.0
            exp_ok = bool(kappa1 <= s0 * (1 + 1e-12))
            if not exp_ok:
                failures.append(("exponential", *arg))
        else:
            exp_ok = False
            failures.append(("exponential", math.nan, math.nan))
    return DecayBounds(kappa1, kappa2, k2_prior, M, eps0, x1, rate, s0, gaussian_ok, exp_ok, failures)
