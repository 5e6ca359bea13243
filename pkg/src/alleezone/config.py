"""Run configuration: one JSON document drives every CLI subcommand."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any


@dataclass
class SolverParams:
    h: float = 0.02
    dt: float | None = None  # None: min(0.005, 0.9/M)
    T: float = 100.0
    x_max: float | None = None
    x_max_policy: str = "extend"  # extend | a_priori | fixed
    max_nodes: int = 400_000
    snapshot_every: float = 10.0


@dataclass
class ClassifyParams:
    T_max: float = 400.0
    check_every: float = 1.0
    alpha: float | None = None  # None: (theta* + 1) / 2
    tol: float | None = None  # None: 1e-3 * sigma range width
    sigma_range: list[float] = field(default_factory=lambda: [0.01, 4.0])


@dataclass
class CriticalParams:
    L1_grid: list[float] = field(default_factory=lambda: [0.2, 1.0, 5.0])
    n_scan: int = 512


@dataclass
class SweepParams:
    L_values: list[float] = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.5])
    L1: float | None = None  # set for separate zones; L is then L2 - L1
    sigmas: list[float] = field(default_factory=lambda: [0.001, 0.01, 0.1, 1.0, 3.0])


@dataclass
class RunConfig:
    reaction: dict[str, Any] = field(default_factory=lambda: {"kind": "cubic", "theta": 0.25})
    zone: dict[str, Any] = field(default_factory=lambda: {"type": "connected", "L": 0.25})
    initial: dict[str, Any] = field(default_factory=lambda: {"shape": "rectangle", "sigma": 1.0, "hbar": 2.0})
    solver: SolverParams = field(default_factory=SolverParams)
    classify: ClassifyParams = field(default_factory=ClassifyParams)
    critical: CriticalParams = field(default_factory=CriticalParams)
    sweep: SweepParams = field(default_factory=SweepParams)
    out: str = "out"
    format: str = "csv"
    deterministic: bool = True

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        kw = dict(data)
        for name, sub in (("solver", SolverParams), ("classify", ClassifyParams),
                          ("critical", CriticalParams), ("sweep", SweepParams)):
            if name in kw:
                part = dict(kw[name])
                bad = set(part) - {f.name for f in fields(sub)}
                if bad:
                    raise ValueError(f"unknown {name} keys: {sorted(bad)}")
                kw[name] = sub(**part)
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())
