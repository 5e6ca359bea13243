from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union


@dataclass(frozen=True)
class Connected:
    """Protection zone ``[0, L]`` (half of the symmetric ``[-L, L]``)."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("zone length L must be positive")

    @property
    def length(self) -> float:
        return self.L

    @property
    def interfaces(self) -> tuple[float, ...]:
        return (self.L,)

    @property
    def outer(self) -> float:
        return self.L

    def in_zone(self, x: float) -> bool:
        return 0.0 <= x <= self.L

    def to_config(self) -> dict[str, Any]:
        return {"type": "connected", "L": self.L}


@dataclass(frozen=True)
class Separate:
    """Protection zone ``[L1, L2]`` (half of ``[-L2, -L1] u [L1, L2]``)."""

    L1: float
    L2: float

    def __post_init__(self):
        if not 0 < self.L1 < self.L2:
            raise ValueError("separate zone needs 0 < L1 < L2")

    @classmethod
    def from_length(cls, L1: float, L: float) -> "Separate":
        return cls(L1, L1 + L)

    @property
    def length(self) -> float:
        return self.L2 - self.L1

    @property
    def interfaces(self) -> tuple[float, ...]:
        return (self.L1, self.L2)

    @property
    def outer(self) -> float:
        return self.L2

    def in_zone(self, x: float) -> bool:
        return self.L1 <= x <= self.L2

    def to_config(self) -> dict[str, Any]:
        return {"type": "separate", "L1": self.L1, "L2": self.L2}


ProtectionZone = Union[Connected, Separate]


def zone_from_config(cfg: dict[str, Any]) -> ProtectionZone:
    kind = cfg.get("type", "connected")
    if kind == "connected":
        return Connected(float(cfg["L"]))
    if kind == "separate":
        if "L2" in cfg:
            return Separate(float(cfg["L1"]), float(cfg["L2"]))
        return Separate.from_length(float(cfg["L1"]), float(cfg["L"]))
    raise ValueError(f"unknown zone type {kind!r}")
