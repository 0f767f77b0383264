"""Shared radio channel: log-distance propagation, sensitivity, collisions.

The overlap bookkeeping runs in a compiled kernel (``_cmedium``) when it was
built, otherwise in the pure-Python ``_pymedium``. Set ``DETWPAN_PURE=1`` to
force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from . import _pymedium
from .frames import Frame

if os.environ.get("DETWPAN_PURE") == "1":
    _kernel = _pymedium
else:
    try:
        from . import _cmedium as _kernel  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _kernel = _pymedium

MediumCore = _kernel.MediumCore
KERNEL = _kernel.IMPLEMENTATION


class GeometryError(ValueError):
    pass


class MacLogicError(RuntimeError):
    """A MAC queried the medium in a state where it physically cannot."""


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError("non-finite coordinates")

    def distance(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True, slots=True)
class RadioParams:
    tx_power_dbm: float = 0.0
    sensitivity_dbm: float = -95.0
    path_loss_exponent: float = 2.0
    reference_loss_db: float = 40.0

    def __post_init__(self) -> None:
        if self.path_loss_exponent < 2:
            raise ValueError("path_loss_exponent must be >= 2")
        if not self.sensitivity_dbm < self.tx_power_dbm:
            raise ValueError("sensitivity must be below tx power")


def path_loss(distance_m: float, params: RadioParams) -> float:
    if distance_m <= 0:
        raise GeometryError("distance must be positive between distinct devices")
    return params.reference_loss_db + 10.0 * params.path_loss_exponent * math.log10(distance_m)


def received_power(tx_power_dbm: float, distance_m: float, params: RadioParams) -> float:
    return tx_power_dbm - path_loss(distance_m, params)


def audible(rx_power_dbm: float, params: RadioParams) -> bool:
    # closed boundary: rx == sensitivity is audible
    return rx_power_dbm >= params.sensitivity_dbm


class Result(Enum):
    RECEIVED = "Received"
    COLLISION = "Collision"
    BELOW_SENSITIVITY = "BelowSensitivity"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class Transmission:
    frame: Frame
    transmitter: int
    tx_power_dbm: float
    start: int
    duration: int
    position: Position | None = None

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True, slots=True)
class ReceptionOutcome:
    listener: int
    result: Result
    frame: Frame | None = None


def resolve(
    listeners: Iterable[tuple[int, Position]],
    transmissions: Sequence[Transmission],
    params: RadioParams,
) -> list[ReceptionOutcome]:
    """Resolve one episode of pairwise-overlapping transmissions.

    Transmissions need a ``position``. A transmitter listed among the
    listeners is skipped for its own frame.
    """
    listeners = list(listeners)
    rows = []
    for dev, pos in listeners:
        row = []
        for tx in transmissions:
            if tx.transmitter == dev:
                row.append(-math.inf)
            else:
                row.append(received_power(tx.tx_power_dbm, pos.distance(tx.position), params))
        rows.append(row)
    out = []
    for (dev, _), (code, idx) in zip(listeners, _kernel.resolve_codes(rows, params.sensitivity_dbm)):
        if code == _pymedium.HEARD:
            out.append(ReceptionOutcome(dev, Result.RECEIVED, transmissions[idx].frame))
        elif code == _pymedium.COLLIDED:
            out.append(ReceptionOutcome(dev, Result.COLLISION))
        else:
            out.append(ReceptionOutcome(dev, Result.BELOW_SENSITIVITY))
    return out


def pathloss_matrix(positions: Sequence[Position], params: RadioParams) -> list[list[float]]:
    n = len(positions)
    m = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            loss = path_loss(positions[i].distance(positions[j]), params)
            m[i][j] = m[j][i] = loss
    return m


class Medium:
    """Engine-owned channel: wraps the kernel and enforces MAC preconditions."""

    def __init__(self, positions: Sequence[Position], params: RadioParams, core_cls=None):
        self.params = params
        self.positions = list(positions)
        self.pathloss = pathloss_matrix(self.positions, params)
        self.core = (core_cls or MediumCore)(self.pathloss, params.sensitivity_dbm)
        self.dozing = [False] * len(self.positions)

    def set_dozing(self, dev: int, flag: bool) -> None:
        self.dozing[dev] = flag
        if flag:
            self.core.set_listening(dev, False)

    def carrier_sense(self, dev: int) -> bool:
        """True when busy."""
        if self.dozing[dev]:
            raise MacLogicError(f"device {dev} sensed the channel while dozing")
        return self.core.busy(dev)

    def rx_power(self, src: int, dst: int, power: float) -> float:
        return power - self.pathloss[src][dst]
