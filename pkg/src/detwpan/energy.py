"""Per-device radio state time accounting and charge."""

from __future__ import annotations

from dataclasses import dataclass, field

DOZE = "doze"
RX = "rx"
TX = "tx"
IDLE = "idle_awake"

STATES = (DOZE, RX, TX, IDLE)


@dataclass(frozen=True)
class EnergyParams:
    """Currents in µA. Only the 40 µA doze current comes from the transceiver class."""

    doze_ua: float = 40.0
    idle_ua: float = 500.0
    rx_ua: float = 37_000.0
    tx_ua: tuple[tuple[float, float], ...] = ((0.0, 30_000.0), (-8.0, 25_000.0), (-16.0, 22_000.0), (-24.0, 20_000.0))

    def tx_current(self, power_dbm: float) -> float:
        # nearest configured level at or above the requested power
        levels = sorted(self.tx_ua)
        for p, ua in levels:
            if p >= power_dbm - 1e-9:
                return ua
        return levels[-1][1]


@dataclass
class EnergyAccumulator:
    state: str = DOZE
    since: int = 0
    durations: dict[str, int] = field(default_factory=lambda: dict.fromkeys(STATES, 0))
    tx_by_power: dict[float, int] = field(default_factory=dict)
    transitions: int = 0
    tx_power: float = 0.0

    def switch(self, now: int, state: str, tx_power: float = 0.0) -> None:
        self._close(now)
        if state != self.state:
            self.transitions += 1
        self.state = state
        self.tx_power = tx_power

    def _close(self, now: int) -> None:
        dt = now - self.since
        if dt < 0:
            raise ValueError("energy accounting went backwards in time")
        self.durations[self.state] += dt
        if self.state == TX and dt:
            self.tx_by_power[self.tx_power] = self.tx_by_power.get(self.tx_power, 0) + dt
        self.since = now

    def finalize(self, now: int) -> None:
        self._close(now)

    @property
    def lifetime(self) -> int:
        return sum(self.durations.values())

    def fraction(self, state: str) -> float:
        life = self.lifetime
        return self.durations[state] / life if life else 0.0

    def charge_uas(self, params: EnergyParams) -> float:
        """Charge in µA·s."""
        q = (
            self.durations[DOZE] * params.doze_ua
            + self.durations[IDLE] * params.idle_ua
            + self.durations[RX] * params.rx_ua
        )
        for p, dt in self.tx_by_power.items():
            q += dt * params.tx_current(p)
        return q / 1e6
