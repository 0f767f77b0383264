"""Glue between devices, the medium kernel and the trace."""

from __future__ import annotations

from typing import NamedTuple

from . import engine as ev
from .energy import DOZE, IDLE, RX, TX, EnergyAccumulator, EnergyParams
from .frames import BROADCAST, Address, Frame, FrameKind, airtime
from .medium import Medium
from ._pymedium import COLLISION

RESULT_NAMES = ("Received", "Collision")


class TxInfo(NamedTuple):
    src: "Device"
    power: float
    start: int
    end: int
    period: str
    star: int


class Network:
    def __init__(self, engine: ev.Engine, medium: Medium, bitrate: int, energy_params: EnergyParams | None = None):
        self.engine = engine
        self.energy_params = energy_params or EnergyParams()
        self.medium = medium
        self.core = medium.core
        self.bitrate = bitrate
        self.devices: list[Device] = []
        self.by_address: dict[int, Device] = {}
        self._airtime_cache: dict[int, int] = {}
        self._inflight: dict[int, list] = {}
        self.horizon: int | None = None    # transmissions that would end later are not started

    def add(self, dev: "Device") -> None:
        if dev.index != len(self.devices):
            raise ValueError("devices must be added in index order")
        self.devices.append(dev)
        self.by_address[dev.address] = dev
        self.core.set_channel(dev.index, dev.channel)

    def airtime(self, frame: Frame | int) -> int:
        n = frame if isinstance(frame, int) else frame.total_bytes
        t = self._airtime_cache.get(n)
        if t is None:
            t = self._airtime_cache[n] = airtime(n, self.bitrate)
        return t

    def transmit(self, dev: "Device", frame: Frame, power: float, period: str, star: int, **extra) -> int:
        eng = self.engine
        now = eng.now
        dur = self.airtime(frame)
        if self.horizon is not None and now + dur > self.horizon:
            return now + dur
        dev._radio(TX, power)
        h = self.core.begin(dev.index, power, dev.channel)
        peers = set()
        for other in self._inflight.values():
            other[1].add(dev.address)
            peers.add(other[0])
        self._inflight[h] = [dev.address, peers]
        fields = {
            "frame": frame.kind.value, "dst": frame.destination, "bytes": frame.total_bytes,
            "dur": dur, "power": power, "period": period, "star": star,
        }
        if extra:
            fields.update(extra)
        eng.trace.emit(now, dev.address, ev.TX_START, fields)
        eng.schedule(now + dur, self._tx_end, dev, h, frame, TxInfo(dev, power, now, now + dur, period, star))
        return now + dur

    def _tx_end(self, dev: "Device", h: int, frame: Frame, info: TxInfo) -> None:
        eng = self.engine
        now = eng.now
        outcomes = self.core.finish(h)
        _, peers = self._inflight.pop(h)
        emit = eng.trace.emit
        emit(now, dev.address, ev.TX_END, {"start": info.start})
        devices = self.devices
        dst = frame.destination
        src_addr = dev.address
        kind = frame.kind.value
        for j, code, rx in outcomes:
            listener = devices[j]
            if code == COLLISION:
                emit(now, listener.address, ev.RX_OUTCOME, {
                    "src": src_addr, "start": info.start, "frame": kind, "result": "Collision",
                    "rx_dbm": round(rx, 2), "period": info.period, "star": info.star,
                })
                emit(now, listener.address, ev.COLLISION_DETAIL, {
                    "src": src_addr, "start": info.start, "frame": kind, "period": info.period,
                    "overlap": "|".join(str(p) for p in sorted(peers)),
                })
                continue
            if dst == BROADCAST or dst == listener.address:
                emit(now, listener.address, ev.RX_OUTCOME, {
                    "src": src_addr, "start": info.start, "frame": kind, "result": "Received",
                    "rx_dbm": round(rx, 2), "period": info.period, "star": info.star,
                })
            listener.on_frame(frame, rx, info)
        dev.on_tx_done(frame, info)


class Device:
    """Radio-owning participant. Subclasses implement the MAC."""

    is_coordinator = False
    trace_radio = False

    def __init__(self, net: Network, index: int, address: Address, tx_power: float, channel: int):
        self.net = net
        self.engine = net.engine
        self.index = index
        self.address = address
        self.tx_power = tx_power
        self.channel = channel
        self.energy = EnergyAccumulator()
        self.radio = DOZE
        net.medium.set_dozing(index, True)

    # radio state -------------------------------------------------------
    def _radio(self, state: str, power: float = 0.0) -> None:
        if state == self.radio and state != TX:
            return
        now = self.engine.now
        prev = self.radio
        self.energy.switch(now, state, power)
        self.radio = state
        med = self.net.medium
        if state == DOZE:
            med.set_dozing(self.index, True)
        else:
            if prev == DOZE:
                med.dozing[self.index] = False
            self.net.core.set_listening(self.index, state == RX)
        if self.trace_radio and (state == DOZE or prev == DOZE):
            self.engine.trace.emit(now, self.address, ev.STATE_CHANGE, {"radio": state})

    def set_channel(self, channel: int) -> None:
        self.channel = channel
        self.net.core.set_channel(self.index, channel)

    def carrier_busy(self) -> bool:
        if self.radio == TX:
            return True
        return self.net.medium.carrier_sense(self.index)

    def send(self, frame: Frame, power: float | None, period: str, star: int, **extra) -> int:
        return self.net.transmit(self, frame, self.tx_power if power is None else power, period, star, **extra)

    def airtime(self, frame: Frame | int) -> int:
        return self.net.airtime(frame)

    # hooks -------------------------------------------------------------
    def on_frame(self, frame: Frame, rx_dbm: float, info: TxInfo) -> None:
        pass

    def on_tx_done(self, frame: Frame, info: TxInfo) -> None:
        self._radio(RX)

    def start(self) -> None:
        pass

    def finish(self, now: int) -> None:
        self.energy.finalize(now)
        e = self.energy
        self.engine.trace.emit(now, self.address, ev.ENERGY_SNAPSHOT, {
            "doze": e.durations[DOZE], "rx": e.durations[RX], "tx": e.durations[TX],
            "idle": e.durations[IDLE], "lifetime": e.lifetime,
            "charge_uas": round(e.charge_uas(self.net.energy_params), 3),
            "role": "coordinator" if self.is_coordinator else "node",
        })
