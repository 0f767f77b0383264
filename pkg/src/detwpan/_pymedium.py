"""Pure-Python medium kernel. Same interface as the compiled ``_cmedium``."""

from __future__ import annotations

RECEIVED = 0
COLLISION = 1

SILENT = 0
HEARD = 1
COLLIDED = 2

IMPLEMENTATION = "python"


class MediumCore:
    """Incremental overlap bookkeeping for the shared channel.

    Devices are dense integer indices ``0..n-1``. ``pathloss[i][j]`` is the
    loss in dB from ``i`` to ``j``. A frame is audible at ``j`` iff
    ``power - pathloss[src][j] >= sensitivity`` and both are on one channel.
    """

    def __init__(self, pathloss, sensitivity: float):
        self.n = len(pathloss)
        self.pl = [[float(v) for v in row] for row in pathloss]
        self.sensitivity = float(sensitivity)
        self.listening = [False] * self.n
        self.channel = [0] * self.n
        self._audible_at = [set() for _ in range(self.n)]
        self._tx: dict[int, list] = {}
        self._next = 0

    def set_channel(self, dev: int, channel: int) -> None:
        if self.channel[dev] != channel:
            self._drop_receptions(dev)
            self.channel[dev] = channel

    def set_listening(self, dev: int, flag: bool) -> None:
        if not flag and self.listening[dev]:
            self._drop_receptions(dev)
        self.listening[dev] = bool(flag)

    def is_listening(self, dev: int) -> bool:
        return self.listening[dev]

    def _drop_receptions(self, dev: int) -> None:
        for h in self._audible_at[dev]:
            self._tx[h][4].discard(dev)

    def busy(self, dev: int) -> bool:
        return bool(self._audible_at[dev])

    def inflight(self) -> int:
        return len(self._tx)

    def rx_power(self, src: int, dst: int, power: float) -> float:
        return power - self.pl[src][dst]

    def begin(self, src: int, power: float, channel: int) -> int:
        h = self._next
        self._next += 1
        row = self.pl[src]
        sens = self.sensitivity
        chans = self.channel
        listening = self.listening
        audible = []
        corrupted = set()
        valid = set()
        rx = {}
        for j in range(self.n):
            if j == src or chans[j] != channel:
                continue
            p = power - row[j]
            if p < sens:
                continue
            audible.append(j)
            rx[j] = p
            others = self._audible_at[j]
            if others:
                corrupted.add(j)
                for o in others:
                    self._tx[o][3].add(j)
            others.add(h)
            if listening[j]:
                valid.add(j)
        self._tx[h] = [src, power, audible, corrupted, valid, rx]
        return h

    def finish(self, h: int) -> list[tuple[int, int, float]]:
        src, power, audible, corrupted, valid, rx = self._tx.pop(h)
        out = []
        for j in audible:
            self._audible_at[j].discard(h)
            if j in valid:
                out.append((j, COLLISION if j in corrupted else RECEIVED, rx[j]))
        return out


def resolve_codes(rx_dbm, sensitivity: float) -> list[tuple[int, int]]:
    """Resolve one overlap episode.

    ``rx_dbm[l][t]`` is the received power of transmission ``t`` at listener
    ``l``. Returns ``(code, tx_index)`` per listener; ``tx_index`` is only
    meaningful for ``HEARD``.
    """
    out = []
    for row in rx_dbm:
        heard = -1
        count = 0
        for t, p in enumerate(row):
            if p >= sensitivity:
                count += 1
                heard = t
        if count == 0:
            out.append((SILENT, -1))
        elif count == 1:
            out.append((HEARD, heard))
        else:
            out.append((COLLIDED, -1))
    return out
