# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled medium kernel. Mirrors ``detwpan._pymedium`` exactly."""

from libc.stdlib cimport malloc, calloc, free

cdef enum:
    MAXTX = 128

RECEIVED = 0
COLLISION = 1

SILENT = 0
HEARD = 1
COLLIDED = 2

IMPLEMENTATION = "cython"


cdef class MediumCore:
    cdef int n
    cdef double sens
    cdef double *pl
    cdef char *listening
    cdef int *channel
    cdef int *count          # in-flight audible transmissions per listener
    cdef char *used          # slot in use
    cdef int *src
    cdef char *aud           # [MAXTX * n]
    cdef char *corrupt
    cdef char *valid
    cdef double *rx
    cdef long long *handle_of_slot
    cdef long long next_handle
    cdef dict slot_of_handle

    def __cinit__(self, pathloss, double sensitivity):
        cdef int i, j
        self.n = len(pathloss)
        n = self.n
        self.sens = sensitivity
        self.pl = <double *> malloc(max(n * n, 1) * sizeof(double))
        self.listening = <char *> calloc(max(n, 1), sizeof(char))
        self.channel = <int *> calloc(max(n, 1), sizeof(int))
        self.count = <int *> calloc(max(n, 1), sizeof(int))
        self.used = <char *> calloc(MAXTX, sizeof(char))
        self.src = <int *> calloc(MAXTX, sizeof(int))
        self.aud = <char *> calloc(MAXTX * max(n, 1), sizeof(char))
        self.corrupt = <char *> calloc(MAXTX * max(n, 1), sizeof(char))
        self.valid = <char *> calloc(MAXTX * max(n, 1), sizeof(char))
        self.rx = <double *> calloc(MAXTX * max(n, 1), sizeof(double))
        self.handle_of_slot = <long long *> calloc(MAXTX, sizeof(long long))
        if (not self.pl or not self.listening or not self.channel or not self.count
                or not self.used or not self.src or not self.aud or not self.corrupt
                or not self.valid or not self.rx or not self.handle_of_slot):
            raise MemoryError()
        for i in range(n):
            row = pathloss[i]
            for j in range(n):
                self.pl[i * n + j] = row[j]
        self.next_handle = 0
        self.slot_of_handle = {}

    def __dealloc__(self):
        free(self.pl); free(self.listening); free(self.channel); free(self.count)
        free(self.used); free(self.src); free(self.aud); free(self.corrupt)
        free(self.valid); free(self.rx); free(self.handle_of_slot)

    @property
    def sensitivity(self):
        return self.sens

    cdef void _drop(self, int dev):
        cdef int s
        for s in range(MAXTX):
            if self.used[s] and self.aud[s * self.n + dev]:
                self.valid[s * self.n + dev] = 0

    def set_channel(self, int dev, int channel):
        if self.channel[dev] != channel:
            self._drop(dev)
            self.channel[dev] = channel

    def set_listening(self, int dev, flag):
        cdef char f = 1 if flag else 0
        if not f and self.listening[dev]:
            self._drop(dev)
        self.listening[dev] = f

    def is_listening(self, int dev):
        return bool(self.listening[dev])

    def busy(self, int dev):
        return self.count[dev] > 0

    def inflight(self):
        return len(self.slot_of_handle)

    def rx_power(self, int src, int dst, double power):
        return power - self.pl[src * self.n + dst]

    def begin(self, int src, double power, int channel):
        cdef int s = -1, t, j, n = self.n, base, ob
        cdef double p
        for t in range(MAXTX):
            if not self.used[t]:
                s = t
                break
        if s < 0:
            raise RuntimeError("too many simultaneous transmissions")
        self.used[s] = 1
        self.src[s] = src
        base = s * n
        for j in range(n):
            self.aud[base + j] = 0
            self.corrupt[base + j] = 0
            self.valid[base + j] = 0
            if j == src or self.channel[j] != channel:
                continue
            p = power - self.pl[src * n + j]
            if p < self.sens:
                continue
            self.aud[base + j] = 1
            self.rx[base + j] = p
            if self.count[j] > 0:
                self.corrupt[base + j] = 1
                for t in range(MAXTX):
                    ob = t * n + j
                    if t != s and self.used[t] and self.aud[ob]:
                        self.corrupt[ob] = 1
            self.count[j] += 1
            if self.listening[j]:
                self.valid[base + j] = 1
        h = self.next_handle
        self.next_handle += 1
        self.handle_of_slot[s] = h
        self.slot_of_handle[h] = s
        return h

    def finish(self, h):
        cdef int s = self.slot_of_handle.pop(h)
        cdef int j, n = self.n, base = s * n
        out = []
        for j in range(n):
            if self.aud[base + j]:
                self.count[j] -= 1
                if self.valid[base + j]:
                    out.append((j, COLLISION if self.corrupt[base + j] else RECEIVED,
                                self.rx[base + j]))
                self.aud[base + j] = 0
        self.used[s] = 0
        return out


def resolve_codes(rx_dbm, double sensitivity):
    cdef int t, count, heard
    cdef double p
    out = []
    for row in rx_dbm:
        heard = -1
        count = 0
        t = 0
        for v in row:
            p = v
            if p >= sensitivity:
                count += 1
                heard = t
            t += 1
        if count == 0:
            out.append((SILENT, -1))
        elif count == 1:
            out.append((HEARD, heard))
        else:
            out.append((COLLIDED, -1))
    return out
