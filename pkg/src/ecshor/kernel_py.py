"""Pure-Python replay kernels: basis-state simulation and schedule counting.

These are the fallback twins of the compiled ``_kernel`` extension; both
consume the packed event stream produced by ``Circuit.pack()`` and must
produce bit-identical results.
"""
from __future__ import annotations

import math

import numpy as np

from .circuit import (CHECK_INVERTIBLE, CHECK_RANGE, CHECK_ZERO,
                      ANDInverseMismatch, ANDTargetNonZero, InputOutOfRange,
                      NotInvertible, Op, ReleaseNonZero)

# parameter vector layout shared with the compiled kernel
P_TOF_T, P_TOF_TD, P_TOF_CL, P_TOF_AUX, P_TOF_DUR = 0, 1, 2, 3, 4
P_AND_T, P_AND_TD, P_AND_CL, P_AND_AUX, P_AND_DUR = 5, 6, 7, 8, 9
P_ANDINV_CL, P_ANDINV_MEAS, P_ANDINV_DUR = 10, 11, 12
P_SWAP_CL, P_SWAP_DUR = 13, 14
P_LK_T, P_LK_TD, P_LK_CLA, P_LK_DUR = 15, 16, 17, 18
P_X_CL, P_X_DUR, P_CNOT_CL, P_CNOT_DUR = 19, 20, 21, 22
N_PARAMS = 23

# result vector layout
R_T, R_TB, R_CL, R_MEAS, R_FULLD, R_TDEPTH, R_WIDTH, R_LIVE_END, R_GATES = range(9)
N_RESULTS = 9

IS_COMPILED = False


def _reg_value(state, wires) -> int:
    v = 0
    for i, w in enumerate(wires):
        if state[w]:
            v |= 1 << i
    return v


def simulate_packed(code, tbits, checks, state) -> None:
    """Execute a packed event stream on a mutable uint8 state vector."""
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        if op == Op.X:
            state[code[i + 1]] ^= 1
            i += 2
        elif op == Op.CNOT:
            if state[code[i + 1]]:
                state[code[i + 2]] ^= 1
            i += 3
        elif op == Op.TOFFOLI:
            if state[code[i + 1]] and state[code[i + 2]]:
                state[code[i + 3]] ^= 1
            i += 4
        elif op == Op.AND:
            t = code[i + 3]
            if state[t]:
                raise ANDTargetNonZero(f"AND target wire {t} not fresh")
            state[t] = state[code[i + 1]] & state[code[i + 2]]
            i += 4
        elif op == Op.ANDINV:
            t = code[i + 3]
            conj = state[code[i + 1]] & state[code[i + 2]]
            if state[t] != conj:
                raise ANDInverseMismatch(
                    f"ANDInverse target wire {t} holds {state[t]}, controls give {conj}")
            state[t] = 0
            i += 4
        elif op == Op.SWAP:
            a, b = code[i + 1], code[i + 2]
            state[a], state[b] = state[b], state[a]
            i += 3
        elif op == Op.LOOKUP:
            tidx, k, w = code[i + 1], code[i + 2], code[i + 3]
            addr = code[i + 4:i + 4 + k]
            tgts = code[i + 4 + k:i + 4 + k + w]
            a = 0
            for j in range(k):
                if state[addr[j]]:
                    a |= 1 << j
            row = tbits[tidx][a]
            m = min(w, row.shape[0])
            for j in range(m):
                if row[j]:
                    state[tgts[j]] ^= 1
            i += 4 + k + w
        elif op == Op.ALLOC:
            # freed wires were verified zero, so allocation never rewrites
            # state; this lets callers seed input registers before replay
            i += 2 + code[i + 1]
        elif op == Op.FREE:
            cnt = code[i + 1]
            for j in range(cnt):
                w = code[i + 2 + j]
                if state[w]:
                    raise ReleaseNonZero(f"released wire {w} holds 1")
            i += 2 + cnt
        elif op == Op.SYNC or op == Op.MARK:
            i += 2
        elif op == Op.ASSERT:
            cidx, cnt = code[i + 1], code[i + 2]
            kind, bound = checks[cidx]
            val = _reg_value(state, code[i + 3:i + 3 + cnt])
            if kind == CHECK_RANGE and val >= bound:
                raise InputOutOfRange(f"register value {val} >= {bound}")
            if kind == CHECK_INVERTIBLE and math.gcd(val, bound) != 1:
                raise NotInvertible(f"gcd({val}, {bound}) != 1")
            if kind == CHECK_ZERO and val != 0:
                raise ReleaseNonZero(f"register expected 0, holds {val}")
            i += 3 + cnt
        else:
            raise ValueError(f"bad opcode {op} at {i}")


class _Bitmap:
    """Growable layer bitmap for counting T-bearing layers."""

    def __init__(self):
        self.bits = np.zeros(1024, dtype=np.uint8)

    def mark(self, start: int, stop: int) -> None:
        if stop > self.bits.shape[0] * 8:
            size = self.bits.shape[0]
            while stop > size * 8:
                size *= 2
            nb = np.zeros(size, dtype=np.uint8)
            nb[:self.bits.shape[0]] = self.bits
            self.bits = nb
        first_byte = (start + 7) >> 3
        last_byte = stop >> 3
        if last_byte > first_byte:
            self.bits[first_byte:last_byte] |= 0xFF
            for layer in range(start, min(first_byte << 3, stop)):
                self.bits[layer >> 3] |= 1 << (layer & 7)
            for layer in range(max(last_byte << 3, start), stop):
                self.bits[layer >> 3] |= 1 << (layer & 7)
        else:
            for layer in range(start, stop):
                self.bits[layer >> 3] |= 1 << (layer & 7)

    def popcount(self) -> int:
        return int(np.unpackbits(self.bits).sum())


def count_packed(code, table_sizes, params):
    """ASAP list scheduling over a packed event stream.

    Each gate occupies ``duration`` units on all of its wires; a gate's
    first ``t_depth`` layers are marked as T-bearing.  SYNC raises the
    scheduling floor to the current makespan; fresh wires become ready at
    the floor.  Width is peak live wires plus the largest concurrent
    gate-auxiliary demand.
    """
    ready = np.zeros(1024, dtype=np.int64)
    floor = 0
    max_end = 0
    live = 0
    width = 0
    bm = _Bitmap()
    res = np.zeros(N_RESULTS, dtype=np.int64)

    def grow(wmax: int):
        nonlocal ready
        if wmax >= ready.shape[0]:
            size = ready.shape[0]
            while wmax >= size:
                size *= 2
            nr = np.zeros(size, dtype=np.int64)
            nr[:ready.shape[0]] = ready
            ready = nr

    def gate(ws, t, td, cl, meas, aux, dur):
        nonlocal max_end, width
        start = floor
        for w in ws:
            if ready[w] > start:
                start = ready[w]
        end = start + dur
        for w in ws:
            ready[w] = end
        if end > max_end:
            max_end = end
        if td:
            bm.mark(start, start + td)
        res[R_T] += t
        res[R_CL] += cl
        res[R_MEAS] += meas
        res[R_GATES] += 1
        if t:
            res[R_TB] += 1
        if live + aux > width:
            width = live + aux

    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        if op == Op.X:
            grow(code[i + 1])
            gate(code[i + 1:i + 2], 0, 0, params[P_X_CL], 0, 0, params[P_X_DUR])
            i += 2
        elif op == Op.CNOT:
            grow(max(code[i + 1], code[i + 2]))
            gate(code[i + 1:i + 3], 0, 0, params[P_CNOT_CL], 0, 0, params[P_CNOT_DUR])
            i += 3
        elif op == Op.TOFFOLI:
            grow(max(code[i + 1], code[i + 2], code[i + 3]))
            gate(code[i + 1:i + 4], params[P_TOF_T], params[P_TOF_TD],
                 params[P_TOF_CL], 0, params[P_TOF_AUX], params[P_TOF_DUR])
            i += 4
        elif op == Op.AND:
            grow(max(code[i + 1], code[i + 2], code[i + 3]))
            gate(code[i + 1:i + 4], params[P_AND_T], params[P_AND_TD],
                 params[P_AND_CL], 0, params[P_AND_AUX], params[P_AND_DUR])
            i += 4
        elif op == Op.ANDINV:
            grow(max(code[i + 1], code[i + 2], code[i + 3]))
            gate(code[i + 1:i + 4], 0, 0, params[P_ANDINV_CL],
                 params[P_ANDINV_MEAS], 0, params[P_ANDINV_DUR])
            i += 4
        elif op == Op.SWAP:
            grow(max(code[i + 1], code[i + 2]))
            gate(code[i + 1:i + 3], 0, 0, params[P_SWAP_CL], 0, 0, params[P_SWAP_DUR])
            i += 3
        elif op == Op.LOOKUP:
            tidx, k, w = code[i + 1], code[i + 2], code[i + 3]
            ws = code[i + 4:i + 4 + k + w]
            mx = 0
            for x in ws:
                if x > mx:
                    mx = x
            grow(mx)
            nent = int(table_sizes[tidx])
            gate(ws, params[P_LK_T] * nent, params[P_LK_TD] * nent,
                 nent * (params[P_LK_CLA] + w // 2), nent - 1, k,
                 params[P_LK_DUR] * nent)
            i += 4 + k + w
        elif op == Op.ALLOC:
            cnt = code[i + 1]
            mx = 0
            for j in range(cnt):
                wid = code[i + 2 + j]
                if wid > mx:
                    mx = wid
            grow(mx)
            for j in range(cnt):
                ready[code[i + 2 + j]] = floor
            live += cnt
            if live > width:
                width = live
            i += 2 + cnt
        elif op == Op.FREE:
            live -= code[i + 1]
            i += 2 + code[i + 1]
        elif op == Op.SYNC:
            floor = max_end
            i += 2
        elif op == Op.MARK:
            i += 2
        elif op == Op.ASSERT:
            i += 3 + code[i + 2]
        else:
            raise ValueError(f"bad opcode {op} at {i}")

    res[R_FULLD] = max_end
    res[R_TDEPTH] = bm.popcount()
    res[R_WIDTH] = width
    res[R_LIVE_END] = live
    return res
