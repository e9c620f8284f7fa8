# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled replay kernels: basis-state simulation and schedule counting.

Mirrors kernel_py exactly; selected at import by ecshor.kernel when built.
"""
import math

import numpy as np
cimport numpy as cnp

from .circuit import (CHECK_INVERTIBLE, CHECK_RANGE, CHECK_ZERO,
                      ANDInverseMismatch, ANDTargetNonZero, InputOutOfRange,
                      NotInvertible, ReleaseNonZero)

cnp.import_array()

DEF OP_X = 0
DEF OP_CNOT = 1
DEF OP_TOFFOLI = 2
DEF OP_AND = 3
DEF OP_ANDINV = 4
DEF OP_SWAP = 5
DEF OP_LOOKUP = 6
DEF OP_ALLOC = 7
DEF OP_FREE = 8
DEF OP_SYNC = 9
DEF OP_ASSERT = 10
DEF OP_MARK = 11

DEF P_TOF_T = 0
DEF P_TOF_TD = 1
DEF P_TOF_CL = 2
DEF P_TOF_AUX = 3
DEF P_TOF_DUR = 4
DEF P_AND_T = 5
DEF P_AND_TD = 6
DEF P_AND_CL = 7
DEF P_AND_AUX = 8
DEF P_AND_DUR = 9
DEF P_ANDINV_CL = 10
DEF P_ANDINV_MEAS = 11
DEF P_ANDINV_DUR = 12
DEF P_SWAP_CL = 13
DEF P_SWAP_DUR = 14
DEF P_LK_T = 15
DEF P_LK_TD = 16
DEF P_LK_CLA = 17
DEF P_LK_DUR = 18
DEF P_X_CL = 19
DEF P_X_DUR = 20
DEF P_CNOT_CL = 21
DEF P_CNOT_DUR = 22

DEF R_T = 0
DEF R_TB = 1
DEF R_CL = 2
DEF R_MEAS = 3
DEF R_FULLD = 4
DEF R_TDEPTH = 5
DEF R_WIDTH = 6
DEF R_LIVE_END = 7
DEF R_GATES = 8

IS_COMPILED = True


def simulate_packed(cnp.int64_t[::1] code, list tbits, list checks,
                    cnp.uint8_t[::1] state):
    cdef Py_ssize_t i = 0, n = code.shape[0]
    cdef Py_ssize_t j, k, w, cnt, t
    cdef long long op, a
    cdef cnp.uint8_t[:, ::1] tab
    while i < n:
        op = code[i]
        if op == OP_X:
            state[code[i + 1]] ^= 1
            i += 2
        elif op == OP_CNOT:
            if state[code[i + 1]]:
                state[code[i + 2]] ^= 1
            i += 3
        elif op == OP_TOFFOLI:
            if state[code[i + 1]] and state[code[i + 2]]:
                state[code[i + 3]] ^= 1
            i += 4
        elif op == OP_AND:
            t = code[i + 3]
            if state[t]:
                raise ANDTargetNonZero(f"AND target wire {t} not fresh")
            state[t] = state[code[i + 1]] & state[code[i + 2]]
            i += 4
        elif op == OP_ANDINV:
            t = code[i + 3]
            if state[t] != (state[code[i + 1]] & state[code[i + 2]]):
                raise ANDInverseMismatch(
                    f"ANDInverse target wire {t} disagrees with controls")
            state[t] = 0
            i += 4
        elif op == OP_SWAP:
            j = code[i + 1]
            k = code[i + 2]
            state[j], state[k] = state[k], state[j]
            i += 3
        elif op == OP_LOOKUP:
            k = code[i + 2]
            w = code[i + 3]
            a = 0
            for j in range(k):
                if state[code[i + 4 + j]]:
                    a |= 1 << j
            tab = tbits[code[i + 1]]
            cnt = tab.shape[1]
            if cnt > w:
                cnt = w
            for j in range(cnt):
                if tab[a, j]:
                    state[code[i + 4 + k + j]] ^= 1
            i += 4 + k + w
        elif op == OP_ALLOC:
            # freed wires were verified zero; allocation never rewrites state
            i += 2 + code[i + 1]
        elif op == OP_FREE:
            cnt = code[i + 1]
            for j in range(cnt):
                if state[code[i + 2 + j]]:
                    raise ReleaseNonZero(
                        f"released wire {code[i + 2 + j]} holds 1")
            i += 2 + cnt
        elif op == OP_SYNC or op == OP_MARK:
            i += 2
        elif op == OP_ASSERT:
            cnt = code[i + 2]
            kind, bound = checks[code[i + 1]]
            val = 0
            for j in range(cnt):
                if state[code[i + 3 + j]]:
                    val |= 1 << j
            if kind == CHECK_RANGE and val >= bound:
                raise InputOutOfRange(f"register value {val} >= {bound}")
            if kind == CHECK_INVERTIBLE and math.gcd(val, bound) != 1:
                raise NotInvertible(f"gcd({val}, {bound}) != 1")
            if kind == CHECK_ZERO and val != 0:
                raise ReleaseNonZero(f"register expected 0, holds {val}")
            i += 3 + cnt
        else:
            raise ValueError(f"bad opcode {op} at {i}")


cdef class _Sched:
    cdef cnp.int64_t[::1] ready
    cdef object ready_arr
    cdef cnp.uint8_t[::1] bits
    cdef object bits_arr
    cdef public long long floor, max_end, live, width
    cdef cnp.int64_t[::1] res
    cdef object res_arr

    def __cinit__(self):
        self.ready_arr = np.zeros(1024, dtype=np.int64)
        self.ready = self.ready_arr
        self.bits_arr = np.zeros(1024, dtype=np.uint8)
        self.bits = self.bits_arr
        self.res_arr = np.zeros(R_GATES + 1, dtype=np.int64)
        self.res = self.res_arr
        self.floor = 0
        self.max_end = 0
        self.live = 0
        self.width = 0

    cdef void grow(self, long long wmax):
        cdef Py_ssize_t size = self.ready.shape[0]
        if wmax < size:
            return
        while wmax >= size:
            size *= 2
        nr = np.zeros(size, dtype=np.int64)
        nr[:self.ready.shape[0]] = self.ready_arr
        self.ready_arr = nr
        self.ready = nr

    cdef void mark(self, long long start, long long stop):
        cdef Py_ssize_t size = self.bits.shape[0]
        cdef long long layer
        if stop > size * 8:
            while stop > size * 8:
                size *= 2
            nb = np.zeros(size, dtype=np.uint8)
            nb[:self.bits.shape[0]] = self.bits_arr
            self.bits_arr = nb
            self.bits = nb
        for layer in range(start, stop):
            self.bits[layer >> 3] |= <cnp.uint8_t> (1 << (layer & 7))

    cdef void gate(self, cnp.int64_t[::1] code, Py_ssize_t off, Py_ssize_t nw,
                   long long t, long long td, long long cl, long long meas,
                   long long aux, long long dur):
        cdef long long start = self.floor, end
        cdef Py_ssize_t j
        cdef long long w, mx = 0
        for j in range(nw):
            w = code[off + j]
            if w > mx:
                mx = w
        self.grow(mx)
        for j in range(nw):
            w = code[off + j]
            if self.ready[w] > start:
                start = self.ready[w]
        end = start + dur
        for j in range(nw):
            self.ready[code[off + j]] = end
        if end > self.max_end:
            self.max_end = end
        if td:
            self.mark(start, start + td)
        self.res[R_T] += t
        self.res[R_CL] += cl
        self.res[R_MEAS] += meas
        self.res[R_GATES] += 1
        if t:
            self.res[R_TB] += 1
        if self.live + aux > self.width:
            self.width = self.live + aux


def count_packed(cnp.int64_t[::1] code, cnp.int64_t[::1] table_sizes,
                 cnp.int64_t[::1] params):
    cdef _Sched s = _Sched()
    cdef Py_ssize_t i = 0, n = code.shape[0]
    cdef Py_ssize_t j, cnt
    cdef long long op, k, w, nent, wid, mx
    while i < n:
        op = code[i]
        if op == OP_X:
            s.gate(code, i + 1, 1, 0, 0, params[P_X_CL], 0, 0, params[P_X_DUR])
            i += 2
        elif op == OP_CNOT:
            s.gate(code, i + 1, 2, 0, 0, params[P_CNOT_CL], 0, 0, params[P_CNOT_DUR])
            i += 3
        elif op == OP_TOFFOLI:
            s.gate(code, i + 1, 3, params[P_TOF_T], params[P_TOF_TD],
                   params[P_TOF_CL], 0, params[P_TOF_AUX], params[P_TOF_DUR])
            i += 4
        elif op == OP_AND:
            s.gate(code, i + 1, 3, params[P_AND_T], params[P_AND_TD],
                   params[P_AND_CL], 0, params[P_AND_AUX], params[P_AND_DUR])
            i += 4
        elif op == OP_ANDINV:
            s.gate(code, i + 1, 3, 0, 0, params[P_ANDINV_CL],
                   params[P_ANDINV_MEAS], 0, params[P_ANDINV_DUR])
            i += 4
        elif op == OP_SWAP:
            s.gate(code, i + 1, 2, 0, 0, params[P_SWAP_CL], 0, 0, params[P_SWAP_DUR])
            i += 3
        elif op == OP_LOOKUP:
            k = code[i + 2]
            w = code[i + 3]
            nent = table_sizes[code[i + 1]]
            s.gate(code, i + 4, k + w, params[P_LK_T] * nent,
                   params[P_LK_TD] * nent, nent * (params[P_LK_CLA] + w // 2),
                   nent - 1, k, params[P_LK_DUR] * nent)
            i += 4 + k + w
        elif op == OP_ALLOC:
            cnt = code[i + 1]
            mx = 0
            for j in range(cnt):
                wid = code[i + 2 + j]
                if wid > mx:
                    mx = wid
            s.grow(mx)
            for j in range(cnt):
                s.ready[code[i + 2 + j]] = s.floor
            s.live += cnt
            if s.live > s.width:
                s.width = s.live
            i += 2 + cnt
        elif op == OP_FREE:
            s.live -= code[i + 1]
            i += 2 + code[i + 1]
        elif op == OP_SYNC:
            s.floor = s.max_end
            i += 2
        elif op == OP_MARK:
            i += 2
        elif op == OP_ASSERT:
            i += 3 + code[i + 2]
        else:
            raise ValueError(f"bad opcode {op} at {i}")
    res = s.res_arr
    res[R_FULLD] = s.max_end
    res[R_TDEPTH] = int(np.unpackbits(s.bits_arr).sum())
    res[R_WIDTH] = s.width
    res[R_LIVE_END] = s.live
    return res
