"""Reversible-circuit IR: gate/event stream, wire identifiers, serialization.

A circuit is an ordered stream of events.  Gate events act on wires (logical
qubits, identified by small integers that the LIFO allocator hands out and
reuses).  Bookkeeping events (alloc/free/sync/assert/mark) carry allocation
structure, scheduling barriers and simulation-time checks.

Wire lists are little-endian: index 0 is the least significant bit.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Op(IntEnum):
    X = 0
    CNOT = 1
    TOFFOLI = 2
    AND = 3        # target must be fresh |0>
    ANDINV = 4     # measurement-based uncompute of AND
    SWAP = 5
    LOOKUP = 6     # table lookup, XORs table[address] into targets
    ALLOC = 7
    FREE = 8
    SYNC = 9       # scheduling barrier, no gates
    ASSERT = 10    # simulation-time check, no gates
    MARK = 11      # structural label, no gates


GATE_OPS = frozenset({Op.X, Op.CNOT, Op.TOFFOLI, Op.AND, Op.ANDINV, Op.SWAP, Op.LOOKUP})

# assert payload kinds
CHECK_RANGE = 0        # register value < bound
CHECK_INVERTIBLE = 1   # gcd(register value, bound) == 1
CHECK_ZERO = 2         # register value == 0


class CircuitError(Exception):
    """Base class for circuit construction/simulation errors."""


class NonLIFORelease(CircuitError):
    pass


class ReleaseNonZero(CircuitError):
    pass


class ANDInverseMismatch(CircuitError):
    pass


class ANDTargetNonZero(CircuitError):
    pass


class RegisterOverlap(CircuitError):
    pass


class ConstantTooLarge(CircuitError):
    pass


class InputOutOfRange(CircuitError):
    pass


class NotInvertible(CircuitError):
    pass


class InvalidWindow(CircuitError):
    pass


class UnknownCurve(CircuitError):
    pass


class InsufficientSamples(CircuitError):
    pass


@dataclass
class Register:
    """Named wire list with a semantic role ('input', 'output', 'aux')."""
    name: str
    wires: list[int]
    role: str = "input"


@dataclass
class Circuit:
    """Ordered event list plus lookup tables and assert payloads.

    ``events`` holds tuples ``(op, *operands)``.  LOOKUP events reference
    ``tables[idx]``; ASSERT events reference ``checks[idx]``.
    """
    events: list[tuple] = field(default_factory=list)
    tables: list[tuple[int, ...]] = field(default_factory=list)
    checks: list[tuple[int, int]] = field(default_factory=list)  # (kind, bound)
    registers: list[Register] = field(default_factory=list)
    n_wires: int = 0  # peak wire index + 1

    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def register(self, name: str) -> Register:
        for r in self.registers:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def gates(self) -> list[tuple]:
        return [e for e in self.events if e[0] in GATE_OPS]

    def counts_by_op(self) -> dict[Op, int]:
        out: dict[Op, int] = {}
        for e in self.events:
            op = Op(e[0])
            out[op] = out.get(op, 0) + 1
        return out

    def pack(self):
        """Flatten events into an int64 stream plus table bit-matrices.

        The packed form is what the replay kernels consume.  Cached; the
        circuit must not be mutated afterwards.
        """
        if self._packed is not None:
            return self._packed
        stream: list[int] = []
        for e in self.events:
            op = e[0]
            if op == Op.LOOKUP:
                _, tidx, addr, tgts = e
                stream += [int(op), tidx, len(addr), len(tgts)]
                stream += list(addr)
                stream += list(tgts)
            elif op in (Op.ALLOC, Op.FREE):
                wires = e[1]
                stream += [int(op), len(wires)]
                stream += list(wires)
            elif op == Op.ASSERT:
                _, cidx, wires = e
                stream += [int(op), cidx, len(wires)]
                stream += list(wires)
            elif op in (Op.SYNC, Op.MARK):
                stream += [int(op), 0 if op == Op.SYNC else e[1]]
            else:
                stream += [int(op)]
                stream += list(e[1:])
        code = np.asarray(stream, dtype=np.int64)
        # Bit matrices for tables: tbits[i] is (N, w) uint8, little-endian bits.
        tbits = []
        for tab in self.tables:
            n = len(tab)
            width = max(v.bit_length() for v in tab) if tab else 1
            # width is recomputed at lookup time from target count; store
            # generously at 1 bit when everything is zero.
            m = np.zeros((n, max(width, 1)), dtype=np.uint8)
            for i, v in enumerate(tab):
                for j in range(m.shape[1]):
                    m[i, j] = (v >> j) & 1
            tbits.append(m)
        self._packed = (code, tbits, list(self.checks))
        return self._packed


OPERAND_COUNT = {Op.X: 1, Op.CNOT: 2, Op.TOFFOLI: 3, Op.AND: 3, Op.ANDINV: 3, Op.SWAP: 2}


def serialize(circuit: Circuit, path: str) -> None:
    """Write the line-oriented text form of a circuit.

    One gate per line (``TOF c1 c2 t`` etc.), ``ALLOC n`` / ``FREE n``
    markers, lookups as ``LOOKUP a0..ak-1 -> t0..tw-1 @tablefile`` with hex
    table files next to the circuit file.  Output is deterministic.
    """
    base, _ = os.path.splitext(path)
    names = {Op.X: "X", Op.CNOT: "CNOT", Op.TOFFOLI: "TOF", Op.AND: "AND",
             Op.ANDINV: "ANDINV", Op.SWAP: "SWAP"}
    lines = []
    written_tables: dict[int, str] = {}
    for e in circuit.events:
        op = e[0]
        if op in names:
            lines.append(names[op] + " " + " ".join(str(w) for w in e[1:]))
        elif op == Op.LOOKUP:
            _, tidx, addr, tgts = e
            if tidx not in written_tables:
                tpath = f"{base}.table{tidx}.txt"
                tab = circuit.tables[tidx]
                width = max((v.bit_length() for v in tab), default=1)
                digits = (width + 3) // 4
                with open(tpath, "w") as f:
                    for v in tab:
                        f.write(format(v, f"0{max(digits,1)}x") + "\n")
                written_tables[tidx] = os.path.basename(tpath)
            lines.append("LOOKUP " + " ".join(str(w) for w in addr)
                         + " -> " + " ".join(str(w) for w in tgts)
                         + " @" + written_tables[tidx])
        elif op == Op.ALLOC:
            lines.append(f"ALLOC {len(e[1])}")
        elif op == Op.FREE:
            lines.append(f"FREE {len(e[1])}")
        # sync/assert/mark carry no gates and are not part of the text format
    with open(path, "w") as f:
        f.write("\n".join(lines) + ("\n" if lines else ""))
