"""Builder context: strategies, gate cost model, wire allocator, backends.

A ``BuilderContext`` is the single object threaded through every circuit
builder.  It owns a LIFO wire allocator and one backend:

* ``SimulateBackend`` executes gates eagerly on a classical bit vector, so
  value-dependent contract violations (dirty release, AND-inverse mismatch,
  out-of-range inputs) surface at build time.
* ``CountBackend`` streams gates through an as-soon-as-possible scheduler
  and accumulates the resource counters.

Contexts are confined to one thread; circuits and estimates are immutable
once produced and safe to share.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import kernel
from .circuit import (CHECK_INVERTIBLE, CHECK_RANGE, CHECK_ZERO, Circuit,
                      NonLIFORelease, Op, Register)
from .kernel_py import (N_PARAMS, P_AND_AUX, P_AND_CL, P_AND_DUR, P_AND_T,
                        P_AND_TD, P_ANDINV_CL, P_ANDINV_DUR, P_ANDINV_MEAS,
                        P_CNOT_CL, P_CNOT_DUR, P_LK_CLA, P_LK_DUR, P_LK_T,
                        P_LK_TD, P_SWAP_CL, P_SWAP_DUR, P_TOF_AUX, P_TOF_CL,
                        P_TOF_DUR, P_TOF_T, P_TOF_TD, P_X_CL, P_X_DUR, R_CL,
                        R_FULLD, R_GATES, R_MEAS, R_T, R_TB, R_TDEPTH,
                        R_WIDTH, _Bitmap)


class StrategyVariant(Enum):
    LOW_WIDTH = "low-w"
    LOW_T = "low-t"
    LOW_DEPTH = "low-d"


class ToffoliDecomposition(Enum):
    T_DEPTH_1_FOUR_AUX = "tdepth1"
    T_DEPTH_3_NO_AUX = "tdepth3"


class AdderFamily(Enum):
    TTK = "ttk"
    CDKMG = "cdkmg"
    DKRS = "dkrs"


class FanInMode(Enum):
    BARENCO = "barenco"
    AND_TREE = "andtree"


@dataclass(frozen=True)
class Strategy:
    """Low-width / low-T / low-depth configuration."""
    variant: StrategyVariant
    adder_family: AdderFamily
    toffoli_decomposition: ToffoliDecomposition
    use_fanout: bool
    fanin_mode: FanInMode

    @staticmethod
    def low_width(**overrides) -> "Strategy":
        s = Strategy(StrategyVariant.LOW_WIDTH, AdderFamily.TTK,
                     ToffoliDecomposition.T_DEPTH_3_NO_AUX, False,
                     FanInMode.BARENCO)
        return replace(s, **overrides) if overrides else s

    @staticmethod
    def low_t(**overrides) -> "Strategy":
        s = Strategy(StrategyVariant.LOW_T, AdderFamily.CDKMG,
                     ToffoliDecomposition.T_DEPTH_1_FOUR_AUX, True,
                     FanInMode.AND_TREE)
        return replace(s, **overrides) if overrides else s

    @staticmethod
    def low_depth(**overrides) -> "Strategy":
        s = Strategy(StrategyVariant.LOW_DEPTH, AdderFamily.DKRS,
                     ToffoliDecomposition.T_DEPTH_1_FOUR_AUX, True,
                     FanInMode.AND_TREE)
        return replace(s, **overrides) if overrides else s

    @staticmethod
    def named(name: str, **overrides) -> "Strategy":
        key = name.lower().replace("_", "-")
        table = {"low-w": Strategy.low_width, "low-width": Strategy.low_width,
                 "low-t": Strategy.low_t,
                 "low-d": Strategy.low_depth, "low-depth": Strategy.low_depth}
        return table[key](**overrides)


@dataclass(frozen=True)
class GateCosts:
    t: int = 0
    t_depth: int = 0
    cliffords: int = 0
    measurements: int = 0
    aux: int = 0
    duration: int = 1


@dataclass(frozen=True)
class GateCostTable:
    """Per-kind gate costs; lookup costs scale with table size N.

    The AND pair is 4 T / T-depth 1 with one auxiliary wire, its inverse is
    measurement-based and T-free.  Toffoli Clifford counts (8 without
    auxiliaries at T-depth 3, 10 with four auxiliaries at T-depth 1) are
    fixed defaults; acceptance tolerances absorb them.  A 2^k-entry lookup
    costs exactly 4*2^k T gates and T-depth, with k auxiliary wires.
    """
    x: GateCosts = GateCosts(cliffords=1, duration=1)
    cnot: GateCosts = GateCosts(cliffords=1, duration=1)
    swap: GateCosts = GateCosts(cliffords=3, duration=3)
    toffoli: GateCosts = GateCosts(t=7, t_depth=3, cliffords=8, duration=7)
    and_: GateCosts = GateCosts(t=4, t_depth=1, cliffords=9, aux=1, duration=3)
    and_inv: GateCosts = GateCosts(cliffords=2, measurements=1, duration=2)
    lookup_t_per_entry: int = 4
    lookup_tdepth_per_entry: int = 4
    lookup_clifford_base: int = 6
    lookup_duration_per_entry: int = 6

    @staticmethod
    def for_strategy(strategy: Strategy) -> "GateCostTable":
        if strategy.toffoli_decomposition is ToffoliDecomposition.T_DEPTH_1_FOUR_AUX:
            tof = GateCosts(t=7, t_depth=1, cliffords=10, aux=4, duration=5)
        else:
            tof = GateCosts(t=7, t_depth=3, cliffords=8, aux=0, duration=7)
        return GateCostTable(toffoli=tof)

    def lookup_costs(self, n_entries: int, addr_bits: int, width: int) -> GateCosts:
        return GateCosts(t=self.lookup_t_per_entry * n_entries,
                         t_depth=self.lookup_tdepth_per_entry * n_entries,
                         cliffords=n_entries * (self.lookup_clifford_base + width // 2),
                         measurements=n_entries - 1,
                         aux=addr_bits,
                         duration=self.lookup_duration_per_entry * n_entries)

    def params_vector(self) -> np.ndarray:
        p = np.zeros(N_PARAMS, dtype=np.int64)
        p[P_TOF_T], p[P_TOF_TD], p[P_TOF_CL] = self.toffoli.t, self.toffoli.t_depth, self.toffoli.cliffords
        p[P_TOF_AUX], p[P_TOF_DUR] = self.toffoli.aux, self.toffoli.duration
        p[P_AND_T], p[P_AND_TD], p[P_AND_CL] = self.and_.t, self.and_.t_depth, self.and_.cliffords
        p[P_AND_AUX], p[P_AND_DUR] = self.and_.aux, self.and_.duration
        p[P_ANDINV_CL], p[P_ANDINV_MEAS], p[P_ANDINV_DUR] = (
            self.and_inv.cliffords, self.and_inv.measurements, self.and_inv.duration)
        p[P_SWAP_CL], p[P_SWAP_DUR] = self.swap.cliffords, self.swap.duration
        p[P_LK_T], p[P_LK_TD] = self.lookup_t_per_entry, self.lookup_tdepth_per_entry
        p[P_LK_CLA], p[P_LK_DUR] = self.lookup_clifford_base, self.lookup_duration_per_entry
        p[P_X_CL], p[P_X_DUR] = self.x.cliffords, self.x.duration
        p[P_CNOT_CL], p[P_CNOT_DUR] = self.cnot.cliffords, self.cnot.duration
        return p


@dataclass(frozen=True)
class ResourceEstimate:
    """The six reported metrics plus the total gate count.

    ``total_gates`` is Cliffords + measurements + T-bearing gates.  All
    count fields are additive under sequential composition, depths add,
    width takes the maximum.
    """
    t_count: int = 0
    t_depth: int = 0
    clifford_count: int = 0
    measurement_count: int = 0
    full_depth: int = 0
    total_gates: int = 0
    width: int = 0
    tb_gates: int = 0

    @staticmethod
    def from_vector(res) -> "ResourceEstimate":
        return ResourceEstimate(
            t_count=int(res[R_T]), t_depth=int(res[R_TDEPTH]),
            clifford_count=int(res[R_CL]), measurement_count=int(res[R_MEAS]),
            full_depth=int(res[R_FULLD]),
            total_gates=int(res[R_CL] + res[R_MEAS] + res[R_TB]),
            width=int(res[R_WIDTH]), tb_gates=int(res[R_TB]))

    def seq(self, other: "ResourceEstimate") -> "ResourceEstimate":
        return ResourceEstimate(
            t_count=self.t_count + other.t_count,
            t_depth=self.t_depth + other.t_depth,
            clifford_count=self.clifford_count + other.clifford_count,
            measurement_count=self.measurement_count + other.measurement_count,
            full_depth=self.full_depth + other.full_depth,
            total_gates=self.total_gates + other.total_gates,
            width=max(self.width, other.width),
            tb_gates=self.tb_gates + other.tb_gates)

    def times(self, k: int) -> "ResourceEstimate":
        return ResourceEstimate(
            t_count=self.t_count * k, t_depth=self.t_depth * k,
            clifford_count=self.clifford_count * k,
            measurement_count=self.measurement_count * k,
            full_depth=self.full_depth * k, total_gates=self.total_gates * k,
            width=self.width, tb_gates=self.tb_gates * k)

    def metric(self, name: str) -> int:
        return getattr(self, name)


def seq_compose(parts) -> ResourceEstimate:
    out = ResourceEstimate()
    for p in parts:
        out = out.seq(p)
    return out


class EstimateWalk:
    """Sequential composition of measured segments with live-width tracking.

    Counts and depths add across barrier-separated segments.  Width needs
    the real live baseline at each point, so segments are measured once at
    a reference baseline and re-based here: a segment measured at baseline
    b with peak w contributes live + (w - b).  ``net`` is the segment's net
    live-wire change (garbage kept or freed).
    """

    def __init__(self, live: int = 0):
        self.live = live
        self.peak = live
        self.parts: list[ResourceEstimate] = []

    def alloc(self, count: int) -> None:
        self.live += count
        self.peak = max(self.peak, self.live)

    def free(self, count: int) -> None:
        self.live -= count

    def add(self, est: ResourceEstimate, base: int, net: int = 0,
            times: int = 1) -> None:
        for _ in range(times):
            self.parts.append(est)
            self.peak = max(self.peak, self.live + est.width - base)
            self.live += net

    def result(self) -> ResourceEstimate:
        est = seq_compose(self.parts)
        return ResourceEstimate(
            t_count=est.t_count, t_depth=est.t_depth,
            clifford_count=est.clifford_count,
            measurement_count=est.measurement_count,
            full_depth=est.full_depth, total_gates=est.total_gates,
            width=self.peak, tb_gates=est.tb_gates)


def measure_segment(strategy: Strategy, setup) -> tuple[ResourceEstimate, int]:
    """Build one segment in a throwaway counting context.

    ``setup(ctx)`` allocates the registers the segment touches and returns
    the body callable; the returned baseline is the live count between the
    two, so callers can re-base the width.
    """
    ctx = count_context(strategy)
    body = setup(ctx)
    base = ctx.live_wires
    body()
    return ctx.estimate(), base


class SimulateBackend:
    """Eager classical execution on a flat bit vector."""

    def __init__(self, initial: dict[int, int] | None = None):
        self.initial = dict(initial or {})
        self.state = bytearray()

    def _ensure(self, w: int) -> None:
        if w >= len(self.state):
            self.state.extend(b"\x00" * (w + 1 - len(self.state)))

    def apply(self, event: tuple, tables, checks) -> None:
        op = event[0]
        st = self.state
        if op == Op.CNOT:
            if st[event[1]]:
                st[event[2]] ^= 1
        elif op == Op.X:
            st[event[1]] ^= 1
        elif op == Op.TOFFOLI:
            if st[event[1]] and st[event[2]]:
                st[event[3]] ^= 1
        elif op == Op.AND:
            from .circuit import ANDTargetNonZero
            if st[event[3]]:
                raise ANDTargetNonZero(f"AND target wire {event[3]} not fresh")
            st[event[3]] = st[event[1]] & st[event[2]]
        elif op == Op.ANDINV:
            from .circuit import ANDInverseMismatch
            if st[event[3]] != (st[event[1]] & st[event[2]]):
                raise ANDInverseMismatch(
                    f"ANDInverse target wire {event[3]} disagrees with controls")
            st[event[3]] = 0
        elif op == Op.SWAP:
            a, b = event[1], event[2]
            st[a], st[b] = st[b], st[a]
        elif op == Op.LOOKUP:
            _, tidx, addr, tgts = event
            a = 0
            for i, w in enumerate(addr):
                if st[w]:
                    a |= 1 << i
            v = tables[tidx][a]
            for i, w in enumerate(tgts):
                if (v >> i) & 1:
                    st[w] ^= 1
        elif op == Op.ALLOC:
            for w in event[1]:
                self._ensure(w)
                st[w] = self.initial.get(w, 0)
        elif op == Op.FREE:
            from .circuit import ReleaseNonZero
            for w in event[1]:
                if st[w]:
                    raise ReleaseNonZero(f"released wire {w} holds 1")
        elif op == Op.ASSERT:
            from .circuit import InputOutOfRange, NotInvertible, ReleaseNonZero
            kind, bound = checks[event[1]]
            val = 0
            for i, w in enumerate(event[2]):
                if st[w]:
                    val |= 1 << i
            if kind == CHECK_RANGE and val >= bound:
                raise InputOutOfRange(f"register value {val} >= {bound}")
            if kind == CHECK_INVERTIBLE and math.gcd(val, bound) != 1:
                raise NotInvertible(f"gcd({val}, {bound}) != 1")
            if kind == CHECK_ZERO and val != 0:
                raise ReleaseNonZero(f"register expected 0, holds {val}")
        # SYNC / MARK carry no simulation semantics


class CountBackend:
    """Eager ASAP scheduling; mirrors the replay kernel exactly."""

    def __init__(self, table: GateCostTable):
        self.table = table
        self.ready: dict[int, int] = {}
        self.floor = 0
        self.max_end = 0
        self.live = 0
        self.width = 0
        self.bitmap = _Bitmap()
        self.t = 0
        self.tb = 0
        self.cl = 0
        self.meas = 0
        self.gates = 0

    def _gate(self, wires, costs: GateCosts) -> None:
        start = self.floor
        rd = self.ready
        for w in wires:
            r = rd.get(w, 0)
            if r > start:
                start = r
        end = start + costs.duration
        for w in wires:
            rd[w] = end
        if end > self.max_end:
            self.max_end = end
        if costs.t_depth:
            self.bitmap.mark(start, start + costs.t_depth)
        self.t += costs.t
        self.cl += costs.cliffords
        self.meas += costs.measurements
        self.gates += 1
        if costs.t:
            self.tb += 1
        if self.live + costs.aux > self.width:
            self.width = self.live + costs.aux

    def apply(self, event: tuple, tables, checks) -> None:
        op = event[0]
        tab = self.table
        if op == Op.CNOT:
            self._gate(event[1:], tab.cnot)
        elif op == Op.X:
            self._gate(event[1:], tab.x)
        elif op == Op.TOFFOLI:
            self._gate(event[1:], tab.toffoli)
        elif op == Op.AND:
            self._gate(event[1:], tab.and_)
        elif op == Op.ANDINV:
            self._gate(event[1:], tab.and_inv)
        elif op == Op.SWAP:
            self._gate(event[1:], tab.swap)
        elif op == Op.LOOKUP:
            _, tidx, addr, tgts = event
            n = len(tables[tidx])
            self._gate(list(addr) + list(tgts),
                       tab.lookup_costs(n, len(addr), len(tgts)))
        elif op == Op.ALLOC:
            for w in event[1]:
                self.ready[w] = self.floor
            self.live += len(event[1])
            if self.live > self.width:
                self.width = self.live
        elif op == Op.FREE:
            self.live -= len(event[1])
        elif op == Op.SYNC:
            self.floor = self.max_end

    def estimate(self) -> ResourceEstimate:
        return ResourceEstimate(
            t_count=self.t, t_depth=self.bitmap.popcount(),
            clifford_count=self.cl, measurement_count=self.meas,
            full_depth=self.max_end,
            total_gates=self.cl + self.meas + self.tb,
            width=self.width, tb_gates=self.tb)


class BuilderContext:
    """Threads the allocator, backend and event recording through builders."""

    def __init__(self, strategy: Strategy, backend, *, record: bool = True,
                 validate: bool = True):
        self.strategy = strategy
        self.backend = backend
        self.record = record
        self.validate = validate
        self.circuit = Circuit()
        self._table_index: dict[tuple, int] = {}
        self._check_index: dict[tuple, int] = {}
        self._live = 0
        self._peak = 0
        self._captures: list[list] = []
        self._tees: list[list] = []
        if isinstance(backend, CountBackend):
            self.cost_table = backend.table
        else:
            self.cost_table = GateCostTable.for_strategy(strategy)

    # -- wire allocation (stack discipline) --------------------------------

    @property
    def live_wires(self) -> int:
        return self._live

    @property
    def width(self) -> int:
        return self._peak

    def allocate(self, count: int) -> list[int]:
        if count == 0:
            return []
        ws = list(range(self._live, self._live + count))
        self._live += count
        if self._live > self._peak:
            self._peak = self._live
        self._emit((Op.ALLOC, tuple(ws)))
        return ws

    def release(self, wires) -> None:
        ws = list(wires)
        if not ws:
            return
        expect = list(range(self._live - len(ws), self._live))
        if sorted(ws) != expect:
            raise NonLIFORelease(f"release of {ws} but stack top is {expect}")
        self._live -= len(ws)
        self._emit((Op.FREE, tuple(sorted(ws, reverse=True))))

    @contextmanager
    def scratch(self, count: int):
        ws = self.allocate(count)
        yield ws
        self.release(ws)

    def add_register(self, name: str, wires, role: str = "input") -> Register:
        reg = Register(name, list(wires), role)
        self.circuit.registers.append(reg)
        return reg

    # -- emission ------------------------------------------------------------

    def _emit(self, event: tuple) -> None:
        if self._captures:
            self._captures[-1].append(event)
            return
        for buf in self._tees:
            buf.append(event)
        if self.record:
            self.circuit.events.append(event)
            if event[0] == Op.ALLOC:
                top = max(event[1]) + 1
                if top > self.circuit.n_wires:
                    self.circuit.n_wires = top
        self.backend.apply(event, self.circuit.tables, self.circuit.checks)

    def x(self, t: int) -> None:
        self._emit((Op.X, t))

    def cnot(self, c: int, t: int) -> None:
        if c == t:
            raise ValueError("CNOT operands must be distinct")
        self._emit((Op.CNOT, c, t))

    def toffoli(self, c1: int, c2: int, t: int) -> None:
        if len({c1, c2, t}) != 3:
            raise ValueError("Toffoli operands must be distinct")
        self._emit((Op.TOFFOLI, c1, c2, t))

    def and_(self, c1: int, c2: int, t: int) -> None:
        if len({c1, c2, t}) != 3:
            raise ValueError("AND operands must be distinct")
        self._emit((Op.AND, c1, c2, t))

    def and_inv(self, c1: int, c2: int, t: int) -> None:
        if len({c1, c2, t}) != 3:
            raise ValueError("ANDInverse operands must be distinct")
        self._emit((Op.ANDINV, c1, c2, t))

    def swap(self, a: int, b: int) -> None:
        self._emit((Op.SWAP, a, b))

    def cswap(self, ctrl: int, a: int, b: int) -> None:
        """Controlled swap, compiled to CNOT-Toffoli-CNOT."""
        self.cnot(b, a)
        self.toffoli(ctrl, a, b)
        self.cnot(b, a)

    def lookup(self, addr, tgts, table) -> None:
        """XOR ``table[address]`` into the target register.

        The table must have exactly 2^(address width) entries.  Lookups are
        scheduling barriers so that window-size substitution in hierarchical
        estimates stays exact.
        """
        table = tuple(int(v) for v in table)
        if len(table) != 1 << len(addr):
            raise ValueError(f"table length {len(table)} != 2^{len(addr)}")
        idx = self._table_index.get(table)
        if idx is None:
            idx = len(self.circuit.tables)
            self.circuit.tables.append(table)
            self._table_index[table] = idx
        self.sync()
        self._emit((Op.LOOKUP, idx, tuple(addr), tuple(tgts)))
        self.sync()

    def sync(self) -> None:
        self._emit((Op.SYNC, 0))

    def mark(self, label: str) -> None:
        idx = self._check_index.get(("mark", label))
        if idx is None:
            idx = len(self.circuit.checks)
            self.circuit.checks.append(("mark", label))
            self._check_index[("mark", label)] = idx
        self._emit((Op.MARK, idx))

    def marks(self) -> list[str]:
        out = []
        for e in self.circuit.events:
            if e[0] == Op.MARK:
                out.append(self.circuit.checks[e[1]][1])
        return out

    def _assert(self, kind: int, wires, bound: int) -> None:
        if not self.validate or self._captures:
            return
        key = (kind, int(bound))
        idx = self._check_index.get(key)
        if idx is None:
            idx = len(self.circuit.checks)
            self.circuit.checks.append(key)
            self._check_index[key] = idx
        self._emit((Op.ASSERT, idx, tuple(wires)))

    def assert_range(self, wires, bound: int) -> None:
        self._assert(CHECK_RANGE, wires, bound)

    def assert_invertible(self, wires, modulus: int) -> None:
        self._assert(CHECK_INVERTIBLE, wires, modulus)

    def assert_zero(self, wires) -> None:
        self._assert(CHECK_ZERO, wires, 0)

    @contextmanager
    def no_validate(self):
        saved = self.validate
        self.validate = False
        yield
        self.validate = saved

    # -- adjoint -------------------------------------------------------------

    @contextmanager
    def adjoint(self):
        """Emit the inverse of everything built inside the block.

        The body is captured without touching the backend, then replayed in
        reverse with AND <-> ANDInverse and ALLOC <-> FREE exchanged.
        Asserts are dropped (preconditions do not hold in reverse).  The
        body must balance its allocations, and the allocator must sit at
        the same stack level as when the original segment was emitted so
        the replay reuses identical wire ids.
        """
        buf: list = []
        self._captures.append(buf)
        yield
        self._captures.pop()
        self.emit_adjoint(buf)

    @contextmanager
    def capture(self, buf: list):
        """Emit normally while recording events for a later adjoint replay."""
        self._tees.append(buf)
        yield
        self._tees.pop()

    def emit_adjoint(self, buf) -> None:
        """Emit the inverse of a previously captured event list.

        Allocation events are replayed through the allocator, so captured
        segments may end with net-live auxiliary wires (the adjoint frees
        them) provided they sit on top of the stack.
        """
        for event in reversed(buf):
            op = event[0]
            if op == Op.AND:
                self._emit((Op.ANDINV,) + event[1:])
            elif op == Op.ANDINV:
                self._emit((Op.AND,) + event[1:])
            elif op == Op.ALLOC:
                self.release(list(event[1]))
            elif op == Op.FREE:
                got = self.allocate(len(event[1]))
                if got != sorted(event[1]):
                    raise NonLIFORelease(
                        f"adjoint replay allocated {got}, expected {sorted(event[1])}")
            elif op == Op.ASSERT:
                continue
            else:
                self._emit(event)

    # -- register utilities ---------------------------------------------------

    def load_constant(self, wires, value: int) -> None:
        for i, w in enumerate(wires):
            if (value >> i) & 1:
                self.x(w)

    def copy_register(self, src, dst, control: int | None = None) -> None:
        for s, d in zip(src, dst):
            if control is None:
                self.cnot(s, d)
            else:
                self.toffoli(control, s, d)

    def swap_registers(self, a, b, control: int | None = None) -> None:
        """Swap register values; controlled swaps fan the control out when
        the strategy allows."""
        if control is None:
            for x, y in zip(a, b):
                self.swap(x, y)
            return
        if self.strategy.use_fanout and len(a) > 2:
            carriers = fan_out(self, control, len(a))
            for x, y, c in zip(a, b, carriers.wires):
                self.cswap(c, x, y)
            carriers.uncompute(self)
        else:
            for x, y in zip(a, b):
                self.cswap(control, x, y)

    def rotate_left_physical(self, reg, control: int | None = None) -> None:
        """Value-level cyclic shift up by one (x -> 2x mod 2^len).

        Adjacent transpositions from the top; when a control is given each
        becomes a controlled swap.
        """
        if control is not None and self.strategy.use_fanout and len(reg) > 2:
            carriers = fan_out(self, control, len(reg) - 1)
            for j, i in enumerate(range(len(reg) - 2, -1, -1)):
                self.cswap(carriers.wires[j], reg[i], reg[i + 1])
            carriers.uncompute(self)
            return
        for i in range(len(reg) - 2, -1, -1):
            if control is None:
                self.swap(reg[i], reg[i + 1])
            else:
                self.cswap(control, reg[i], reg[i + 1])

    def rotate_right_physical(self, reg, control: int | None = None) -> None:
        with self.adjoint():
            self.rotate_left_physical(reg, control)

    # -- results ---------------------------------------------------------------

    def finish(self) -> Circuit:
        if self._live:
            raise NonLIFORelease(f"{self._live} wires still live at finish")
        return self.circuit

    def estimate(self) -> ResourceEstimate:
        if not isinstance(self.backend, CountBackend):
            raise TypeError("estimate() requires a Count backend")
        return self.backend.estimate()

    def peek_register(self, wires) -> int:
        if not isinstance(self.backend, SimulateBackend):
            raise TypeError("peek requires a Simulate backend")
        v = 0
        for i, w in enumerate(wires):
            if self.backend.state[w]:
                v |= 1 << i
        return v

    def poke_register(self, wires, value: int) -> None:
        """Test helper: overwrite simulator state directly (no gates)."""
        if not isinstance(self.backend, SimulateBackend):
            raise TypeError("poke requires a Simulate backend")
        for i, w in enumerate(wires):
            self.backend._ensure(w)
            self.backend.state[w] = (value >> i) & 1


def build_context(strategy: Strategy, backend) -> BuilderContext:
    """Create a fresh builder context (empty circuit, LIFO allocator)."""
    return BuilderContext(strategy, backend)


# -- fan-out / fan-in ---------------------------------------------------------


class FanOutHandle:
    def __init__(self, wires, aux):
        self.wires = wires      # carrier wires; wires[0] is the original
        self._aux = aux

    def uncompute(self, ctx: BuilderContext) -> None:
        k = len(self.wires)
        layer = 1
        pairs = []
        while layer < k:
            for i in range(min(layer, k - layer)):
                pairs.append((self.wires[i], self.wires[i + layer]))
            layer *= 2
        for c, t in reversed(pairs):
            ctx.cnot(c, t)
        ctx.release(self._aux)


def fan_out(ctx: BuilderContext, control: int, copies: int) -> FanOutHandle:
    """CNOT-tree copies of a control: ``copies`` carrier wires in depth
    ceil(lg copies).  The original control serves as the first carrier;
    copies-1 auxiliaries are allocated.  No T gates."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    aux = ctx.allocate(copies - 1)
    wires = [control] + aux
    layer = 1
    while layer < copies:
        for i in range(min(layer, copies - layer)):
            ctx.cnot(wires[i], wires[i + layer])
        layer *= 2
    return FanOutHandle(wires, aux)


class FanInHandle:
    def __init__(self, wire, mode, controls, temps, borrows):
        self.wire = wire
        self._mode = mode
        self._controls = controls
        self._temps = temps
        self._borrows = borrows

    def uncompute(self, ctx: BuilderContext) -> None:
        if self._mode == "identity":
            return
        if self._mode == "andtree":
            with ctx.adjoint():
                _and_tree(ctx, self._controls, self._temps)
            ctx.release(self._temps)
        else:
            _barenco_mcx(ctx, self._controls, self.wire, self._borrows)
            ctx.release(self._temps)


def _and_tree(ctx, controls, temps):
    level = list(controls)
    ti = 0
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            ctx.and_(level[i], level[i + 1], temps[ti])
            nxt.append(temps[ti])
            ti += 1
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt


def _barenco_mcx(ctx, controls, target, borrows):
    """Multi-controlled X with dirty borrowed wires (no clean auxiliaries).

    Standard V-chain; toggles the target iff all controls are 1, restores
    the borrows.  Uses 4(m-2) Toffoli gates for m >= 3 controls.
    """
    m = len(controls)
    if m == 1:
        ctx.cnot(controls[0], target)
        return
    if m == 2:
        ctx.toffoli(controls[0], controls[1], target)
        return
    b = borrows[:m - 2]

    def descend():
        for i in range(m - 3, 0, -1):
            ctx.toffoli(controls[i + 1], b[i - 1], b[i])
        ctx.toffoli(controls[1], controls[0], b[0])

    def ascend():
        for i in range(1, m - 2):
            ctx.toffoli(controls[i + 1], b[i - 1], b[i])

    for _ in range(2):
        ctx.toffoli(controls[m - 1], b[m - 3], target)
        descend()
        ascend()


def fan_in(ctx: BuilderContext, controls, mode: FanInMode | None = None) -> FanInHandle:
    """Conjunction of control wires onto one wire.

    AND-tree mode uses exactly n-1 AND gates on n-1 fresh wires in AND-depth
    ceil(lg n).  Barenco mode borrows dirty wires and uses Toffoli gates
    only (at most 8n), allocating a single fresh output wire.
    """
    controls = list(controls)
    if mode is None:
        mode = ctx.strategy.fanin_mode
    if len(controls) == 1:
        return FanInHandle(controls[0], "identity", controls, [], [])
    if mode is FanInMode.AND_TREE:
        temps = ctx.allocate(len(controls) - 1)
        _and_tree(ctx, controls, temps)
        return FanInHandle(temps[len(controls) - 2], "andtree", controls, temps, [])
    # Barenco: borrow live wires outside the control set; allocate extras if
    # the context is too small to borrow from.
    m = len(controls)
    target_and_borrows = ctx.allocate(1)
    target = target_and_borrows[0]
    used = set(controls) | {target}
    borrows = [w for w in range(ctx.live_wires) if w not in used][:max(m - 2, 0)]
    extra: list[int] = []
    if len(borrows) < m - 2:
        extra = ctx.allocate(m - 2 - len(borrows))
        borrows = borrows + extra
    _barenco_mcx(ctx, controls, target, borrows)
    return FanInHandle(target, "barenco", controls, [target] + extra, borrows)


# -- public simulate / estimate ops -------------------------------------------


def simulate(circuit: Circuit, inputs: dict) -> dict[str, int]:
    """Replay a recorded circuit on a basis-state input.

    ``inputs`` maps register names (or wire indices) to values/bits.
    Returns the final value of every register.
    """
    state = np.zeros(max(circuit.n_wires, 1), dtype=np.uint8)
    for key, val in inputs.items():
        if isinstance(key, str):
            for i, w in enumerate(circuit.register(key).wires):
                state[w] = (val >> i) & 1
        else:
            state[key] = val & 1
    code, tbits, checks = circuit.pack()
    kernel.simulate_packed(code, tbits, checks, state)
    out = {}
    for reg in circuit.registers:
        v = 0
        for i, w in enumerate(reg.wires):
            if state[w]:
                v |= 1 << i
        out[reg.name] = v
    return out


def estimate(circuit_or_template, strategy: Strategy,
             table: GateCostTable | None = None) -> ResourceEstimate:
    """Resource estimate: flat replay for circuits, composition for
    hierarchical templates (anything exposing ``.estimate``)."""
    if table is None:
        table = GateCostTable.for_strategy(strategy)
    if hasattr(circuit_or_template, "estimate") and not isinstance(circuit_or_template, Circuit):
        return circuit_or_template.estimate(strategy, table)
    code, tbits, _ = circuit_or_template.pack()
    sizes = np.asarray([len(t) for t in circuit_or_template.tables] or [0],
                       dtype=np.int64)
    res = kernel.count_packed(code, sizes, table.params_vector())
    return ResourceEstimate.from_vector(res)


def count_context(strategy: Strategy, table: GateCostTable | None = None,
                  *, record: bool = False, validate: bool = False) -> BuilderContext:
    if table is None:
        table = GateCostTable.for_strategy(strategy)
    return BuilderContext(strategy, CountBackend(table), record=record,
                          validate=validate)


def sim_context(strategy: Strategy, initial: dict | None = None, *,
                validate: bool = True) -> BuilderContext:
    return BuilderContext(strategy, SimulateBackend(initial), validate=validate)
