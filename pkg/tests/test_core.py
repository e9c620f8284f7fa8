"""Circuit-core contracts: allocator, simulation, scheduling, fan-out/in."""
import os
import random

import numpy as np
import pytest

from ecshor import (ANDInverseMismatch, NonLIFORelease, ReleaseNonZero,
                    Strategy, serialize, sim_context, simulate)
from ecshor.circuit import Op
from ecshor.context import (FanInMode, GateCostTable, count_context, estimate,
                            fan_in, fan_out)
from ecshor import kernel_py


def test_allocator_width_accounting():
    ctx = count_context(Strategy.low_depth())
    a = ctx.allocate(2)
    b = ctx.allocate(3)
    assert ctx.estimate().width == 5
    ctx.release(b)
    ctx.release(a)
    assert ctx.live_wires == 0
    assert ctx.estimate().width == 5


def test_release_is_lifo():
    ctx = count_context(Strategy.low_t())
    a = ctx.allocate(2)
    ctx.allocate(3)
    with pytest.raises(NonLIFORelease):
        ctx.release(a)


def test_release_nonzero_is_caught():
    ctx = sim_context(Strategy.low_t())
    w = ctx.allocate(1)
    ctx.x(w[0])
    with pytest.raises(ReleaseNonZero):
        ctx.release(w)


def test_and_inverse_mismatch():
    ctx = sim_context(Strategy.low_t())
    w = ctx.allocate(3)
    ctx.x(w[0])
    ctx.x(w[1])
    with pytest.raises(ANDInverseMismatch):
        ctx.and_inv(w[0], w[1], w[2])  # target 0, controls give 1


def test_x_and_lookup_semantics():
    ctx = sim_context(Strategy.low_t())
    w = ctx.allocate(1)
    ctx.x(w[0])
    assert ctx.peek_register(w) == 1
    addr = ctx.allocate(3)
    tgt = ctx.allocate(4)
    ctx.poke_register(addr, 5)
    ctx.lookup(addr, tgt, [2 * i for i in range(8)])
    assert ctx.peek_register(tgt) == 10


def test_lookup_cost_exactness():
    """t_count of a 2^k-entry lookup is exactly 4*2^k for k in [1, 12]."""
    for k in range(1, 13):
        ctx = count_context(Strategy.low_t())
        addr = ctx.allocate(k)
        tgt = ctx.allocate(4)
        ctx.lookup(addr, tgt, [0] * (1 << k))
        est = ctx.estimate()
        assert est.t_count == 4 * (1 << k)
        assert est.t_depth == 4 * (1 << k)


def test_empty_circuit_estimate():
    ctx = count_context(Strategy.low_t())
    e = ctx.estimate()
    assert e.t_count == e.t_depth == e.full_depth == e.width == 0
    assert e.total_gates == 0


def test_toffoli_costs_by_strategy():
    ctx = count_context(Strategy.low_depth())
    w = ctx.allocate(3)
    ctx.toffoli(*w)
    e = ctx.estimate()
    assert e.t_count == 7 and e.t_depth == 1
    ctx = count_context(Strategy.low_width())
    w = ctx.allocate(3)
    ctx.toffoli(*w)
    e = ctx.estimate()
    assert e.t_count == 7 and e.t_depth == 3


def test_fan_out_depth_and_cost():
    ctx = count_context(Strategy.low_depth())
    c = ctx.allocate(1)
    h = fan_out(ctx, c[0], 8)
    e = ctx.estimate()
    assert e.t_count == 0
    assert e.full_depth <= 3
    assert len(h.wires) == 8
    h.uncompute(ctx)
    assert ctx.live_wires == 1


def test_fan_out_copies_value():
    ctx = sim_context(Strategy.low_depth())
    c = ctx.allocate(1)
    ctx.x(c[0])
    h = fan_out(ctx, c[0], 5)
    assert all(ctx.peek_register([w]) == 1 for w in h.wires)
    h.uncompute(ctx)
    assert ctx.peek_register(c) == 1


@pytest.mark.parametrize("mode", [FanInMode.AND_TREE, FanInMode.BARENCO])
@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 7])
def test_fan_in_exhaustive(mode, m):
    for bits in range(1 << m):
        ctx = sim_context(Strategy.low_t())
        cs = ctx.allocate(m)
        ctx.poke_register(cs, bits)
        extra = ctx.allocate(max(m - 2, 0))  # dirty borrow pool for Barenco
        ctx.poke_register(extra, bits % (1 << max(m - 2, 0)))
        before_extra = ctx.peek_register(extra)
        h = fan_in(ctx, cs, mode)
        assert ctx.peek_register([h.wire]) == (1 if bits == (1 << m) - 1 else 0)
        h.uncompute(ctx)
        assert ctx.peek_register(cs) == bits
        assert ctx.peek_register(extra) == before_extra


def test_fan_in_and_tree_costs():
    ctx = count_context(Strategy.low_t())
    cs = ctx.allocate(5)
    fan_in(ctx, cs, FanInMode.AND_TREE)
    assert ctx.estimate().t_count == 16  # 4 AND gates


def test_fan_in_single_control_identity():
    ctx = count_context(Strategy.low_t())
    cs = ctx.allocate(1)
    h = fan_in(ctx, cs, FanInMode.AND_TREE)
    assert h.wire == cs[0]
    assert ctx.estimate().total_gates == 0


def _random_circuit(seed, n_wires=8, n_gates=60):
    rng = random.Random(seed)
    ctx = sim_context(Strategy.low_t())
    ws = ctx.allocate(n_wires)
    ctx.add_register("r", ws)
    for _ in range(n_gates):
        kind = rng.randrange(5)
        ops = rng.sample(ws, 3)
        if kind == 0:
            ctx.x(ops[0])
        elif kind == 1:
            ctx.cnot(ops[0], ops[1])
        elif kind == 2:
            ctx.toffoli(*ops)
        elif kind == 3:
            ctx.swap(ops[0], ops[1])
        else:
            ctx.lookup(ops[:2], ops[2:3], [rng.randrange(2) for _ in range(4)])
    return ctx


def test_backend_agreement_streamed_vs_replayed():
    """Eager count backend, python replay and compiled replay all agree."""
    for seed in range(6):
        ctx = _random_circuit(seed)
        circ = ctx.circuit
        strat = Strategy.low_t()
        table = GateCostTable.for_strategy(strat)
        cctx = count_context(strat, table, record=False)
        for e in circ.events:
            cctx.backend.apply(e, circ.tables, circ.checks)
        streamed = cctx.backend.estimate()
        replayed = estimate(circ, strat, table)
        assert streamed == replayed
        code, tbits, checks = circ.pack()
        sizes = np.asarray([len(t) for t in circ.tables] or [0], dtype=np.int64)
        pure = kernel_py.count_packed(code, sizes, table.params_vector())
        from ecshor.context import ResourceEstimate
        assert ResourceEstimate.from_vector(pure) == replayed


def test_kernel_parity_simulation():
    for seed in range(6):
        ctx = _random_circuit(seed)
        circ = ctx.circuit
        final_eager = ctx.peek_register(circ.register("r").wires)
        out = simulate(circ, {"r": 0})
        assert out["r"] == final_eager
        code, tbits, checks = circ.pack()
        state = np.zeros(circ.n_wires, dtype=np.uint8)
        kernel_py.simulate_packed(code, tbits, checks, state)
        v = sum(int(state[w]) << i for i, w in enumerate(circ.register("r").wires))
        assert v == final_eager


def test_adjoint_reverses_random_circuits():
    """Builder followed by its adjoint is the identity on random inputs."""
    rng = random.Random(7)
    for trial in range(50):
        ctx = sim_context(Strategy.low_t())
        ws = ctx.allocate(6)
        val = rng.randrange(64)
        ctx.poke_register(ws, val)

        def body():
            with ctx.scratch(2) as t:
                ctx.and_(ws[0], ws[1], t[0])
                ctx.cnot(t[0], ws[2])
                ctx.toffoli(ws[2], ws[3], ws[4])
                ctx.and_(ws[4], ws[5], t[1])
                ctx.cnot(t[1], ws[0])
                ctx.cnot(t[1], ws[0])  # leave t clean
                ctx.and_inv(ws[4], ws[5], t[1])
                ctx.and_inv(ws[0], ws[1], t[0])

        buf = []
        with ctx.capture(buf):
            body()
        ctx.emit_adjoint(buf)
        assert ctx.peek_register(ws) == val
        assert ctx.live_wires == 6


def test_scheduling_sanity_invariant():
    """full_depth >= t_depth >= t_count / width on assorted circuits."""
    for seed in range(8):
        ctx = _random_circuit(seed)
        est = estimate(ctx.circuit, Strategy.low_t())
        assert est.full_depth >= est.t_depth
        if est.width:
            assert est.t_depth >= est.t_count / est.width


def test_estimate_totals_invariant():
    for seed in range(4):
        ctx = _random_circuit(seed)
        est = estimate(ctx.circuit, Strategy.low_width())
        assert est.total_gates == est.clifford_count + est.measurement_count + est.tb_gates


def test_serialization_deterministic(tmp_path):
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    d1.mkdir()
    d2.mkdir()
    p1 = d1 / "a.circ"
    p2 = d2 / "a.circ"
    serialize(_random_circuit(3).circuit, str(p1))
    serialize(_random_circuit(3).circuit, str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    tmp_path = d1
    text = p1.read_text()
    assert "ALLOC 8" in text
    lines = [ln for ln in text.splitlines() if ln.startswith("LOOKUP")]
    if lines:
        assert "->" in lines[0] and "@" in lines[0]
        tfile = lines[0].split("@")[1]
        tlines = (tmp_path / tfile).read_text().splitlines()
        assert len(tlines) == 4  # 2-bit address
        int(tlines[0], 16)


def test_sync_floors_scheduling():
    ctx = count_context(Strategy.low_t())
    a = ctx.allocate(2)
    b = ctx.allocate(2)
    ctx.cnot(a[0], a[1])
    depth1 = ctx.estimate().full_depth
    ctx.sync()
    ctx.cnot(b[0], b[1])  # disjoint wires, but the sync serializes
    assert ctx.estimate().full_depth == 2 * depth1
