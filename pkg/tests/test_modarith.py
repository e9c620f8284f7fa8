"""Exhaustive modular arithmetic checks against integer oracles."""
import pytest

from ecshor import InputOutOfRange, Strategy, sim_context, simulate
from ecshor.context import count_context, estimate
from ecshor.modarith import (MontgomeryContext, build_mod_add,
                             build_mod_double, build_mod_halve, build_mod_neg,
                             build_mod_sub, build_mont_mul,
                             build_mul_then_add, build_square_then_sub,
                             estimate_mont_mul, estimate_mul_then_add,
                             mont_mul_forward, optimal_mul_window)

SMALL_ODD = [3, 5, 7, 9, 13, 15, 21, 25, 31, 33, 45, 63]
STRATEGIES = [Strategy.low_width(), Strategy.low_t(), Strategy.low_depth()]


def _ctx_with(p, nregs, strategy=None):
    ctx = sim_context(strategy or Strategy.low_t())
    mctx = MontgomeryContext(p)
    regs = [ctx.allocate(mctx.n) for _ in range(nregs)]
    for i, r in enumerate(regs):
        ctx.add_register(f"r{i}", r)
    return ctx, mctx, regs


@pytest.mark.parametrize("p", SMALL_ODD)
@pytest.mark.parametrize("controlled", [False, True])
def test_mod_add_exhaustive(p, controlled):
    ctx, mctx, (x, y) = _ctx_with(p, 2)
    ctrl = ctx.allocate(1) if controlled else None
    if ctrl:
        ctx.add_register("ctrl", ctrl)
    build_mod_add(ctx, x, y, mctx, control=ctrl[0] if ctrl else None)
    circ = ctx.circuit
    for xv in range(p):
        for yv in range(p):
            for cv in ((0, 1) if controlled else (1,)):
                inp = {"r0": xv, "r1": yv}
                if controlled:
                    inp["ctrl"] = cv
                out = simulate(circ, inp)
                want = (xv + yv) % p if cv else yv
                assert out["r1"] == want, (p, xv, yv, cv)
                assert out["r0"] == xv


@pytest.mark.parametrize("p", SMALL_ODD)
def test_mod_add_constant_exhaustive(p):
    for c in range(p):
        ctx, mctx, (y,) = _ctx_with(p, 1)
        build_mod_add(ctx, c, y, mctx)
        for yv in range(p):
            assert simulate(ctx.circuit, {"r0": yv})["r0"] == (c + yv) % p


def test_mod_add_specific_values():
    ctx, mctx, (x, y) = _ctx_with(13, 2)
    build_mod_add(ctx, x, y, mctx)
    assert simulate(ctx.circuit, {"r0": 9, "r1": 7})["r1"] == 3
    assert simulate(ctx.circuit, {"r0": 0, "r1": 5})["r1"] == 5
    ctx, mctx, (x, y) = _ctx_with(13, 2)
    ctrl = ctx.allocate(1)
    ctx.add_register("ctrl", ctrl)
    build_mod_add(ctx, x, y, mctx, control=ctrl[0])
    assert simulate(ctx.circuit, {"r0": 12, "r1": 12, "ctrl": 1})["r1"] == 11


def test_mod_add_out_of_range_raises():
    ctx, mctx, (x, y) = _ctx_with(13, 2)
    ctx.poke_register(x, 14)
    with pytest.raises(InputOutOfRange):
        build_mod_add(ctx, x, y, mctx)


@pytest.mark.parametrize("p", SMALL_ODD)
def test_mod_sub_exhaustive(p):
    ctx, mctx, (x, y) = _ctx_with(p, 2)
    build_mod_sub(ctx, x, y, mctx)
    for xv in range(p):
        for yv in range(p):
            out = simulate(ctx.circuit, {"r0": xv, "r1": yv})
            assert out["r1"] == (yv - xv) % p
            assert out["r0"] == xv


@pytest.mark.parametrize("p", SMALL_ODD)
@pytest.mark.parametrize("controlled", [False, True])
def test_mod_double_halve_neg_exhaustive(p, controlled):
    for op, oracle in (
        (build_mod_double, lambda v: 2 * v % p),
        (build_mod_halve, lambda v: v * pow(2, -1, p) % p),
        (build_mod_neg, lambda v: (p - v) % p),
    ):
        ctx, mctx, (x,) = _ctx_with(p, 1)
        ctrl = ctx.allocate(1) if controlled else None
        if ctrl:
            ctx.add_register("ctrl", ctrl)
        op(ctx, x, mctx, control=ctrl[0] if ctrl else None)
        for v in range(p):
            for cv in ((0, 1) if controlled else (1,)):
                inp = {"r0": v}
                if controlled:
                    inp["ctrl"] = cv
                got = simulate(ctx.circuit, inp)["r0"]
                assert got == (oracle(v) if cv else v), (op.__name__, p, v, cv)


def test_double_halve_examples():
    ctx, mctx, (x,) = _ctx_with(13, 1)
    build_mod_double(ctx, x, mctx)
    assert simulate(ctx.circuit, {"r0": 8})["r0"] == 3
    ctx, mctx, (x,) = _ctx_with(13, 1)
    build_mod_halve(ctx, x, mctx)
    assert simulate(ctx.circuit, {"r0": 3})["r0"] == 8
    ctx, mctx, (x,) = _ctx_with(13, 1)
    build_mod_neg(ctx, x, mctx)
    assert simulate(ctx.circuit, {"r0": 0})["r0"] == 0


@pytest.mark.parametrize("p", SMALL_ODD)
@pytest.mark.parametrize("windowed", [False, True])
def test_mont_mul_exhaustive(p, windowed):
    mctx = MontgomeryContext(p, 2 if windowed else 1)
    ctx = sim_context(Strategy.low_t())
    x = ctx.allocate(mctx.n)
    y = ctx.allocate(mctx.n)
    out = ctx.allocate(mctx.n)
    for name, r in (("x", x), ("y", y), ("out", out)):
        ctx.add_register(name, r)
    build_mont_mul(ctx, x, y, out, mctx, windowed=windowed)
    rinv = pow(2, -mctx.n, p)
    for xv in range(p):
        for yv in range(p):
            res = simulate(ctx.circuit, {"x": xv, "y": yv})
            assert res["out"] == xv * yv * rinv % p, (p, windowed, xv, yv)
            assert res["x"] == xv and res["y"] == yv


def test_mont_mul_examples():
    mctx = MontgomeryContext(13)
    assert mctx.n == 4 and mctx.R == 3  # 2^4 mod 13
    ctx = sim_context(Strategy.low_t())
    x, y, out = (ctx.allocate(4) for _ in range(3))
    for name, r in (("x", x), ("y", y), ("out", out)):
        ctx.add_register(name, r)
    build_mont_mul(ctx, x, y, out, mctx)
    assert simulate(ctx.circuit, {"x": 2, "y": 5})["out"] == 12
    assert simulate(ctx.circuit, {"x": 3, "y": 5})["out"] == 5  # R * y


@pytest.mark.parametrize("p", [5, 7, 13])
def test_windowed_matches_unwindowed(p):
    outs = []
    for windowed in (False, True):
        mctx = MontgomeryContext(p, 2)
        ctx = sim_context(Strategy.low_t())
        x, y, out = (ctx.allocate(mctx.n) for _ in range(3))
        for name, r in (("x", x), ("y", y), ("out", out)):
            ctx.add_register(name, r)
        build_mont_mul(ctx, x, y, out, mctx, windowed=windowed)
        outs.append([simulate(ctx.circuit, {"x": a, "y": b})["out"]
                     for a in range(p) for b in range(p)])
    assert outs[0] == outs[1]


@pytest.mark.parametrize("p", [5, 13, 21])
@pytest.mark.parametrize("subtract", [False, True])
def test_mul_then_add_exhaustive(p, subtract):
    mctx = MontgomeryContext(p, 2)
    ctx = sim_context(Strategy.low_t())
    x, y, z = (ctx.allocate(mctx.n) for _ in range(3))
    for name, r in (("x", x), ("y", y), ("z", z)):
        ctx.add_register(name, r)
    build_mul_then_add(ctx, x, y, z, mctx, subtract=subtract)
    rinv = pow(2, -mctx.n, p)
    for xv in range(p):
        for yv in range(p):
            for zv in (0, 1, p - 1, (xv + yv) % p):
                res = simulate(ctx.circuit, {"x": xv, "y": yv, "z": zv})
                prod = xv * yv * rinv % p
                want = (zv - prod) % p if subtract else (zv + prod) % p
                assert res["z"] == want


def test_mul_then_add_example():
    mctx = MontgomeryContext(13)
    ctx = sim_context(Strategy.low_t())
    x, y, z = (ctx.allocate(4) for _ in range(3))
    for name, r in (("x", x), ("y", y), ("z", z)):
        ctx.add_register(name, r)
    build_mul_then_add(ctx, x, y, z, mctx)
    assert simulate(ctx.circuit, {"x": 2, "y": 5, "z": 4})["z"] == 3
    assert simulate(ctx.circuit, {"x": 0, "y": 5, "z": 4})["z"] == 4


@pytest.mark.parametrize("p", [5, 13, 31])
def test_square_then_sub_exhaustive(p):
    mctx = MontgomeryContext(p, 2)
    ctx = sim_context(Strategy.low_t())
    x = ctx.allocate(mctx.n)
    t = ctx.allocate(mctx.n)
    ctx.add_register("x", x)
    ctx.add_register("t", t)
    build_square_then_sub(ctx, x, t, mctx)
    rinv = pow(2, -mctx.n, p)
    for xv in range(p):
        for tv in range(p):
            res = simulate(ctx.circuit, {"x": xv, "t": tv})
            assert res["t"] == (tv - xv * xv * rinv) % p
            assert res["x"] == xv


def test_reduction_table_invariants():
    for p in SMALL_ODD:
        for k in range(1, 13):
            table = MontgomeryContext(p).table_for(k)
            assert len(table) == 1 << k
            for m, entry in enumerate(table):
                assert (entry + m) % (1 << k) == 0
                assert entry % p == 0
                assert entry < (1 << k) * p


def test_montgomery_context_validation():
    with pytest.raises(ValueError):
        MontgomeryContext(8)
    with pytest.raises(ValueError):
        MontgomeryContext(13, 0)


@pytest.mark.parametrize("strategy", STRATEGIES, ids=["low-w", "low-t", "low-d"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_hierarchical_mul_estimate_matches_flat(strategy, k):
    """Backend agreement: composed and flattened estimates are equal."""
    for n in (4, 9, 16):
        p = (1 << n) - 1
        mctx = MontgomeryContext(p, k)
        ctx = count_context(strategy, record=True, validate=False)
        x = ctx.allocate(n)
        y = ctx.allocate(n)
        out = ctx.allocate(n)
        build_mont_mul(ctx, x, y, out, mctx, windowed=True)
        flat_stream = ctx.estimate()
        flat_replay = estimate(ctx.circuit, strategy)
        hier = estimate_mont_mul(n, strategy, k=k)
        assert flat_stream == flat_replay
        assert hier == flat_replay, (strategy.variant, k, n)


def test_mul_then_add_cheaper_than_two_muls():
    n = 32
    s = Strategy.low_t()
    mta = estimate_mul_then_add(n, s, k=4)
    mul = estimate_mont_mul(n, s, k=4)
    assert mta.t_count < 1.2 * mul.t_count


def test_optimal_window_contract():
    assert optimal_mul_window(4) >= 1
    k = optimal_mul_window(256, "t_count")
    assert 5 <= k <= 8, k
    s = Strategy.low_t()
    cost = estimate_mont_mul(256, s, k=k).t_count
    for kk in range(1, 17):
        assert cost <= estimate_mont_mul(256, s, k=kk).t_count


def test_quadratic_scaling_low_t():
    """Fitted leading coefficient of low-T multiplication within 50% of 37.8."""
    import numpy as np
    pts = []
    for n in (64, 128, 256):
        k = optimal_mul_window(n, "t_count")
        pts.append((n, estimate_mont_mul(n, Strategy.low_t(), k=k).t_count))
    A = np.array([[n * n, 1.0] for n, _ in pts])
    b = np.array([c for _, c in pts], dtype=float)
    coef = np.linalg.lstsq(A, b, rcond=None)[0][0]
    assert abs(coef - 37.8) <= 0.5 * 37.8, coef
