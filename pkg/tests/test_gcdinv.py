"""Kaliski inversion: classical rounds, round circuits, full inverter."""
import math
import random

import pytest

from ecshor import NotInvertible, Strategy, sim_context, simulate
from ecshor.gcdinv import (KaliskiState, RoundFormulation, build_divide_and_add,
                           build_divider, build_inverter, build_kaliski_round,
                           counter_bits, kaliski_classical,
                           kaliski_round_classical)
from ecshor.modarith import MontgomeryContext

PRIMES = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61]


def test_classical_formulations_agree_random():
    rng = random.Random(11)
    count = 0
    while count < 10_000:
        p = rng.randrange(3, 1 << 16) | 1
        x = rng.randrange(1, p)
        if math.gcd(x, p) != 1:
            continue
        st = KaliskiState(p, x, 0, 1)
        steps = rng.randrange(0, 8)
        ok = True
        for _ in range(steps):
            if st.v == 0:
                break
            a = kaliski_round_classical(st, RoundFormulation.FOUR_CASE)
            b = kaliski_round_classical(st, RoundFormulation.SWAP_BASED)
            assert (a.u, a.v, a.r, a.s) == (b.u, b.v, b.r, b.s)
            st = a
            count += 1
        count += 1


def test_classical_round_examples():
    # u=1, v even: v halves, r doubles
    st = kaliski_round_classical(KaliskiState(1, 4, 3, 5))
    assert (st.u, st.v, st.r, st.s) == (1, 2, 6, 5)
    # u=3, v=1 (both odd, u > v): u <- (u-v)/2, r <- r+s, s <- 2s
    st = kaliski_round_classical(KaliskiState(3, 1, 2, 5))
    assert (st.u, st.v, st.r, st.s) == (1, 1, 7, 10)


@pytest.mark.parametrize("p", PRIMES)
def test_classical_driver_invariants(p):
    n = p.bit_length()
    for x in range(1, p):
        pseudo, k, trace = kaliski_classical(p, x)
        assert n <= k <= 2 * n, (p, x, k)
        for st in trace:
            assert p == st.u * st.s + st.v * st.r
        assert pseudo == pow(x, -1, p) * pow(2, k, p) % p


def _round_circuit(p, formulation):
    n = p.bit_length()
    ctx = sim_context(Strategy.low_t(), validate=False)
    u = ctx.allocate(n)
    v = ctx.allocate(n)
    r = ctx.allocate(n + 1)
    s = ctx.allocate(n + 1)
    counter = ctx.allocate(counter_bits(n))
    regs = build_kaliski_round(ctx, u, v, r, s, counter, formulation)
    for name in ("u", "v", "r", "s"):
        ctx.add_register(name, regs[name])
    ctx.add_register("counter", counter)
    ctx.add_register("u_in", u)
    ctx.add_register("v_in", v)
    return ctx.circuit


@pytest.mark.parametrize("p", [5, 13, 29, 61])
def test_round_circuits_match_classical_and_each_other(p):
    """Both round circuits reproduce the classical round on every state
    reachable from any invertible input."""
    circs = {f: _round_circuit(p, f) for f in RoundFormulation}
    states = set()
    for x in range(1, p):
        if math.gcd(x, p) != 1:
            continue
        _, _, trace = kaliski_classical(p, x)
        for st in trace:
            states.add((st.u, st.v, st.r, st.s))
    assert states
    for (u, v, r, s) in states:
        want = kaliski_round_classical(KaliskiState(u, v, r, s)) if v else \
            KaliskiState(u, v, r, s)
        for f, circ in circs.items():
            out = simulate(circ, {"u_in": u, "v_in": v, "r": r, "s": s})
            got = (out["u"], out["v"], out["r"], out["s"])
            assert got == (want.u, want.v, want.r, want.s), (p, f, (u, v, r, s))
            assert out["counter"] == (0 if v else 1)


def _inverter_circuit(p, *, controlled=False):
    mctx = MontgomeryContext(p)
    ctx = sim_context(Strategy.low_t(), validate=False)
    x = ctx.allocate(mctx.n)
    out = ctx.allocate(mctx.n)
    ctx.add_register("x", x)
    ctx.add_register("out", out)
    ctrl = None
    if controlled:
        ctrl = ctx.allocate(1)
        ctx.add_register("ctrl", ctrl)
    build_inverter(ctx, x, out, mctx, control=ctrl[0] if ctrl else None)
    return ctx.circuit, mctx


@pytest.mark.parametrize("p", PRIMES)
def test_inverter_exhaustive(p):
    circ, mctx = _inverter_circuit(p)
    n = mctx.n
    for x in range(1, p):
        res = simulate(circ, {"x": x})
        want = pow(x, -1, p) * pow(2, n, p) % p
        assert res["out"] == want, (p, x)
        assert res["x"] == x


def test_inverter_examples():
    circ, _ = _inverter_circuit(13)
    assert simulate(circ, {"x": 5})["out"] == 11  # 5^-1 * 16 mod 13
    assert simulate(circ, {"x": 1})["out"] == 3   # 16 mod 13


def test_inverter_controlled():
    circ, _ = _inverter_circuit(13, controlled=True)
    for x in (1, 5, 9, 12):
        assert simulate(circ, {"x": x, "ctrl": 0})["out"] == 0
        assert simulate(circ, {"x": x, "ctrl": 1})["out"] == pow(x, -1, 13) * 16 % 13


def test_inverter_not_invertible_raises():
    ctx = sim_context(Strategy.low_t())
    mctx = MontgomeryContext(15)
    x = ctx.allocate(4)
    out = ctx.allocate(4)
    ctx.poke_register(x, 5)  # gcd(5, 15) = 5
    with pytest.raises(NotInvertible):
        build_inverter(ctx, x, out, mctx)


@pytest.mark.parametrize("p", [5, 7, 13, 29])
def test_divider_exhaustive(p):
    mctx = MontgomeryContext(p)
    ctx = sim_context(Strategy.low_t(), validate=False)
    x = ctx.allocate(mctx.n)
    y = ctx.allocate(mctx.n)
    lam = ctx.allocate(mctx.n)
    for name, reg in (("x", x), ("y", y), ("lam", lam)):
        ctx.add_register(name, reg)
    build_divider(ctx, x, y, lam, mctx)
    n = mctx.n
    for xv in range(1, p):
        for yv in range(p):
            res = simulate(ctx.circuit, {"x": xv, "y": yv})
            want = yv * pow(xv, -1, p) * pow(2, n, p) % p
            assert res["lam"] == want, (p, xv, yv)
            assert res["x"] == xv and res["y"] == yv


def test_divider_example():
    mctx = MontgomeryContext(13)
    ctx = sim_context(Strategy.low_t(), validate=False)
    x, y, lam = (ctx.allocate(4) for _ in range(3))
    for name, reg in (("x", x), ("y", y), ("lam", lam)):
        ctx.add_register(name, reg)
    build_divider(ctx, x, y, lam, mctx)
    res = simulate(ctx.circuit, {"x": 2, "y": 5})
    assert res["lam"] == 1  # 5 * 2^-1 * 16 mod 13
    assert simulate(ctx.circuit, {"x": 3, "y": 0})["lam"] == 0


@pytest.mark.parametrize("p", [5, 7, 13])
@pytest.mark.parametrize("subtract", [False, True])
def test_divide_and_add_exhaustive(p, subtract):
    mctx = MontgomeryContext(p)
    ctx = sim_context(Strategy.low_t(), validate=False)
    x, y, z = (ctx.allocate(mctx.n) for _ in range(3))
    for name, reg in (("x", x), ("y", y), ("z", z)):
        ctx.add_register(name, reg)
    build_divide_and_add(ctx, x, y, z, mctx, subtract=subtract)
    n = mctx.n
    for xv in range(1, p):
        for yv in range(p):
            for zv in (0, 1, p - 1, yv):
                res = simulate(ctx.circuit, {"x": xv, "y": yv, "z": zv})
                q = yv * pow(xv, -1, p) * pow(2, n, p) % p
                want = (zv - q) % p if subtract else (zv + q) % p
                assert res["z"] == want, (p, subtract, xv, yv, zv)


def test_divide_and_add_example():
    mctx = MontgomeryContext(13)
    ctx = sim_context(Strategy.low_t(), validate=False)
    x, y, z = (ctx.allocate(4) for _ in range(3))
    for name, reg in (("x", x), ("y", y), ("z", z)):
        ctx.add_register(name, reg)
    build_divide_and_add(ctx, x, y, z, mctx)
    assert simulate(ctx.circuit, {"x": 2, "y": 5, "z": 3})["z"] == 4


def test_counter_counts_skipped_rounds():
    """The correction-doubling count (= counter value after the forward
    pass) equals 2n - k on every input."""
    from ecshor.gcdinv import _inverter_forward
    p = 13
    mctx = MontgomeryContext(p)
    n = mctx.n
    for x in range(1, p):
        ctx = sim_context(Strategy.low_t(), validate=False)
        xr = ctx.allocate(n)
        ctx.poke_register(xr, x)
        h = _inverter_forward(ctx, xr, mctx, None)
        _, k, _ = kaliski_classical(p, x)
        assert ctx.peek_register(h.regs[4]) == 2 * n - k
        assert ctx.peek_register(h.pseudo) == pow(x, -1, p) * pow(2, k, p) % p
