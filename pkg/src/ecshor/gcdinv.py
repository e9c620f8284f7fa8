"""Reversible modular inversion via the binary extended Euclidean algorithm.

The classical round comes in two equivalent formulations: the original
four-case dispatch and the swap-based form in which controlled swaps route
the registers so that each arithmetic step appears once.  The quantum
driver runs 2n structurally identical rounds; a zero test on v gates each
round so that rounds after termination act as the identity while a counter
records how many were skipped.  The pseudo-inverse is corrected during the
uncompute pass: every skipped round doubles the output register instead of
undoing a division round, and the two run on disjoint wires, in parallel.

With x the register value, the forward pass leaves p - r = x^-1 2^k mod p
after k active rounds; 2n-k doublings raise it to x^-1 2^2n, and the
public inverter halves n times to land on the Montgomery inverse
x^-1 2^n mod p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .context import (BuilderContext, EstimateWalk, ResourceEstimate,
                      Strategy, fan_in, measure_segment)
from .intarith import (add_constant, add_into, build_comparator,
                       compare_gt_constant, sub_constant, sub_from)
from .modarith import (MontgomeryContext, MontMulHandle, build_mod_add,
                       build_mod_double, build_mod_halve, build_mod_sub,
                       mont_mul_backward, mont_mul_forward)


class RoundFormulation(Enum):
    FOUR_CASE = "four-case"
    SWAP_BASED = "swap-based"


@dataclass
class KaliskiState:
    u: int
    v: int
    r: int
    s: int


def kaliski_round_classical(state: KaliskiState,
                            formulation: RoundFormulation = RoundFormulation.SWAP_BASED
                            ) -> KaliskiState:
    """One ungated round; both formulations produce identical states."""
    u, v, r, s = state.u, state.v, state.r, state.s
    if formulation is RoundFormulation.FOUR_CASE:
        if u % 2 == 1 and v % 2 == 0:
            v //= 2
            r *= 2
        elif u % 2 == 0 and v % 2 == 1:
            u //= 2
            s *= 2
        elif u % 2 == 1 and v % 2 == 1 and u > v:
            u = (u - v) // 2
            r = r + s
            s *= 2
        else:
            v = (v - u) // 2
            s = r + s
            r *= 2
        return KaliskiState(u, v, r, s)
    swapped = (u % 2 == 0 and v % 2 == 1) or (u % 2 == 1 and v % 2 == 1 and u > v)
    if swapped:
        u, v = v, u
        r, s = s, r
    if u % 2 == 1 and v % 2 == 1:
        v = v - u
        s = r + s
    v //= 2
    r *= 2
    if swapped:
        u, v = v, u
        r, s = s, r
    return KaliskiState(u, v, r, s)


def kaliski_classical(p: int, x: int,
                      formulation: RoundFormulation = RoundFormulation.SWAP_BASED
                      ) -> tuple[int, int, list[KaliskiState]]:
    """Run rounds until v = 0; returns (pseudo_inverse, k, state trace).

    pseudo_inverse = p - r = x^-1 2^k mod p (r reduced into [0, p) first).
    """
    st = KaliskiState(p, x, 0, 1)
    trace = [st]
    k = 0
    while st.v:
        st = kaliski_round_classical(st, formulation)
        trace.append(st)
        k += 1
    r = st.r % p
    return (p - r) % p, k, trace


def counter_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(2 * n))) + 1


# -- round circuits -------------------------------------------------------------


def _nonzero_into(ctx: BuilderContext, reg, out: int) -> None:
    """out ^= [reg != 0] via a complemented fan-in; restores reg."""
    for w in reg:
        ctx.x(w)
    h = fan_in(ctx, list(reg))
    ctx.cnot(h.wire, out)
    ctx.x(out)
    h.uncompute(ctx)
    for w in reg:
        ctx.x(w)


def _swap_round_core(ctx: BuilderContext, u, v, r, s, counter, garbage) -> list[int]:
    """One swap-formulation round; returns the halved (rotated) v labels.

    ``garbage`` is (active, swap, both_odd): three caller-allocated wires
    recording the round so the adjoint can undo it.
    """
    a, b, m = garbage
    _nonzero_into(ctx, v, a)
    gt = ctx.allocate(1)
    build_comparator(ctx, v, u, gt[0])  # gt = [u > v]
    t1 = ctx.allocate(1)
    ctx.x(gt[0])
    ctx.and_(u[0], gt[0], t1[0])      # t1 = u odd and not gt
    ctx.x(gt[0])
    t2 = ctx.allocate(1)
    ctx.x(t1[0])
    ctx.and_(v[0], t1[0], t2[0])      # t2 = v odd and (u even or gt)
    ctx.x(t1[0])
    ctx.and_(a, t2[0], b)
    # uncompute t2, t1, gt
    ctx.x(t1[0])
    ctx.and_inv(v[0], t1[0], t2[0])
    ctx.x(t1[0])
    ctx.release(t2)
    ctx.x(gt[0])
    ctx.and_inv(u[0], gt[0], t1[0])
    ctx.x(gt[0])
    ctx.release(t1)
    build_comparator(ctx, v, u, gt[0])
    ctx.release(gt)

    ctx.swap_registers(u, v, control=b)
    ctx.swap_registers(r, s, control=b)
    ctx.and_(a, v[0], m)              # both odd (u is odd whenever active)
    sub_from(ctx, u, v, control=m)
    add_into(ctx, r, s, control=m)
    ctx.rotate_left_physical(r, control=a)   # r <- 2r on active rounds
    vh = v[1:] + [v[0]]               # v <- v/2: low bit is 0, rotation is free
    ctx.swap_registers(u, vh, control=b)
    ctx.swap_registers(r, s, control=b)
    ctx.x(a)
    add_constant(ctx, counter, 1, control=a)
    ctx.x(a)
    return vh


def _flag_pair(ctx: BuilderContext, w1: int, pol1: bool, w2: int, pol2: bool,
               out: int, inverse: bool = False) -> None:
    """out = (w1 == pol1) and (w2 == pol2), by X-conjugated AND."""
    if not pol1:
        ctx.x(w1)
    if not pol2:
        ctx.x(w2)
    if inverse:
        ctx.and_inv(w1, w2, out)
    else:
        ctx.and_(w1, w2, out)
    if not pol1:
        ctx.x(w1)
    if not pol2:
        ctx.x(w2)


def _four_case_round_core(ctx: BuilderContext, u, v, r, s, counter,
                          garbage) -> tuple[list[int], list[int]]:
    """Functional reproduction of the four-case round; returns (u, v) labels.

    Each case flag controls its own halvings, doublings, subtractions and
    additions.  ``garbage`` is (active, c1, c2, c3, c4): five wires kept for
    the caller.
    """
    a, c1, c2, c3, c4 = garbage
    _nonzero_into(ctx, v, a)
    gt = ctx.allocate(1)
    build_comparator(ctx, v, u, gt[0])
    oo = ctx.allocate(1)
    ctx.and_(u[0], v[0], oo[0])       # both odd
    t = ctx.allocate(1)
    _flag_pair(ctx, u[0], True, v[0], False, t[0])
    ctx.and_(a, t[0], c1)             # u odd, v even
    _flag_pair(ctx, u[0], True, v[0], False, t[0], inverse=True)
    _flag_pair(ctx, u[0], False, v[0], True, t[0])
    ctx.and_(a, t[0], c2)             # u even, v odd
    _flag_pair(ctx, u[0], False, v[0], True, t[0], inverse=True)
    ctx.and_(oo[0], gt[0], t[0])
    ctx.and_(a, t[0], c3)             # both odd, u > v
    ctx.and_inv(oo[0], gt[0], t[0])
    ctx.x(gt[0])
    ctx.and_(oo[0], gt[0], t[0])
    ctx.and_(a, t[0], c4)             # both odd, v >= u
    ctx.and_inv(oo[0], gt[0], t[0])
    ctx.x(gt[0])
    ctx.release(t)
    ctx.and_inv(u[0], v[0], oo[0])
    ctx.release(oo)
    build_comparator(ctx, v, u, gt[0])
    ctx.release(gt)

    sub_from(ctx, v, u, control=c3)   # u -= v
    sub_from(ctx, u, v, control=c4)   # v -= u
    add_into(ctx, s, r, control=c3)   # r += s
    add_into(ctx, r, s, control=c4)   # s += r
    hu = ctx.allocate(1)
    ctx.cnot(c2, hu[0])
    ctx.cnot(c3, hu[0])               # u halves / s doubles on c2 or c3
    hv = ctx.allocate(1)
    ctx.cnot(c1, hv[0])
    ctx.cnot(c4, hv[0])               # v halves / r doubles on c1 or c4
    ctx.rotate_right_physical(u, control=hu[0])
    ctx.rotate_left_physical(s, control=hu[0])
    ctx.rotate_right_physical(v, control=hv[0])
    ctx.rotate_left_physical(r, control=hv[0])
    ctx.cnot(c1, hv[0])
    ctx.cnot(c4, hv[0])
    ctx.release(hv)
    ctx.cnot(c2, hu[0])
    ctx.cnot(c3, hu[0])
    ctx.release(hu)
    ctx.x(a)
    add_constant(ctx, counter, 1, control=a)
    ctx.x(a)
    return list(u), list(v)


def build_kaliski_round(ctx: BuilderContext, u, v, r, s, counter,
                        formulation: RoundFormulation = RoundFormulation.SWAP_BASED,
                        ) -> dict:
    """One gated round on caller registers; keeps the case-recording wires.

    Returns the updated register labels and the garbage wires (live, for a
    later uncompute by the caller or the test harness).
    """
    if formulation is RoundFormulation.SWAP_BASED:
        garbage = ctx.allocate(3)
        v2 = _swap_round_core(ctx, u, v, r, s, counter, garbage)
        return {"u": list(u), "v": v2, "r": list(r), "s": list(s),
                "garbage": garbage}
    garbage = ctx.allocate(5)
    u2, v2 = _four_case_round_core(ctx, u, v, r, s, counter, garbage)
    return {"u": u2, "v": v2, "r": list(r), "s": list(s), "garbage": garbage}


# -- full inverter --------------------------------------------------------------


def _inverter_tail(ctx: BuilderContext, r, p: int) -> None:
    """Reduce r into [0, p) and negate it into the pseudo-inverse p - r.

    The negation is gated by a zero test, so an uncontrolled or
    non-invertible run (r = 0) stays at zero instead of drifting to the
    non-canonical value p.
    """
    width = len(r)
    rf = ctx.allocate(1)
    compare_gt_constant(ctx, r, p - 1, rf[0])
    sub_constant(ctx, r, p, control=rf[0])
    z = ctx.allocate(1)
    _nonzero_into(ctx, r, z[0])
    for w in r:
        ctx.cnot(z[0], w)
    add_constant(ctx, r, (p + 1) % (1 << width), control=z[0])
    _nonzero_into(ctx, r, z[0])
    ctx.release(z)


class InverterHandle:
    def __init__(self, regs, round_bufs, round_garbage, tail_buf, pseudo,
                 x, v_orig, control):
        self.regs = regs                  # (u, v_final, r, s, counter)
        self.round_bufs = round_bufs
        self.round_garbage = round_garbage
        self.tail_buf = tail_buf
        self.pseudo = pseudo              # r[:n], holds p - r = x^-1 2^k
        self.x = x
        self.v_orig = v_orig
        self.control = control


def _inverter_forward(ctx: BuilderContext, x, mctx: MontgomeryContext,
                      control: int | None) -> InverterHandle:
    p, n = mctx.p, mctx.n
    u = ctx.allocate(n)
    v = ctx.allocate(n)
    r = ctx.allocate(n + 1)
    s = ctx.allocate(n + 1)
    counter = ctx.allocate(counter_bits(n))
    if control is None:
        ctx.load_constant(u, p)
        ctx.load_constant(s, 1)
    else:
        for i in range(n):
            if (p >> i) & 1:
                ctx.cnot(control, u[i])
        ctx.cnot(control, s[0])
    ctx.copy_register(x, v, control=control)
    ctx.sync()
    round_bufs = []
    round_garbage = []
    vl = v
    for _ in range(2 * n):
        g = ctx.allocate(3)
        buf: list = []
        with ctx.capture(buf):
            vl = _swap_round_core(ctx, u, vl, r, s, counter, g)
        ctx.sync()
        round_bufs.append(buf)
        round_garbage.append(g)
    tail: list = []
    with ctx.capture(tail):
        _inverter_tail(ctx, r, p)
    ctx.sync()
    return InverterHandle((u, vl, r, s, counter), round_bufs, round_garbage,
                          tail, r[:n], x, v, control)


def _inverter_backward(ctx: BuilderContext, h: InverterHandle,
                       mctx: MontgomeryContext, out,
                       doubles_out: bool = True) -> None:
    """Uncompute the forward pass; skipped rounds double ``out`` instead,
    in parallel with the round uncompute (disjoint wires)."""
    u, v, r, s, counter = h.regs
    ctx.emit_adjoint(h.tail_buf)
    ctx.sync()
    for buf, g in zip(reversed(h.round_bufs), reversed(h.round_garbage)):
        if doubles_out:
            a = g[0]
            ctx.x(a)
            build_mod_double(ctx, out, mctx, control=a)
            ctx.x(a)
        ctx.emit_adjoint(buf)
        ctx.release(g)
        ctx.sync()
    # undo the initial register loads
    ctx.copy_register(h.x, h.v_orig, control=h.control)
    if h.control is None:
        ctx.load_constant(u, mctx.p)
        ctx.load_constant(s, 1)
    else:
        for i, w in enumerate(u):
            if (mctx.p >> i) & 1:
                ctx.cnot(h.control, w)
        ctx.cnot(h.control, s[0])
    ctx.release(counter)
    ctx.release(s)
    ctx.release(r)
    ctx.release(sorted(v))
    ctx.release(u)
    ctx.sync()


def build_inverter(ctx: BuilderContext, x, out, mctx: MontgomeryContext,
                   control: int | None = None) -> None:
    """out <- x^-1 * 2^n mod p (the Montgomery inverse); x restored.

    Forward rounds, copy-out, then uncompute with 2n-k parallel correction
    doublings (reaching x^-1 2^2n) and a final run of n halvings.
    """
    ctx.assert_invertible(x, mctx.p)
    ctx.assert_range(x, mctx.p)
    h = _inverter_forward(ctx, x, mctx, control)
    ctx.copy_register(h.pseudo, out, control=control)
    ctx.sync()
    _inverter_backward(ctx, h, mctx, out)
    for _ in range(mctx.n):
        build_mod_halve(ctx, out, mctx)
    ctx.sync()


def _clear_known(ctx: BuilderContext, u, s, p: int, control: int | None) -> None:
    """XOR away the known post-gcd values u = 1, s = p (parallel X gates)."""
    if control is None:
        ctx.x(u[0])
        for i, w in enumerate(s):
            if (p >> i) & 1:
                ctx.x(w)
    else:
        ctx.cnot(control, u[0])
        for i, w in enumerate(s):
            if (p >> i) & 1:
                ctx.cnot(control, w)


def build_divider(ctx: BuilderContext, x, y, lam, mctx: MontgomeryContext,
                  control: int | None = None) -> None:
    """lam <- (lam + y * x^-1 * 2^n) mod p; x, y restored, lam usually 0.

    After the forward gcd the u, v, s registers hold known values; they are
    cleared with X gates and reused as the multiplier's accumulator and
    digit space, keeping the peak width below inverter + multiplier.
    """
    ctx.assert_invertible(x, mctx.p)
    ctx.assert_range(y, mctx.p)
    ctx.assert_zero(lam)
    p, n = mctx.p, mctx.n
    h = _inverter_forward(ctx, x, mctx, control)
    u, v, r, s, counter = h.regs
    _clear_known(ctx, u, s, p, control)
    ctx.sync()
    pool = list(v) + list(u) + list(s)
    k = mctx.window_k
    mh = mont_mul_forward(ctx, y, h.pseudo, mctx, windowed=k > 1,
                          acc=pool[:n + k + 1],
                          digit_pool=pool[n + k + 1:])
    build_mod_add(ctx, mh.result, lam, mctx)
    ctx.sync()
    mont_mul_backward(ctx, mh)
    _clear_known(ctx, u, s, p, control)
    ctx.sync()
    _inverter_backward(ctx, h, mctx, lam)


def build_divide_and_add(ctx: BuilderContext, x, y, z, mctx: MontgomeryContext,
                         control: int | None = None,
                         subtract: bool = False) -> None:
    """z <- (z +- y * x^-1 * 2^n) mod p for arbitrary live z.

    The correction doublings during the uncompute would scale z as well, so
    every skipped round halves z on the forward pass; the net factor on the
    incoming z is then exactly one.
    """
    ctx.assert_invertible(x, mctx.p)
    ctx.assert_range(y, mctx.p)
    ctx.assert_range(z, mctx.p)
    p, n = mctx.p, mctx.n
    u = ctx.allocate(n)
    v = ctx.allocate(n)
    r = ctx.allocate(n + 1)
    s = ctx.allocate(n + 1)
    counter = ctx.allocate(counter_bits(n))
    if control is None:
        ctx.load_constant(u, p)
        ctx.load_constant(s, 1)
    else:
        for i in range(n):
            if (p >> i) & 1:
                ctx.cnot(control, u[i])
        ctx.cnot(control, s[0])
    ctx.copy_register(x, v, control=control)
    ctx.sync()
    round_bufs = []
    round_garbage = []
    vl = v
    for _ in range(2 * n):
        g = ctx.allocate(3)
        buf: list = []
        with ctx.capture(buf):
            vl = _swap_round_core(ctx, u, vl, r, s, counter, g)
        ctx.x(g[0])
        build_mod_halve(ctx, z, mctx, control=g[0])  # parallel with the round
        ctx.x(g[0])
        ctx.sync()
        round_bufs.append(buf)
        round_garbage.append(g)
    tail: list = []
    with ctx.capture(tail):
        _inverter_tail(ctx, r, p)
    ctx.sync()
    h = InverterHandle((u, vl, r, s, counter), round_bufs, round_garbage,
                       tail, r[:n], x, v, control)
    _clear_known(ctx, u, s, p, control)
    ctx.sync()
    pool = list(vl) + list(u) + list(s)
    k = mctx.window_k
    mh = mont_mul_forward(ctx, y, h.pseudo, mctx, windowed=k > 1,
                          acc=pool[:n + k + 1],
                          digit_pool=pool[n + k + 1:])
    if subtract:
        build_mod_sub(ctx, mh.result, z, mctx)
    else:
        build_mod_add(ctx, mh.result, z, mctx)
    ctx.sync()
    mont_mul_backward(ctx, mh)
    _clear_known(ctx, u, s, p, control)
    ctx.sync()
    _inverter_backward(ctx, h, mctx, z)
