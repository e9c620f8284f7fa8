"""Modular arithmetic circuits over an odd modulus in Montgomery form.

Addition, doubling, halving and negation keep values in [0, p).  The
multiplier is windowed add-and-halve Montgomery multiplication: each window
adds a slice of x times y, looks up the multiple of p that clears the low
window bits, adds it, and divides by rotating the accumulator labels (the
low bits are guaranteed zero, so halving is free).  The forward pass keeps
its accumulator and per-window garbage for the caller (Bennett structure);
the backward pass replays the captured events in reverse, which is what the
multiply-then-add and square-then-subtract pebbling exploits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .circuit import InputOutOfRange
from .context import (BuilderContext, EstimateWalk, ResourceEstimate,
                      Strategy, count_context, fan_in, measure_segment,
                      seq_compose)
from .intarith import (add_constant, add_into, build_comparator,
                       compare_gt_constant, compare_lt_constant, sub_constant)


@dataclass(frozen=True)
class MontgomeryContext:
    """Odd modulus p, width n = ceil(lg p), R = 2^n mod p, window tables.

    ``reduction_table(k)[m]`` is the (n+k)-bit multiple t*p with
    t*p + m = 0 (mod 2^k); adding it to an accumulator ending in bits m
    clears the low k bits.  (The defining congruence forces t = -m/p mod
    2^k; see the decisions ledger for the sign discrepancy in the prose.)
    """
    p: int
    window_k: int = 1

    def __post_init__(self):
        if self.p < 3 or self.p % 2 == 0:
            raise ValueError("modulus must be odd and >= 3")
        if self.window_k < 1:
            raise ValueError("window size must be >= 1")

    @property
    def n(self) -> int:
        return self.p.bit_length()

    @property
    def R(self) -> int:
        return (1 << self.n) % self.p

    @property
    def R_inv(self) -> int:
        return pow(self.R, -1, self.p)

    @property
    def reduction_table(self) -> tuple[int, ...]:
        return self.table_for(self.window_k)

    def table_for(self, k: int) -> tuple[int, ...]:
        return _reduction_table(self.p, k)

    def encode(self, x: int) -> int:
        """Montgomery form: x * 2^n mod p."""
        return (x << self.n) % self.p

    def decode(self, x: int) -> int:
        return (x * self.R_inv) % self.p


@lru_cache(maxsize=None)
def _reduction_table(p: int, k: int) -> tuple[int, ...]:
    inv = pow(p, -1, 1 << k) if k else 0
    out = []
    for m in range(1 << k):
        t = (-m * inv) % (1 << k)
        out.append(t * p)
    return tuple(out)


def _window_sizes(n: int, k: int) -> list[int]:
    sizes = [k] * (n // k)
    if n % k:
        sizes.append(n % k)
    return sizes


# -- addition -------------------------------------------------------------------


def build_mod_add(ctx: BuilderContext, x, y, mctx: MontgomeryContext,
                  control: int | None = None) -> None:
    """y <- (x + y) mod p; x is a register or a classical constant.

    Overflow bit and comparison flag are computed and fully restored; only
    the initial addition and the final comparator carry the control.
    """
    p, n = mctx.p, mctx.n
    classical = isinstance(x, int)
    if classical and x >= p:
        raise InputOutOfRange(f"constant {x} >= modulus {p}")
    if not classical:
        ctx.assert_range(x, p)
    ctx.assert_range(y, p)
    a = ctx.allocate(1)
    ext = list(y) + a
    if classical:
        add_constant(ctx, ext, x, control=control)
    else:
        add_into(ctx, x, ext, control=control)
    sub_constant(ctx, ext, p)
    f = ctx.allocate(1)
    ctx.cnot(a[0], f[0])
    add_constant(ctx, y, p, control=f[0])
    ctx.cnot(f[0], a[0])
    ctx.x(f[0])
    if classical:
        # f currently [x > result]; clear by comparing against the constant
        compare_lt_constant(ctx, y, x, f[0], control=control)
    else:
        build_comparator(ctx, y, x, f[0], control=control)
    ctx.release(f)
    ctx.release(a)


def build_mod_sub(ctx: BuilderContext, x, y, mctx: MontgomeryContext,
                  control: int | None = None) -> None:
    """y <- (y - x) mod p, as a negate / add / negate conjugation."""
    if isinstance(x, int):
        build_mod_add(ctx, (mctx.p - x) % mctx.p, y, mctx, control=control)
        return
    build_mod_neg(ctx, y, mctx)
    build_mod_add(ctx, x, y, mctx, control=control)
    build_mod_neg(ctx, y, mctx)


# -- doubling / halving / negation ----------------------------------------------


def build_mod_double(ctx: BuilderContext, x, mctx: MontgomeryContext,
                     control: int | None = None) -> None:
    """x <- 2x mod p, in place on the register's own wires.

    Cyclic shift through one fresh top wire, subtract p, add back on
    underflow; the comparison flag is recomputed from the result parity
    (2x is even, 2x - p is odd).
    """
    p, n = mctx.p, mctx.n
    ctx.assert_range(x, p)
    a = ctx.allocate(1)
    ext = list(x) + a
    ctx.rotate_left_physical(ext, control)
    sub_constant(ctx, ext, p, control=control)
    f = ctx.allocate(1)
    ctx.cnot(ext[-1], f[0])
    add_constant(ctx, list(ext[:n]), p, control=f[0])
    ctx.cnot(f[0], ext[-1])
    if control is None:
        ctx.cnot(ext[0], f[0])
        ctx.x(f[0])
    else:
        ctx.toffoli(control, ext[0], f[0])
        ctx.cnot(control, f[0])
    ctx.release(f)
    ctx.release(a)


def build_mod_halve(ctx: BuilderContext, x, mctx: MontgomeryContext,
                    control: int | None = None) -> None:
    """x <- x/2 mod p (inverse of doubling)."""
    with ctx.adjoint():
        build_mod_double(ctx, x, mctx, control)
    ctx.assert_range(x, mctx.p)


def build_mod_neg(ctx: BuilderContext, x, mctx: MontgomeryContext,
                  control: int | None = None) -> None:
    """x <- (p - x) mod p with neg(0) = 0.

    Complement-and-add-(p+1), gated by a zero test so 0 stays fixed; the
    zero flag is recomputed from the output (x = 0 iff p - x = 0).
    """
    p, n = mctx.p, mctx.n
    ctx.assert_range(x, p)
    z = ctx.allocate(1)

    def flip_nonzero_into(out):
        for w in x:
            ctx.x(w)
        h = fan_in(ctx, list(x))
        ctx.cnot(h.wire, out)
        ctx.x(out)
        h.uncompute(ctx)
        for w in x:
            ctx.x(w)

    flip_nonzero_into(z[0])
    gate = z[0]
    t: list[int] = []
    if control is not None:
        t = ctx.allocate(1)
        ctx.and_(control, z[0], t[0])
        gate = t[0]
    for w in x:
        ctx.cnot(gate, w)
    add_constant(ctx, x, (p + 1) % (1 << n), control=gate)
    if control is not None:
        ctx.and_inv(control, z[0], t[0])
        ctx.release(t)
    flip_nonzero_into(z[0])
    ctx.release(z)


# -- Montgomery multiplication ----------------------------------------------------


class MontMulHandle:
    """Live state of a forward multiplication: rotated accumulator labels,
    dirty per-window digit registers, and the captured event list that the
    backward pass replays in reverse."""

    def __init__(self, result, events):
        self.result = result
        self.events = events


def mont_mul_forward(ctx: BuilderContext, x, y, mctx: MontgomeryContext, *,
                     windowed: bool = True, square: bool = False,
                     acc=None, digit_pool=None) -> MontMulHandle:
    """Compute acc = x*y*2^-n mod p, keeping garbage for later uncompute.

    With ``square`` set, y is ignored and x*x is formed by copying each
    control bit (a wire cannot control an addition of a register it belongs
    to).  ``acc`` (n+k+1 wires) and ``digit_pool`` (n wires) may be borrowed
    zeroed registers; omitted pieces are allocated fresh.
    """
    p, n = mctx.p, mctx.n
    k = mctx.window_k if windowed else 1
    src = x if square else y
    ctx.assert_range(x, p)
    if not square:
        ctx.assert_range(y, p)
    events: list = []
    digits_used = 0
    with ctx.capture(events):
        if acc is None:
            acc = ctx.allocate(n + k + 1)
        else:
            acc = list(acc[:n + k + 1])
        lo = 0
        for kw in _window_sizes(n, k):
            for j in range(kw):
                bit = x[lo + j]
                if square:
                    cpy = ctx.allocate(1)
                    ctx.cnot(bit, cpy[0])
                    bit = cpy[0]
                add_into(ctx, src, acc[j:], control=bit)
                if square:
                    ctx.cnot(x[lo + j], cpy[0])
                    ctx.release(cpy)
            if digit_pool is None:
                m = ctx.allocate(kw)
            else:
                m = list(digit_pool[digits_used:digits_used + kw])
                digits_used += kw
            for i in range(kw):
                ctx.cnot(acc[i], m[i])
            table = mctx.table_for(kw)
            lk = ctx.allocate(n + kw)
            ctx.lookup(m, lk, table)
            add_into(ctx, lk, acc)
            ctx.lookup(m, lk, table)
            ctx.release(lk)
            acc = acc[kw:] + acc[:kw]  # free halving: low kw bits are zero
            lo += kw
            ctx.sync()
        g = ctx.allocate(1)
        compare_gt_constant(ctx, acc[:n + 1], p - 1, g[0])
        sub_constant(ctx, acc[:n + 1], p, control=g[0])
        ctx.sync()
    return MontMulHandle(acc[:n], events)


def mont_mul_backward(ctx: BuilderContext, handle: MontMulHandle) -> None:
    """Uncompute a forward multiplication (accumulator, digits, flags)."""
    ctx.emit_adjoint(handle.events)
    ctx.sync()


def build_mont_mul(ctx: BuilderContext, x, y, out, mctx: MontgomeryContext,
                   windowed: bool = True) -> None:
    """out <- x*y*2^-n mod p (out-of-place Bennett: compute, copy, uncompute)."""
    h = mont_mul_forward(ctx, x, y, mctx, windowed=windowed)
    for s, d in zip(h.result, out):
        ctx.cnot(s, d)
    mont_mul_backward(ctx, h)


def build_mul_then_add(ctx: BuilderContext, x, y, z, mctx: MontgomeryContext, *,
                       control: int | None = None, subtract: bool = False,
                       windowed: bool = True) -> None:
    """z <- (z +- x*y*2^-n) mod p with all multiplier garbage restored.

    The Bennett copy step is replaced by a modular addition into z, so the
    cost is one multiplication plus one addition rather than two
    multiplications.
    """
    ctx.assert_range(z, mctx.p)
    h = mont_mul_forward(ctx, x, y, mctx, windowed=windowed)
    if subtract:
        build_mod_sub(ctx, h.result, z, mctx, control=control)
    else:
        build_mod_add(ctx, h.result, z, mctx, control=control)
    mont_mul_backward(ctx, h)


def build_square_then_sub(ctx: BuilderContext, x, target, mctx: MontgomeryContext, *,
                          control: int | None = None, subtract: bool = True,
                          windowed: bool = True) -> None:
    """target <- (target - x*x*2^-n) mod p (addition when subtract=False)."""
    ctx.assert_range(target, mctx.p)
    h = mont_mul_forward(ctx, x, x, mctx, windowed=windowed, square=True)
    if subtract:
        build_mod_sub(ctx, h.result, target, mctx, control=control)
    else:
        build_mod_add(ctx, h.result, target, mctx, control=control)
    mont_mul_backward(ctx, h)


# -- hierarchical estimates --------------------------------------------------------


def _mul_segments(n: int, k: int, strategy: Strategy):
    """Measured (estimate, baseline) pairs for the distinct pieces of one
    windowed multiplication: per-size window forward/backward and the final
    correction forward/backward."""
    p = (1 << n) - 1  # structural stand-in modulus; costs depend on n only
    sizes = _window_sizes(n, k)

    def window(kw, adjoint):
        def setup(ctx):
            xbits = ctx.allocate(kw)
            y = ctx.allocate(n)
            acc = ctx.allocate(n + k + 1)

            def body():
                for j in range(kw):
                    add_into(ctx, y, acc[j:], control=xbits[j])
                m = ctx.allocate(kw)
                for i in range(kw):
                    ctx.cnot(acc[i], m[i])
                lk = ctx.allocate(n + kw)
                ctx.lookup(m, lk, (0,) * (1 << kw))
                add_into(ctx, lk, acc)
                ctx.lookup(m, lk, (0,) * (1 << kw))
                ctx.release(lk)
                ctx.sync()

            if adjoint:
                def run():
                    with ctx.adjoint():
                        body()
                return run
            return body
        return setup

    def correction(adjoint):
        def setup(ctx):
            acc = ctx.allocate(n + k + 1)

            def body():
                g = ctx.allocate(1)
                compare_gt_constant(ctx, acc[:n + 1], p - 1, g[0])
                sub_constant(ctx, acc[:n + 1], p, control=g[0])
                ctx.sync()

            if adjoint:
                def run():
                    with ctx.adjoint():
                        body()
                return run
            return body
        return setup

    fwd = {kw: measure_segment(strategy, window(kw, False)) for kw in set(sizes)}
    bwd = {kw: measure_segment(strategy, window(kw, True)) for kw in set(sizes)}
    corr_f = measure_segment(strategy, correction(False))
    corr_b = measure_segment(strategy, correction(True))
    return sizes, fwd, bwd, corr_f, corr_b


def mul_walk(walk, n: int, k: int, segs, *, backward_tail=True,
             middle=None) -> None:
    """Append one pebbled multiplication to an EstimateWalk.

    ``middle(walk)`` runs between the forward pass and the uncompute (the
    copy step of a Bennett multiplication, or the modular addition of
    multiply-then-add); with ``backward_tail`` false the garbage stays
    live (caller composes the uncompute itself).
    """
    sizes, fwd, bwd, corr_f, corr_b = segs
    walk.alloc(n + k + 1)
    for kw in sizes:
        walk.add(fwd[kw][0], fwd[kw][1], net=kw)
    walk.add(corr_f[0], corr_f[1], net=1)
    if middle is not None:
        middle(walk)
    if backward_tail:
        walk.add(corr_b[0], corr_b[1], net=-1)
        for kw in reversed(sizes):
            walk.add(bwd[kw][0], bwd[kw][1], net=-kw)
        walk.free(n + k + 1)


def _copy_estimate(n: int) -> ResourceEstimate:
    return ResourceEstimate(clifford_count=n, full_depth=1, total_gates=n)


def estimate_mont_mul(n: int, strategy: Strategy, *, k: int = 1,
                      baseline: int | None = None) -> ResourceEstimate:
    """Composed estimate of one out-of-place multiplication (forward, copy,
    uncompute) at width n, window k; exact versus the flattened build."""
    segs = _mul_segments(n, k, strategy)
    walk = EstimateWalk(3 * n if baseline is None else baseline)
    mul_walk(walk, n, k, segs, middle=lambda w: w.add(_copy_estimate(n), 0))
    return walk.result()


def estimate_mod_add(n: int, strategy: Strategy, *, classical=False,
                     controlled=False, baseline: int | None = None) -> ResourceEstimate:
    def setup(ctx):
        regs = []
        if not classical:
            regs = ctx.allocate(n)
        y = ctx.allocate(n)
        ctrl = ctx.allocate(1)[0] if controlled else None
        mctx = MontgomeryContext((1 << n) - 1, 1)

        def body():
            build_mod_add(ctx, ((1 << n) - 3) if classical else regs, y, mctx,
                          control=ctrl)
        return body

    est, base = measure_segment(strategy, setup)
    walk = EstimateWalk((n if classical else 2 * n) if baseline is None else baseline)
    walk.add(est, base)
    return walk.result()


def estimate_mul_then_add(n: int, strategy: Strategy, *, k: int = 1,
                          baseline: int | None = None) -> ResourceEstimate:
    """Estimate of z += x*y*R^-1: one multiplication plus one modular
    addition instead of two multiplications."""
    segs = _mul_segments(n, k, strategy)
    add_est, add_base = _mod_add_segment(n, strategy)
    walk = EstimateWalk(3 * n if baseline is None else baseline)
    mul_walk(walk, n, k, segs,
             middle=lambda w: w.add(add_est, add_base))
    return walk.result()


def _mod_add_segment(n: int, strategy: Strategy):
    def setup(ctx):
        x = ctx.allocate(n)
        z = ctx.allocate(n)
        mctx = MontgomeryContext((1 << n) - 1, 1)
        return lambda: build_mod_add(ctx, x, z, mctx)
    return measure_segment(strategy, setup)


def optimal_mul_window(n: int, metric: str = "t_count",
                       strategy: Strategy | None = None) -> int:
    """argmin over k in [1, 16] of the estimated windowed-multiplication
    cost under the strategy's cost table."""
    if n < 4:
        raise ValueError("window optimization needs n >= 4")
    if strategy is None:
        strategy = Strategy.low_t()
    metric_name = {"TCount": "t_count", "TDepth": "t_depth"}.get(metric, metric)
    best_k, best_cost = 1, None
    for k in range(1, 17):
        cost = estimate_mont_mul(n, strategy, k=k).metric(metric_name)
        if best_cost is None or cost < best_cost:
            best_k, best_cost = k, cost
    return best_k


def optimal_mul_window(n: int, metric: str = "t_count",
                       strategy: Strategy | None = None) -> int:
    """argmin over k in [1, 16] of the estimated windowed-multiplication
    cost under the strategy's cost table."""
    if n < 4:
        raise ValueError("window optimization needs n >= 4")
    if strategy is None:
        strategy = Strategy.low_t()
    metric_name = {"TCount": "t_count", "TDepth": "t_depth"}.get(metric, metric)
    best_k, best_cost = 1, None
    for k in range(1, 17):
        cost = estimate_mont_mul(n, strategy, k=k).metric(metric_name)
        if best_cost is None or cost < best_cost:
            best_k, best_cost = k, cost
    return best_k
