"""Integer addition circuits: CDKMG, TTK and DKRS families.

All adders map (x, y) to (x, (x+y) mod 2^n) in place on y, with optional
carry-out and optional single-qubit control.  Constant addition either
copies the constant into scratch wires and runs an uncontrolled adder
(copy-then-add; only the copy needs the control) or curries the constant
into the DKRS network.  Comparators come from the one's-complement trick:
flip x, compute the carry of x'+y, copy it out, uncompute.

Registers are little-endian wire lists.  x and y must be disjoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .circuit import ConstantTooLarge, RegisterOverlap
from .context import AdderFamily, BuilderContext


class ConstantMethod(Enum):
    COPY_THEN_ADD = "copy-then-add"
    CURRIED = "curried"


@dataclass
class AdderSpec:
    bits: int
    with_carry_out: bool = False
    control: int | None = None
    constant: int | None = None
    constant_method: ConstantMethod | None = None


def _check_disjoint(*regs) -> None:
    seen: set[int] = set()
    for reg in regs:
        for w in reg:
            if w is None:
                continue
            if w in seen:
                raise RegisterOverlap(f"wire {w} appears in two operands")
            seen.add(w)


# -- CDKMG (Gidney ripple adder, 4n T uncontrolled / 18n controlled) ----------


def _cdkmg_add(ctx: BuilderContext, x, y, control, carry) -> None:
    n = len(x)
    if n == 1:
        if carry is not None:
            if control is None:
                ctx.and_(x[0], y[0], carry)
            else:
                with ctx.scratch(1) as t:
                    ctx.and_(x[0], y[0], t[0])
                    ctx.toffoli(control, t[0], carry)
                    ctx.and_inv(x[0], y[0], t[0])
        if control is None:
            ctx.cnot(x[0], y[0])
        else:
            ctx.toffoli(control, x[0], y[0])
        return
    c = ctx.allocate(n - 1)  # c[k] = carry into bit k+1
    for k in range(n - 1):
        if k > 0:
            ctx.cnot(c[k - 1], x[k])
            ctx.cnot(c[k - 1], y[k])
        ctx.and_(x[k], y[k], c[k])
        if k > 0:
            ctx.cnot(c[k - 1], c[k])
    transformed_top = False
    if carry is not None:
        ctx.cnot(c[n - 2], x[n - 1])
        ctx.cnot(c[n - 2], y[n - 1])
        transformed_top = True
        if control is None:
            ctx.and_(x[n - 1], y[n - 1], carry)
            ctx.cnot(c[n - 2], carry)
        else:
            with ctx.scratch(1) as t:
                ctx.and_(x[n - 1], y[n - 1], t[0])
                ctx.cnot(c[n - 2], t[0])
                ctx.toffoli(control, t[0], carry)
                ctx.cnot(c[n - 2], t[0])
                ctx.and_inv(x[n - 1], y[n - 1], t[0])
    # sums, high to low, uncomputing carries behind
    for k in range(n - 1, -1, -1):
        top_is_transformed = transformed_top if k == n - 1 else True
        if k == n - 1:
            if top_is_transformed:
                ctx.cnot(c[k - 1], x[k])
                if control is None:
                    ctx.cnot(x[k], y[k])
                else:
                    ctx.cnot(c[k - 1], y[k])
                    ctx.toffoli(control, x[k], y[k])
                    ctx.toffoli(control, c[k - 1], y[k])
            else:
                if control is None:
                    ctx.cnot(x[k], y[k])
                    ctx.cnot(c[k - 1], y[k])
                else:
                    ctx.toffoli(control, x[k], y[k])
                    ctx.toffoli(control, c[k - 1], y[k])
            # uncompute c[k-1]
            if k - 1 > 0:
                ctx.cnot(c[k - 2], c[k - 1])
            ctx.and_inv(x[k - 1], y[k - 1], c[k - 1])
        elif k >= 1:
            ctx.cnot(c[k - 1], x[k])
            if control is None:
                ctx.cnot(x[k], y[k])
            else:
                ctx.cnot(c[k - 1], y[k])
                ctx.toffoli(control, x[k], y[k])
                ctx.toffoli(control, c[k - 1], y[k])
            if k - 1 > 0:
                ctx.cnot(c[k - 2], c[k - 1])
            ctx.and_inv(x[k - 1], y[k - 1], c[k - 1])
        else:
            if control is None:
                ctx.cnot(x[0], y[0])
            else:
                ctx.toffoli(control, x[0], y[0])
    ctx.release(c)


# -- TTK (in-place, no auxiliary wires, 14n-7 T with carry) --------------------


def _ttk_add_nocarry(ctx: BuilderContext, x, y, control) -> None:
    n = len(x)
    if n == 1:
        if control is None:
            ctx.cnot(x[0], y[0])
        else:
            ctx.toffoli(control, x[0], y[0])
        return
    for i in range(1, n):
        ctx.cnot(x[i], y[i])
    for i in range(n - 2, 0, -1):
        ctx.cnot(x[i], x[i + 1])
    for i in range(n - 1):
        ctx.toffoli(x[i], y[i], x[i + 1])
    for i in range(n - 1, 0, -1):
        if control is None:
            ctx.cnot(x[i], y[i])
        else:
            ctx.toffoli(control, x[i], y[i])
        ctx.toffoli(x[i - 1], y[i - 1], x[i])
    for i in range(1, n - 1):
        ctx.cnot(x[i], x[i + 1])
    for i in range(1, n):
        ctx.cnot(x[i], y[i])
    if control is None:
        ctx.cnot(x[0], y[0])
    else:
        ctx.toffoli(control, x[0], y[0])


def _ttk_add(ctx: BuilderContext, x, y, control, carry) -> None:
    n = len(x)
    if carry is None:
        _ttk_add_nocarry(ctx, x, y, control)
        return
    if control is None and n >= 2:
        # direct carry variant, 2n-1 Toffoli gates
        for i in range(1, n):
            ctx.cnot(x[i], y[i])
        ctx.cnot(x[n - 1], carry)
        for i in range(n - 2, 0, -1):
            ctx.cnot(x[i], x[i + 1])
        for i in range(n - 1):
            ctx.toffoli(x[i], y[i], x[i + 1])
        ctx.toffoli(x[n - 1], y[n - 1], carry)
        for i in range(n - 1, 0, -1):
            ctx.cnot(x[i], y[i])
            ctx.toffoli(x[i - 1], y[i - 1], x[i])
        for i in range(1, n - 1):
            ctx.cnot(x[i], x[i + 1])
        for i in range(1, n):
            ctx.cnot(x[i], y[i])
        ctx.cnot(x[0], y[0])
        return
    # pad to an (n+1)-bit no-carry add; the top sum bit is the carry
    with ctx.scratch(1) as pad:
        _ttk_add_nocarry(ctx, list(x) + pad, list(y) + [carry], control)


# -- DKRS (carry-lookahead, Theta(lg n) T-depth) -------------------------------


def _bk_tree(ctx: BuilderContext, g, p) -> None:
    """Brent-Kung prefix over (generate, propagate); g[k] becomes the carry
    out of bit k.  The block-propagate products are computed, used by the
    up- and down-sweeps, and uncomputed before returning, so the whole tree
    is self-contained and its adjoint is valid at any later point."""
    m = len(g)
    pp: dict[tuple[int, int], int] = {}  # (level, block index) -> wire
    for i in range(min(m, len(p))):
        pp[(0, i)] = p[i]
    products: list[tuple[int, int, int]] = []  # (wire, in_a, in_b)
    level = 1
    while (1 << level) <= m:
        span = 1 << level
        half = span >> 1
        for j in range(m // span + 1):
            hi = (j + 1) * span - 1
            if hi <= m - 1:
                ctx.toffoli(pp[(level - 1, 2 * j + 1)], g[hi - half], g[hi])
            if (j + 1) * span <= m and (level, j) not in pp:
                w = ctx.allocate(1)[0]
                a, b = pp[(level - 1, 2 * j)], pp[(level - 1, 2 * j + 1)]
                ctx.and_(a, b, w)
                pp[(level, j)] = w
                products.append((w, a, b))
        level += 1
    for lev in range(level - 1, 0, -1):
        span = 1 << lev
        half = span >> 1
        k = span + half - 1
        while k <= m - 1:
            ctx.toffoli(pp[(lev - 1, k // half)], g[k - half], g[k])
            k += span
    for w, a, b in reversed(products):
        ctx.and_inv(a, b, w)
        ctx.release([w])


def _dkrs_add(ctx: BuilderContext, x, y, control, carry,
              constant: int | None = None) -> None:
    """In-place carry-lookahead addition.

    The carry network runs twice: once forward, once (after complementing
    the sum) as an adjoint, which clears the carry wires because x + y and
    x + ~s generate identical carries.  Only the non-network gates need a
    control.  With ``constant`` set, x is classical and the base
    generate/propagate loads are curried into X/CNOT gates.
    """
    n = len(y)
    m = n if carry is not None else n - 1
    if n == 1 or m == 0:
        if constant is None:
            if carry is not None:
                _cdkmg_add(ctx, x, y, control, carry)
            elif control is None:
                ctx.cnot(x[0], y[0])
            else:
                ctx.toffoli(control, x[0], y[0])
        else:
            if constant & 1:
                if control is None:
                    ctx.x(y[0])
                else:
                    ctx.cnot(control, y[0])
        return

    def base_load(adjoint: bool) -> None:
        for i in range(m):
            if constant is None:
                if adjoint:
                    ctx.and_inv(x[i], y[i], g[i])
                else:
                    ctx.and_(x[i], y[i], g[i])
            elif (constant >> i) & 1:
                if control is None:
                    ctx.cnot(y[i], g[i])
                else:
                    ctx.toffoli(control, y[i], g[i])

    def p_transform() -> None:
        for i in range(n):
            if constant is None:
                ctx.cnot(x[i], y[i])
            elif (constant >> i) & 1:
                if control is None:
                    ctx.x(y[i])
                else:
                    ctx.cnot(control, y[i])

    def complement() -> None:
        for i in range(n):
            if control is None:
                ctx.x(y[i])
            else:
                ctx.cnot(control, y[i])

    # Odd-size carry trees schedule better; even sizes get one extra padded
    # position whose combines are mirrored away by the adjoint pass.
    tree_pad = m % 2 == 0
    g = ctx.allocate(m + 1 if tree_pad else m)
    pad_p: list[int] = []
    if tree_pad:
        # the padded position must propagate a constant 0 so both tree
        # passes see identical values there
        pad_p = ctx.allocate(1)
        pvec = list(y[:m]) + pad_p
    else:
        pvec = list(y)
    base_load(False)
    p_transform()
    tree: list = []
    with ctx.capture(tree):
        _bk_tree(ctx, g, pvec)
    # sums (these are the gates that need the control)
    for i in range(1, n):
        if control is None:
            ctx.cnot(g[i - 1], y[i])
        else:
            ctx.toffoli(control, g[i - 1], y[i])
    if carry is not None:
        if control is None:
            ctx.cnot(g[n - 1], carry)
        else:
            ctx.toffoli(control, g[n - 1], carry)
    complement()
    if constant is None:
        for i in range(n):
            if control is None:
                ctx.cnot(x[i], y[i])
            else:
                ctx.toffoli(control, x[i], y[i])
    else:
        for i in range(n):
            if (constant >> i) & 1:
                if control is None:
                    ctx.x(y[i])
                else:
                    ctx.cnot(control, y[i])
    ctx.emit_adjoint(tree)
    if constant is None:
        for i in range(n):
            ctx.cnot(x[i], y[i])
    else:
        # for the controlled curried form the whole circuit is conditioned,
        # so this inverse p-transform is conditioned as well
        for i in range(n):
            if (constant >> i) & 1:
                if control is None:
                    ctx.x(y[i])
                else:
                    ctx.cnot(control, y[i])
    base_load(True)
    complement()
    if pad_p:
        ctx.release(pad_p)
    ctx.release(g)


_FAMILY_FN = {AdderFamily.CDKMG: _cdkmg_add, AdderFamily.TTK: _ttk_add}


def add_into(ctx: BuilderContext, x, y, *, control=None, carry=None,
             family: AdderFamily | None = None) -> None:
    """y += x (mod 2^len(y)).  If y is longer than x, x is zero-padded."""
    if family is None:
        family = ctx.strategy.adder_family
    _check_disjoint(x, y, [control], [carry])
    if len(y) > len(x):
        with ctx.scratch(len(y) - len(x)) as pad:
            add_into(ctx, list(x) + pad, y, control=control, carry=carry,
                     family=family)
        return
    if len(x) != len(y):
        raise RegisterOverlap("x longer than y")
    if family is AdderFamily.DKRS:
        _dkrs_add(ctx, x, y, control, carry)
        return
    _FAMILY_FN[family](ctx, x, y, control, carry)


def sub_from(ctx: BuilderContext, x, y, *, control=None,
             family: AdderFamily | None = None) -> None:
    """y -= x (mod 2^len(y)), by the complement conjugation of add."""
    for w in y:
        ctx.x(w)
    add_into(ctx, x, y, control=control, family=family)
    for w in y:
        ctx.x(w)


def add_constant(ctx: BuilderContext, y, value: int, *, control=None,
                 carry=None, family: AdderFamily | None = None,
                 method: ConstantMethod | None = None) -> None:
    """y += value (mod 2^len(y)) for a classical constant.

    Copy-then-add loads the constant into scratch wires (a controlled load
    is just CNOTs) and runs the uncontrolled adder; currying folds the
    constant into the DKRS network.
    """
    n = len(y)
    value %= 1 << n
    if value < 0 or value >= 1 << n:
        raise ConstantTooLarge(f"constant {value} needs more than {n} bits")
    if family is None:
        family = ctx.strategy.adder_family
    if method is None:
        method = (ConstantMethod.CURRIED if family is AdderFamily.DKRS
                  else ConstantMethod.COPY_THEN_ADD)
    if method is ConstantMethod.CURRIED and family is not AdderFamily.DKRS:
        raise ValueError("curried constant addition requires the DKRS family")
    if value == 0 and carry is None:
        return
    if method is ConstantMethod.CURRIED:
        _dkrs_add(ctx, None, y, control, carry, constant=value)
        return
    with ctx.scratch(n) as scr:
        if control is None:
            ctx.load_constant(scr, value)
        else:
            for i in range(n):
                if (value >> i) & 1:
                    ctx.cnot(control, scr[i])
        add_into(ctx, scr, y, carry=carry, family=family)
        if control is None:
            ctx.load_constant(scr, value)
        else:
            for i in range(n):
                if (value >> i) & 1:
                    ctx.cnot(control, scr[i])


def sub_constant(ctx: BuilderContext, y, value: int, *, control=None,
                 family: AdderFamily | None = None,
                 method: ConstantMethod | None = None) -> None:
    """y -= value (mod 2^len(y)), as addition of the two's complement."""
    n = len(y)
    add_constant(ctx, y, (1 << n) - (value % (1 << n)), control=control,
                 family=family, method=method)


def build_adder(ctx: BuilderContext, x, y, spec: AdderSpec,
                carry: int | None = None) -> None:
    """Spec-driven entry point covering quantum-quantum and constant forms."""
    if spec.with_carry_out and carry is None:
        raise ValueError("with_carry_out requires a caller-allocated carry wire")
    if not spec.with_carry_out:
        carry = None
    if spec.constant is not None:
        if spec.constant >= 1 << spec.bits:
            raise ConstantTooLarge(f"{spec.constant} >= 2^{spec.bits}")
        add_constant(ctx, y, spec.constant, control=spec.control, carry=carry,
                     method=spec.constant_method)
        return
    add_into(ctx, x, y, control=spec.control, carry=carry)


# -- comparators ----------------------------------------------------------------


def _carry_of_sum(ctx: BuilderContext, x, y, out, control,
                  family: AdderFamily) -> None:
    """out ^= carry-out of x+y, restoring x and y (compute-copy-uncompute).

    Only the final carry copy is controlled.
    """
    n = len(x)
    body: list = []
    if family is AdderFamily.CDKMG or n == 1:
        c = ctx.allocate(n)
        with ctx.capture(body):
            for k in range(n):
                if k > 0:
                    ctx.cnot(c[k - 1], x[k])
                    ctx.cnot(c[k - 1], y[k])
                ctx.and_(x[k], y[k], c[k])
                if k > 0:
                    ctx.cnot(c[k - 1], c[k])
        if control is None:
            ctx.cnot(c[n - 1], out)
        else:
            ctx.toffoli(control, c[n - 1], out)
        ctx.emit_adjoint(body)
        ctx.release(c)
    elif family is AdderFamily.TTK:
        t = ctx.allocate(1)
        with ctx.capture(body):
            for i in range(1, n):
                ctx.cnot(x[i], y[i])
            ctx.cnot(x[n - 1], t[0])
            for i in range(n - 2, 0, -1):
                ctx.cnot(x[i], x[i + 1])
            for i in range(n - 1):
                ctx.toffoli(x[i], y[i], x[i + 1])
            ctx.toffoli(x[n - 1], y[n - 1], t[0])
        if control is None:
            ctx.cnot(t[0], out)
        else:
            ctx.toffoli(control, t[0], out)
        ctx.emit_adjoint(body)
        ctx.release(t)
    else:  # DKRS: generate/propagate tree, carry is the last prefix
        g = ctx.allocate(n)
        with ctx.capture(body):
            for i in range(n):
                ctx.and_(x[i], y[i], g[i])
            for i in range(n):
                ctx.cnot(x[i], y[i])
            _bk_tree(ctx, g, y)
        if control is None:
            ctx.cnot(g[n - 1], out)
        else:
            ctx.toffoli(control, g[n - 1], out)
        ctx.emit_adjoint(body)
        ctx.release(g)


def build_comparator(ctx: BuilderContext, x, y, out, *, control=None,
                     family: AdderFamily | None = None) -> None:
    """out ^= [y > x]; x and y are restored.

    One's-complement trick: the carry of (~x) + y is 1 exactly when y > x.
    """
    _check_disjoint(x, y, [out], [control])
    if family is None:
        family = ctx.strategy.adder_family
    for w in x:
        ctx.x(w)
    _carry_of_sum(ctx, x, y, out, control, family)
    for w in x:
        ctx.x(w)


def compare_gt_constant(ctx: BuilderContext, y, value: int, out, *,
                        control=None, family: AdderFamily | None = None) -> None:
    """out ^= [y > value] for a classical constant."""
    with ctx.scratch(len(y)) as scr:
        ctx.load_constant(scr, value)
        build_comparator(ctx, scr, y, out, control=control, family=family)
        ctx.load_constant(scr, value)


def compare_lt_constant(ctx: BuilderContext, y, value: int, out, *,
                        control=None, family: AdderFamily | None = None) -> None:
    """out ^= [y < value], i.e. [value > y]."""
    with ctx.scratch(len(y)) as scr:
        ctx.load_constant(scr, value)
        build_comparator(ctx, y, scr, out, control=control, family=family)
        ctx.load_constant(scr, value)
