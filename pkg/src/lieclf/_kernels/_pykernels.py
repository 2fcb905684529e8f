"""Pure-Python kernels; same signatures and results as the compiled module."""
import math

from .opcodes import (ABS, ADD, CONST, COS, DIV, ERR_EMPTY, ERR_KINK, ERR_NONFINITE,
                      EXP, MAX, MIN, MUL, NEG, OK, POW, SELECT, SIGN, SIN, SQRT, SUB,
                      VAR)

GUARD_TOL = 1e-12
_INF = float("inf")
_NAN = float("nan")


def _div(a, b):
    if b == 0.0:
        if a == 0.0 or a != a:
            return _NAN
        return math.copysign(_INF, a) * math.copysign(1.0, b)
    return a / b


def _pow(a, n):
    try:
        return math.pow(a, n)
    except (OverflowError, ValueError, ZeroDivisionError):
        if a == 0.0:
            return _INF
        return _INF if abs(a) > 1.0 else 0.0


def _safe(fn, a):
    try:
        return fn(a)
    except OverflowError:
        return _INF
    except ValueError:
        return _NAN


def _run(ops, args, lo, hi, x, st):
    """Run postfix code ``ops[lo:hi]``; returns ``(value, err)``."""
    sp = 0
    for pc in range(lo, hi):
        o = ops[pc]
        if o == CONST:
            st[sp] = args[pc]
            sp += 1
        elif o == VAR:
            st[sp] = x[int(args[pc])]
            sp += 1
        elif o <= DIV:
            sp -= 1
            b = st[sp]
            a = st[sp - 1]
            if o == ADD:
                st[sp - 1] = a + b
            elif o == SUB:
                st[sp - 1] = a - b
            elif o == MUL:
                st[sp - 1] = a * b
            else:
                st[sp - 1] = _div(a, b)
        elif o == POW:
            st[sp - 1] = _pow(st[sp - 1], args[pc])
        elif o == NEG:
            st[sp - 1] = -st[sp - 1]
        elif o == SIN:
            st[sp - 1] = _safe(math.sin, st[sp - 1])
        elif o == COS:
            st[sp - 1] = _safe(math.cos, st[sp - 1])
        elif o == EXP:
            st[sp - 1] = _safe(math.exp, st[sp - 1])
        elif o == SQRT:
            st[sp - 1] = _safe(math.sqrt, st[sp - 1])
        elif o == ABS:
            st[sp - 1] = abs(st[sp - 1])
        elif o == MIN or o == MAX:
            sp -= 1
            b = st[sp]
            a = st[sp - 1]
            if o == MIN:
                st[sp - 1] = a if a < b else b
            else:
                st[sp - 1] = a if a > b else b
        elif o == SIGN:
            a = st[sp - 1]
            if a > 0.0:
                st[sp - 1] = 1.0
            elif a < 0.0:
                st[sp - 1] = -1.0
            elif a == 0.0:
                return 0.0, ERR_KINK
        elif o == SELECT:
            sp -= 2
            c = st[sp - 1]
            if c > 0.0:
                st[sp - 1] = st[sp]
            elif c < 0.0:
                st[sp - 1] = st[sp + 1]
            elif c == 0.0:
                return 0.0, ERR_KINK
            else:
                st[sp - 1] = _NAN
    v = st[sp - 1]
    if not math.isfinite(v):
        return v, ERR_NONFINITE
    return v, OK


def eval_programs(ops, args, starts, x, stack, out):
    """Evaluate consecutive programs ``starts[k]:starts[k+1]`` into ``out[k]``."""
    ops_l = ops.tolist()
    args_l = args.tolist()
    st = [0.0] * len(stack)
    xl = x.tolist()
    for k in range(len(starts) - 1):
        v, err = _run(ops_l, args_l, int(starts[k]), int(starts[k + 1]), xl, st)
        if err:
            return err
        out[k] = v
    return OK


class _System:
    def __init__(self, ops, args, prog_start, field_piece_start, piece_guard_start,
                 guard_prog, piece_comp, depth):
        self.ops = ops.tolist()
        self.args = args.tolist()
        self.ps = prog_start.tolist()
        self.fps = field_piece_start.tolist()
        self.pgs = piece_guard_start.tolist()
        self.gp = guard_prog.tolist()
        self.pc = piece_comp.tolist()
        self.st = [0.0] * max(depth, 1)

    def prog(self, k, x):
        return _run(self.ops, self.args, self.ps[k], self.ps[k + 1], x, self.st)

    def field(self, f, x, v, scale):
        """``v += scale * f(x)`` using the first piece whose closed region holds x."""
        for q in range(self.fps[f], self.fps[f + 1]):
            inside = True
            for g in range(self.pgs[q], self.pgs[q + 1]):
                val, err = self.prog(self.gp[g], x)
                if err:
                    return err
                if val < -GUARD_TOL:
                    inside = False
                    break
            if not inside:
                continue
            for i, k in enumerate(self.pc[q]):
                val, err = self.prog(k, x)
                if err:
                    return err
                v[i] += scale * val
            return OK
        return ERR_EMPTY


def eval_field(ops, args, prog_start, field_piece_start, piece_guard_start, guard_prog,
               piece_comp, depth, field, x, out):
    sysm = _System(ops, args, prog_start, field_piece_start, piece_guard_start,
                   guard_prog, piece_comp, depth)
    v = [0.0] * len(x)
    err = sysm.field(field, x.tolist(), v, 1.0)
    if err == OK:
        for i in range(len(v)):
            out[i] = v[i]
    return err


def integrate_word(ops, args, prog_start, field_piece_start, piece_guard_start,
                   guard_prog, piece_comp, depth, seg_ctrl, seg_dur, has_drift, x,
                   substeps, record_every, out, out_seg):
    """RK4 through a piecewise-constant control word.

    ``seg_ctrl[j]`` is a signed generator index (0 means drift only). ``x`` is
    overwritten with the final state. Rows ``[s, x...]`` are written to ``out``
    at the start and every ``record_every`` substeps (always at segment ends).
    Returns ``(rows_written, err)``.
    """
    sysm = _System(ops, args, prog_start, field_piece_start, piece_guard_start,
                   guard_prog, piece_comp, depth)
    n = len(x)
    xs = x.tolist()
    maxrows = out.shape[0]
    s = 0.0
    rows = 0
    if maxrows > 0:
        out[0, 0] = 0.0
        out[0, 1:] = xs
        out_seg[0] = 0
        rows = 1
    for j in range(len(seg_ctrl)):
        c = int(seg_ctrl[j])
        sign = 1.0 if c > 0 else -1.0
        fi = abs(c)
        dt = float(seg_dur[j]) / substeps

        def rhs(y):
            v = [0.0] * n
            if has_drift:
                err = sysm.field(0, y, v, 1.0)
                if err:
                    return v, err
            if fi:
                err = sysm.field(fi, y, v, sign)
                if err:
                    return v, err
            return v, OK

        for k in range(substeps):
            k1, err = rhs(xs)
            if err:
                return rows, err
            k2, err = rhs([xs[i] + 0.5 * dt * k1[i] for i in range(n)])
            if err:
                return rows, err
            k3, err = rhs([xs[i] + 0.5 * dt * k2[i] for i in range(n)])
            if err:
                return rows, err
            k4, err = rhs([xs[i] + dt * k3[i] for i in range(n)])
            if err:
                return rows, err
            for i in range(n):
                xs[i] = xs[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not math.isfinite(xs[i]):
                    return rows, ERR_NONFINITE
            s += dt
            if ((k + 1) % record_every == 0 or k == substeps - 1) and rows < maxrows:
                out[rows, 0] = s
                out[rows, 1:] = xs
                out_seg[rows] = j
                rows += 1
        for i in range(n):
            x[i] = xs[i]
    return rows, OK
