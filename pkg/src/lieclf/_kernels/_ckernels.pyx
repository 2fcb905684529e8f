# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: postfix expression evaluation and RK4 word integration."""
from libc.math cimport sin, cos, exp, sqrt, fabs, pow, isfinite, NAN
from libc.stdlib cimport malloc, free

cdef enum:
    CONST = 0
    VAR = 1
    ADD = 2
    SUB = 3
    MUL = 4
    DIV = 5
    POW = 6
    NEG = 7
    SIN = 8
    COS = 9
    EXP = 10
    SQRT = 11
    ABS = 12
    MIN = 13
    MAX = 14
    SIGN = 15
    SELECT = 16

cdef enum:
    OK = 0
    ERR_KINK = 1
    ERR_NONFINITE = 2
    ERR_EMPTY = 3

cdef double GUARD_TOL = 1e-12

OPCODES = dict(CONST=CONST, VAR=VAR, ADD=ADD, SUB=SUB, MUL=MUL, DIV=DIV, POW=POW,
               NEG=NEG, SIN=SIN, COS=COS, EXP=EXP, SQRT=SQRT, ABS=ABS, MIN=MIN,
               MAX=MAX, SIGN=SIGN, SELECT=SELECT)


cdef int run(const int[::1] ops, const double[::1] args, int lo, int hi,
             const double* x, double* st, double* res) noexcept nogil:
    cdef int sp = 0
    cdef int pc, o
    cdef double a, b, c
    for pc in range(lo, hi):
        o = ops[pc]
        if o == CONST:
            st[sp] = args[pc]
            sp += 1
        elif o == VAR:
            st[sp] = x[<int>args[pc]]
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
                st[sp - 1] = a / b
        elif o == POW:
            st[sp - 1] = pow(st[sp - 1], args[pc])
        elif o == NEG:
            st[sp - 1] = -st[sp - 1]
        elif o == SIN:
            st[sp - 1] = sin(st[sp - 1])
        elif o == COS:
            st[sp - 1] = cos(st[sp - 1])
        elif o == EXP:
            st[sp - 1] = exp(st[sp - 1])
        elif o == SQRT:
            st[sp - 1] = sqrt(st[sp - 1])
        elif o == ABS:
            st[sp - 1] = fabs(st[sp - 1])
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
                return ERR_KINK
        elif o == SELECT:
            sp -= 2
            c = st[sp - 1]
            if c > 0.0:
                st[sp - 1] = st[sp]
            elif c < 0.0:
                st[sp - 1] = st[sp + 1]
            elif c == 0.0:
                return ERR_KINK
            else:
                st[sp - 1] = NAN
    res[0] = st[sp - 1]
    if not isfinite(res[0]):
        return ERR_NONFINITE
    return OK


def eval_programs(const int[::1] ops, const double[::1] args, const int[::1] starts,
                  const double[::1] x, double[::1] stack, double[::1] out):
    """Evaluate consecutive programs ``starts[k]:starts[k+1]`` into ``out[k]``."""
    cdef int k, err
    cdef double v
    for k in range(starts.shape[0] - 1):
        err = run(ops, args, starts[k], starts[k + 1], &x[0], &stack[0], &v)
        if err:
            return err
        out[k] = v
    return OK


cdef int field_add(const int[::1] ops, const double[::1] args, const int[::1] ps,
                   const int[::1] fps, const int[::1] pgs, const int[::1] gp,
                   const int[:, ::1] pc, int f, const double* x, double* v,
                   double scale, double* st, int n) noexcept nogil:
    cdef int q, g, i, k, err, inside
    cdef double val
    for q in range(fps[f], fps[f + 1]):
        inside = 1
        for g in range(pgs[q], pgs[q + 1]):
            k = gp[g]
            err = run(ops, args, ps[k], ps[k + 1], x, st, &val)
            if err:
                return err
            if val < -GUARD_TOL:
                inside = 0
                break
        if not inside:
            continue
        for i in range(n):
            k = pc[q, i]
            err = run(ops, args, ps[k], ps[k + 1], x, st, &val)
            if err:
                return err
            v[i] += scale * val
        return OK
    return ERR_EMPTY


def eval_field(const int[::1] ops, const double[::1] args, const int[::1] prog_start,
               const int[::1] field_piece_start, const int[::1] piece_guard_start,
               const int[::1] guard_prog, const int[:, ::1] piece_comp, int depth,
               int field, const double[::1] x, double[::1] out):
    cdef int n = x.shape[0]
    cdef int i, err
    cdef double* st = <double*>malloc((depth + 1) * sizeof(double))
    cdef double* v = <double*>malloc(n * sizeof(double))
    for i in range(n):
        v[i] = 0.0
    err = field_add(ops, args, prog_start, field_piece_start, piece_guard_start,
                    guard_prog, piece_comp, field, &x[0], v, 1.0, st, n)
    if err == OK:
        for i in range(n):
            out[i] = v[i]
    free(st)
    free(v)
    return err


cdef int rhs(const int[::1] ops, const double[::1] args, const int[::1] ps,
             const int[::1] fps, const int[::1] pgs, const int[::1] gp,
             const int[:, ::1] pc, int has_drift, int fi, double sign,
             const double* y, double* v, double* st, int n) noexcept nogil:
    cdef int i, err
    for i in range(n):
        v[i] = 0.0
    if has_drift:
        err = field_add(ops, args, ps, fps, pgs, gp, pc, 0, y, v, 1.0, st, n)
        if err:
            return err
    if fi:
        err = field_add(ops, args, ps, fps, pgs, gp, pc, fi, y, v, sign, st, n)
        if err:
            return err
    return OK


def integrate_word(const int[::1] ops, const double[::1] args, const int[::1] prog_start,
                   const int[::1] field_piece_start, const int[::1] piece_guard_start,
                   const int[::1] guard_prog, const int[:, ::1] piece_comp, int depth,
                   const int[::1] seg_ctrl, const double[::1] seg_dur, int has_drift,
                   double[::1] x, int substeps, int record_every,
                   double[:, ::1] out, int[::1] out_seg):
    """RK4 through a piecewise-constant control word; see the Python fallback."""
    cdef int n = x.shape[0]
    cdef int maxrows = out.shape[0]
    cdef int rows = 0
    cdef int err = OK
    cdef int j, k, i, c, fi
    cdef double sign, dt, s = 0.0
    cdef double* st = <double*>malloc((depth + 1) * sizeof(double))
    cdef double* buf = <double*>malloc(6 * n * sizeof(double))
    cdef double* xs = buf
    cdef double* k1 = buf + n
    cdef double* k2 = buf + 2 * n
    cdef double* k3 = buf + 3 * n
    cdef double* k4 = buf + 4 * n
    cdef double* tmp = buf + 5 * n
    for i in range(n):
        xs[i] = x[i]
    if maxrows > 0:
        out[0, 0] = 0.0
        for i in range(n):
            out[0, i + 1] = xs[i]
        out_seg[0] = 0
        rows = 1
    with nogil:
        for j in range(seg_ctrl.shape[0]):
            c = seg_ctrl[j]
            sign = 1.0 if c > 0 else -1.0
            fi = c if c >= 0 else -c
            dt = seg_dur[j] / substeps
            for k in range(substeps):
                err = rhs(ops, args, prog_start, field_piece_start, piece_guard_start,
                          guard_prog, piece_comp, has_drift, fi, sign, xs, k1, st, n)
                if err:
                    break
                for i in range(n):
                    tmp[i] = xs[i] + 0.5 * dt * k1[i]
                err = rhs(ops, args, prog_start, field_piece_start, piece_guard_start,
                          guard_prog, piece_comp, has_drift, fi, sign, tmp, k2, st, n)
                if err:
                    break
                for i in range(n):
                    tmp[i] = xs[i] + 0.5 * dt * k2[i]
                err = rhs(ops, args, prog_start, field_piece_start, piece_guard_start,
                          guard_prog, piece_comp, has_drift, fi, sign, tmp, k3, st, n)
                if err:
                    break
                for i in range(n):
                    tmp[i] = xs[i] + dt * k3[i]
                err = rhs(ops, args, prog_start, field_piece_start, piece_guard_start,
                          guard_prog, piece_comp, has_drift, fi, sign, tmp, k4, st, n)
                if err:
                    break
                for i in range(n):
                    xs[i] = xs[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    if not isfinite(xs[i]):
                        err = ERR_NONFINITE
                if err:
                    break
                s += dt
                if ((k + 1) % record_every == 0 or k == substeps - 1) and rows < maxrows:
                    out[rows, 0] = s
                    for i in range(n):
                        out[rows, i + 1] = xs[i]
                    out_seg[rows] = j
                    rows += 1
            if err:
                break
            for i in range(n):
                x[i] = xs[i]
    free(st)
    free(buf)
    return rows, err
