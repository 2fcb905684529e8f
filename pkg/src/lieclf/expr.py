"""Closed-form scalar expressions and vector fields.

Expressions are immutable trees with exact symbolic partial derivatives.
``abs``, ``min`` and ``max`` are first-class nodes; their derivatives are
expressed with ``sign``/``select`` nodes that refuse to evaluate on the
switching surface instead of guessing a subgradient.

Scalar evaluation goes through a small postfix program run by the kernel
backend (compiled when available); batch evaluation walks the tree with numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from ._kernels import opcodes as op
from .errors import EmptyPieceSet, KinkEvaluation, NonFinite

BOUNDARY_TOL = 1e-12

UNARY_FUNCS = ("sin", "cos", "exp", "sqrt", "abs")
BINARY_FUNCS = ("min", "max")


class ScalarExpr:
    """Base class of expression nodes; supports ``+ - * / **`` and unary minus."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        return power(self, n)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)

    # evaluation ------------------------------------------------------------

    @cached_property
    def program(self) -> "Program":
        return Program.build([self])

    def evaluate(self, x) -> float:
        """Evaluate at a point. Raises KinkEvaluation / NonFinite."""
        return float(self.program.run(x)[0])

    def evaluate_batch(self, X) -> np.ndarray:
        """Vectorised evaluation over the rows of ``X`` (shape ``(N, n)``)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(all="ignore"):
            out = _eval_np(self, X)
        out = np.broadcast_to(out, (X.shape[0],)).astype(float, copy=True)
        if not np.all(np.isfinite(out)):
            raise NonFinite(f"non-finite value of {to_text(self)}")
        return out

    def partial(self, i: int) -> "ScalarExpr":
        return partial(self, i)

    def max_var(self) -> int:
        """Largest 0-based variable index used, or -1."""
        return max((n.index for n in walk(self) if isinstance(n, Var)), default=-1)


@dataclass(frozen=True)
class Const(ScalarExpr):
    value: float


@dataclass(frozen=True)
class Var(ScalarExpr):
    index: int  # 0-based; printed as x{index+1}


@dataclass(frozen=True)
class Unary(ScalarExpr):
    op: str  # neg sin cos exp sqrt abs sign
    arg: ScalarExpr


@dataclass(frozen=True)
class Binary(ScalarExpr):
    op: str  # add sub mul div min max
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Pow(ScalarExpr):
    base: ScalarExpr
    exponent: int


@dataclass(frozen=True)
class Select(ScalarExpr):
    """``pos`` where ``cond > 0``, ``neg`` where ``cond < 0``; undefined at 0."""

    cond: ScalarExpr
    pos: ScalarExpr
    neg: ScalarExpr


ZERO = Const(0.0)
ONE = Const(1.0)


def _lift(v) -> ScalarExpr:
    if isinstance(v, ScalarExpr):
        return v
    return Const(float(v))


def const(v) -> Const:
    return Const(float(v))


def var(i: int) -> Var:
    return Var(i)


def _is(e, v):
    return isinstance(e, Const) and e.value == v


# smart constructors: fold constants and trivial identities ---------------------


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Unary) and b.op == "neg":
        return sub(a, b.arg)
    return Binary("add", a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if a == b:
        return ZERO
    return Binary("sub", a, b)


def mul(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Binary("mul", a, b)


def div(a, b):
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("div", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    if isinstance(a, Binary) and a.op == "sub":
        return Binary("sub", a.right, a.left)
    return Unary("neg", a)


def power(a, n: int):
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and not (a.value == 0.0 and n < 0):
        return Const(a.value**n)
    return Pow(a, n)


def func(name: str, a):
    if name not in UNARY_FUNCS and name != "sign":
        raise ValueError(f"unknown function {name!r}")
    if isinstance(a, Const) and name != "sign":
        v = a.value
        if name == "sqrt" and v < 0:
            return Unary(name, a)
        return Const(float({"sin": math.sin, "cos": math.cos, "exp": math.exp,
                            "sqrt": math.sqrt, "abs": abs}[name](v)))
    return Unary(name, a)


def minimum(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(min(a.value, b.value))
    return Binary("min", a, b)


def maximum(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(max(a.value, b.value))
    return Binary("max", a, b)


def select(c, p, q):
    return Select(c, p, q)


def sin(a):
    return func("sin", _lift(a))


def cos(a):
    return func("cos", _lift(a))


def exp(a):
    return func("exp", _lift(a))


def sqrt(a):
    return func("sqrt", _lift(a))


def absolute(a):
    return func("abs", _lift(a))


_BUILD = {"add": add, "sub": sub, "mul": mul, "div": div, "min": minimum, "max": maximum}


def rebuild(e: ScalarExpr, fn) -> ScalarExpr:
    """Bottom-up map: ``fn(node_with_rebuilt_children)``."""
    if isinstance(e, (Const, Var)):
        return fn(e)
    if isinstance(e, Unary):
        a = rebuild(e.arg, fn)
        return fn(neg(a) if e.op == "neg" else func(e.op, a))
    if isinstance(e, Binary):
        return fn(_BUILD[e.op](rebuild(e.left, fn), rebuild(e.right, fn)))
    if isinstance(e, Pow):
        return fn(power(rebuild(e.base, fn), e.exponent))
    if isinstance(e, Select):
        return fn(Select(rebuild(e.cond, fn), rebuild(e.pos, fn), rebuild(e.neg, fn)))
    raise TypeError(type(e))


def walk(e: ScalarExpr):
    """Pre-order iteration over all nodes."""
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, Unary):
            stack.append(n.arg)
        elif isinstance(n, Binary):
            stack.extend((n.right, n.left))
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, Select):
            stack.extend((n.neg, n.pos, n.cond))


def substitute(e: ScalarExpr, mapping: dict) -> ScalarExpr:
    """Replace variables: ``mapping[i]`` is the expression for ``x_{i+1}``."""
    return rebuild(e, lambda n: mapping.get(n.index, n) if isinstance(n, Var) else n)


# differentiation --------------------------------------------------------------


def partial(e: ScalarExpr, i: int) -> ScalarExpr:
    """Exact symbolic partial derivative with respect to the 0-based variable ``i``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == i else ZERO
    if isinstance(e, Pow):
        du = partial(e.base, i)
        if _is(du, 0.0):
            return ZERO
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), du)
    if isinstance(e, Select):
        return Select(e.cond, partial(e.pos, i), partial(e.neg, i))
    if isinstance(e, Unary):
        u = e.arg
        if e.op == "sign":
            # zero off the switching surface, still undefined on it
            return Select(u, ZERO, ZERO)
        du = partial(u, i)
        if _is(du, 0.0):
            return ZERO
        if e.op == "neg":
            return neg(du)
        if e.op == "sin":
            return mul(func("cos", u), du)
        if e.op == "cos":
            return neg(mul(func("sin", u), du))
        if e.op == "exp":
            return mul(e, du)
        if e.op == "sqrt":
            return div(du, mul(Const(2.0), e))
        if e.op == "abs":
            return mul(Unary("sign", u), du)
        raise TypeError(e.op)
    if isinstance(e, Binary):
        a, b = e.left, e.right
        if e.op == "add":
            return add(partial(a, i), partial(b, i))
        if e.op == "sub":
            return sub(partial(a, i), partial(b, i))
        if e.op == "mul":
            return add(mul(partial(a, i), b), mul(a, partial(b, i)))
        if e.op == "div":
            da, db = partial(a, i), partial(b, i)
            return sub(div(da, b), div(mul(a, db), power(b, 2)))
        da, db = partial(a, i), partial(b, i)
        if da == db:
            # derivative agrees on both branches; the kink is invisible here
            return da
        if e.op == "max":
            return Select(sub(a, b), da, db)
        if e.op == "min":
            return Select(sub(b, a), da, db)
    raise TypeError(type(e))


def kink_argument(e: ScalarExpr):
    """Switching function of an abs/min/max node (positive on the first branch)."""
    if isinstance(e, Unary) and e.op == "abs":
        return e.arg
    if isinstance(e, Binary) and e.op == "max":
        return sub(e.left, e.right)
    if isinstance(e, Binary) and e.op == "min":
        return sub(e.right, e.left)
    return None


def has_kinks(e: ScalarExpr) -> bool:
    return any(kink_argument(n) is not None for n in walk(e))


# numpy tree walk ---------------------------------------------------------------

_NP_UNARY = {"neg": np.negative, "sin": np.sin, "cos": np.cos, "exp": np.exp,
             "sqrt": np.sqrt, "abs": np.abs}
_NP_BINARY = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide,
              "min": np.minimum, "max": np.maximum}


def _eval_np(e, X):
    if isinstance(e, Const):
        return np.full(X.shape[0], e.value)
    if isinstance(e, Var):
        return X[:, e.index]
    if isinstance(e, Unary):
        a = _eval_np(e.arg, X)
        if e.op == "sign":
            if np.any(a == 0.0):
                raise KinkEvaluation(f"sign({to_text(e.arg)}) evaluated at its kink")
            return np.sign(a)
        return _NP_UNARY[e.op](a)
    if isinstance(e, Binary):
        return _NP_BINARY[e.op](_eval_np(e.left, X), _eval_np(e.right, X))
    if isinstance(e, Pow):
        b = _eval_np(e.base, X)
        if e.exponent < 0:
            return 1.0 / b ** (-e.exponent)
        return b**e.exponent
    if isinstance(e, Select):
        c = _eval_np(e.cond, X)
        if np.any(c == 0.0):
            raise KinkEvaluation(f"branch switch {to_text(e.cond)} evaluated at its kink")
        return np.where(c > 0.0, _eval_np(e.pos, X), _eval_np(e.neg, X))
    raise TypeError(type(e))


# postfix programs ----------------------------------------------------------------

_UNARY_OPS = {"neg": op.NEG, "sin": op.SIN, "cos": op.COS, "exp": op.EXP,
              "sqrt": op.SQRT, "abs": op.ABS, "sign": op.SIGN}
_BINARY_OPS = {"add": op.ADD, "sub": op.SUB, "mul": op.MUL, "div": op.DIV,
               "min": op.MIN, "max": op.MAX}


def _emit(e, ops, args):
    """Append postfix code for ``e``; returns the stack depth it needs."""
    if isinstance(e, Const):
        ops.append(op.CONST)
        args.append(e.value)
        return 1
    if isinstance(e, Var):
        ops.append(op.VAR)
        args.append(float(e.index))
        return 1
    if isinstance(e, Unary):
        d = _emit(e.arg, ops, args)
        ops.append(_UNARY_OPS[e.op])
        args.append(0.0)
        return d
    if isinstance(e, Pow):
        d = _emit(e.base, ops, args)
        ops.append(op.POW)
        args.append(float(e.exponent))
        return d
    if isinstance(e, Binary):
        d1 = _emit(e.left, ops, args)
        d2 = _emit(e.right, ops, args)
        ops.append(_BINARY_OPS[e.op])
        args.append(0.0)
        return max(d1, d2 + 1)
    if isinstance(e, Select):
        d1 = _emit(e.cond, ops, args)
        d2 = _emit(e.pos, ops, args)
        d3 = _emit(e.neg, ops, args)
        ops.append(op.SELECT)
        args.append(0.0)
        return max(d1, d2 + 1, d3 + 2)
    raise TypeError(type(e))


class Program:
    """Concatenated postfix code for a list of expressions."""

    def __init__(self, ops, args, starts, depth):
        self.ops = np.asarray(ops, dtype=np.int32)
        self.args = np.asarray(args, dtype=np.float64)
        self.starts = np.asarray(starts, dtype=np.int32)
        self.depth = int(depth)
        self._stack = np.zeros(max(self.depth, 1), dtype=np.float64)

    @classmethod
    def build(cls, exprs: Sequence[ScalarExpr]) -> "Program":
        ops, args, starts, depth = [], [], [0], 1
        for e in exprs:
            depth = max(depth, _emit(e, ops, args))
            starts.append(len(ops))
        return cls(ops, args, starts, depth)

    def run(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        out = np.empty(len(self.starts) - 1, dtype=np.float64)
        err = _kernels.eval_programs(self.ops, self.args, self.starts, x, self._stack, out)
        raise_for_code(err)
        return out


def raise_for_code(err: int, where: str = ""):
    if err == _kernels.OK:
        return
    if err == _kernels.ERR_KINK:
        raise KinkEvaluation("evaluation on a kink of abs/min/max" + where)
    if err == _kernels.ERR_NONFINITE:
        raise NonFinite("non-finite value" + where)
    if err == _kernels.ERR_EMPTY:
        raise EmptyPieceSet("no piece owns the point" + where)
    raise RuntimeError(f"kernel error code {err}")


# text form ------------------------------------------------------------------------


def _fmt_const(v: float) -> str:
    s = repr(float(v))
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_text(e: ScalarExpr) -> str:
    """Infix text that :func:`lieclf.parser.parse_expr` maps back to the same tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        if e.op in ("min", "max"):
            return f"{e.op}({to_text(e.left)}, {to_text(e.right)})"
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.op]
        return f"({to_text(e.left)} {sym} {to_text(e.right)})"
    if isinstance(e, Pow):
        return f"({to_text(e.base)}^{e.exponent})"
    if isinstance(e, Select):
        return f"select({to_text(e.cond)}, {to_text(e.pos)}, {to_text(e.neg)})"
    raise TypeError(type(e))


# vector fields ----------------------------------------------------------------------


@dataclass(frozen=True)
class VectorFieldDef:
    dim: int
    components: tuple

    def __post_init__(self):
        comps = tuple(_lift(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.dim:
            raise ValueError(f"field has {len(comps)} components, dim is {self.dim}")
        for c in comps:
            if c.max_var() >= self.dim:
                raise ValueError(f"{to_text(c)} references a variable beyond x{self.dim}")

    @classmethod
    def from_text(cls, texts: Sequence[str]) -> "VectorFieldDef":
        from .parser import parse_expr

        return cls(len(texts), tuple(parse_expr(t, len(texts)) for t in texts))

    @cached_property
    def program(self) -> Program:
        return Program.build(self.components)

    @cached_property
    def jacobian_exprs(self) -> tuple:
        return tuple(tuple(partial(c, j) for j in range(self.dim)) for c in self.components)

    @cached_property
    def jacobian_program(self) -> Program:
        return Program.build([d for row in self.jacobian_exprs for d in row])

    def __call__(self, x) -> np.ndarray:
        return eval_field(self, x)

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([c.evaluate_batch(X) for c in self.components], axis=1)

    def has_kinks(self) -> bool:
        return any(has_kinks(c) for c in self.components)

    def text(self) -> list:
        return [to_text(c) for c in self.components]

    def is_zero(self) -> bool:
        return all(_is(c, 0.0) for c in self.components)


@dataclass(frozen=True)
class Piece:
    guards: tuple  # strict conditions g(x) > 0
    field: VectorFieldDef

    def contains(self, x, tol: float = BOUNDARY_TOL) -> bool:
        """Closed-region membership."""
        return all(g.evaluate(x) >= -tol for g in self.guards)

    def contains_open(self, x) -> bool:
        return all(g.evaluate(x) > 0.0 for g in self.guards)


@dataclass(frozen=True)
class PiecewiseVectorFieldDef:
    dim: int
    pieces: tuple

    def __post_init__(self):
        pieces = tuple(p if isinstance(p, Piece) else Piece(tuple(p[0]), p[1]) for p in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise ValueError("piecewise field needs at least one piece")
        for p in pieces:
            if p.field.dim != self.dim:
                raise ValueError("piece dimension mismatch")

    def owning_pieces(self, x, tol: float = BOUNDARY_TOL) -> list:
        return [p for p in self.pieces if p.contains(x, tol)]

    def __call__(self, x) -> np.ndarray:
        return eval_field(self, x)

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full((X.shape[0], self.dim), np.nan)
        done = np.zeros(X.shape[0], dtype=bool)
        for p in self.pieces:
            mask = ~done
            for g in p.guards:
                mask &= g.evaluate_batch(X) >= -BOUNDARY_TOL
            if mask.any():
                out[mask] = p.field.evaluate_batch(X[mask])
                done |= mask
        if not done.all():
            raise EmptyPieceSet("no piece owns some of the points")
        return out

    def has_kinks(self) -> bool:
        return any(p.field.has_kinks() for p in self.pieces)


def as_piecewise(f) -> PiecewiseVectorFieldDef:
    """Piece decomposition; abs/min/max nodes are split on their switching functions."""
    if isinstance(f, PiecewiseVectorFieldDef):
        if not f.has_kinks():
            return f
        pieces = []
        for p in f.pieces:
            for q in split_kinks(p.field).pieces:
                pieces.append(Piece(p.guards + q.guards, q.field))
        return PiecewiseVectorFieldDef(f.dim, tuple(pieces))
    return split_kinks(f)


def _innermost_kink(e):
    for n in walk(e):
        g = kink_argument(n)
        if g is not None and not has_kinks(g):
            return g
    return None


def _resolve(e, g, side):
    """Replace every kink node whose switching function is +-g by its active branch."""
    ng = neg(g)

    def fix(n):
        arg = kink_argument(n)
        if arg is None:
            return n
        if arg == g:
            positive = side > 0
        elif arg == ng:
            positive = side < 0
        else:
            return n
        if isinstance(n, Unary):
            return n.arg if positive else neg(n.arg)
        return n.left if positive else n.right

    return rebuild(e, fix)


def split_kinks(f: VectorFieldDef) -> PiecewiseVectorFieldDef:
    todo = [((), f.components)]
    done = []
    while todo:
        guards, comps = todo.pop()
        g = None
        for c in comps:
            g = _innermost_kink(c)
            if g is not None:
                break
        if g is None:
            done.append(Piece(guards, VectorFieldDef(f.dim, comps)))
            continue
        for side in (-1, 1):
            todo.append((guards + ((g if side > 0 else neg(g)),),
                         tuple(_resolve(c, g, side) for c in comps)))
    done.reverse()
    return PiecewiseVectorFieldDef(f.dim, tuple(done))


def eval_field(f, x) -> np.ndarray:
    """Component-wise evaluation of a (piecewise) vector field at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise ValueError(f"point has shape {x.shape}, field dim is {f.dim}")
    if isinstance(f, PiecewiseVectorFieldDef):
        for p in f.pieces:
            if p.contains(x):
                return p.field.program.run(x)
        raise EmptyPieceSet(f"no piece owns {x.tolist()}")
    return f.program.run(x)


def jacobian(f, x) -> np.ndarray:
    """Matrix of evaluated symbolic partials, ``J[i, j] = d f_i / d x_j``."""
    x = np.asarray(x, dtype=float)
    if isinstance(f, PiecewiseVectorFieldDef):
        for p in f.pieces:
            if p.contains(x):
                return jacobian(p.field, x)
        raise EmptyPieceSet(f"no piece owns {x.tolist()}")
    return f.jacobian_program.run(x).reshape(f.dim, f.dim)


def fd_check(f, x, h: float = 1e-5) -> float:
    """Max abs discrepancy between the symbolic Jacobian and central differences."""
    x = np.asarray(x, dtype=float)
    J = jacobian(f, x)
    fd = np.empty_like(J)
    for j in range(f.dim):
        e = np.zeros(f.dim)
        e[j] = h
        xp, xm = x + e, x - e
        # divide by the representable step so linear fields difference exactly
        fd[:, j] = (eval_field(f, xp) - eval_field(f, xm)) / (xp[j] - xm[j])
    return float(np.max(np.abs(J - fd)))
