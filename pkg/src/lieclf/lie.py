"""Formal iterated brackets, exact bracket fields and set-valued degree-2 brackets."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.stats import qmc

from .errors import DegreeError, EmptyPieceSet, EvaluationError
from .expr import (BOUNDARY_TOL, PiecewiseVectorFieldDef, VectorFieldDef, add, as_piecewise,
                   eval_field, mul, neg, partial, sub)


class FormalBracket:
    """Binary bracket tree over generator indices (index 0 denotes the drift)."""

    __slots__ = ()

    @property
    def degree(self) -> int:
        raise NotImplementedError

    @property
    def r(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class Leaf(FormalBracket):
    index: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("leaf sign must be +1 or -1")
        if self.index < 0:
            raise ValueError("generator index must be nonnegative")

    @property
    def degree(self) -> int:
        return 1

    @property
    def r(self) -> int:
        return 1

    def key(self):
        return (1, (self.index, -self.sign))

    def __str__(self):
        return ("-" if self.sign < 0 else "") + f"f{self.index}"


@dataclass(frozen=True)
class Node(FormalBracket):
    left: FormalBracket
    right: FormalBracket

    @cached_property
    def degree(self) -> int:
        return self.left.degree + self.right.degree

    @cached_property
    def r(self) -> int:
        return 2 * (self.left.r + self.right.r)

    def key(self):
        return (self.degree, self.left.key(), self.right.key())

    def __str__(self):
        return f"[{self.left},{self.right}]"


def bracket(a, b) -> Node:
    """``[a, b]``; integers are promoted to positive leaves."""
    a = Leaf(a) if isinstance(a, int) else a
    b = Leaf(b) if isinstance(b, int) else b
    return Node(a, b)


def leaves(B: FormalBracket) -> list:
    if isinstance(B, Leaf):
        return [B]
    return leaves(B.left) + leaves(B.right)


def enumerate_brackets(m: int, k: int) -> list:
    """All brackets over generators ``1..m`` of degree at most ``k``.

    Degree 1 lists ``+f_i, -f_i``. Higher degrees list one representative per
    antisymmetry class, ``[A, B]`` with ``key(A) < key(B)``; ``[B, B]`` is dropped.
    """
    if k < 1:
        raise DegreeError("k must be at least 1")
    if m < 1:
        raise ValueError("need at least one generator")
    by_deg = {1: [Leaf(i) for i in range(1, m + 1)]}
    for d in range(2, k + 1):
        out = []
        for d1 in range(1, d):
            for a in by_deg[d1]:
                for b in by_deg[d - d1]:
                    if a.key() < b.key():
                        out.append(Node(a, b))
        out.sort(key=lambda B: B.key())
        by_deg[d] = out
    result = []
    for i in range(1, m + 1):
        result += [Leaf(i, 1), Leaf(i, -1)]
    for d in range(2, k + 1):
        result += by_deg[d]
    return result


def lie_bracket_field(X: VectorFieldDef, Y: VectorFieldDef) -> VectorFieldDef:
    """Symbolic ``[X, Y] = DY.X - DX.Y``."""
    n = X.dim
    comps = []
    for i in range(n):
        acc = None
        for j in range(n):
            term = sub(mul(partial(Y.components[i], j), X.components[j]),
                       mul(partial(X.components[i], j), Y.components[j]))
            acc = term if acc is None else add(acc, term)
        comps.append(acc)
    return VectorFieldDef(n, tuple(comps))


def _plain(f, what):
    if isinstance(f, PiecewiseVectorFieldDef):
        raise TypeError(f"{what} is piecewise; use the set-valued bracket")
    return f


def bracket_field(B: FormalBracket, fields, cache: dict | None = None) -> VectorFieldDef:
    """Vector field of ``B``; ``fields[i]`` is generator ``i`` (``fields[0]`` the drift)."""
    if cache is not None and B in cache:
        return cache[B]
    if isinstance(B, Leaf):
        f = _plain(fields[B.index], f"field {B.index}")
        out = f if B.sign > 0 else VectorFieldDef(f.dim, tuple(neg(c) for c in f.components))
    else:
        out = lie_bracket_field(bracket_field(B.left, fields, cache),
                                bracket_field(B.right, fields, cache))
    if cache is not None:
        cache[B] = out
    return out


def _fields_of(sys_or_fields):
    if hasattr(sys_or_fields, "generators"):
        sysd = sys_or_fields
        return [sysd.drift, *sysd.generators], sysd._cache
    fl = list(sys_or_fields)
    return [None, *fl], None


def eval_bracket(B: FormalBracket, fields, x) -> np.ndarray:
    """Exact value of ``B`` at ``x``.

    ``fields`` is either a :class:`~lieclf.system.SystemDef` or a list of
    generators ``f_1..f_m`` (then leaf index ``i`` refers to ``fields[i-1]``).
    """
    fl, cache = _fields_of(fields)
    return eval_field(bracket_field(B, fl, cache), x)


# set-valued brackets -------------------------------------------------------------


@dataclass(frozen=True)
class BracketValueSet:
    """Convex hull of ``vertices`` (a ``(q, n)`` array of extreme points)."""

    vertices: np.ndarray

    def support(self, p) -> float:
        """``sup_{w in set} <p, w>``."""
        return float(np.max(self.vertices @ np.asarray(p, dtype=float)))

    def negated(self) -> "BracketValueSet":
        return BracketValueSet(-self.vertices)

    def interval(self, i: int) -> tuple:
        c = self.vertices[:, i]
        return float(c.min()), float(c.max())


_PROBE_CACHE: dict = {}
_SPLIT_CACHE: dict = {}
_PAIR_CACHE: dict = {}


def _pieces(f) -> PiecewiseVectorFieldDef:
    hit = _SPLIT_CACHE.get(id(f))
    if hit is None or hit[0] is not f:
        hit = (f, as_piecewise(f))
        _SPLIT_CACHE[id(f)] = hit
    return hit[1]


def _pair_bracket(P, Q) -> VectorFieldDef:
    hit = _PAIR_CACHE.get((id(P), id(Q)))
    if hit is None or hit[0] is not P or hit[1] is not Q:
        hit = (P, Q, lie_bracket_field(P.field, Q.field))
        _PAIR_CACHE[(id(P), id(Q))] = hit
    return hit[2]


def _probe_directions(n: int) -> np.ndarray:
    """Fixed probe directions: coordinate axes (both signs) plus a Halton cloud."""
    if n not in _PROBE_CACHE:
        eye = np.eye(n)
        cloud = 2.0 * qmc.Halton(d=n, scramble=False).random(65)[1:] - 1.0
        cloud /= np.linalg.norm(cloud, axis=1, keepdims=True)
        corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T if n <= 6 else np.empty((0, n))
        if len(corners):
            corners /= np.sqrt(n)
        _PROBE_CACHE[n] = np.vstack([eye, -eye, corners, cloud])
    return _PROBE_CACHE[n]


def _open_mask(P, Y) -> np.ndarray:
    """Which probe points lie in the open region of piece ``P``."""
    ok = np.ones(len(Y), dtype=bool)
    with np.errstate(all="ignore"):
        for g in P.guards:
            try:
                ok &= g.evaluate_batch(Y) > 0.0
            except EvaluationError:
                ok &= np.array([_safe_positive(g, y) for y in Y])
    return ok


def _safe_positive(g, y) -> bool:
    try:
        return g.evaluate(y) > 0.0
    except EvaluationError:
        return False


def _probe_points(x) -> np.ndarray:
    rad = 1e-6 * max(1.0, float(np.linalg.norm(x)))
    return x + rad * _probe_directions(len(x))


def extreme_points(V, tol: float = 1e-12) -> np.ndarray:
    """Drop duplicates and points lying in the convex hull of the others."""
    V = np.asarray(V, dtype=float)
    uniq = []
    for v in V:
        if not any(np.max(np.abs(v - u)) <= tol * max(1.0, np.max(np.abs(u))) for u in uniq):
            uniq.append(v)
    if len(uniq) <= 2:
        return np.array(uniq)
    U = np.array(uniq)
    D = U[1:] - U[0]
    if np.linalg.matrix_rank(D, tol=tol * max(1.0, np.abs(U).max())) <= 1:
        # collinear: the extremes along the common line
        axis = D[np.argmax(np.linalg.norm(D, axis=1))]
        proj = (U - U[0]) @ axis
        return U[[int(np.argmin(proj)), int(np.argmax(proj))]]
    keep = []
    for i, v in enumerate(uniq):
        others = np.array([u for j, u in enumerate(uniq) if j != i])
        q = len(others)
        A_eq = np.vstack([others.T, np.ones((1, q))])
        b_eq = np.concatenate([v, [1.0]])
        res = linprog(np.zeros(q), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * q, method="highs")
        if res.status != 0:
            keep.append(v)
    return np.array(keep)


def eval_bracket_setvalued(i: int, j: int, fields, x) -> BracketValueSet:
    """Set-valued ``[f_i, f_j]`` at ``x`` for piecewise-smooth generators.

    Vertices are the classical brackets of every pair of pieces whose closed
    regions contain ``x`` and whose open regions meet arbitrarily near ``x``.
    """
    x = np.asarray(x, dtype=float)
    fl, _ = _fields_of(fields)
    fi, fj = fl[i], fl[j]
    if fi is None or fj is None:
        raise ValueError("set-valued brackets involve generators only")
    if i == j:
        return BracketValueSet(np.zeros((1, fi.dim)))
    Pi = _pieces(fi).owning_pieces(x, BOUNDARY_TOL)
    Pj = _pieces(fj).owning_pieces(x, BOUNDARY_TOL)
    if not Pi or not Pj:
        raise EmptyPieceSet(f"no piece owns {x.tolist()}")
    verts = []
    if len(Pi) == 1 and len(Pj) == 1:
        pairs = [(Pi[0], Pj[0])]
    else:
        Y = _probe_points(x)
        mi = [_open_mask(P, Y) for P in Pi]
        mj = [_open_mask(Q, Y) for Q in Pj]
        pairs = [(P, Q) for P, a in zip(Pi, mi) for Q, b in zip(Pj, mj) if np.any(a & b)]
    for P, Q in pairs:
        verts.append(eval_field(_pair_bracket(P, Q), x))
    if not verts:
        raise EmptyPieceSet(f"no pair of pieces meets near {x.tolist()}")
    return BracketValueSet(extreme_points(verts))
