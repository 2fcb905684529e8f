"""Degree-h Hamiltonians: smooth, set-valued (Lipschitz) and drift variants.

Every Hamiltonian here is a finite min over *directions* of the support value
``sup_{w in v(x)} <p, w>``. A direction is a signed generator, a signed
bracket, a set-valued degree-2 bracket, or one of the drift combinations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegreeError
from .expr import VectorFieldDef, add, eval_field
from .lie import (FormalBracket, Leaf, Node, bracket_field, enumerate_brackets,
                  eval_bracket_setvalued)
from .system import LIPSCHITZ, SystemDef

__all__ = ["Direction", "SystemDef", "directions", "direction_values", "hamiltonian",
           "hamiltonian_batch", "hamiltonian_chain_check", "support_values"]

FIELD = "field"            # +-f_i, smooth or piecewise generator
BRACKET = "bracket"        # +-B for a smooth bracket of degree >= 2
SET_BRACKET = "set_bracket"
DRIFT = "drift"            # f_0 or f_0 +- f_i
DRIFT_BRACKET = "drift_bracket"


@dataclass(frozen=True)
class Direction:
    """One element of the family whose min defines ``H^(h)``.

    ``bracket`` is the formal bracket whose (possibly set-valued) value equals
    this direction; in drift systems leaves mean ``f_0 +- f_i`` and ``Leaf(0)``
    is the drift alone.
    """

    label: str
    degree: int
    kind: str
    bracket: FormalBracket
    gated: bool = False


def _swap(B: FormalBracket) -> FormalBracket:
    return Node(B.right, B.left)


def directions(sys: SystemDef, h: int) -> list:
    """Directions of degree at most ``h`` in a fixed, deterministic order."""
    if not 1 <= h <= sys.k:
        raise DegreeError(f"degree {h} outside 1..{sys.k}")
    if ("directions", h) in sys._cache:
        return sys._cache[("directions", h)]
    out = []
    m = sys.m
    if sys.has_drift:
        out.append(Direction("f0", 1, DRIFT, Leaf(0)))
        for i in range(1, m + 1):
            for s in (1, -1):
                out.append(Direction(f"f0{'+' if s > 0 else '-'}f{i}", 1, DRIFT, Leaf(i, s)))
        if h >= 2:
            for i in range(1, m + 1):
                for B in (Node(Leaf(0), Leaf(i)), Node(Leaf(i), Leaf(0))):
                    out.append(Direction(str(B), 2, DRIFT_BRACKET, B, gated=True))
            for j in range(1, m + 1):
                for l in range(j + 1, m + 1):
                    for B in (Node(Leaf(j), Leaf(l)), Node(Leaf(l), Leaf(j))):
                        out.append(Direction(str(B), 2, DRIFT_BRACKET, B, gated=True))
    else:
        for B in enumerate_brackets(m, h):
            if isinstance(B, Leaf):
                out.append(Direction(str(B), 1, FIELD, B))
            elif sys.smoothness == LIPSCHITZ:
                out.append(Direction(str(B), 2, SET_BRACKET, B))
                out.append(Direction(str(_swap(B)), 2, SET_BRACKET, _swap(B)))
            else:
                out.append(Direction(str(B), B.degree, BRACKET, B))
                out.append(Direction(str(_swap(B)), B.degree, BRACKET, _swap(B)))
    sys._cache[("directions", h)] = out
    return out


def _fields(sys):
    return [sys.drift, *sys.generators]


def _smooth_field(sys, d: Direction):
    """Symbolic field of a non-set-valued direction."""
    key = ("dirfield", d)
    if key in sys._cache:
        return sys._cache[key]
    fl = _fields(sys)
    B = d.bracket
    if d.kind == DRIFT:
        f0 = sys.drift
        if B.index == 0:
            vf = f0
        else:
            g = bracket_field(B, fl, sys._cache)
            vf = VectorFieldDef(sys.dim, tuple(add(a, b) for a, b in zip(f0.components, g.components)))
    else:
        vf = bracket_field(B, fl, sys._cache)
    sys._cache[key] = vf
    return vf


def drift_vanishes(sys: SystemDef, x) -> bool:
    return bool(np.linalg.norm(eval_field(sys.drift, x)) <= sys.eps_drift)


def direction_values(sys: SystemDef, d: Direction, x) -> np.ndarray:
    """Vertices ``(q, n)`` of the direction's value set at ``x``."""
    if d.kind == SET_BRACKET:
        return eval_bracket_setvalued(d.bracket.left.index, d.bracket.right.index, sys, x).vertices
    if d.kind == FIELD:
        f = sys.generators[d.bracket.index - 1]
        return (d.bracket.sign * eval_field(f, x))[None, :]
    return eval_field(_smooth_field(sys, d), x)[None, :]


def support_values(sys: SystemDef, h: int, x, pset) -> list:
    """``[(direction, worst-case pairing)]`` for every active direction of degree <= h.

    The pairing is ``max_{p in pset} sup_{w} <p, w>``; gated drift brackets
    are skipped unless ``|f_0(x)| <= eps_drift``.
    """
    x = np.asarray(x, dtype=float)
    P = np.atleast_2d(np.asarray(pset, dtype=float))
    gate = None
    out = []
    for d in directions(sys, h):
        if d.gated:
            if gate is None:
                gate = drift_vanishes(sys, x)
            if not gate:
                continue
        V = direction_values(sys, d, x)
        out.append((d, float(np.max(V @ P.T))))
    return out


def hamiltonian(sys: SystemDef, h: int, x, p) -> float:
    """``H^(h)(x, p)``: min over directions of degree <= h of the support value."""
    return min(v for _, v in support_values(sys, h, x, [p]))


def hamiltonian_chain_check(sys: SystemDef, x, p, slack: float = 1e-12) -> list:
    """``[H^(1), ..., H^(k)]``; raises AssertionError if the chain ever increases."""
    chain = [hamiltonian(sys, h, x, p) for h in range(1, sys.k + 1)]
    for a, b in zip(chain, chain[1:]):
        if b > a + slack:
            raise AssertionError(f"Hamiltonian chain increases: {chain}")
    return chain


def hamiltonian_batch(sys: SystemDef, h: int, X, P) -> np.ndarray:
    """Row-wise ``H^(h)(X[i], P[i])`` using numpy evaluation of the directions."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    N = X.shape[0]
    best = np.full(N, np.inf)
    gate = None
    for d in directions(sys, h):
        if d.kind == SET_BRACKET:
            vals = np.array([
                eval_bracket_setvalued(d.bracket.left.index, d.bracket.right.index, sys, x)
                .support(p) for x, p in zip(X, P)])
        elif d.kind == FIELD:
            V = sys.generators[d.bracket.index - 1].evaluate_batch(X)
            vals = d.bracket.sign * np.einsum("ij,ij->i", V, P)
        else:
            V = _smooth_field(sys, d).evaluate_batch(X)
            vals = np.einsum("ij,ij->i", V, P)
        if d.gated:
            if gate is None:
                gate = np.linalg.norm(sys.drift.evaluate_batch(X), axis=1) <= sys.eps_drift
            vals = np.where(gate, vals, np.inf)
        best = np.minimum(best, vals)
    return best
