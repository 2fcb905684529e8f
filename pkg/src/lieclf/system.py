"""Control-affine systems ``y' = f0(y) + sum_i a_i f_i(y)`` and their kernel layout."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegreeError
from .expr import PiecewiseVectorFieldDef, Program, VectorFieldDef, eval_field

SMOOTH = "smooth"
LIPSCHITZ = "lipschitz"


@dataclass(frozen=True)
class KernelLayout:
    """Flat arrays describing every field for the kernel integrator.

    Field 0 is the drift (no pieces when absent), fields 1..m the generators.
    """

    ops: np.ndarray
    args: np.ndarray
    prog_start: np.ndarray
    field_piece_start: np.ndarray
    piece_guard_start: np.ndarray
    guard_prog: np.ndarray
    piece_comp: np.ndarray
    depth: int

    def arrays(self):
        return (self.ops, self.args, self.prog_start, self.field_piece_start,
                self.piece_guard_start, self.guard_prog, self.piece_comp, self.depth)


def build_layout(dim: int, fields: list) -> KernelLayout:
    exprs = []
    fps, pgs, gp, pc = [0], [0], [], []
    for f in fields:
        if f is None:
            pieces = []
        elif isinstance(f, PiecewiseVectorFieldDef):
            pieces = [(p.guards, p.field) for p in f.pieces]
        else:
            pieces = [((), f)]
        for guards, vf in pieces:
            for g in guards:
                gp.append(len(exprs))
                exprs.append(g)
            pgs.append(len(gp))
            row = []
            for c in vf.components:
                row.append(len(exprs))
                exprs.append(c)
            pc.append(row)
        fps.append(len(pc))
    prog = Program.build(exprs)
    i32 = np.int32
    return KernelLayout(
        ops=prog.ops, args=prog.args, prog_start=prog.starts,
        field_piece_start=np.asarray(fps, dtype=i32),
        piece_guard_start=np.asarray(pgs, dtype=i32),
        guard_prog=np.asarray(gp, dtype=i32) if gp else np.zeros(1, dtype=i32),
        piece_comp=np.asarray(pc, dtype=i32).reshape(len(pc), dim) if pc
        else np.zeros((1, dim), dtype=i32),
        depth=prog.depth,
    )


@dataclass(frozen=True)
class SystemDef:
    """Control system with generators ``f_1..f_m`` and an optional drift ``f_0``.

    Parameters
    ----------
    dim : int
        State dimension.
    generators : sequence of VectorFieldDef or PiecewiseVectorFieldDef
    drift : VectorFieldDef, optional
    k : int
        Largest bracket degree used by Hamiltonians and feedback.
    smoothness : {"smooth", "lipschitz"}
        ``"lipschitz"`` switches degree-2 brackets to their set-valued form.
    eps_drift : float
        Tolerance for the test ``f_0(x) = 0`` gating drift brackets.
    """

    dim: int
    generators: tuple
    drift: VectorFieldDef | None = None
    k: int = 1
    smoothness: str = SMOOTH
    eps_drift: float = 1e-9
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ValueError("at least one generator required")
        for f in self.generators + ((self.drift,) if self.drift is not None else ()):
            if f.dim != self.dim:
                raise ValueError(f"field dimension {f.dim} differs from system dimension {self.dim}")
        if self.smoothness not in (SMOOTH, LIPSCHITZ):
            raise ValueError(f"unknown smoothness class {self.smoothness!r}")
        if self.k < 1:
            raise DegreeError("k must be at least 1")
        if self.smoothness == LIPSCHITZ and self.k > 2:
            raise DegreeError("set-valued brackets are defined for degree 2 only; k must be <= 2")
        if self.drift is not None and self.k > 2:
            raise DegreeError("systems with drift support k <= 2")
        if self.drift is not None and isinstance(self.drift, PiecewiseVectorFieldDef):
            raise ValueError("drift must be a plain vector field")

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def has_drift(self) -> bool:
        return self.drift is not None

    def with_k(self, k: int) -> "SystemDef":
        return SystemDef(self.dim, self.generators, self.drift, k, self.smoothness, self.eps_drift)

    def field(self, i: int):
        """Field by index: 0 is the drift, ``1..m`` the generators."""
        if i == 0:
            if self.drift is None:
                raise ValueError("system has no drift")
            return self.drift
        return self.generators[i - 1]

    def eval(self, i: int, x) -> np.ndarray:
        return eval_field(self.field(i), x)

    @cached_property
    def layout(self) -> KernelLayout:
        return build_layout(self.dim, [self.drift, *self.generators])
