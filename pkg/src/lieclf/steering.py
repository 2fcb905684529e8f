"""Control words for bracket directions, degree-k feedback and the descent loop."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import MaxStepsExceeded, NoDescentDirection, StepFailure
from .expr import raise_for_code
from .hamiltonian import (BRACKET, DRIFT, DRIFT_BRACKET, FIELD, SET_BRACKET, Direction,
                          direction_values, support_values)
from .lie import FormalBracket, Leaf, Node
from .system import LIPSCHITZ, SystemDef

DEFAULT_SUBSTEPS = 32


@dataclass(frozen=True)
class ControlWord:
    """Piecewise-constant control schedule.

    ``segments`` holds ``(control, fraction)`` pairs where ``control`` is a
    signed generator index (``0``: no control, drift only). Executing the word
    for total time ``t`` moves ``x`` by about ``coefficient * v(x) * t**degree``.
    """

    segments: tuple
    degree: int
    coefficient: float

    @property
    def r(self) -> int:
        return len(self.segments)

    @property
    def controls(self) -> list:
        return [c for c, _ in self.segments]

    def inverse(self) -> "ControlWord":
        """Reverse the segment order and negate every control."""
        return ControlWord(tuple((-c, f) for c, f in reversed(self.segments)),
                           self.degree, self.coefficient)

    def labels(self) -> list:
        out = []
        for c, _ in self.segments:
            out.append("0" if c == 0 else f"{'-' if c < 0 else ''}e{abs(c)}")
        return out


def _uniform(ctrls, degree, coefficient) -> ControlWord:
    r = len(ctrls)
    return ControlWord(tuple((int(c), 1.0 / r) for c in ctrls), degree, coefficient)


def _controls(B: FormalBracket) -> list:
    if isinstance(B, Leaf):
        return [B.sign * B.index]
    a, b = _controls(B.left), _controls(B.right)
    return a + b + [-c for c in reversed(a)] + [-c for c in reversed(b)]


def word_for_bracket(B: FormalBracket) -> ControlWord:
    """Commutator word ``W(B1) W(B2) inv(W(B1)) inv(W(B2))`` with ``r(B)`` equal segments."""
    ctrls = _controls(B)
    assert len(ctrls) == B.r
    return _uniform(ctrls, B.degree, 1.0 / B.r**B.degree)


def word_for_drift_bracket(B: FormalBracket) -> ControlWord:
    """Words for systems with drift (the drift is active on every segment).

    ``[f0, fi]`` uses ``(-e_i, +e_i)`` and ``[fi, f0]`` uses ``(+e_i, -e_i)``,
    both moving by ``t**2/4`` times the bracket. ``[fj, fl]`` uses the balanced
    word ``(e_j, e_l, -e_j, -e_l, -e_j, -e_l, e_j, e_l)``, whose drift
    contributions cancel to second order; it moves by ``t**2/32`` times the bracket.
    """
    if isinstance(B, Leaf):
        return _uniform([B.sign * B.index], 1, 1.0)
    if not (isinstance(B.left, Leaf) and isinstance(B.right, Leaf)):
        raise ValueError("drift words exist for degree-2 brackets only")
    a, b = B.left.index, B.right.index
    if a == 0 and b != 0:
        return _uniform([-b, b], 2, 0.25)
    if b == 0 and a != 0:
        return _uniform([a, -a], 2, 0.25)
    if a == 0 or a == b:
        raise ValueError(f"no word for {B}")
    return _uniform([a, b, -a, -b, -a, -b, a, b], 2, 1.0 / 32.0)


def word_for_direction(sys: SystemDef, d: Direction) -> ControlWord:
    if sys.has_drift:
        return word_for_drift_bracket(d.bracket)
    return word_for_bracket(d.bracket)


# execution ---------------------------------------------------------------------------


@dataclass
class WordRun:
    endpoint: np.ndarray
    rows: np.ndarray      # (q, 1 + n): local time, state
    segs: np.ndarray      # (q,) segment index of each row


def _rows_per_segment(substeps: int, every: int) -> int:
    return sum(1 for k in range(substeps) if (k + 1) % every == 0 or k == substeps - 1)


def execute_word(sys: SystemDef, x, word: ControlWord, t: float,
                 substeps: int = DEFAULT_SUBSTEPS, record_every: int | None = None) -> WordRun:
    """Integrate the word for total time ``t`` with RK4, ``substeps`` per segment.

    Segment boundaries are hit exactly. With ``record_every`` the path is
    sampled every that many substeps (and at every segment end).
    """
    if t < 0:
        raise ValueError("duration must be nonnegative")
    x = np.array(x, dtype=np.float64)
    if t == 0.0:
        return WordRun(x, np.concatenate([[0.0], x])[None, :], np.zeros(1, dtype=np.int32))
    ctrl = np.array([c for c, _ in word.segments], dtype=np.int32)
    dur = np.array([f * t for _, f in word.segments], dtype=np.float64)
    every = record_every or substeps
    nrows = 1 + len(ctrl) * _rows_per_segment(substeps, every)
    out = np.zeros((nrows, 1 + sys.dim), dtype=np.float64)
    segs = np.zeros(nrows, dtype=np.int32)
    lay = sys.layout
    rows, err = _kernels.integrate_word(*lay.arrays(), ctrl, dur, int(sys.has_drift), x,
                                        int(substeps), int(every), out, segs)
    raise_for_code(err, " while integrating a control word")
    return WordRun(x, out[:rows], segs[:rows])


def direction_vector(sys: SystemDef, d: Direction, x) -> np.ndarray:
    """Value of a single-valued direction at ``x`` (first vertex otherwise)."""
    return direction_values(sys, d, x)[0]


def as_direction(sys: SystemDef, B: FormalBracket) -> Direction:
    if sys.has_drift:
        kind = DRIFT if isinstance(B, Leaf) else DRIFT_BRACKET
    else:
        if isinstance(B, Leaf):
            kind = FIELD
        elif sys.smoothness == LIPSCHITZ:
            kind = SET_BRACKET
        else:
            kind = BRACKET
    return Direction(str(B), B.degree, kind, B, gated=sys.has_drift and not isinstance(B, Leaf))


@dataclass
class AsymptoticResult:
    slope: float
    exact: bool
    order: int            # expected error order h + 1
    t: list
    errors: list
    direction: list       # (y(t_dir) - x) / (coefficient * t_dir**h)
    value: list           # symbolic value of the direction at x
    direction_error: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def asymptotic_order(sys: SystemDef, B, x, t_list=(0.1, 0.05, 0.025, 0.0125),
                     t_dir: float = 0.01, substeps: int = DEFAULT_SUBSTEPS,
                     exact_tol: float = 1e-12) -> AsymptoticResult:
    """Empirical order of ``|y(t) - x - coefficient*v(x)*t^h|`` as ``t -> 0``.

    When every error is at rounding level (``<= exact_tol``) the expansion is
    reproduced exactly by the integrator, the slope is undefined (reported as
    nan) and ``exact`` is True.
    """
    d = B if isinstance(B, Direction) else as_direction(sys, B)
    w = word_for_direction(sys, d)
    x = np.asarray(x, float)
    v = direction_vector(sys, d, x)
    h = w.degree
    errs = []
    for t in t_list:
        y = execute_word(sys, x, w, t, substeps).endpoint
        errs.append(float(np.linalg.norm(y - x - w.coefficient * v * t**h)))
    errs_a = np.array(errs)
    exact = bool(np.all(errs_a <= exact_tol))
    if exact or np.any(errs_a <= 0):
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(t_list), np.log(errs_a), 1)[0])
    y = execute_word(sys, x, w, t_dir, substeps).endpoint
    est = (y - x) / (w.coefficient * t_dir**h)
    rel = float(np.linalg.norm(est - v) / max(np.linalg.norm(v), 1.0))
    return AsymptoticResult(slope, exact, h + 1, list(t_list), errs, est.tolist(), v.tolist(), rel)


# feedback and descent ------------------------------------------------------------------


@dataclass(frozen=True)
class Feedback:
    direction: Direction
    degree: int
    pairing: float


def select_feedback(sys: SystemDef, x, pset, gamma_value: float) -> Feedback:
    """Lowest-degree direction with worst-case pairing ``<= -gamma``.

    Among qualifying directions of that degree the most negative pairing wins;
    ties go to the earliest direction in enumeration order.
    """
    best = None
    for d, val in support_values(sys, sys.k, x, pset):
        if val > -gamma_value:
            continue
        if best is None or d.degree < best.degree or (d.degree == best.degree and val < best.pairing):
            best = Feedback(d, d.degree, val)
    if best is None:
        raise NoDescentDirection(
            f"no direction of degree <= {sys.k} pairs below -gamma = {-gamma_value:.6g} "
            f"at {np.asarray(x).tolist()}")
    return best


@dataclass
class StepOptions:
    field_bound: float = 1.0
    substeps: int = DEFAULT_SUBSTEPS
    max_halvings: int = 40
    record_every: int = 8
    marginal: float = 0.1


@dataclass
class StepResult:
    x: np.ndarray
    t: float
    degree: int
    direction: Direction
    word: ControlWord
    u_before: float
    u_after: float
    threshold: float
    run: WordRun
    halvings: int


def step(sys: SystemDef, x, U, gamma, target, opts: StepOptions | None = None) -> StepResult:
    """One accepted descent step.

    Starting from ``t = min(1, d(x, T) / (2 M))`` the duration is halved until
    ``U(y) - U(x) <= -gamma(U(x))/2 * coefficient * t^h``. Near-marginal
    acceptances are re-checked with twice the substeps.

    Raises
    ------
    NoDescentDirection
        No direction qualifies at ``x``.
    StepFailure
        The test still fails after ``max_halvings`` halvings.
    """
    opts = opts or StepOptions()
    x = np.asarray(x, float)
    u = U.value(x)
    g = float(gamma(u))
    fb = select_feedback(sys, x, U.limiting_gradients(x), g)
    w = word_for_direction(sys, fb.direction)
    t = min(1.0, target.distance(x) / (2.0 * opts.field_bound))
    if t <= 0:
        raise StepFailure("zero step cap: point lies in the target")
    for halving in range(opts.max_halvings + 1):
        run = execute_word(sys, x, w, t, opts.substeps, opts.record_every)
        u1 = U.value(run.endpoint)
        thr = -0.5 * g * w.coefficient * t**w.degree
        if u1 - u <= thr:
            if abs((u1 - u) - thr) <= opts.marginal * abs(thr):
                fine = execute_word(sys, x, w, t, 2 * opts.substeps).endpoint
                if U.value(fine) - u > thr:
                    t *= 0.5
                    continue
            return StepResult(run.endpoint, t, w.degree, fb.direction, w, u, u1, thr, run, halving)
        t *= 0.5
    raise StepFailure(f"descent test failed after {opts.max_halvings} halvings at {x.tolist()} "
                      f"(direction {fb.direction.label}, gamma {g:.6g})")


@dataclass
class Checkpoint:
    s: float
    x: list
    u: float
    degree: int
    t: float
    label: str
    coefficient: float
    gamma: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Trajectory:
    """Checkpoints and dense samples of a synthesized run.

    ``dense`` rows are ``(s, x_1..x_n, ctrl, seg, step)``.
    """

    dim: int
    checkpoints: list = field(default_factory=list)
    dense: np.ndarray | None = None
    reason: str = ""

    @property
    def steps(self) -> int:
        return max(len(self.checkpoints) - 1, 0)

    @property
    def final(self) -> np.ndarray:
        return np.asarray(self.checkpoints[-1].x)

    def to_dict(self) -> dict:
        return {"reason": self.reason, "steps": self.steps,
                "checkpoints": [c.to_dict() for c in self.checkpoints]}


def synthesize(sys: SystemDef, U, x0, target, gamma, eps_d: float, max_steps: int = 100000,
               opts: StepOptions | None = None) -> Trajectory:
    """Iterate :func:`step` until ``d(x, T) <= eps_d``.

    Raises
    ------
    MaxStepsExceeded
        Carries the partial trajectory.
    """
    opts = opts or StepOptions()
    x = np.asarray(x0, float)
    traj = Trajectory(sys.dim)
    n = sys.dim
    if target.distance(x) <= eps_d:
        traj.reason = "in_target"
        traj.dense = np.zeros((0, n + 4))
        return traj
    traj.checkpoints.append(Checkpoint(0.0, x.tolist(), U.value(x), 0, 0.0, "start", 1.0,
                                       float(gamma(U.value(x)))))
    blocks = [np.concatenate([[0.0], x, [0, 0, 0]])[None, :]]
    s = 0.0
    for j in range(1, max_steps + 1):
        res = step(sys, x, U, gamma, target, opts)
        rows = res.run.rows[1:]
        segs = res.run.segs[1:]
        ctrl = np.array([res.word.segments[i][0] for i in segs], dtype=float)
        blocks.append(np.column_stack([s + rows[:, 0], rows[:, 1:], ctrl, segs, np.full(len(rows), j)]))
        s += res.t
        x = res.x
        traj.checkpoints.append(Checkpoint(s, x.tolist(), res.u_after, res.degree, res.t,
                                           res.direction.label, res.word.coefficient,
                                           float(gamma(res.u_before))))
        if target.distance(x) <= eps_d:
            traj.reason = "reached"
            traj.dense = np.vstack(blocks)
            return traj
    traj.reason = "max_steps"
    traj.dense = np.vstack(blocks)
    raise MaxStepsExceeded(f"target not reached within {max_steps} steps "
                           f"(distance {target.distance(x):.6g})", traj)
