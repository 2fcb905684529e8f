"""KL bounding function built from a synthesized run, and envelope checking.

The bound chains four monotone functions of the CLF level ``u``:

* ``gamma_tilde(u) = gamma(u) * tau_lo(u)**(k-1) / (2 R)`` where ``tau_lo`` is a
  lower bound of the accepted step durations at levels >= ``u`` and ``R``
  bounds ``1/coefficient`` over all words;
* ``gamma_hat = min(u, gamma_tilde)``;
* ``delta_minus <= d(x) <= delta_plus`` on each level set of ``U``.

Then ``beta_hat(delta, s) = delta_plus(gamma_hat^-1(delta_hat_minus^-1(delta) / (1 + s)))``
bounds the distance at checkpoints, and ``beta`` adds the time shift and the
``M * tau_hi`` travel term that cover the motion between checkpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clf import CLFCandidate, GammaFn, Region, sample_region
from .errors import NonMonotoneInput
from .steering import Trajectory, word_for_direction
from .hamiltonian import directions


def inverse(f, v, lo: float = 0.0, hi: float = 1.0, iters: int = 200) -> np.ndarray:
    """``sup{u >= lo : f(u) <= v}`` for nondecreasing, unbounded ``f`` by bisection."""
    v = np.atleast_1d(np.asarray(v, float))
    hi_arr = np.full_like(v, max(hi, lo + 1.0))
    for _ in range(200):
        grow = f(hi_arr) <= v
        if not grow.any():
            break
        hi_arr = np.where(grow, 2.0 * hi_arr, hi_arr)
    lo_arr = np.full_like(v, lo)
    for _ in range(iters):
        mid = 0.5 * (lo_arr + hi_arr)
        ok = f(mid) <= v
        lo_arr = np.where(ok, mid, lo_arr)
        hi_arr = np.where(ok, hi_arr, mid)
        if np.all(hi_arr - lo_arr <= 1e-15 * np.maximum(1.0, hi_arr)):
            break
    return lo_arr


@dataclass
class StepTables:
    """Step-duration bounds by level, taken from a run's checkpoints.

    ``levels[i]`` is the level where step ``i`` started and ``durations[i]`` its
    duration.
    """

    levels: np.ndarray
    durations: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "StepTables":
        cps = traj.checkpoints
        lv = np.array([cps[j - 1].u for j in range(1, len(cps))])
        du = np.array([cps[j].t for j in range(1, len(cps))])
        if len(lv) == 0:
            raise ValueError("trajectory has no steps")
        return cls(lv, du)

    def tau_lo_knots(self):
        """Knots of a continuous nondecreasing lower bound of ``min{t_i : u_i >= u}``."""
        order = np.argsort(self.levels)
        v = self.levels[order]
        t = self.durations[order]
        suffix_min = np.minimum.accumulate(t[::-1])[::-1]
        uniq, idx = np.unique(v, return_index=True)
        return uniq, suffix_min[idx]

    def tau_lo(self, u):
        kv, kt = self.tau_lo_knots()
        return np.interp(u, kv, kt)

    def tau_hi(self, u):
        """``max{t_i : u_i <= u}`` (0 where no step started at or below ``u``)."""
        order = np.argsort(self.levels)
        v = self.levels[order]
        prefix_max = np.maximum.accumulate(self.durations[order])
        u = np.atleast_1d(np.asarray(u, float))
        pos = np.searchsorted(v, u, side="right")
        return np.where(pos > 0, prefix_max[np.maximum(pos - 1, 0)], 0.0)


@dataclass
class LevelDistanceBounds:
    """``delta_minus(u) <= d(x) <= delta_plus(u)`` for ``U(x) = u``."""

    exact: bool
    u: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def delta_minus(self, u):
        u = np.asarray(u, float)
        if self.exact:
            return np.maximum(u, 0.0)
        return _pl_unbounded(u, self.u, self.lower)

    def delta_plus(self, u):
        u = np.asarray(u, float)
        if self.exact:
            return np.maximum(u, 0.0)
        return _pl_unbounded(u, self.u, self.upper)

    def delta_hat_minus(self, u):
        return np.minimum(self.delta_minus(u), np.maximum(np.asarray(u, float), 0.0))


def _pl_unbounded(u, ku, kv):
    """Piecewise-linear through the knots, slope-1 continuation past the last knot."""
    out = np.interp(u, ku, kv)
    return np.where(u > ku[-1], kv[-1] + (u - ku[-1]), np.where(u < 0, 0.0, out))


def level_distance_bounds(U: CLFCandidate, target, region: Region | None = None,
                          n_samples: int = 20000, levels: int = 64, seed: int = 0):
    """Exact identity when ``U`` is the distance to ``target``, else sampled tables."""
    if U.matches_distance_to(target):
        return LevelDistanceBounds(True)
    if region is None:
        raise ValueError("sampled level bounds need a region")
    X = sample_region(U, region, n_samples, seed)
    u = U.value_batch(X)
    d = target.distance_batch(X)
    grid = np.linspace(0.0, region.u_max, levels + 1)
    lo = np.empty_like(grid)
    up = np.empty_like(grid)
    for i, g in enumerate(grid):
        above = u >= g
        below = u <= g
        lo[i] = d[above].min() if above.any() else d.max()
        up[i] = d[below].max() if below.any() else 0.0
    # shift by one level so the interpolant stays below (above) the level minima
    # (maxima) on the whole interval between knots
    lo = np.concatenate([[0.0], lo[:-1]])
    up = np.concatenate([up[1:], [up[-1] + (grid[-1] - grid[-2])]])
    lo[0] = 0.0
    up[0] = 0.0     # keeps beta(0, s) = 0; the first cell is interpolated, not bounded
    eps = 1e-9 * max(1.0, float(d.max()))
    lo = np.minimum.accumulate(lo[::-1])[::-1] - eps * (grid[-1] - grid)
    lo[0] = 0.0
    up = np.maximum.accumulate(up) + eps * grid
    if np.any(np.diff(lo) <= 0) or np.any(np.diff(up) <= 0):
        raise NonMonotoneInput("sampled level-distance tables are not strictly increasing")
    return LevelDistanceBounds(False, grid, lo, up)


def word_constant(sys) -> float:
    """``R >= 1/coefficient`` for every word the feedback may use."""
    return max(1.0 / word_for_direction(sys, d).coefficient for d in directions(sys, sys.k))


@dataclass
class KLFunction:
    gamma: GammaFn
    steps: StepTables
    k: int
    R: float
    M: float
    bounds: LevelDistanceBounds
    u_top: float
    flags: dict = field(default_factory=dict)

    # components ----------------------------------------------------------------

    def gamma_tilde(self, u):
        u = np.asarray(u, float)
        tau = np.minimum(self.steps.tau_lo(np.minimum(u, self.u_top)), 1.0)
        return self.gamma(u) * tau ** (self.k - 1) / (2.0 * self.R)

    def gamma_hat(self, u):
        """``min(u, gamma_tilde(u))`` on ``[0, u_top]``, continued with slope 1 above."""
        u = np.maximum(np.asarray(u, float), 0.0)
        top = min(self.u_top, float(self.gamma_tilde(self.u_top)))
        inner = np.minimum(u, self.gamma_tilde(np.minimum(u, self.u_top)))
        return np.where(u > self.u_top, top + (u - self.u_top), inner)

    def gamma_hat_inv(self, v):
        return inverse(self.gamma_hat, v, 0.0, self.u_top)

    def delta_minus_inv(self, d):
        return inverse(self.bounds.delta_minus, d, 0.0, self.u_top)

    def delta_hat_minus_inv(self, d):
        return inverse(self.bounds.delta_hat_minus, d, 0.0, self.u_top)

    def beta_hat(self, delta, s):
        delta = np.asarray(delta, float)
        s = np.asarray(s, float)
        a = self.delta_hat_minus_inv(delta)
        return self.bounds.delta_plus(self.gamma_hat_inv(a / (1.0 + s)))

    def shift(self, delta):
        return self.steps.tau_hi(self.delta_minus_inv(delta))

    def __call__(self, delta, s):
        """``beta(delta, s)`` (vectorised over ``s`` for scalar ``delta``)."""
        delta = float(delta)
        s = np.atleast_1d(np.asarray(s, float))
        if delta <= 0.0:
            return self.M * self.steps.tau_hi(np.zeros_like(s))
        tau0 = float(self.shift(delta)[0])
        sh = np.maximum(s - tau0, 0.0)
        bh = self.beta_hat(np.full_like(sh, delta), sh)
        return self.M * self.steps.tau_hi(self.delta_minus_inv(bh)) + bh

    def table(self, deltas, ss) -> np.ndarray:
        """Rows ``(delta, s, beta)``."""
        rows = []
        for d in deltas:
            vals = self(d, ss)
            rows.extend(zip([float(d)] * len(ss), map(float, ss), map(float, vals)))
        return np.array(rows)

    def shape_violations(self, deltas, ss, tol: float = 1e-12) -> list:
        """Checks of the class-KL shape on a grid; empty when the table looks right."""
        out = []
        B = np.array([self(d, ss) for d in deltas])
        if np.any(np.diff(B, axis=1) > tol * np.maximum(1.0, np.abs(B[:, 1:]))):
            out.append("beta increases in s")
        if np.any(np.diff(B, axis=0) < -tol * np.maximum(1.0, np.abs(B[1:]))):
            out.append("beta decreases in delta")
        if np.any(np.abs(self(0.0, ss)) > tol):
            out.append("beta(0, s) != 0")
        return out


def build_kl(gamma: GammaFn, traj: Trajectory, sys, U: CLFCandidate, target,
             field_bound: float, region: Region | None = None, seed: int = 0) -> KLFunction:
    """KL bound for runs starting at CLF level at most ``U(x0)`` of ``traj``.

    Raises
    ------
    NonMonotoneInput
        If ``gamma`` is not strictly increasing.
    """
    if np.any(np.diff(gamma.g) <= 0) or np.any(np.diff(gamma.u) <= 0):
        raise NonMonotoneInput("gamma must be strictly increasing")
    steps = StepTables.from_trajectory(traj)
    bounds = level_distance_bounds(U, target, region, seed=seed)
    u_top = float(traj.checkpoints[0].u)
    kl = KLFunction(gamma, steps, sys.k, word_constant(sys), float(field_bound), bounds, u_top)
    kl.flags = {
        "level_bounds": "exact" if bounds.exact else "sampled; first level cell interpolated",
        "extended_above_level": u_top,
        "note": "durations and level bounds come from this run; the continuation above "
                "the starting level is valid only for runs starting at or below it",
    }
    return kl


def check_envelope(traj: Trajectory, beta: KLFunction, target) -> float:
    """``max_s d(y(s)) - beta(d(x0), s)`` over the dense samples; <= 0 means certified."""
    if traj.dense is None or len(traj.dense) == 0 or not traj.checkpoints:
        return 0.0
    n = traj.dim
    s = traj.dense[:, 0]
    X = traj.dense[:, 1:1 + n]
    d = target.distance_batch(X)
    d0 = target.distance(traj.checkpoints[0].x)
    return float(np.max(d - beta(d0, s)))


def check_checkpoints(traj: Trajectory, beta: KLFunction, target) -> float:
    """``max_j d(x_j) - beta_hat(d(x0), s_j)``: the discrete-time estimate."""
    if len(traj.checkpoints) == 0:
        return 0.0
    d0 = target.distance(traj.checkpoints[0].x)
    s = np.array([c.s for c in traj.checkpoints])
    d = np.array([target.distance(c.x) for c in traj.checkpoints])
    return float(np.max(d - beta.beta_hat(np.full_like(s, d0), s)))
