"""Candidate Lyapunov functions, targets, sampled verification and margin functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.stats import qmc

from .errors import NonMonotoneInput, NonpositiveMargin, SamplingError
from .expr import Program, ScalarExpr, partial, to_text
from .hamiltonian import hamiltonian, hamiltonian_batch
from .system import SystemDef

SAMPLING_NOTE = ("sampled check: the inequality is tested at finitely many "
                 "low-discrepancy points, not proved on the continuum")


# targets ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Closed ball ``|x - center| <= radius``; a point when ``radius == 0``."""

    center: tuple
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def distance(self, x) -> float:
        return max(float(np.linalg.norm(np.asarray(x, float) - self.center)) - self.radius, 0.0)

    def distance_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        return np.maximum(np.linalg.norm(X - np.asarray(self.center), axis=1) - self.radius, 0.0)


@dataclass(frozen=True)
class SignedDistance:
    """Target ``{g <= 0}`` for a user-supplied signed-distance expression ``g``."""

    expr: ScalarExpr
    dim: int

    def distance(self, x) -> float:
        return max(self.expr.evaluate(x), 0.0)

    def distance_batch(self, X) -> np.ndarray:
        return np.maximum(self.expr.evaluate_batch(X), 0.0)


# candidates ------------------------------------------------------------------------


class CLFCandidate:
    """Interface: values, limiting gradients, batch variants."""

    dim: int

    def value(self, x) -> float:
        raise NotImplementedError

    def value_batch(self, X) -> np.ndarray:
        return np.array([self.value(x) for x in np.atleast_2d(X)])

    def limiting_gradients(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient_options(self, X) -> list:
        """``[(G, active)]``: candidate gradients ``(N, n)`` and where each is active."""
        raise NotImplementedError

    def matches_distance_to(self, target) -> bool:
        """True when ``U`` is exactly the distance to ``target``."""
        return False


def _grad_program(U: ScalarExpr, n: int) -> Program:
    return Program.build([partial(U, j) for j in range(n)])


@dataclass(frozen=True)
class SmoothExpr(CLFCandidate):
    expr: ScalarExpr
    dim: int

    @cached_property
    def _grad(self):
        return _grad_program(self.expr, self.dim)

    @cached_property
    def _grad_exprs(self):
        return [partial(self.expr, j) for j in range(self.dim)]

    def value(self, x) -> float:
        return self.expr.evaluate(x)

    def value_batch(self, X) -> np.ndarray:
        return self.expr.evaluate_batch(X)

    def limiting_gradients(self, x) -> np.ndarray:
        return self._grad.run(np.asarray(x, float))[None, :]

    def gradient_options(self, X) -> list:
        X = np.atleast_2d(np.asarray(X, float))
        G = np.stack([g.evaluate_batch(X) for g in self._grad_exprs], axis=1)
        return [(G, np.ones(len(X), dtype=bool))]

    def describe(self) -> dict:
        return {"type": "expr", "expr": to_text(self.expr)}


@dataclass(frozen=True)
class DistanceToBall(CLFCandidate):
    """``U(x) = |x - c| - rho`` with unit radial gradient off the center."""

    center: tuple
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    def value(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x, float) - self.center)) - self.radius

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        return np.linalg.norm(X - np.asarray(self.center), axis=1) - self.radius

    def limiting_gradients(self, x) -> np.ndarray:
        v = np.asarray(x, float) - self.center
        r = float(np.linalg.norm(v))
        if r == 0.0:
            raise ValueError("distance gradient is undefined at the ball center")
        return (v / r)[None, :]

    def gradient_options(self, X) -> list:
        V = np.atleast_2d(np.asarray(X, float)) - np.asarray(self.center)
        r = np.linalg.norm(V, axis=1)
        if np.any(r == 0.0):
            raise ValueError("distance gradient is undefined at the ball center")
        return [(V / r[:, None], np.ones(len(V), dtype=bool))]

    def matches_distance_to(self, target) -> bool:
        return (isinstance(target, Ball) and target.center == self.center
                and target.radius == self.radius)

    def describe(self) -> dict:
        return {"type": "distance", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class MaxOfSmooth(CLFCandidate):
    """``U = max_i U_i``; every gradient within ``tol`` of the max is a limiting gradient."""

    exprs: tuple
    dim: int
    tol: float = 1e-9

    @cached_property
    def _grads(self):
        return [_grad_program(e, self.dim) for e in self.exprs]

    def _values(self, x):
        return np.array([e.evaluate(x) for e in self.exprs])

    def value(self, x) -> float:
        return float(self._values(x).max())

    def value_batch(self, X) -> np.ndarray:
        return np.max(np.stack([e.evaluate_batch(X) for e in self.exprs]), axis=0)

    def limiting_gradients(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        v = self._values(x)
        act = np.flatnonzero(v >= v.max() - self.tol)
        return np.stack([self._grads[i].run(x) for i in act])

    def gradient_options(self, X) -> list:
        X = np.atleast_2d(np.asarray(X, float))
        vals = np.stack([e.evaluate_batch(X) for e in self.exprs])
        top = vals.max(axis=0)
        out = []
        for i, e in enumerate(self.exprs):
            active = vals[i] >= top - self.tol
            G = np.zeros_like(X)
            if active.any():
                G[active] = np.stack([partial(e, j).evaluate_batch(X[active])
                                      for j in range(self.dim)], axis=1)
            out.append((G, active))
        return out

    def describe(self) -> dict:
        return {"type": "max", "exprs": [to_text(e) for e in self.exprs], "tol": self.tol}


def limiting_gradients(U: CLFCandidate, x) -> np.ndarray:
    """Rows are the limiting gradients ``D*U(x)`` (all eps-active ones for max-type U)."""
    return U.limiting_gradients(x)


# regions and sampling ---------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Sampling region ``{u_min < U(x) <= u_max}`` intersected with a box.

    ``tubes`` lists ``(axis, radius)`` pairs: points closer than ``radius`` to
    the coordinate axis ``x_{axis+1}`` are excluded. ``extra_points`` are
    always checked in addition to the low-discrepancy samples.
    """

    u_max: float
    u_min: float = 0.0
    box: tuple | None = None
    tubes: tuple = ()
    extra_points: tuple = ()

    def bounds(self, U: CLFCandidate) -> tuple:
        if self.box is not None:
            lo, hi = self.box
            return np.asarray(lo, float), np.asarray(hi, float)
        if isinstance(U, DistanceToBall):
            c = np.asarray(U.center)
            r = U.radius + self.u_max
            return c - r, c + r
        raise SamplingError("region needs an explicit box for this candidate")

    def mask(self, U: CLFCandidate, X) -> np.ndarray:
        u = U.value_batch(X)
        ok = (u > self.u_min) & (u <= self.u_max)
        for axis, rad in self.tubes:
            other = np.delete(X, axis, axis=1)
            ok &= np.linalg.norm(other, axis=1) >= rad
        return ok


def sample_region(U: CLFCandidate, region: Region, n_samples: int, seed: int = 0) -> np.ndarray:
    """``n_samples`` scrambled-Halton points of the region (rejection from its box)."""
    if n_samples < 1:
        raise SamplingError("need at least one sample")
    lo, hi = region.bounds(U)
    sampler = qmc.Halton(d=len(lo), scramble=True, seed=seed)
    got = []
    total = 0
    for _ in range(64):
        Z = qmc.scale(sampler.random(max(2 * n_samples, 64)), lo, hi)
        with np.errstate(all="ignore"):
            keep = Z[region.mask(U, Z)]
        got.append(keep)
        total += len(keep)
        if total >= n_samples:
            break
    if total == 0:
        raise SamplingError("sampler produced no points in the region")
    X = np.vstack(got)[:n_samples]
    if len(X) < n_samples:
        raise SamplingError(f"only {len(X)} of {n_samples} samples landed in the region")
    return X


def margins(sys: SystemDef, U: CLFCandidate, X, k: int | None = None) -> np.ndarray:
    """``-max_{p in D*U(x)} H^(k)(x, p)`` row by row."""
    k = sys.k if k is None else k
    X = np.atleast_2d(np.asarray(X, float))
    worst = np.full(len(X), -np.inf)
    for G, active in U.gradient_options(X):
        if not active.any():
            continue
        h = np.full(len(X), -np.inf)
        h[active] = hamiltonian_batch(sys, k, X[active], G[active])
        worst = np.maximum(worst, h)
    return -worst


def margin_at(sys: SystemDef, U: CLFCandidate, x, k: int | None = None) -> float:
    k = sys.k if k is None else k
    return -max(hamiltonian(sys, k, x, p) for p in U.limiting_gradients(x))


# margin function ----------------------------------------------------------------------


@dataclass(frozen=True)
class GammaFn:
    """Strictly increasing piecewise-linear function, constant beyond its last breakpoint."""

    u: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, float)
        g = np.asarray(self.g, float)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "g", g)
        if len(u) < 2 or np.any(np.diff(u) <= 0) or np.any(np.diff(g) <= 0):
            raise NonMonotoneInput("gamma breakpoints must be strictly increasing")

    def __call__(self, u):
        return np.interp(u, self.u, self.g)

    def scaled(self, factor: float) -> "GammaFn":
        return GammaFn(self.u, self.g * factor)

    def table(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.u, self.g)]


def gamma_from_margins(u, m, u_lo: float, u_hi: float, levels: int) -> GammaFn:
    """Largest nondecreasing minorant of the per-level minima, made strictly increasing.

    Breakpoint ``u_{i+1}`` (right end of level ``i``) gets
    ``min_{j >= i} m_j - eps*(u_hi - u_{i+1})`` so the interpolant never
    exceeds the minima of the levels it spans.
    """
    u = np.asarray(u, float)
    m = np.asarray(m, float)
    edges = np.linspace(u_lo, u_hi, levels + 1)
    mins = np.empty(levels)
    for i in range(levels):
        sel = (u >= edges[i]) & (u <= edges[i + 1]) if i == 0 else (u > edges[i]) & (u <= edges[i + 1])
        if not sel.any():
            raise SamplingError(f"no samples on level [{edges[i]:.6g}, {edges[i + 1]:.6g}]")
        mins[i] = m[sel].min()
    if mins.min() <= 0:
        i = int(np.argmin(mins))
        raise NonpositiveMargin(
            f"margin {mins[i]:.3g} <= 0 on level [{edges[i]:.6g}, {edges[i + 1]:.6g}]",
            level=float(edges[i]), margin=float(mins[i]))
    suffix = np.minimum.accumulate(mins[::-1])[::-1]
    eps = 1e-6 * mins.min()
    knots_u, knots_g = [0.0], [0.0]
    for i in range(levels):
        knots_u.append(edges[i + 1])
        knots_g.append(suffix[i] - eps * (u_hi - edges[i + 1]))
    return GammaFn(np.array(knots_u), np.array(knots_g))


def estimate_gamma(sys: SystemDef, U: CLFCandidate, region: Region, levels: int = 16,
                   n_samples: int = 10000, seed: int = 0) -> GammaFn:
    """Margin function from per-level minima of sampled margins.

    Raises
    ------
    NonpositiveMargin
        If some level has a sample with margin <= 0.
    """
    X = sample_region(U, region, n_samples, seed)
    return gamma_from_margins(U.value_batch(X), margins(sys, U, X), region.u_min,
                              region.u_max, levels)


# verification ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    samples: int
    min_margin: float
    argmin: list
    failures: list
    gamma: list
    seed: int
    k: int
    note: str = SAMPLING_NOTE
    failure_count: int = 0
    gamma_error: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        d = {"samples": self.samples, "min_margin": self.min_margin, "argmin": self.argmin,
             "failures": self.failures, "failure_count": self.failure_count,
             "gamma": self.gamma, "seed": self.seed, "k": self.k, "note": self.note}
        if self.gamma_error:
            d["gamma_error"] = self.gamma_error
        return d


def verify(sys: SystemDef, U: CLFCandidate, region: Region, n_samples: int = 10000,
           seed: int = 0, levels: int = 16, max_failures: int = 100) -> VerificationReport:
    """Check ``H^(k)(x, p) < 0`` for all ``p in D*U(x)`` at sampled ``x``.

    Returns
    -------
    VerificationReport
        ``failures`` lists (up to ``max_failures``) points with margin <= 0;
        ``gamma`` holds the margin-function breakpoints when all margins are positive.
    """
    X = sample_region(U, region, n_samples, seed)
    if region.extra_points:
        X = np.vstack([X, np.asarray(region.extra_points, float)])
    m = margins(sys, U, X)
    i = int(np.argmin(m))
    bad = np.flatnonzero(m <= 0.0)
    rep = VerificationReport(samples=len(X), min_margin=float(m[i]), argmin=X[i].tolist(),
                             failures=[X[j].tolist() for j in bad[:max_failures]],
                             gamma=[], seed=seed, k=sys.k, failure_count=int(len(bad)))
    if not len(bad):
        try:
            g = gamma_from_margins(U.value_batch(X), m, region.u_min, region.u_max, levels)
            rep.gamma = g.table()
        except SamplingError as exc:
            rep.gamma_error = str(exc)
    rep.extra["margins"] = m
    rep.extra["points"] = X
    return rep
