"""Evolution operators X(t, s) of x' = A(t) x, by numerical integration.

The stepping core is an embedded Dormand-Prince 5(4) pair with standard
PI-free step control; the operator equation Y' = A(t) Y is integrated on
the full r-by-r matrix state.  Integration always restarts at declared
breakpoints of the coefficient so a step never straddles a jump, and
backward propagation (t < s) is done by stepping with negative h rather
than by inverting a forward result.

:class:`EvolutionOperator` adds a checkpointed query layer: propagators
to a lattice of anchor times are memoized, so repeated queries cost one
short integration per endpoint instead of a full pass.
"""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import Interval, signed_integrate
from .errors import IntegrationError
from .operators import Operator, Vector, VectorSpaceSpec, invert_matrix, matrix_norm

DEFAULT_ODE_TOL = 1e-10

# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)
_DP_E = tuple(b5 - b4 for b5, b4 in zip(_DP_B5, _DP_B4))


@dataclass
class StepStats:
    """Accumulated integrator diagnostics."""

    steps: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    segments: int = 0

    def merge(self, other: "StepStats") -> None:
        self.steps += other.steps
        self.rejected += other.rejected
        self.rhs_evals += other.rhs_evals
        self.segments += other.segments


@dataclass(frozen=True)
class CoefficientPath:
    """t -> A(t), the coefficient of a linear evolution equation.

    ``eval`` returns a bare (r, r) ndarray; it must be bounded on compact
    subsets of ``domain`` and piecewise continuous between breakpoints.
    """

    eval: Callable[[float], np.ndarray]
    space: VectorSpaceSpec
    breakpoints: tuple = ()
    domain: Interval = Interval(-math.inf, math.inf)

    def __post_init__(self):
        object.__setattr__(
            self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints))
        )

    def __call__(self, t: float) -> np.ndarray:
        return self.eval(t)


def _rk_segment(rhs, t0, t1, y, rtol, atol, stats, max_steps, h0=None):
    """Adaptive DP5(4) from t0 to t1 on a breakpoint-free segment.

    ``y`` is any ndarray shape; the error norm is max over components of
    |err| / (atol + rtol * |y|).
    """
    if t1 == t0:
        return y
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    t = t0
    f0 = rhs(t0, y)
    stats.rhs_evals += 1
    if span <= 1e-13 * max(1.0, abs(t0), abs(t1)):
        # degenerate segment (a few ulps, e.g. grid points that almost
        # coincide with a breakpoint): one explicit step is exact to
        # O(span^2) ~ 1e-26 and avoids a spurious underflow
        stats.steps += 1
        stats.segments += 1
        return y + (t1 - t0) * f0
    if h0 is None:
        # initial step from the scaled state/slope ratio (Hairer's d0/d1):
        # a wrong guess only costs one rejection, the controller recovers
        scale = atol + rtol * np.abs(y)
        d0 = float(np.max(np.abs(y) / scale))
        d1 = float(np.max(np.abs(f0) / scale))
        h = 0.1 * span if d1 == 0.0 else 0.01 * max(d0, 1.0) / d1
        h = min(max(h, 1e-8 * span), 0.1 * span, span)
    else:
        h = min(abs(h0), span)
    stats.segments += 1
    k = [None] * 7
    k[0] = f0
    taken = 0
    while True:
        remaining = abs(t1 - t)
        if remaining <= 0.0:
            break
        if h > remaining:
            h = remaining
        hd = direction * h
        for i in range(1, 7):
            yi = y
            for j, a in enumerate(_DP_A[i]):
                if a != 0.0:
                    yi = yi + (hd * a) * k[j]
            k[i] = rhs(t + _DP_C[i] * hd, yi)
        stats.rhs_evals += 6
        y5 = y
        for i, b in enumerate(_DP_B5):
            if b != 0.0:
                y5 = y5 + (hd * b) * k[i]
        err_vec = None
        for i, e in enumerate(_DP_E):
            if e != 0.0:
                term = (hd * e) * k[i]
                err_vec = term if err_vec is None else err_vec + term
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        with np.errstate(invalid="ignore", divide="ignore"):
            err = float(np.max(np.abs(err_vec) / scale))
        if not math.isfinite(err):
            err = math.inf
        taken += 1
        if taken > max_steps:
            raise IntegrationError(f"step budget exhausted near t = {t}", t)
        if err <= 1.0:
            t = t1 if h >= remaining else t + hd
            y = y5
            k[0] = k[6]  # first-same-as-last pair
            stats.steps += 1
            if err == 0.0:
                h *= 5.0
            else:
                h *= min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            stats.rejected += 1
            h *= max(0.1, 0.9 * err ** -0.2) if math.isfinite(err) else 0.1
            # k[0] still holds rhs(t, y): the step was rejected, the state
            # did not move.  Underflow is only meaningful here, where the
            # controller is shrinking; accepted steps may grow freely.
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError(
                    f"step size underflow at t = {t} "
                    "(stiffness or singularity)", t
                )
    return y


def _segment_times(s: float, t: float, breakpoints: Sequence[float]):
    """Ordered cut times from s to t, split at interior breakpoints."""
    if s == t:
        return [s, t]
    lo, hi = (s, t) if s < t else (t, s)
    inner = [b for b in breakpoints if lo < b < hi]
    times = [lo] + inner + [hi]
    if s > t:
        times = times[::-1]
    return times


def _integrate_state(rhs, s, t, y0, breakpoints, rtol, atol, stats, max_steps):
    y = y0
    times = _segment_times(s, t, breakpoints)
    for a, b in zip(times, times[1:]):
        y = _rk_segment(rhs, a, b, y, rtol, atol, stats, max_steps)
    return y


def evolve(
    A: CoefficientPath,
    s: float,
    t: float,
    tol: float = DEFAULT_ODE_TOL,
    stats: Optional[StepStats] = None,
    max_steps: int = 2_000_000,
) -> Operator:
    """Propagator X(t, s) of x' = A(t) x, as an operator.

    Integrates the matrix equation Y' = A Y with Y(s) = id; for t < s the
    integrator steps backward in time.
    """
    r = A.space.dim
    stats = stats if stats is not None else StepStats()

    def rhs(tau, y):
        return np.asarray(A.eval(tau), dtype=float) @ y

    y = _integrate_state(rhs, s, t, np.eye(r), A.breakpoints, tol, tol,
                         stats, max_steps)
    return Operator(y, A.space)


def propagate_vector(
    A: CoefficientPath,
    s: float,
    t: float,
    v: Vector,
    tol: float = DEFAULT_ODE_TOL,
    stats: Optional[StepStats] = None,
    max_steps: int = 2_000_000,
) -> Vector:
    """X(t, s) v by direct integration of the vector equation
    (the full propagator matrix is never formed)."""
    stats = stats if stats is not None else StepStats()

    def rhs(tau, y):
        return np.asarray(A.eval(tau), dtype=float) @ y

    y = _integrate_state(rhs, s, t, np.array(v.entries, dtype=float),
                         A.breakpoints, tol, tol, stats, max_steps)
    return Vector(y, A.space)


def variation_of_parameters(
    A: CoefficientPath,
    g: Callable[[float], np.ndarray],
    s: float,
    t: float,
    x_s: Vector,
    tol: float = DEFAULT_ODE_TOL,
    g_breakpoints: Sequence[float] = (),
) -> Vector:
    """Solution at t of the inhomogeneous equation x' = A(t) x + g(t) with
    x(s) = x_s, integrated directly on the augmented right-hand side."""
    stats = StepStats()

    def rhs(tau, y):
        return np.asarray(A.eval(tau), dtype=float) @ y + np.asarray(
            g(tau), dtype=float
        )

    bps = tuple(sorted(set(A.breakpoints) | set(float(b) for b in g_breakpoints)))
    y = _integrate_state(rhs, s, t, np.array(x_s.entries, dtype=float),
                         bps, tol, tol, stats, 2_000_000)
    return Vector(y, A.space)


@dataclass(frozen=True)
class ComparisonInput:
    """Data for the two-system comparison estimate.

    The hypothesis ||X1(t,s)^sign|| <= gain * exp(-rate (t-s)) for s <= t
    is asserted by the caller, not proven here; it is recorded so reports
    can echo it.
    """

    A1: CoefficientPath
    A2: CoefficientPath
    gain: float
    rate: float
    sign: int

    def __post_init__(self):
        if self.gain < 1.0:
            raise ValueError("gain must be >= 1")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class ComparisonBounds:
    growth_bound: float
    difference_bound: float
    coupling_integral: float


def comparison_bounds(
    c: ComparisonInput, s: float, t: float, tol: float = 1e-10
) -> ComparisonBounds:
    """Bounds on ||X2(t,s)^sign|| and ||X2^sign - X1^sign|| in terms of the
    envelope of X1 and the L1 distance of the coefficients:

        growth     = gain e^{-rate (t-s)} e^{gain * int ||A2 - A1||}
        difference = gain e^{-rate (t-s)} (e^{gain * int ||A2 - A1||} - 1)
    """
    if s > t:
        raise ValueError("comparison bounds require s <= t")
    kind = c.A1.space.norm_kind
    bps = tuple(sorted(set(c.A1.breakpoints) | set(c.A2.breakpoints)))
    integral = float(signed_integrate(
        lambda tau: matrix_norm(
            np.asarray(c.A2.eval(tau), dtype=float)
            - np.asarray(c.A1.eval(tau), dtype=float),
            kind,
        ),
        s, t, bps, tol,
    ))
    envelope = c.gain * math.exp(-c.rate * (t - s))
    arg = c.gain * integral
    blow = math.exp(arg) if arg < 709.0 else math.inf
    growth = envelope * blow
    difference = envelope * (blow - 1.0) if math.isfinite(blow) else math.inf
    return ComparisonBounds(growth, difference, integral)


class EvolutionOperator:
    """Two-parameter propagator with memoized anchor checkpoints.

    Anchor times are the coefficient's breakpoints plus a uniform lattice
    of spacing ``checkpoint_spacing``; the propagator Phi(a) = X(a, base)
    is cached at each anchor, computed by chaining from the nearest cached
    one.  A query X(t, s) then costs two short integrations and one small
    solve: X(t, s) = Phi(t) Phi(s)^{-1}.  Cached values depend only on the
    anchor lattice, never on query order, so concurrent queries return
    exactly what sequential evaluation would.
    """

    def __init__(
        self,
        source: CoefficientPath,
        tol: float = DEFAULT_ODE_TOL,
        base: Optional[float] = None,
        checkpoint_spacing: float = 1.0,
    ):
        self.source = source
        self.tol = tol
        self.step_stats = StepStats()
        self.checkpoint_spacing = float(checkpoint_spacing)
        if base is None:
            lo = source.domain.lo
            base = lo if math.isfinite(lo) else 0.0
        self.base = float(base)
        self._phi = {self.base: np.eye(source.space.dim)}
        self._anchor_list = [self.base]
        self._lock = threading.Lock()

    def _anchor_below(self, tau: float) -> float:
        """Nearest lattice point at or below tau (lattice = base + k*spacing,
        clipped into the domain, plus breakpoints handled by the stepper)."""
        k = math.floor((tau - self.base) / self.checkpoint_spacing)
        a = self.base + k * self.checkpoint_spacing
        lo, hi = self.source.domain.lo, self.source.domain.hi
        if math.isfinite(lo):
            a = max(a, lo)
        if math.isfinite(hi):
            a = min(a, hi)
        return a

    def _phi_at(self, tau: float) -> np.ndarray:
        """X(tau, base), extending the cached anchor chain as needed."""
        with self._lock:
            if tau in self._phi:
                return self._phi[tau]
            anchor = self._anchor_below(tau)
            self._ensure_anchor(anchor)
            phi_anchor = self._phi[anchor]
            if tau == anchor:
                return phi_anchor
            y = self._run(anchor, tau, phi_anchor)
            return y

    def _ensure_anchor(self, anchor: float) -> None:
        if anchor in self._phi:
            return
        # walk from the nearest cached anchor toward the requested one,
        # caching every lattice point passed so later queries are O(1)
        idx = bisect.bisect_left(self._anchor_list, anchor)
        below = self._anchor_list[idx - 1] if idx > 0 else None
        above = self._anchor_list[idx] if idx < len(self._anchor_list) else None
        if below is not None and (above is None or anchor - below <= above - anchor):
            start = below
        else:
            start = above
        cur_t, cur = start, self._phi[start]
        step = self.checkpoint_spacing if anchor > start else -self.checkpoint_spacing
        while cur_t != anchor:
            nxt = cur_t + step
            if (step > 0 and nxt > anchor) or (step < 0 and nxt < anchor):
                nxt = anchor
            cur = self._run(cur_t, nxt, cur)
            cur_t = nxt
            if cur_t not in self._phi:
                self._phi[cur_t] = cur
                bisect.insort(self._anchor_list, cur_t)

    def _run(self, a: float, b: float, y0: np.ndarray) -> np.ndarray:
        A = self.source

        def rhs(tau, y):
            return np.asarray(A.eval(tau), dtype=float) @ y

        return _integrate_state(rhs, a, b, y0, A.breakpoints, self.tol,
                                self.tol, self.step_stats, 2_000_000)

    def query(self, t: float, s: float) -> Operator:
        """X(t, s).  query(s, s) is the identity exactly."""
        if t == s:
            return Operator.identity(self.source.space)
        phi_t = self._phi_at(t)
        phi_s = self._phi_at(s)
        x = phi_t @ invert_matrix(phi_s)
        return Operator(x, self.source.space)


@dataclass(frozen=True)
class ParamEvolutionResult:
    """Propagators of D2 X = A(x, .) X, X(x, v0) = id on a grid.

    ``propagators[i][j]`` is X(x_grid[i], v_targets[j]).  ``continuity``
    is the max operator-norm discrepancy between neighboring grid columns,
    reported as a grid-level proxy for continuity in the parameter.
    """

    x_grid: tuple
    v0: float
    v_targets: tuple
    propagators: list
    continuity: float


def param_evolution(
    A: Callable[[float, float], np.ndarray],
    x_grid: Sequence[float],
    v0: float,
    v_targets: Sequence[float],
    space: VectorSpaceSpec,
    tol: float = DEFAULT_ODE_TOL,
    v_breakpoints: Sequence[float] = (),
) -> ParamEvolutionResult:
    """Solve the parameter-dependent family: for each frozen x, evolve in
    v from v0 to every target.  Targets on the same side of v0 are reached
    by chaining, so each column costs one sweep per direction."""
    x_grid = tuple(float(x) for x in x_grid)
    v_targets = tuple(float(v) for v in v_targets)
    stats = StepStats()
    columns = []
    for x in x_grid:
        def rhs(v, y, _x=x):
            return np.asarray(A(_x, v), dtype=float) @ y

        col = {}
        for side in (
            sorted([v for v in v_targets if v >= v0]),
            sorted([v for v in v_targets if v < v0], reverse=True),
        ):
            cur_v, cur = v0, np.eye(space.dim)
            for v in side:
                cur = _integrate_state(rhs, cur_v, v, cur, v_breakpoints,
                                       tol, tol, stats, 2_000_000)
                cur_v = v
                col[v] = cur
        columns.append([col[v] for v in v_targets])
    continuity = 0.0
    for left, right in zip(columns, columns[1:]):
        for yl, yr in zip(left, right):
            continuity = max(continuity,
                             matrix_norm(yr - yl, space.norm_kind))
    return ParamEvolutionResult(
        x_grid=x_grid,
        v0=float(v0),
        v_targets=v_targets,
        propagators=columns,
        continuity=continuity,
    )
