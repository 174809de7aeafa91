"""Parallel transport on the trivial bundle over a planar rectangle M x J.

A connection is the pair of operator-valued fields (omega1, omega2); the
transport along a piecewise-C1 curve gamma = (gamma1, gamma2) is the
endpoint propagator of

    A(t) = -( omega1(gamma(t)) gamma1'(t) + omega2(gamma(t)) gamma2'(t) ).

The certified bound depends only on the length of the first component of
the curve: with sup bounds B1, B2, B12 for omega1, omega2, d/dx omega2 on
the rectangle and lam = lambda(J),

    gain     N    = exp(lam B2)
    cap      C(L) = N^2 exp(N^{3+2N} lam B12 L)
    bound    beta(L) = C(L) exp(C(L) B1 L)

beta grows doubly exponentially and saturates to +inf with an overflow
flag when it leaves the float range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import Interval, ScalarPath
from .errors import DomainViolationError, IntegrationError
from .evolution import CoefficientPath, evolve, propagate_vector
from .operators import (
    Operator,
    Vector,
    VectorSpaceSpec,
    matrix_norm,
    vector_norm,
)

__all__ = [
    "ConnectionForm", "Curve", "ConnectionBounds", "BetaParts",
    "SineCurveRow", "SineCurveReport", "curve_coefficient",
    "parallel_transport", "beta_bound", "beta_parts",
    "sample_connection_bounds", "sine_curve_scenario", "reverse_curve",
]


@dataclass(frozen=True)
class ConnectionForm:
    """Connection form (omega1, omega2) on the rectangle M x J.

    ``d1_omega2`` is the x-derivative of omega2 when known analytically;
    otherwise it is approximated by central differences where needed.
    """

    omega1: Callable[[float, float], np.ndarray]
    omega2: Callable[[float, float], np.ndarray]
    m_interval: Interval
    j_interval: Interval
    space: VectorSpaceSpec
    d1_omega2: Optional[Callable[[float, float], np.ndarray]] = None

    def d1w2(self, x: float, u: float) -> np.ndarray:
        if self.d1_omega2 is not None:
            return np.asarray(self.d1_omega2(x, u), dtype=float)
        h = 1e-6 * max(1.0, abs(x))
        a = np.asarray(self.omega2(x + h, u), dtype=float)
        b = np.asarray(self.omega2(x - h, u), dtype=float)
        return (a - b) / (2.0 * h)

    def check_point(self, x: float, u: float) -> None:
        tol_x = 1e-12 * max(1.0, abs(x))
        tol_u = 1e-12 * max(1.0, abs(u))
        if not (self.m_interval.contains(x, tol_x)
                and self.j_interval.contains(u, tol_u)):
            raise DomainViolationError(
                f"curve point ({x}, {u}) outside the connection rectangle"
            )


@dataclass(frozen=True)
class Curve:
    """A piecewise-C1 path t -> (gamma1(t), gamma2(t)) on [a, b]."""

    gamma1: ScalarPath
    gamma2: ScalarPath
    a: float
    b: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError("curve needs a <= b")

    @property
    def breakpoints(self) -> tuple:
        return tuple(sorted(set(self.gamma1.breakpoints)
                            | set(self.gamma2.breakpoints)))

    def restrict(self, a: float, b: float) -> "Curve":
        if a < self.a - 1e-12 or b > self.b + 1e-12:
            raise ValueError("restriction exceeds the curve's parameter range")
        return Curve(self.gamma1, self.gamma2, a, b)


def reverse_curve(g: Curve) -> Curve:
    """The same trace run backwards: tau -> gamma(a + b - tau)."""
    a, b = g.a, g.b
    flipped = tuple(sorted(a + b - t for t in g.breakpoints))
    g1 = ScalarPath(
        eval=lambda tau: g.gamma1.eval(a + b - tau),
        deriv=(lambda tau: -g.gamma1.d(a + b - tau)),
        breakpoints=flipped,
        domain=Interval(a, b),
    )
    g2 = ScalarPath(
        eval=lambda tau: g.gamma2.eval(a + b - tau),
        deriv=(lambda tau: -g.gamma2.d(a + b - tau)),
        breakpoints=flipped,
        domain=Interval(a, b),
    )
    return Curve(g1, g2, a, b)


def curve_coefficient(w: ConnectionForm, g: Curve) -> CoefficientPath:
    """Coefficient path of the transport equation along the curve."""

    def eval_A(t):
        x = float(g.gamma1(t))
        u = float(g.gamma2(t))
        w.check_point(x, u)
        dx = float(g.gamma1.d(t))
        du = float(g.gamma2.d(t))
        out = None
        if dx != 0.0:
            out = np.asarray(w.omega1(x, u), dtype=float) * dx
        if du != 0.0:
            term = np.asarray(w.omega2(x, u), dtype=float) * du
            out = term if out is None else out + term
        if out is None:
            out = np.zeros((w.space.dim, w.space.dim))
        return -out

    return CoefficientPath(eval=eval_A, space=w.space,
                           breakpoints=g.breakpoints,
                           domain=Interval(g.a, g.b))


def parallel_transport(w: ConnectionForm, g: Curve,
                       tol: float = 1e-10) -> Operator:
    """Transport operator along the curve, from gamma(a) to gamma(b)."""
    return evolve(curve_coefficient(w, g), g.a, g.b, tol)


def transport_vector(w: ConnectionForm, g: Curve, v: Vector,
                     tol: float = 1e-10) -> Vector:
    """Transport of a single fiber vector along the curve."""
    return propagate_vector(curve_coefficient(w, g), g.a, g.b, v, tol)


@dataclass(frozen=True)
class ConnectionBounds:
    """Sup bounds of omega1, omega2, d/dx omega2 on the rectangle.

    Grid-sampled bounds carry a 5% safety inflation and record their
    resolution; user-supplied bounds are taken at face value.
    """

    B1: float
    B2: float
    B12: float
    lambda_J: float
    provenance: str = "user-supplied"

    def __post_init__(self):
        if min(self.B1, self.B2, self.B12) < 0.0 or self.lambda_J <= 0.0:
            raise ValueError("bounds must be nonnegative and lambda_J positive")


@dataclass(frozen=True)
class BetaParts:
    gain: float
    cap: float
    beta: float
    overflow: bool


def beta_parts(b: ConnectionBounds, L: float) -> BetaParts:
    """The three-stage composition of the transport bound at length L."""
    if L < 0.0:
        raise ValueError("length must be nonnegative")
    log_gain = b.lambda_J * b.B2
    gain = math.exp(log_gain) if log_gain < 709.0 else math.inf
    if not math.isfinite(gain):
        return BetaParts(gain, math.inf, math.inf, True)
    variation_term = b.lambda_J * b.B12 * L
    if variation_term == 0.0:
        log_cap = 2.0 * log_gain
    else:
        p = (3.0 + 2.0 * gain) * log_gain  # log of gain^{3+2 gain}
        inner = math.exp(p) if p < 709.0 else math.inf
        log_cap = 2.0 * log_gain + inner * variation_term
    cap = math.exp(log_cap) if log_cap < 709.0 else math.inf
    if not math.isfinite(cap):
        return BetaParts(gain, cap, math.inf, True)
    log_beta = log_cap + cap * b.B1 * L
    beta = math.exp(log_beta) if log_beta < 709.0 else math.inf
    return BetaParts(gain, cap, beta, not math.isfinite(beta))


def beta_bound(b: ConnectionBounds, L: float) -> float:
    """Certified bound on ||P_gamma|| for curves whose first component has
    arc length at most L (+inf with the overflow flag in beta_parts when
    the composition leaves the float range)."""
    return beta_parts(b, L).beta


def sample_connection_bounds(
    w: ConnectionForm,
    resolution: int = 17,
    rel_stop: float = 1e-2,
    inflation: float = 1.05,
    max_resolution: int = 513,
) -> ConnectionBounds:
    """Grid-sample sup norms of omega1, omega2, d/dx omega2 over the
    rectangle, refining dyadically until all three stabilize, then
    inflate by 5%."""
    if not (w.m_interval.is_finite() and w.j_interval.is_finite()):
        raise DomainViolationError("bounds sampling needs a finite rectangle")
    kind = w.space.norm_kind

    def sups(n):
        xs = np.linspace(w.m_interval.lo, w.m_interval.hi, n)
        us = np.linspace(w.j_interval.lo, w.j_interval.hi, n)
        s1 = s2 = s12 = 0.0
        for x in xs:
            for u in us:
                s1 = max(s1, matrix_norm(
                    np.asarray(w.omega1(x, u), dtype=float), kind))
                s2 = max(s2, matrix_norm(
                    np.asarray(w.omega2(x, u), dtype=float), kind))
                s12 = max(s12, matrix_norm(w.d1w2(x, u), kind))
        return np.array([s1, s2, s12])

    n = max(int(resolution), 3)
    prev = sups(n)
    converged = False
    while n < max_resolution:
        n = 2 * n - 1
        cur = sups(n)
        if np.all(cur - prev <= rel_stop * np.maximum(np.abs(cur), 1e-300)):
            prev = cur
            converged = True
            break
        prev = cur
    tag = f"grid-sampled({n}x{n})" if converged else \
        f"grid-sampled({n}x{n}, unconverged)"
    return ConnectionBounds(
        B1=inflation * float(prev[0]),
        B2=inflation * float(prev[1]),
        B12=inflation * float(prev[2]),
        lambda_J=w.j_interval.length(),
        provenance=tag,
    )


@dataclass(frozen=True)
class SineCurveRow:
    b_requested: float
    b_used: float
    norm_P: float
    beta_b: float
    ratio: float
    norm_P_op: float
    norm_P_rev: float
    inverse_defect: float
    passed: bool
    error: Optional[str] = None


@dataclass(frozen=True)
class SineCurveReport:
    rows: tuple
    bound: float
    bounds: ConnectionBounds
    passed: bool


def _sine_paths(a: float, b: float):
    g1 = ScalarPath(eval=lambda t: t, deriv=lambda t: 1.0,
                    domain=Interval(a, b))
    g2 = ScalarPath(
        eval=lambda t: math.sin(1.0 / t),
        deriv=lambda t: -math.cos(1.0 / t) / (t * t),
        domain=Interval(a, b),
    )
    return Curve(g1, g2, a, b)


def sine_curve_scenario(
    w: ConnectionForm,
    a: float,
    b_list: Sequence[float],
    v: Vector,
    tol: float = 1e-9,
    b_floor: float = -1e-4,
    bounds: Optional[ConnectionBounds] = None,
) -> SineCurveReport:
    """Transport along gamma(t) = (t, sin(1/t)) from a < 0 up to each b,
    verifying the two-sided bound 1/C <= ||P(v)|| / ||v|| <= C with
    C = beta(-a).

    Each b is clamped to the cost floor ``b_floor``; the lower bound is
    certified through the reverse path, whose transport norm must obey
    the same C.  Integration failures are reported per-b and the scenario
    continues.
    """
    if not a < 0.0:
        raise ValueError("a must be negative")
    if not (w.m_interval.contains(a) and w.j_interval.contains(-1.0)
            and w.j_interval.contains(1.0)):
        raise DomainViolationError(
            "connection rectangle must contain [a, 0) x [-1, 1]"
        )
    if bounds is None:
        bounds = sample_connection_bounds(w)
    cap = beta_bound(bounds, -a)
    slack = cap * (1.0 + 1e-6)
    kind = w.space.norm_kind
    v_norm = vector_norm(v.entries, kind)
    rows = []
    for b_req in b_list:
        if not (a < b_req < 0.0):
            raise ValueError(f"b = {b_req} not in ({a}, 0)")
        b_used = min(b_req, b_floor)
        curve = _sine_paths(a, b_used)
        beta_b = beta_bound(bounds, b_used - a)
        try:
            p_op = parallel_transport(w, curve, tol)
            p_rev = parallel_transport(w, reverse_curve(curve), tol)
        except IntegrationError as exc:
            rows.append(SineCurveRow(
                b_requested=b_req, b_used=b_used, norm_P=math.nan,
                beta_b=beta_b, ratio=math.nan, norm_P_op=math.nan,
                norm_P_rev=math.nan, inverse_defect=math.nan,
                passed=False, error=str(exc),
            ))
            continue
        pv = p_op.entries @ v.entries
        norm_pv = vector_norm(pv, kind)
        ratio = norm_pv / v_norm if v_norm > 0 else 1.0
        n_op = matrix_norm(p_op.entries, kind)
        n_rev = matrix_norm(p_rev.entries, kind)
        defect = matrix_norm(
            p_rev.entries @ p_op.entries - np.eye(w.space.dim), kind)
        ok = (n_op <= slack and n_rev <= slack
              and ratio <= slack
              and ratio * slack >= 1.0)
        rows.append(SineCurveRow(
            b_requested=b_req, b_used=b_used, norm_P=norm_pv,
            beta_b=beta_b, ratio=ratio, norm_P_op=n_op, norm_P_rev=n_rev,
            inverse_defect=defect, passed=ok,
        ))
    return SineCurveReport(
        rows=tuple(rows), bound=cap, bounds=bounds,
        passed=all(r.passed for r in rows),
    )
