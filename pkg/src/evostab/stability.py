"""Separable systems A(t) = f'(t) G(t, f(t)) and their uniform-stability
certificates.

The certificate of a system is built from two numbers that depend only on
the operator field G, the value interval J, and the sampled time window
(never on the scalar path f):

    gain       N = exp( sup_t  int_J ||G(t, u)|| du )
    variation  V = total variation of t -> G(t, .) in the L1(J) metric

and bounds every propagator of every admissible f by

    ||X(t, s)^{+-1}||  <=  C = N^2 exp(N^{3+2N} V).

C grows doubly exponentially in the gain; when it exceeds the float range
it saturates to +inf and the certificate carries an ``overflow`` flag
(the domination checks remain valid, just uninformative).

Also here: the piecewise-frozen approximation of a separable system, the
substitution identity check (the propagator of f'(t) B(f(t)) equals the
propagator of B composed with f at the endpoints), and certificate
verification against directly integrated propagators.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import (
    Interval,
    OperatorField,
    Partition,
    ScalarPath,
    l1_norm_in_u,
    total_variation_path,
    tv_l1_upper_bound,
)
from .errors import DomainViolationError, IntegrationError, RefinementError
from .evolution import CoefficientPath, EvolutionOperator, evolve
from .expressions import parse_expression
from .operators import VectorSpaceSpec, matrix_norm

__all__ = [
    "SeparableSystem", "BoundCertificate", "FrozenSystem", "VerifyRow",
    "VerificationReport", "assemble_A", "certify", "frozen_system",
    "substitution_check", "verify_certificate", "parse_expression",
]

DEFAULT_CERT_TOL = 1e-8


@dataclass(frozen=True)
class SeparableSystem:
    """The tuple (I, J, G, f) defining A(t) = f'(t) G(t, f(t))."""

    G: OperatorField
    f: ScalarPath
    I: Interval
    J: Interval
    space: VectorSpaceSpec

    def __post_init__(self):
        if not self.J.is_finite():
            raise ValueError("the value interval J must be finite")


def _checked_f_value(sys_J: Interval, f_val: float, t: float) -> float:
    if not sys_J.contains(f_val, tol=1e-12 * max(1.0, abs(f_val))):
        raise DomainViolationError(
            f"f({t}) = {f_val} lies outside J = [{sys_J.lo}, {sys_J.hi}]"
        )
    return f_val


def assemble_A(sys: SeparableSystem) -> CoefficientPath:
    """The coefficient path t -> f'(t) G(t, f(t))."""
    G, f, J = sys.G, sys.f, sys.J

    def eval_A(t):
        u = _checked_f_value(J, float(f(t)), t)
        return float(f.d(t)) * np.asarray(G.eval(t, u), dtype=float)

    bps = tuple(sorted(set(f.breakpoints) | set(G.t_breakpoints)))
    return CoefficientPath(eval=eval_A, space=sys.space, breakpoints=bps,
                           domain=sys.I)


@dataclass(frozen=True)
class FrozenSystem:
    """A separable system with its field held constant on the segments of
    a partition, plus the resulting coefficient path."""

    base: SeparableSystem
    partition: Partition
    coefficient: CoefficientPath

    @staticmethod
    def build(sys: "SeparableSystem", partition: Partition) -> "FrozenSystem":
        return FrozenSystem(base=sys, partition=partition,
                            coefficient=frozen_system(sys, partition))


def frozen_system(sys: SeparableSystem, partition: Partition) -> CoefficientPath:
    """The piecewise-frozen coefficient: on [a_i, a_{i+1}) the field is
    held at G(a_i, .); the final point a_n takes the last segment's value."""
    G, f, J = sys.G, sys.f, sys.J
    pts = partition.points
    if partition.n < 1:
        raise ValueError("partition needs at least two points")

    def eval_frozen(t):
        if t < pts[0] or t > pts[-1]:
            raise DomainViolationError(
                f"t = {t} outside the frozen window [{pts[0]}, {pts[-1]}]"
            )
        i = bisect.bisect_right(pts, t) - 1
        i = min(max(i, 0), len(pts) - 2)
        u = _checked_f_value(J, float(f(t)), t)
        return float(f.d(t)) * np.asarray(G.eval(pts[i], u), dtype=float)

    bps = tuple(sorted(set(f.breakpoints) | set(G.t_breakpoints) | set(pts[1:-1])))
    return CoefficientPath(eval=eval_frozen, space=sys.space, breakpoints=bps,
                           domain=Interval(pts[0], pts[-1]))


def _saturating_bound(gain: float, variation: float):
    """C = gain^2 exp(gain^{3+2 gain} variation), saturated to +inf.

    Returns (bound, log_bound, overflow).
    """
    log_gain = math.log(gain)
    if variation == 0.0:
        log_c = 2.0 * log_gain
        return (math.exp(log_c) if log_c < 709.0 else math.inf,
                log_c, log_c >= 709.0)
    p = (3.0 + 2.0 * gain) * log_gain  # log of gain^{3+2 gain}
    if p >= 709.0:
        return math.inf, math.inf, True
    log_c = 2.0 * log_gain + math.exp(p) * variation
    if log_c >= 709.0:
        return math.inf, log_c, True
    return math.exp(log_c), log_c, False


@dataclass(frozen=True)
class BoundCertificate:
    """The numbers (gain, variation, bound) of a stability certificate,
    plus the sampling metadata that produced them.

    ``bound`` is always reproducible from ``gain`` and ``variation``; the
    constructor enforces that.  Certificates computed from grid samples
    are labeled estimates: the true sup may exceed the sampled one.
    """

    gain: float
    variation: float
    bound: float
    window: Interval
    sup_grid: int
    tolerances: dict = field(default_factory=dict)
    log_bound: float = 0.0
    overflow: bool = False
    sup_converged: bool = True
    variation_mode: str = "double-integral"
    provenance: str = "grid-sampled"

    def __post_init__(self):
        if self.gain < 1.0:
            raise ValueError("certificate gain must be >= 1")
        if self.variation < 0.0:
            raise ValueError("certificate variation must be >= 0")
        bound, log_bound, overflow = _saturating_bound(self.gain, self.variation)
        same = (bound == self.bound) or (
            math.isfinite(bound) and math.isfinite(self.bound)
            and abs(bound - self.bound) <= 1e-12 * bound
        )
        if not same:
            raise ValueError(
                f"stored bound {self.bound} disagrees with "
                f"gain/variation ({bound})"
            )
        object.__setattr__(self, "log_bound", log_bound)
        object.__setattr__(self, "overflow", overflow)

    @staticmethod
    def from_parts(gain, variation, window, sup_grid, tolerances,
                   sup_converged=True, variation_mode="double-integral",
                   provenance="grid-sampled") -> "BoundCertificate":
        bound, _, _ = _saturating_bound(gain, variation)
        return BoundCertificate(
            gain=gain, variation=variation, bound=bound, window=window,
            sup_grid=sup_grid, tolerances=dict(tolerances),
            sup_converged=sup_converged, variation_mode=variation_mode,
            provenance=provenance,
        )


def _dyadic_sup(values_at, lo, hi, seed_points, rel_stop=1e-3,
                max_points=4097):
    """Sup of a function by sampling on dyadically refined grids.

    Returns (sup, n_points, converged).  New refinement levels only
    evaluate the fresh midpoints.
    """
    pts = sorted(set([lo, hi] + [p for p in seed_points if lo < p < hi]))
    while len(pts) < 17:
        mids = [0.5 * (a + b) for a, b in zip(pts, pts[1:])]
        pts = sorted(pts + mids)
    best = max(values_at(p) for p in pts)
    n = len(pts)
    converged = False
    while n < max_points:
        mids = [0.5 * (a + b) for a, b in zip(pts, pts[1:])]
        new_best = max(best, max(values_at(p) for p in mids))
        pts = sorted(pts + mids)
        n = len(pts)
        if new_best - best <= rel_stop * max(abs(new_best), 1e-300):
            best = new_best
            converged = True
            break
        best = new_best
    return best, n, converged


def certify(
    sys: SeparableSystem,
    window: Interval,
    tol: float = DEFAULT_CERT_TOL,
    sup_l1_bound: Optional[float] = None,
) -> BoundCertificate:
    """Stability certificate of a separable system over a compact window.

    The gain comes from a dyadically refined sampled sup of the L1-in-u
    norm (or from ``sup_l1_bound`` when the caller has an analytic bound);
    the variation from the double-integral upper bound, or from
    lambda(J) * variation of t -> G(t) when the field does not depend on u.
    Only G, J and the window enter: the certificate is uniform in f.
    """
    if not window.is_finite():
        raise ValueError("certification window must be finite")
    if not (sys.I.contains(window.lo) and sys.I.contains(window.hi)):
        raise ValueError("window must lie inside the system's time interval")
    G, J = sys.G, sys.J
    l1_tol = min(1e-8, tol)
    if sup_l1_bound is not None:
        sup_val, n_grid, conv = float(sup_l1_bound), 0, True
        provenance = "analytic"
    else:
        sup_val, n_grid, conv = _dyadic_sup(
            lambda t: l1_norm_in_u(G, t, J, l1_tol),
            window.lo, window.hi, list(G.t_breakpoints),
        )
        provenance = "grid-sampled"
    gain = math.exp(sup_val)

    if G.u_independent:
        u_mid = J.midpoint()
        if G.partial_t is not None:
            variation = J.length() * total_variation_path(
                lambda t: np.asarray(G.eval(t, u_mid), dtype=float),
                window, G.t_breakpoints, tol,
                deriv=lambda t: np.asarray(G.partial_t(t, u_mid), dtype=float),
                norm_kind=sys.space.norm_kind,
            )
            variation_mode = "derivative"
        else:
            try:
                variation = J.length() * total_variation_path(
                    lambda t: np.asarray(G.eval(t, u_mid), dtype=float),
                    window, G.t_breakpoints, tol,
                    norm_kind=sys.space.norm_kind,
                )
                variation_mode = "partition-sum"
            except RefinementError as exc:
                variation = float(exc.last) * J.length()
                variation_mode = "partition-sum-unconverged"
                conv = False
    else:
        variation = tv_l1_upper_bound(G, window, J, tol)
        variation_mode = "double-integral"

    return BoundCertificate.from_parts(
        gain=gain, variation=variation, window=window, sup_grid=n_grid,
        tolerances={"certify": tol, "l1": l1_tol},
        sup_converged=conv, variation_mode=variation_mode,
        provenance=provenance,
    )


def substitution_check(
    B: Callable[[float], np.ndarray],
    f: ScalarPath,
    s: float,
    t: float,
    space: VectorSpaceSpec,
    tol: float = 1e-10,
    B_breakpoints: Sequence[float] = (),
) -> float:
    """Defect of the substitution identity.

    Route one integrates the pulled-back system A = f'(t) B(f(t)) from s
    to t; route two integrates B itself between f(s) and f(t).  For exact
    arithmetic both give the same operator; the returned defect is the
    operator-norm difference.
    """
    A = CoefficientPath(
        eval=lambda tau: float(f.d(tau)) * np.asarray(B(float(f(tau))), dtype=float),
        space=space,
        breakpoints=f.breakpoints,
    )
    x_direct = evolve(A, s, t, tol)
    B_path = CoefficientPath(
        eval=lambda u: np.asarray(B(u), dtype=float),
        space=space,
        breakpoints=B_breakpoints,
    )
    y_pulled = evolve(B_path, float(f(s)), float(f(t)), tol)
    return matrix_norm(x_direct.entries - y_pulled.entries, space.norm_kind)


@dataclass(frozen=True)
class VerifyRow:
    s: float
    t: float
    norm_X: float
    norm_Xinv: float
    ratio: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple
    max_observed: float
    max_ratio: float
    passed: bool
    bound: float
    aborted: Optional[str] = None


def verify_certificate(
    sys: SeparableSystem,
    cert: BoundCertificate,
    sample_pairs: Sequence,
    tol: float = 1e-10,
    coefficient: Optional[CoefficientPath] = None,
) -> VerificationReport:
    """Check ||X(t,s)^{+-1}|| <= bound at the given (s, t) pairs.

    ``coefficient`` overrides the assembled system coefficient so frozen
    approximants can be verified against the same certificate.  A pair
    passes when max(||X||, ||X^-1||) <= bound * (1 + 1e-6); an integration
    failure aborts with the rows completed so far.
    """
    pairs = [(float(s), float(t)) for s, t in sample_pairs]
    for s, t in pairs:
        if not (cert.window.contains(s, 1e-12) and cert.window.contains(t, 1e-12)):
            raise ValueError(f"pair ({s}, {t}) outside the certificate window")
        if s > t:
            raise ValueError(f"pair ({s}, {t}) must have s <= t")
    A = coefficient if coefficient is not None else assemble_A(sys)
    span = cert.window.length()
    spacing = span / 64.0 if span <= 64.0 else 1.0
    ev = EvolutionOperator(A, tol=tol, base=cert.window.lo,
                           checkpoint_spacing=max(spacing, 1e-9))
    kind = sys.space.norm_kind
    slack = cert.bound * (1.0 + 1e-6)
    rows = []
    max_obs = 0.0
    aborted = None
    for s, t in pairs:
        try:
            x = ev.query(t, s)
            x_inv = ev.query(s, t)
        except IntegrationError as exc:
            aborted = f"integration failure at pair ({s}, {t}): {exc}"
            break
        n_x = matrix_norm(x.entries, kind)
        n_inv = matrix_norm(x_inv.entries, kind)
        worst = max(n_x, n_inv)
        max_obs = max(max_obs, worst)
        ratio = worst / cert.bound if math.isfinite(cert.bound) else 0.0
        rows.append(VerifyRow(s=s, t=t, norm_X=n_x, norm_Xinv=n_inv,
                              ratio=ratio, passed=worst <= slack))
    max_ratio = (max_obs / cert.bound) if math.isfinite(cert.bound) else 0.0
    passed = aborted is None and all(r.passed for r in rows)
    return VerificationReport(
        rows=tuple(rows), max_observed=max_obs, max_ratio=max_ratio,
        passed=passed, bound=cert.bound, aborted=aborted,
    )
