import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import scipy.linalg

from evostab.errors import IntegrationError
from evostab.evolution import (
    CoefficientPath,
    ComparisonInput,
    EvolutionOperator,
    StepStats,
    comparison_bounds,
    evolve,
    param_evolution,
    propagate_vector,
    variation_of_parameters,
)
from evostab.calculus import signed_integrate
from evostab.operators import Vector, VectorSpaceSpec, matrix_norm

from conftest import rk4_propagator, smooth_corpus

SP1 = VectorSpaceSpec(1)
SP2 = VectorSpaceSpec(2)

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def scalar_cos_path():
    return CoefficientPath(eval=lambda t: np.array([[math.cos(t)]]),
                           space=SP1)


def test_zero_coefficient_gives_identity():
    A = CoefficientPath(eval=lambda t: np.zeros((3, 3)),
                        space=VectorSpaceSpec(3))
    for s, t in [(0.0, 0.0), (-2.0, 5.0), (3.0, -1.0)]:
        x = evolve(A, s, t)
        assert np.allclose(x.entries, np.eye(3), atol=1e-12)


def test_scalar_cosine_closed_form():
    A = scalar_cos_path()
    for s, t in [(0.0, math.pi / 2), (1.0, 4.0), (5.0, 2.0)]:
        x = evolve(A, s, t)
        assert x.entries[0, 0] == pytest.approx(
            math.exp(math.sin(t) - math.sin(s)), abs=1e-9)


def test_constant_rotation_generator():
    A = CoefficientPath(eval=lambda t: ROT, space=SP2)
    x = evolve(A, 0.0, 1.3)
    expected = scipy.linalg.expm(1.3 * ROT)
    assert np.max(np.abs(x.entries - expected)) <= 1e-9


def test_backward_is_inverse_of_forward(small_corpus):
    for A in small_corpus:
        x = evolve(A, 0.0, 2.0)
        back = evolve(A, 2.0, 0.0)
        eye = np.eye(A.space.dim)
        assert matrix_norm(back.entries @ x.entries - eye,
                           A.space.norm_kind) <= 1e-8


def test_identity_inverse_cocycle_laws(small_corpus):
    rng = np.random.default_rng(99)
    for A in small_corpus:
        assert np.array_equal(evolve(A, 1.0, 1.0).entries,
                              np.eye(A.space.dim))
        for _ in range(10):
            s, t, u = rng.uniform(0.0, 3.0, size=3)
            xts = evolve(A, s, t).entries
            xst = evolve(A, t, s).entries
            xut = evolve(A, t, u).entries
            xus = evolve(A, s, u).entries
            kind = A.space.norm_kind
            eye = np.eye(A.space.dim)
            assert matrix_norm(xts @ xst - eye, kind) <= 1e-8
            assert matrix_norm(xut @ xts - xus, kind) <= 1e-8


def test_growth_within_coefficient_l1_estimate(small_corpus):
    for A in small_corpus:
        kind = A.space.norm_kind
        for s, t in [(0.0, 1.0), (0.5, 2.5)]:
            budget = signed_integrate(
                lambda tau: matrix_norm(A.eval(tau), kind), s, t)
            for m in (evolve(A, s, t), evolve(A, t, s)):
                assert matrix_norm(m.entries, kind) <= \
                    math.exp(budget) + 1e-6


def test_adaptive_matches_fixed_step_oracle():
    A = smooth_corpus(seed=42, count=1, dims=(3,))[0]
    x = evolve(A, 0.0, 1.5, tol=1e-10)
    oracle = rk4_propagator(A, 0.0, 1.5, h=1e-5)
    assert np.max(np.abs(x.entries - oracle)) <= 1e-7


def test_breakpoint_restart_handles_jump():
    # piecewise-constant scalar coefficient: closed form is a product of
    # two exponentials
    def ev(t):
        return np.array([[1.0 if t < 1.0 else -2.0]])

    A = CoefficientPath(eval=ev, space=SP1, breakpoints=(1.0,))
    x = evolve(A, 0.0, 2.0)
    assert x.entries[0, 0] == pytest.approx(math.exp(1.0) * math.exp(-2.0),
                                            rel=1e-9)


def test_integration_failure_reports_location():
    A = CoefficientPath(eval=lambda t: np.array([[1.0 / (1.0 - t)]]),
                        space=SP1)
    with pytest.raises(IntegrationError) as err:
        evolve(A, 0.0, 1.0)
    assert 0.9 <= err.value.location <= 1.0


def test_propagate_vector_zero_stays_zero():
    A = scalar_cos_path()
    v = propagate_vector(A, 0.0, 3.0, Vector(np.zeros(1), SP1))
    assert np.array_equal(v.entries, np.zeros(1))


def test_propagate_vector_scalar_closed_form():
    A = scalar_cos_path()
    v = propagate_vector(A, 0.0, math.pi / 2, Vector(np.ones(1), SP1))
    assert v.entries[0] == pytest.approx(math.e, abs=1e-9)


def test_propagate_vector_agrees_with_operator_route():
    A = smooth_corpus(seed=5, count=1, dims=(3,))[0]
    v0 = np.array([0.3, -1.2, 0.7])
    via_vec = propagate_vector(A, 0.0, 2.0, Vector(v0, A.space))
    via_op = evolve(A, 0.0, 2.0).entries @ v0
    assert np.max(np.abs(via_vec.entries - via_op)) <= 1e-8


# ---------------------------------------------------------------------------
# variation of parameters


def test_vop_zero_forcing_reduces_to_propagation():
    A = scalar_cos_path()
    x0 = Vector(np.array([2.0]), SP1)
    hom = propagate_vector(A, 0.0, 2.0, x0)
    vop = variation_of_parameters(A, lambda t: np.zeros(1), 0.0, 2.0, x0)
    assert np.max(np.abs(vop.entries - hom.entries)) <= 1e-9


def test_vop_zero_coefficient_integrates_forcing():
    A = CoefficientPath(eval=lambda t: np.zeros((2, 2)), space=SP2)
    g = np.array([0.5, -1.0])
    out = variation_of_parameters(A, lambda t: g, 1.0, 4.0,
                                  Vector(np.array([1.0, 1.0]), SP2))
    assert np.allclose(out.entries, np.array([1.0, 1.0]) + 3.0 * g,
                       atol=1e-10)


def test_vop_scalar_closed_form():
    A = CoefficientPath(eval=lambda t: np.array([[1.0]]), space=SP1)
    out = variation_of_parameters(A, lambda t: np.ones(1), 0.0, 1.0,
                                  Vector(np.zeros(1), SP1))
    assert out.entries[0] == pytest.approx(math.e - 1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# comparison bounds


def test_comparison_equal_coefficients():
    A = scalar_cos_path()
    c = ComparisonInput(A1=A, A2=A, gain=2.0, rate=0.5, sign=1)
    out = comparison_bounds(c, 0.0, 2.0)
    assert out.difference_bound == 0.0
    assert out.growth_bound == pytest.approx(2.0 * math.exp(-1.0))


def test_comparison_specializes_to_l1_estimate():
    zero = CoefficientPath(eval=lambda t: np.zeros((1, 1)), space=SP1)
    A = scalar_cos_path()
    c = ComparisonInput(A1=zero, A2=A, gain=1.0, rate=0.0, sign=1)
    out = comparison_bounds(c, 0.0, 3.0)
    budget = signed_integrate(lambda tau: abs(math.cos(tau)), 0.0, 3.0)
    assert out.growth_bound == pytest.approx(math.exp(budget), rel=1e-9)


def test_comparison_scalar_closed_form_verified_against_propagator():
    zero = CoefficientPath(eval=lambda t: np.zeros((1, 1)), space=SP1)
    one = CoefficientPath(eval=lambda t: np.ones((1, 1)), space=SP1)
    c = ComparisonInput(A1=zero, A2=one, gain=1.0, rate=0.0, sign=1)
    out = comparison_bounds(c, 0.0, 1.0)
    assert out.growth_bound == pytest.approx(math.e, rel=1e-10)
    assert out.difference_bound == pytest.approx(math.e - 1.0, rel=1e-9)
    x = evolve(one, 0.0, 1.0)
    assert x.entries[0, 0] <= out.growth_bound + 1e-9


def test_comparison_dominates_observed_norms(small_corpus):
    for A in small_corpus:
        zero = CoefficientPath(
            eval=lambda t, _d=A.space.dim: np.zeros((_d, _d)), space=A.space)
        c = ComparisonInput(A1=zero, A2=A, gain=1.0, rate=0.0, sign=1)
        for s, t in [(0.0, 1.5), (1.0, 2.0)]:
            out = comparison_bounds(c, s, t)
            for m in (evolve(A, s, t), evolve(A, t, s)):
                assert matrix_norm(m.entries, A.space.norm_kind) <= \
                    out.growth_bound + 1e-6


def test_comparison_input_validation():
    A = scalar_cos_path()
    with pytest.raises(ValueError):
        ComparisonInput(A1=A, A2=A, gain=0.5, rate=0.0, sign=1)
    with pytest.raises(ValueError):
        ComparisonInput(A1=A, A2=A, gain=1.0, rate=0.0, sign=2)
    c = ComparisonInput(A1=A, A2=A, gain=1.0, rate=0.0, sign=-1)
    with pytest.raises(ValueError):
        comparison_bounds(c, 2.0, 1.0)


# ---------------------------------------------------------------------------
# parameter-dependent evolution


def test_param_evolution_zero_everywhere_identity():
    res = param_evolution(lambda x, v: np.zeros((2, 2)),
                          [0.0, 0.5, 1.0], 0.0, [0.5, 1.0], SP2)
    for col in res.propagators:
        for mat in col:
            assert np.allclose(mat, np.eye(2), atol=1e-12)
    assert res.continuity <= 1e-12


def test_param_evolution_separable_scalar():
    res = param_evolution(lambda x, v: np.array([[x]]),
                          [0.0, 0.7, 1.3], 0.5, [0.0, 1.5], SP1)
    for ix, x in enumerate(res.x_grid):
        for iv, v in enumerate(res.v_targets):
            expected = math.exp(x * (v - 0.5))
            assert res.propagators[ix][iv][0, 0] == pytest.approx(
                expected, rel=1e-9)


def test_param_evolution_rotation_family_closed_form():
    # A(x, v) = v R commutes across v: the sweep is a rotation by
    # (v^2 - v0^2)/2, independent of x
    res = param_evolution(lambda x, v: v * ROT, [0.0, 1.0], 1.0,
                          [2.0, 0.5], SP2)
    for iv, v in enumerate(res.v_targets):
        angle = 0.5 * (v * v - 1.0)
        expected = scipy.linalg.expm(angle * ROT)
        for ix in range(2):
            assert np.max(np.abs(res.propagators[ix][iv] - expected)) <= 1e-9
    assert res.continuity <= 1e-9


# ---------------------------------------------------------------------------
# the cached two-parameter operator


def test_query_at_equal_times_is_exact_identity():
    ev = EvolutionOperator(scalar_cos_path(), base=0.0)
    assert np.array_equal(ev.query(2.7, 2.7).entries, np.eye(1))


def test_query_matches_closed_form_and_laws():
    ev = EvolutionOperator(scalar_cos_path(), tol=1e-10, base=0.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        s, t = rng.uniform(0.0, 15.0, size=2)
        x = ev.query(t, s).entries[0, 0]
        assert x == pytest.approx(math.exp(math.sin(t) - math.sin(s)),
                                  abs=1e-8)
    s, t, u = 1.0, 6.5, 12.0
    q = ev.query
    assert matrix_norm(q(t, s).entries @ q(s, t).entries - np.eye(1),
                       "euclidean") <= 1e-8
    assert matrix_norm(q(u, t).entries @ q(t, s).entries - q(u, s).entries,
                       "euclidean") <= 1e-8


def test_concurrent_queries_match_sequential():
    pairs = [(0.5 * i, 0.25 * i + 0.1) for i in range(16)]
    seq_op = EvolutionOperator(scalar_cos_path(), base=0.0)
    sequential = [seq_op.query(t, s).entries.copy() for s, t in pairs]
    par_op = EvolutionOperator(scalar_cos_path(), base=0.0)
    with ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(lambda p: par_op.query(p[1], p[0]).entries,
                                 pairs))
    for a, b in zip(sequential, parallel):
        assert np.array_equal(a, b)


def test_step_stats_accumulate():
    stats = StepStats()
    A = scalar_cos_path()
    evolve(A, 0.0, 1.0, stats=stats)
    assert stats.steps > 0 and stats.rhs_evals > stats.steps
    merged = StepStats()
    merged.merge(stats)
    assert merged.steps == stats.steps
