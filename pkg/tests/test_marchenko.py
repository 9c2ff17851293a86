import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from mkdv_exact.errors import NotUniquelySolvableError, QuadratureError
from mkdv_exact.marchenko import (decay_panels, quadrature_oracle, refine_solution,
                                  solve_all, solve_matrix_equation)
from mkdv_exact.triplet import Triplet

from conftest import EX1_PARAMS, EX2_P, canonical_triplets, complex_triplet, example1, example2


@pytest.mark.parametrize("a,c", EX1_PARAMS)
def test_example1_closed_forms(a, c):
    sols = solve_all(example1(a, c))
    assert sols.P[0, 0] == pytest.approx(c / (2 * a), rel=1e-15)
    assert sols.Q[0, 0] == pytest.approx(c * c / (2 * a), rel=1e-15)
    assert sols.N[0, 0] == pytest.approx(1 / (2 * a), rel=1e-15)


def test_example1_unit_values():
    sols = solve_all(example1(1.0, 2.0))
    assert (sols.P[0, 0], sols.Q[0, 0], sols.N[0, 0]) == (1.0, 2.0, 0.5)


def test_example2_p_matrix():
    sols = solve_all(example2())
    assert np.abs(sols.P - EX2_P).max() <= 1e-13


@settings(max_examples=40, deadline=None)
@given(canonical_triplets())
def test_against_scipy_sylvester(t):
    A, B, C = t.A, t.B, t.C
    sols = solve_all(t)
    for got, ref in (
        (sols.P, scipy.linalg.solve_sylvester(A, A, B @ C)),
        (sols.Q, scipy.linalg.solve_sylvester(A.T, A, C.T @ C)),
        (sols.N, scipy.linalg.solve_sylvester(A, A.T, B @ B.T)),
    ):
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-11 * np.abs(ref).max())


@settings(max_examples=40, deadline=None)
@given(canonical_triplets())
def test_residuals_and_nq_identity(t):
    res = solve_all(t).residuals(t)
    assert res["sylvester"] <= 1e-12
    assert res["lyapunov_q"] <= 1e-12
    assert res["lyapunov_n"] <= 1e-12
    assert res["nq_p2"] <= 1e-10


@settings(max_examples=30, deadline=None)
@given(canonical_triplets())
def test_q_n_symmetric_positive_definite(t):
    sols = solve_all(t)
    assert sols.q_asymmetry <= 1e-12 and sols.n_asymmetry <= 1e-12
    assert np.linalg.eigvalsh(sols.Q).min() > 0
    assert np.linalg.eigvalsh(sols.N).min() > 0


def test_residuals_catch_corruption():
    t = example2()
    sols = solve_all(t)
    bad = type(sols)(sols.P + 1e-3, sols.Q, sols.N)
    res = bad.residuals(t)
    assert res["nq_p2"] > 1e-5 and res["sylvester"] > 1e-5


def test_not_uniquely_solvable():
    A = np.diag([1.0, -1.0])
    with pytest.raises(NotUniquelySolvableError):
        solve_matrix_equation(A, A, np.ones((2, 2)))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        solve_matrix_equation(np.eye(2), np.eye(3), np.eye(2))


def test_general_sylvester_against_scipy():
    rng = np.random.default_rng(4)
    L = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    R = rng.normal(size=(4, 4)) + 3 * np.eye(4)
    rhs = rng.normal(size=(4, 4))
    np.testing.assert_allclose(solve_matrix_equation(L, R, rhs),
                               scipy.linalg.solve_sylvester(L, R, rhs), rtol=1e-11, atol=1e-13)


def test_refinement_reduces_extended_residual():
    t = example2()
    A, B, C = t.A, t.B, t.C
    sols = solve_all(t)
    Pw = refine_solution(A, A, B @ C, sols.P)
    assert Pw.dtype == np.longdouble
    Aw = A.astype(np.longdouble)
    res = np.abs(Aw @ Pw + Pw @ Aw - (B @ C).astype(np.longdouble)).max()
    assert res < 1e-17


def test_refinement_leaves_large_errors_alone():
    t = example2()
    A, B, C = t.A, t.B, t.C
    bad = solve_all(t).P + 1e-3
    out = refine_solution(A, A, B @ C, bad)
    assert np.array_equal(out, bad.astype(np.longdouble))


@pytest.mark.parametrize("make", [lambda: example1(1.0, 2.0), lambda: example1(0.5, 1.0),
                                  example2, complex_triplet])
@pytest.mark.parametrize("which", ["P", "Q", "N"])
def test_quadrature_oracle(make, which):
    t = make()
    sols = solve_all(t)
    exact = getattr(sols, which)
    quad = quadrature_oracle(t, which)
    assert np.abs(quad - exact).max() <= 1e-8 * np.abs(exact).max()


def test_oracle_rejects_unknown_matrix():
    with pytest.raises(ValueError):
        quadrature_oracle(example2(), "X")


def test_decay_panels_integrates_exponential():
    nodes, w = decay_panels(lambda s: np.exp(-2 * s), 0.0, 0.5)
    assert np.sum(w * np.exp(-2 * nodes)) == pytest.approx(0.5, rel=1e-14)


def test_decay_panels_failure():
    with pytest.raises(QuadratureError):
        decay_panels(lambda s: np.ones_like(s), 0.0, 1.0, max_panels=10)


def test_oracle_panel_budget():
    with pytest.raises(QuadratureError):
        quadrature_oracle(Triplet([[0.01]], [[1.0]], [[1.0]]), "P", max_panels=3)


@given(st.floats(0.2, 3.0), st.floats(-3.0, 3.0).filter(lambda c: abs(c) > 0.1))
@settings(max_examples=30, deadline=None)
def test_scalar_p_formula(a, c):
    assert solve_all(example1(a, c)).P[0, 0] == pytest.approx(c / (2 * a), rel=1e-14)
