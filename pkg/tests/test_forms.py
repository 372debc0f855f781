import numpy as np
import pytest
from hypothesis import given, strategies as st

from jconvex.errors import OutOfChart
from jconvex.forms import (
    OneFormSample,
    TwoFormSample,
    circulation,
    d_jstar_exact,
    eval_one_form,
    eval_two_form,
    jstar_covector,
    two_form_matrix,
    two_form_sample,
    two_form_value,
)
from jconvex.polyfield import PolyField
from jconvex.structure import StructureField


def linear_form(M):
    return lambda x: np.einsum("ij,...j->...i", M, x)


@given(st.integers(0, 10_000))
def test_circulation_exact_on_linear_forms(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(4, 4))
    p, X, Y = rng.normal(size=(3, 4))
    # d(Mx)(X, Y) = Y.M.X - X.M.Y
    expected = Y @ M @ X - X @ M @ Y
    got = circulation(linear_form(M), p, X, Y, 1e-2)[0]
    assert abs(got - expected) < 1e-10 * (1 + abs(expected))


def test_standard_dj_star_of_norm_squared_in_one_variable():
    f = PolyField.norm_squared(1)
    S = StructureField.standard(1)
    M = two_form_matrix(jstar_covector(S, f), np.array([[0.2, -0.1]]))[0]
    # J^* d|z|^2 = 2y dx - 2x dy, so d of it is -4 dx^dy
    assert M[0, 1] == pytest.approx(-4.0, abs=1e-9)


def test_circulation_matches_exact_derivatives():
    S = StructureField.random(2, seed=21, bound=0.3, degree=2)
    f = PolyField.norm_squared(2) + PolyField.z(2, 0) * PolyField.zbar(2, 1) * PolyField.zbar(2, 1)
    f = PolyField(2, (f + f.conj()).terms, real=True)
    x = np.array([[0.1, -0.2, 0.15, 0.05], [0.3, 0.0, -0.1, 0.2]])
    approx = two_form_matrix(jstar_covector(S, f), x)
    exact = d_jstar_exact(S, f, x)
    np.testing.assert_allclose(approx, exact, atol=1e-9)


def test_two_form_value_is_antisymmetric():
    S = StructureField.random(2, seed=3, bound=0.2)
    a = jstar_covector(S, PolyField.norm_squared(2))
    p = np.array([0.1, 0.2, -0.1, 0.0])
    X, Y = np.array([1.0, 0, 0.5, 0]), np.array([0, 1.0, 0, -0.3])
    assert two_form_value(a, p, X, Y)[0] == pytest.approx(-two_form_value(a, p, Y, X)[0], abs=1e-12)


def test_two_form_sample_rejects_symmetric_matrix():
    with pytest.raises(ValueError):
        TwoFormSample(np.zeros(1, dtype=complex), np.eye(2))


def test_sample_evaluation_checks_chart():
    form = OneFormSample(np.array([2.0 + 0j]), np.array([1.0, 0.0]))
    assert eval_one_form(form, [3.0, 1.0]) == 3.0
    with pytest.raises(OutOfChart):
        eval_one_form(form, [1.0, 0.0], radius=1.0)


def test_two_form_sample_evaluates_bilinearly():
    sample = two_form_sample(jstar_covector(StructureField.standard(1), PolyField.norm_squared(1)),
                             np.array([0.1 + 0.1j]))
    assert eval_two_form(sample, [1, 0], [0, 1]) == pytest.approx(-4.0, abs=1e-9)
    assert eval_two_form(sample, [2, 0], [0, 1]) == pytest.approx(-8.0, abs=1e-8)
