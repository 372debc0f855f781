import numpy as np
import pytest
from hypothesis import given, strategies as st

from jconvex.errors import NonInvertible, NotCentered, OutOfChart, StructureInvalid
from jconvex.polyfield import PolyField, to_real
from jconvex.structure import (
    StructureField,
    antilinearity_residual,
    dilate,
    j_from_q,
    j_matrix,
    j_standard,
    q_from_j,
    shrink_to_contraction,
)


def random_q(seed, n, norm):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return Q * norm / np.linalg.norm(Q, 2)


def test_standard_matrix_rotates_x_to_y():
    J = j_standard(2)
    np.testing.assert_array_equal(J @ np.array([1.0, 0, 0, 0]), [0, 0, 1.0, 0])


def test_zero_q_gives_standard():
    np.testing.assert_array_equal(j_matrix(np.zeros((3, 3))), j_standard(3))


@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(0.0, 0.95))
def test_j_squares_to_minus_identity(seed, n, norm):
    J = j_matrix(random_q(seed, n, norm))
    np.testing.assert_allclose(J @ J, -np.eye(2 * n), atol=1e-9 / (1 - norm) ** 2)


@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.0, 0.9))
def test_q_recovered_from_j(seed, n, norm):
    Q = random_q(seed, n, norm)
    J = j_matrix(Q)
    np.testing.assert_allclose(q_from_j(J), Q, atol=1e-9)
    assert antilinearity_residual(J) < 1e-9


def test_multiplication_by_i_on_standard_vectors():
    v = np.array([0.3 - 0.2j, 1.1 + 0.5j])
    np.testing.assert_allclose(j_standard(2) @ to_real(v), to_real(1j * v))


def test_operator_norm_one_rejected():
    with pytest.raises(NonInvertible):
        j_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_random_structure_respects_bound():
    S = StructureField.random(2, seed=9, bound=0.3, degree=2)
    assert S.coefficient_bound() <= 0.3 + 1e-12
    assert S.sampled_sup_norm(per_axis=7) <= 0.3 + 1e-12
    assert S.is_centered()


def test_random_structure_is_seeded():
    a = StructureField.random(2, seed=4, bound=0.1)
    b = StructureField.random(2, seed=4, bound=0.1)
    assert a.to_dict() == b.to_dict()


def test_dict_roundtrip():
    S = StructureField.random(2, seed=1, bound=0.2, degree=3)
    assert StructureField.from_dict(S.to_dict()).to_dict() == S.to_dict()


def test_validate_rejects_large_structure():
    S = StructureField.from_entries(2, {(0, 1): PolyField.constant(2, 1.5)})
    with pytest.raises(StructureInvalid):
        S.validate(per_axis=5)


def test_out_of_chart_point():
    with pytest.raises(OutOfChart):
        j_from_q(StructureField.standard(2), [1.0, 0.5])


def test_dilation_rescales_argument():
    S = StructureField.from_entries(2, {(0, 1): 0.2 * PolyField.zbar(2, 0)})
    D = dilate(S, 0.5)
    z = np.array([0.4 + 0.1j, -0.3j])
    np.testing.assert_allclose(D.q(z), S.q(0.5 * z))
    assert D.radius == 2.0


def test_shrink_needs_centered_structure():
    S = StructureField.from_entries(2, {(0, 0): PolyField.constant(2, 0.1)})
    with pytest.raises(NotCentered):
        shrink_to_contraction(S, 0.5)


def test_shrink_meets_theta():
    S = StructureField.from_entries(2, {(0, 1): 2.0 * PolyField.zbar(2, 0)})
    res = shrink_to_contraction(S, 0.5)
    assert res.lam < 1
    assert max(res.sup_bound, res.derivative_bound) <= 0.5 + 1e-12
    assert res.sampled_sup <= res.sup_bound + 1e-12


def test_zbar_linear_roundtrip_at_point():
    S = StructureField.from_entries(2, {(0, 1): 0.1 * PolyField.zbar(2, 0)})
    p = np.array([0.5, 0.0])
    J = j_from_q(S, p)
    np.testing.assert_allclose(J @ J, -np.eye(4), atol=1e-12)
    np.testing.assert_allclose(q_from_j(J), S.q(p), atol=1e-12)


def test_seeded_roundtrip_over_samples(rng):
    S = StructureField.random(2, seed=12, bound=0.3)
    z = rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2))
    z *= (rng.uniform(size=(100, 1)) ** 0.25) / np.linalg.norm(z, axis=-1, keepdims=True)
    Qs = S.q(z)
    np.testing.assert_allclose(q_from_j(S.j(to_real(z))), Qs, atol=1e-10)


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_dilations_compose(lam, mu):
    S = StructureField.random(2, seed=5, bound=0.2, degree=3)
    a = dilate(S, lam * mu)
    b = dilate(dilate(S, lam), mu)
    for ea, eb in zip(a.entries(), b.entries()):
        assert ea.allclose(eb, atol=1e-12)
    assert a.radius == pytest.approx(b.radius)


def test_dilation_example_sup_norm():
    S = StructureField.from_entries(2, {(0, 1): 0.7 * PolyField.zbar(2, 0)})
    D = dilate(S, 0.1)
    assert D.Q[0][1].allclose(0.07 * PolyField.zbar(2, 0))
    assert D.sampled_sup_norm(1.0, per_axis=9) == pytest.approx(0.07)


def test_shrink_example_and_idempotence():
    S = StructureField.from_entries(2, {(0, 1): PolyField.zbar(2, 0)})
    res = shrink_to_contraction(S, 0.05)
    assert res.lam <= 0.05 + 1e-12
    assert res.sampled_sup <= 0.05
    again = shrink_to_contraction(res.structure, 0.05)
    assert again.lam == 1.0
    assert shrink_to_contraction(StructureField.standard(2), 0.5).lam == 1.0


def test_real_field_has_no_imaginary_residue(rng):
    f = PolyField.norm_squared(2) * PolyField.norm_squared(2)
    z = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    raw = PolyField(2, f.terms)(z)
    assert np.max(np.abs(raw.imag)) < 1e-14 * np.max(np.abs(raw.real))
