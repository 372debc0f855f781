import numpy as np
import pytest

from jconvex.errors import NotCentered, NotNormalized
from jconvex.normalization import (
    NormalizationMap,
    PolynomialMap,
    PushforwardStructure,
    disc_jet_c,
    disc_transport_residual,
    fd_q_derivatives,
    is_normalized,
    levi_in_adapted_coords,
    linear_coefficients,
    normalize_at_origin,
    pushforward_levi_check,
    pushforward_q,
    standard_levi,
)
from jconvex.polyfield import PolyField, real_monomial_pair
from jconvex.structure import StructureField

E1 = np.array([1.0, 0, 0, 0])


def mixed_linear_structure():
    """``Q = A_1 z_1`` with ``A_1 = 0.2 E_12`` plus a zbar-linear part."""
    return StructureField.from_entries(2, {
        (0, 1): 0.2 * PolyField.z(2, 0) + 0.1 * PolyField.zbar(2, 1),
    })


def test_zbar_only_structure_needs_no_change():
    S = StructureField.from_entries(2, {(0, 1): 0.1 * PolyField.zbar(2, 0)})
    F, T = normalize_at_origin(S)
    assert F.is_identity()
    assert T is S


def test_linear_z_entry_is_removed_by_normalization():
    S = mixed_linear_structure()
    F, T = normalize_at_origin(S)
    A, B = linear_coefficients(T)
    assert np.max(np.abs(A)) < 1e-10
    _, B0 = linear_coefficients(S)
    np.testing.assert_allclose(B, B0, atol=1e-12)
    dz, dzb = fd_q_derivatives(PushforwardStructure(S, F).q, 2)
    assert np.max(np.abs(dz)) < 1e-6
    np.testing.assert_allclose(dzb, B0, atol=1e-6)


def test_phi_matches_linear_part():
    S = mixed_linear_structure()
    F, _ = normalize_at_origin(S)
    A, _ = linear_coefficients(S)
    for k, M in enumerate(F.matrices()):
        np.testing.assert_allclose(M, A[k])


def test_normalization_is_idempotent():
    S = StructureField.random(2, seed=3, bound=0.3, degree=2)
    _, T = normalize_at_origin(S)
    F2, _ = normalize_at_origin(T)
    assert F2.is_identity(1e-12)
    assert is_normalized(T)
    assert not is_normalized(S)


def test_uncentered_structure_rejected():
    S = StructureField.from_entries(2, {(0, 1): PolyField.constant(2, 0.1)})
    with pytest.raises(NotCentered):
        normalize_at_origin(S)


def test_truncation_agrees_with_pointwise_pushforward():
    S = StructureField.random(2, seed=11, bound=0.3, degree=2)
    F, T = normalize_at_origin(S, degree=4)
    for scale in (0.05, 0.025):
        w = scale * np.array([0.6 + 0.2j, -0.3 + 0.7j])
        err = np.max(np.abs(T.q(w) - pushforward_q(S, F, w)))
        assert err < 40 * scale**5


def test_identity_pushforward_is_trivial():
    S = StructureField.random(2, seed=2, bound=0.3)
    w = np.array([0.2 - 0.1j, 0.3j])
    np.testing.assert_allclose(pushforward_q(S, PolynomialMap.identity(2), w), S.q(w), atol=1e-14)


def test_newton_inverse_roundtrip():
    F = NormalizationMap.from_phi(0.3 * np.ones((2, 2, 2)))
    w = np.array([[0.1 + 0.05j, -0.02j], [0.05, 0.1]])
    np.testing.assert_allclose(F(F.inverse(w)), w, atol=1e-12)


def test_linear_map_hessian_law():
    M = np.array([[1.0 + 0.5j, 0.2], [-0.3j, 0.8]])
    F = PolynomialMap.linear(M)
    phi = PolyField.norm_squared(2) + real_monomial_pair(2, (1, 0), (0, 1), 0.4 - 0.2j)
    phi = PolyField(2, phi.terms, real=True)
    lhs, rhs, gap = pushforward_levi_check(StructureField.standard(2), F, phi, [0.1, 0.2j],
                                           np.array([0.3, -0.2, 0.5, 0.1]))
    assert gap < 1e-8
    # the pushed structure of a complex-linear map is standard; compare the Hessian law
    v = M @ np.array([0.3 + 0.5j, -0.2 + 0.1j])
    assert rhs == pytest.approx(standard_levi(phi, M @ np.array([0.1, 0.2j]),
                                              np.concatenate([v.real, v.imag])), abs=1e-8)


def test_levi_law_under_normalization_map():
    S = StructureField.random(2, seed=7, bound=0.3)
    F, _ = normalize_at_origin(S)
    _, _, gap = pushforward_levi_check(S, F, PolyField.norm_squared(2), [0.05, -0.03j], E1)
    assert gap < 1e-4


def test_transport_residual_is_small():
    S = StructureField.random(2, seed=5, bound=0.2)
    F, _ = normalize_at_origin(S)
    assert disc_transport_residual(S, F, [0.0, 0.0], [0.05, 0.02j]) < 1e-6


def test_jet_coefficient_vanishes_only_after_normalization():
    S = StructureField.from_entries(2, {(0, 1): 0.2 * PolyField.z(2, 0)})
    _, T = normalize_at_origin(S)
    t = np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2)
    assert np.max(np.abs(disc_jet_c(T, t))) < 1e-5
    assert np.max(np.abs(disc_jet_c(S, t))) > 1e-2


def test_adapted_coordinates_equality():
    S = StructureField.random(2, seed=9, bound=0.3)
    _, T = normalize_at_origin(S)
    r = PolyField.norm_squared(2) + real_monomial_pair(2, (2, 0), (0, 1), 0.5)
    r = PolyField(2, r.terms, real=True)
    for t in (E1, np.array([0.3, -0.5, 0.2, 0.7])):
        _, _, gap = levi_in_adapted_coords(T, r, t)
        assert gap < 1e-4


def test_adapted_coordinates_require_normalization():
    S = StructureField.from_entries(2, {(0, 1): 0.2 * PolyField.z(2, 0)})
    with pytest.raises(NotNormalized):
        levi_in_adapted_coords(S, PolyField.norm_squared(2), E1)


def test_negative_control_gap():
    S = StructureField.from_entries(2, {(0, 1): 0.2 * PolyField.z(2, 0)})
    r = PolyField(2, (PolyField.norm_squared(2) + real_monomial_pair(2, (1, 0), (0, 0))
                      + real_monomial_pair(2, (0, 1), (0, 0))).terms, real=True)
    t = np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2)
    _, _, gap = levi_in_adapted_coords(S, r, t, check=False)
    assert gap > 1e-2


def test_map_serialization():
    F = NormalizationMap.from_phi(np.zeros((2, 2, 2)))
    d = F.to_dict()
    assert d["invertibility_radius"] is None
    assert F.is_identity()
