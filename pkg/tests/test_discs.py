import numpy as np
import pytest
from hypothesis import given, strategies as st

from jconvex.discs import series as ser
from jconvex.discs.grid import DiscGrid, cauchy_green, dbar_fd
from jconvex.discs.solver import (
    DiscConfig,
    circle_means,
    disc_jet,
    eq1_residual,
    five_point_laplacian,
    jet_laplacian,
    laplacian_along_disc,
    solve_disc,
)
from jconvex.discs.sweep import hartogs_sweep, shell_family
from jconvex.errors import OutOfChart
from jconvex.exhaustion import DomainSpec
from jconvex.polyfield import PolyField
from jconvex.structure import StructureField

GRID = DiscGrid(32, 64)


def grid_cg(f):
    nodes = GRID.nodes
    return lambda z: cauchy_green(f(nodes), GRID, z)


# -- Cauchy-Green -------------------------------------------------------------

@pytest.mark.parametrize(
    "f, expected",
    [
        (lambda t: np.ones_like(t), lambda z: np.conj(z)),
        (lambda t: np.conj(t), lambda z: np.conj(z) ** 2 / 2),
        (lambda t: t, lambda z: z * np.conj(z) - 1),
        (lambda t: t * np.conj(t), lambda z: z * np.conj(z) ** 2 / 2),
    ],
)
def test_grid_transform_matches_closed_forms(f, expected):
    z = np.array([0.0, 0.3 + 0.4j, -0.7j, 0.5 - 0.5j, 0.95])
    np.testing.assert_allclose(grid_cg(f)(z), expected(z), atol=1e-10)


def test_grid_transform_inverts_dbar():
    f = lambda t: np.cos(t.real) + 1j * t.imag ** 2
    T = grid_cg(f)
    z = np.array([0.1 + 0.2j, -0.4 + 0.1j, 0.6j])
    np.testing.assert_allclose(dbar_fd(T, z, h=1e-3), f(z), atol=1e-5)


def test_grid_rejects_points_outside_disc():
    with pytest.raises(ValueError):
        cauchy_green(np.ones((32, 64)), GRID, [1.5])


def test_weights_sum_to_pi():
    assert np.sum(GRID.weights) == pytest.approx(np.pi, rel=1e-13)


def random_series(seed, K=6):
    rng = np.random.default_rng(seed)
    a = (rng.normal(size=(K + 1, K + 1)) + 1j * rng.normal(size=(K + 1, K + 1)))
    a[~ser.degree_mask(K)] = 0
    a[ser.degree_mask(K) & (np.add.outer(np.arange(K + 1), np.arange(K + 1)) > K // 2)] = 0
    return a


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_series_product_is_pointwise(s1, s2):
    K = 6
    a, b = random_series(s1, K), random_series(s2, K)
    z = np.array([0.3 + 0.2j, -0.5j])
    np.testing.assert_allclose(ser.evaluate(ser.mul(a, b, K), z),
                               ser.evaluate(a, z) * ser.evaluate(b, z), atol=1e-10)


@given(st.integers(0, 10_000))
def test_series_transform_inverts_dbar(seed):
    a = random_series(seed)
    np.testing.assert_allclose(ser.d_zetabar(ser.cauchy_green(a)), a, atol=1e-12)


@given(st.integers(0, 10_000))
def test_series_and_grid_transforms_agree(seed):
    a = random_series(seed, K=6)
    z = np.array([0.2 - 0.1j, 0.7 + 0.3j])
    grid_vals = cauchy_green(ser.evaluate(a, GRID.nodes), GRID, z)
    np.testing.assert_allclose(grid_vals, ser.evaluate(ser.cauchy_green(a), z), atol=1e-9)


def test_series_conj():
    a = random_series(7)
    z = np.array([0.4 - 0.3j])
    np.testing.assert_allclose(ser.evaluate(ser.conj(a), z), np.conj(ser.evaluate(a, z)))


# -- solver ---------------------------------------------------------------------

def test_standard_structure_gives_affine_disc():
    S = StructureField.standard(2)
    p, v = np.array([0.1, 0.2j]), np.array([0.3, -0.1 + 0.2j])
    disc = solve_disc(S, p, v)
    z = GRID.nodes
    np.testing.assert_allclose(disc(z), p + z[..., None] * v, atol=1e-15)
    assert disc.residual < 1e-14


def test_solution_of_integral_equation_has_affine_holomorphic_part():
    # z - T(-Q(z) conj(z_ζ)) must be affine; T here is the grid quadrature,
    # independent of the series transform used by the solver.
    S = StructureField.random(2, seed=31, bound=0.2, degree=2)
    disc = solve_disc(S, [0.1 + 0.1j, -0.2], [0.3, 0.1j])
    nodes = GRID.nodes
    g = -np.einsum("...ij,...j->...i", S.q(disc(nodes)), np.conj(disc.d_zeta(nodes)))
    zeta = np.array([0.0, 0.4, 0.3j, -0.5 + 0.2j, 0.1 - 0.6j])
    h = disc(zeta) - np.stack([cauchy_green(g[..., i], GRID, zeta) for i in range(2)], axis=-1)
    slope = (h[1:] - h[0]) / zeta[1:, None]
    np.testing.assert_allclose(slope, np.broadcast_to(slope[0], slope.shape), atol=1e-9)


def test_closed_form_disc_satisfies_equation():
    # Q_12 = c zbar_1: z(ζ) = (a exp(2 c s Im ζ), s ζ) with arg a = pi/4
    c, s = 0.1, 0.8
    a = 0.3 * np.exp(1j * np.pi / 4)
    S = StructureField.from_entries(2, {(0, 1): c * PolyField.zbar(2, 0)}, radius=2.0)
    K = 24
    coeffs = np.zeros((K + 1, K + 1, 2), dtype=complex)
    # exp(c s (ζ̄ - ζ) i) expanded as a double series
    from math import factorial
    for j in range(K + 1):
        for k in range(K + 1 - j):
            coeffs[j, k, 0] = a * (-1j * c * s) ** j * (1j * c * s) ** k / (factorial(j) * factorial(k))
    coeffs[1, 0, 1] = s
    zeta = np.array([0.2 + 0.3j, -0.6j, 0.9])
    np.testing.assert_allclose(ser.evaluate(coeffs, zeta)[:, 0], a * np.exp(2 * c * s * zeta.imag))
    assert np.max(eq1_residual(S, coeffs, zeta)) < 1e-14
    disc = solve_disc(S, [a, 0], [0, s])
    assert disc.residual < 1e-8
    np.testing.assert_allclose(disc(zeta)[:, 1], s * zeta, atol=1e-14)


def test_seeded_disc_meets_tolerances():
    S = StructureField.random(2, seed=17, bound=0.05, degree=2)
    disc = solve_disc(S, [0.1, -0.2j], [0.3, 0.2])
    assert disc.residual < 1e-8
    assert disc.match_error < 1e-8
    assert max(disc.picard_counts) <= 20
    assert disc.newton_count <= 10
    np.testing.assert_allclose(disc(np.zeros(1))[0], [0.1, -0.2j], atol=1e-8)


def test_residual_is_small_off_grid():
    S = StructureField.random(2, seed=2, bound=0.2)
    disc = solve_disc(S, [0.0, 0.1], [0.2, 0.1j])
    zeta = np.array([0.123 + 0.456j, -0.77 + 0.1j, 0.99j])
    assert np.max(eq1_residual(S, disc.coeffs, zeta)) < 1e-8


def test_disc_leaving_chart_raises():
    with pytest.raises(OutOfChart):
        solve_disc(StructureField.standard(2), [0.5, 0], [0.8, 0])


def test_disc_serialization_lists_nodes():
    disc = solve_disc(StructureField.standard(1), [0.0], [0.5], DiscConfig(n_r=4, n_theta=8))
    d = disc.to_dict()
    assert len(d["nodes"]) == 32
    assert d["center"] == [[0.0, 0.0]]


def test_jet_of_affine_disc():
    disc = solve_disc(StructureField.standard(2), [0.1, 0], [0.2, 0.1])
    jet = disc_jet(disc)
    np.testing.assert_allclose(jet["t"], [0.2, 0.1], atol=1e-12)
    np.testing.assert_allclose(jet["c"], 0, atol=1e-10)


def test_laplacians_agree_along_disc():
    S = StructureField.random(2, seed=8, bound=0.2)
    f = PolyField.norm_squared(2)
    disc = solve_disc(S, [0.1, 0.1j], [0.2, -0.1])
    assert laplacian_along_disc(disc, f, h=0.02) == pytest.approx(jet_laplacian(disc_jet(disc), f),
                                                                  abs=1e-5)


def test_five_point_laplacian_of_modulus_squared():
    assert five_point_laplacian(lambda z: np.abs(z) ** 2) == pytest.approx(4.0, abs=1e-12)


def test_circle_means_of_subharmonic_function_increase():
    disc = solve_disc(StructureField.standard(2), [0.1, 0], [0.3, 0.2])
    means = circle_means(disc, PolyField.norm_squared(2))
    assert np.all(np.diff(means) > 0)


# -- sweeps -----------------------------------------------------------------------

def test_shell_sweep_exhibits_hartogs_figure():
    shell = DomainSpec.shell(2)
    sweep = hartogs_sweep(StructureField.standard(2), shell.r, shell_family)
    assert sweep.exhibits_hartogs_figure
    assert sweep.to_dict()["exhibits_hartogs_figure"] is True


def test_ball_translates_stay_inside():
    ball = DomainSpec.ball(2)
    path = lambda t: (np.array([0.1 * t, 0]), np.array([0, 0.5]))
    sweep = hartogs_sweep(StructureField.standard(2), ball.r, path, ts=np.linspace(0, 1, 5))
    assert all(v.contained for v in sweep.verdicts)
    assert not sweep.exhibits_hartogs_figure


def test_sweep_records_solver_failures():
    ball = DomainSpec.ball(2)
    path = lambda t: (np.zeros(2), np.array([0.5 + t, 0]))
    sweep = hartogs_sweep(StructureField.standard(2), ball.r, path, ts=[0.0, 1.0])
    assert sweep.verdicts[0].error is None
    assert "OutOfChart" in sweep.verdicts[1].error


def test_small_zbar_structure_disc_iteration_budget():
    S = StructureField.from_entries(2, {(0, 1): 0.05 * PolyField.zbar(2, 0)})
    disc = solve_disc(S, [0, 0], [1, 0], DiscConfig())
    assert disc.residual < 1e-8
    assert max(disc.picard_counts) <= 20


def test_disc_is_natural_under_dilation():
    from jconvex.structure import dilate

    S = StructureField.random(2, seed=40, bound=0.2)
    p, v = np.array([0.1, -0.1j]), np.array([0.3, 0.2])
    lam = 0.5
    base = solve_disc(S, p, v)
    scaled = solve_disc(dilate(S, lam), p / lam, v / lam)
    np.testing.assert_allclose(scaled.values, base.values / lam, atol=1e-8)


def test_picard_steps_contract():
    S = StructureField.random(2, seed=6, bound=0.2)
    disc = solve_disc(S, [0.1, 0], [0.4, 0.2j])
    steps = np.array(disc.picard_steps[0])
    steps = steps[steps > 1e-13]
    assert np.all(steps[1:] < steps[:-1])


def test_mean_value_inequality_for_psh_function():
    S = StructureField.random(2, seed=13, bound=0.1)
    r = PolyField.norm_squared(2)
    disc = solve_disc(S, [0.1, 0.2], [0.3, -0.2j])
    means = circle_means(disc, r)
    centre = float(r.evaluate(disc(np.zeros(1)))[0])
    assert np.all(means >= centre - 1e-10)
