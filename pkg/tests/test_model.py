from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import null_space

from acceptance import CONTROL_MINUS_D2D
from model import (
    B_MATRIX, BRANCHES, ControlLaw, ModelError, Params, bifurcation_point, branch,
    control_matrix, control_term, controlled_rhs, equivariance_defect, first_order_rhs,
    reduced_system, vdp_rhs,
)
from symgroup import full_symmetry_group, named_group


def test_interaction_matrix_spectrum():
    np.testing.assert_array_equal(B_MATRIX, B_MATRIX.T)
    np.testing.assert_array_equal(B_MATRIX.sum(axis=1), np.zeros(8))
    w = np.sort(np.linalg.eigvalsh(B_MATRIX))
    np.testing.assert_allclose(w, [-6, -4, -4, -4, -2, -2, -2, 0], atol=1e-12)


def test_params_reject_negative_coupling_or_gain():
    with pytest.raises(ModelError):
        Params(0.1, -0.5)
    with pytest.raises(ModelError):
        Params(0.1, 0.5, -1.0)


def test_uncontrolled_field_commutes_with_every_cube_symmetry():
    rng = np.random.default_rng(3)
    p = Params(0.7, 0.4)
    x, v = rng.standard_normal(8), rng.standard_normal(8)
    worst = max(equivariance_defect(g, x, v, p) for g in full_symmetry_group())
    assert worst < 1e-12


def test_kernel_average_of_minus_d2d_is_exact():
    spec = control_matrix(ControlLaw.KERNEL_AVERAGE, named_group("-D2d"))
    assert spec.delay_fraction == 0
    assert len(spec.elements) == 8
    exact = spec.exact_avg()
    want = [[Fraction(v, 4) + (1 if i == j else 0) for j, v in enumerate(row)] for i, row in enumerate(CONTROL_MINUS_D2D)]
    assert exact.tolist() == want


def test_level_set_control_of_plus_z3t():
    spec = control_matrix("level-set", named_group("+Z3t"))
    assert spec.law is ControlLaw.LEVEL_SET_AVERAGE
    assert spec.delay_fraction == Fraction(1, 6)
    assert len(spec.elements) == 2
    np.testing.assert_allclose(spec.gain_matrix(2.0), 2.0 * (spec.avg_matrix - np.eye(8)))


def test_zero_gain_recovers_the_uncontrolled_field():
    rng = np.random.default_rng(5)
    p = Params(0.3, 0.2, 0.0)
    spec = control_matrix(ControlLaw.LEVEL_SET_AVERAGE, named_group("-Z4c"))
    x, v, vd = rng.standard_normal((3, 8))
    np.testing.assert_array_equal(controlled_rhs(p, spec, x, v, vd), vdp_rhs(p, x, v))


def test_control_term_vanishes_on_a_symmetric_velocity():
    spec = control_matrix(ControlLaw.LEVEL_SET_AVERAGE, named_group("-Z4c"))
    p = Params(0.6, 0.5, 1.0)
    mats = [g.matrix().astype(float) for g in spec.elements]
    # vd with r T_h vd the same for every level-set element, v(t) = r T_h v(t - tau)
    N = null_space(np.vstack([m - mats[0] for m in mats[1:]]))
    assert N.shape[1] > 0
    vd = N @ np.random.default_rng(7).standard_normal(N.shape[1])
    v = mats[0] @ vd
    np.testing.assert_allclose(control_term(p, spec, v, vd), 0.0, atol=1e-12)
    assert np.max(np.abs(control_term(p, spec, v, -vd))) > 0


def test_first_order_rhs_stacks_velocity_and_acceleration():
    p = Params(0.5, 0.3)
    rhs = first_order_rhs(p)
    z = np.concatenate((np.full(8, 0.1), np.full(8, -0.2)))
    out = rhs(0.0, z)
    np.testing.assert_array_equal(out[:8], z[8:])
    np.testing.assert_allclose(out[8:], vdp_rhs(p, z[:8], z[8:]))


def test_branch_catalog():
    assert len(BRANCHES) == 12
    assert sorted({b.shift for b in BRANCHES.values()}) == [0, 1, 2, 3]
    assert bifurcation_point("+Z3t", 0.3) == pytest.approx(0.6)
    assert branch("⁻ℤ₄ᶜ").law is ControlLaw.LEVEL_SET_AVERAGE
    with pytest.raises(ModelError):
        branch("+D4z")


@pytest.mark.parametrize("label", ["+S4", "-D4z", "-D2d", "+D4d", "+D2d", "-S4-", "-Z4c", "+Z4c", "-D3z", "+D3"])
def test_instantaneous_reduced_systems_embed_into_the_cube(label):
    rs = reduced_system(label)
    assert rs.delay_fractions == ()
    rng = np.random.default_rng(11)
    p = Params(0.8, 0.35)
    M = rs.embed_matrix()
    for _ in range(5):
        y, v = rng.standard_normal(rs.dim), rng.standard_normal(rs.dim)
        full = vdp_rhs(p, M @ y, M @ v)
        np.testing.assert_allclose(full, M @ rs.vector_field(p, y, v, []), atol=1e-12)


@pytest.mark.parametrize("label", ["-Z3t", "+Z3t"])
def test_delayed_reduced_system_matches_the_first_two_vertices(label):
    rs = reduced_system(label)
    assert rs.case == 4
    assert rs.delay_fractions == (Fraction(1, 3), Fraction(2, 3))
    s = -1.0 if label.startswith("-") else 1.0
    rng = np.random.default_rng(13)
    p = Params(1.1, 0.45)
    y, w = rng.standard_normal(2), rng.standard_normal(2)
    d1, d2 = rng.standard_normal(2)
    x = np.concatenate((y, rng.standard_normal(6)))
    vx = np.array([w[0], w[1], s * d2, d1, d2, s * d1, s * w[0], s * w[1]])
    full = vdp_rhs(p, x, vx)
    reduced = rs.vector_field(p, y, w, [np.array([0.0, d1]), np.array([0.0, d2])])
    np.testing.assert_allclose(full[:2], reduced, atol=1e-12)


def _periodic_pair(t):
    """y1 of period 2pi/3 and y2 of period 2pi, with first and second derivatives."""
    y = np.array([0.4 * np.cos(3 * t) + 0.1 * np.sin(6 * t), 0.5 * np.cos(t) + 0.2 * np.sin(2 * t)])
    dy = np.array([-1.2 * np.sin(3 * t) + 0.6 * np.cos(6 * t), -0.5 * np.sin(t) + 0.4 * np.cos(2 * t)])
    ddy = np.array([-3.6 * np.cos(3 * t) - 3.6 * np.sin(6 * t), -0.5 * np.cos(t) - 0.8 * np.sin(2 * t)])
    return y, dy, ddy


@pytest.mark.parametrize("label", ["-Z3t", "+Z3t"])
def test_delayed_embedding_carries_the_reduced_residual_to_all_vertices(label):
    rs = reduced_system(label)
    p = Params(1.1, 0.45)
    T = 2 * np.pi

    def reduced_residual(t):
        y, dy, ddy = _periodic_pair(t)
        delayed = [_periodic_pair(t - float(f) * T)[1] for f in rs.delay_fractions]
        return ddy - rs.vector_field(p, y, dy, delayed)

    for t in (0.0, 0.37, 1.9, 4.4):
        x, vx, ax = (sum(M @ _periodic_pair(t - float(f) * T)[i] for f, M in rs.embedding) for i in range(3))
        full_residual = ax - vdp_rhs(p, x, vx)
        embedded = sum(M @ reduced_residual(t - float(f) * T) for f, M in rs.embedding)
        np.testing.assert_allclose(full_residual, embedded, atol=1e-12)
        assert np.max(np.abs(full_residual)) > 0.1


def test_van_der_pol_field_is_odd():
    rng = np.random.default_rng(17)
    p = Params(0.9, 0.6)
    x, v = rng.standard_normal((2, 8))
    np.testing.assert_allclose(vdp_rhs(p, -x, -v), -vdp_rhs(p, x, v), atol=1e-14)


@pytest.mark.parametrize("label", ["-Z4c", "+Z3t", "-D2d"])
def test_controlled_field_adds_the_control_term(label):
    H = named_group(label)
    spec = control_matrix(branch(label).law, H)
    rng = np.random.default_rng(19)
    p = Params(0.6, 0.5, 1.3)
    x, v, vd = rng.standard_normal((3, 8))
    np.testing.assert_allclose(controlled_rhs(p, spec, x, v, vd),
                               vdp_rhs(p, x, v) + control_term(p, spec, v, vd), atol=1e-14)
    if spec.delay_fraction == 0:
        np.testing.assert_allclose(control_term(p, spec, v, vd), spec.gain_matrix(p.b) @ v, atol=1e-12)


def test_reduced_system_first_order_form():
    rs = reduced_system("-Z4c")
    rhs = rs.first_order(Params(0.6, 0.5))
    z = np.array([0.1, -0.2, 0.3, 0.4])
    out = rhs(0.0, z)
    np.testing.assert_array_equal(out[:2], z[2:])


def test_reduced_system_requires_a_branch():
    with pytest.raises(ModelError):
        reduced_system("D3")
