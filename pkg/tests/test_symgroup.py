from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from symgroup import (
    BASE_GROUPS, GroupElement, GroupError, SymGroup, average_matrix, fixed_subspace,
    format_cycles, full_symmetry_group, kernel, known_labels, level_set, named_group,
    normalize_label, null_basis, parse_cycles, parse_phase, permutation_matrix, symmetry_residual,
    t_zero, time_reversed,
)

BASE_ORDERS = {"S4": 24, "D4z": 8, "D3z": 6, "D2d": 4, "Z4c": 4, "Z3t": 3, "D4d": 8, "D3": 6, "S4-": 24}


def test_parse_cycles_maps_each_symbol_to_its_successor():
    perm = parse_cycles("(17)(265843)")
    assert perm == (7, 6, 2, 3, 8, 5, 1, 4)
    assert format_cycles(perm) == "(17)(265843)"
    assert parse_cycles("()") == tuple(range(1, 9))


@pytest.mark.parametrize("text", ["(19)", "(11)", "17", "(12", "", "(1a)"])
def test_parse_cycles_rejects_malformed_input(text):
    with pytest.raises(GroupError):
        parse_cycles(text)


def test_parse_phase_reduces_mod_one():
    assert parse_phase("5/6") == Fraction(5, 6)
    assert parse_phase("1") == 0
    assert parse_phase("-1/3") == Fraction(2, 3)
    with pytest.raises(GroupError):
        parse_phase("1/0")


def test_permutation_matrix_sends_e_j_to_e_g_of_j():
    M = permutation_matrix("(123)")
    e1 = np.eye(8)[:, 0]
    np.testing.assert_array_equal(M @ e1, np.eye(8)[:, 1])


def test_permutation_matrix_of_a_two_cycle_times_a_six_cycle():
    expected = np.array([
        [0, 0, 0, 0, 0, 0, 1, 0],
        [0, 0, 1, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 1],
        [0, 0, 0, 0, 0, 1, 0, 0],
        [0, 1, 0, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 0, 0, 0],
    ])
    np.testing.assert_array_equal(permutation_matrix("(17)(265843)"), expected)


def test_composition_applies_right_factor_first():
    g1 = GroupElement.parse(1, "(12)")
    g2 = GroupElement.parse(1, "(23)")
    prod = g1 * g2
    assert prod.cycles() == "(123)"
    np.testing.assert_array_equal(prod.matrix(), g1.matrix() @ g2.matrix())


def test_inverse_negates_phase_and_keeps_sign():
    g = GroupElement.parse(-1, "(17)(265843)", "1/3")
    inv = g.inverse()
    assert inv.sign == -1 and inv.phase == Fraction(2, 3)
    assert g * inv == GroupElement.identity()


@pytest.mark.parametrize("label", BASE_GROUPS)
def test_group_orders(label):
    assert len(named_group(label)) == BASE_ORDERS[label]
    assert len(named_group("+" + label)) == 4 * BASE_ORDERS[label]
    assert len(named_group("-" + label)) == 4 * BASE_ORDERS[label]


def test_every_known_label_builds_a_closed_group():
    for label in known_labels():
        H = named_group(label)
        assert GroupElement.identity() in H


def test_full_symmetry_group_has_96_elements_all_at_phase_zero():
    G = full_symmetry_group()
    assert len(G) == 96
    assert all(g.phase == 0 for g in G)


def test_unicode_labels_are_normalized():
    assert normalize_label("−ℤ₃ᵗ") == "-Z3t"
    assert named_group("⁺ℤ₄ᶜ") == named_group("+Z4c")


def test_unknown_label_raises():
    with pytest.raises(GroupError, match="unknown group"):
        named_group("Z7q")


def test_missing_inverse_is_not_a_group():
    elems = frozenset({GroupElement.identity(), GroupElement.parse(1, "(123)")})
    with pytest.raises(GroupError, match="inverse"):
        SymGroup(elems, name="broken")


def test_spatial_element_with_two_phases_is_rejected():
    elems = frozenset({
        GroupElement.identity(),
        GroupElement.parse(1, "(12)", "0"),
        GroupElement.parse(1, "(12)", "1/2"),
    })
    with pytest.raises(GroupError, match="two phases"):
        SymGroup(elems)


def test_minus_z3t_kernel_t0_and_level_set():
    H = named_group("-Z3t")
    ker = kernel(H)
    assert ker.elements == frozenset({GroupElement.identity(), GroupElement.parse(-1, "(17)(28)(35)(46)")})
    assert t_zero(H) == Fraction(1, 6)
    assert set(level_set(H)) == {
        GroupElement.parse(-1, "(254)(368)", "1/6"),
        GroupElement.parse(1, "(17)(234856)", "1/6"),
    }


def test_plus_z4c_t0_is_a_quarter_period_offset_by_half():
    # Z4c phases {0, 1/4, 1/2, 3/4} shifted by 1/2 stay in the same set
    assert t_zero(named_group("+Z4c")) == Fraction(1, 4)


def test_t_zero_requires_a_nontrivial_temporal_part():
    with pytest.raises(GroupError, match="trivial"):
        t_zero(named_group("S4"))


def test_time_reversed_z3t_flips_the_rotation_orientation():
    rev = time_reversed(named_group("Z3t"))
    assert GroupElement.parse(1, "(245)(386)", "2/3") in rev
    assert GroupElement.parse(1, "(254)(368)", "1/3") in rev


def test_fixed_subspaces():
    rotations = SymGroup(frozenset(GroupElement(g.sign, g.perm) for g in named_group("S4")))
    W = fixed_subspace(rotations)
    assert W.shape == (8, 1)
    np.testing.assert_allclose(np.abs(W[:, 0]), np.full(8, 1 / np.sqrt(8)), atol=1e-12)
    assert fixed_subspace(kernel(named_group("-Z3t"))).shape[1] == 4
    assert fixed_subspace([GroupElement.identity()]).shape == (8, 8)


def test_null_basis_uses_an_absolute_cutoff():
    assert null_basis(np.full((16, 8), 1e-16)).shape == (8, 8)
    N = null_basis(np.array([[1.0, 0.0], [0.0, 1e-14]]))
    assert N.shape == (2, 1)
    np.testing.assert_allclose(np.abs(N[:, 0]), [0.0, 1.0], atol=1e-12)
    assert null_basis(np.eye(3)).shape == (3, 0)


def test_average_matrix_exact_and_float_agree():
    ker = kernel(named_group("-D2d"))
    exact = average_matrix(ker, exact=True)
    approx = average_matrix(ker)
    np.testing.assert_allclose(exact.astype(float), approx, atol=1e-15)
    assert isinstance(exact[0, 0], Fraction)
    with pytest.raises(GroupError):
        average_matrix([])


def _fake_traj(fn, t_end=20.0):
    return SimpleNamespace(t_start=0.0, t_end=t_end, positions=fn)


def test_symmetry_residual_vanishes_on_a_symmetric_orbit():
    traj = _fake_traj(lambda t: np.outer(np.cos(t), np.ones(8)))
    assert symmetry_residual(traj, named_group("Z2xO1^o"), 2 * np.pi) < 1e-12


def test_symmetry_residual_detects_a_broken_symmetry():
    e1 = np.eye(8)[0]
    traj = _fake_traj(lambda t: np.outer(np.cos(t), e1))
    assert symmetry_residual(traj, named_group("Z2xO1^o"), 2 * np.pi) > 0.5


def test_symmetry_residual_needs_a_full_period():
    traj = _fake_traj(lambda t: np.zeros((len(t), 8)), t_end=1.0)
    with pytest.raises(ValueError):
        symmetry_residual(traj, named_group("Z3t"), 2 * np.pi)
