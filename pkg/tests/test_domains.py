import math

import numpy as np
import pytest

from domains import (
    DOMAIN_COLUMNS, DomainError, DomainKind, domain_spec, gamma, gamma_polyline, in_domain,
    polyline_self_intersects, psi, s_of_b, sample_domain, segments_intersect, self_intersection_check,
)


def test_gamma_closed_form_points():
    assert gamma(1.0) == (0.0, 0.0)
    a, b = gamma(2.0)
    assert a == pytest.approx(math.sqrt(3) / 4, abs=1e-12)
    assert b == pytest.approx(math.sqrt(3), abs=1e-12)


@pytest.mark.parametrize("s", [0.5, 3.0, 3.5])
def test_gamma_is_only_defined_on_its_interval(s):
    with pytest.raises(DomainError):
        gamma(s)


def test_gamma_ratio_and_monotone_height():
    s = np.linspace(1.001, 2.999, 500)
    pts = np.array([gamma(x) for x in s])
    np.testing.assert_allclose(pts[:, 0] / pts[:, 1], (1 + np.cos(s * np.pi / 3)) / 2, rtol=1e-6)
    assert np.all(np.diff(gamma_polyline(1000)[:, 1]) > 0)


def test_psi_inverts_the_height_of_gamma():
    assert psi(math.sqrt(3)) == pytest.approx(math.sqrt(3) / 4, abs=1e-10)
    for b in (0.1, 1.0, 6.0, 50.0):
        assert gamma(s_of_b(b))[1] == pytest.approx(b, rel=1e-10)
    with pytest.raises(DomainError):
        psi(0.0)


def test_gamma_is_a_simple_curve():
    assert self_intersection_check()


def test_polyline_geometry():
    bowtie = np.array([(0, 0), (2, 2), (2, 0), (0, 2)], dtype=float)
    assert polyline_self_intersects(bowtie)
    hook = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
    assert not polyline_self_intersects(hook)
    assert segments_intersect((0, 0), (2, 0), (1, 0), (3, 0))
    assert not segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))


def test_domain_predicates():
    assert in_domain("+Z3t", 0.2, 1.0)
    assert not in_domain("+Z3t", 1.0, 1.0)
    assert in_domain("-Z4c", 0.5, 1.0)
    assert not in_domain("-Z4c", 1.0, 0.5)
    assert not in_domain("-Z4c", 1.0, 1.0)
    assert in_domain("+Z4c", 0.4, 1.0)
    assert not in_domain("+Z4c", 0.6, 1.0)
    assert not in_domain("-Z3t", 0.0, 1.0)


def test_kernel_branches_get_a_half_plane():
    spec = domain_spec("-D2d")
    assert spec.kind is DomainKind.B_LINEAR and spec.slope == 1
    assert domain_spec("-S4-").slope == 3
    assert spec.boundary_distance(1.0, 1.0) == pytest.approx(0.0)
    assert spec.boundary_distance(0.0, 1.0) == pytest.approx(1 / math.sqrt(2))


def test_gamma_branches_measure_distance_to_the_curve():
    spec = domain_spec("+Z3t")
    a, b = gamma(2.0)
    assert spec.boundary_distance(a, b) == pytest.approx(0.0, abs=1e-5)
    d = spec.boundary_distance(a - 0.1, b)
    assert 0.0 < d <= 0.1 + 1e-9


def test_level_set_branch_without_a_table_has_no_domain():
    with pytest.raises(DomainError):
        domain_spec("+D3")
    with pytest.raises(DomainError):
        domain_spec("D3")


def test_empty_grid():
    df = sample_domain("+Z3t", n=0)
    assert list(df.columns) == DOMAIN_COLUMNS
    assert df.empty


@pytest.mark.parametrize("label", ["-Z4c", "+Z3t", "-D2d"])
def test_predicate_agrees_with_the_spectrum_on_a_coarse_grid(label):
    df = sample_domain(label, amax=2.0, bmax=3.0, n=5, jobs=1)
    assert len(df) == 25
    assert list(df.columns) == DOMAIN_COLUMNS
    assert (df["unstable_count"] >= 0).all()
    assert df["agree"].all()
    inside = df[df["inside"]]
    assert (inside["unstable_count"] == 0).all()


@pytest.mark.slow
def test_plus_z3t_domain_on_the_full_grid():
    df = sample_domain("+Z3t", amax=2.0, bmax=6.0, n=50)
    far = df[df["boundary_distance"] > 0.02]
    assert far["agree"].all()
    assert df["inside"].any() and (~df["inside"]).any()
