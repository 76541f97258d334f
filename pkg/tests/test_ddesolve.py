import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from acceptance import integrator_order_ratio
from ddesolve import (
    IntegrationError, Outcome, SolverSettings, Trajectory, Unbounded, amplitude_slope_fit, channel_shares,
    classify, detect_period, first_harmonic, integrate, per_period_amplitudes, scan_alpha_star,
    seed_history, stabilization_experiment, stabilization_run, step_for, unstable_fixed_basis,
)
from model import ModelError, Params, control_matrix
from pipeline import CONFIG_PATH, read_yaml
from spectral import center_fixed_dim, isotypical_basis
from symgroup import named_group, symmetry_residual


def _oscillator(t, z, delayed=()):
    return np.array([z[1], -z[0]])


def test_rk4_on_an_ode_is_fourth_order_accurate():
    traj = integrate(lambda t, z, d: -z, np.array([1.0]), 2.0, 0.01)
    assert traj.t_end == pytest.approx(2.0)
    assert abs(traj.y[-1, 0] - math.exp(-2.0)) < 1e-9


def test_step_halving_on_a_delay_equation_gives_order_four():
    assert integrator_order_ratio() == pytest.approx(16, abs=2)


def test_dense_output_interpolates_between_knots():
    traj = integrate(_oscillator, np.array([1.0, 0.0]), 10.0, 0.01)
    ts = np.array([0.123, 4.567, 9.871])
    np.testing.assert_allclose(traj(ts)[:, 0], np.cos(ts), atol=1e-8)
    np.testing.assert_allclose(traj.derivative(ts)[:, 0], -np.sin(ts), atol=1e-7)
    with pytest.raises(ValueError):
        traj(11.0)


def test_delayed_history_is_read_through_hermite_knots():
    tau = math.pi / 2
    traj = integrate(lambda t, z, d: -d[0], lambda s: np.array([math.cos(s)]), 6.0, tau / 100, delays=(tau,),
                     history_deriv=lambda s: np.array([-math.sin(s)]))
    assert traj.t_start == pytest.approx(-tau)
    np.testing.assert_allclose(traj(np.array([1.0, 3.0, 5.5]))[:, 0], np.cos([1.0, 3.0, 5.5]), atol=1e-7)


def test_integrate_rejects_bad_steps():
    with pytest.raises(IntegrationError):
        integrate(_oscillator, np.zeros(2), 1.0, 0.0)
    with pytest.raises(IntegrationError, match="exceeds delay"):
        integrate(_oscillator, np.zeros(2), 1.0, 0.5, delays=(0.1,))
    with pytest.raises(IntegrationError):
        integrate(_oscillator, np.zeros(2), 1.0, 0.01, delays=(-1.0,))


def test_blow_up_stops_with_the_partial_trajectory():
    with pytest.raises(Unbounded) as info:
        integrate(lambda t, z, d: z, np.array([1.0]), 50.0, 0.01, overflow_guard=100.0)
    traj = info.value.trajectory
    assert traj is not None
    assert 4.0 < traj.t_end < 5.0


def test_period_and_amplitude_of_a_harmonic_orbit():
    traj = integrate(_oscillator, np.array([2.0, 0.0]), 40 * math.pi, 2 * math.pi / 200)
    T = detect_period(traj, 0)
    assert T == pytest.approx(2 * math.pi, rel=1e-6)
    assert first_harmonic(traj, 0, T, 5) == pytest.approx(2.0, rel=1e-6)
    np.testing.assert_allclose(per_period_amplitudes(traj, T, 3), 2.0, rtol=1e-3)


def test_step_for_divides_every_delay():
    s = SolverSettings()
    T = 6.3
    h = step_for(T, (Fraction(1, 3), Fraction(2, 3)), s)
    for f in (Fraction(1, 3), Fraction(2, 3)):
        n = float(f) * T / h
        assert n == pytest.approx(round(n), abs=1e-9)
    assert h <= T / s.steps_per_period + 1e-12
    assert step_for(T, (), s) == pytest.approx(T / s.steps_per_period)
    fine = SolverSettings(steps_per_period=10, min_steps_per_delay=8)
    assert float(Fraction(1, 6)) * T / step_for(T, (Fraction(1, 6),), fine) == pytest.approx(8)


def test_settings_come_from_the_yaml_defaults():
    s = SolverSettings.from_config(read_yaml(CONFIG_PATH))
    assert s.steps_per_period == 200
    assert s.tune_tol == pytest.approx(1e-4)
    assert s.residual_rel_tol == pytest.approx(1e-3)
    assert s.min_channel_share == pytest.approx(0.5)
    assert SolverSettings.from_config(None) == SolverSettings()


def test_seed_history_lies_near_a_symmetric_orbit():
    H = named_group("-Z4c")
    x, dx = seed_history(H, 0.5, 0.55, 0.5, np.random.default_rng(1), transverse=0.0)
    seed = SimpleNamespace(t_start=-4 * math.pi, t_end=0.0,
                           positions=lambda t: np.array([x(s)[:8] for s in np.atleast_1d(t)]))
    assert symmetry_residual(seed, H, 2 * math.pi) < 1e-12
    assert np.max(np.abs(x(0.0))) > 0
    h = 1e-6
    np.testing.assert_allclose((x(h) - x(-h)) / (2 * h), dx(0.0), atol=1e-6)


def test_seed_covers_every_unstable_channel_the_symmetry_allows():
    basis = isotypical_basis()
    W = unstable_fixed_basis(named_group("+D3"), 0.1, 0.15, 0.05)
    assert W.shape[1] == center_fixed_dim(named_group("+D3"), 0.1, 0.05, conjugate_pair=False) + 1
    assert np.max(np.abs(basis.channel_columns(0).T @ W)) > 0.1
    W = unstable_fixed_basis(named_group("-Z4c"), 0.5, 0.55, 0.5)
    assert np.max(np.abs(basis.channel_columns(0).T @ W)) < 1e-12


def _synchronous_orbit(r=0.7746, periods=20, n=200):
    h = 2 * math.pi / n
    t = h * np.arange(periods * n + 1)
    x = r * np.outer(np.cos(t), np.ones(8))
    v = -r * np.outer(np.sin(t), np.ones(8))
    return Trajectory(0.0, h, np.hstack([x, v]), np.hstack([v, -x]), period=2 * math.pi)


def test_synchronous_orbit_counts_only_for_the_synchronous_branch():
    traj = _synchronous_orbit()
    shares = channel_shares(traj, 2 * math.pi)
    assert shares[0] == pytest.approx(1.0) and shares.sum() == pytest.approx(1.0)
    p, settings = Params(0.15, 0.05, 1.0), SolverSettings()

    H = named_group("+D3")
    outcome, info = classify(traj, H, p, control_matrix("level-set", H), math.pi, settings)
    assert info["symmetry_residual"] < 1e-6 and info["control_residual"] < 1e-6
    assert info["channel_share"] < 1e-12
    assert outcome is Outcome.CONVERGED_OTHER
    assert "channel 1" in info["note"]

    H = named_group("+S4")
    outcome, info = classify(traj, H, p, control_matrix("level-set", H), math.pi, settings)
    assert outcome is Outcome.STABILIZED_TARGET
    assert info["channel_share"] == pytest.approx(1.0)


def test_stabilization_needs_alpha_above_the_branch_point():
    with pytest.raises(ModelError):
        stabilization_run("-Z4c", None, 0.5, 1.0, 0.5)


def test_slope_fit_validates_offsets():
    with pytest.raises(ValueError):
        amplitude_slope_fit("-Z3t", 0.5, [0.01, 0.02])
    with pytest.raises(ModelError):
        amplitude_slope_fit("-Z4c", 0.5, [0.01, 0.02, 0.03])


@pytest.mark.slow
def test_minus_z4c_is_stabilized_inside_its_domain(tmp_path):
    verdict, traj = stabilization_run("-Z4c", None, 0.5, 1.0, 0.55, seed=42)
    assert verdict.outcome is Outcome.STABILIZED_TARGET
    assert verdict.symmetry_residual < 1e-3 * verdict.amplitude
    assert verdict.control_residual < 1e-3 * verdict.amplitude
    assert verdict.tau == pytest.approx(verdict.period / 4, rel=1e-3)
    out = tmp_path / "traj.csv"
    traj.to_csv(str(out), t_from=0.0)
    df = pd.read_csv(out)
    assert list(df.columns[:3]) == ["t", "x1", "x2"] and df["t"].min() >= 0.0


@pytest.mark.slow
def test_minus_z4c_is_not_stabilized_outside_its_domain():
    verdict = stabilization_experiment("-Z4c", None, 1.0, 0.5, 1.05, seed=42)
    assert verdict.outcome is not Outcome.STABILIZED_TARGET


@pytest.mark.slow
def test_alpha_scan_reports_the_largest_stabilized_value():
    best, verdicts = scan_alpha_star("-Z4c", None, 0.5, 1.0, [0.52, 0.55], seed=42)
    assert len(verdicts) == 2
    assert best == pytest.approx(0.55)


@pytest.mark.slow
def test_branch_amplitude_grows_like_the_square_root_of_the_offset():
    fit = amplitude_slope_fit("-Z3t", 0.5, [0.01, 0.02, 0.03, 0.04, 0.05])
    assert fit.slope == pytest.approx(4.0, rel=0.15)
    assert len(fit.points) == 5


@pytest.mark.slow
def test_synchronous_branch_amplitude_slope():
    fit = amplitude_slope_fit("+S4", 0.5, [0.01, 0.02, 0.03, 0.04, 0.05])
    assert fit.slope == pytest.approx(4.0, rel=0.15)


@pytest.mark.slow
@pytest.mark.parametrize("a", [0.05, 0.1])
def test_plus_d3_is_not_stabilized_by_its_level_set_control(a):
    verdict = stabilization_experiment("+D3", None, a, 1.0, 2 * a + 0.05, seed=42)
    assert verdict.outcome is not Outcome.STABILIZED_TARGET
