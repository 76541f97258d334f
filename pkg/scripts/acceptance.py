# scripts/acceptance.py
"""
End-to-end checks of the toolkit against reference group listings, closed forms
and simulations. run_acceptance returns one row per check.
"""

from __future__ import annotations

import logging
import math
import time
from fractions import Fraction
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from ddesolve import Outcome, SolverSettings, amplitude_slope_fit, integrate, stabilization_experiment
from domains import gamma, psi, sample_domain, self_intersection_check
from model import B_MATRIX, ControlLaw, Params, control_matrix
from spectral import (
    DELAYED_ROW_GROUPS, center_fixed_dim, char_system_eq2, crossing_derivative,
    equilibrium_spectrum_eq1, factorization_error, hopf_curve_tangent, isotypical_basis,
)
from symgroup import GroupElement, known_labels, kernel, level_set, named_group

log = logging.getLogger(__name__)

MINUS_Z3T = [
    (1, "()", "0"), (1, "(245)(386)", "1/3"), (1, "(254)(368)", "2/3"),
    (-1, "(17)(28)(35)(46)", "0"), (-1, "(17)(265843)", "1/3"),
    (-1, "(17)(234856)", "2/3"), (-1, "()", "1/2"), (-1, "(245)(386)", "5/6"),
    (-1, "(254)(368)", "1/6"), (1, "(17)(28)(35)(46)", "1/2"),
    (1, "(17)(265843)", "5/6"), (1, "(17)(234856)", "1/6"),
]

KERNEL_MINUS_D2D = [
    (1, "()"), (-1, "(13)(24)(57)(68)"), (1, "(15)(28)(37)(46)"), (-1, "(17)(26)(35)(48)"),
    (-1, "(17)(28)(35)(46)"), (1, "(15)(26)(37)(48)"), (-1, "(13)(57)"), (1, "(24)(68)"),
]

# 4 * (avg - I) for the kernel average of -D2d
CONTROL_MINUS_D2D = [
    [-3, 0, -1, 0, 1, 0, -1, 0],
    [0, -4, 0, 0, 0, 0, 0, 0],
    [-1, 0, -3, 0, -1, 0, 1, 0],
    [0, 0, 0, -4, 0, 0, 0, 0],
    [1, 0, -1, 0, -3, 0, -1, 0],
    [0, 0, 0, 0, 0, -4, 0, 0],
    [-1, 0, 1, 0, -1, 0, -3, 0],
    [0, 0, 0, 0, 0, 0, 0, -4],
]


def element_set(rows) -> frozenset:
    return frozenset(GroupElement.parse(*r) if len(r) == 3 else GroupElement.parse(r[0], r[1], "0") for r in rows)


def check_groups(seed: int) -> Tuple[bool, str]:
    for label in known_labels():
        named_group(label)
    mz3 = named_group("-Z3t")
    ok_z3 = mz3.elements == element_set(MINUS_Z3T)
    ok_d2 = kernel(named_group("-D2d")).elements == element_set(KERNEL_MINUS_D2D)
    return ok_z3 and ok_d2, f"{len(known_labels())} groups closed; -Z3t listing {'matches' if ok_z3 else 'differs'}; kernel(-D2d) {'matches' if ok_d2 else 'differs'}"


def check_isotypical(seed: int) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    basis = isotypical_basis()
    worst = 0.0
    for _ in range(10):
        p = Params(float(rng.uniform(-1, 3)), float(rng.uniform(0, 2)))
        lin = p.alpha * np.eye(8) + 0.5 * p.a * B_MATRIX
        worst = max(worst, float(np.max(np.abs(basis.to_basis(lin) - basis.A0(p)))))
    return worst <= 1e-12, f"max |Q^T A Q - A0| = {worst:.2e}"


def check_control_matrix(seed: int) -> Tuple[bool, str]:
    spec = control_matrix(ControlLaw.KERNEL_AVERAGE, named_group("-D2d"))
    exact = spec.exact_avg()
    got = [[4 * (exact[i, j] - (1 if i == j else 0)) for j in range(8)] for i in range(8)]
    want = [[Fraction(v) for v in row] for row in CONTROL_MINUS_D2D]
    return got == want, "exact rational comparison of 4(avg - I)"


def check_factorization(seed: int) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for label in DELAYED_ROW_GROUPS:
        spec = control_matrix(ControlLaw.LEVEL_SET_AVERAGE, named_group(label))
        for _ in range(20):
            lam = complex(rng.uniform(-1, 1), rng.uniform(-3, 3))
            p = Params(float(rng.uniform(0, 2)), float(rng.uniform(0.01, 1)), float(rng.uniform(0, 3)))
            T = float(rng.uniform(1, 10))
            worst = max(worst, factorization_error(p, spec, T, lam))
    return worst <= 1e-10, f"max relative error {worst:.2e} over {20 * len(DELAYED_ROW_GROUPS)} samples"


def check_designed_roots(seed: int) -> Tuple[bool, str]:
    H = named_group("+Z3t")
    a = 0.3
    worst = 0.0
    for b in (0.1, 1.0, 5.0):
        cs = char_system_eq2(Params(2 * a, a, b), H)
        worst = max(worst, abs(complex(cs.rows[5](1j))), abs(complex(cs.rows[6](-1j))))
    cs0 = char_system_eq2(Params(2 * a, a, 0.0), H)
    zero_b = max(abs(complex(cs0.rows[i](1j))) for i in (4, 5, 6))
    cs00 = char_system_eq2(Params(0.0, 0.0, 0.0), H)
    zero_ab = abs(complex(cs00.rows[0](1j)))
    ok = worst <= 1e-12 and zero_b <= 1e-12 and zero_ab <= 1e-12
    return ok, f"rows 6/7 residual {worst:.1e}; b=0 rows 5-7 {zero_b:.1e}; a=b=0 row 1 {zero_ab:.1e}"


def check_crossing(seed: int) -> Tuple[bool, str]:
    H = named_group("+Z3t")
    a = 0.3
    worst_d = worst_t = 0.0
    for b in (0.5, 1.0, 2.0):
        fam = char_system_eq2(Params(2 * a, a, b), H).families[5]
        d = crossing_derivative(fam, 1j, 2 * a)
        worst_d = max(worst_d, abs(d - 3 / (6 + math.pi * b)))
        a_prime, t_prime = hopf_curve_tangent(fam, 1.0, 2 * a)
        worst_t = max(worst_t, abs(a_prime), abs(t_prime + 2 * math.pi + 12 / b))
    return worst_d <= 1e-6 and worst_t <= 1e-6, f"|dlam/dalpha - 3/(6+pi b)| <= {worst_d:.1e}; tangent error {worst_t:.1e}"


def check_gamma(seed: int) -> Tuple[bool, str]:
    ga, gb = gamma(2.0)
    e1 = max(abs(ga - math.sqrt(3) / 4), abs(gb - math.sqrt(3)))
    s = np.linspace(1.001, 2.999, 1000)
    pts = np.array([gamma(x) for x in s])
    ratio = np.max(np.abs(pts[:, 0] / pts[:, 1] - (1 + np.cos(s * np.pi / 3)) / 2))
    mono = bool(np.all(np.diff(pts[:, 1]) > 0))
    simple = self_intersection_check()
    e_psi = abs(psi(math.sqrt(3)) - math.sqrt(3) / 4)
    ok = e1 <= 1e-12 and ratio <= 1e-14 and mono and simple and e_psi <= 1e-8
    return ok, f"gamma(2) err {e1:.1e}; ratio err {ratio:.1e}; monotone={mono}; simple={simple}; psi err {e_psi:.1e}"


def check_domain_agreement(seed: int, jobs: Optional[int] = None) -> Tuple[bool, str]:
    df = sample_domain("+Z3t", amax=2.0, bmax=6.0, n=50, jobs=jobs)
    far = df[df["boundary_distance"] > 0.02]
    bad = int((~far["agree"]).sum())
    return bad == 0, f"{len(far)} points away from the boundary, {bad} disagreements"


def check_undelayed_spectrum(seed: int) -> Tuple[bool, str]:
    H = named_group("-D2d")
    a, b = 0.5, 1.0
    below = int(np.sum(equilibrium_spectrum_eq1(Params(a - 0.02, a, b), H).real > 1e-12))
    above = int(np.sum(equilibrium_spectrum_eq1(Params(a + 0.02, a, b), H).real > 1e-12))
    return below == 0 and above == 2, f"unstable eigenvalues {below} below and {above} above alpha0"


def check_supercritical(seed: int, settings: Optional[SolverSettings] = None) -> Tuple[bool, str]:
    fit = amplitude_slope_fit("-Z3t", 0.5, [0.01, 0.02, 0.03, 0.04, 0.05], settings)
    return abs(fit.slope - 4.0) <= 0.6, f"slope {fit.slope:.4f} +- {fit.stderr:.4f}"


def check_stabilization(seed: int, settings: Optional[SolverSettings] = None) -> Tuple[bool, str]:
    good = stabilization_experiment("-Z4c", None, 0.5, 1.0, 0.55, seed, settings)
    bad = stabilization_experiment("-Z4c", None, 1.0, 0.5, 1.05, seed, settings)
    ok_good = (good.outcome is Outcome.STABILIZED_TARGET
               and good.symmetry_residual < 1e-3 * good.amplitude
               and good.control_residual < 1e-3 * good.amplitude)
    ok = ok_good and bad.outcome is not Outcome.STABILIZED_TARGET
    return ok, f"inside: {good.outcome.value}; outside: {bad.outcome.value}"


def check_d3_dimension(seed: int) -> Tuple[bool, str]:
    d3 = center_fixed_dim(named_group("+D3"), 0.0, 0.0)
    z3 = center_fixed_dim(level_set(named_group("+Z3t")), 0.6, 0.3)
    return d3 == 4 and z3 == 2, f"+D3: {d3}, level set of +Z3t: {z3}"


def check_d3_obstruction(seed: int, settings: Optional[SolverSettings] = None) -> Tuple[bool, str]:
    outs = [stabilization_experiment("+D3", None, a, 1.0, 2 * a + 0.05, seed, settings).outcome for a in (0.05, 0.1)]
    return all(o is not Outcome.STABILIZED_TARGET for o in outs), ", ".join(o.value for o in outs)


def integrator_order_ratio(n_coarse: int = 10, t_end: float = 10.0) -> float:
    """Error ratio under step halving for x'(t) = -x(t - pi/2), exact solution cos t."""
    tau = math.pi / 2

    def rhs(t, z, delayed):
        return -delayed[0]

    errs = []
    for n in (n_coarse, 2 * n_coarse):
        h = tau / n
        steps = int(round(t_end / h))
        traj = integrate(rhs, lambda s: np.array([math.cos(s)]), steps * h, h, delays=(tau,),
                         history_deriv=lambda s: np.array([-math.sin(s)]))
        errs.append(abs(traj.y[-1, 0] - math.cos(traj.t_end)))
    return errs[0] / errs[1]


def check_order(seed: int) -> Tuple[bool, str]:
    r = integrator_order_ratio()
    return abs(r - 16) <= 2, f"error ratio {r:.2f}"


CHECKS: List[Tuple[str, Callable, bool]] = [
    ("group tables", check_groups, False),
    ("isotypical linearization", check_isotypical, False),
    ("control matrix of -D2d", check_control_matrix, False),
    ("characteristic factorization", check_factorization, False),
    ("designed roots of +Z3t", check_designed_roots, False),
    ("crossing derivative and Hopf tangent", check_crossing, False),
    ("boundary curve", check_gamma, False),
    ("domain against spectrum", check_domain_agreement, False),
    ("undelayed control spectrum", check_undelayed_spectrum, False),
    ("supercritical slope", check_supercritical, True),
    ("stabilization of -Z4c", check_stabilization, True),
    ("+D3 center dimension", check_d3_dimension, False),
    ("+D3 obstruction", check_d3_obstruction, True),
    ("integrator order", check_order, False),
]


def run_acceptance(quick: bool = False, seed: int = 42, jobs: Optional[int] = None,
                   settings: Optional[SolverSettings] = None) -> Tuple[pd.DataFrame, List[str]]:
    rows, skipped = [], []
    for name, fn, slow in CHECKS:
        if quick and slow:
            skipped.append(name)
            continue
        kw = {}
        if fn is check_domain_agreement:
            kw["jobs"] = jobs
        elif slow:
            kw["settings"] = settings
        t0 = time.perf_counter()
        try:
            passed, detail = fn(seed, **kw)
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        secs = time.perf_counter() - t0
        log.info(f"{'ok  ' if passed else 'FAIL'} {name} ({secs:.2f}s): {detail}")
        rows.append({"check": name, "passed": bool(passed), "detail": detail, "seconds": round(secs, 3)})
    return pd.DataFrame(rows, columns=["check", "passed", "detail", "seconds"]), skipped
