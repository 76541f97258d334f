# scripts/ddesolve.py
"""
Fixed-step RK4 for delay equations with cubic Hermite history (method of
steps), plus the experiments built on it: period detection, delay tuning,
stabilization runs and the branch amplitude fit.

Knots are uniform with spacing h. Every delay is an exact multiple of h in
the tuned runs and h <= tau always, so delayed lookups never extrapolate.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.stats import linregress

from model import (
    ControlLaw, ControlSpec, ModelError, Params, branch, control_matrix,
    control_term, first_order_rhs, reduced_system,
)
from spectral import center_channel_columns, center_fixed_basis, isotypical_basis
from symgroup import SymGroup, named_group, symmetry_residual

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi


class IntegrationError(RuntimeError):
    pass


class Unbounded(IntegrationError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class PeriodNotFound(IntegrationError):
    pass


class TuningError(IntegrationError):
    pass


class Outcome(str, Enum):
    STABILIZED_TARGET = "StabilizedTarget"
    CONVERGED_OTHER = "ConvergedOther"
    UNBOUNDED = "Unbounded"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class SolverSettings:
    steps_per_period: int = 200
    min_steps_per_delay: int = 8
    periods: int = 60
    transient_fraction: float = 0.6
    overflow_guard: float = 1e6
    max_iter: int = 10
    tune_tol: float = 1e-4
    period_window: int = 10
    residual_rel_tol: float = 1e-3
    amplitude_drift: float = 0.01
    stationary_periods: int = 10
    min_amplitude: float = 1e-4
    min_channel_share: float = 0.5

    @classmethod
    def from_config(cls, cfg: Optional[dict]) -> "SolverSettings":
        cfg = cfg or {}
        ig, vd, tn = cfg.get("integrator", {}), cfg.get("verdict", {}), cfg.get("tuning", {})
        d = cls()
        return cls(
            steps_per_period=int(ig.get("steps_per_period", d.steps_per_period)),
            min_steps_per_delay=int(ig.get("min_steps_per_delay", d.min_steps_per_delay)),
            periods=int(ig.get("periods", d.periods)),
            transient_fraction=float(ig.get("transient_fraction", d.transient_fraction)),
            overflow_guard=float(ig.get("overflow_guard", d.overflow_guard)),
            max_iter=int(tn.get("max_iter", d.max_iter)),
            tune_tol=float(tn.get("tol", d.tune_tol)),
            period_window=int(tn.get("period_window", d.period_window)),
            residual_rel_tol=float(vd.get("residual_rel_tol", d.residual_rel_tol)),
            amplitude_drift=float(vd.get("amplitude_drift", d.amplitude_drift)),
            stationary_periods=int(vd.get("stationary_periods", d.stationary_periods)),
            min_amplitude=float(vd.get("min_amplitude", d.min_amplitude)),
            min_channel_share=float(vd.get("min_channel_share", d.min_channel_share)),
        )


# ---- history and dense output ----

class HistoryBuffer:
    """Growable uniform-knot store of (state, derivative) with cubic Hermite lookup."""

    def __init__(self, t0: float, h: float, dim: int, capacity: int = 1024):
        self.t0, self.h, self.dim = float(t0), float(h), dim
        self.y = np.zeros((capacity, dim))
        self.d = np.zeros((capacity, dim))
        self.n = 0

    def append(self, y, d=None):
        if self.n == len(self.y):
            self.y = np.vstack([self.y, np.zeros_like(self.y)])
            self.d = np.vstack([self.d, np.zeros_like(self.d)])
        self.y[self.n] = y
        if d is not None:
            self.d[self.n] = d
        self.n += 1

    def set_derivative(self, i, d):
        self.d[i] = d

    @property
    def t_last(self) -> float:
        return self.t0 + (self.n - 1) * self.h

    def at(self, t: float) -> np.ndarray:
        h = self.h
        u = (t - self.t0) / h
        i = int(math.floor(u))
        if i >= self.n - 1:
            if i == self.n - 1 and abs(u - i) < 1e-9:
                return self.y[i].copy()
            raise IntegrationError(f"history lookup at t={t:.6g} beyond last knot {self.t_last:.6g}")
        if i < 0:
            if i == -1 and abs(u) < 1e-9:
                return self.y[0].copy()
            raise IntegrationError(f"history lookup at t={t:.6g} before first knot {self.t0:.6g}")
        s = u - i
        s2, s3 = s * s, s * s * s
        return ((2 * s3 - 3 * s2 + 1) * self.y[i] + (s3 - 2 * s2 + s) * h * self.d[i]
                + (-2 * s3 + 3 * s2) * self.y[i + 1] + (s3 - s2) * h * self.d[i + 1])

    def freeze(self, **kw) -> "Trajectory":
        return Trajectory(self.t0, self.h, self.y[:self.n].copy(), self.d[:self.n].copy(), **kw)


@dataclass
class Trajectory:
    t_start: float
    h: float
    y: np.ndarray = field(repr=False)
    dy: np.ndarray = field(repr=False)
    period: Optional[float] = None
    delays: Tuple[float, ...] = ()

    def __post_init__(self):
        for arr in (self.y, self.dy):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.y.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(len(self.y))

    @property
    def t_end(self) -> float:
        return self.t_start + self.h * (len(self.y) - 1)

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        span_tol = 1e-9 * max(1.0, abs(self.t_end))
        if np.any(t < self.t_start - span_tol) or np.any(t > self.t_end + span_tol):
            raise ValueError(f"query outside [{self.t_start:.6g}, {self.t_end:.6g}]")
        u = np.clip((t - self.t_start) / self.h, 0.0, len(self.y) - 1)
        i = np.minimum(np.floor(u).astype(int), len(self.y) - 2)
        return i, (u - i)[:, None]

    def __call__(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        i, s = self._locate(t)
        h = self.h
        s2, s3 = s * s, s * s * s
        out = ((2 * s3 - 3 * s2 + 1) * self.y[i] + (s3 - 2 * s2 + s) * h * self.dy[i]
               + (-2 * s3 + 3 * s2) * self.y[i + 1] + (s3 - s2) * h * self.dy[i + 1])
        return out[0] if scalar else out

    def derivative(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        i, s = self._locate(t)
        h = self.h
        s2 = s * s
        out = ((6 * s2 - 6 * s) / h * self.y[i] + (3 * s2 - 4 * s + 1) * self.dy[i]
               + (-6 * s2 + 6 * s) / h * self.y[i + 1] + (3 * s2 - 2 * s) * self.dy[i + 1])
        return out[0] if scalar else out

    def positions(self, t) -> np.ndarray:
        return self(t)[..., : self.dim // 2]

    def velocities(self, t) -> np.ndarray:
        return self(t)[..., self.dim // 2:]

    def tail_history(self) -> Tuple[Callable, Callable]:
        """History functions on (-inf, 0] continuing from the end of this trajectory."""
        end = self.t_end
        return (lambda s: self(end + s)), (lambda s: self.derivative(end + s))

    def to_frame(self, t_from: Optional[float] = None) -> pd.DataFrame:
        m = self.dim // 2
        cols = ["t"] + [f"x{i + 1}" for i in range(m)] + [f"v{i + 1}" for i in range(m)]
        t = self.t
        keep = t >= t_from if t_from is not None else np.ones_like(t, dtype=bool)
        return pd.DataFrame(np.column_stack([t[keep], self.y[keep]]), columns=cols)

    def to_csv(self, path: str, t_from: Optional[float] = None):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        self.to_frame(t_from).to_csv(path, index=False, float_format="%.17g")


# ---- integrator ----

def integrate(rhs: Callable, history: Union[Callable, np.ndarray], t_end: float, h: float,
              delays: Sequence[float] = (), history_deriv: Optional[Callable] = None,
              overflow_guard: float = 1e6) -> Trajectory:
    """
    Integrate z' = rhs(t, z, (z(t - tau_1), ...)) from t = 0 to t_end.

    history is a callable on [-max(delays), 0] (or a constant state). Its
    derivative comes from history_deriv, or from second-order differences of
    the sampled history when not given.
    """
    if h <= 0:
        raise IntegrationError(f"step must be positive, got {h}")
    delays = tuple(float(tau) for tau in delays)
    if any(tau < 0 for tau in delays):
        raise IntegrationError(f"negative delay in {delays}")
    if any(0 < tau < h * (1 - 1e-12) for tau in delays):
        raise IntegrationError(f"step {h:.6g} exceeds delay {min(d for d in delays if d > 0):.6g}")
    if callable(history):
        phi = history
    else:
        z0 = np.asarray(history, dtype=float)
        phi = lambda s: z0  # noqa: E731

    tau_max = max(delays, default=0.0)
    m = max(2, int(math.ceil(tau_max / h - 1e-9))) if tau_max > 0 else 0
    knots = -h * np.arange(m, -1, -1) if m else np.array([0.0])
    past = np.array([np.asarray(phi(s), dtype=float) for s in knots])
    dim = past.shape[1]
    if history_deriv is not None:
        dpast = np.array([np.asarray(history_deriv(s), dtype=float) for s in knots])
    elif len(knots) >= 3:
        dpast = np.gradient(past, h, axis=0, edge_order=2)
    else:
        dpast = np.zeros_like(past)

    n_steps = int(math.ceil(t_end / h - 1e-9))
    buf = HistoryBuffer(knots[0], h, dim, capacity=len(knots) + n_steps + 1)
    for y, d in zip(past, dpast):
        buf.append(y, d)

    def lagged(t):
        return tuple(buf.at(t - tau) for tau in delays)

    z = past[-1].copy()
    t = 0.0
    i0 = len(knots) - 1
    for n in range(n_steps):
        k1 = rhs(t, z, lagged(t))
        buf.set_derivative(i0 + n, k1)
        k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1, lagged(t + 0.5 * h))
        k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2, lagged(t + 0.5 * h))
        k4 = rhs(t + h, z + h * k3, lagged(t + h))
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (n + 1) * h
        buf.append(z)
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > overflow_guard:
            buf.set_derivative(buf.n - 1, k4)
            raise Unbounded(f"state left the ball of radius {overflow_guard:g} at t={t:.6g}",
                            trajectory=buf.freeze(delays=delays))
    buf.set_derivative(buf.n - 1, rhs(t, z, lagged(t)))
    return buf.freeze(delays=delays)


def step_for(T: float, fractions: Sequence[Fraction], settings: SolverSettings) -> float:
    """h ~ T/steps_per_period, shrunk so every delay f*T is a whole number of steps."""
    fr = [Fraction(f) for f in fractions if f != 0]
    if not fr:
        return T / settings.steps_per_period
    den = math.lcm(*[f.denominator for f in fr])
    unit = Fraction(math.gcd(*[int(f * den) for f in fr]), den)
    tau = float(unit) * T
    n = max(settings.min_steps_per_delay, int(math.ceil(tau / (T / settings.steps_per_period))))
    return tau / n


# ---- measurements ----

def _tail_times(traj: Trajectory, transient_fraction: float) -> np.ndarray:
    t = traj.t
    cut = max(0.0, traj.t_start) + transient_fraction * (traj.t_end - max(0.0, traj.t_start))
    return t[t >= cut]


def upward_crossings(traj: Trajectory, coord: int, transient_fraction: float = 0.6) -> np.ndarray:
    ts = _tail_times(traj, transient_fraction)
    if len(ts) < 2:
        return np.array([])
    xs = traj(ts)[:, coord]
    idx = np.nonzero((xs[:-1] < 0) & (xs[1:] >= 0))[0]
    f = lambda s: float(traj(s)[coord])  # noqa: E731
    out = []
    for i in idx:
        lo, hi = ts[i], ts[i + 1]
        out.append(hi if xs[i + 1] == 0 else brentq(f, lo, hi, xtol=1e-13))
    return np.array(out)


def detect_period(traj: Trajectory, coord: int, k: int = 10, transient_fraction: float = 0.6) -> float:
    cr = upward_crossings(traj, coord, transient_fraction)
    if len(cr) < 3:
        raise PeriodNotFound(f"only {len(cr)} upward zero crossings of coordinate {coord + 1}")
    last = cr[-(k + 1):]
    return float(np.mean(np.diff(last)))


def dominant_coord(traj: Trajectory, transient_fraction: float = 0.6) -> int:
    ts = _tail_times(traj, transient_fraction)
    return int(np.argmax(np.max(np.abs(traj.positions(ts)), axis=0)))


def first_harmonic(traj: Trajectory, coord: int, T: float, periods: int, samples_per_period: int = 64) -> float:
    """Amplitude of the e^{2 pi i t/T} component of x_coord over the last `periods` periods."""
    n = periods * samples_per_period
    ts = traj.t_end - periods * T + T * np.arange(n) / samples_per_period
    x = traj(ts)[:, coord]
    spec = np.fft.rfft(x)
    return float(2 * np.abs(spec[periods]) / n)


def per_period_amplitudes(traj: Trajectory, T: float, periods: int) -> np.ndarray:
    amps = []
    for j in range(periods, 0, -1):
        ts = np.linspace(traj.t_end - j * T, traj.t_end - (j - 1) * T, 128)
        amps.append(float(np.max(np.abs(traj.positions(ts)))))
    return np.array(amps)


# ---- delay tuning ----

def tune_period(rhs: Callable, fractions: Sequence[Fraction], history, settings: SolverSettings,
                T0: float = TWO_PI, coord: Optional[int] = None, history_deriv=None) -> Tuple[float, Trajectory]:
    """
    Fixed point T <- period(T) of a system whose delays are f*T for f in fractions.
    Each iteration continues from the tail of the previous run.
    """
    T = float(T0)
    last_jump = None
    growing = 0
    for it in range(settings.max_iter):
        h = step_for(T, fractions, settings)
        delays = tuple(float(f) * T for f in fractions if f != 0)
        traj = integrate(rhs, history, settings.periods * T, h, delays=delays,
                         history_deriv=history_deriv, overflow_guard=settings.overflow_guard)
        c = dominant_coord(traj, settings.transient_fraction) if coord is None else coord
        T_new = detect_period(traj, c, settings.period_window, settings.transient_fraction)
        jump = abs(T_new - T)
        log.debug(f"tuning iteration {it + 1}: T={T:.10f} -> {T_new:.10f}")
        traj.period = T_new
        if jump < settings.tune_tol:
            return T, traj
        if last_jump is not None and jump > last_jump:
            growing += 1
            if growing >= 3:
                raise TuningError(f"delay iteration is not contracting (|dT|={jump:.3e})")
        else:
            growing = 0
        last_jump = jump
        T = T_new
        history, history_deriv = traj.tail_history()
    raise TuningError(f"delay iteration did not settle in {settings.max_iter} steps")


def tune_delay(spec: ControlSpec, p: Params, init, settings: SolverSettings,
               tau0: Optional[float] = None, init_deriv=None) -> Tuple[float, Trajectory]:
    """Returns (tau*, trajectory) with tau* = t0 * T(tau*)."""
    t0 = spec.delay_fraction
    rhs = first_order_rhs(p, spec)
    if t0 == 0 or p.b == 0:
        tau = float(tau0) if tau0 is not None else float(t0) * TWO_PI
        h = TWO_PI / settings.steps_per_period
        traj = integrate(rhs, init, settings.periods * TWO_PI, h, history_deriv=init_deriv,
                         overflow_guard=settings.overflow_guard)
        try:
            traj.period = detect_period(traj, dominant_coord(traj, settings.transient_fraction),
                                        settings.period_window, settings.transient_fraction)
        except PeriodNotFound:
            pass
        return tau, traj
    T0 = float(tau0) / float(t0) if tau0 is not None else TWO_PI
    T, traj = tune_period(rhs, (t0,), init, settings, T0=T0, history_deriv=init_deriv)
    return float(t0) * T, traj


# ---- experiments ----

@dataclass
class ExperimentVerdict:
    outcome: Outcome
    symmetry_residual: float
    control_residual: float
    period: float
    amplitude: float = float("nan")
    tau: float = float("nan")
    group: str = ""
    law: str = ""
    alpha: float = float("nan")
    a: float = float("nan")
    b: float = float("nan")
    seed: int = 0
    channel_share: float = float("nan")
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outcome"] = self.outcome.value
        return d


def unstable_fixed_basis(H: SymGroup, alpha0: float, alpha: float, a: float) -> np.ndarray:
    """
    H-symmetric center directions of the target channel (Hopf point alpha0)
    together with those of every channel whose Hopf point lies below alpha.
    """
    if a == 0:
        return center_fixed_basis(H, 0.0, 0.0)
    levels = sorted({k * a for k in isotypical_basis().shifts.astype(int) if k * a < alpha} | {alpha0})
    return np.hstack([center_fixed_basis(H, lv, a) for lv in levels])


def seed_history(H: SymGroup, alpha0: float, alpha: float, a: float, rng: np.random.Generator,
                 transverse: float = 0.1) -> Tuple[Callable, Callable]:
    """Small symmetric oscillation eps*Re(w e^{it}) plus a generic perturbation of relative size `transverse`."""
    eps = 2.0 * math.sqrt(max(alpha - alpha0, 1e-12))
    W = unstable_fixed_basis(H, alpha0, alpha, a)
    if W.shape[1] == 0:
        log.warning(f"no symmetric center direction for {H.label}; seeding along the whole channel")
        W = center_channel_columns(alpha0, a).astype(complex)
    coef = rng.standard_normal(W.shape[1]) + 1j * rng.standard_normal(W.shape[1])
    w = W @ coef
    w = w / np.max(np.abs(w))
    r1, r2 = rng.standard_normal(8), rng.standard_normal(8)
    r1, r2 = r1 / np.linalg.norm(r1), r2 / np.linalg.norm(r2)
    tp = transverse * eps

    def x(s):
        e = np.exp(1j * s)
        pos = eps * np.real(w * e) + tp * (r1 * math.cos(s) + r2 * math.sin(s))
        vel = eps * np.real(1j * w * e) + tp * (-r1 * math.sin(s) + r2 * math.cos(s))
        return np.concatenate((pos, vel))

    def dx(s):
        e = np.exp(1j * s)
        vel = eps * np.real(1j * w * e) + tp * (-r1 * math.sin(s) + r2 * math.cos(s))
        acc = -eps * np.real(w * e) - tp * (r1 * math.cos(s) + r2 * math.sin(s))
        return np.concatenate((vel, acc))

    return x, dx


def control_residual(traj: Trajectory, p: Params, spec: ControlSpec, tau: float, T: float, n: int = 256) -> float:
    ts = np.linspace(traj.t_end - T, traj.t_end, n)
    v = traj.velocities(ts)
    vd = traj.velocities(ts - tau) if spec.delay_fraction != 0 else v
    return float(max(np.max(np.abs(control_term(p, spec, v[i], vd[i]))) for i in range(n)))


def channel_shares(traj: Trajectory, T: float, n: int = 256) -> np.ndarray:
    """Fraction of the position energy over the last period carried by each isotypical channel."""
    basis = isotypical_basis()
    ts = np.linspace(traj.t_end - T, traj.t_end, n)
    coords = traj.positions(ts) @ basis.Q
    energy = np.array([np.sum(coords[:, basis.shifts == k] ** 2) for k in range(4)])
    return energy / max(float(energy.sum()), 1e-300)


def classify(traj: Trajectory, H: SymGroup, p: Params, spec: ControlSpec, tau: float,
             settings: SolverSettings) -> Tuple[Outcome, dict]:
    ts = _tail_times(traj, settings.transient_fraction)
    amp = float(np.max(np.abs(traj.positions(ts)))) if len(ts) else 0.0
    info = {"amplitude": amp, "symmetry_residual": float("nan"), "control_residual": float("nan"),
            "period": float("nan"), "channel_share": float("nan")}
    if amp < settings.min_amplitude:
        return Outcome.CONVERGED_OTHER, dict(info, note="decayed to the equilibrium")
    try:
        T = traj.period or detect_period(traj, dominant_coord(traj, settings.transient_fraction),
                                         settings.period_window, settings.transient_fraction)
    except PeriodNotFound as e:
        return Outcome.INCONCLUSIVE, dict(info, note=str(e))
    info["period"] = T
    if traj.t_end - max(traj.t_start, 0.0) < (settings.stationary_periods + 1) * T:
        return Outcome.INCONCLUSIVE, dict(info, note="run shorter than the stationarity window")
    info["symmetry_residual"] = symmetry_residual(traj, H, T)
    info["control_residual"] = control_residual(traj, p, spec, tau, T)
    shares = channel_shares(traj, T)
    target = branch(H.label).shift
    info["channel_share"] = float(shares[target])
    amps = per_period_amplitudes(traj, T, settings.stationary_periods)
    drift = float((amps.max() - amps.min()) / max(amps.mean(), 1e-300))
    stationary = drift < settings.amplitude_drift
    tol = settings.residual_rel_tol * amp
    if not stationary:
        return Outcome.INCONCLUSIVE, dict(info, note=f"amplitude drift {drift:.3g}")
    if info["symmetry_residual"] >= tol or info["control_residual"] >= tol:
        return Outcome.CONVERGED_OTHER, dict(info, note="stationary orbit with other symmetry")
    if info["channel_share"] < settings.min_channel_share:
        # the symmetry also admits a lower channel (the synchronous orbit for +D3)
        top = int(np.argmax(shares))
        return Outcome.CONVERGED_OTHER, dict(
            info, note=f"symmetric orbit of channel {top + 1} ({shares[top]:.2f} of the energy), not the target channel {target + 1}")
    return Outcome.STABILIZED_TARGET, info


def stabilization_run(H: Union[SymGroup, str], law: Union[ControlLaw, str, None], a: float, b: float,
                      alpha: float, seed: int = 42, settings: Optional[SolverSettings] = None
                      ) -> Tuple[ExperimentVerdict, Optional[Trajectory]]:
    """Seed near the branch, integrate with the tuned delay and classify the tail."""
    settings = settings or SolverSettings()
    H = named_group(H) if isinstance(H, str) else H
    br = branch(H.label)
    law = ControlLaw(law) if law is not None else br.law
    alpha0 = br.shift * a
    if alpha <= alpha0:
        raise ModelError(f"alpha={alpha} must exceed the bifurcation point {alpha0} of {H.label}")
    p = Params(alpha, a, b)
    spec = control_matrix(law, H)
    rng = np.random.default_rng(seed)
    init, init_d = seed_history(H, alpha0, alpha, a, rng)
    base = dict(group=H.label, law=law.value, alpha=alpha, a=a, b=b, seed=seed)
    log.info(f"stabilizing {H.label} ({law.value}) at a={a}, b={b}, alpha={alpha}, seed={seed}")
    try:
        tau, traj = tune_delay(spec, p, init, settings, init_deriv=init_d)
    except Unbounded as e:
        return ExperimentVerdict(Outcome.UNBOUNDED, float("inf"), float("inf"), float("nan"), note=str(e), **base), e.trajectory
    except (PeriodNotFound, TuningError) as e:
        return ExperimentVerdict(Outcome.INCONCLUSIVE, float("nan"), float("nan"), float("nan"), note=str(e), **base), None
    outcome, info = classify(traj, H, p, spec, tau, settings)
    verdict = ExperimentVerdict(outcome, info["symmetry_residual"], info["control_residual"], info["period"],
                                amplitude=info["amplitude"], tau=tau, channel_share=info["channel_share"],
                                note=info.get("note", ""), **base)
    return verdict, traj


def stabilization_experiment(H: Union[SymGroup, str], law: Union[ControlLaw, str, None], a: float, b: float,
                             alpha: float, seed: int = 42, settings: Optional[SolverSettings] = None) -> ExperimentVerdict:
    return stabilization_run(H, law, a, b, alpha, seed, settings)[0]


def scan_alpha_star(H: Union[SymGroup, str], law, a: float, b: float, alphas: Sequence[float],
                    seed: int = 42, settings: Optional[SolverSettings] = None) -> Tuple[Optional[float], List[ExperimentVerdict]]:
    """Largest alpha on the grid whose verdict is StabilizedTarget (None if none is)."""
    verdicts = [stabilization_experiment(H, law, a, b, al, seed, settings) for al in sorted(alphas)]
    ok = [v.alpha for v in verdicts if v.outcome is Outcome.STABILIZED_TARGET]
    return (max(ok) if ok else None), verdicts


# ---- supercriticality ----

@dataclass
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    rvalue: float
    points: pd.DataFrame = field(repr=False)


def _reduced_seed(dim: int, coord: int, eps: float):
    shape = np.full(dim, 0.1 * eps)
    shape[coord] = eps

    def y(s):
        return np.concatenate((shape * math.cos(s), -shape * math.sin(s)))

    def dy(s):
        return np.concatenate((-shape * math.sin(s), -shape * math.cos(s)))

    return y, dy


def branch_amplitude(label: str, a: float, alpha: float, settings: SolverSettings,
                     measure_periods: int = 20, settle_tol: float = 1e-4, max_chunks: int = 20) -> Tuple[float, float]:
    """(first-harmonic amplitude, period) of the steady orbit of the reduced system."""
    rs = reduced_system(label)
    coord = 1 if rs.case == 4 else 0
    alpha0 = rs.shift * a
    p = Params(alpha, a)
    rhs = rs.first_order(p)
    y, dy = _reduced_seed(rs.dim, coord, 2.0 * math.sqrt(alpha - alpha0))
    T, traj = tune_period(rhs, rs.delay_fractions, y, settings, coord=coord, history_deriv=dy)
    r_prev = first_harmonic(traj, coord, T, measure_periods)
    for _ in range(max_chunks):
        hist, hist_d = traj.tail_history()
        h = step_for(T, rs.delay_fractions, settings)
        delays = tuple(float(f) * T for f in rs.delay_fractions)
        traj = integrate(rhs, hist, settings.periods * T, h, delays=delays, history_deriv=hist_d,
                         overflow_guard=settings.overflow_guard)
        T = detect_period(traj, coord, settings.period_window, settings.transient_fraction)
        r = first_harmonic(traj, coord, T, measure_periods)
        if abs(r - r_prev) < settle_tol * r:
            return r, T
        r_prev = r
    raise IntegrationError(f"amplitude of {label} at alpha={alpha} did not settle")


def amplitude_slope_fit(H: Union[SymGroup, str], a: float, offsets: Sequence[float],
                        settings: Optional[SolverSettings] = None) -> SlopeFit:
    """Least-squares slope of r^2 against alpha - alpha0 along the branch of H."""
    settings = settings or SolverSettings()
    label = H if isinstance(H, str) else H.label
    rs = reduced_system(label)
    if rs.case not in (1, 4):
        raise ModelError(f"amplitude fit is available for single-oscillator and delayed branches, not {label}")
    offsets = sorted(float(o) for o in offsets)
    if len(offsets) < 3:
        raise ValueError(f"need at least 3 alpha offsets, got {len(offsets)}")
    if offsets[0] <= 0:
        raise ValueError("alpha offsets must be positive")
    alpha0 = rs.shift * a
    recs = []
    for off in offsets:
        try:
            r, T = branch_amplitude(label, a, alpha0 + off, settings)
            recs.append({"offset": off, "amplitude": r, "r2": r * r, "period": T})
            log.info(f"{label} alpha-alpha0={off:g}: r={r:.6f}, T={T:.6f}")
        except IntegrationError as e:
            log.warning(f"dropping alpha-alpha0={off:g} for {label}: {e}")
    pts = pd.DataFrame(recs, columns=["offset", "amplitude", "r2", "period"])
    if len(pts) < 3:
        raise IntegrationError(f"only {len(pts)} converged points for {label}; need 3")
    fit = linregress(pts["offset"], pts["r2"])
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.stderr), float(fit.rvalue), pts)
