# scripts/spectral.py
"""
Linear stability of the controlled equilibrium x = 0.

In the isotypical basis Q the linearization splits into eight scalar rows
    q(lam) = lam^2 + c*lam + 1 - d*lam*exp(-Delta*lam)
with c = b + k*a - alpha, d = b*mu, Delta = t0*T, where k is the channel
shift and mu runs over the eigenvalues of the averaging matrix inside each
isotypical block. Rows are counted in the right half-plane by the argument
principle and cross-checked by Newton localization.
"""

from __future__ import annotations

import cmath
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from model import B_MATRIX, ControlLaw, ControlSpec, Params, control_matrix
from symgroup import GroupElement, SymGroup, normalize_label, null_basis

log = logging.getLogger(__name__)

CHANNEL_SHIFTS = np.array([0, 1, 1, 1, 2, 2, 2, 3])
BLOCKS = ((0, 1), (1, 4), (4, 7), (7, 8))
DELAYED_ROW_GROUPS = ("-Z4c", "-Z3t", "+Z4c", "+Z3t")
ZERO_TOL = 1e-12


class SpectralError(RuntimeError):
    pass


class ContourHit(SpectralError):
    """A root lies on (or numerically at) the counting contour."""


# ---- isotypical basis ----

@dataclass(frozen=True)
class IsotypicalBasis:
    Q: np.ndarray
    shifts: np.ndarray = field(default_factory=lambda: CHANNEL_SHIFTS.copy())
    blocks: Tuple[Tuple[int, int], ...] = BLOCKS

    def to_basis(self, M: np.ndarray) -> np.ndarray:
        return self.Q.T @ M @ self.Q

    def A0(self, p: Params) -> np.ndarray:
        return np.diag(p.alpha - self.shifts * p.a)

    def channel_columns(self, k: int) -> np.ndarray:
        return self.Q[:, self.shifts == k]


def _eigen_projector(lam: float) -> np.ndarray:
    P = np.eye(8)
    for mu in (0.0, -2.0, -4.0, -6.0):
        if mu != lam:
            P = P @ (B_MATRIX - mu * np.eye(8)) / (lam - mu)
    return P


def _gram_schmidt(P: np.ndarray, dim: int) -> np.ndarray:
    """Modified Gram-Schmidt on P e1, P e2, ... keeping the first dim independent images."""
    basis: List[np.ndarray] = []
    for j in range(8):
        w = P[:, j].copy()
        for q in basis:
            w -= (q @ w) * q
        n = np.linalg.norm(w)
        if n > 1e-10:
            basis.append(w / n)
        if len(basis) == dim:
            break
    if len(basis) != dim:
        raise SpectralError(f"eigenspace has dimension {len(basis)}, expected {dim}")
    return np.column_stack(basis)


@functools.lru_cache(maxsize=1)
def isotypical_basis() -> IsotypicalBasis:
    w1 = np.ones((8, 1)) / math.sqrt(8)
    w4 = np.array([1, -1, 1, -1, -1, 1, -1, 1], dtype=float).reshape(8, 1) / math.sqrt(8)
    W2 = _gram_schmidt(_eigen_projector(-2.0), 3)
    W3 = _gram_schmidt(_eigen_projector(-4.0), 3)
    Q = np.hstack([w1, W2, W3, w4])
    Q.setflags(write=False)
    return IsotypicalBasis(Q=Q)


def _check_block_diagonal(C: np.ndarray, basis: IsotypicalBasis, what: str):
    mask = np.ones_like(C, dtype=bool)
    for lo, hi in basis.blocks:
        mask[lo:hi, lo:hi] = False
    off = float(np.max(np.abs(C[mask]))) if mask.any() else 0.0
    if off > 1e-10:
        raise SpectralError(f"{what} is not block diagonal in the isotypical basis (off-block {off:.3e})")


# ---- quasipolynomials ----

@dataclass(frozen=True)
class QuasiPolynomial:
    c: float
    d: complex = 0j
    delta: float = 0.0

    def __post_init__(self):
        d = complex(self.d)
        if self.delta < 0:
            raise SpectralError(f"negative delay {self.delta}")
        if abs(d) < ZERO_TOL:
            object.__setattr__(self, "d", 0j)
            object.__setattr__(self, "delta", 0.0)
        elif self.delta == 0 and abs(d.imag) < ZERO_TOL:
            object.__setattr__(self, "c", float(self.c) - d.real)
            object.__setattr__(self, "d", 0j)
        else:
            object.__setattr__(self, "d", d)

    @property
    def is_quadratic(self) -> bool:
        return self.d == 0

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return lam * lam + self.c * lam + 1 - self.d * lam * np.exp(-self.delta * lam)

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=complex)
        e = np.exp(-self.delta * lam)
        return 2 * lam + self.c - self.d * e + self.d * self.delta * lam * e

    def to_dict(self) -> dict:
        return {"c": float(self.c), "d_re": float(self.d.real), "d_im": float(self.d.imag), "delta": float(self.delta)}


def quasipoly_eval(q: QuasiPolynomial, lam: complex) -> complex:
    return complex(q(lam))


@dataclass(frozen=True)
class RowFamily:
    """One characteristic row as a function of (lam, alpha, T) at fixed a, b."""
    k: int
    a: float
    b: float
    mu: complex
    t0: float

    def at(self, alpha: float, T: float) -> QuasiPolynomial:
        return QuasiPolynomial(self.b + self.k * self.a - alpha, self.b * self.mu, self.t0 * T)

    def partials(self, lam: complex, alpha: float, T: float) -> Tuple[complex, complex, complex]:
        """(q_lam, q_alpha, q_T) at the given point."""
        q = self.at(alpha, T)
        q_lam = complex(q.derivative(lam))
        q_alpha = -lam
        d = self.b * self.mu
        q_T = d * self.t0 * lam * lam * cmath.exp(-lam * self.t0 * T)
        return q_lam, q_alpha, q_T


@dataclass(frozen=True)
class CharSystem:
    rows: Tuple[QuasiPolynomial, ...]
    families: Tuple[RowFamily, ...]
    group: str
    params: Params
    T: float
    mus: Tuple[complex, ...] = ()

    def __call__(self, lam) -> complex:
        out = 1 + 0j
        for q in self.rows:
            out *= complex(q(lam))
        return out

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "alpha": self.params.alpha, "a": self.params.a, "b": self.params.b, "T": self.T,
            "rows": [dict(row=i + 1, channel=int(CHANNEL_SHIFTS[i]) + 1, **q.to_dict()) for i, q in enumerate(self.rows)],
        }


def _block_eigs(block: np.ndarray, what: str) -> List[complex]:
    w, V = np.linalg.eig(block)
    if np.linalg.cond(V) > 1e10:
        raise SpectralError(f"{what}: averaging matrix is not diagonalizable inside an isotypical block")
    out = []
    for mu in w:
        re = 0.0 if abs(mu.real) < ZERO_TOL else float(mu.real)
        im = 0.0 if abs(mu.imag) < ZERO_TOL else float(mu.imag)
        out.append(complex(re, im))

    def key(mu):
        if abs(mu) < ZERO_TOL:
            cat = 3
        elif mu.imag == 0:
            cat = 0
        else:
            cat = 1 if mu.imag > 0 else 2
        return (cat, -mu.real, -mu.imag)

    return sorted(out, key=key)


def char_system(p: Params, spec: ControlSpec, T: float = 2 * math.pi) -> CharSystem:
    basis = isotypical_basis()
    C = basis.to_basis(spec.avg_matrix)
    label = spec.group.label
    _check_block_diagonal(C, basis, f"averaging matrix of {label}")
    t0 = float(spec.delay_fraction)
    mus: List[complex] = []
    for lo, hi in basis.blocks:
        mus.extend(_block_eigs(C[lo:hi, lo:hi], label))
    fams = tuple(RowFamily(int(k), p.a, p.b, mu, t0) for k, mu in zip(basis.shifts, mus))
    rows = tuple(f.at(p.alpha, T) for f in fams)
    return CharSystem(rows, fams, label, p, float(T), tuple(mus))


def char_system_eq2(p: Params, H: SymGroup, T: float = 2 * math.pi) -> CharSystem:
    label = normalize_label(H.name or "")
    if label not in DELAYED_ROW_GROUPS:
        raise SpectralError(f"{H.label} has no characteristic table; expected one of {', '.join(DELAYED_ROW_GROUPS)}")
    return char_system(p, control_matrix(ControlLaw.LEVEL_SET_AVERAGE, H), T)


def full_char_det(p: Params, spec: ControlSpec, T: float, lam: complex) -> complex:
    """det(lam^2 I - lam(alpha I + (a/2)B - bI + b avg e^{-lam tau}) + I) in cube coordinates."""
    tau = float(spec.delay_fraction) * T
    eye = np.eye(8)
    lin = p.alpha * eye + 0.5 * p.a * B_MATRIX - p.b * eye + p.b * spec.avg_matrix * cmath.exp(-lam * tau)
    return complex(np.linalg.det(lam * lam * eye - lam * lin + eye))


def factorization_error(p: Params, spec: ControlSpec, T: float, lam: complex) -> float:
    full = full_char_det(p, spec, T, lam)
    prod = char_system(p, spec, T)(lam)
    return abs(full - prod) / max(abs(full), 1e-300)


def equilibrium_spectrum_eq1(p: Params, H: SymGroup) -> np.ndarray:
    """16 eigenvalues of the undelayed control x'' = (A0 - b B0) x' - x, B0 = I - avg."""
    spec = control_matrix(ControlLaw.KERNEL_AVERAGE, H)
    basis = isotypical_basis()
    C = basis.to_basis(spec.avg_matrix)
    _check_block_diagonal(C, basis, f"kernel average of {H.label}")
    M = basis.A0(p) - p.b * (np.eye(8) - C)
    ms = np.linalg.eigvalsh(0.5 * (M + M.T))
    disc = np.sqrt(ms.astype(complex) ** 2 - 4)
    lams = np.concatenate([(ms + disc) / 2, (ms - disc) / 2])
    return lams[np.lexsort((lams.imag, -lams.real))]


# ---- argument principle ----

@dataclass
class RootReport:
    winding: int
    unstable: int
    neutral: int
    roots: np.ndarray
    agreement: bool

    @property
    def count(self) -> int:
        return self.winding


def _root_bound(q: QuasiPolynomial, margin: float) -> float:
    # |lam| >= 1 and Re lam >= -margin give |lam| <= 1 + |c| + |d| e^{Delta*margin}
    return 1.0 + abs(q.c) + abs(q.d) * math.exp(q.delta * max(margin, 0.0)) + 0.5


def _rect_path(x0, x1, y0, y1):
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    return corners


def _side_winding(q, z0, z1, n, hit_tol, max_depth):
    s = np.linspace(0.0, 1.0, n + 1)
    pts = z0 + (z1 - z0) * s
    vals = q(pts)
    if np.min(np.abs(vals)) < hit_tol:
        raise ContourHit(f"root on contour near {pts[np.argmin(np.abs(vals))]:.6g}")
    total = 0.0
    steps = np.angle(vals[1:] / vals[:-1])
    for i, dphi in enumerate(steps):
        if abs(dphi) <= math.pi / 4:
            total += dphi
        else:
            total += _refine(q, pts[i], pts[i + 1], vals[i], vals[i + 1], hit_tol, max_depth)
    return total


def _refine(q, za, zb, fa, fb, hit_tol, depth):
    dphi = cmath.phase(fb / fa)
    if abs(dphi) <= math.pi / 4:
        return dphi
    if depth <= 0:
        raise ContourHit(f"phase jump unresolved between {za:.6g} and {zb:.6g}")
    zm = 0.5 * (za + zb)
    fm = complex(q(zm))
    if abs(fm) < hit_tol:
        raise ContourHit(f"root on contour near {zm:.6g}")
    return _refine(q, za, zm, fa, fm, hit_tol, depth - 1) + _refine(q, zm, zb, fm, fb, hit_tol, depth - 1)


def winding_number(q, x0, x1, y0, y1, n_side=400, hit_tol=1e-13, max_depth=60, winding_tol=1e-6) -> int:
    """Zeros of the analytic q inside [x0,x1]x[y0,y1], by phase accumulation along the boundary."""
    corners = _rect_path(x0, x1, y0, y1)
    total = sum(_side_winding(q, corners[i], corners[i + 1], n_side, hit_tol, max_depth) for i in range(4))
    w = total / (2 * math.pi)
    n = round(w)
    if abs(w - n) > winding_tol:
        raise SpectralError(f"winding number {w:.9f} is not an integer; increase quadrature")
    return int(n)


def _newton(q: QuasiPolynomial, z: complex, iters: int = 60) -> Optional[complex]:
    for _ in range(iters):
        f = complex(q(z))
        df = complex(q.derivative(z))
        if df == 0:
            return None
        step = f / df
        z -= step
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    return z if abs(complex(q(z))) < 1e-9 else None


def _locate(q, x0, x1, y0, y1, n_expected, depth, opts, found):
    if n_expected == 0:
        return
    size = max(x1 - x0, y1 - y0)
    if n_expected == 1 and (size < 0.25 or depth <= 0):
        z = _newton(q, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        slack = 1e-7 + 1e-6 * size
        if z is not None and x0 - slack <= z.real <= x1 + slack and y0 - slack <= z.imag <= y1 + slack:
            found.append(z)
            return
        if depth <= 0:
            return
    if depth <= 0 or size < 1e-10:
        z = _newton(q, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        if z is not None:
            found.extend([z] * n_expected)
        return
    for frac in (0.5137, 0.4711, 0.5553):
        try:
            if x1 - x0 >= y1 - y0:
                xm = x0 + frac * (x1 - x0)
                halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
            else:
                ym = y0 + frac * (y1 - y0)
                halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
            counts = [winding_number(q, *h, n_side=opts["n_side"], max_depth=opts["max_depth"]) for h in halves]
            break
        except ContourHit:
            log.debug("contour hit while splitting, retrying with another split")
    else:
        return
    for h, n in zip(halves, counts):
        _locate(q, *h, n, depth - 1, opts, found)


def _dedupe(roots: Iterable[complex], tol: float = 1e-8) -> List[complex]:
    out: List[complex] = []
    for z in roots:
        if not any(abs(z - w) < tol for w in out):
            out.append(z)
    return out


def count_unstable_roots(q: QuasiPolynomial, margin: float = 1e-9, neutral_tol: float = 1e-8,
                         n_side: int = 400, max_depth: int = 60) -> RootReport:
    """
    Roots of q with Re lam > -margin, counted inside [-margin, R] x [-R, R] and
    then located by bisection plus Newton. neutral_tol splits them into
    neutral (|Re| <= tol) and unstable (Re > tol) buckets.
    """
    if q.is_quadratic:
        roots = np.roots([1.0, q.c, 1.0]).astype(complex)
        inside = [z for z in roots if z.real > -margin]
        unstable = sum(1 for z in inside if z.real > neutral_tol)
        neutral = sum(1 for z in inside if abs(z.real) <= neutral_tol)
        return RootReport(len(inside), unstable, neutral, np.array(inside, dtype=complex), True)

    R = _root_bound(q, margin)
    x0, x1, y0, y1 = -margin, R, -R, R
    w = winding_number(q, x0, x1, y0, y1, n_side=n_side, max_depth=max_depth)
    found: List[complex] = []
    _locate(q, x0, x1, y0, y1, w, 48, {"n_side": max(64, n_side // 4), "max_depth": max_depth}, found)
    roots = np.array(sorted(found, key=lambda z: (-z.real, z.imag)), dtype=complex)
    agreement = len(roots) == w
    if not agreement:
        log.warning(f"argument principle gave {w} roots but localization found {len(roots)} for {q}")
    unstable = int(np.sum(roots.real > neutral_tol))
    neutral = int(np.sum(np.abs(roots.real) <= neutral_tol))
    return RootReport(w, unstable, neutral, roots, agreement)


def count_system(cs: CharSystem, margin: float = 1e-9, neutral_tol: float = 1e-8) -> List[RootReport]:
    return [count_unstable_roots(q, margin=margin, neutral_tol=neutral_tol) for q in cs.rows]


def root_report_frame(reports: Sequence[RootReport]) -> pd.DataFrame:
    recs = []
    for i, rep in enumerate(reports):
        for z in rep.roots:
            recs.append({"row": i + 1, "channel": int(CHANNEL_SHIFTS[i]) + 1, "re": float(z.real), "im": float(z.imag)})
    return pd.DataFrame(recs, columns=["row", "channel", "re", "im"])


# ---- crossings ----

def crossing_derivative(family: RowFamily, lam0: complex, alpha0: float, T: float = 2 * math.pi,
                        tol: float = 1e-10) -> complex:
    """d lam / d alpha at fixed T along the root through lam0."""
    q = family.at(alpha0, T)
    res = abs(complex(q(lam0)))
    if res > 1e-8:
        raise SpectralError(f"{lam0} is not a root at alpha={alpha0} (|q|={res:.3e})")
    q_lam, q_alpha, _ = family.partials(lam0, alpha0, T)
    if abs(q_lam) < tol:
        raise SpectralError(f"{lam0} is not a simple root (|dq/dlam|={abs(q_lam):.3e})")
    return -q_alpha / q_lam


def hopf_curve_tangent(family: RowFamily, omega0: float, alpha0: float, T0: float = 2 * math.pi) -> Tuple[float, float]:
    """(alpha'(omega), T'(omega)) of the curve on which i*omega stays a root."""
    lam = 1j * omega0
    q = family.at(alpha0, T0)
    res = abs(complex(q(lam)))
    if res > 1e-8:
        raise SpectralError(f"i*{omega0} is not a root at alpha={alpha0}, T={T0} (|q|={res:.3e})")
    q_lam, q_alpha, q_T = family.partials(lam, alpha0, T0)
    J = np.array([[q_alpha.real, q_T.real], [q_alpha.imag, q_T.imag]])
    if abs(np.linalg.det(J)) < 1e-12:
        raise SpectralError("Hopf curve Jacobian is singular")
    rhs = -1j * q_lam
    a_prime, t_prime = np.linalg.solve(J, [rhs.real, rhs.imag])
    return float(a_prime), float(t_prime)


def trace_hopf_root(family: RowFamily, omega: float, alpha_guess: float, T_guess: float) -> Tuple[float, float]:
    """Newton solve of q(i*omega; alpha, T) = 0 for (alpha, T); used to check tangents by finite differences."""
    alpha, T = alpha_guess, T_guess
    lam = 1j * omega
    for _ in range(50):
        f = complex(family.at(alpha, T)(lam))
        _, q_alpha, q_T = family.partials(lam, alpha, T)
        J = np.array([[q_alpha.real, q_T.real], [q_alpha.imag, q_T.imag]])
        da, dT = np.linalg.solve(J, [-f.real, -f.imag])
        alpha, T = alpha + da, T + dT
        if abs(da) + abs(dT) < 1e-14:
            break
    return float(alpha), float(T)


# ---- center space ----

def center_channel_columns(alpha0: float, a: float) -> np.ndarray:
    """Real basis of the x-part of the center space at lam = +-i of the uncontrolled system."""
    basis = isotypical_basis()
    if a == 0:
        return basis.Q if math.isclose(alpha0, 0.0, abs_tol=1e-12) else np.zeros((8, 0))
    hit = [k for k in sorted(set(int(k) for k in basis.shifts))
           if math.isclose(k * a, alpha0, rel_tol=1e-12, abs_tol=1e-12)]
    if not hit:
        return np.zeros((8, 0))
    return np.hstack([basis.channel_columns(k) for k in hit])


def center_fixed_basis(S: Iterable[GroupElement], alpha0: float, a: float) -> np.ndarray:
    """
    Complex 8 x m basis of the vectors w in E_i with exp(-2 pi i theta) r T_h w = w
    for all (r, h, theta) in S. x(t) = Re(w e^{it}) then satisfies the
    spatio-temporal symmetry with period 2 pi.
    """
    cols = center_channel_columns(alpha0, a)
    m = cols.shape[1]
    if m == 0:
        return np.zeros((8, 0), dtype=complex)
    eye = np.eye(m)
    rows = [cmath.exp(-2j * math.pi * float(g.phase)) * (cols.T @ g.matrix() @ cols) - eye for g in S]
    if not rows:
        return cols.astype(complex)
    ns = null_basis(np.vstack(rows).astype(complex))
    return cols @ ns


def center_fixed_dim(S: Iterable[GroupElement], alpha0: float, a: float, conjugate_pair: bool = True) -> int:
    """
    Complex dimension of the part of the center space at lam = +-i fixed by
    every exp(-2 pi i theta) r T_h. With conjugate_pair the E_-i half (fixed by
    the conjugate operators, hence of equal dimension) is added.
    """
    dim = center_fixed_basis(S, alpha0, a).shape[1]
    return 2 * dim if conjugate_pair else dim


def center_fixed_report(S: Sequence[GroupElement], alpha0: float, a: float) -> dict:
    S = list(S)
    return {
        "E_i": center_fixed_dim(S, alpha0, a, conjugate_pair=False),
        "E_i+E_-i": center_fixed_dim(S, alpha0, a, conjugate_pair=True),
    }
