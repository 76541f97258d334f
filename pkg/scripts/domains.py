# scripts/domains.py
"""
Stability domains in the (a, b) plane.

Groups controlled through the kernel average (and -Z4c, -Z3t, +Z4c) are
stable on a half-plane b > k*a. For +Z3t the domain is bounded by the curve
gamma(s), 1 <= s < 3, and reads a < psi(b) with psi = gamma_1 o gamma_2^-1.
"""

from __future__ import annotations

import concurrent.futures as cf
import functools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from model import ControlLaw, Params, branch, control_matrix
from spectral import SpectralError, char_system, count_unstable_roots
from symgroup import named_group, normalize_label

log = logging.getLogger(__name__)

S_MAX = 3.0
DOMAIN_COLUMNS = ["a", "b", "inside", "unstable_count", "boundary_distance", "agree"]


class DomainError(ValueError):
    pass


class DomainKind(str, Enum):
    B_LINEAR = "b-linear"
    PSI_BOUNDED = "psi-bounded"


@dataclass(frozen=True)
class DomainSpec:
    label: str
    kind: DomainKind
    slope: int = 0

    def contains(self, a: float, b: float) -> bool:
        if a <= 0 or b <= 0:
            return False
        if self.kind is DomainKind.B_LINEAR:
            return b > self.slope * a
        return a < psi(b)

    def boundary_distance(self, a: float, b: float) -> float:
        if self.kind is DomainKind.B_LINEAR:
            return abs(b - self.slope * a) / math.sqrt(1 + self.slope ** 2)
        return _gamma_distance(a, b)


_LEVEL_SET_DOMAINS = {
    "-Z4c": DomainSpec("-Z4c", DomainKind.B_LINEAR, 1),
    "-Z3t": DomainSpec("-Z3t", DomainKind.B_LINEAR, 1),
    "+Z4c": DomainSpec("+Z4c", DomainKind.B_LINEAR, 2),
    "+Z3t": DomainSpec("+Z3t", DomainKind.PSI_BOUNDED),
}


def domain_spec(label: str) -> DomainSpec:
    key = normalize_label(label)
    if key in _LEVEL_SET_DOMAINS:
        return _LEVEL_SET_DOMAINS[key]
    try:
        br = branch(key)
    except ValueError:
        br = None
    if br is not None and br.law is ControlLaw.KERNEL_AVERAGE:
        return DomainSpec(key, DomainKind.B_LINEAR, br.shift)
    raise DomainError(f"no stability domain is known for {label!r}")


# ---- the boundary curve ----

def gamma(s: float) -> Tuple[float, float]:
    if not (1.0 <= s < S_MAX):
        raise DomainError(f"gamma is defined on [1, 3), got s={s}")
    th = s * math.pi / 3
    num = s * s - 1
    sn = math.sin(th)
    return num * (1 + math.cos(th)) / (2 * s * sn), num / (s * sn)


def _gamma2(s: float) -> float:
    return gamma(s)[1]


@functools.lru_cache(maxsize=4096)
def s_of_b(b: float) -> float:
    if b <= 0:
        raise DomainError(f"psi needs b > 0, got {b}")
    hi = 2.0
    while _gamma2(hi) < b:
        hi = 0.5 * (hi + S_MAX)
        if S_MAX - hi < 1e-15:
            raise DomainError(f"b={b} is beyond the numerical range of gamma_2")
    return brentq(lambda s: _gamma2(s) - b, 1.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def psi(b: float) -> float:
    return gamma(s_of_b(float(b)))[0]


def gamma_polyline(n: int = 1000, s_hi: float = 2.999) -> np.ndarray:
    s = np.linspace(1.0, s_hi, n)
    return np.array([gamma(x) for x in s])


@functools.lru_cache(maxsize=1)
def _fine_polyline() -> np.ndarray:
    poly = gamma_polyline(4000, 2.9999)
    poly.setflags(write=False)
    return poly


def _gamma_distance(a: float, b: float) -> float:
    poly = _fine_polyline()
    p = np.array([a, b])
    A, B = poly[:-1], poly[1:]
    AB = B - A
    t = np.clip(np.einsum("ij,ij->i", p - A, AB) / np.einsum("ij,ij->i", AB, AB), 0.0, 1.0)
    proj = A + t[:, None] * AB
    return float(np.min(np.linalg.norm(proj - p, axis=1)))


def in_domain(label: str, a: float, b: float) -> bool:
    """Stability-domain predicate with strict inequalities; boundary points are outside."""
    return domain_spec(label).contains(a, b)


# ---- polyline geometry ----

def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def segments_intersect(p1, p2, q1, q2, eps: float = 0.0) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        return True
    if abs(d1) <= eps and _on_segment(q1, p1, q2):
        return True
    if abs(d2) <= eps and _on_segment(q1, p2, q2):
        return True
    if abs(d3) <= eps and _on_segment(p1, q1, p2):
        return True
    if abs(d4) <= eps and _on_segment(p1, q2, p2):
        return True
    return False


def polyline_self_intersects(pts: np.ndarray) -> bool:
    """True if two non-adjacent segments of the polyline share a point."""
    pts = np.asarray(pts, dtype=float)
    nseg = len(pts) - 1
    if nseg < 2:
        return False
    lo, hi = np.minimum(pts[:-1], pts[1:]), np.maximum(pts[:-1], pts[1:])
    for i in range(nseg):
        # bounding-box prefilter over the later non-adjacent segments
        j = np.arange(i + 2, nseg)
        if not len(j):
            continue
        hit = j[(lo[j, 0] <= hi[i, 0]) & (hi[j, 0] >= lo[i, 0]) & (lo[j, 1] <= hi[i, 1]) & (hi[j, 1] >= lo[i, 1])]
        for k in hit:
            if segments_intersect(pts[i], pts[i + 1], pts[k], pts[k + 1]):
                return True
    return False


def self_intersection_check(s_grid: Optional[np.ndarray] = None) -> bool:
    """True iff the sampled gamma curve has no self-intersection."""
    s = np.linspace(1.0, 2.999, 1000) if s_grid is None else np.asarray(s_grid, dtype=float)
    pts = np.array([gamma(x) for x in s])
    return not polyline_self_intersects(pts)


# ---- sampling against the spectrum ----

def _row_job(args) -> List[dict]:
    label, a_vals, b, alpha_shift, T, margin_band, neutral_tol = args
    H = named_group(label)
    spec = control_matrix(branch(label).law, H)
    dom = domain_spec(label)
    out = []
    for a in a_vals:
        rec = {"a": float(a), "b": float(b)}
        if a <= 0 or b <= 0:
            out.append(dict(rec, inside=False, unstable_count=-1, boundary_distance=0.0, agree=True))
            continue
        p = Params(alpha_shift * a, a, b)
        try:
            cs = char_system(p, spec, T)
            unstable = sum(count_unstable_roots(q, margin=-neutral_tol).winding for q in cs.rows)
        except SpectralError as e:
            log.warning(f"spectral count failed at a={a:.4g}, b={b:.4g}: {e}")
            unstable = -1
        inside = dom.contains(a, b)
        dist = dom.boundary_distance(a, b)
        agree = (inside == (unstable == 0)) if unstable >= 0 else False
        out.append(dict(rec, inside=inside, unstable_count=unstable, boundary_distance=dist,
                        agree=agree or dist <= margin_band))
    return out


def sample_domain(label: str, amax: float = 2.0, bmax: float = 6.0, n: int = 50, T: float = 2 * math.pi,
                  boundary_margin: float = 0.02, neutral_tol: float = 1e-8, jobs: Optional[int] = None) -> pd.DataFrame:
    """
    Grid a_i = amax*i/n, b_j = bmax*j/n (i, j = 1..n), domain predicate next to
    the spectral count at alpha = alpha0 and period T. `agree` is forced true
    within boundary_margin of the domain boundary.
    """
    key = normalize_label(label)
    domain_spec(key)
    if n <= 0:
        return pd.DataFrame(columns=DOMAIN_COLUMNS)
    shift = branch(key).shift
    a_vals = [amax * i / n for i in range(1, n + 1)]
    tasks = [(key, a_vals, bmax * j / n, shift, T, boundary_margin, neutral_tol) for j in range(1, n + 1)]
    recs: List[dict] = []
    if jobs == 1:
        for t in tasks:
            recs.extend(_row_job(t))
    else:
        with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
            for rows in ex.map(_row_job, tasks):
                recs.extend(rows)
    df = pd.DataFrame(recs, columns=DOMAIN_COLUMNS)
    log.info(f"{key}: {len(df)} grid points, {int((~df['agree']).sum())} disagreements")
    return df
