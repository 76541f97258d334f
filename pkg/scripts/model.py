# scripts/model.py
"""
Cube-coupled Van der Pol network, its equivariant delayed controls and the
reduced systems of the twelve Hopf branches.

State ordering of the first-order system is (x1..x8, v1..v8) everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from symgroup import (
    GroupElement, SymGroup, average_matrix, kernel, level_set, normalize_label, t_zero,
)

CUBE_EDGES = (
    (1, 2), (2, 3), (3, 4), (4, 1),
    (5, 6), (6, 7), (7, 8), (8, 5),
    (1, 5), (2, 6), (3, 7), (4, 8),
)


class ModelError(ValueError):
    pass


def interaction_matrix() -> np.ndarray:
    """The 8x8 matrix B: -3 on the diagonal, 1 for each cube edge."""
    B = -3.0 * np.eye(8)
    for i, j in CUBE_EDGES:
        B[i - 1, j - 1] = B[j - 1, i - 1] = 1.0
    return B


B_MATRIX = interaction_matrix()
B_MATRIX.setflags(write=False)


@dataclass(frozen=True)
class Params:
    alpha: float
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ModelError(f"coupling and gain must be non-negative, got a={self.a}, b={self.b}")


class ControlLaw(str, Enum):
    KERNEL_AVERAGE = "kernel"
    LEVEL_SET_AVERAGE = "level-set"


@dataclass(frozen=True)
class ControlSpec:
    law: ControlLaw
    group: SymGroup
    elements: Tuple[GroupElement, ...]
    avg_matrix: np.ndarray = field(repr=False, compare=False)
    delay_fraction: Fraction = Fraction(0)

    def exact_avg(self) -> np.ndarray:
        return average_matrix(self.elements, exact=True)

    def gain_matrix(self, b: float) -> np.ndarray:
        """b(-I + avg): the matrix acting on velocities when there is no delay."""
        return b * (self.avg_matrix - np.eye(8))


def control_matrix(law: Union[ControlLaw, str], H: SymGroup) -> ControlSpec:
    law = ControlLaw(law)
    if law is ControlLaw.KERNEL_AVERAGE:
        elems, frac = tuple(kernel(H)), Fraction(0)
    else:
        frac = t_zero(H)
        elems = level_set(H)
    avg = average_matrix(elems)
    avg.setflags(write=False)
    return ControlSpec(law=law, group=H, elements=elems, avg_matrix=avg, delay_fraction=frac)


def vdp_rhs(p: Params, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (p.alpha - x * x) * v - x + 0.5 * p.a * (B_MATRIX @ v)


def controlled_rhs(p: Params, spec: ControlSpec, x, v, v_delayed) -> np.ndarray:
    out = vdp_rhs(p, x, v)
    if p.b == 0:
        return out
    return out + control_term(p, spec, v, v_delayed)


def control_term(p: Params, spec: ControlSpec, v, v_delayed) -> np.ndarray:
    vd = v if spec.delay_fraction == 0 else v_delayed
    return p.b * (spec.avg_matrix @ vd - v)


def equivariance_defect(g: GroupElement, x, v, p: Params) -> float:
    M = g.matrix()
    lhs = vdp_rhs(p, M @ x, M @ v)
    rhs = M @ vdp_rhs(p, x, v)
    return float(np.max(np.abs(lhs - rhs)))


def first_order_rhs(p: Params, spec: Optional[ControlSpec] = None) -> Callable:
    """rhs(t, z, delayed) for z = (x, v); delayed holds z(t - tau) when the law is delayed."""

    def rhs(t, z, delayed=()):
        x, v = z[:8], z[8:]
        if spec is None or p.b == 0:
            acc = vdp_rhs(p, x, v)
        else:
            vd = delayed[0][8:] if (spec.delay_fraction != 0 and delayed) else v
            acc = controlled_rhs(p, spec, x, v, vd)
        return np.concatenate((v, acc))

    return rhs


# ---- branch catalog ----

@dataclass(frozen=True)
class Branch:
    label: str
    shift: int
    law: ControlLaw


BRANCHES: Dict[str, Branch] = {
    b.label: b for b in (
        Branch("+S4", 0, ControlLaw.LEVEL_SET_AVERAGE),
        Branch("-D4z", 1, ControlLaw.KERNEL_AVERAGE),
        Branch("-D3z", 1, ControlLaw.KERNEL_AVERAGE),
        Branch("-D2d", 1, ControlLaw.KERNEL_AVERAGE),
        Branch("-Z4c", 1, ControlLaw.LEVEL_SET_AVERAGE),
        Branch("-Z3t", 1, ControlLaw.LEVEL_SET_AVERAGE),
        Branch("+D4d", 2, ControlLaw.KERNEL_AVERAGE),
        Branch("+D3", 2, ControlLaw.LEVEL_SET_AVERAGE),
        Branch("+D2d", 2, ControlLaw.KERNEL_AVERAGE),
        Branch("+Z4c", 2, ControlLaw.LEVEL_SET_AVERAGE),
        Branch("+Z3t", 2, ControlLaw.LEVEL_SET_AVERAGE),
        Branch("-S4-", 3, ControlLaw.KERNEL_AVERAGE),
    )
}


def branch(label: str) -> Branch:
    key = normalize_label(label)
    if key not in BRANCHES:
        raise ModelError(f"{label!r} is not a Hopf branch; known: {', '.join(BRANCHES)}")
    return BRANCHES[key]


def bifurcation_point(label: str, a: float) -> float:
    return branch(label).shift * a


# ---- reduced systems ----

@dataclass(frozen=True)
class ReducedSystem:
    """
    y'' = vector_field(p, y, v, v_delayed) on R^m with v_delayed[i] = y'(t - delay_fractions[i] T).

    embedding maps y back to the cube: x(t) = sum over (f, M) of M @ y(t - f T).
    """
    label: str
    case: int
    shift: int
    dim: int
    vector_field: Callable = field(repr=False, compare=False)
    embedding: Tuple[Tuple[Fraction, np.ndarray], ...] = field(repr=False, compare=False, default=())
    delay_fractions: Tuple[Fraction, ...] = ()

    def first_order(self, p: Params) -> Callable:
        m = self.dim

        def rhs(t, z, delayed=()):
            y, v = z[:m], z[m:]
            vd = [d[m:] for d in delayed]
            return np.concatenate((v, self.vector_field(p, y, v, vd)))

        return rhs

    def embed_matrix(self) -> np.ndarray:
        """Instantaneous part of the embedding (delay fraction 0)."""
        return sum((M for f, M in self.embedding if f == 0), np.zeros((8, self.dim)))


def _col(vec) -> np.ndarray:
    return np.asarray(vec, dtype=float).reshape(8, 1)


_CASE1_VECTORS = {
    "+S4": (1, 1, 1, 1, 1, 1, 1, 1),
    "-D4z": (1, 1, 1, 1, -1, -1, -1, -1),
    "-D2d": (1, 0, -1, 0, 1, 0, -1, 0),
    "+D4d": (1, -1, 1, -1, 1, -1, 1, -1),
    "+D2d": (0, 1, 0, -1, 0, -1, 0, 1),
    "-S4-": (1, -1, 1, -1, -1, 1, -1, 1),
}


def _case1(label: str, k: int) -> ReducedSystem:
    def f(p, y, v, vd):
        return (p.alpha - k * p.a - y * y) * v - y

    emb = ((Fraction(0), _col(_CASE1_VECTORS[label])),)
    return ReducedSystem(label, 1, k, 1, f, emb)


def _case2(label: str, k: int) -> ReducedSystem:
    def f(p, y, v, vd):
        return (p.alpha - k * p.a - y * y) * v - y

    if k == 1:
        M = np.column_stack([(1, 0, -1, 0, 1, 0, -1, 0), (0, 1, 0, -1, 0, 1, 0, -1)]).astype(float)
    else:
        M = np.column_stack([(1, 0, -1, 0, -1, 0, 1, 0), (0, 1, 0, -1, 0, -1, 0, 1)]).astype(float)
    return ReducedSystem(label, 2, k, 2, f, ((Fraction(0), M),))


def _case3(label: str) -> ReducedSystem:
    minus = label.startswith("-")

    def f(p, y, v, vd):
        y1, y2 = y
        v1, v2 = v
        c2 = (v1 - 5 * v2) if minus else (v1 - v2)
        return np.array([
            (p.alpha - y1 * y1) * v1 - y1 + 1.5 * p.a * (v2 - v1),
            (p.alpha - y2 * y2) * v2 - y2 + 0.5 * p.a * c2,
        ])

    if minus:
        M = np.column_stack([(1, 0, 0, 0, 0, 0, -1, 0), (0, 1, -1, 1, 1, -1, 0, -1)]).astype(float)
    else:
        M = np.column_stack([(1, 0, 0, 0, 0, 0, 1, 0), (0, 1, 1, 1, 1, 1, 0, 1)]).astype(float)
    return ReducedSystem(label, 3, 1 if minus else 2, 2, f, ((Fraction(0), M),))


def _case4(label: str) -> ReducedSystem:
    minus = label.startswith("-")
    sgn = -1.0 if minus else 1.0

    def f(p, y, v, vd):
        y1, y2 = y
        v1, v2 = v
        d1, d2 = vd[0][1], vd[1][1]
        return np.array([
            (p.alpha - y1 * y1) * v1 - y1 + 0.5 * p.a * (v2 + d1 + d2 - 3 * v1),
            (p.alpha - y2 * y2) * v2 - y2 + 0.5 * p.a * (v1 - 3 * v2 + sgn * (d1 + d2)),
        ])

    M0 = np.zeros((8, 2))
    M1 = np.zeros((8, 2))
    M2 = np.zeros((8, 2))
    M0[0, 0], M0[1, 1] = 1, 1
    M0[6, 0], M0[7, 1] = sgn, sgn
    # x3 = s*y2(t-2T/3), x4 = y2(t-T/3), x5 = y2(t-2T/3), x6 = s*y2(t-T/3)
    M2[2, 1], M2[4, 1] = sgn, 1
    M1[3, 1], M1[5, 1] = 1, sgn
    emb = ((Fraction(0), M0), (Fraction(1, 3), M1), (Fraction(2, 3), M2))
    return ReducedSystem(label, 4, 1 if minus else 2, 2, f, emb, (Fraction(1, 3), Fraction(2, 3)))


def reduced_system(H: Union[SymGroup, str]) -> ReducedSystem:
    label = normalize_label(H if isinstance(H, str) else (H.name or ""))
    br = branch(label)
    if label in _CASE1_VECTORS:
        return _case1(label, br.shift)
    if label in ("-Z4c", "+Z4c"):
        return _case2(label, br.shift)
    if label in ("-D3z", "+D3"):
        return _case3(label)
    if label in ("-Z3t", "+Z3t"):
        return _case4(label)
    raise ModelError(f"no reduced system for {label}")
