# scripts/symgroup.py
"""
Spatio-temporal symmetry groups of the cube network.

An element is a triple (sign, perm, phase): a sign from Z2, a permutation of
the vertex labels 1..8 and a phase in [0, 1) stored as an exact Fraction.
Groups are loaded from config/groups.txt; "+H" and "-H" are the products of
H with the (Z2xO1)^o and (Z2xO1)^oz factors.

Matrix convention: T_g e_j = e_{g(j)}, so (T_g x)_i = x_{g^-1(i)} and
T_{g1 g2} = T_{g1} T_{g2} with (g1 g2)(i) = g1(g2(i)).
"""

from __future__ import annotations

import functools
import itertools
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
import scipy.linalg

N_VERTICES = 8
GROUPS_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "groups.txt")

BASE_GROUPS = ("S4", "D4z", "D3z", "D2d", "Z4c", "Z3t", "D4d", "D3", "S4-")
FACTOR_O = "Z2xO1^o"
FACTOR_OZ = "Z2xO1^oz"
INVERSION = "(17)(28)(35)(46)"

_CYCLES_RE = re.compile(r"^(\((\d*)\))+$")
_UNICODE = str.maketrans({
    "⁺": "+", "⁻": "-", "−": "-", "ℤ": "Z",
    "₀": "0", "₁": "1", "₂": "2", "₃": "3", "₄": "4",
    "ᶻ": "z", "ᶜ": "c", "ᵗ": "t", "ᵈ": "d", "ᵒ": "o",
    "×": "x",
})


class GroupError(ValueError):
    """Malformed cycle notation, unknown label or a set that is not a group."""


def parse_cycles(text: str) -> Tuple[int, ...]:
    """Cycle notation like "(17)(265843)" -> image tuple with perm[i-1] = g(i)."""
    s = "".join(str(text).split())
    if not s or not _CYCLES_RE.match(s):
        raise GroupError(f"malformed cycle notation: {text!r}")
    images = list(range(1, N_VERTICES + 1))
    seen = set()
    for body in re.findall(r"\((\d*)\)", s):
        cyc = [int(ch) for ch in body]
        for v in cyc:
            if v < 1 or v > N_VERTICES or v in seen:
                raise GroupError(f"bad or repeated symbol {v} in {text!r}")
            seen.add(v)
        for i, v in enumerate(cyc):
            images[v - 1] = cyc[(i + 1) % len(cyc)]
    return tuple(images)


def format_cycles(perm: Tuple[int, ...]) -> str:
    out, seen = [], set()
    for start in range(1, len(perm) + 1):
        if start in seen or perm[start - 1] == start:
            continue
        cyc, v = [], start
        while v not in seen:
            seen.add(v)
            cyc.append(str(v))
            v = perm[v - 1]
        out.append("(" + "".join(cyc) + ")")
    return "".join(out) or "()"


def parse_phase(text) -> Fraction:
    try:
        return Fraction(str(text).strip()) % 1
    except (ValueError, ZeroDivisionError) as e:
        raise GroupError(f"bad phase {text!r}: {e}") from e


@functools.lru_cache(maxsize=None)
def _perm_matrix(perm: Tuple[int, ...]) -> np.ndarray:
    m = np.zeros((len(perm), len(perm)), dtype=int)
    for j, gj in enumerate(perm):
        m[gj - 1, j] = 1
    m.setflags(write=False)
    return m


def permutation_matrix(g) -> np.ndarray:
    """0/1 matrix with column j holding e_{g(j)}; g is cycle text or an image tuple."""
    perm = parse_cycles(g) if isinstance(g, str) else tuple(g)
    if sorted(perm) != list(range(1, len(perm) + 1)):
        raise GroupError(f"not a permutation: {perm}")
    return _perm_matrix(perm)


@dataclass(frozen=True, order=True)
class GroupElement:
    sign: int
    perm: Tuple[int, ...]
    phase: Fraction = Fraction(0)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise GroupError(f"sign must be +1 or -1, got {self.sign}")
        if sorted(self.perm) != list(range(1, N_VERTICES + 1)):
            raise GroupError(f"perm is not a bijection on 1..{N_VERTICES}: {self.perm}")
        object.__setattr__(self, "phase", Fraction(self.phase) % 1)

    @classmethod
    def parse(cls, sign, cycles: str, phase="0") -> "GroupElement":
        return cls(int(sign), parse_cycles(cycles), parse_phase(phase))

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1, tuple(range(1, N_VERTICES + 1)), Fraction(0))

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        perm = tuple(self.perm[other.perm[i] - 1] for i in range(N_VERTICES))
        return GroupElement(self.sign * other.sign, perm, self.phase + other.phase)

    def inverse(self) -> "GroupElement":
        inv = [0] * N_VERTICES
        for i, gi in enumerate(self.perm):
            inv[gi - 1] = i + 1
        return GroupElement(self.sign, tuple(inv), -self.phase)

    @property
    def spatial(self) -> Tuple[int, Tuple[int, ...]]:
        return (self.sign, self.perm)

    def matrix(self) -> np.ndarray:
        """Signed permutation matrix r*T_h (the spatial action on R^8)."""
        return self.sign * _perm_matrix(self.perm)

    def cycles(self) -> str:
        return format_cycles(self.perm)

    def __str__(self) -> str:
        return f"({self.sign:+d},{self.cycles()},{self.phase})"


@dataclass(frozen=True)
class SymGroup:
    elements: FrozenSet[GroupElement]
    name: Optional[str] = None
    _sorted: Tuple[GroupElement, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        elems = frozenset(self.elements)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "_sorted", tuple(sorted(elems, key=_element_key)))
        _check_group(elems, self.name)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self._sorted)

    def __contains__(self, g) -> bool:
        return g in self.elements

    @property
    def label(self) -> str:
        return self.name or f"<{len(self)} elements>"


def _element_key(g: GroupElement):
    return (g.phase, -g.sign, g.perm)


def _check_group(elems: FrozenSet[GroupElement], name: Optional[str]):
    label = name or "group"
    if not elems:
        raise GroupError(f"{label}: empty element set")
    if GroupElement.identity() not in elems:
        raise GroupError(f"{label}: identity missing")
    phases: Dict[Tuple[int, Tuple[int, ...]], Fraction] = {}
    for g in elems:
        prev = phases.setdefault(g.spatial, g.phase)
        if prev != g.phase:
            raise GroupError(f"{label}: {g.cycles()} carries two phases {prev} and {g.phase}")
    for g in elems:
        if g.inverse() not in elems:
            raise GroupError(f"{label}: inverse of {g} missing")
    for g1, g2 in itertools.product(elems, repeat=2):
        if g1 * g2 not in elems:
            raise GroupError(f"{label}: not closed, {g1}*{g2} = {g1 * g2}")


def normalize_label(name: str) -> str:
    s = "".join(str(name).translate(_UNICODE).split())
    return s.replace("Z2xO1o", FACTOR_O).replace("Z2xO1oz", FACTOR_OZ) if "^" not in s else s


def read_group_table(path: str = GROUPS_FILE) -> Dict[str, List[GroupElement]]:
    """Parse the sectioned group data file into {label: [elements]}."""
    table: Dict[str, List[GroupElement]] = {}
    current = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                table.setdefault(current, [])
                continue
            if current is None:
                raise GroupError(f"{path}:{lineno}: element before any [section]")
            parts = line.split()
            if len(parts) != 3:
                raise GroupError(f"{path}:{lineno}: expected '<sign> <cycles> <p>/<q>', got {line!r}")
            try:
                table[current].append(GroupElement.parse(*parts))
            except GroupError as e:
                raise GroupError(f"{path}:{lineno}: {e}") from e
    return table


@functools.lru_cache(maxsize=None)
def _table(path: str = GROUPS_FILE) -> Dict[str, Tuple[GroupElement, ...]]:
    return {k: tuple(v) for k, v in read_group_table(path).items()}


def product_group(H: SymGroup, K: SymGroup, name: Optional[str] = None) -> SymGroup:
    """All pairwise products h*k, deduplicated; raises GroupError if not closed."""
    elems = frozenset(h * k for h in H for k in K)
    return SymGroup(elems, name=name or f"{H.label}x{K.label}")


@functools.lru_cache(maxsize=None)
def named_group(name: str) -> SymGroup:
    label = normalize_label(name)
    table = _table()
    if label in table:
        return SymGroup(frozenset(table[label]), name=label)
    if label[:1] in "+-" and label[1:] in BASE_GROUPS:
        factor = named_group(FACTOR_O if label[0] == "+" else FACTOR_OZ)
        return product_group(named_group(label[1:]), factor, name=label)
    raise GroupError(f"unknown group {name!r}; known: {', '.join(known_labels())}")


def known_labels() -> List[str]:
    return list(BASE_GROUPS) + [s + b for s in "+-" for b in BASE_GROUPS]


@functools.lru_cache(maxsize=None)
def full_symmetry_group() -> SymGroup:
    """Z2 x O4: the 96 signed cube automorphisms, all with phase 0."""
    rotations = SymGroup(frozenset(GroupElement(g.sign, g.perm) for g in named_group("S4")), name="S4")
    c = parse_cycles(INVERSION)
    ident = GroupElement.identity().perm
    extra = SymGroup(frozenset(GroupElement(s, p) for s in (1, -1) for p in (ident, c)), name="Z2xZ2")
    return product_group(rotations, extra, name="Z2xO4")


def kernel(H: SymGroup) -> SymGroup:
    return SymGroup(frozenset(g for g in H if g.phase == 0), name=f"ker({H.label})")


def t_zero(H: SymGroup) -> Fraction:
    phases = [g.phase for g in H if g.phase != 0]
    if not phases:
        raise GroupError(f"{H.label}: temporal part trivial (all phases are 0)")
    return min(phases)


def level_set(H: SymGroup) -> Tuple[GroupElement, ...]:
    t0 = t_zero(H)
    return tuple(g for g in H if g.phase == t0)


def time_reversed(H: SymGroup) -> SymGroup:
    """Same spatial elements with every phase negated (the group of x(-t))."""
    return SymGroup(frozenset(GroupElement(g.sign, g.perm, -g.phase) for g in H), name=f"rev({H.label})")


def null_basis(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """
    Orthonormal null-space basis with an absolute singular-value cutoff
    (scaled up only when the largest singular value exceeds 1), so a
    numerically zero A keeps its full null space.
    """
    A = np.atleast_2d(A)
    _, s, vh = scipy.linalg.svd(A)
    scale = max(1.0, float(s.max())) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def fixed_subspace(S: Iterable[GroupElement]) -> np.ndarray:
    """Orthonormal basis (columns) of {x in R^8 : r*T_h x = x for all (r,h) in S}."""
    elems = list(S)
    if not elems:
        raise GroupError("fixed_subspace needs a nonempty element set")
    eye = np.eye(N_VERTICES)
    stacked = np.vstack([g.matrix() - eye for g in elems])
    return null_basis(stacked)


def average_matrix(S: Iterable[GroupElement], exact: bool = False) -> np.ndarray:
    """(1/|S|) * sum of r*T_h; object array of Fractions when exact=True."""
    elems = list(S)
    if not elems:
        raise GroupError("cannot average over an empty set")
    if exact:
        total = np.zeros((N_VERTICES, N_VERTICES), dtype=object)
        total[:, :] = Fraction(0)
        for g in elems:
            total = total + g.matrix().astype(object)
        return total * Fraction(1, len(elems))
    return sum(g.matrix().astype(float) for g in elems) / len(elems)


def symmetry_residual(traj, H: Iterable[GroupElement], T: float, n_samples: int = 256) -> float:
    """
    max over (r,h,phi) and sample times of |r T_h x(t - phi T) - x(t)|_inf.

    traj must expose t_start, t_end and positions(t) -> (len(t), 8); the
    samples cover the last period for which every shifted time is available.
    """
    if T <= 0:
        raise ValueError(f"period must be positive, got {T}")
    span = traj.t_end - traj.t_start
    if span < T:
        raise ValueError(f"trajectory covers {span:.6g} time units, shorter than the period {T:.6g}")
    lo = max(traj.t_start + T, traj.t_end - T)
    ts = np.linspace(lo, traj.t_end, n_samples) if traj.t_end > lo else np.array([traj.t_end])
    x_now = traj.positions(ts)
    worst = 0.0
    for g in H:
        shifted = traj.positions(ts - float(g.phase) * T)
        moved = shifted @ g.matrix().T
        worst = max(worst, float(np.max(np.abs(moved - x_now))))
    return worst
