"""Shape and angle structures on X_n and a chart of the angle-structure polytope."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .twist_triangulations import TwistKnotSpec, build_spec, edge_weights, weight_forms

__all__ = [
    "AngleVector",
    "ExtendedAngleVector",
    "PolytopeChart",
    "balancing_residual",
    "eps_max",
    "initial_structure",
    "complete_structure_n2",
    "polytope_chart",
    "random_shape_structure",
    "angles_to_json",
    "angles_from_json",
]

_SUM_TOL = 1e-12


def _check_triples(entries: np.ndarray, count: int) -> None:
    if entries.shape != (3 * count,):
        raise ValueError(f"expected {3 * count} angles, got shape {entries.shape}")
    if not np.all(np.isfinite(entries)):
        raise ValueError("angles must be finite")
    if entries.min() < 0.0 or entries.max() > math.pi:
        raise ValueError("angles must lie in [0, pi]")
    sums = entries.reshape(-1, 3).sum(axis=1)
    if np.abs(sums - math.pi).max() > _SUM_TOL:
        raise ValueError("each angle triple must sum to pi")


@dataclass(frozen=True)
class AngleVector:
    """Angles (a, b, c) per tetrahedron of X_n, ordered T_1..T_p, U, V, W."""

    n: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        _check_triples(arr, build_spec(self.n).tet_count_ideal)

    @property
    def spec(self) -> TwistKnotSpec:
        return build_spec(self.n)

    @property
    def triples(self) -> np.ndarray:
        return self.entries.reshape(-1, 3)

    def is_shape_structure(self) -> bool:
        return bool(self.entries.min() > 0.0 and self.entries.max() < math.pi)


@dataclass(frozen=True)
class ExtendedAngleVector:
    """Angles on Y_n: the X_n angles followed by the Z triple."""

    n: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        _check_triples(arr, build_spec(self.n).tet_count_h)

    @classmethod
    def extend(cls, angles: AngleVector, z_triple) -> "ExtendedAngleVector":
        return cls(angles.n, np.concatenate([angles.entries, np.asarray(z_triple, dtype=float)]))

    @property
    def base(self) -> AngleVector:
        return AngleVector(self.n, self.entries[:-3])


def _raw(spec: TwistKnotSpec, angles) -> np.ndarray:
    arr = np.asarray(getattr(angles, "entries", angles), dtype=float)
    if arr.shape != (3 * spec.tet_count_ideal,):
        raise ValueError(f"expected {3 * spec.tet_count_ideal} angles, got shape {arr.shape}")
    return arr


def balancing_residual(spec: TwistKnotSpec, angles) -> np.ndarray:
    """Edge weight minus 2 pi for the edges s, 1, .., p+1.

    The edge 0 is left out: on shape structures its weight is determined by
    the others because all weights add up to 2 (p + 3) pi.
    """
    om = edge_weights(spec, _raw(spec, angles))
    return np.concatenate([om[:1], om[2:]]) - 2.0 * math.pi


def eps_max(spec: TwistKnotSpec) -> float:
    """Supremum of the admissible parameters of :func:`initial_structure`.

    Binding constraint: c_U > 0, i.e. pi/6 - eps p^2/2 > 0 (odd) and
    pi/12 - eps p^2/6 > 0 (even). For p = 0 the structure does not depend on
    eps and every positive value is admissible.
    """
    p = spec.p
    if p == 0:
        return math.inf
    return math.pi / (3 * p * p) if spec.odd else math.pi / (2 * p * p)


def initial_structure(spec: TwistKnotSpec, eps: float) -> AngleVector:
    """An explicit strictly interior angle structure depending on eps."""
    if not (0.0 < eps < eps_max(spec)):
        raise ValueError(f"eps must lie in (0, {eps_max(spec)!r})")
    p, pi = spec.p, math.pi
    rows = [(eps, pi - eps * (j * j + 1), eps * j * j) for j in range(1, p)]
    if spec.odd:
        if p >= 1:
            rows.append((pi / 2 - eps * (p * p + 2 * p - 1) / 2,
                         pi / 2 - eps * (p * p - 2 * p + 1) / 2,
                         eps * p * p))
        x, y, z = pi / 2 + eps * p * p / 2, pi / 3, pi / 6 - eps * p * p / 2
        rows += [(x, y, z), (x, y, z), (y, z, x)]
    else:
        if p >= 1:
            rows.append((3 * pi / 4 - eps * (p * p + 2 * p - 1) / 2,
                         pi / 4 - eps * (p * p - 2 * p + 1) / 2,
                         eps * p * p))
        x, y, z = pi / 4 + eps * p * p / 2, 2 * pi / 3 - eps * p * p / 3, pi / 12 - eps * p * p / 6
        rows += [(x, y, z), (x, z, y), (z, y, x)]
    return AngleVector(spec.n, np.array(rows, dtype=float).ravel())


def complete_structure_n2() -> AngleVector:
    """The closed-form complete angle structure of X_2."""
    pi = math.pi
    u = (pi / 6, 2 * pi / 3, pi / 6)
    return AngleVector(2, np.array([u, (u[0], u[2], u[1]), (u[2], u[1], u[0])]).ravel())


# ---------------------------------------------------------------------------
# Polytope chart
# ---------------------------------------------------------------------------

def _constraint_matrix(spec: TwistKnotSpec) -> list[list[Fraction]]:
    count = spec.tet_count_ideal
    rows = []
    for t in range(count):
        row = [Fraction(0)] * (3 * count)
        row[3 * t: 3 * t + 3] = [Fraction(1)] * 3
        rows.append(row)
    for form in weight_forms(spec):
        rows.append([Fraction(int(round(x))) for x in form])
    return rows


def _rational_nullspace(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """Nullspace basis of an exact rational matrix by reduced row echelon form."""
    mat = [list(r) for r in rows]
    ncols = len(mat[0])
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        lead = mat[r][col]
        mat[r] = [x / lead for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col] != 0:
                factor = mat[i][col]
                mat[i] = [x - factor * y for x, y in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    basis = []
    for free in (c for c in range(ncols) if c not in pivots):
        vec = [Fraction(0)] * ncols
        vec[free] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -mat[i][free]
        basis.append(vec)
    return basis


@dataclass(frozen=True)
class PolytopeChart:
    """Affine chart base + basis @ x of the affine hull of the angle structures.

    ``tangent_basis`` has orthonormal columns.
    """

    n: int
    base_point: AngleVector
    tangent_basis: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.tangent_basis.shape[1]

    def point(self, coords) -> np.ndarray:
        return self.base_point.entries + self.tangent_basis @ np.asarray(coords, dtype=float)

    def coords(self, angles) -> np.ndarray:
        arr = np.asarray(getattr(angles, "entries", angles), dtype=float)
        return self.tangent_basis.T @ (arr - self.base_point.entries)


def default_eps(spec: TwistKnotSpec) -> float:
    return min(0.1, eps_max(spec) / 4)


def polytope_chart(spec: TwistKnotSpec) -> PolytopeChart:
    basis = _rational_nullspace(_constraint_matrix(spec))
    raw = np.array([[float(x) for x in v] for v in basis]).T
    q, _ = np.linalg.qr(raw)
    q.setflags(write=False)
    return PolytopeChart(spec.n, initial_structure(spec, default_eps(spec)), q)


def random_shape_structure(spec: TwistKnotSpec, rng: np.random.Generator) -> AngleVector:
    """Uniformly random shape structure (not balanced)."""
    tri = rng.dirichlet(np.ones(3), size=spec.tet_count_ideal) * math.pi
    tri[:, 2] = math.pi - tri[:, 0] - tri[:, 1]
    tri = np.clip(tri, 1e-12, math.pi)
    tri[:, 2] = math.pi - tri[:, 0] - tri[:, 1]
    return AngleVector(spec.n, tri.ravel())


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def angles_to_json(angles: AngleVector) -> str:
    return json.dumps({"n": angles.n, "angles": angles.entries.tolist()})


def angles_from_json(text: str) -> AngleVector:
    doc = json.loads(text)
    return AngleVector(int(doc["n"]), np.array(doc["angles"], dtype=float))
