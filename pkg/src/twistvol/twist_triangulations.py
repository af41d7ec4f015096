"""Combinatorial catalog of the twist-knot triangulations X_n and Y_n.

X_n is an ideal triangulation of the complement of the twist knot K_n with
p + 3 tetrahedra ``T_1 .. T_p, U, V, W``. Y_n adds one tetrahedron ``Z`` and
is a triangulation of S^3 in which the knot is a single edge.

Each tetrahedron has vertices 0..3; face ``k`` is the face opposite vertex
``k``. Faces are glued by the unique order-preserving map between their
sorted vertex lists. The dihedral angle ``a`` sits on edges 01 and 23, ``b``
on 02 and 13, ``c`` on 03 and 12.

Edge classes are computed by union-find over the face pairings and then
named by matching their angle sums against the closed-form weight lists
below. A mismatch raises, so the face tables and the weight lists check
each other every time a triangulation is built.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

__all__ = [
    "EDGE_ORDER",
    "EDGE_LETTER",
    "TwistKnotSpec",
    "TetrahedronRecord",
    "KernelData",
    "build_spec",
    "build_ideal",
    "build_h",
    "edge_class_names",
    "h_edge_class_names",
    "weight_forms",
    "h_weight_forms",
    "edge_weights",
    "combinatorics_checks",
    "h_edge_weights",
    "kernel_data",
    "weight_identity_residual",
    "tau_weight_vector",
    "holonomies",
    "triangulation_to_json",
    "triangulation_from_json",
]

# Tetrahedron edges in storage order, and the angle letter carried by each.
EDGE_ORDER: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
EDGE_LETTER: dict[tuple[int, int], str] = {
    (0, 1): "a", (2, 3): "a",
    (0, 2): "b", (1, 3): "b",
    (0, 3): "c", (1, 2): "c",
}
_LETTER_OFFSET = {"a": 0, "b": 1, "c": 2}


@dataclass(frozen=True)
class TwistKnotSpec:
    """Index data of the twist knot K_n."""

    n: int
    parity: str
    p: int
    tet_count_ideal: int
    tet_count_h: int

    @property
    def odd(self) -> bool:
        return self.parity == "odd"

    @property
    def ideal_labels(self) -> tuple[str, ...]:
        return tuple(f"T{j}" for j in range(1, self.p + 1)) + ("U", "V", "W")

    @property
    def h_labels(self) -> tuple[str, ...]:
        return self.ideal_labels + ("Z",)

    @property
    def signs(self) -> tuple[int, ...]:
        """Signs of T_1..T_p, U, V, W."""
        u_sign = -1 if self.odd else 1
        return (1,) * self.p + (u_sign, -1, -1)

    @property
    def angle_count(self) -> int:
        return 3 * self.tet_count_ideal

    def angle_index(self, label: str, letter: str) -> int:
        """Position of angle ``letter`` of tetrahedron ``label`` in an angle vector."""
        return 3 * self.h_labels.index(label) + _LETTER_OFFSET[letter]


def build_spec(n: int) -> TwistKnotSpec:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError("twist knot index must be an integer")
    n = int(n)
    if n < 2:
        raise ValueError("non-hyperbolic or undefined twist knot index")
    if n % 2:
        parity, p = "odd", (n - 3) // 2
    else:
        parity, p = "even", (n - 2) // 2
    return TwistKnotSpec(n=n, parity=parity, p=p, tet_count_ideal=p + 3, tet_count_h=p + 4)


@dataclass(frozen=True)
class TetrahedronRecord:
    label: str
    sign: int
    face_gluings: tuple[tuple[int, int], ...]
    edge_classes: tuple[int, ...]


# ---------------------------------------------------------------------------
# Face tables. Each face carries a symbolic name and the two faces with the
# same name are glued. e{j} and f{j} run along the tower of T tetrahedra;
# the other names belong to the fixed U/V/W/Z block.
# ---------------------------------------------------------------------------

def _face_names(spec: TwistKnotSpec, with_z: bool) -> list[tuple[str, ...]]:
    p = spec.p

    def e(j: int) -> str:
        return f"e{j}"

    def f(j: int) -> str:
        # f_0 is the same face as e_1, and so is f_p when p = 0.
        return "e1" if j == 0 else f"f{j}"

    faces = [(e(j), e(j + 1), f(j), f(j - 1)) for j in range(1, p + 1)]
    if spec.odd:
        u = ("r", "v", "s", "g")
        v = ("g", "s2" if with_z else "s", f(p), "u")
        w = ("u", "r", "v", e(p + 1))
    else:
        u = ("r", "v", "s2" if with_z else "s", "g")
        v = ("s", "g", f(p), "u")
        w = ("u", "v", "r", e(p + 1))
    faces += [u, v, w]
    if with_z:
        faces.append(("m", "m", "s", "s2"))
    return faces


def _face_vertices(k: int) -> tuple[int, ...]:
    return tuple(v for v in range(4) if v != k)


def _pair_faces(names: list[tuple[str, ...]]) -> list[list[tuple[int, int]]]:
    where: dict[str, list[tuple[int, int]]] = {}
    for t, row in enumerate(names):
        for k, name in enumerate(row):
            where.setdefault(name, []).append((t, k))
    gluing = [[(-1, -1)] * 4 for _ in names]
    for name, sites in where.items():
        if len(sites) != 2:
            raise RuntimeError(f"face {name!r} occurs {len(sites)} times")
        (t0, k0), (t1, k1) = sites
        gluing[t0][k0] = (t1, k1)
        gluing[t1][k1] = (t0, k0)
    return gluing


class _UnionFind:
    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _edge_orbits(gluing: list[list[tuple[int, int]]]) -> list[list[tuple[int, int]]]:
    """Group (tetrahedron, edge slot) pairs into quotient edges."""
    slot = {e: i for i, e in enumerate(EDGE_ORDER)}
    uf = _UnionFind(6 * len(gluing))
    for t, row in enumerate(gluing):
        for k, (peer, peer_face) in enumerate(row):
            src, dst = _face_vertices(k), _face_vertices(peer_face)
            image = dict(zip(src, dst))
            for u, v in combinations(src, 2):
                pu, pv = sorted((image[u], image[v]))
                uf.union(6 * t + slot[(u, v)], 6 * peer + slot[(pu, pv)])
    orbits: dict[int, list[tuple[int, int]]] = {}
    for i in range(6 * len(gluing)):
        orbits.setdefault(uf.find(i), []).append(divmod(i, 6))
    return list(orbits.values())


# ---------------------------------------------------------------------------
# Closed-form edge weights as multisets of (tetrahedron label, angle letter).
# ---------------------------------------------------------------------------

def _x_forms(spec: TwistKnotSpec) -> dict[str, Counter]:
    p = spec.p
    forms: dict[str, Counter] = {}
    forms["s"] = Counter({("U", "a"): 2, ("V", "b"): 1, ("V", "c"): 1, ("W", "a"): 1, ("W", "b"): 1})
    if spec.odd:
        extra = Counter({("U", "b"): 1, ("V", "b"): 1, ("W", "a"): 1})
        top = Counter({("U", "b"): 1, ("U", "c"): 2, ("V", "a"): 1, ("V", "c"): 1,
                       ("W", "b"): 1, ("W", "c"): 1})
    else:
        extra = Counter({("U", "b"): 1, ("U", "c"): 2, ("V", "a"): 1, ("V", "b"): 1,
                         ("W", "a"): 1, ("W", "c"): 1})
        top = Counter({("U", "b"): 1, ("V", "c"): 1, ("W", "b"): 1})
    zero = Counter({("V", "a"): 1, ("W", "c"): 1})
    if p >= 1:
        zero[("T1", "a")] += 2
        zero[("T1", "c")] += 1
        for j in range(2, p + 1):
            zero[(f"T{j}", "a")] += 2
    forms["0"] = zero
    for k in range(1, p + 1):
        form = Counter({(f"T{k}", "b"): 2})
        if k >= 2:
            form[(f"T{k - 1}", "c")] += 1
        if k + 1 <= p:
            form[(f"T{k + 1}", "c")] += 1
        forms[str(k)] = form
    forms[str(p)] = forms[str(p)] + extra
    if p >= 1:
        top[(f"T{p}", "c")] += 1
    forms[str(p + 1)] = top
    return forms


def _h_forms(spec: TwistKnotSpec) -> dict[str, Counter]:
    p = spec.p
    base = _x_forms(spec)
    forms: dict[str, Counter] = {}
    forms["s"] = base["s"] + Counter({("Z", "a"): 1})
    forms["d"] = Counter({("U", "b"): 1, ("U", "c"): 1, ("W", "c"): 1, ("Z", "b"): 1, ("Z", "c"): 1})
    for k in range(p + 2):
        forms[str(k)] = base[str(k)]
    if spec.odd:
        top = Counter({("U", "c"): 1, ("V", "a"): 1, ("V", "c"): 1, ("W", "b"): 1,
                       ("Z", "b"): 1, ("Z", "c"): 1})
        if p >= 1:
            top[(f"T{p}", "c")] += 1
        forms[str(p + 1)] = top
    else:
        extra_x = Counter({("U", "b"): 1, ("U", "c"): 2, ("V", "a"): 1, ("V", "b"): 1,
                           ("W", "a"): 1, ("W", "c"): 1})
        extra_h = Counter({("U", "c"): 1, ("V", "a"): 1, ("V", "b"): 1, ("W", "a"): 1,
                           ("Z", "b"): 1, ("Z", "c"): 1})
        forms[str(p)] = base[str(p)] - extra_x + extra_h
    forms["K"] = Counter({("Z", "a"): 1})
    return forms


def edge_class_names(spec: TwistKnotSpec) -> tuple[str, ...]:
    """Names of the X_n edge classes in weight-vector order (s, 0, .., p+1)."""
    return ("s",) + tuple(str(k) for k in range(spec.p + 2))


def h_edge_class_names(spec: TwistKnotSpec) -> tuple[str, ...]:
    """Names of the Y_n edge classes in weight-vector order (s, d, 0, .., p+1, K)."""
    return ("s", "d") + tuple(str(k) for k in range(spec.p + 2)) + ("K",)


def _edge_id(spec: TwistKnotSpec, name: str) -> int:
    """Canonical integer of an edge class: k for edge k, then s, d, K."""
    special = {"s": spec.p + 2, "d": spec.p + 3, "K": spec.p + 4}
    return special[name] if name in special else int(name)


def _form_matrix(spec: TwistKnotSpec, forms: dict[str, Counter], names: Sequence[str],
                 labels: Sequence[str]) -> np.ndarray:
    mat = np.zeros((len(names), 3 * len(labels)))
    for r, name in enumerate(names):
        for (label, letter), coeff in forms[name].items():
            mat[r, 3 * labels.index(label) + _LETTER_OFFSET[letter]] = coeff
    return mat


def weight_forms(spec: TwistKnotSpec) -> np.ndarray:
    """Matrix M with edge_weights(angles) = M @ angles (rows s, 0, .., p+1)."""
    return _form_matrix(spec, _x_forms(spec), edge_class_names(spec), spec.ideal_labels)


def h_weight_forms(spec: TwistKnotSpec) -> np.ndarray:
    """Matrix of the Y_n weight forms (rows s, d, 0, .., p+1, K)."""
    return _form_matrix(spec, _h_forms(spec), h_edge_class_names(spec), spec.h_labels)


def _build(spec: TwistKnotSpec, with_z: bool) -> list[TetrahedronRecord]:
    names = _face_names(spec, with_z)
    labels = spec.h_labels if with_z else spec.ideal_labels
    signs = spec.signs + ((1,) if with_z else ())
    gluing = _pair_faces(names)
    expected = _h_forms(spec) if with_z else _x_forms(spec)
    by_form = {frozenset(form.items()): name for name, form in expected.items()}

    edge_ids = [[-1] * 6 for _ in labels]
    for orbit in _edge_orbits(gluing):
        form = Counter((labels[t], EDGE_LETTER[EDGE_ORDER[e]]) for t, e in orbit)
        name = by_form.get(frozenset(form.items()))
        if name is None:
            raise RuntimeError(f"edge class {dict(form)} matches no weight form (n={spec.n})")
        for t, e in orbit:
            edge_ids[t][e] = _edge_id(spec, name)
    found = {i for row in edge_ids for i in row}
    if len(found) != len(expected):
        raise RuntimeError(f"expected {len(expected)} edge classes, found {len(found)}")

    return [
        TetrahedronRecord(label=labels[t], sign=signs[t],
                          face_gluings=tuple(gluing[t]), edge_classes=tuple(edge_ids[t]))
        for t in range(len(labels))
    ]


def build_ideal(spec: TwistKnotSpec) -> list[TetrahedronRecord]:
    """The ideal triangulation X_n (p + 3 tetrahedra, p + 3 edges)."""
    return _build(spec, with_z=False)


def build_h(spec: TwistKnotSpec) -> list[TetrahedronRecord]:
    """The H-triangulation Y_n (p + 4 tetrahedra, p + 5 edges, knot edge K in Z)."""
    return _build(spec, with_z=True)


def _as_vector(values, size: int) -> np.ndarray:
    arr = np.asarray(getattr(values, "entries", values), dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"expected {size} angle entries, got shape {arr.shape}")
    return arr


def edge_weights(spec: TwistKnotSpec, angles) -> np.ndarray:
    """Edge weights of X_n, indexed (s, 0, 1, .., p+1)."""
    return weight_forms(spec) @ _as_vector(angles, 3 * spec.tet_count_ideal)


def h_edge_weights(spec: TwistKnotSpec, ext_angles) -> np.ndarray:
    """Edge weights of Y_n, indexed (s, d, 0, .., p+1, K)."""
    return h_weight_forms(spec) @ _as_vector(ext_angles, 3 * spec.tet_count_h)


def _involution_holds(records: Sequence[TetrahedronRecord]) -> bool:
    for t, rec in enumerate(records):
        for f, (peer, peer_face) in enumerate(rec.face_gluings):
            if (peer, peer_face) == (t, f):
                return False
            if tuple(records[peer].face_gluings[peer_face]) != (t, f):
                return False
    return True


def combinatorics_checks(spec: TwistKnotSpec) -> dict[str, bool]:
    """Count, involution and sign checks of X_n and Y_n, by name."""
    p = spec.p
    ideal, h = build_ideal(spec), build_h(spec)
    ideal_edges = {e for r in ideal for e in r.edge_classes}
    h_edges = {e for r in h for e in r.edge_classes}
    knot = _edge_id(spec, "K")
    knot_hits = [(r.label, k) for r in h for k, e in enumerate(r.edge_classes) if e == knot]
    q = kernel_data(spec).q
    return {
        "ideal tetrahedra": len(ideal) == p + 3,
        "ideal edges": len(ideal_edges) == p + 3,
        "ideal faces": sum(len(r.face_gluings) for r in ideal) == 2 * (2 * p + 6),
        "ideal involution": _involution_holds(ideal),
        "ideal signs": tuple(r.sign for r in ideal) == spec.signs,
        "h tetrahedra": len(h) == p + 4,
        "h edges": len(h_edges) == p + 5,
        "h faces": sum(len(r.face_gluings) for r in h) == 2 * (2 * p + 8),
        "h involution": _involution_holds(h),
        "knot edge once in Z": len(knot_hits) == 1 and knot_hits[0][0] == "Z",
        "weight sum": bool(np.all(weight_forms(spec).sum(axis=0) == 2)),
        "kernel symmetric": bool(np.array_equal(q, q.T)),
    }


# ---------------------------------------------------------------------------
# Partition-function data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelData:
    """Exact quadratic and linear data of the state integral on X_n.

    ``w_coeffs`` holds W_n divided by pi. ``mu_coeffs`` and ``lambda_coeffs``
    map angle-vector positions to rational coefficients.
    """

    q_matrix: tuple[tuple[Fraction, ...], ...]
    q_tilde_matrix: tuple[tuple[Fraction, ...], ...]
    w_coeffs: tuple[Fraction, ...]
    mu_coeffs: dict[int, Fraction]
    lambda_coeffs: dict[int, Fraction]

    @property
    def q(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.q_matrix])

    @property
    def q_tilde(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.q_tilde_matrix])

    @property
    def w_vector(self) -> np.ndarray:
        return math.pi * np.array([float(x) for x in self.w_coeffs])


def kernel_data(spec: TwistKnotSpec) -> KernelData:
    p = spec.p
    half = Fraction(1, 2)
    size = p + 3
    qt = [[Fraction(0)] * size for _ in range(size)]
    for i in range(p):
        for j in range(p):
            qt[i][j] = Fraction(min(i, j) + 1)
    iu, iv, iw = p, p + 1, p + 2

    def put(i: int, j: int, value) -> None:
        qt[i][j] = qt[j][i] = Fraction(value)

    if spec.odd:
        for k in range(1, p + 1):
            put(k - 1, iu, -k)
        put(iu, iu, p + 2)
        put(iu, iv, -3 * half)
        put(iu, iw, 1)
        put(iv, iv, 1)
        put(iv, iw, -half)
        put(iw, iw, 0)
        fold = 1  # Q is Q~ with the V row and column added onto U
    else:
        for k in range(1, p + 1):
            put(k - 1, iu, k)
        put(iu, iu, p + 1)
        put(iu, iv, -half)
        put(iu, iw, -1)
        put(iv, iv, -1)
        put(iv, iw, -half)
        put(iw, iw, 0)
        fold = -1  # Q is Q~ with the V row and column subtracted from U

    fold_mat = np.zeros((size, p + 2), dtype=object)
    for i in range(p + 2):
        fold_mat[i if i <= p else i + 1, i] = Fraction(1)
    fold_mat[iv, p] = Fraction(fold)
    qt_obj = np.array(qt, dtype=object)
    q_obj = fold_mat.T.dot(qt_obj).dot(fold_mat)
    q = tuple(tuple(Fraction(x) for x in row) for row in q_obj)

    w = [Fraction(-2 * (k * p - k * (k - 1) // 2)) for k in range(1, p + 1)]
    if spec.odd:
        w += [Fraction(p * p + p + 1), Fraction(1)]
    else:
        w += [Fraction(-(p * p + p + 3)), Fraction(1)]

    idx = spec.angle_index
    mu = {idx("U", "a"): Fraction(1), idx("V", "a"): Fraction(-1)}
    if spec.odd:
        lam = {idx("U", "a"): 2, idx("V", "a"): -2, idx("V", "c"): 2, idx("W", "b"): -2}
    else:
        lam = {idx("V", "a"): 2, idx("U", "a"): -2, idx("W", "a"): 2, idx("V", "b"): -2}
    return KernelData(
        q_matrix=q,
        q_tilde_matrix=tuple(tuple(row) for row in qt),
        w_coeffs=tuple(w),
        mu_coeffs=mu,
        lambda_coeffs={k: Fraction(v) for k, v in lam.items()},
    )


def _apply(coeffs: dict[int, Fraction], angles: np.ndarray) -> float:
    return float(sum(float(c) * angles[i] for i, c in coeffs.items()))


def holonomies(spec: TwistKnotSpec, angles) -> tuple[float, float]:
    """Angular holonomies (meridian, longitude) of an angle vector on X_n."""
    arr = _as_vector(angles, 3 * spec.tet_count_ideal)
    kd = kernel_data(spec)
    return _apply(kd.mu_coeffs, arr), _apply(kd.lambda_coeffs, arr)


def _triples(spec: TwistKnotSpec, arr: np.ndarray) -> np.ndarray:
    return arr[: 3 * spec.tet_count_ideal].reshape(-1, 3)


def weight_identity_residual(spec: TwistKnotSpec, shape) -> np.ndarray:
    """2 Q~ Gamma~ + C~ minus its closed form in edge weights and lambda.

    The result vanishes for every shape structure; the closed form only uses
    the edge weights of X_n, the longitude holonomy and constants.
    """
    arr = _as_vector(shape, 3 * spec.tet_count_ideal)
    p, pi = spec.p, math.pi
    tri = _triples(spec, arr)
    a, c = tri[:, 0], tri[:, 2]
    gamma = np.empty(p + 3)
    gamma[:p] = a[:p] - pi
    if spec.odd:
        gamma[p:] = pi - a[p:]
    else:
        gamma[p] = a[p] - pi
        gamma[p + 1:] = pi - a[p + 1:]
    lhs = 2.0 * kernel_data(spec).q_tilde @ gamma + c

    om = edge_weights(spec, arr)
    ws, wk = om[0], om[1:]  # wk[k] is the weight of edge k
    _, lam = holonomies(spec, arr)

    def tower(k: int) -> float:
        return k * (ws - 2 * (p + 2) * pi) + sum(j * wk[k - j] for j in range(1, k + 1))

    rhs = np.empty(p + 3)
    for k in range(1, p + 1):
        rhs[k - 1] = tower(k)
    if spec.odd:
        rhs[p] = wk[p + 1] - ws - tower(p) + 2 * pi - lam / 2
        rhs[p + 1] = lam / 2 + ws - 3 * pi
    else:
        rhs[p] = ws - wk[p + 1] + tower(p) - 4 * pi + lam / 2
        rhs[p + 1] = lam / 2 - pi
    rhs[p + 2] = 3 * pi - ws
    return lhs - rhs


def tau_weight_vector(spec: TwistKnotSpec, ext_angles) -> np.ndarray:
    """Linear coefficient vector 2 Q Gamma + C +/- c_V e_U of the Y_n integral.

    Only the X_n part of ``ext_angles`` enters. At the complete structure
    extended by a flat Z tetrahedron it equals W_n.
    """
    arr = np.asarray(getattr(ext_angles, "entries", ext_angles), dtype=float)
    if arr.shape not in {(3 * spec.tet_count_ideal,), (3 * spec.tet_count_h,)}:
        raise ValueError(f"unexpected angle vector shape {arr.shape}")
    p, pi = spec.p, math.pi
    tri = _triples(spec, arr)
    a, c = tri[:, 0], tri[:, 2]
    keep = list(range(p + 1)) + [p + 2]  # forget V
    gamma = np.empty(p + 2)
    gamma[:p] = a[:p] - pi
    gamma[p] = (pi - a[p]) if spec.odd else (a[p] - pi)
    gamma[p + 1] = pi - a[p + 2]
    out = 2.0 * kernel_data(spec).q @ gamma + c[keep]
    out[p] += c[p + 1] if spec.odd else -c[p + 1]
    return out


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def triangulation_to_json(spec: TwistKnotSpec, records: Sequence[TetrahedronRecord]) -> str:
    doc = {
        "n": spec.n,
        "tetrahedra": [
            {
                "label": r.label,
                "sign": r.sign,
                "faces": [list(g) for g in r.face_gluings],
                "edges": list(r.edge_classes),
            }
            for r in records
        ],
    }
    return json.dumps(doc)


def triangulation_from_json(text: str) -> tuple[TwistKnotSpec, list[TetrahedronRecord]]:
    doc = json.loads(text)
    spec = build_spec(doc["n"])
    records = [
        TetrahedronRecord(
            label=t["label"],
            sign=int(t["sign"]),
            face_gluings=tuple((int(a), int(b)) for a, b in t["faces"]),
            edge_classes=tuple(int(e) for e in t["edges"]),
        )
        for t in doc["tetrahedra"]
    ]
    return spec, records
