"""Complete hyperbolic structure of X_n by volume maximization, shapes and potential.

The volume functional is strictly concave on the angle-structure polytope, so
its interior critical point is the complete structure. Newton's method runs
in the affine chart of :func:`twistvol.angle_structures.polytope_chart`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .angle_structures import AngleVector, PolytopeChart, polytope_chart
from .hyperbolic_numerics import dilog, lobachevsky
from .twist_triangulations import TwistKnotSpec, build_spec, kernel_data, weight_forms

__all__ = [
    "SolverError",
    "ShapeVector",
    "CompleteStructure",
    "maximize_volume",
    "random_interior_start",
    "angles_to_shapes",
    "shape_logs",
    "gluing_residual",
    "shapes_to_y",
    "y_to_shapes",
    "band_signs",
    "potential_S",
    "potential_S_rewritten",
    "grad_S",
    "hess_S",
    "structure_to_json",
    "structure_from_json",
]

BOUNDARY_ANGLE = 1e-7
_FRACTION_TO_BOUNDARY = 0.05


class SolverError(RuntimeError):
    """Raised when the volume maximization fails; ``last`` holds the last iterate."""

    def __init__(self, message: str, last: np.ndarray | None = None) -> None:
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class ShapeVector:
    """Shape parameters of T_1..T_p, U, V, W in the upper half-plane."""

    n: int
    z: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.z, dtype=complex)
        if arr.shape != (build_spec(self.n).tet_count_ideal,):
            raise ValueError(f"wrong number of shapes: {arr.shape}")
        if np.any(arr.imag <= 0.0):
            raise ValueError("shapes must lie in the upper half-plane")
        arr.setflags(write=False)
        object.__setattr__(self, "z", arr)

    @property
    def z_prime(self) -> np.ndarray:
        return 1.0 / (1.0 - self.z)

    @property
    def z_dprime(self) -> np.ndarray:
        return (self.z - 1.0) / self.z


@dataclass(frozen=True)
class CompleteStructure:
    n: int
    angles: AngleVector
    shapes: ShapeVector
    y0: np.ndarray = field(repr=False)
    volume: float
    iterations: int
    grad_norm: float


# ---------------------------------------------------------------------------
# Volume maximization
# ---------------------------------------------------------------------------

def _volume(alpha: np.ndarray) -> float:
    return float(np.sum(lobachevsky(alpha)))


def random_interior_start(spec: TwistKnotSpec, rng: np.random.Generator,
                          chart: PolytopeChart | None = None) -> AngleVector:
    """A random strictly interior angle structure, reached along a random chart ray."""
    chart = chart or polytope_chart(spec)
    base = chart.base_point.entries
    direction = chart.tangent_basis @ rng.standard_normal(chart.dimension)
    neg = direction < 0
    reach = np.min(base[neg] / -direction[neg]) if neg.any() else 1.0
    return AngleVector(spec.n, base + rng.uniform(0.05, 0.9) * reach * direction)


def maximize_volume(spec: TwistKnotSpec, tol: float = 1e-11, max_iter: int = 200,
                    start: AngleVector | None = None) -> CompleteStructure:
    """Newton ascent of the volume functional with a fraction-to-boundary rule."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    chart = polytope_chart(spec)
    basis = chart.tangent_basis
    x = np.zeros(chart.dimension) if start is None else chart.coords(start)
    alpha = chart.point(x)
    value = _volume(alpha)
    grad_norm = math.inf
    for iteration in range(max_iter + 1):
        if alpha.min() < BOUNDARY_ANGLE:
            raise SolverError("boundary attraction", alpha)
        grad = basis.T @ -np.log(2.0 * np.sin(alpha))
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            break
        if iteration == max_iter:
            raise SolverError(f"no convergence in {max_iter} iterations "
                              f"(gradient norm {grad_norm:.3e})", alpha)
        hess = basis.T @ (-1.0 / np.tan(alpha)[:, None] * basis)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        if not grad @ step > 0:
            step = grad
        move = basis @ step
        shrinking = move < 0
        t = 1.0
        if shrinking.any():
            t = min(1.0, (1.0 - _FRACTION_TO_BOUNDARY) * np.min(alpha[shrinking] / -move[shrinking]))
        slope = grad @ step
        for _ in range(60):
            trial = alpha + t * move
            new_value = _volume(trial)
            # Near the optimum volume differences drop below rounding; a full
            # Newton step is then accepted unconditionally.
            if new_value >= value + 1e-4 * t * slope or (t == 1.0 and grad_norm < 1e-4):
                break
            t *= 0.5
        x = x + t * step
        alpha = chart.point(x)
        value = _volume(alpha)

    angles = AngleVector(spec.n, alpha)
    shapes = angles_to_shapes(spec, angles)
    return CompleteStructure(
        n=spec.n,
        angles=angles,
        shapes=shapes,
        y0=shapes_to_y(spec, shapes),
        volume=value,
        iterations=iteration,
        grad_norm=grad_norm,
    )


# ---------------------------------------------------------------------------
# Shapes and gluing equations
# ---------------------------------------------------------------------------

def _tet_signs(spec: TwistKnotSpec) -> np.ndarray:
    return np.array(spec.signs, dtype=float)


def angles_to_shapes(spec: TwistKnotSpec, angles) -> ShapeVector:
    arr = np.asarray(getattr(angles, "entries", angles), dtype=float)
    tri = arr.reshape(-1, 3)
    if tri.shape[0] != spec.tet_count_ideal:
        raise ValueError("angle vector does not fit the triangulation")
    if tri.min() <= 0.0 or tri.max() >= math.pi:
        raise ValueError("shapes need strictly interior angles")
    a, b, c = tri.T
    ratio = np.where(_tet_signs(spec) > 0, np.sin(c) / np.sin(b), np.sin(b) / np.sin(c))
    return ShapeVector(spec.n, ratio * np.exp(1j * a))


def shape_logs(spec: TwistKnotSpec, shapes: ShapeVector) -> np.ndarray:
    """Log of the shape parameter sitting on each angle slot (a, b, c).

    Angle a carries z. On positive tetrahedra c carries z' and b carries z'';
    on negative ones the roles of b and c are swapped.
    """
    z = shapes.z
    lz, lz1, lz2 = np.log(z), np.log(shapes.z_prime), np.log(shapes.z_dprime)
    pos = _tet_signs(spec) > 0
    b = np.where(pos, lz2, lz1)
    c = np.where(pos, lz1, lz2)
    return np.stack([lz, b, c], axis=1).ravel()


def gluing_residual(spec: TwistKnotSpec, z: ShapeVector) -> np.ndarray:
    """Edge equations (sum of logs minus 2 pi i, edges s, 0, .., p+1) and z_V - z_U."""
    edges = weight_forms(spec) @ shape_logs(spec, z) - 2j * math.pi
    p = spec.p
    return np.concatenate([edges, [z.z[p + 1] - z.z[p]]])


def band_signs(spec: TwistKnotSpec) -> np.ndarray:
    """Signs of the tetrahedra carrying y-coordinates (T_1..T_p, U, W)."""
    s = spec.signs
    return np.array(s[: spec.p + 1] + s[spec.p + 2:], dtype=float)


def _keep_v_dropped(spec: TwistKnotSpec, values: np.ndarray) -> np.ndarray:
    p = spec.p
    return np.concatenate([values[: p + 1], values[p + 2:]])


def shapes_to_y(spec: TwistKnotSpec, z: ShapeVector) -> np.ndarray:
    """y_j = sign_j (Log z_j - i pi) for T_1..T_p, U, W."""
    zs = _keep_v_dropped(spec, z.z)
    return band_signs(spec) * (np.log(zs) - 1j * math.pi)


def y_to_shapes(spec: TwistKnotSpec, y) -> np.ndarray:
    """Inverse of :func:`shapes_to_y` on the band: z = -exp(sign y)."""
    return -np.exp(band_signs(spec) * np.asarray(y, dtype=complex))


# ---------------------------------------------------------------------------
# Potential function
# ---------------------------------------------------------------------------

def _check_band(spec: TwistKnotSpec, y) -> np.ndarray:
    arr = np.asarray(y, dtype=complex)
    if arr.shape != (spec.p + 2,):
        raise ValueError(f"expected {spec.p + 2} coordinates, got shape {arr.shape}")
    im = -band_signs(spec) * arr.imag  # must lie in (0, pi)
    if np.any(im <= 0.0) or np.any(im >= math.pi):
        raise ValueError("point outside the band of the potential function")
    return arr


def _li2m(y: np.ndarray) -> np.ndarray:
    """Li2(-e^y)."""
    return dilog(-np.exp(y))


def _log1pexp(y: np.ndarray) -> np.ndarray:
    """Log(1 + e^y), principal branch."""
    return np.log(1.0 + np.exp(y))


def potential_S(spec: TwistKnotSpec, y) -> complex:
    y = _check_band(spec, y)
    kd = kernel_data(spec)
    p = spec.p
    yt, yu, yw = y[:p], y[p], y[p + 1]
    quad = 1j * (y @ kd.q @ y) + y @ kd.w_vector
    tower = 1j * np.sum(_li2m(yt)) if p else 0.0
    if spec.odd:
        tail = -2j * _li2m(yu) - 1j * _li2m(yw)
    else:
        tail = 1j * _li2m(yu) - 1j * dilog(-np.exp(-yu)) - 1j * _li2m(yw)
    return complex(quad + tower + tail)


def potential_S_rewritten(spec: TwistKnotSpec, y) -> complex:
    """Second closed form of S, with the U and W dilogarithms inverted."""
    y = _check_band(spec, y)
    kd = kernel_data(spec)
    p = spec.p
    yt, yu, yw = y[:p], y[p], y[p + 1]
    quad = 1j * (y @ kd.q @ y) + y @ kd.w_vector
    tower = 1j * np.sum(_li2m(yt)) if p else 0.0
    if spec.odd:
        tail = (2j * dilog(-np.exp(-yu)) + 1j * dilog(-np.exp(-yw))
                + 1j * yu ** 2 + 0.5j * yw ** 2 + 0.5j * math.pi ** 2)
    else:
        tail = (2j * _li2m(yu) + 1j * dilog(-np.exp(-yw))
                + 0.5j * yu ** 2 + 0.5j * yw ** 2 + 1j * math.pi ** 2 / 3)
    return complex(quad + tower + tail)


def grad_S(spec: TwistKnotSpec, y) -> np.ndarray:
    y = _check_band(spec, y)
    kd = kernel_data(spec)
    p = spec.p
    extra = np.empty(p + 2, dtype=complex)
    extra[:p] = -_log1pexp(y[:p])
    if spec.odd:
        extra[p] = 2.0 * _log1pexp(y[p])
    else:
        extra[p] = -_log1pexp(y[p]) - _log1pexp(-y[p])
    extra[p + 1] = _log1pexp(y[p + 1])
    return 2j * kd.q @ y + kd.w_vector + 1j * extra


def hess_S(spec: TwistKnotSpec, y) -> np.ndarray:
    y = _check_band(spec, y)
    kd = kernel_data(spec)
    p = spec.p
    sig = 1.0 / (1.0 + np.exp(-y))  # derivative of Log(1 + e^y)
    diag = np.empty(p + 2, dtype=complex)
    diag[:p] = -sig[:p]
    if spec.odd:
        diag[p] = 2.0 * sig[p]
    else:
        diag[p] = -sig[p] + 1.0 / (1.0 + np.exp(y[p]))
    diag[p + 1] = sig[p + 1]
    return 2j * kd.q + 1j * np.diag(diag)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _pairs(values: np.ndarray) -> list[list[float]]:
    return [[float(v.real), float(v.imag)] for v in values]


def structure_to_json(cs: CompleteStructure) -> str:
    doc = {
        "n": cs.n,
        "volume": cs.volume,
        "grad_norm": cs.grad_norm,
        "iterations": cs.iterations,
        "angles": cs.angles.entries.tolist(),
        "shapes": _pairs(cs.shapes.z),
        "y0": _pairs(cs.y0),
    }
    return json.dumps(doc)


def structure_from_json(text: str) -> CompleteStructure:
    doc = json.loads(text)
    n = int(doc["n"])
    return CompleteStructure(
        n=n,
        angles=AngleVector(n, np.array(doc["angles"], dtype=float)),
        shapes=ShapeVector(n, np.array([complex(*v) for v in doc["shapes"]])),
        y0=np.array([complex(*v) for v in doc["y0"]]),
        volume=float(doc["volume"]),
        iterations=int(doc["iterations"]),
        grad_norm=float(doc["grad_norm"]),
    )
