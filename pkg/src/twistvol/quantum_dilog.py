"""Faddeev's quantum dilogarithm inside its strip of analyticity.

With v = b w the defining integral becomes

    Log Phi_b(y / (2 pi b)) = int_{Omega_R} exp(-i y v / pi) / (4 v sinh(v) sinh(b^2 v)) dv

where Omega_R runs along the real line and passes over the pole at 0 on a
half-circle of radius R. For b <= 1 the next poles sit at i pi and i pi / b^2,
so any R < pi is admissible; b > 1 is reduced to 1/b by the symmetry
Phi_b = Phi_{1/b}. The rays are integrated with composite Gauss-Legendre
panels, using the exponential form of the sinh product so that nothing
overflows, and truncated where the integrand has decayed below the
truncation tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QdilogParams",
    "b_from_hbar",
    "hbar_from_b",
    "phi_b",
    "log_phi_b",
    "log_phi_scaled",
    "log_phi_scaled_strip",
]

_GL_NODES = 32
_ARC_PANELS = 4
_BLOCK_ENTRIES = 2 ** 22


@dataclass(frozen=True)
class QdilogParams:
    b: float
    contour_radius: float = math.pi / 2
    truncation_tol: float = 1e-16

    def __post_init__(self) -> None:
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError("b must be a positive real number")
        if not 0 < self.contour_radius < math.pi:
            raise ValueError("contour radius must lie in (0, pi)")
        if not 0 < self.truncation_tol < 1:
            raise ValueError("truncation tolerance must lie in (0, 1)")

    @property
    def hbar(self) -> float:
        return hbar_from_b(self.b)

    @property
    def strip_halfwidth(self) -> float:
        """Phi_b is analytic for |Im z| below this value."""
        return 0.5 * (self.b + 1.0 / self.b)


def hbar_from_b(b: float) -> float:
    return 1.0 / (b + 1.0 / b) ** 2


def b_from_hbar(hbar: float) -> float:
    """The root b in (0, 1] of b / (1 + b^2) = sqrt(hbar)."""
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    if hbar > 0.25:
        raise ValueError("no real b for hbar > 1/4")
    s = math.sqrt(hbar)
    # b = (1 - sqrt(1 - 4 hbar)) / (2 sqrt(hbar)), written without cancellation
    return 2.0 * s / (1.0 + math.sqrt(1.0 - 4.0 * hbar))


@lru_cache(maxsize=None)
def _gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss_legendre(_GL_NODES)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return ((lo + hi) * 0.5 + half * x).ravel(), (half * w).ravel()


@lru_cache(maxsize=256)
def _contour(b2: float, radius: float, ray_end: float, panel: float):
    """Nodes and weights of Omega_R folded onto the positive ray plus the arc.

    Returns (t, decay, wt, v_arc, w_arc). The ray integrand at t is
    [exp(-i y t/pi) - exp(i y t/pi)] exp(decay) wt and the arc nodes are complex.
    """
    edges = [radius]
    while edges[-1] < 1.0 and edges[-1] * 2 < ray_end:
        edges.append(min(2 * edges[-1], 1.0))
    count = max(1, int(math.ceil((ray_end - edges[-1]) / panel)))
    edges.extend(np.linspace(edges[-1], ray_end, count + 1)[1:])
    t, wt = _panel_nodes(np.asarray(edges))
    # 1 / (4 t sinh t sinh(b2 t)) = exp(-t (1 + b2)) / (t (1 - e^-2t)(1 - e^-2 b2 t))
    decay = -t * (1 + b2)
    wt = wt / (t * -np.expm1(-2 * t) * -np.expm1(-2 * b2 * t))
    theta, wth = _panel_nodes(np.linspace(math.pi, 0.0, _ARC_PANELS + 1))
    v = radius * np.exp(1j * theta)
    w_arc = wth * 1j * v  # dv = i v dtheta
    w_arc = w_arc / (4 * v * np.sinh(v) * np.sinh(b2 * v))
    for arr in (t, decay, wt, v, w_arc):
        arr.setflags(write=False)
    return t, decay, wt, v, w_arc


def _ray_end(b2: float, im_y: np.ndarray, tol: float) -> tuple[float, float]:
    """Truncation point of the rays and the slowest decay rate."""
    rate = (1 + b2) - np.max(np.abs(im_y)) / math.pi
    return (math.log(1.0 / tol) + 5.0) / rate, rate


def _scaled_integral(y: np.ndarray, b: float, radius: float, tol: float) -> np.ndarray:
    """Log Phi_b(y / (2 pi b)) for b <= 1 and |Im y| < pi (1 + b^2)."""
    b2 = b * b
    out = np.empty(y.shape, dtype=complex)
    # Shrink the half-circle for large positive Re y so that exp(-i y v / pi)
    # stays of order one on it.
    level = np.zeros(y.shape, dtype=int)
    big = y.real * radius / math.pi > 1.0
    level[big] = np.ceil(np.log2(y.real[big] * radius / math.pi)).astype(int)
    for k in np.unique(level):
        sel = level == k
        ys = y[sel]
        r = radius * 2.0 ** (-int(k))
        end, _ = _ray_end(b2, ys.imag, tol)
        end = max(end, 4 * r)
        panel = min(1.0, 12 * math.pi / max(np.max(np.abs(ys.real)), 1.0))
        t, decay, wt, v, w_arc = _contour(b2, r, float(end), float(panel))
        vals = np.empty(ys.shape, dtype=complex)
        block = max(1, _BLOCK_ENTRIES // t.size)
        for lo in range(0, ys.size, block):
            yb = ys[lo:lo + block]
            phase = -1j * np.outer(yb, t) / math.pi
            rays = (np.exp(phase + decay) - np.exp(decay - phase)) @ wt
            vals[lo:lo + block] = rays + np.exp(-1j * np.outer(yb, v) / math.pi) @ w_arc
        out[sel] = vals
    return out


def _strip_integral(y: np.ndarray, b: float, radius: float, tol: float) -> np.ndarray:
    """Log Phi_b(y / (2 pi b)) for b <= 1 and |Im y| < pi (1 + b^2).

    Points with |Im y| >= pi are first moved by 2 pi i b^2 towards the real
    axis with the functional equation
    Phi(y) = (1 + exp(y + i pi b^2)) Phi(y + 2 pi i b^2)  (scaled variable),
    which keeps the ray integrand decaying at rate at least b^2.
    """
    b2 = b * b
    low = y.imag <= -math.pi
    high = y.imag >= math.pi
    ys = y.copy()
    ys[low] += 2j * math.pi * b2
    ys[high] -= 2j * math.pi * b2
    out = _scaled_integral(ys, b, radius, tol)
    out[low] += _log1p_exp(y[low] + 1j * math.pi * b2)
    out[high] -= _log1p_exp(y[high] - 1j * math.pi * b2)
    return out


def _log1p_exp(w: np.ndarray) -> np.ndarray:
    """Principal Log(1 + e^w) for |Im w| < pi without overflow."""
    pos = w.real > 0
    safe = np.where(pos, -w, w)
    return np.where(pos, w, 0) + np.log1p(np.exp(safe))


def _reduce(y: np.ndarray, b: float) -> tuple[np.ndarray, float]:
    """Rewrite Phi_b(y / 2 pi b) with b <= 1 using Phi_b = Phi_{1/b}."""
    if b <= 1.0:
        return y, b
    return y / (b * b), 1.0 / b


def log_phi_scaled_strip(y, params: QdilogParams) -> np.ndarray | complex:
    """Log Phi_b(y / (2 pi b)) on the full strip |Im y| < pi (1 + b^2)."""
    arr = np.asarray(y, dtype=complex)
    ys, b = _reduce(np.atleast_1d(arr).ravel(), params.b)
    if not np.all(np.isfinite(ys)):
        raise ValueError("non-finite argument")
    if np.any(np.abs(ys.imag) >= math.pi * (1 + b * b)):
        raise ValueError("argument outside the strip of analyticity")
    out = _strip_integral(ys, b, params.contour_radius, params.truncation_tol)
    return complex(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def log_phi_scaled(y, params: QdilogParams) -> np.ndarray | complex:
    """Log Phi_b(y / (2 pi b)) for |Im y| < pi."""
    arr = np.asarray(y, dtype=complex)
    if np.any(np.abs(arr.imag) >= math.pi):
        raise ValueError("|Im y| must be smaller than pi")
    return log_phi_scaled_strip(arr, params)


def log_phi_b(z, params: QdilogParams) -> np.ndarray | complex:
    """Principal logarithm of Phi_b(z), continuous in the strip and 0 at -inf."""
    arr = np.asarray(z, dtype=complex)
    if np.any(np.abs(arr.imag) >= params.strip_halfwidth):
        raise ValueError("argument outside the strip |Im z| < (b + 1/b)/2")
    return log_phi_scaled_strip(2 * math.pi * params.b * arr, params)


def phi_b(z, params: QdilogParams) -> np.ndarray | complex:
    return np.exp(log_phi_b(z, params))
