"""Lobachevsky function, dilogarithm, Bloch-Wigner function and the volume functional."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .twist_triangulations import TwistKnotSpec

__all__ = [
    "bernoulli_numbers",
    "lobachevsky",
    "lobachevsky_derivative",
    "dilog",
    "bloch_wigner",
    "VolumeValue",
    "volume_functional",
]

_PI2_6 = math.pi ** 2 / 6


@lru_cache(maxsize=None)
def bernoulli_numbers(count: int) -> tuple[Fraction, ...]:
    """B_0 .. B_{count-1} with the convention B_1 = -1/2 (Akiyama-Tanigawa)."""
    out = []
    row: list[Fraction] = []
    for m in range(count):
        row.append(Fraction(1, m + 1))
        for j in range(m, 0, -1):
            row[j - 1] = j * (row[j - 1] - row[j])
        out.append(row[0])
    if count > 1:
        out[1] = -out[1]
    return tuple(out)


def _clausen_coeffs(terms: int = 30) -> np.ndarray:
    # Cl_2(x) = x - x log|x| + sum |B_2k| x^(2k+1) / (2k (2k+1)!),  |x| < 2 pi
    bern = bernoulli_numbers(2 * terms + 1)
    return np.array([float(abs(bern[2 * k]) / (2 * k * math.factorial(2 * k + 1)))
                     for k in range(1, terms + 1)])


_CLAUSEN = _clausen_coeffs()


def lobachevsky(theta):
    """Lobachevsky function Lambda(theta) = -int_0^theta log|2 sin t| dt.

    Uses Lambda(theta) = Cl_2(2 theta) / 2 after reducing theta to
    [-pi/2, pi/2]; the Clausen series then converges at least like 4^-k.
    Accepts scalars or arrays.
    """
    th = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(th)):
        raise ValueError("lobachevsky needs finite input")
    x = 2.0 * (th - math.pi * np.round(th / math.pi))
    x2 = x * x
    acc = np.zeros_like(x)
    for coeff in _CLAUSEN[::-1]:
        acc = acc * x2 + coeff
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(x == 0.0, 0.0, x * np.log(np.abs(np.where(x == 0.0, 1.0, x))))
    out = 0.5 * (x - logs + x * x2 * acc)
    return float(out) if out.ndim == 0 else out


def lobachevsky_derivative(theta):
    """Lambda'(theta) = -log|2 sin theta| (infinite at multiples of pi)."""
    th = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        out = -np.log(np.abs(2.0 * np.sin(th)))
    return float(out) if out.ndim == 0 else out


def _bernoulli_dilog_coeffs(terms: int = 40) -> np.ndarray:
    # Li_2(z) = sum_{n>=0} B_n u^(n+1) / (n+1)!,  u = -Log(1 - z)
    bern = bernoulli_numbers(terms)
    return np.array([float(bern[n] / math.factorial(n + 1)) for n in range(terms)])


_DILOG = _bernoulli_dilog_coeffs()


def _dilog_series(z: np.ndarray) -> np.ndarray:
    """Series part; valid for |z| <= 1 and Re z <= 1/2 where |u| < 1.8."""
    u = -np.log1p(-z)
    acc = np.zeros_like(u)
    for coeff in _DILOG[::-1]:
        acc = acc * u + coeff
    return acc * u


def _dilog_unit_disk(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    near_one = z.real > 0.5
    zs = z[~near_one]
    out[~near_one] = _dilog_series(zs)
    w = z[near_one]
    # reflection: Li2(w) + Li2(1 - w) = pi^2/6 - Log w Log(1 - w)
    out[near_one] = _PI2_6 - np.log(w) * np.log1p(-w) - _dilog_series(1.0 - w)
    return out


def dilog(z):
    """Principal dilogarithm on C minus [1, inf). Accepts scalars or arrays."""
    arr = np.asarray(z, dtype=complex)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError("dilog needs finite input")
    if np.any((arr.imag == 0.0) & (arr.real >= 1.0)):
        raise ValueError("dilog argument on the branch cut [1, inf)")
    out = np.empty_like(arr)
    inside = np.abs(arr) <= 1.0
    out[inside] = _dilog_unit_disk(arr[inside])
    big = arr[~inside]
    if big.size:
        # inversion: Li2(z) + Li2(1/z) = -pi^2/6 - Log(-z)^2 / 2
        out[~inside] = -_dilog_unit_disk(1.0 / big) - _PI2_6 - 0.5 * np.log(-big) ** 2
    return complex(out[0]) if scalar else out


def bloch_wigner(z):
    """Bloch-Wigner function D(z) = Im Li2(z) + arg(1 - z) log|z|."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any((arr == 0.0) | (arr == 1.0)):
        raise ValueError("Bloch-Wigner function is undefined at 0 and 1")
    on_cut = (arr.imag == 0.0) & (arr.real > 1.0)
    # D(z) = D(1/(1-z)) moves the cut (1, inf) onto (-inf, 0)
    w = np.where(on_cut, 1.0 / (1.0 - arr), arr)
    out = dilog(w).imag + np.angle(1.0 - w) * np.log(np.abs(w))
    return float(out[0]) if np.ndim(z) == 0 else out


# ---------------------------------------------------------------------------
# Volume functional
# ---------------------------------------------------------------------------

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class VolumeValue:
    """Volume of an angle assignment and its gradient.

    Gradient entries at angles within BOUNDARY_TOL of 0 or pi are set to
    +inf and flagged in ``unbounded``.
    """

    value: float
    gradient: np.ndarray = field(repr=False)
    unbounded: np.ndarray = field(repr=False)

    @property
    def on_boundary(self) -> bool:
        return bool(self.unbounded.any())


def volume_functional(spec: TwistKnotSpec, angles) -> VolumeValue:
    arr = np.asarray(getattr(angles, "entries", angles), dtype=float)
    if arr.size % 3 or arr.size // 3 not in (spec.tet_count_ideal, spec.tet_count_h):
        raise ValueError(f"angle vector of size {arr.size} does not fit n={spec.n}")
    if arr.min() < -BOUNDARY_TOL or arr.max() > math.pi + BOUNDARY_TOL:
        raise ValueError("angles must lie in [0, pi]")
    flag = (arr < BOUNDARY_TOL) | (arr > math.pi - BOUNDARY_TOL)
    grad = np.where(flag, np.inf, lobachevsky_derivative(np.where(flag, 1.0, arr)))
    return VolumeValue(float(np.sum(lobachevsky(arr))), grad, flag)
