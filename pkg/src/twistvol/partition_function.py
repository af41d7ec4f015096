"""State integral of X_n on the complete-structure contour and its asymptotics.

The integral over y in R^{p+2} + i d0 is

    Jfrak(hbar, x) = (2 pi sqrt(hbar))^-(p+3) int exp(E(y, x) / (2 pi hbar)) Phi-quotient dy

with E(y, x) = i y^T Q y + x-terms + y^T W - pi x. At x = 0 the integrand is
a product of one-variable factors times the Gaussian coupling
exp(2 i sum_{j<k} Q_jk y_j y_k / (2 pi hbar)), so Phi_b is tabulated once per
axis and the tensor-product sum only combines tables.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .geometric_solver import CompleteStructure, hess_S, maximize_volume, potential_S
from .quantum_dilog import QdilogParams, b_from_hbar, log_phi_b, log_phi_scaled_strip
from .twist_triangulations import TwistKnotSpec, kernel_data

__all__ = [
    "ContourSpec",
    "PartitionResult",
    "SaddleEstimate",
    "SweepSummary",
    "MonteCarloRequired",
    "QuadratureDiverged",
    "complete_structure",
    "default_contour",
    "integrand",
    "integrand_log_sb",
    "evaluate_Jfrak",
    "evaluate_J",
    "evaluate_Jfrak_qmc",
    "default_halfwidth",
    "decay_margin",
    "saddle_prediction",
    "volume_sweep",
    "fit_gap",
    "worker_count",
]

MAX_TENSOR_DIM = 4
DEFAULT_POINTS = 300
# The automatic policy doubles the points until the refined grid agrees to REFINE_RTOL.
REFINE_RTOL = 1e-7
MAX_POINTS = 4800
_CHUNK = 16


class MonteCarloRequired(RuntimeError):
    """Raised when a tensor grid would exceed the dimensional guard."""


class QuadratureDiverged(RuntimeError):
    """Raised when grid refinement does not settle."""


@dataclass(frozen=True)
class ContourSpec:
    """Truncated horizontal contour center + [-L, L]^{p+2} + i d0 in the y variables."""

    d0: tuple[float, ...]
    halfwidth: float
    points: int
    center: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if any(not 0 < abs(d) < math.pi for d in self.d0):
            raise ValueError("every imaginary offset must satisfy 0 < |d| < pi")
        if not self.halfwidth > 0:
            raise ValueError("halfwidth must be positive")
        if self.points < 2:
            raise ValueError("need at least two points per axis")
        if self.center is not None and len(self.center) != len(self.d0):
            raise ValueError("center and offsets have different lengths")

    def shifted(self, axis: int, delta: float) -> "ContourSpec":
        d0 = list(self.d0)
        d0[axis] += delta
        return replace(self, d0=tuple(d0))

    def refined(self, point_factor: float = 2.0, width_factor: float = 1.5) -> "ContourSpec":
        return replace(self, points=int(round(self.points * point_factor)),
                       halfwidth=self.halfwidth * width_factor)


@dataclass(frozen=True)
class PartitionResult:
    n: int
    hbar: float
    b: float
    value: complex
    log_abs: float
    quadrature_error: float
    volume: float
    contour: ContourSpec = field(repr=False)

    @property
    def abs_value(self) -> float:
        return math.exp(self.log_abs)

    @property
    def scaled_log(self) -> float:
        return 2 * math.pi * self.hbar * self.log_abs

    @property
    def volume_gap(self) -> float:
        return self.scaled_log + self.volume


@dataclass(frozen=True)
class SaddleEstimate:
    leading_magnitude: float
    log_leading_magnitude: float
    det_hess: complex
    rho_magnitude: float
    re_s: float


@dataclass(frozen=True)
class SweepSummary:
    results: tuple[PartitionResult, ...]
    slope: float
    intercept: float


def worker_count() -> int:
    raw = os.environ.get("TWISTVOL_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError("TWISTVOL_THREADS must be a positive integer") from exc
        if value < 1:
            raise ValueError("TWISTVOL_THREADS must be a positive integer")
        return value
    return os.cpu_count() or 1


@lru_cache(maxsize=64)
def complete_structure(n: int) -> CompleteStructure:
    from .twist_triangulations import build_spec

    return maximize_volume(build_spec(n))


# ---------------------------------------------------------------------------
# Integrand
# ---------------------------------------------------------------------------

def _check_hbar(hbar: float) -> None:
    if not 0 < hbar <= 0.25:
        raise ValueError("hbar must lie in (0, 1/4]")


def _phi_log_terms(spec: TwistKnotSpec, y: np.ndarray, x: complex, log_phi) -> complex:
    """Log of the Phi_b quotient; ``log_phi`` maps y to Log Phi_b(y / (2 pi sqrt(hbar)))."""
    p = spec.p
    yu, yw = y[p], y[p + 1]
    tower = -np.sum(log_phi(y[:p])) if p else 0.0
    if spec.odd:
        top = log_phi(yu) + log_phi(yu + x) + log_phi(yw)
    else:
        top = log_phi(x - yu) + log_phi(yw) - log_phi(yu)
    return tower + top


def _exponent(spec: TwistKnotSpec, y: np.ndarray, x: complex) -> complex:
    kd = kernel_data(spec)
    p = spec.p
    yu, yw = y[p], y[p + 1]
    if spec.odd:
        xterm = 1j * x * (x - yu - yw)
    else:
        xterm = 1j * x * (yu - yw - x)
    return 1j * (y @ kd.q @ y) + xterm + y @ kd.w_vector - math.pi * x


def integrand(spec: TwistKnotSpec, y, x: complex, hbar: float) -> complex:
    """Integrand of Jfrak (without the prefactor), Phi_b taken at y / (2 pi sqrt(hbar))."""
    _check_hbar(hbar)
    y = np.asarray(y, dtype=complex)
    if y.shape != (spec.p + 2,):
        raise ValueError(f"expected {spec.p + 2} coordinates")
    params = QdilogParams(b_from_hbar(hbar))
    scale = 2 * math.pi * math.sqrt(hbar)

    def log_phi(v):
        return log_phi_b(np.asarray(v) / scale, params)

    return complex(np.exp(_exponent(spec, y, x) / (2 * math.pi * hbar)
                          + _phi_log_terms(spec, y, x, log_phi)))


def integrand_log_sb(spec: TwistKnotSpec, y, hbar: float) -> complex:
    """S'_b(y) / (2 pi hbar) with S'_b = i y^T Q y + y^T W + 2 pi hbar Log(Phi quotient).

    The Phi_b values are taken through the scaled form y (1 + b^2).
    """
    _check_hbar(hbar)
    y = np.asarray(y, dtype=complex)
    b = b_from_hbar(hbar)
    params = QdilogParams(b)

    def log_phi(v):
        return log_phi_scaled_strip(np.asarray(v) * (1 + b * b), params)

    s_b = _exponent(spec, y, 0.0) + 2 * math.pi * hbar * _phi_log_terms(spec, y, 0.0, log_phi)
    return complex(s_b / (2 * math.pi * hbar))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def default_contour(spec: TwistKnotSpec, hbar: float, points: int = DEFAULT_POINTS,
                    halfwidth: float | None = None) -> ContourSpec:
    """Contour through the saddle y0 with the default truncation policy.

    ``halfwidth`` is in the y variables; see :func:`default_halfwidth`.
    """
    cs = complete_structure(spec.n)
    y0 = cs.y0
    if halfwidth is None:
        halfwidth = default_halfwidth(spec, hbar)
    return ContourSpec(d0=tuple(float(v) for v in y0.imag), halfwidth=float(halfwidth),
                       points=int(points), center=tuple(float(v) for v in y0.real))


def decay_margin(spec: TwistKnotSpec) -> float:
    """Smallest non-a angle of the tetrahedra carrying y-coordinates."""
    tri = complete_structure(spec.n).angles.triples
    keep = list(range(spec.p + 1)) + [spec.p + 2]
    return float(np.min(tri[keep, 1:]))


def default_halfwidth(spec: TwistKnotSpec, hbar: float) -> float:
    """Halfwidth in the y variables.

    Along each axis the integrand decays at least like exp(-delta |y'| / sqrt(hbar))
    in the variables y' = y / (2 pi sqrt(hbar)), so the window
    max(10, 12 sqrt(hbar) / delta) in y' leaves tails below exp(-12).
    """
    return 2 * math.pi * math.sqrt(hbar) * max(10.0, 12.0 * math.sqrt(hbar) / decay_margin(spec))


@lru_cache(maxsize=32)
def _gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _axis_log_factors(spec: TwistKnotSpec, hbar: float, ys: list[np.ndarray],
                      x: complex) -> list[np.ndarray]:
    """Log of the single-axis factors of the integrand on given axis points.

    For every x the Phi_b quotient and the x-terms split into one factor per
    axis, so the Gaussian coupling is the only cross-axis term.
    """
    kd = kernel_data(spec)
    q, w = kd.q, kd.w_vector
    b = b_from_hbar(hbar)
    params = QdilogParams(b)
    lam = 1.0 / (2 * math.pi * hbar)

    def lphi(v):
        return log_phi_scaled_strip(v * (1 + b * b), params)

    logs = []
    for j, y in enumerate(ys):
        val = lam * (1j * q[j, j] * y * y + w[j] * y)
        if j < spec.p:
            val = val - lphi(y)
        elif j == spec.p:
            if spec.odd:
                val = val + lphi(y) + lphi(y + x) - lam * 1j * x * y
            else:
                val = val + lphi(x - y) - lphi(y) + lam * 1j * x * y
        else:
            val = val + lphi(y) - lam * 1j * x * y
        logs.append(val)
    return logs


def _axis_points(contour: ContourSpec, unit: np.ndarray) -> list[np.ndarray]:
    """Map points of [-1, 1] onto every axis of the contour."""
    center = contour.center or (0.0,) * len(contour.d0)
    return [c + contour.halfwidth * unit + 1j * d for c, d in zip(center, contour.d0)]


def _axis_tables(spec: TwistKnotSpec, hbar: float, contour: ContourSpec, x: complex):
    """Nodes and log of the single-axis factors times the quadrature weights."""
    nodes, weights = _gauss_legendre(contour.points)
    ys = _axis_points(contour, nodes)
    logw = np.log(contour.halfwidth * weights)
    return ys, [v + logw for v in _axis_log_factors(spec, hbar, ys, x)]


def _tensor_sum(ys: list[np.ndarray], logs: list[np.ndarray], coupling: np.ndarray,
                shift: complex) -> complex:
    """Sum over the tensor grid of exp(sum logs + coupling terms - shift)."""
    dim = len(ys)
    m0 = ys[0].size

    def chunk(lo: int) -> complex:
        hi = min(lo + _CHUNK, m0)
        acc = (logs[0][lo:hi] - shift).reshape((-1,) + (1,) * (dim - 1))
        shapes = []
        for j in range(dim):
            shape = [1] * dim
            shape[j] = -1
            shapes.append(shape)
        yv = [ys[0][lo:hi].reshape(shapes[0])] + [ys[j].reshape(shapes[j]) for j in range(1, dim)]
        for j in range(1, dim):
            acc = acc + logs[j].reshape(shapes[j])
        for j in range(dim):
            for k in range(j + 1, dim):
                if coupling[j, k] != 0.0:
                    acc = acc + coupling[j, k] * yv[j] * yv[k]
        return complex(np.exp(acc).sum())

    starts = list(range(0, m0, _CHUNK))
    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    return complex(math.fsum(v.real for v in parts), math.fsum(v.imag for v in parts))


def _jfrak_log(spec: TwistKnotSpec, hbar: float, x: complex, contour: ContourSpec) -> complex:
    """Complex logarithm of Jfrak on a single grid (branch of the imaginary part arbitrary)."""
    dim = spec.p + 2
    if dim > MAX_TENSOR_DIM:
        raise MonteCarloRequired(f"tensor grid in dimension {dim} exceeds the guard; "
                                 "use monte-carlo mode")
    if len(contour.d0) != dim:
        raise ValueError("contour dimension does not match the triangulation")
    ys, logs = _axis_tables(spec, hbar, contour, x)
    lam = 1.0 / (2 * math.pi * hbar)
    coupling = 2j * lam * kernel_data(spec).q
    # Reference magnitude: the log-integrand at the grid point closest to the center.
    mid = [int(np.argmin(np.abs(y.real - (y.real.min() + y.real.max()) / 2))) for y in ys]
    ref = sum(logs[j][mid[j]] for j in range(dim))
    for j in range(dim):
        for k in range(j + 1, dim):
            ref += coupling[j, k] * ys[j][mid[j]] * ys[k][mid[k]]
    shift = complex(ref.real, 0.0)
    total = _tensor_sum(ys, logs, coupling, shift)
    if total == 0 or not np.isfinite(total):
        raise QuadratureDiverged("tensor sum vanished or overflowed")
    prefactor = -(spec.p + 3) * math.log(2 * math.pi * math.sqrt(hbar))
    sign = 1.0 if spec.odd else -1.0
    xterm = lam * (sign * 1j * x * x - math.pi * x)
    return complex(np.log(total)) + shift + prefactor + xterm


def evaluate_Jfrak(spec: TwistKnotSpec, hbar: float, x: complex = 0.0,
                   contour: ContourSpec | None = None, estimate_error: bool = True,
                   adaptive: bool | None = None) -> PartitionResult:
    """Jfrak(hbar, x) by tensor Gauss-Legendre quadrature.

    The error estimate is the difference to a grid with twice the points
    and 1.5 times the halfwidth. In adaptive mode (the default when no
    contour is given) the points are doubled until that estimate drops
    below REFINE_RTOL relative.
    """
    _check_hbar(hbar)
    auto = contour is None if adaptive is None else adaptive
    contour = contour or default_contour(spec, hbar)
    x = complex(x)
    log_val = _jfrak_log(spec, hbar, x, contour)
    rel = 0.0
    if estimate_error or auto:
        history = []
        while True:
            log_fine = _jfrak_log(spec, hbar, x, contour.refined())
            rel = float(abs(np.exp(log_fine - log_val) - 1.0))
            history.append((contour.points, rel))
            if not auto or rel <= REFINE_RTOL:
                break
            if 2 * contour.points > MAX_POINTS:
                trail = ", ".join(f"m={m}: {r:.2e}" for m, r in history)
                raise QuadratureDiverged(f"grid refinement did not settle at n={spec.n}, "
                                         f"hbar={hbar}, L={contour.halfwidth:.6g} ({trail})")
            contour = replace(contour, points=2 * contour.points)
            log_val = _jfrak_log(spec, hbar, x, contour)
    return PartitionResult(
        n=spec.n, hbar=hbar, b=b_from_hbar(hbar), value=complex(np.exp(log_val)),
        log_abs=log_val.real, quadrature_error=rel * math.exp(log_val.real),
        volume=complete_structure(spec.n).volume, contour=contour,
    )


def evaluate_J(spec: TwistKnotSpec, hbar: float, x: complex = 0.0, points: int | None = None,
               contour: ContourSpec | None = None) -> complex:
    """J(hbar, x) computed in the variables y' = y / (2 pi sqrt(hbar)).

    Uses its own grid (by default one more point per axis than Jfrak) and
    evaluates Phi_b directly at y'. Returns the complex logarithm of J.
    """
    _check_hbar(hbar)
    contour = contour or default_contour(spec, hbar)
    dim = spec.p + 2
    kd = kernel_data(spec)
    q, w = kd.q, kd.w_vector
    params = QdilogParams(b_from_hbar(hbar))
    scale = 2 * math.pi * math.sqrt(hbar)
    rh = math.sqrt(hbar)
    m = points or contour.points + 1
    nodes, weights = _gauss_legendre(m)
    center = contour.center or (0.0,) * dim
    half = contour.halfwidth / scale
    ys, logs = [], []
    for j in range(dim):
        y = center[j] / scale + half * nodes + 1j * contour.d0[j] / scale
        val = 2j * math.pi * q[j, j] * y * y + w[j] * y / rh
        if j < spec.p:
            val = val - log_phi_b(y, params)
        elif j == spec.p:
            if spec.odd:
                val = val + log_phi_b(y, params) + log_phi_b(y + x, params) - 2j * math.pi * x * y
            else:
                val = val + log_phi_b(x - y, params) - log_phi_b(y, params) + 2j * math.pi * x * y
        else:
            val = val + log_phi_b(y, params) - 2j * math.pi * x * y
        ys.append(y)
        logs.append(val + np.log(half * weights))
    coupling = 4j * math.pi * q
    mid = [m // 2] * dim
    ref = sum(logs[j][mid[j]] for j in range(dim))
    for j in range(dim):
        for k in range(j + 1, dim):
            ref += coupling[j, k] * ys[j][mid[j]] * ys[k][mid[k]]
    shift = complex(ref.real, 0.0)
    total = _tensor_sum(ys, logs, coupling, shift)
    sign = 1.0 if spec.odd else -1.0
    xterm = sign * 2j * math.pi * x * x - math.pi * x / rh
    return complex(np.log(total)) + shift + xterm


def evaluate_Jfrak_qmc(spec: TwistKnotSpec, hbar: float, x: complex = 0.0,
                       contour: ContourSpec | None = None, samples: int = 10 ** 7,
                       replicates: int = 8, seed: int = 0,
                       table_points: int = 2 ** 12 + 1) -> PartitionResult:
    """Randomized quasi-Monte-Carlo estimate of Jfrak in any dimension.

    Independent scrambled Sobol sequences sample the truncated contour box;
    the quadrature error is the standard error over the replicates. The
    single-axis factors are tabulated on a uniform grid and interpolated
    linearly. There is no accuracy guarantee: the integrand oscillates.
    """
    from scipy.stats import qmc

    _check_hbar(hbar)
    if samples < replicates or replicates < 2:
        raise ValueError("need at least two replicates and one sample per replicate")
    contour = contour or default_contour(spec, hbar)
    dim = spec.p + 2
    if len(contour.d0) != dim:
        raise ValueError("contour dimension does not match the triangulation")
    x = complex(x)
    unit = np.linspace(-1.0, 1.0, table_points)
    logs = _axis_log_factors(spec, hbar, _axis_points(contour, unit), x)
    center = np.array(contour.center or (0.0,) * dim)
    offset = center + 1j * np.array(contour.d0)
    coupling = 2j / (2 * math.pi * hbar) * kernel_data(spec).q
    upper = np.triu(coupling, 1)
    mid = table_points // 2
    shift = float(sum(v[mid].real for v in logs) + (offset @ upper @ offset).real)
    per_rep = 2 ** int(math.ceil(math.log2(samples / replicates)))
    chunk = min(per_rep, 2 ** 16)
    means = []
    for child in np.random.SeedSequence(seed).spawn(replicates):
        sampler = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(child))
        parts = []
        for _ in range(per_rep // chunk):
            t = 2.0 * sampler.random(chunk) - 1.0
            y = offset + contour.halfwidth * t
            val = np.einsum("sj,jk,sk->s", y, upper, y) - shift
            for j in range(dim):
                val = val + np.interp(t[:, j], unit, logs[j].real)
                val = val + 1j * np.interp(t[:, j], unit, logs[j].imag)
            parts.append(np.exp(val).sum())
        means.append(complex(math.fsum(v.real for v in parts), math.fsum(v.imag for v in parts))
                     / per_rep)
    means_arr = np.array(means) * (2 * contour.halfwidth) ** dim
    estimate = complex(means_arr.mean())
    if estimate == 0 or not np.isfinite(estimate):
        raise QuadratureDiverged("quasi-Monte-Carlo mean vanished or overflowed")
    stderr = float(np.std(means_arr, ddof=1) / math.sqrt(replicates))
    lam = 1.0 / (2 * math.pi * hbar)
    sign = 1.0 if spec.odd else -1.0
    log_val = (complex(np.log(estimate)) + shift - (spec.p + 3) * math.log(2 * math.pi * math.sqrt(hbar))
               + lam * (sign * 1j * x * x - math.pi * x))
    return PartitionResult(
        n=spec.n, hbar=hbar, b=b_from_hbar(hbar), value=complex(np.exp(log_val)),
        log_abs=log_val.real, quadrature_error=stderr / abs(estimate) * math.exp(log_val.real),
        volume=complete_structure(spec.n).volume, contour=contour,
    )


# ---------------------------------------------------------------------------
# Saddle point and sweeps
# ---------------------------------------------------------------------------

def saddle_prediction(spec: TwistKnotSpec, hbar: float) -> SaddleEstimate:
    """Leading term of the stationary-phase expansion around y0 (magnitude only)."""
    _check_hbar(hbar)
    y0 = complete_structure(spec.n).y0
    det = complex(np.linalg.det(hess_S(spec, y0)))
    dim = spec.p + 2
    rho = (2 * math.pi) ** (dim / 2) / math.sqrt(abs(det))
    re_s = potential_S(spec, y0).real
    log_lead = (-(spec.p + 3) * math.log(2 * math.pi * math.sqrt(hbar))
                + dim / 2 * math.log(2 * math.pi * hbar) + math.log(rho)
                + re_s / (2 * math.pi * hbar))
    return SaddleEstimate(leading_magnitude=math.exp(log_lead), log_leading_magnitude=log_lead,
                          det_hess=det, rho_magnitude=rho, re_s=re_s)


def fit_gap(results) -> tuple[float, float]:
    """Least-squares line gap = slope * hbar log(1/hbar) + intercept."""
    h = np.array([r.hbar for r in results])
    gaps = np.array([r.volume_gap for r in results])
    slope, intercept = np.polyfit(h * np.log(1.0 / h), gaps, 1)
    return float(slope), float(intercept)


def volume_sweep(spec: TwistKnotSpec, hbars, points: int | None = None,
                 halfwidth: float | None = None) -> SweepSummary:
    """Jfrak(hbar, 0) along decreasing hbar; ``points=None`` selects the adaptive policy."""
    hbars = [float(h) for h in hbars]
    if any(h2 >= h1 for h1, h2 in zip(hbars, hbars[1:])):
        raise ValueError("hbar values must be strictly decreasing")
    results = tuple(
        evaluate_Jfrak(spec, h, 0.0, default_contour(spec, h, points or DEFAULT_POINTS, halfwidth),
                       adaptive=points is None)
        for h in hbars
    )
    slope, intercept = fit_gap(results) if len(results) >= 2 else (math.nan, math.nan)
    return SweepSummary(results=results, slope=slope, intercept=intercept)
