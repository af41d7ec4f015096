from __future__ import annotations

import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistvol.quantum_dilog import (
    QdilogParams,
    b_from_hbar,
    hbar_from_b,
    log_phi_b,
    log_phi_scaled,
    log_phi_scaled_strip,
    phi_b,
)

PI = math.pi


def log_phi_oracle(z: complex, b: float) -> complex:
    """Defining integral on a line above the pole at 0, in mpmath precision."""
    z = mp.mpc(z)
    lift = min(PI * b, PI / b) / 2
    margin = (b + 1 / b) - 2 * abs(float(z.imag))
    reach = max(60.0, 45.0 / margin)

    def f(t):
        w = mp.mpc(t, lift)
        return mp.exp(-2j * z * w) / (4 * mp.sinh(w * b) * mp.sinh(w / b) * w)

    # unit panels keep the oscillating exponential resolved for |Re z| up to 20
    with mp.workdps(20):
        return complex(mp.quad(f, mp.linspace(-reach, reach, int(2 * reach) + 1)))


def strip_points(b: float, count: int, seed: int, fraction: float = 0.9) -> np.ndarray:
    rng = np.random.default_rng(seed)
    half = fraction * 0.5 * (b + 1 / b)
    return rng.uniform(-6, 6, count) + 1j * rng.uniform(-half, half, count)


def classical(y: complex, b: float) -> complex:
    return complex(-1j / (2 * PI * b * b) * mp.polylog(2, -mp.exp(y)))


def test_b_from_hbar_examples():
    assert b_from_hbar(0.25) == pytest.approx(1.0, abs=1e-15)
    assert b_from_hbar(0.04) == pytest.approx((5 - math.sqrt(21)) / 2, rel=1e-14)


@settings(max_examples=100)
@given(st.floats(1e-3, 1.0))
def test_b_round_trip(b):
    # hbar is quadratic in b near b = 1, so only half the digits survive there
    assert b_from_hbar(hbar_from_b(b)) == pytest.approx(b, rel=1e-12, abs=2e-8)


@pytest.mark.parametrize("hbar", [0.3, 0.0, -1.0])
def test_b_from_hbar_domain(hbar):
    with pytest.raises(ValueError):
        b_from_hbar(hbar)


def test_params_validation():
    with pytest.raises(ValueError):
        QdilogParams(0.0)
    with pytest.raises(ValueError):
        QdilogParams(0.5, contour_radius=PI)
    assert QdilogParams(0.5).hbar == pytest.approx(0.16)


@pytest.mark.parametrize("b", [0.3, 0.7, 1.0, 1.6])
def test_value_at_zero_has_positive_phase(b):
    expected = cmath.exp(1j * PI * (b * b + 1 / (b * b)) / 24)
    assert abs(phi_b(0.0, QdilogParams(b)) - expected) <= 1e-12


def test_unitarity_on_real_axis():
    assert abs(abs(phi_b(1.3, QdilogParams(0.7))) - 1) <= 1e-10


def test_decay_to_one_on_the_left():
    assert abs(phi_b(-15.0, QdilogParams(0.8)) - 1) <= 1e-8


def test_consistency_with_scaled_form():
    b = 0.5
    y = -0.5 + 1.2j
    params = QdilogParams(b)
    assert abs(cmath.exp(log_phi_scaled(y, params)) - phi_b(y / (2 * PI * b), params)) <= 1e-9


@pytest.mark.parametrize("b", [0.3, 0.7, 1.0, 1.6])
def test_against_integral_oracle(b):
    params = QdilogParams(b)
    half = 0.5 * (b + 1 / b)
    zs = list(strip_points(b, 5, seed=int(10 * b)))
    zs += [0.4 + 0.97j * half, -0.7 - 0.97j * half, 3.0 + 0.5j * half]
    for z in zs:
        assert abs(log_phi_b(z, params) - log_phi_oracle(z, b)) <= 1e-9


@pytest.mark.parametrize("b", [0.3, 0.8])
def test_relative_accuracy_on_test_strip(b):
    params = QdilogParams(b)
    rng = np.random.default_rng(3)
    half = 0.9 * 0.5 * (b + 1 / b)
    zs = rng.uniform(-20, 20, 4) + 1j * rng.uniform(-half, half, 4)
    for z in zs:
        reference = cmath.exp(log_phi_oracle(z, b))
        assert abs(phi_b(z, params) / reference - 1) <= 1e-9


def test_domain_errors():
    params = QdilogParams(0.5)
    with pytest.raises(ValueError):
        phi_b(1.25j, params)
    with pytest.raises(ValueError):
        log_phi_scaled(1 + 1j * PI, params)
    with pytest.raises(ValueError):
        log_phi_scaled_strip(1 + 1j * PI * 1.25, params)
    with pytest.raises(ValueError):
        phi_b(complex("nan"), params)


@pytest.mark.parametrize("b", [0.4, 0.9, 1.3])
def test_inversion(b):
    params = QdilogParams(b)
    z = strip_points(b, 200, seed=1)
    value = phi_b(z, params) * phi_b(-z, params)
    value *= np.exp(-1j * PI / 12 * (b * b + 1 / (b * b))) * np.exp(-1j * PI * z * z)
    assert np.max(np.abs(value - 1)) <= 1e-9


@pytest.mark.parametrize("b", [0.4, 0.9, 1.3])
def test_unitarity(b):
    params = QdilogParams(b)
    z = strip_points(b, 200, seed=2)
    value = np.conj(phi_b(z, params)) * phi_b(np.conj(z), params)
    assert np.max(np.abs(value - 1)) <= 1e-9


@pytest.mark.parametrize("b", [0.4, 0.9, 1.3])
def test_functional_equation(b):
    params = QdilogParams(b)
    half = 0.5 * (b + 1 / b)
    rng = np.random.default_rng(4)
    room = half - b / 2
    z = rng.uniform(-4, 4, 100) + 1j * rng.uniform(-0.95 * room, 0.95 * room, 100)
    lhs = phi_b(z - 0.5j * b, params)
    rhs = (1 + np.exp(2 * PI * b * z)) * phi_b(z + 0.5j * b, params)
    assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(rhs))) <= 1e-8


@pytest.mark.parametrize("d", [-0.4, 0.0, 0.5])
def test_growth_on_the_right(d):
    x = 15.0
    b = 0.8
    value = abs(phi_b(x + 1j * d, QdilogParams(b)))
    ratio = value / math.exp(-2 * PI * x * d)
    # modulus of exp(-i pi z^2) times the constant phase, which has modulus one
    assert ratio == pytest.approx(1.0, abs=1e-6)


def test_semiclassical_expansion():
    y = -1 + 0.5j * PI
    b = 0.1
    deviation = log_phi_scaled(y, QdilogParams(b)) - classical(y, b)
    first = complex(-(1j * PI * b * b / 12) * mp.polylog(0, -mp.exp(y)))
    second = complex((2j * PI * b * b) ** 3 * (7 / 240) / 24 * mp.polylog(-2, -mp.exp(y)))
    assert abs(deviation - first - second) <= 1e-8
    # B: the first-order coefficient with a 10% margin
    bound = 1.1 * PI / 12 * abs(complex(mp.polylog(0, -mp.exp(y))))
    assert abs(deviation.real) <= bound * b * b


def test_semiclassical_rate():
    y = -1 + 0.5j * PI
    dev = [(log_phi_scaled(y, QdilogParams(b)) - classical(y, b)).real for b in (0.2, 0.1)]
    assert 3.5 <= dev[0] / dev[1] <= 4.5


def test_parity():
    b = 0.3
    y = 2 + 0.8j
    params = QdilogParams(b)
    mirrored = -np.conj(y)
    lhs = (log_phi_scaled(mirrored, params) - classical(mirrored, b)).real
    rhs = (log_phi_scaled(y, params) - classical(y, b)).real
    assert abs(lhs - rhs) <= 1e-9


def test_symmetry_in_b():
    z = strip_points(0.7, 20, seed=5, fraction=0.8)
    assert np.max(np.abs(log_phi_b(z, QdilogParams(0.7)) - log_phi_b(z, QdilogParams(1 / 0.7)))) <= 1e-12


def test_vectorized_matches_scalar():
    params = QdilogParams(0.6)
    z = strip_points(0.6, 7, seed=6).reshape(7, 1)
    values = log_phi_b(z, params)
    assert values.shape == (7, 1)
    for zk, vk in zip(z.ravel(), values.ravel()):
        assert abs(log_phi_b(complex(zk), params) - vk) <= 1e-13
