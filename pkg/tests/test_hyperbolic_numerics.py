from __future__ import annotations

import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from twistvol.angle_structures import random_shape_structure
from twistvol.hyperbolic_numerics import (
    bernoulli_numbers,
    bloch_wigner,
    dilog,
    lobachevsky,
    lobachevsky_derivative,
    volume_functional,
)
from twistvol.twist_triangulations import build_spec

PI = math.pi


def lobachevsky_quad(theta: float) -> float:
    """Defining integral by tanh-sinh quadrature, split at the log singularities (oracle)."""
    if theta == 0:
        return 0.0
    with mpmath.workdps(30):
        nodes = [mpmath.mpf(0)] + [k * mpmath.pi for k in range(1, int(theta // PI) + 1)]
        nodes.append(mpmath.mpf(theta))
        return float(mpmath.quad(lambda t: -mpmath.log(abs(2 * mpmath.sin(t))), nodes))


def test_lobachevsky_quad_oracle_agrees_with_scipy():
    val, _ = quad(lambda t: -math.log(2 * math.sin(t)), 0.0, PI / 6, epsabs=1e-13)
    assert lobachevsky_quad(PI / 6) == pytest.approx(val, abs=1e-12)


def test_bernoulli_numbers_against_mpmath():
    for k, value in enumerate(bernoulli_numbers(20)):
        expected = mpmath.bernoulli(k) if k != 1 else mpmath.mpf(-0.5)
        assert float(value) == pytest.approx(float(expected), abs=1e-15)


def test_lobachevsky_special_values():
    assert lobachevsky(0.0) == 0.0
    assert abs(lobachevsky(PI / 2)) < 1e-15
    assert lobachevsky(PI / 6) == pytest.approx(lobachevsky_quad(PI / 6), abs=1e-13)
    assert lobachevsky(PI / 6) == pytest.approx(0.50747080320, abs=1e-10)


@settings(max_examples=200)
@given(st.floats(min_value=-10.0, max_value=10.0))
def test_lobachevsky_against_clausen(theta):
    expected = float(mpmath.clsin(2, 2 * theta)) / 2
    assert lobachevsky(theta) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("theta", [0.1, 0.7, 1.3, 2.0, 3.0, 4.5])
def test_lobachevsky_against_defining_integral(theta):
    assert lobachevsky(theta) == pytest.approx(lobachevsky_quad(theta), abs=1e-12)


def test_lobachevsky_symmetries_and_duplication():
    theta = np.random.default_rng(0).uniform(-7, 7, 1000)
    assert np.max(np.abs(lobachevsky(-theta) + lobachevsky(theta))) < 1e-13
    assert np.max(np.abs(lobachevsky(theta + PI) - lobachevsky(theta))) < 1e-12
    dup = lobachevsky(2 * theta) - 2 * lobachevsky(theta) - 2 * lobachevsky(theta + PI / 2)
    assert np.max(np.abs(dup)) < 1e-11


def test_lobachevsky_rejects_non_finite():
    with pytest.raises(ValueError):
        lobachevsky(math.inf)


def test_lobachevsky_derivative_matches_finite_differences():
    theta = np.random.default_rng(1).uniform(0.05, PI - 0.05, 50)
    h = 1e-6
    fd = (lobachevsky(theta + h) - lobachevsky(theta - h)) / (2 * h)
    assert np.allclose(fd, lobachevsky_derivative(theta), rtol=1e-6, atol=1e-8)


def test_dilog_special_values():
    assert dilog(0.0) == 0
    assert dilog(-1.0) == pytest.approx(-PI ** 2 / 12, abs=1e-15)
    z = complex(-2, 1)
    res = dilog(1 / z) + dilog(z) + PI ** 2 / 6 + 0.5 * cmath.log(-z) ** 2
    assert abs(res) < 1e-11


@settings(max_examples=300)
@given(st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False))
def test_dilog_against_mpmath(z):
    if z.imag == 0 and z.real >= 1:
        return
    assert abs(dilog(z) - complex(mpmath.polylog(2, z))) < 1e-12


def test_dilog_inversion_relation_random():
    rng = np.random.default_rng(2)
    z = rng.uniform(-10, 10, 1000) + 1j * rng.choice([-1, 1], 1000) * rng.uniform(0.1, 10, 1000)
    res = dilog(1 / z) + dilog(z) + PI ** 2 / 6 + 0.5 * np.log(-z) ** 2
    assert np.max(np.abs(res)) < 1e-11


def test_dilog_cut_is_rejected():
    with pytest.raises(ValueError, match="branch cut"):
        dilog(2.0)


def test_bloch_wigner_values():
    assert abs(bloch_wigner(0.5)) < 1e-16
    z = 0.3 + 0.4j
    assert bloch_wigner(z.conjugate()) == pytest.approx(-bloch_wigner(z), abs=1e-15)
    regular = cmath.exp(1j * PI / 3)
    assert bloch_wigner(regular) == pytest.approx(3 * float(mpmath.clsin(2, 2 * PI / 3)) / 2, abs=1e-13)
    assert bloch_wigner(regular) == pytest.approx(1.01494160, abs=1e-8)


def test_bloch_wigner_three_fold_symmetry():
    rng = np.random.default_rng(3)
    z = rng.uniform(-5, 5, 1000) + 1j * rng.uniform(1e-3, 5, 1000)
    d = bloch_wigner(z)
    assert np.max(np.abs(bloch_wigner((z - 1) / z) - d)) < 1e-11
    assert np.max(np.abs(bloch_wigner(1 / (1 - z)) - d)) < 1e-11


def test_bloch_wigner_on_real_axis_beyond_one():
    assert abs(bloch_wigner(3.0)) < 1e-15
    with pytest.raises(ValueError):
        bloch_wigner(1.0)


@settings(max_examples=100)
@given(st.floats(0.01, PI - 0.02), st.floats(0.005, 0.99))
def test_tetrahedron_volume_two_routes(a, frac):
    # angles (a, b, c) and the shape z = sin c / sin b e^{ia} describe the same tetrahedron
    b = frac * (PI - a)
    c = PI - a - b
    z = math.sin(c) / math.sin(b) * cmath.exp(1j * a)
    assert bloch_wigner(z) == pytest.approx(lobachevsky(a) + lobachevsky(b) + lobachevsky(c), abs=1e-11)


def test_volume_functional_regular():
    spec = build_spec(3)
    vv = volume_functional(spec, np.full(9, PI / 3))
    assert vv.value == pytest.approx(9 * lobachevsky_quad(PI / 3), abs=1e-12)
    assert vv.value == pytest.approx(3.04482481, abs=1e-8)
    assert not vv.on_boundary


def test_volume_functional_flags_boundary():
    spec = build_spec(2)
    angles = np.array([0.0, 0.0, PI, PI / 6, PI / 2, PI / 3, PI / 3, PI / 3, PI / 3])
    vv = volume_functional(spec, angles)
    assert vv.on_boundary
    assert np.all(np.isinf(vv.gradient[:3]))
    assert vv.value == pytest.approx(lobachevsky(angles[3:]).sum(), abs=1e-15)
    assert vv.gradient[3] == pytest.approx(0.0, abs=1e-15)


def test_volume_functional_gradient_matches_finite_differences():
    spec = build_spec(6)
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(100):
        alpha = random_shape_structure(spec, rng).entries
        if alpha.min() < 1e-3 or alpha.max() > PI - 1e-3:
            continue
        vv = volume_functional(spec, alpha)
        k = rng.integers(alpha.size)
        up, down = alpha.copy(), alpha.copy()
        up[k] += h
        down[k] -= h
        fd = (lobachevsky(up).sum() - lobachevsky(down).sum()) / (2 * h)
        assert fd == pytest.approx(vv.gradient[k], rel=1e-6, abs=1e-7)


def test_volume_functional_rejects_wrong_size():
    with pytest.raises(ValueError):
        volume_functional(build_spec(3), np.full(7, 1.0))
